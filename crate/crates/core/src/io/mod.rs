//! File formats: TOML scenario and fleet descriptions, CSV tables, JSON models.

pub mod config;
pub mod tables;

pub use config::{load_scenario, write_scenario, FleetFile, ScenarioFile};
pub use tables::{
    load_model, read_derate, read_feature_rows, read_profiles, read_scores, read_sor, save_model,
    write_sor, CATEGORICAL_PREFIX,
};
