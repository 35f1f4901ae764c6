//! State-of-Risk engine: hourly per-feeder outage probabilities, either
//! loaded from a table or scored by a boosted decision-stump classifier.

mod model;
mod table;
mod train;

pub use model::{sigmoid, BoostedModel, FeatureRow, Split, Stump, MODEL_FORMAT, MODEL_VERSION};
pub use table::SorTable;
pub use train::{train, train_with_history, TrainParams};

use thiserror::Error;

use crate::metrics::{self, LabeledScore, MetricReport, MetricsError};

#[derive(Debug, Error, PartialEq)]
pub enum SorError {
    #[error("training data needs both classes ({positives} positive of {rows} rows)")]
    SingleClass { positives: usize, rows: usize },
    #[error("training needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("training data has no feature columns")]
    NoFeatures,
    #[error("row {row} is unlabeled")]
    MissingLabel { row: usize },
    #[error("row {row}: {detail}")]
    InconsistentFeatures { row: usize, detail: String },
    #[error("row is missing numeric feature `{0}`")]
    MissingFeature(String),
    #[error("feature `{feature}` has non-finite value {value}")]
    NonFinite { feature: String, value: f64 },
    #[error("invalid training parameter: {0}")]
    BadParams(String),
    #[error("duplicate SoR entry for ({feeder}, {hour})")]
    Duplicate { feeder: String, hour: usize },
    #[error("SoR table incomplete: no entry for ({feeder}, {hour})")]
    Incomplete { feeder: String, hour: usize },
    #[error("SoR entry ({feeder}, {hour}) = {value} is outside [0, 1]")]
    OutOfRange {
        feeder: String,
        hour: usize,
        value: f64,
    },
    #[error("SoR entry names unknown feeder `{0}`")]
    UnknownFeeder(String),
    #[error("SoR entry ({feeder}, {hour}) is beyond the {horizon} h horizon")]
    BeyondHorizon {
        feeder: String,
        hour: usize,
        horizon: usize,
    },
    #[error("unsupported model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Score labeled rows and grade them at the default cut-off.
pub fn evaluate(model: &BoostedModel, rows: &[FeatureRow]) -> Result<MetricReport, SorError> {
    let samples = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let label = row.label.ok_or(SorError::MissingLabel { row: i })?;
            Ok(LabeledScore::new(label, model.score(row)?)?)
        })
        .collect::<Result<Vec<_>, SorError>>()?;
    Ok(metrics::metric_report(
        &samples,
        metrics::DEFAULT_THRESHOLD,
    )?)
}

/// Score one row per (feeder, hour) into a complete SoR table.
pub fn build_sor_table(model: &BoostedModel, rows: &[FeatureRow]) -> Result<SorTable, SorError> {
    let entries = rows
        .iter()
        .map(|row| Ok((row.feeder_id.clone(), row.hour, model.score(row)?)))
        .collect::<Result<Vec<_>, SorError>>()?;
    SorTable::infer(entries)
}
