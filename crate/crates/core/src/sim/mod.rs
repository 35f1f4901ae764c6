//! Scenario assembly and Monte Carlo execution.

mod report;
mod run;
mod sampler;
mod sweep;

pub use report::{
    emit_report, FLEET_SERIES_HEADER, OUTAGES_HEADER, REPLICATIONS_HEADER, SUMMARY_HEADER,
    SWEEP_HEADER,
};
pub use run::{
    run_replication, run_simulation, run_simulation_with, ExecMode, FleetHour, FleetSeries,
    ReplicationResult, SimulationReport,
};
pub use sampler::{
    feeder_rng, repair_duration, sample_feeder_outages, sample_outages, OutageEvent,
};
pub use sweep::{sweep_repair_time, SweepRow};

use thiserror::Error;

use crate::dispatch::DispatchError;
use crate::fleet::{validate_fleet, Fleet, Violation};
use crate::sor::{SorError, SorTable};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid fleet: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidFleet(Vec<Violation>),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid repair sweep: {0}")]
    BadSweep(String),
    #[error("replication {replication}, n-grid {ngrid}, hour {hour}: {detail}")]
    Invariant {
        replication: usize,
        ngrid: String,
        hour: usize,
        detail: String,
    },
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Sor(#[from] SorError),
}

/// How grid-tied batteries are charged between outages.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ChargePolicy {
    /// Always recharge to full.
    #[default]
    Full,
    /// Hold the BESS at a reserve level that rises with the worst SoR over
    /// the next `lookahead` hours: `floor` when risk is nil, full once risk
    /// reaches `full_at_sor`.
    SorPrecharge {
        floor: f64,
        full_at_sor: f64,
        lookahead: usize,
    },
}

impl ChargePolicy {
    pub fn sor_default() -> Self {
        Self::SorPrecharge {
            floor: 0.3,
            full_at_sor: 0.05,
            lookahead: 6,
        }
    }

    /// BESS target as a fraction of capacity for a feeder's SoR series at `hour`.
    pub fn bess_target(&self, sor: &[f64], hour: usize) -> f64 {
        match *self {
            Self::Full => 1.0,
            Self::SorPrecharge {
                floor,
                full_at_sor,
                lookahead,
            } => {
                let end = (hour + 1 + lookahead).min(sor.len());
                let risk = sor
                    .get(hour + 1..end)
                    .unwrap_or(&[])
                    .iter()
                    .copied()
                    .fold(0.0, f64::max);
                let scaled = if full_at_sor > 0.0 {
                    (risk / full_at_sor).min(1.0)
                } else {
                    1.0
                };
                floor + (1.0 - floor) * scaled
            }
        }
    }
}

/// Per-(feeder, hour) weather derating of storage power ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct DerateTable {
    /// `factors[feeder][hour]`, same feeder order as the fleet.
    factors: Vec<Vec<f64>>,
}

impl DerateTable {
    /// Missing cells default to 1.0.
    pub fn from_entries(
        entries: impl IntoIterator<Item = (String, usize, f64)>,
        feeders: &[String],
        horizon: usize,
    ) -> Result<Self, SimError> {
        let mut factors = vec![vec![1.0; horizon]; feeders.len()];
        let mut seen = std::collections::HashSet::new();
        for (feeder, hour, factor) in entries {
            let fi = feeders.iter().position(|f| *f == feeder).ok_or_else(|| {
                SimError::InvalidScenario(format!("derate names unknown feeder `{feeder}`"))
            })?;
            if hour >= horizon {
                return Err(SimError::InvalidScenario(format!(
                    "derate hour {hour} beyond horizon"
                )));
            }
            if !(factor > 0.0 && factor <= 1.0) {
                return Err(SimError::InvalidScenario(format!(
                    "derate ({feeder}, {hour}) = {factor} not in (0, 1]"
                )));
            }
            if !seen.insert((fi, hour)) {
                return Err(SimError::InvalidScenario(format!(
                    "duplicate derate ({feeder}, {hour})"
                )));
            }
            factors[fi][hour] = factor;
        }
        Ok(Self { factors })
    }

    pub fn factor(&self, feeder_index: usize, hour: usize) -> f64 {
        self.factors[feeder_index][hour]
    }

    pub fn entries<'a>(
        &'a self,
        feeders: &'a [String],
    ) -> impl Iterator<Item = (&'a str, usize, f64)> + 'a {
        feeders.iter().zip(&self.factors).flat_map(|(f, row)| {
            row.iter()
                .enumerate()
                .map(move |(h, v)| (f.as_str(), h, *v))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub fleet: Fleet,
    pub sor: SorTable,
    pub horizon: usize,
    pub repair_hours: f64,
    pub replications: usize,
    pub master_seed: u64,
    pub sr_delivery_hours: f64,
    pub derate: Option<DerateTable>,
    pub policy: ChargePolicy,
}

impl Scenario {
    /// Checks the fleet, the run parameters, and that the SoR (and derate)
    /// tables cover every feeder.
    pub fn validate(&self) -> Result<(), SimError> {
        let violations = validate_fleet(&self.fleet, self.horizon);
        if !violations.is_empty() {
            return Err(SimError::InvalidFleet(violations));
        }
        if self.horizon == 0 {
            return Err(SimError::InvalidScenario(
                "horizon must be at least 1 hour".into(),
            ));
        }
        if !(self.repair_hours.is_finite() && self.repair_hours > 0.0) {
            return Err(SimError::InvalidScenario(format!(
                "repair_hours {} must be > 0",
                self.repair_hours
            )));
        }
        if self.replications == 0 {
            return Err(SimError::InvalidScenario(
                "replications must be >= 1".into(),
            ));
        }
        if !(self.sr_delivery_hours.is_finite() && self.sr_delivery_hours > 0.0) {
            return Err(SimError::InvalidScenario(format!(
                "sr_delivery_hours {} must be > 0",
                self.sr_delivery_hours
            )));
        }
        if self.sor.horizon() != self.horizon {
            return Err(SimError::InvalidScenario(format!(
                "SoR table covers {} hours, horizon is {}",
                self.sor.horizon(),
                self.horizon
            )));
        }
        let feeders = self.feeder_ids();
        if let Some(missing) = feeders.iter().find(|f| self.sor.feeder_index(f).is_none()) {
            return Err(SimError::InvalidScenario(format!(
                "no SoR values for feeder `{missing}`"
            )));
        }
        if let Some(derate) = &self.derate {
            if derate.factors.len() != feeders.len()
                || derate.factors.iter().any(|r| r.len() != self.horizon)
            {
                return Err(SimError::InvalidScenario(
                    "derate table shape does not match the fleet".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn feeder_ids(&self) -> Vec<String> {
        self.fleet.feeder_ids().map(str::to_string).collect()
    }

    pub fn derate_factor(&self, feeder_index: usize, hour: usize) -> f64 {
        self.derate
            .as_ref()
            .map_or(1.0, |d| d.factor(feeder_index, hour))
    }
}
