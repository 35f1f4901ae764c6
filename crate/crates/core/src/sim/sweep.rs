use serde::Serialize;

use super::run::{execute, ExecMode, Prepared};
use super::sampler::{repair_duration, retime};
use super::{Scenario, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub repair_hours: f64,
    pub total_ens_mwh: f64,
    pub total_spilled_mwh: f64,
}

/// Reruns the scenario for each repair time on common random numbers.
///
/// Outage starts are drawn once per replication and feeder at the shortest
/// repair time; each longer repair time stretches those same outages and
/// merges any that then overlap. Islanded hours therefore only grow with the
/// repair time, and the row for the shortest value equals a plain
/// [`run_simulation`](super::run_simulation) at that value.
pub fn sweep_repair_time(
    scenario: &Scenario,
    repair_hours: &[f64],
    mode: ExecMode,
) -> Result<Vec<SweepRow>, SimError> {
    if repair_hours.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(bad) = repair_hours.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(SimError::BadSweep(format!("repair time {bad} must be > 0")));
    }
    let shortest = repair_hours.iter().copied().fold(f64::INFINITY, f64::min);
    let base_duration = repair_duration(shortest);
    let prep = Prepared::new(scenario)?;
    let starts: Vec<_> = (0..scenario.replications)
        .map(|r| prep.sample(scenario, r, base_duration))
        .collect();

    repair_hours
        .iter()
        .map(|&repair| {
            let duration = repair_duration(repair);
            let report = execute(scenario, &prep, mode, |r| {
                retime(&starts[r], duration, scenario.horizon)
            })?;
            Ok(SweepRow {
                repair_hours: repair,
                total_ens_mwh: report.total_ens_mwh,
                total_spilled_mwh: report.total_spilled_mwh,
            })
        })
        .collect()
}
