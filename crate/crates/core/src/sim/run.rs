use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::sampler::{feeder_rng, repair_duration, sample_feeder_outages, OutageEvent};
use super::{Scenario, SimError};
use crate::dispatch::{
    connected_step_with_target, islanded_step, ramp_capacity, CapacityParams, DispatchOutcome,
    NGridState, STEP_HOURS,
};

const BALANCE_TOLERANCE_KW: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Serial,
    #[default]
    Parallel,
}

/// Fleet-wide totals for one hour.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FleetHour {
    pub hour: usize,
    pub load_kw: f64,
    pub pv_kw: f64,
    pub ens_kw: f64,
    pub spilled_kw: f64,
    pub ru_total_kw: f64,
    pub ru_avail_kw: f64,
    pub rd_total_kw: f64,
    pub rd_avail_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FleetSeries {
    pub hours: Vec<FleetHour>,
}

impl FleetSeries {
    pub fn total_ens_mwh(&self) -> f64 {
        self.hours
            .iter()
            .map(|h| h.ens_kw * STEP_HOURS)
            .sum::<f64>()
            / 1000.0
    }

    pub fn total_spilled_mwh(&self) -> f64 {
        self.hours
            .iter()
            .map(|h| h.spilled_kw * STEP_HOURS)
            .sum::<f64>()
            / 1000.0
    }

    pub fn max_ru_total_kw(&self) -> f64 {
        self.hours.iter().map(|h| h.ru_total_kw).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub index: usize,
    pub series: FleetSeries,
    pub outages: Vec<OutageEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    /// Hour-by-hour mean over replications.
    pub mean: FleetSeries,
    pub total_ens_mwh: f64,
    pub total_spilled_mwh: f64,
    pub max_ru_total_kw: f64,
    pub replications: Vec<ReplicationResult>,
}

/// Per-scenario data shared by every replication: feeder lookup and the
/// ramp capacity of the outage-free trajectory.
pub(super) struct Prepared {
    feeder_of: Vec<usize>,
    feeder_index: HashMap<String, usize>,
    sor_index: Vec<usize>,
    ru_total: Vec<f64>,
    rd_total: Vec<f64>,
    /// `[feeder][hour]`, derated.
    ru_avail: Vec<Vec<f64>>,
    rd_avail: Vec<Vec<f64>>,
}

impl Prepared {
    pub(super) fn new(scenario: &Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let feeders = scenario.feeder_ids();
        let feeder_index: HashMap<String, usize> = feeders
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i))
            .collect();
        let sor_index = feeders
            .iter()
            .map(|f| scenario.sor.feeder_index(f).expect("validated"))
            .collect();
        let feeder_of = scenario
            .fleet
            .ngrids
            .iter()
            .map(|n| feeder_index[&n.feeder_id])
            .collect();
        let h = scenario.horizon;
        let mut prep = Self {
            feeder_of,
            feeder_index,
            sor_index,
            ru_total: vec![0.0; h],
            rd_total: vec![0.0; h],
            ru_avail: vec![vec![0.0; h]; feeders.len()],
            rd_avail: vec![vec![0.0; h]; feeders.len()],
        };
        for (ni, ngrid) in scenario.fleet.ngrids.iter().enumerate() {
            let fi = prep.feeder_of[ni];
            let mut state = NGridState::initial(ngrid);
            for hour in 0..h {
                state.begin_hour(ngrid, hour);
                let target = prep.bess_target(scenario, fi, hour);
                let (out, next) = connected_step_with_target(ngrid, &state, hour, target)?;
                let params = CapacityParams {
                    delivery_hours: scenario.sr_delivery_hours,
                    derate: 1.0,
                };
                let total = ramp_capacity(ngrid, &state, &out, &params);
                let avail = ramp_capacity(
                    ngrid,
                    &state,
                    &out,
                    &CapacityParams {
                        derate: scenario.derate_factor(fi, hour),
                        ..params
                    },
                );
                prep.ru_total[hour] += total.ru_kw;
                prep.rd_total[hour] += total.rd_kw;
                prep.ru_avail[fi][hour] += avail.ru_kw;
                prep.rd_avail[fi][hour] += avail.rd_kw;
                state = next;
            }
        }
        Ok(prep)
    }

    fn bess_target(&self, scenario: &Scenario, feeder: usize, hour: usize) -> f64 {
        scenario
            .policy
            .bess_target(scenario.sor.series(self.sor_index[feeder]), hour)
    }

    pub(super) fn sample(
        &self,
        scenario: &Scenario,
        replication: usize,
        duration: usize,
    ) -> Vec<OutageEvent> {
        scenario
            .fleet
            .feeders
            .iter()
            .enumerate()
            .flat_map(|(fi, feeder)| {
                let mut rng = feeder_rng(scenario.master_seed, replication, &feeder.id);
                sample_feeder_outages(
                    &feeder.id,
                    scenario.sor.series(self.sor_index[fi]),
                    duration,
                    &mut rng,
                )
            })
            .collect()
    }

    fn simulate(
        &self,
        scenario: &Scenario,
        replication: usize,
        outages: &[OutageEvent],
    ) -> Result<FleetSeries, SimError> {
        let h = scenario.horizon;
        let mut faulted = vec![vec![false; h]; self.ru_avail.len()];
        for event in outages {
            let fi = *self.feeder_index.get(&event.feeder_id).ok_or_else(|| {
                SimError::InvalidScenario(format!("outage on unknown feeder `{}`", event.feeder_id))
            })?;
            for slot in faulted[fi]
                .iter_mut()
                .take(event.end_hour())
                .skip(event.start_hour)
            {
                *slot = true;
            }
        }

        let mut hours: Vec<FleetHour> = (0..h)
            .map(|hour| {
                let faulted = &faulted;
                let healthy = || (0..faulted.len()).filter(move |fi| !faulted[*fi][hour]);
                FleetHour {
                    hour,
                    ru_total_kw: self.ru_total[hour],
                    rd_total_kw: self.rd_total[hour],
                    ru_avail_kw: healthy().map(|fi| self.ru_avail[fi][hour]).sum(),
                    rd_avail_kw: healthy().map(|fi| self.rd_avail[fi][hour]).sum(),
                    ..FleetHour::default()
                }
            })
            .collect();

        for (ni, ngrid) in scenario.fleet.ngrids.iter().enumerate() {
            let fi = self.feeder_of[ni];
            let mut state = NGridState::initial(ngrid);
            for hour in 0..h {
                state.begin_hour(ngrid, hour);
                let (out, next) = if faulted[fi][hour] {
                    islanded_step(ngrid, &state, hour)?
                } else {
                    connected_step_with_target(
                        ngrid,
                        &state,
                        hour,
                        self.bess_target(scenario, fi, hour),
                    )?
                };
                check_balance(replication, &ngrid.id, &out)?;
                let row = &mut hours[hour];
                row.load_kw += out.load_kw;
                row.pv_kw += out.pv_kw;
                row.ens_kw += out.total_ens_kwh() / STEP_HOURS;
                row.spilled_kw += out.spilled_kw;
                state = next;
            }
        }
        Ok(FleetSeries { hours })
    }
}

fn check_balance(replication: usize, ngrid: &str, out: &DispatchOutcome) -> Result<(), SimError> {
    let residual = out.balance_residual();
    if residual.abs() > BALANCE_TOLERANCE_KW * out.load_kw.max(1.0) {
        return Err(SimError::Invariant {
            replication,
            ngrid: ngrid.to_string(),
            hour: out.hour,
            detail: format!("power balance off by {residual} kW"),
        });
    }
    if out.ens_kw > 0.0 && out.spilled_kw > 0.0 {
        return Err(SimError::Invariant {
            replication,
            ngrid: ngrid.to_string(),
            hour: out.hour,
            detail: "unserved energy and spill in the same hour".into(),
        });
    }
    Ok(())
}

/// One replication with outages drawn from the scenario's SoR table.
pub fn run_replication(
    scenario: &Scenario,
    replication: usize,
) -> Result<ReplicationResult, SimError> {
    let prep = Prepared::new(scenario)?;
    let outages = prep.sample(
        scenario,
        replication,
        repair_duration(scenario.repair_hours),
    );
    let series = prep.simulate(scenario, replication, &outages)?;
    Ok(ReplicationResult {
        index: replication,
        series,
        outages,
    })
}

/// Runs every replication and averages them. Output does not depend on `mode`.
pub fn run_simulation(scenario: &Scenario, mode: ExecMode) -> Result<SimulationReport, SimError> {
    let prep = Prepared::new(scenario)?;
    let duration = repair_duration(scenario.repair_hours);
    execute(scenario, &prep, mode, |r| {
        prep.sample(scenario, r, duration)
    })
}

/// Like [`run_simulation`] but with caller-supplied outages per replication.
pub fn run_simulation_with<F>(
    scenario: &Scenario,
    mode: ExecMode,
    outages: F,
) -> Result<SimulationReport, SimError>
where
    F: Fn(usize) -> Vec<OutageEvent> + Sync,
{
    let prep = Prepared::new(scenario)?;
    execute(scenario, &prep, mode, outages)
}

pub(super) fn execute<F>(
    scenario: &Scenario,
    prep: &Prepared,
    mode: ExecMode,
    outages: F,
) -> Result<SimulationReport, SimError>
where
    F: Fn(usize) -> Vec<OutageEvent> + Sync,
{
    let one = |r: usize| -> Result<ReplicationResult, SimError> {
        let outages = outages(r);
        let series = prep.simulate(scenario, r, &outages)?;
        Ok(ReplicationResult {
            index: r,
            series,
            outages,
        })
    };
    let replications: Vec<ReplicationResult> = match mode {
        ExecMode::Serial => (0..scenario.replications)
            .map(one)
            .collect::<Result<_, _>>()?,
        ExecMode::Parallel => (0..scenario.replications)
            .into_par_iter()
            .map(one)
            .collect::<Result<_, _>>()?,
    };

    let n = replications.len() as f64;
    let mut mean = replications[0].series.clone();
    for row in &mut mean.hours {
        row.load_kw = 0.0;
        row.pv_kw = 0.0;
        row.ens_kw = 0.0;
        row.spilled_kw = 0.0;
        row.ru_avail_kw = 0.0;
        row.rd_avail_kw = 0.0;
    }
    for rep in &replications {
        for (m, r) in mean.hours.iter_mut().zip(&rep.series.hours) {
            m.load_kw += r.load_kw;
            m.pv_kw += r.pv_kw;
            m.ens_kw += r.ens_kw;
            m.spilled_kw += r.spilled_kw;
            m.ru_avail_kw += r.ru_avail_kw;
            m.rd_avail_kw += r.rd_avail_kw;
        }
    }
    for m in &mut mean.hours {
        m.load_kw /= n;
        m.pv_kw /= n;
        m.ens_kw /= n;
        m.spilled_kw /= n;
        m.ru_avail_kw /= n;
        m.rd_avail_kw /= n;
    }
    Ok(SimulationReport {
        total_ens_mwh: mean.total_ens_mwh(),
        total_spilled_mwh: mean.total_spilled_mwh(),
        max_ru_total_kw: mean.max_ru_total_kw(),
        mean,
        replications,
    })
}
