#![allow(dead_code)]

use std::collections::BTreeSet;

use ngrid_core::dispatch::{DispatchOutcome, NGridState, STEP_HOURS};
use ngrid_core::fleet::{
    DeferrableTask, ElectricVehicle, HourlyProfile, HvacAsset, NGrid, StorageUnit,
};
use rand::Rng;

pub const HORIZON: usize = 24;

/// Pairwise ROC AUC: every positive/negative pair, ties worth one half.
pub fn brute_roc(labels: &[bool], scores: &[f64]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for (i, li) in labels.iter().enumerate() {
        for (j, lj) in labels.iter().enumerate() {
            if *li && !*lj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    credit += 1.0;
                } else if scores[i] == scores[j] {
                    credit += 0.5;
                }
            }
        }
    }
    credit / pairs
}

/// Area under the precision-recall step curve, thresholding at every
/// distinct score from high to low and recounting from scratch each time.
pub fn brute_prc(labels: &[bool], scores: &[f64]) -> f64 {
    let positives = labels.iter().filter(|l| **l).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let mut tp = 0.0;
        let mut fp = 0.0;
        for (l, s) in labels.iter().zip(scores) {
            if *s >= t {
                if *l {
                    tp += 1.0;
                } else {
                    fp += 1.0;
                }
            }
        }
        let recall = tp / positives;
        area += (recall - prev_recall) * (tp / (tp + fp));
        prev_recall = recall;
    }
    area
}

/// Small dataset with many repeated scores and both classes present.
pub fn tied_dataset<R: Rng>(rng: &mut R) -> (Vec<bool>, Vec<f64>) {
    loop {
        let n = rng.random_range(2..=30);
        let levels = rng.random_range(1..=6);
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
            .collect();
        if labels.iter().any(|l| *l) && labels.iter().any(|l| !*l) {
            return (labels, scores);
        }
    }
}

fn storage<R: Rng>(rng: &mut R, cap: (f64, f64), pmax: (f64, f64)) -> StorageUnit {
    let capacity = rng.random_range(cap.0..cap.1);
    let unit = StorageUnit::new(
        capacity,
        rng.random_range(pmax.0..pmax.1),
        rng.random_range(0.0..=capacity),
    );
    if rng.random_bool(0.3) {
        unit.with_efficiency(rng.random_range(0.85..=1.0), rng.random_range(0.85..=1.0))
    } else {
        unit
    }
}

fn profile<R: Rng>(rng: &mut R, max: f64, zero_share: f64) -> HourlyProfile {
    HourlyProfile::new(
        (0..HORIZON)
            .map(|_| {
                if rng.random_bool(zero_share) {
                    0.0
                } else {
                    rng.random_range(0.0..max)
                }
            })
            .collect(),
    )
}

/// Random n-grid with any mix of BESS, EVs, HVAC and deferrable tasks.
pub fn random_ngrid<R: Rng>(rng: &mut R) -> NGrid {
    let mut n = NGrid::new(
        "fuzz",
        "F1",
        profile(rng, 5.0, 0.05),
        profile(rng, 9.0, 0.3),
    );
    if rng.random_bool(0.6) {
        n.bess = Some(storage(rng, (0.5, 20.0), (0.5, 8.0)));
    }
    for _ in 0..rng.random_range(0..=3) {
        let battery = storage(rng, (5.0, 80.0), (1.0, 11.0));
        let start = rng.random_range(0..HORIZON);
        let end = rng.random_range(start..HORIZON);
        let mut plug_hours: BTreeSet<usize> = (start..=end).collect();
        if rng.random_bool(0.3) {
            plug_hours.extend(0..rng.random_range(0..start.max(1)));
        }
        n.evs.push(ElectricVehicle {
            soc_on_arrival_kwh: battery.soc_kwh,
            battery,
            plug_hours,
        });
    }
    if rng.random_bool(0.7) {
        let normal = profile(rng, 4.0, 0.1);
        let min = HourlyProfile::new(
            normal
                .values()
                .iter()
                .map(|p| p * rng.random_range(0.0..=1.0))
                .collect(),
        );
        n.hvac = Some(HvacAsset {
            p_normal_kw: normal,
            p_min_kw: min,
        });
    }
    for _ in 0..rng.random_range(0..=2) {
        let earliest = rng.random_range(0..HORIZON);
        let deadline = rng.random_range(earliest..HORIZON);
        let power = rng.random_range(0.2..3.0);
        let window = (deadline - earliest + 1) as f64;
        n.deferrables.push(DeferrableTask {
            energy_kwh: power * window * rng.random_range(0.05..=1.0),
            power_kw: power,
            earliest_hour: earliest,
            deadline_hour: deadline,
        });
    }
    n
}

/// Random in-bounds state for `ngrid`.
pub fn random_state<R: Rng>(rng: &mut R, ngrid: &NGrid) -> NGridState {
    let mut state = NGridState::initial(ngrid);
    if let Some(b) = &ngrid.bess {
        state.bess_soc_kwh = rng.random_range(0.0..=b.capacity_kwh);
    }
    for (soc, ev) in state.ev_soc_kwh.iter_mut().zip(&ngrid.evs) {
        *soc = rng.random_range(0.0..=ev.battery.capacity_kwh);
    }
    for (rem, task) in state.deferred_energy_kwh.iter_mut().zip(&ngrid.deferrables) {
        *rem = if rng.random_bool(0.2) {
            0.0
        } else {
            rng.random_range(0.0..=task.energy_kwh)
        };
    }
    state.hvac_curtailed = rng.random_bool(0.5);
    state
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Independent check of one islanded hour. Returns the first broken rule.
pub fn check_islanded(
    ngrid: &NGrid,
    state: &NGridState,
    hour: usize,
    out: &DispatchOutcome,
    next: &NGridState,
) -> Result<(), String> {
    let base = ngrid.base_load[hour];
    let pv = ngrid.pv[hour];
    let hvac_min = ngrid.hvac_min_kw(hour);
    let hvac_normal = ngrid.hvac_normal_kw(hour);
    let floor = base + hvac_min;
    let dt = STEP_HOURS;

    let bess_dis = ngrid
        .bess
        .as_ref()
        .map_or(0.0, |b| b.discharge_limit_kw(state.bess_soc_kwh, dt, 1.0));
    let bess_chg = ngrid
        .bess
        .as_ref()
        .map_or(0.0, |b| b.charge_limit_kw(state.bess_soc_kwh, dt, 1.0));
    let plugged: Vec<bool> = ngrid.evs.iter().map(|ev| ev.is_plugged(hour)).collect();
    let ev_dis: Vec<f64> = ngrid
        .evs
        .iter()
        .zip(&state.ev_soc_kwh)
        .zip(&plugged)
        .map(|((ev, soc), p)| {
            if *p {
                ev.battery.discharge_limit_kw(*soc, dt, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    let ev_chg: Vec<f64> = ngrid
        .evs
        .iter()
        .zip(&state.ev_soc_kwh)
        .zip(&plugged)
        .map(|((ev, soc), p)| {
            if *p {
                ev.battery.charge_limit_kw(*soc, dt, 1.0)
            } else {
                0.0
            }
        })
        .collect();

    let residual = out.balance_residual();
    if residual.abs() > 1e-9 {
        return Err(format!("power balance off by {residual}"));
    }
    if out.ens_kw < 0.0 || out.spilled_kw < 0.0 {
        return Err("negative unserved energy or spill".into());
    }
    if out.ens_kw > 0.0 && out.spilled_kw > 0.0 {
        return Err("unserved energy and spill together".into());
    }
    if out.grid_kw != 0.0 || out.connected {
        return Err("islanded hour exchanged power with the grid".into());
    }
    if let Some(b) = &ngrid.bess {
        if !(0.0..=b.capacity_kwh).contains(&next.bess_soc_kwh) {
            return Err(format!(
                "bess soc {} outside [0, {}]",
                next.bess_soc_kwh, b.capacity_kwh
            ));
        }
    }
    for (i, ev) in ngrid.evs.iter().enumerate() {
        if !(0.0..=ev.battery.capacity_kwh).contains(&next.ev_soc_kwh[i]) {
            return Err(format!("ev{i} soc {} out of bounds", next.ev_soc_kwh[i]));
        }
        if !plugged[i] && out.ev_kw_each[i] != 0.0 {
            return Err(format!("unplugged ev{i} exchanged power"));
        }
        if out.ev_kw_each[i] > ev_dis[i] + 1e-12 || -out.ev_kw_each[i] > ev_chg[i] + 1e-12 {
            return Err(format!("ev{i} beyond its power limit"));
        }
    }
    if out.bess_kw > bess_dis + 1e-12 || -out.bess_kw > bess_chg + 1e-12 {
        return Err("bess beyond its power limit".into());
    }
    if out.hvac_kw < hvac_min - 1e-12 || out.hvac_kw > hvac_normal + 1e-12 {
        return Err("hvac outside [min, normal]".into());
    }
    if !near(
        out.served_load_kw + out.ens_kw,
        base + out.hvac_kw + out.deferrable_kw,
    ) {
        return Err("served load does not add up".into());
    }

    let evs_saturated = |limits: &[f64], sign: f64| {
        out.ev_kw_each
            .iter()
            .zip(limits)
            .all(|(p, l)| near(sign * p, *l))
    };

    if floor >= pv {
        // deficit: nothing charges, flexible demand stays at its floor
        if out.bess_kw < 0.0 || out.ev_kw_each.iter().any(|p| *p < 0.0) {
            return Err("storage charged during a deficit".into());
        }
        if out.spilled_kw != 0.0 || out.deferrable_kw != 0.0 || out.hvac_kw != hvac_min {
            return Err("flexible demand not at its floor during a deficit".into());
        }
        if out.ev_kw > 1e-12 && !near(out.bess_kw, bess_dis) {
            return Err("EVs discharged before the BESS was exhausted".into());
        }
        if out.ens_kw > 0.0 && !(near(out.bess_kw, bess_dis) && evs_saturated(&ev_dis, 1.0)) {
            return Err("unserved energy while storage still had power".into());
        }
        let expected = (floor - pv - bess_dis - ev_dis.iter().sum::<f64>()).max(0.0);
        if !near(out.ens_kw, expected) {
            return Err(format!(
                "unserved energy {} but expected {expected}",
                out.ens_kw
            ));
        }
    } else {
        if out.ens_kw != 0.0 {
            return Err("unserved energy during a surplus".into());
        }
        if out.bess_kw > 0.0 || out.ev_kw_each.iter().any(|p| *p > 0.0) {
            return Err("storage discharged during a surplus".into());
        }
        if out.bess_kw < -1e-12 && !evs_saturated(&ev_chg, -1.0) {
            return Err("BESS charged before EVs were full".into());
        }
        let storage_full = evs_saturated(&ev_chg, -1.0) && near(-out.bess_kw, bess_chg);
        if out.hvac_kw > hvac_min + 1e-12 && !storage_full {
            return Err("HVAC restored before storage was saturated".into());
        }
        if out.deferrable_kw > 1e-12 && !(storage_full && near(out.hvac_kw, hvac_normal)) {
            return Err("tasks served before HVAC was restored".into());
        }
        if out.spilled_kw > 1e-12 {
            let due: f64 = ngrid
                .deferrables
                .iter()
                .zip(&state.deferred_energy_kwh)
                .filter(|(t, _)| t.in_window(hour))
                .map(|(t, rem)| t.power_kw.min(rem / dt))
                .sum();
            if !(storage_full && near(out.hvac_kw, hvac_normal) && near(out.deferrable_kw, due)) {
                return Err("spilled while some sink still had room".into());
            }
        }
    }
    Ok(())
}
