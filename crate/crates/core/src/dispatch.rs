//! Hourly dispatch of a single n-grid, in islanded and grid-tied mode, and
//! the reserve and ramp capacity it can offer while grid-tied.
//!
//! Sign conventions: storage power is positive when discharging into the
//! building bus, grid power is positive when importing.

use serde::Serialize;
use thiserror::Error;

use crate::fleet::{NGrid, StorageUnit};

/// Simulation step length.
pub const STEP_HOURS: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum DispatchError {
    #[error("{ngrid}: {what} = {value} outside [0, {bound}]")]
    StateOutOfBounds {
        ngrid: String,
        what: String,
        value: f64,
        bound: f64,
    },
    #[error("{ngrid}: state shape does not match the n-grid ({detail})")]
    ShapeMismatch { ngrid: String, detail: String },
    #[error("{ngrid}: hour {hour} beyond horizon {horizon}")]
    HourOutOfRange {
        ngrid: String,
        hour: usize,
        horizon: usize,
    },
    #[error("{ngrid}: reserve is only offered while grid-tied (hour {hour} is islanded)")]
    Islanded { ngrid: String, hour: usize },
}

/// Mutable state of one n-grid during a replication.
#[derive(Debug, Clone, PartialEq)]
pub struct NGridState {
    pub bess_soc_kwh: f64,
    pub ev_soc_kwh: Vec<f64>,
    /// Energy still owed to each deferrable task.
    pub deferred_energy_kwh: Vec<f64>,
    pub hvac_curtailed: bool,
}

impl NGridState {
    pub fn initial(ngrid: &NGrid) -> Self {
        Self {
            bess_soc_kwh: ngrid.bess.as_ref().map_or(0.0, |b| b.soc_kwh),
            ev_soc_kwh: ngrid.evs.iter().map(|ev| ev.soc_on_arrival_kwh).collect(),
            deferred_energy_kwh: ngrid.deferrables.iter().map(|t| t.energy_kwh).collect(),
            hvac_curtailed: false,
        }
    }

    /// Resets each EV that plugs in at `hour` to its arrival state of charge.
    pub fn begin_hour(&mut self, ngrid: &NGrid, hour: usize) {
        for (soc, ev) in self.ev_soc_kwh.iter_mut().zip(&ngrid.evs) {
            if ev.arrives_at(hour) {
                *soc = ev.soc_on_arrival_kwh;
            }
        }
    }

    pub fn check(&self, ngrid: &NGrid) -> Result<(), DispatchError> {
        if self.ev_soc_kwh.len() != ngrid.evs.len()
            || self.deferred_energy_kwh.len() != ngrid.deferrables.len()
        {
            return Err(DispatchError::ShapeMismatch {
                ngrid: ngrid.id.clone(),
                detail: format!(
                    "{} EV / {} task slots for {} EVs / {} tasks",
                    self.ev_soc_kwh.len(),
                    self.deferred_energy_kwh.len(),
                    ngrid.evs.len(),
                    ngrid.deferrables.len()
                ),
            });
        }
        let bound = |what: String, value: f64, cap: f64| {
            if value.is_finite() && (0.0..=cap).contains(&value) {
                Ok(())
            } else {
                Err(DispatchError::StateOutOfBounds {
                    ngrid: ngrid.id.clone(),
                    what,
                    value,
                    bound: cap,
                })
            }
        };
        if let Some(bess) = &ngrid.bess {
            bound("bess soc".into(), self.bess_soc_kwh, bess.capacity_kwh)?;
        }
        for (i, (soc, ev)) in self.ev_soc_kwh.iter().zip(&ngrid.evs).enumerate() {
            bound(format!("ev{i} soc"), *soc, ev.battery.capacity_kwh)?;
        }
        for (i, (rem, task)) in self
            .deferred_energy_kwh
            .iter()
            .zip(&ngrid.deferrables)
            .enumerate()
        {
            bound(format!("task{i} remaining"), *rem, task.energy_kwh)?;
        }
        Ok(())
    }
}

/// Power flows of one n-grid over one hour, all in kW.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchOutcome {
    pub hour: usize,
    pub connected: bool,
    /// Nominal demand: base + occupant-set HVAC + deferrable served.
    pub load_kw: f64,
    pub served_load_kw: f64,
    /// Instantaneous demand left unserved.
    pub ens_kw: f64,
    /// Deferrable energy abandoned at its deadline this hour.
    pub lost_deferrable_kwh: f64,
    pub spilled_kw: f64,
    pub pv_kw: f64,
    pub bess_kw: f64,
    pub ev_kw: f64,
    pub ev_kw_each: Vec<f64>,
    pub hvac_kw: f64,
    pub deferrable_kw: f64,
    pub grid_kw: f64,
}

impl DispatchOutcome {
    /// Everything counted as energy not served for this hour, in kWh.
    pub fn total_ens_kwh(&self) -> f64 {
        self.ens_kw * STEP_HOURS + self.lost_deferrable_kwh
    }

    /// Sources minus sinks; zero up to rounding for any valid outcome.
    pub fn balance_residual(&self) -> f64 {
        let pos = |x: f64| x.max(0.0);
        let sources = self.pv_kw + pos(self.bess_kw) + pos(self.ev_kw) + pos(self.grid_kw);
        let sinks = self.served_load_kw
            + pos(-self.bess_kw)
            + pos(-self.ev_kw)
            + pos(-self.grid_kw)
            + self.spilled_kw;
        sources - sinks
    }
}

/// Splits `amount` across units in proportion to their limits, saturating
/// every unit when the amount covers them all.
fn allocate(amount: f64, limits: &[f64]) -> Vec<f64> {
    let total: f64 = limits.iter().sum();
    if amount >= total {
        limits.to_vec()
    } else if total <= 0.0 || amount <= 0.0 {
        vec![0.0; limits.len()]
    } else {
        limits
            .iter()
            .map(|l| (amount * l / total).min(*l))
            .collect()
    }
}

struct Hour<'a> {
    ngrid: &'a NGrid,
    hour: usize,
    base: f64,
    pv: f64,
    hvac_min: f64,
    hvac_normal: f64,
}

impl<'a> Hour<'a> {
    fn new(ngrid: &'a NGrid, state: &NGridState, hour: usize) -> Result<Self, DispatchError> {
        let horizon = ngrid.base_load.len().min(ngrid.pv.len());
        if hour >= horizon {
            return Err(DispatchError::HourOutOfRange {
                ngrid: ngrid.id.clone(),
                hour,
                horizon,
            });
        }
        state.check(ngrid)?;
        Ok(Self {
            ngrid,
            hour,
            base: ngrid.base_load[hour],
            pv: ngrid.pv[hour],
            hvac_min: ngrid.hvac_min_kw(hour),
            hvac_normal: ngrid.hvac_normal_kw(hour),
        })
    }

    fn ev_limits(&self, state: &NGridState, charge: bool) -> Vec<f64> {
        self.ngrid
            .evs
            .iter()
            .zip(&state.ev_soc_kwh)
            .map(|(ev, soc)| match (ev.is_plugged(self.hour), charge) {
                (false, _) => 0.0,
                (true, true) => ev.battery.charge_limit_kw(*soc, STEP_HOURS, 1.0),
                (true, false) => ev.battery.discharge_limit_kw(*soc, STEP_HOURS, 1.0),
            })
            .collect()
    }

    /// Serves in-window tasks from `budget` (unbounded when `None`), earliest
    /// deadline first. Returns the power drawn.
    fn serve_deferrables(&self, next: &mut NGridState, mut budget: Option<f64>) -> f64 {
        // stable sort keeps declaration order among equal deadlines
        let mut order: Vec<usize> = (0..self.ngrid.deferrables.len()).collect();
        order.sort_by_key(|i| self.ngrid.deferrables[*i].deadline_hour);
        let mut served = 0.0;
        for i in order {
            let task = &self.ngrid.deferrables[i];
            let remaining = next.deferred_energy_kwh[i];
            if !task.in_window(self.hour) || remaining <= 0.0 {
                continue;
            }
            let mut power = task.power_kw.min(remaining / STEP_HOURS);
            if let Some(b) = budget.as_mut() {
                power = power.min(*b);
                *b = (*b - power).max(0.0);
            }
            next.deferred_energy_kwh[i] = (remaining - power * STEP_HOURS).max(0.0);
            served += power;
        }
        served
    }

    /// Abandons whatever is still owed on tasks whose deadline is this hour.
    fn expire_deferrables(&self, next: &mut NGridState) -> f64 {
        let mut lost = 0.0;
        for (task, rem) in self
            .ngrid
            .deferrables
            .iter()
            .zip(next.deferred_energy_kwh.iter_mut())
        {
            if task.deadline_hour == self.hour && *rem > 0.0 {
                lost += *rem;
                *rem = 0.0;
            }
        }
        lost
    }

    fn outcome(&self, connected: bool, ev_count: usize) -> DispatchOutcome {
        DispatchOutcome {
            hour: self.hour,
            connected,
            load_kw: 0.0,
            served_load_kw: 0.0,
            ens_kw: 0.0,
            lost_deferrable_kwh: 0.0,
            spilled_kw: 0.0,
            pv_kw: self.pv,
            bess_kw: 0.0,
            ev_kw: 0.0,
            ev_kw_each: vec![0.0; ev_count],
            hvac_kw: 0.0,
            deferrable_kw: 0.0,
            grid_kw: 0.0,
        }
    }
}

fn apply_storage(ngrid: &NGrid, next: &mut NGridState, out: &DispatchOutcome) {
    if let Some(bess) = &ngrid.bess {
        next.bess_soc_kwh = bess.soc_after(next.bess_soc_kwh, out.bess_kw, STEP_HOURS);
    }
    for ((soc, ev), p) in next
        .ev_soc_kwh
        .iter_mut()
        .zip(&ngrid.evs)
        .zip(&out.ev_kw_each)
    {
        *soc = ev.battery.soc_after(*soc, *p, STEP_HOURS);
    }
}

/// One hour of a disconnected n-grid, following the fixed priority order:
/// defer tasks and drop HVAC to its floor; cover a deficit from the BESS,
/// then plugged EVs, leaving the rest unserved; absorb a surplus into
/// plugged EVs, then the BESS, then HVAC restoration, then due tasks, and
/// spill the rest.
pub fn islanded_step(
    ngrid: &NGrid,
    state: &NGridState,
    hour: usize,
) -> Result<(DispatchOutcome, NGridState), DispatchError> {
    let h = Hour::new(ngrid, state, hour)?;
    let mut next = state.clone();
    let mut out = h.outcome(false, ngrid.evs.len());
    let floor = h.base + h.hvac_min;

    if floor >= h.pv {
        let mut deficit = floor - h.pv;
        if let Some(bess) = &ngrid.bess {
            let d = deficit.min(bess.discharge_limit_kw(state.bess_soc_kwh, STEP_HOURS, 1.0));
            out.bess_kw = d;
            deficit = (deficit - d).max(0.0);
        }
        let limits = h.ev_limits(state, false);
        let ev_cap: f64 = limits.iter().sum();
        out.ev_kw_each = allocate(deficit, &limits);
        out.ev_kw = out.ev_kw_each.iter().sum();
        deficit = (deficit - ev_cap).max(0.0);
        out.ens_kw = deficit;
        out.hvac_kw = h.hvac_min;
        out.served_load_kw = floor - deficit;
    } else {
        let mut surplus = h.pv - floor;
        let limits = h.ev_limits(state, true);
        let ev_cap: f64 = limits.iter().sum();
        out.ev_kw_each = allocate(surplus, &limits).iter().map(|p| -p).collect();
        out.ev_kw = out.ev_kw_each.iter().sum();
        surplus = (surplus - ev_cap).max(0.0);
        if let Some(bess) = &ngrid.bess {
            let c = surplus.min(bess.charge_limit_kw(state.bess_soc_kwh, STEP_HOURS, 1.0));
            out.bess_kw = -c;
            surplus = (surplus - c).max(0.0);
        }
        let restore = surplus.min(h.hvac_normal - h.hvac_min);
        out.hvac_kw = h.hvac_min + restore;
        surplus = (surplus - restore).max(0.0);
        out.deferrable_kw = h.serve_deferrables(&mut next, Some(surplus));
        surplus = (surplus - out.deferrable_kw).max(0.0);
        out.spilled_kw = surplus;
        out.served_load_kw = h.base + out.hvac_kw + out.deferrable_kw;
    }

    out.lost_deferrable_kwh = h.expire_deferrables(&mut next);
    out.load_kw = h.base + h.hvac_normal + out.deferrable_kw;
    next.hvac_curtailed = out.hvac_kw < h.hvac_normal;
    apply_storage(ngrid, &mut next, &out);
    Ok((out, next))
}

/// One grid-tied hour with every battery charging toward full.
pub fn connected_step(
    ngrid: &NGrid,
    state: &NGridState,
    hour: usize,
) -> Result<(DispatchOutcome, NGridState), DispatchError> {
    connected_step_with_target(ngrid, state, hour, 1.0)
}

/// One grid-tied hour. HVAC runs at its occupant setting, in-window tasks
/// run at rated power, plugged EVs charge toward full and the BESS charges
/// toward `bess_target_fraction` of its capacity (never discharging). The
/// grid supplies or absorbs the balance.
pub fn connected_step_with_target(
    ngrid: &NGrid,
    state: &NGridState,
    hour: usize,
    bess_target_fraction: f64,
) -> Result<(DispatchOutcome, NGridState), DispatchError> {
    let h = Hour::new(ngrid, state, hour)?;
    let mut next = state.clone();
    let mut out = h.outcome(true, ngrid.evs.len());

    out.hvac_kw = h.hvac_normal;
    out.deferrable_kw = h.serve_deferrables(&mut next, None);
    out.lost_deferrable_kwh = h.expire_deferrables(&mut next);
    out.served_load_kw = h.base + out.hvac_kw + out.deferrable_kw;
    out.load_kw = out.served_load_kw;

    if let Some(bess) = &ngrid.bess {
        let target = bess.capacity_kwh * bess_target_fraction.clamp(0.0, 1.0);
        let wanted = (target - state.bess_soc_kwh).max(0.0) / (bess.eta_charge * STEP_HOURS);
        out.bess_kw = -wanted.min(bess.charge_limit_kw(state.bess_soc_kwh, STEP_HOURS, 1.0));
    }
    out.ev_kw_each = h.ev_limits(state, true).iter().map(|p| -p).collect();
    out.ev_kw = out.ev_kw_each.iter().sum();
    out.grid_kw = out.served_load_kw - out.bess_kw - out.ev_kw - h.pv;

    next.hvac_curtailed = false;
    apply_storage(ngrid, &mut next, &out);
    Ok((out, next))
}

/// Inputs that turn stored energy into deliverable reserve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityParams {
    /// How long reserve must be sustainable, hours.
    pub delivery_hours: f64,
    /// Weather factor in (0, 1] applied to storage power ratings.
    pub derate: f64,
}

impl Default for CapacityParams {
    fn default() -> Self {
        Self {
            delivery_hours: 1.0,
            derate: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SrOffer {
    pub bess_sr_kw: f64,
    pub ev_sr_kw: f64,
    pub hvac_sr_kw: f64,
    pub total_sr_kw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RampCapacity {
    pub ru_kw: f64,
    pub rd_kw: f64,
}

/// Upward reserve of one battery given its dispatched power: the unused
/// discharge rating when discharging or idle, the charging power itself when
/// charging, capped by what the stored energy can sustain.
fn storage_sr(unit: &StorageUnit, soc: f64, power_kw: f64, params: &CapacityParams) -> f64 {
    let p_max = unit.p_max_kw * params.derate;
    let headroom = if power_kw >= 0.0 {
        p_max - power_kw
    } else {
        -power_kw
    };
    headroom
        .clamp(0.0, p_max)
        .min(soc / params.delivery_hours)
        .max(0.0)
}

/// Downward ramp of one battery: extra charging it could absorb.
fn storage_rd(unit: &StorageUnit, soc: f64, power_kw: f64, params: &CapacityParams) -> f64 {
    let p_max = unit.p_max_kw * params.derate;
    (p_max + power_kw)
        .min((unit.capacity_kwh - soc) / params.delivery_hours)
        .max(0.0)
}

/// Spinning reserve a grid-tied n-grid can offer for the hour. `state` is the
/// state at the start of the hour and `outcome` that hour's dispatch.
pub fn sr_capacity(
    ngrid: &NGrid,
    state: &NGridState,
    outcome: &DispatchOutcome,
    params: &CapacityParams,
) -> Result<SrOffer, DispatchError> {
    if !outcome.connected {
        return Err(DispatchError::Islanded {
            ngrid: ngrid.id.clone(),
            hour: outcome.hour,
        });
    }
    let bess_sr_kw = ngrid.bess.as_ref().map_or(0.0, |b| {
        storage_sr(b, state.bess_soc_kwh, outcome.bess_kw, params)
    });
    let ev_sr_kw = ngrid
        .evs
        .iter()
        .enumerate()
        .filter(|(_, ev)| ev.is_plugged(outcome.hour))
        .map(|(i, ev)| {
            storage_sr(
                &ev.battery,
                state.ev_soc_kwh[i],
                outcome.ev_kw_each[i],
                params,
            )
        })
        .sum();
    let hvac_sr_kw = (outcome.hvac_kw - ngrid.hvac_min_kw(outcome.hour)).max(0.0);
    Ok(SrOffer {
        bess_sr_kw,
        ev_sr_kw,
        hvac_sr_kw,
        total_sr_kw: bess_sr_kw + ev_sr_kw + hvac_sr_kw,
    })
}

/// Ramp-up and ramp-down capacity; zero while islanded.
pub fn ramp_capacity(
    ngrid: &NGrid,
    state: &NGridState,
    outcome: &DispatchOutcome,
    params: &CapacityParams,
) -> RampCapacity {
    if !outcome.connected {
        return RampCapacity::default();
    }
    let ru_kw = sr_capacity(ngrid, state, outcome, params)
        .map(|sr| sr.total_sr_kw)
        .unwrap_or(0.0);
    let mut rd_kw = ngrid.bess.as_ref().map_or(0.0, |b| {
        storage_rd(b, state.bess_soc_kwh, outcome.bess_kw, params)
    });
    for (i, ev) in ngrid.evs.iter().enumerate() {
        if ev.is_plugged(outcome.hour) {
            rd_kw += storage_rd(
                &ev.battery,
                state.ev_soc_kwh[i],
                outcome.ev_kw_each[i],
                params,
            );
        }
    }
    RampCapacity { ru_kw, rd_kw }
}
