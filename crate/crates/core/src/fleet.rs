//! Domain types for prosumer nano-grids, the feeders they hang off, and the
//! hourly profiles that drive them.
//!
//! Everything in here is immutable once a scenario is loaded. Mutable
//! per-replication state (state of charge, deferred energy) lives in
//! [`crate::dispatch::NGridState`].

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default scenario horizon, in hours.
pub const DEFAULT_HORIZON: usize = 24;

#[derive(Debug, Error, PartialEq)]
pub enum FleetError {
    #[error("hour {hour} out of range for horizon {horizon}")]
    HourOutOfRange { hour: usize, horizon: usize },
    #[error("invalid plug-hour range `{0}`")]
    BadHourRange(String),
}

/// Hourly power series in kW, indexed by hour.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HourlyProfile(Vec<f64>);

impl HourlyProfile {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn constant(value: f64, horizon: usize) -> Self {
        Self(vec![value; horizon])
    }

    pub fn zeros(horizon: usize) -> Self {
        Self::constant(0.0, horizon)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Value at `hour`, or an error when the hour is past the end.
    pub fn at(&self, hour: usize) -> Result<f64, FleetError> {
        self.0.get(hour).copied().ok_or(FleetError::HourOutOfRange {
            hour,
            horizon: self.0.len(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Index of the first negative or non-finite entry.
    fn first_invalid(&self) -> Option<usize> {
        self.0.iter().position(|v| !v.is_finite() || *v < 0.0)
    }
}

impl std::ops::Index<usize> for HourlyProfile {
    type Output = f64;

    fn index(&self, hour: usize) -> &f64 {
        &self.0[hour]
    }
}

/// Stationary or vehicle battery. `soc_kwh` is the initial state of charge;
/// the running value is tracked by the dispatch engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageUnit {
    pub capacity_kwh: f64,
    pub p_max_kw: f64,
    pub soc_kwh: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
}

impl StorageUnit {
    /// Lossless unit.
    pub fn new(capacity_kwh: f64, p_max_kw: f64, soc_kwh: f64) -> Self {
        Self {
            capacity_kwh,
            p_max_kw,
            soc_kwh,
            eta_charge: 1.0,
            eta_discharge: 1.0,
        }
    }

    pub fn with_efficiency(mut self, eta_charge: f64, eta_discharge: f64) -> Self {
        self.eta_charge = eta_charge;
        self.eta_discharge = eta_discharge;
        self
    }

    /// Largest bus-side discharge power sustainable for `dt_h` hours from `soc`.
    pub fn discharge_limit_kw(&self, soc: f64, dt_h: f64, derate: f64) -> f64 {
        (self.p_max_kw * derate)
            .min(soc * self.eta_discharge / dt_h)
            .max(0.0)
    }

    /// Largest bus-side charge power absorbable for `dt_h` hours from `soc`.
    pub fn charge_limit_kw(&self, soc: f64, dt_h: f64, derate: f64) -> f64 {
        (self.p_max_kw * derate)
            .min((self.capacity_kwh - soc) / (self.eta_charge * dt_h))
            .max(0.0)
    }

    /// State of charge after exchanging `power_kw` (positive = discharge) for `dt_h`.
    pub fn soc_after(&self, soc: f64, power_kw: f64, dt_h: f64) -> f64 {
        let next = if power_kw >= 0.0 {
            soc - power_kw * dt_h / self.eta_discharge
        } else {
            soc - power_kw * dt_h * self.eta_charge
        };
        // float noise only; the limits above keep us inside the bounds
        next.clamp(0.0, self.capacity_kwh)
    }

    fn check(&self, entity: &str, soc_label: &str, soc: f64, out: &mut Vec<Violation>) {
        let mut bad = |message: String| out.push(Violation::new(entity, message));
        if !(self.capacity_kwh.is_finite() && self.capacity_kwh > 0.0) {
            bad(format!(
                "capacity_kwh must be > 0, got {}",
                self.capacity_kwh
            ));
        }
        if !(self.p_max_kw.is_finite() && self.p_max_kw > 0.0) {
            bad(format!("p_max_kw must be > 0, got {}", self.p_max_kw));
        }
        for (name, eta) in [
            ("eta_charge", self.eta_charge),
            ("eta_discharge", self.eta_discharge),
        ] {
            if !(eta > 0.0 && eta <= 1.0) {
                bad(format!("{name} must be in (0,1], got {eta}"));
            }
        }
        if !(soc.is_finite() && soc >= 0.0 && soc <= self.capacity_kwh) {
            bad(format!(
                "{soc_label} {soc} outside [0, {}]",
                self.capacity_kwh
            ));
        }
    }
}

/// An EV battery that is only reachable while plugged into the home charger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectricVehicle {
    pub battery: StorageUnit,
    pub plug_hours: BTreeSet<usize>,
    pub soc_on_arrival_kwh: f64,
}

impl ElectricVehicle {
    pub fn is_plugged(&self, hour: usize) -> bool {
        self.plug_hours.contains(&hour)
    }

    /// First plugged hour of a contiguous plug interval.
    pub fn arrives_at(&self, hour: usize) -> bool {
        self.is_plugged(hour) && (hour == 0 || !self.is_plugged(hour - 1))
    }
}

/// Parse plug hours written as comma-separated inclusive ranges, e.g. `0-6,19-23`.
pub fn parse_hour_ranges(text: &str) -> Result<BTreeSet<usize>, FleetError> {
    let bad = || FleetError::BadHourRange(text.to_string());
    let mut hours = BTreeSet::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (part, part),
        };
        let lo: usize = lo.parse().map_err(|_| bad())?;
        let hi: usize = hi.parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        hours.extend(lo..=hi);
    }
    Ok(hours)
}

/// Render plug hours back into the compact range syntax.
pub fn format_hour_ranges(hours: &BTreeSet<usize>) -> String {
    let mut parts = Vec::new();
    let mut iter = hours.iter().copied().peekable();
    while let Some(start) = iter.next() {
        let mut end = start;
        while iter.peek() == Some(&(end + 1)) {
            end = iter.next().unwrap();
        }
        if start == end {
            parts.push(start.to_string());
        } else {
            parts.push(format!("{start}-{end}"));
        }
    }
    parts.join(",")
}

/// Thermostat-controlled load with an occupant-set demand and a comfort floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HvacAsset {
    pub p_normal_kw: HourlyProfile,
    pub p_min_kw: HourlyProfile,
}

/// Fixed-energy task (laundry, dishwasher) with a service window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeferrableTask {
    pub energy_kwh: f64,
    pub power_kw: f64,
    pub earliest_hour: usize,
    pub deadline_hour: usize,
}

impl DeferrableTask {
    pub fn in_window(&self, hour: usize) -> bool {
        self.earliest_hour <= hour && hour <= self.deadline_hour
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGrid {
    pub id: String,
    pub feeder_id: String,
    pub base_load: HourlyProfile,
    pub pv: HourlyProfile,
    pub bess: Option<StorageUnit>,
    pub evs: Vec<ElectricVehicle>,
    pub hvac: Option<HvacAsset>,
    pub deferrables: Vec<DeferrableTask>,
}

impl NGrid {
    /// Bare site with only base load and PV.
    pub fn new(
        id: impl Into<String>,
        feeder_id: impl Into<String>,
        base_load: HourlyProfile,
        pv: HourlyProfile,
    ) -> Self {
        Self {
            id: id.into(),
            feeder_id: feeder_id.into(),
            base_load,
            pv,
            bess: None,
            evs: Vec::new(),
            hvac: None,
            deferrables: Vec::new(),
        }
    }

    pub fn hvac_normal_kw(&self, hour: usize) -> f64 {
        self.hvac.as_ref().map_or(0.0, |h| h.p_normal_kw[hour])
    }

    pub fn hvac_min_kw(&self, hour: usize) -> f64 {
        self.hvac.as_ref().map_or(0.0, |h| h.p_min_kw[hour])
    }
}

/// Load minus PV at `hour`; negative values are surplus.
pub fn net_load(
    ngrid: &NGrid,
    hour: usize,
    hvac_curtailed: bool,
    deferrable_served_kw: f64,
) -> Result<f64, FleetError> {
    let base = ngrid.base_load.at(hour)?;
    let pv = ngrid.pv.at(hour)?;
    let hvac = match &ngrid.hvac {
        Some(h) if hvac_curtailed => h.p_min_kw.at(hour)?,
        Some(h) => h.p_normal_kw.at(hour)?,
        None => 0.0,
    };
    Ok(base + hvac + deferrable_served_kw - pv)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feeder {
    pub id: String,
    pub ngrid_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Fleet {
    pub feeders: Vec<Feeder>,
    pub ngrids: Vec<NGrid>,
}

impl Fleet {
    /// Builds the feeder partition from each n-grid's `feeder_id`, in first-seen order.
    pub fn from_ngrids(ngrids: Vec<NGrid>) -> Self {
        let mut feeders: Vec<Feeder> = Vec::new();
        for ng in &ngrids {
            match feeders.iter_mut().find(|f| f.id == ng.feeder_id) {
                Some(f) => f.ngrid_ids.push(ng.id.clone()),
                None => feeders.push(Feeder {
                    id: ng.feeder_id.clone(),
                    ngrid_ids: vec![ng.id.clone()],
                }),
            }
        }
        Self { feeders, ngrids }
    }

    pub fn feeder_ids(&self) -> impl Iterator<Item = &str> {
        self.feeders.iter().map(|f| f.id.as_str())
    }

    pub fn ev_count(&self) -> usize {
        self.ngrids.iter().map(|n| n.evs.len()).sum()
    }
}

/// One broken invariant, tagged with the id of the offending entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub entity: String,
    pub message: String,
}

impl Violation {
    fn new(entity: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            entity: entity.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.message)
    }
}

/// Checks every structural and numeric invariant of the fleet against a
/// horizon. An empty result means the fleet is usable.
pub fn validate_fleet(fleet: &Fleet, horizon: usize) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut feeder_ids = HashSet::new();
    for feeder in &fleet.feeders {
        if !feeder_ids.insert(feeder.id.as_str()) {
            out.push(Violation::new(&feeder.id, "duplicate feeder id"));
        }
    }

    let mut ngrid_feeder: HashMap<&str, &str> = HashMap::new();
    for ng in &fleet.ngrids {
        if ngrid_feeder.insert(&ng.id, &ng.feeder_id).is_some() {
            out.push(Violation::new(&ng.id, "duplicate n-grid id"));
        }
        if !feeder_ids.contains(ng.feeder_id.as_str()) {
            out.push(Violation::new(
                &ng.id,
                format!("feeder_id `{}` names no feeder", ng.feeder_id),
            ));
        }
        check_ngrid(ng, horizon, &mut out);
    }

    // partition: every n-grid listed exactly once, under its own feeder
    let mut listed: HashMap<&str, usize> = HashMap::new();
    for feeder in &fleet.feeders {
        let mut local = HashSet::new();
        for id in &feeder.ngrid_ids {
            if !local.insert(id.as_str()) {
                out.push(Violation::new(
                    &feeder.id,
                    format!("n-grid `{id}` listed twice"),
                ));
            }
            *listed.entry(id.as_str()).or_default() += 1;
            match ngrid_feeder.get(id.as_str()) {
                None => out.push(Violation::new(
                    &feeder.id,
                    format!("lists unknown n-grid `{id}`"),
                )),
                // a dangling feeder_id was already reported above
                Some(f) if *f != feeder.id && feeder_ids.contains(f) => out.push(Violation::new(
                    &feeder.id,
                    format!("lists n-grid `{id}` whose feeder_id is `{f}`"),
                )),
                Some(_) => {}
            }
        }
    }
    for ng in &fleet.ngrids {
        match listed.get(ng.id.as_str()).copied().unwrap_or(0) {
            1 => {}
            0 => out.push(Violation::new(&ng.id, "not covered by any feeder")),
            n => out.push(Violation::new(
                &ng.id,
                format!("covered by {n} feeder entries"),
            )),
        }
    }
    out
}

fn check_ngrid(ng: &NGrid, horizon: usize, out: &mut Vec<Violation>) {
    let id = ng.id.as_str();
    let profile = |name: &str, p: &HourlyProfile, out: &mut Vec<Violation>| {
        if p.len() != horizon {
            out.push(Violation::new(
                id,
                format!("{name} has {} hours, horizon is {horizon}", p.len()),
            ));
        }
        if let Some(h) = p.first_invalid() {
            out.push(Violation::new(
                id,
                format!("{name}[{h}] = {} is negative or not finite", p.values()[h]),
            ));
        }
    };
    profile("base_load", &ng.base_load, out);
    profile("pv", &ng.pv, out);

    if let Some(bess) = &ng.bess {
        bess.check(&format!("{id}/bess"), "soc_kwh", bess.soc_kwh, out);
    }
    for (i, ev) in ng.evs.iter().enumerate() {
        let entity = format!("{id}/ev{i}");
        ev.battery
            .check(&entity, "soc_on_arrival_kwh", ev.soc_on_arrival_kwh, out);
        if let Some(h) = ev.plug_hours.iter().find(|h| **h >= horizon) {
            out.push(Violation::new(
                &entity,
                format!("plug hour {h} beyond horizon {horizon}"),
            ));
        }
    }
    if let Some(hvac) = &ng.hvac {
        profile("hvac.p_normal_kw", &hvac.p_normal_kw, out);
        profile("hvac.p_min_kw", &hvac.p_min_kw, out);
        for (h, (lo, hi)) in hvac
            .p_min_kw
            .values()
            .iter()
            .zip(hvac.p_normal_kw.values())
            .enumerate()
        {
            if lo > hi {
                out.push(Violation::new(
                    format!("{id}/hvac"),
                    format!("hvac bound violated at hour {h}: p_min {lo} > p_normal {hi}"),
                ));
            }
        }
    }
    for (i, task) in ng.deferrables.iter().enumerate() {
        let entity = format!("{id}/task{i}");
        if !(task.energy_kwh.is_finite() && task.energy_kwh > 0.0) {
            out.push(Violation::new(&entity, "energy_kwh must be > 0"));
        }
        if !(task.power_kw.is_finite() && task.power_kw > 0.0) {
            out.push(Violation::new(&entity, "power_kw must be > 0"));
        }
        if task.earliest_hour > task.deadline_hour || task.deadline_hour >= horizon {
            out.push(Violation::new(
                &entity,
                format!(
                    "window {}..={} invalid for horizon {horizon}",
                    task.earliest_hour, task.deadline_hour
                ),
            ));
        } else {
            let window = (task.deadline_hour - task.earliest_hour + 1) as f64;
            if task.energy_kwh > task.power_kw * window + 1e-9 {
                out.push(Violation::new(
                    &entity,
                    format!(
                        "{} kWh cannot finish in a {window} h window at {} kW",
                        task.energy_kwh, task.power_kw
                    ),
                ));
            }
        }
    }
}
