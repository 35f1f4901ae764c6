//! Synthetic winter-storm day used as the bundled demo scenario.
//!
//! Ten feeders of fifty residential n-grids each. Every home has PV and a
//! heat pump, half have a battery, and 750 EVs are plugged in overnight.
//! Outage risk peaks around midday on each feeder. The generator is fully
//! deterministic for a given [`CaseStudy`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fleet::{
    DeferrableTask, ElectricVehicle, Fleet, HourlyProfile, HvacAsset, NGrid, StorageUnit,
    DEFAULT_HORIZON,
};
use crate::sim::{ChargePolicy, DerateTable, Scenario};
use crate::sor::SorTable;

const BASE_LOAD_KW: [f64; 24] = [
    0.70, 0.65, 0.60, 0.60, 0.65, 0.80, 1.10, 1.40, 1.20, 0.90, 0.80, 0.80, 0.80, 0.80, 0.85, 0.95,
    1.20, 1.60, 1.90, 2.00, 1.80, 1.50, 1.10, 0.85,
];

/// Share of rated heat-pump power drawn each hour on a cold day.
const HEATING_DUTY: [f64; 24] = [
    0.80, 0.80, 0.85, 0.85, 0.90, 0.90, 0.85, 0.75, 0.60, 0.50, 0.45, 0.40, 0.40, 0.40, 0.45, 0.50,
    0.55, 0.65, 0.70, 0.75, 0.75, 0.75, 0.80, 0.80,
];

const HVAC_SIZES_KW: [f64; 4] = [1.0, 1.5, 2.0, 2.5];
const HVAC_FLOOR_SHARE: f64 = 0.4;
const SUNRISE: f64 = 6.75;
const SUNSET: f64 = 18.25;
const SOR_BASELINE: f64 = 0.003;

#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudy {
    pub feeders: usize,
    pub ngrids_per_feeder: usize,
    pub replications: usize,
    pub repair_hours: f64,
    /// Seed of the outage sampler.
    pub master_seed: u64,
    /// Seed of the synthetic fleet, weather and risk profiles.
    pub profile_seed: u64,
    pub policy: ChargePolicy,
    pub storm_derate: bool,
}

impl Default for CaseStudy {
    fn default() -> Self {
        Self {
            feeders: 10,
            ngrids_per_feeder: 50,
            replications: 100,
            repair_hours: 1.0,
            master_seed: 20_210_215,
            profile_seed: 7,
            policy: ChargePolicy::Full,
            storm_derate: true,
        }
    }
}

fn round_to(x: f64, digits: i32) -> f64 {
    let scale = 10f64.powi(digits);
    (x * scale).round() / scale
}

fn daylight(hour: usize) -> f64 {
    let mid = hour as f64 + 0.5;
    if mid <= SUNRISE || mid >= SUNSET {
        0.0
    } else {
        (std::f64::consts::PI * (mid - SUNRISE) / (SUNSET - SUNRISE)).sin()
    }
}

fn hvac_class(size_kw: f64) -> HvacAsset {
    let normal: Vec<f64> = HEATING_DUTY
        .iter()
        .map(|d| round_to(size_kw * d, 4))
        .collect();
    let min = normal
        .iter()
        .map(|p| round_to(p * HVAC_FLOOR_SHARE, 4))
        .collect();
    HvacAsset {
        p_normal_kw: HourlyProfile::new(normal),
        p_min_kw: HourlyProfile::new(min),
    }
}

impl CaseStudy {
    pub fn feeder_ids(&self) -> Vec<String> {
        (1..=self.feeders).map(|f| format!("F{f:02}")).collect()
    }

    pub fn build(&self) -> Scenario {
        let horizon = DEFAULT_HORIZON;
        let mut rng = ChaCha8Rng::seed_from_u64(self.profile_seed);
        let feeders = self.feeder_ids();
        let hvac: Vec<HvacAsset> = HVAC_SIZES_KW.iter().map(|s| hvac_class(*s)).collect();
        let clouds: Vec<f64> = (0..horizon).map(|_| rng.random_range(0.45..0.85)).collect();

        let mut ngrids = Vec::with_capacity(self.feeders * self.ngrids_per_feeder);
        for feeder in &feeders {
            for j in 0..self.ngrids_per_feeder {
                let i = ngrids.len();
                let load_scale = rng.random_range(0.8..1.25);
                let kwp = rng.random_range(4.0..7.0);
                let base = BASE_LOAD_KW
                    .iter()
                    .map(|l| round_to(l * load_scale, 3))
                    .collect();
                let pv = (0..horizon)
                    .map(|h| round_to(kwp * 0.8 * daylight(h) * clouds[h], 3))
                    .collect();
                let mut n = NGrid::new(
                    format!("{feeder}-N{:02}", j + 1),
                    feeder.clone(),
                    HourlyProfile::new(base),
                    HourlyProfile::new(pv),
                );
                n.hvac = Some(hvac[rng.random_range(0..hvac.len())].clone());
                if i % 2 == 0 {
                    n.bess = Some(StorageUnit::new(13.5, 5.0, 13.5));
                }
                let ev_count = if (i / 2) % 2 == 0 { 2 } else { 1 };
                for _ in 0..ev_count {
                    let depart = rng.random_range(6..=8);
                    let arrive = rng.random_range(18..=20);
                    let soc = round_to(60.0 * rng.random_range(0.25..0.6), 1);
                    n.evs.push(ElectricVehicle {
                        battery: StorageUnit::new(60.0, 7.2, soc),
                        plug_hours: (0..depart).chain(arrive..horizon).collect(),
                        soc_on_arrival_kwh: soc,
                    });
                }
                n.deferrables = match i % 3 {
                    0 => vec![DeferrableTask {
                        energy_kwh: 1.2,
                        power_kw: 1.2,
                        earliest_hour: 19,
                        deadline_hour: 22,
                    }],
                    1 => vec![DeferrableTask {
                        energy_kwh: 2.0,
                        power_kw: 1.0,
                        earliest_hour: 9,
                        deadline_hour: 16,
                    }],
                    _ => Vec::new(),
                };
                ngrids.push(n);
            }
        }

        let mut sor_entries = Vec::new();
        let mut derate_entries = Vec::new();
        for feeder in &feeders {
            let amplitude = rng.random_range(0.05..0.15);
            let peak = rng.random_range(11.0..15.0);
            let width = rng.random_range(2.0..3.5);
            for h in 0..horizon {
                let z = (h as f64 - peak) / width;
                let storm = amplitude * (-0.5 * z * z).exp();
                sor_entries.push((feeder.clone(), h, round_to(SOR_BASELINE + storm, 4)));
                derate_entries.push((
                    feeder.clone(),
                    h,
                    round_to((1.0 - 2.0 * storm).clamp(0.7, 1.0), 3),
                ));
            }
        }

        let sor = SorTable::from_entries(sor_entries, &feeders, horizon)
            .expect("generated SoR is complete");
        let derate = self.storm_derate.then(|| {
            DerateTable::from_entries(derate_entries, &feeders, horizon)
                .expect("generated derate is valid")
        });
        Scenario {
            fleet: Fleet::from_ngrids(ngrids),
            sor,
            horizon,
            repair_hours: self.repair_hours,
            replications: self.replications,
            master_seed: self.master_seed,
            sr_delivery_hours: 1.0,
            derate,
            policy: self.policy,
        }
    }
}
