use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::tables::{
    read_derate, read_profiles, read_sor, write_derate, write_profiles, write_sor, ProfileRow,
};
use crate::error::{Error, Result};
use crate::fleet::{
    format_hour_ranges, parse_hour_ranges, DeferrableTask, ElectricVehicle, Fleet, HourlyProfile,
    HvacAsset, NGrid, StorageUnit,
};
use crate::sim::{ChargePolicy, DerateTable, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub simulation: SimulationSection,
    pub files: FilesSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    pub repair_hours: f64,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub sr_delivery_hours: f64,
    #[serde(default)]
    pub precharge: PrechargeName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrechargeName {
    #[default]
    Full,
    Sor,
}

impl PrechargeName {
    pub fn policy(self) -> ChargePolicy {
        match self {
            Self::Full => ChargePolicy::Full,
            Self::Sor => ChargePolicy::sor_default(),
        }
    }
}

/// Paths are relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilesSection {
    pub fleet: PathBuf,
    pub profiles: PathBuf,
    pub sor: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derate: Option<PathBuf>,
}

fn default_horizon() -> usize {
    crate::fleet::DEFAULT_HORIZON
}

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetFile {
    /// Named hourly profiles that HVAC entries can refer to.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub profiles: BTreeMap<String, Vec<f64>>,
    pub feeders: Vec<FeederEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederEntry {
    pub id: String,
    #[serde(default)]
    pub ngrids: Vec<NGridEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NGridEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bess: Option<StorageEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hvac: Option<HvacEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub evs: Vec<EvEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deferrables: Vec<TaskEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageEntry {
    pub capacity_kwh: f64,
    pub p_max_kw: f64,
    pub soc0_kwh: f64,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub eta_charge: f64,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub eta_discharge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvEntry {
    pub capacity_kwh: f64,
    pub p_max_kw: f64,
    pub soc_arrival_kwh: f64,
    /// e.g. `"0-6,19-23"`
    pub plug_hours: String,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub eta_charge: f64,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub eta_discharge: f64,
}

/// A constant, an inline hourly array, or the name of a shared profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileValue {
    Constant(f64),
    Hourly(Vec<f64>),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HvacEntry {
    pub p_normal: ProfileValue,
    pub p_min: ProfileValue,
    /// Multiplies both profiles.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEntry {
    pub energy_kwh: f64,
    pub power_kw: f64,
    pub earliest: usize,
    pub deadline: usize,
}

impl StorageEntry {
    fn build(&self) -> StorageUnit {
        StorageUnit::new(self.capacity_kwh, self.p_max_kw, self.soc0_kwh)
            .with_efficiency(self.eta_charge, self.eta_discharge)
    }

    fn from_unit(unit: &StorageUnit) -> Self {
        Self {
            capacity_kwh: unit.capacity_kwh,
            p_max_kw: unit.p_max_kw,
            soc0_kwh: unit.soc_kwh,
            eta_charge: unit.eta_charge,
            eta_discharge: unit.eta_discharge,
        }
    }
}

impl ProfileValue {
    fn resolve(
        &self,
        named: &BTreeMap<String, Vec<f64>>,
        horizon: usize,
        scale: f64,
    ) -> Result<HourlyProfile, String> {
        let values = match self {
            Self::Constant(v) => vec![*v; horizon],
            Self::Hourly(v) => v.clone(),
            Self::Named(name) => named
                .get(name)
                .cloned()
                .ok_or_else(|| format!("unknown profile `{name}`"))?,
        };
        Ok(HourlyProfile::new(
            values.into_iter().map(|v| v * scale).collect(),
        ))
    }
}

impl FleetFile {
    /// Builds the fleet, taking base load and PV from `profiles`.
    pub fn build(
        &self,
        profiles: &super::tables::Profiles,
        horizon: usize,
    ) -> Result<Fleet, String> {
        let mut ngrids = Vec::new();
        for feeder in &self.feeders {
            for entry in &feeder.ngrids {
                let (load, pv) = profiles
                    .get(&entry.id)
                    .ok_or_else(|| format!("no load/PV profile for n-grid `{}`", entry.id))?;
                let mut ngrid = NGrid::new(
                    &entry.id,
                    &feeder.id,
                    HourlyProfile::new(load.clone()),
                    HourlyProfile::new(pv.clone()),
                );
                ngrid.bess = entry.bess.as_ref().map(StorageEntry::build);
                ngrid.hvac = match &entry.hvac {
                    None => None,
                    Some(h) => Some(HvacAsset {
                        p_normal_kw: h.p_normal.resolve(&self.profiles, horizon, h.scale)?,
                        p_min_kw: h.p_min.resolve(&self.profiles, horizon, h.scale)?,
                    }),
                };
                for ev in &entry.evs {
                    ngrid.evs.push(ElectricVehicle {
                        battery: StorageUnit::new(ev.capacity_kwh, ev.p_max_kw, ev.soc_arrival_kwh)
                            .with_efficiency(ev.eta_charge, ev.eta_discharge),
                        plug_hours: parse_hour_ranges(&ev.plug_hours)
                            .map_err(|e| format!("n-grid `{}`: {e}", entry.id))?,
                        soc_on_arrival_kwh: ev.soc_arrival_kwh,
                    });
                }
                ngrid.deferrables = entry
                    .deferrables
                    .iter()
                    .map(|t| DeferrableTask {
                        energy_kwh: t.energy_kwh,
                        power_kw: t.power_kw,
                        earliest_hour: t.earliest,
                        deadline_hour: t.deadline,
                    })
                    .collect();
                ngrids.push(ngrid);
            }
        }
        if let Some(extra) = profiles
            .keys()
            .find(|id| !ngrids.iter().any(|n| &n.id == *id))
        {
            return Err(format!("profile rows for unknown n-grid `{extra}`"));
        }
        let mut fleet = Fleet::from_ngrids(ngrids);
        // keep feeders that were declared without n-grids
        for feeder in &self.feeders {
            if !fleet.feeders.iter().any(|f| f.id == feeder.id) {
                fleet.feeders.push(crate::fleet::Feeder {
                    id: feeder.id.clone(),
                    ngrid_ids: Vec::new(),
                });
            }
        }
        Ok(fleet)
    }

    /// Describes `fleet`. Identical HVAC profiles are shared by name.
    pub fn from_fleet(fleet: &Fleet) -> Self {
        let mut file = Self::default();
        let mut shared: Vec<Vec<f64>> = Vec::new();
        let mut name_for = |values: &[f64]| -> ProfileValue {
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            let i = match shared.iter().position(|s| bits(s) == bits(values)) {
                Some(i) => i,
                None => {
                    shared.push(values.to_vec());
                    shared.len() - 1
                }
            };
            ProfileValue::Named(format!("hvac{}", i + 1))
        };
        for feeder in &fleet.feeders {
            let mut entry = FeederEntry {
                id: feeder.id.clone(),
                ngrids: Vec::new(),
            };
            for id in &feeder.ngrid_ids {
                let Some(n) = fleet.ngrids.iter().find(|n| &n.id == id) else {
                    continue;
                };
                entry.ngrids.push(NGridEntry {
                    id: n.id.clone(),
                    bess: n.bess.as_ref().map(StorageEntry::from_unit),
                    hvac: n.hvac.as_ref().map(|h| HvacEntry {
                        p_normal: name_for(h.p_normal_kw.values()),
                        p_min: name_for(h.p_min_kw.values()),
                        scale: 1.0,
                    }),
                    evs: n
                        .evs
                        .iter()
                        .map(|ev| EvEntry {
                            capacity_kwh: ev.battery.capacity_kwh,
                            p_max_kw: ev.battery.p_max_kw,
                            soc_arrival_kwh: ev.soc_on_arrival_kwh,
                            plug_hours: format_hour_ranges(&ev.plug_hours),
                            eta_charge: ev.battery.eta_charge,
                            eta_discharge: ev.battery.eta_discharge,
                        })
                        .collect(),
                    deferrables: n
                        .deferrables
                        .iter()
                        .map(|t| TaskEntry {
                            energy_kwh: t.energy_kwh,
                            power_kw: t.power_kw,
                            earliest: t.earliest_hour,
                            deadline: t.deadline_hour,
                        })
                        .collect(),
                });
            }
            file.feeders.push(entry);
        }
        file.profiles = shared
            .into_iter()
            .enumerate()
            .map(|(i, v)| (format!("hvac{}", i + 1), v))
            .collect();
        file
    }
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::parse(path, e))
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::parse(path, e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads and validates a scenario file together with the files it names.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let file: ScenarioFile = read_toml(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let sim = &file.simulation;
    let horizon = sim.horizon;

    let fleet_path = base.join(&file.files.fleet);
    let fleet_file: FleetFile = read_toml(&fleet_path)?;
    let profiles_path = base.join(&file.files.profiles);
    let profiles = read_profiles(&profiles_path, horizon)?;
    let fleet = fleet_file
        .build(&profiles, horizon)
        .map_err(|e| Error::parse(&fleet_path, e))?;
    let feeders: Vec<String> = fleet.feeder_ids().map(str::to_string).collect();
    let sor = read_sor(&base.join(&file.files.sor), &feeders, horizon)?;
    let derate = match &file.files.derate {
        None => None,
        Some(p) => Some(DerateTable::from_entries(
            read_derate(&base.join(p))?,
            &feeders,
            horizon,
        )?),
    };

    let scenario = Scenario {
        fleet,
        sor,
        horizon,
        repair_hours: sim.repair_hours,
        replications: sim.replications,
        master_seed: sim.seed,
        sr_delivery_hours: sim.sr_delivery_hours,
        derate,
        policy: sim.precharge.policy(),
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Writes `scenario.toml` plus its fleet, profile, SoR and derate files into
/// `dir`. Returns the scenario file path.
pub fn write_scenario(scenario: &Scenario, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let precharge = match scenario.policy {
        ChargePolicy::Full => PrechargeName::Full,
        p if p == ChargePolicy::sor_default() => PrechargeName::Sor,
        _ => {
            return Err(Error::parse(
                dir,
                "only the default precharge policies can be written to a file",
            ));
        }
    };
    let file = ScenarioFile {
        simulation: SimulationSection {
            horizon: scenario.horizon,
            repair_hours: scenario.repair_hours,
            replications: scenario.replications,
            seed: scenario.master_seed,
            sr_delivery_hours: scenario.sr_delivery_hours,
            precharge,
        },
        files: FilesSection {
            fleet: "fleet.toml".into(),
            profiles: "profiles.csv".into(),
            sor: "sor.csv".into(),
            derate: scenario.derate.as_ref().map(|_| "derate.csv".into()),
        },
    };
    write_toml(
        &dir.join("fleet.toml"),
        &FleetFile::from_fleet(&scenario.fleet),
    )?;
    let rows: Vec<ProfileRow> = scenario
        .fleet
        .ngrids
        .iter()
        .flat_map(|n| {
            (0..scenario.horizon).map(move |h| ProfileRow {
                ngrid_id: n.id.clone(),
                hour: h,
                load_kw: n.base_load[h],
                pv_kw: n.pv[h],
            })
        })
        .collect();
    write_profiles(&dir.join("profiles.csv"), &rows)?;
    write_sor(&dir.join("sor.csv"), &scenario.sor)?;
    if let Some(derate) = &scenario.derate {
        let feeders = scenario.feeder_ids();
        write_derate(&dir.join("derate.csv"), derate.entries(&feeders))?;
    }
    let path = dir.join("scenario.toml");
    write_toml(&path, &file)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLEET: &str = r#"
[profiles]
heat = [2.0, 2.0]

[[feeders]]
id = "F1"

[[feeders.ngrids]]
id = "a"
bess = { capacity_kwh = 10, p_max_kw = 5, soc0_kwh = 10 }
hvac = { p_normal = "heat", p_min = 0.5, scale = 1.5 }
evs = [{ capacity_kwh = 60, p_max_kw = 7.2, soc_arrival_kwh = 30, plug_hours = "0-1" }]
deferrables = [{ energy_kwh = 1, power_kw = 1, earliest = 0, deadline = 1 }]

[[feeders.ngrids]]
id = "b"
"#;

    fn write(dir: &Path, name: &str, text: &str) {
        std::fs::write(dir.join(name), text).unwrap();
    }

    fn bundle(dir: &Path) -> PathBuf {
        write(dir, "fleet.toml", FLEET);
        write(
            dir,
            "profiles.csv",
            "ngrid_id,hour,load_kw,pv_kw\na,0,1,0\na,1,1,3\nb,0,2,0\nb,1,2,0\n",
        );
        write(
            dir,
            "sor.csv",
            "feeder_id,hour,probability\nF1,0,0.1\nF1,1,0.2\n",
        );
        write(
            dir,
            "scenario.toml",
            "[simulation]\nhorizon = 2\nrepair_hours = 1\nreplications = 3\nseed = 5\n\n[files]\nfleet = \"fleet.toml\"\nprofiles = \"profiles.csv\"\nsor = \"sor.csv\"\n",
        );
        dir.join("scenario.toml")
    }

    #[test]
    fn loads_a_small_scenario() {
        let dir = tempfile::tempdir().unwrap();
        let s = load_scenario(&bundle(dir.path())).unwrap();
        assert_eq!(s.fleet.ngrids.len(), 2);
        let a = &s.fleet.ngrids[0];
        assert_eq!(a.hvac_normal_kw(1), 3.0);
        assert_eq!(a.hvac_min_kw(0), 0.75);
        assert_eq!(a.evs[0].plug_hours.len(), 2);
        assert_eq!(s.sor.get("F1", 1), Some(0.2));
        assert_eq!(s.policy, ChargePolicy::Full);
        assert!(s.derate.is_none());
    }

    #[test]
    fn written_scenario_reloads_identically() {
        let dir = tempfile::tempdir().unwrap();
        let s = load_scenario(&bundle(dir.path())).unwrap();
        let out = tempfile::tempdir().unwrap();
        let path = write_scenario(&s, out.path()).unwrap();
        assert_eq!(load_scenario(&path).unwrap(), s);
    }

    #[test]
    fn invalid_fleet_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = bundle(dir.path());
        write(
            dir.path(),
            "fleet.toml",
            &FLEET.replace("soc0_kwh = 10", "soc0_kwh = 12"),
        );
        let err = load_scenario(&path).unwrap_err();
        assert!(matches!(
            err,
            Error::Sim(crate::sim::SimError::InvalidFleet(_))
        ));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = bundle(dir.path());
        write(
            dir.path(),
            "fleet.toml",
            &FLEET.replace("id = \"b\"", "id = \"b\"\nsolar = 3"),
        );
        assert!(matches!(load_scenario(&path), Err(Error::Parse { .. })));
    }
}
