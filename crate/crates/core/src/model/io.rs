//! TOML system files. Per-period fields accept a scalar or an array of
//! `horizon` values; scalars are broadcast when the file is loaded.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::types::{
    DemandNode, Generator, PowerSystem, Profile, RenewableKind, RenewableUnit, StorageUnit,
    TransmissionLine,
};
use crate::error::{read_file, write_file, Error, Result};

fn one() -> usize {
    1
}

fn unit_period() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorRecord {
    pub id: String,
    pub node: String,
    pub variable_cost: f64,
    #[serde(default)]
    pub no_load_cost: f64,
    #[serde(default)]
    pub startup_cost: f64,
    #[serde(default)]
    pub shutdown_cost: f64,
    pub p_min: Profile,
    pub p_max: Profile,
    pub ramp_up: Profile,
    pub ramp_down: Profile,
    /// Defaults to `p_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub startup_ramp: Option<Profile>,
    /// Defaults to `p_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shutdown_ramp: Option<Profile>,
    #[serde(default = "one")]
    pub min_up: usize,
    #[serde(default = "one")]
    pub min_down: usize,
    pub initial_on: bool,
    #[serde(default)]
    pub initial_output: f64,
    #[serde(default = "one")]
    pub initial_hours_in_state: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewableRecord {
    pub id: String,
    pub node: String,
    pub kind: RenewableKind,
    pub p_max_profile: Profile,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageRecord {
    pub id: String,
    pub node: String,
    #[serde(default = "zero_profile")]
    pub discharge_min: Profile,
    pub discharge_max: Profile,
    #[serde(default = "zero_profile")]
    pub charge_min: Profile,
    pub charge_max: Profile,
    pub energy_capacity: f64,
    #[serde(default)]
    pub initial_level: f64,
    pub efficiency: f64,
}

fn zero_profile() -> Profile {
    Profile::Scalar(0.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRecord {
    pub id: String,
    pub flow_limit: f64,
    #[serde(default)]
    pub sf_demand: Vec<f64>,
    #[serde(default)]
    pub sf_generators: Vec<f64>,
    #[serde(default)]
    pub sf_renewables: Vec<f64>,
    #[serde(default)]
    pub sf_storages: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandRecord {
    pub node: String,
    pub profile: Profile,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    #[serde(default)]
    pub name: String,
    pub horizon: usize,
    #[serde(default = "unit_period")]
    pub period_length: f64,
    #[serde(default)]
    pub generators: Vec<GeneratorRecord>,
    #[serde(default)]
    pub renewables: Vec<RenewableRecord>,
    #[serde(default)]
    pub storages: Vec<StorageRecord>,
    #[serde(default)]
    pub lines: Vec<LineRecord>,
    #[serde(default)]
    pub demands: Vec<DemandRecord>,
}

impl SystemFile {
    pub fn into_system(self) -> Result<PowerSystem> {
        let t = self.horizon;
        let mut generators = Vec::new();
        for g in self.generators {
            let what = |f: &str| format!("generator {} {f}", g.id);
            let p_max = g.p_max.expand(t, &what("p_max"))?;
            let startup_ramp = match &g.startup_ramp {
                Some(p) => p.expand(t, &what("startup_ramp"))?,
                None => p_max.clone(),
            };
            let shutdown_ramp = match &g.shutdown_ramp {
                Some(p) => p.expand(t, &what("shutdown_ramp"))?,
                None => p_max.clone(),
            };
            generators.push(Generator {
                p_min: g.p_min.expand(t, &what("p_min"))?,
                ramp_up: g.ramp_up.expand(t, &what("ramp_up"))?,
                ramp_down: g.ramp_down.expand(t, &what("ramp_down"))?,
                p_max,
                startup_ramp,
                shutdown_ramp,
                id: g.id,
                node: g.node,
                variable_cost: g.variable_cost,
                no_load_cost: g.no_load_cost,
                startup_cost: g.startup_cost,
                shutdown_cost: g.shutdown_cost,
                min_up: g.min_up,
                min_down: g.min_down,
                initial_on: g.initial_on,
                initial_output: g.initial_output,
                initial_hours_in_state: g.initial_hours_in_state,
            });
        }
        let renewables = self
            .renewables
            .into_iter()
            .map(|r| {
                Ok(RenewableUnit {
                    p_max_profile: r
                        .p_max_profile
                        .expand(t, &format!("renewable {} p_max_profile", r.id))?,
                    id: r.id,
                    node: r.node,
                    kind: r.kind,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let storages = self
            .storages
            .into_iter()
            .map(|s| {
                let what = |f: &str| format!("storage {} {f}", s.id);
                Ok(StorageUnit {
                    discharge_min: s.discharge_min.expand(t, &what("discharge_min"))?,
                    discharge_max: s.discharge_max.expand(t, &what("discharge_max"))?,
                    charge_min: s.charge_min.expand(t, &what("charge_min"))?,
                    charge_max: s.charge_max.expand(t, &what("charge_max"))?,
                    id: s.id.clone(),
                    node: s.node.clone(),
                    energy_capacity: s.energy_capacity,
                    initial_level: s.initial_level,
                    efficiency: s.efficiency,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let lines = self
            .lines
            .into_iter()
            .map(|l| TransmissionLine {
                id: l.id,
                flow_limit: l.flow_limit,
                sf_demand: l.sf_demand,
                sf_generators: l.sf_generators,
                sf_renewables: l.sf_renewables,
                sf_storages: l.sf_storages,
            })
            .collect();
        let demands = self
            .demands
            .into_iter()
            .map(|d| {
                Ok(DemandNode {
                    profile: d.profile.expand(t, &format!("demand at node {}", d.node))?,
                    node: d.node,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let system = PowerSystem {
            name: self.name,
            horizon: t,
            period_length: self.period_length,
            generators,
            renewables,
            storages,
            lines,
            demands,
        };
        system.validate()?;
        Ok(system)
    }

    pub fn from_system(system: &PowerSystem) -> Self {
        let p = |v: &Vec<f64>| Profile::from(v.as_slice());
        SystemFile {
            name: system.name.clone(),
            horizon: system.horizon,
            period_length: system.period_length,
            generators: system
                .generators
                .iter()
                .map(|g| GeneratorRecord {
                    id: g.id.clone(),
                    node: g.node.clone(),
                    variable_cost: g.variable_cost,
                    no_load_cost: g.no_load_cost,
                    startup_cost: g.startup_cost,
                    shutdown_cost: g.shutdown_cost,
                    p_min: p(&g.p_min),
                    p_max: p(&g.p_max),
                    ramp_up: p(&g.ramp_up),
                    ramp_down: p(&g.ramp_down),
                    startup_ramp: Some(p(&g.startup_ramp)),
                    shutdown_ramp: Some(p(&g.shutdown_ramp)),
                    min_up: g.min_up,
                    min_down: g.min_down,
                    initial_on: g.initial_on,
                    initial_output: g.initial_output,
                    initial_hours_in_state: g.initial_hours_in_state,
                })
                .collect(),
            renewables: system
                .renewables
                .iter()
                .map(|r| RenewableRecord {
                    id: r.id.clone(),
                    node: r.node.clone(),
                    kind: r.kind.clone(),
                    p_max_profile: p(&r.p_max_profile),
                })
                .collect(),
            storages: system
                .storages
                .iter()
                .map(|s| StorageRecord {
                    id: s.id.clone(),
                    node: s.node.clone(),
                    discharge_min: p(&s.discharge_min),
                    discharge_max: p(&s.discharge_max),
                    charge_min: p(&s.charge_min),
                    charge_max: p(&s.charge_max),
                    energy_capacity: s.energy_capacity,
                    initial_level: s.initial_level,
                    efficiency: s.efficiency,
                })
                .collect(),
            lines: system
                .lines
                .iter()
                .map(|l| LineRecord {
                    id: l.id.clone(),
                    flow_limit: l.flow_limit,
                    sf_demand: l.sf_demand.clone(),
                    sf_generators: l.sf_generators.clone(),
                    sf_renewables: l.sf_renewables.clone(),
                    sf_storages: l.sf_storages.clone(),
                })
                .collect(),
            demands: system
                .demands
                .iter()
                .map(|d| DemandRecord {
                    node: d.node.clone(),
                    profile: p(&d.profile),
                })
                .collect(),
        }
    }
}

pub fn parse_system(text: &str) -> Result<PowerSystem> {
    let file: SystemFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_system()
}

pub fn load_system(path: &Path) -> Result<PowerSystem> {
    parse_system(&read_file(path)?).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn system_to_toml(system: &PowerSystem) -> Result<String> {
    toml::to_string(&SystemFile::from_system(system)).map_err(|e| Error::Internal(e.to_string()))
}

pub fn save_system(system: &PowerSystem, path: &Path) -> Result<()> {
    write_file(path, &system_to_toml(system)?)
}
