use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A per-period quantity: either one value for every period or a full series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Scalar(f64),
    Series(Vec<f64>),
}

impl Profile {
    pub fn expand(&self, horizon: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            Profile::Scalar(v) => Ok(vec![*v; horizon]),
            Profile::Series(s) if s.len() == horizon => Ok(s.clone()),
            Profile::Series(s) => Err(Error::Invalid(format!(
                "{what}: expected {horizon} periods, found {}",
                s.len()
            ))),
        }
    }
}

impl From<&[f64]> for Profile {
    fn from(s: &[f64]) -> Self {
        match s.first() {
            Some(&first) if s.iter().all(|&v| v == first) => Profile::Scalar(first),
            _ => Profile::Series(s.to_vec()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenewableKind {
    Wind,
    Solar,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub id: String,
    pub node: String,
    /// $/MWh
    pub variable_cost: f64,
    /// $ per period committed
    pub no_load_cost: f64,
    pub startup_cost: f64,
    pub shutdown_cost: f64,
    pub p_min: Vec<f64>,
    pub p_max: Vec<f64>,
    /// MW/h
    pub ramp_up: Vec<f64>,
    pub ramp_down: Vec<f64>,
    pub startup_ramp: Vec<f64>,
    pub shutdown_ramp: Vec<f64>,
    pub min_up: usize,
    pub min_down: usize,
    pub initial_on: bool,
    pub initial_output: f64,
    pub initial_hours_in_state: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenewableUnit {
    pub id: String,
    pub node: String,
    pub kind: RenewableKind,
    pub p_max_profile: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StorageUnit {
    pub id: String,
    pub node: String,
    pub discharge_min: Vec<f64>,
    pub discharge_max: Vec<f64>,
    pub charge_min: Vec<f64>,
    pub charge_max: Vec<f64>,
    /// MWh
    pub energy_capacity: f64,
    pub initial_level: f64,
    pub efficiency: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionLine {
    pub id: String,
    pub flow_limit: f64,
    /// One entry per demand node.
    pub sf_demand: Vec<f64>,
    pub sf_generators: Vec<f64>,
    pub sf_renewables: Vec<f64>,
    pub sf_storages: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemandNode {
    pub node: String,
    pub profile: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerSystem {
    pub name: String,
    pub horizon: usize,
    /// Hours per period.
    pub period_length: f64,
    pub generators: Vec<Generator>,
    pub renewables: Vec<RenewableUnit>,
    pub storages: Vec<StorageUnit>,
    pub lines: Vec<TransmissionLine>,
    pub demands: Vec<DemandNode>,
}

impl PowerSystem {
    pub fn total_demand(&self, t: usize) -> f64 {
        self.demands.iter().map(|d| d.profile[t]).sum()
    }

    /// Σ_j α^d_lj d_jt
    pub fn demand_flow(&self, line: usize, t: usize) -> f64 {
        let l = &self.lines[line];
        self.demands
            .iter()
            .zip(&l.sf_demand)
            .map(|(d, a)| a * d.profile[t])
            .sum()
    }

    pub fn renewable_bounds(&self) -> Vec<Vec<f64>> {
        self.renewables
            .iter()
            .map(|r| r.p_max_profile.clone())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.horizon;
        let bad = |m: String| Err(Error::Invalid(m));
        if t == 0 {
            return bad("horizon must be at least one period".into());
        }
        if !(self.period_length > 0.0) {
            return bad("period_length must be positive".into());
        }
        let len_ok = |v: &[f64]| v.len() == t;
        for g in &self.generators {
            let id = &g.id;
            for (name, v) in [
                ("p_min", &g.p_min),
                ("p_max", &g.p_max),
                ("ramp_up", &g.ramp_up),
                ("ramp_down", &g.ramp_down),
                ("startup_ramp", &g.startup_ramp),
                ("shutdown_ramp", &g.shutdown_ramp),
            ] {
                if !len_ok(v) {
                    return bad(format!(
                        "generator {id}: {name} has {} periods, expected {t}",
                        v.len()
                    ));
                }
                if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return bad(format!(
                        "generator {id}: {name} must be finite and nonnegative"
                    ));
                }
            }
            if g.p_min.iter().zip(&g.p_max).any(|(lo, hi)| lo > hi) {
                return bad(format!("generator {id}: p_min exceeds p_max"));
            }
            if g.min_up < 1 || g.min_down < 1 {
                return bad(format!(
                    "generator {id}: min_up and min_down must be at least 1"
                ));
            }
            if g.initial_on {
                if g.initial_output < 0.0 || g.initial_output > g.p_max[0] + 1e-9 {
                    return bad(format!("generator {id}: initial_output outside [0, p_max]"));
                }
            } else if g.initial_output != 0.0 {
                return bad(format!(
                    "generator {id}: initial_output must be 0 when initially off"
                ));
            }
            if !g.variable_cost.is_finite() {
                return bad(format!("generator {id}: variable_cost must be finite"));
            }
        }
        for r in &self.renewables {
            if !len_ok(&r.p_max_profile) || r.p_max_profile.iter().any(|x| !(*x >= 0.0)) {
                return bad(format!(
                    "renewable {}: p_max_profile must have {t} nonnegative entries",
                    r.id
                ));
            }
        }
        for s in &self.storages {
            let id = &s.id;
            for (name, v) in [
                ("discharge_min", &s.discharge_min),
                ("discharge_max", &s.discharge_max),
                ("charge_min", &s.charge_min),
                ("charge_max", &s.charge_max),
            ] {
                if !len_ok(v) || v.iter().any(|x| !(*x >= 0.0)) {
                    return bad(format!(
                        "storage {id}: {name} must have {t} nonnegative entries"
                    ));
                }
            }
            if s.discharge_min
                .iter()
                .zip(&s.discharge_max)
                .any(|(a, b)| a > b)
                || s.charge_min.iter().zip(&s.charge_max).any(|(a, b)| a > b)
            {
                return bad(format!("storage {id}: lower limit exceeds upper limit"));
            }
            if !(0.0..=s.energy_capacity).contains(&s.initial_level) {
                return bad(format!(
                    "storage {id}: initial_level outside [0, energy_capacity]"
                ));
            }
            if !(s.efficiency > 0.0 && s.efficiency <= 1.0) {
                return bad(format!("storage {id}: efficiency must lie in (0, 1]"));
            }
        }
        for l in &self.lines {
            if !(l.flow_limit > 0.0) {
                return bad(format!("line {}: flow_limit must be positive", l.id));
            }
            for (name, v, n) in [
                ("sf_demand", &l.sf_demand, self.demands.len()),
                ("sf_generators", &l.sf_generators, self.generators.len()),
                ("sf_renewables", &l.sf_renewables, self.renewables.len()),
                ("sf_storages", &l.sf_storages, self.storages.len()),
            ] {
                if v.len() != n {
                    return bad(format!(
                        "line {}: {name} has {} entries, expected {n}",
                        l.id,
                        v.len()
                    ));
                }
            }
        }
        for d in &self.demands {
            if !len_ok(&d.profile) || d.profile.iter().any(|x| !(*x >= 0.0)) {
                return bad(format!(
                    "demand at node {}: profile must have {t} nonnegative entries",
                    d.node
                ));
            }
        }
        Ok(())
    }
}

/// Binary commitment decisions, generator × period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommitmentSchedule {
    pub on: Vec<Vec<bool>>,
    pub start: Vec<Vec<bool>>,
    pub shut: Vec<Vec<bool>>,
}

impl CommitmentSchedule {
    /// Derive start/shut indicators from on/off states.
    pub fn from_on(system: &PowerSystem, on: Vec<Vec<bool>>) -> Self {
        let mut start = Vec::with_capacity(on.len());
        let mut shut = Vec::with_capacity(on.len());
        for (g, row) in system.generators.iter().zip(&on) {
            let mut prev = g.initial_on;
            let (mut s, mut d) = (Vec::new(), Vec::new());
            for &x in row {
                s.push(x && !prev);
                d.push(!x && prev);
                prev = x;
            }
            start.push(s);
            shut.push(d);
        }
        Self { on, start, shut }
    }

    pub fn all_on(system: &PowerSystem) -> Self {
        let on = vec![vec![true; system.horizon]; system.generators.len()];
        Self::from_on(system, on)
    }

    pub fn on_value(&self, i: usize, t: usize) -> f64 {
        f64::from(u8::from(self.on[i][t]))
    }

    /// x^o_{i,t-1}, with the initial state at t = 0.
    pub fn prev_on_value(&self, system: &PowerSystem, i: usize, t: usize) -> f64 {
        if t == 0 {
            f64::from(u8::from(system.generators[i].initial_on))
        } else {
            self.on_value(i, t - 1)
        }
    }

    pub fn start_value(&self, i: usize, t: usize) -> f64 {
        f64::from(u8::from(self.start[i][t]))
    }

    pub fn shut_value(&self, i: usize, t: usize) -> f64 {
        f64::from(u8::from(self.shut[i][t]))
    }

    /// cᵀx: no-load, start-up and shut-down costs.
    pub fn cost(&self, system: &PowerSystem) -> f64 {
        let mut total = 0.0;
        for (i, g) in system.generators.iter().enumerate() {
            for t in 0..system.horizon {
                total += g.no_load_cost * self.on_value(i, t)
                    + g.startup_cost * self.start_value(i, t)
                    + g.shutdown_cost * self.shut_value(i, t);
            }
        }
        total
    }
}
