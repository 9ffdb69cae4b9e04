//! Rolling-horizon operation of a day-ahead solution against simulated availability.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispatch::{
    deterministic_laed, policy_enforcement_ed, policy_guided_laed, DispatchState, EdKind,
    EdOptions, EdOutcome,
};
use crate::error::{Error, Result};
use crate::model::{PeriodDispatch, PowerSystem};
use crate::robust::UcSolution;
use crate::uncertainty::{DynamicUncertaintySet, ScenarioPath, StochasticModel};

/// A period counts toward Penalty Freq when its slack exceeds this many MW.
pub const PENALTY_EPS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub trajectories: usize,
    pub seed: u64,
    pub engine: EdKind,
    pub ed: EdOptions,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            trajectories: 100,
            seed: 0,
            engine: EdKind::PolicyGuided,
            ed: EdOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period: usize,
    pub available: Vec<f64>,
    pub dispatch: PeriodDispatch,
    /// Stored energy per unit at the end of the period, MWh.
    pub stored: Vec<f64>,
    pub energy_cost: f64,
    pub penalty_mw: f64,
    pub penalty_cost: f64,
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub index: usize,
    pub commitment_cost: f64,
    pub records: Vec<PeriodRecord>,
    /// Set when a dispatch failed and the trajectory was abandoned.
    pub failure: Option<String>,
}

impl TrajectoryLog {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn total_cost(&self) -> f64 {
        self.commitment_cost
            + self
                .records
                .iter()
                .map(|r| r.energy_cost + r.penalty_cost)
                .sum::<f64>()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub trajectories: usize,
    pub completed: usize,
    /// Some trajectory failed; metrics cover completed ones only.
    pub partial: bool,
    pub total_costs: Vec<f64>,
    pub cost_avg: f64,
    pub cost_std: f64,
    pub cost_cvar: f64,
    pub penalty_cost_avg: f64,
    pub penalty_freq: f64,
    pub renewables_util: f64,
    pub stored_avg: f64,
    pub fallback_periods: usize,
}

/// Mean of the ⌈αN⌉ largest values.
pub fn cvar(values: &[f64], alpha: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let k = ((alpha * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[..k].iter().sum::<f64>() / k as f64
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Sample standard deviation; zero for fewer than two values.
fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Aggregate metrics over completed trajectories.
pub fn summarize(logs: &[TrajectoryLog]) -> SimulationReport {
    let done: Vec<&TrajectoryLog> = logs.iter().filter(|l| l.completed()).collect();
    let totals: Vec<f64> = done.iter().map(|l| l.total_cost()).collect();
    let penalties: Vec<f64> = done
        .iter()
        .map(|l| l.records.iter().map(|r| r.penalty_cost).sum())
        .collect();
    let records = || done.iter().flat_map(|l| &l.records);
    let pairs = records().count();
    let penalized = records().filter(|r| r.penalty_mw > PENALTY_EPS).count();
    let used: f64 = records().map(|r| r.dispatch.ren.iter().sum::<f64>()).sum();
    let available: f64 = records().map(|r| r.available.iter().sum::<f64>()).sum();
    let stored: Vec<f64> = records().flat_map(|r| r.stored.iter().copied()).collect();
    SimulationReport {
        trajectories: logs.len(),
        completed: done.len(),
        partial: done.len() < logs.len(),
        cost_avg: mean(&totals),
        cost_std: sample_std(&totals),
        cost_cvar: cvar(&totals, 0.1),
        penalty_cost_avg: mean(&penalties),
        penalty_freq: if pairs == 0 {
            0.0
        } else {
            penalized as f64 / pairs as f64
        },
        renewables_util: if available > 0.0 {
            used / available
        } else {
            0.0
        },
        stored_avg: mean(&stored),
        fallback_periods: records().filter(|r| r.fallback).count(),
        total_costs: totals,
    }
}

/// Operate one availability path period by period. The dispatch at t sees columns 0..=t only.
pub fn run_trajectory(
    system: &PowerSystem,
    solution: &UcSolution,
    set: Option<&DynamicUncertaintySet>,
    model: &StochasticModel,
    path: &ScenarioPath,
    index: usize,
    config: &SimulationConfig,
) -> TrajectoryLog {
    let mut log = TrajectoryLog {
        index,
        commitment_cost: solution.schedule.cost(system),
        records: Vec::with_capacity(system.horizon),
        failure: None,
    };
    let mut state = DispatchState::default();
    for t in 0..system.horizon {
        state.realized = path.available.iter().map(|r| r[..=t].to_vec()).collect();
        match dispatch_period(system, solution, set, model, &state, config) {
            Ok(out) => {
                state.history.push(out.dispatch.clone());
                let stored = (0..system.storages.len())
                    .map(|s| state.history.stored(system, s))
                    .collect();
                log.records.push(PeriodRecord {
                    period: t,
                    available: state.realized.iter().map(|r| r[t]).collect(),
                    dispatch: out.dispatch,
                    stored,
                    energy_cost: out.energy_cost,
                    penalty_mw: out.penalty_mw,
                    penalty_cost: out.penalty_cost,
                    fallback: out.fallback,
                });
            }
            Err(e) => {
                log::warn!("trajectory {index} abandoned at period {t}: {e}");
                log.failure = Some(format!("period {t}: {e}"));
                break;
            }
        }
    }
    log
}

fn dispatch_period(
    system: &PowerSystem,
    solution: &UcSolution,
    set: Option<&DynamicUncertaintySet>,
    model: &StochasticModel,
    state: &DispatchState,
    config: &SimulationConfig,
) -> Result<EdOutcome> {
    let need_set = || {
        set.ok_or_else(|| Error::Invalid("policy-based dispatch needs an uncertainty set".into()))
    };
    let forecast =
        || model.conditional_mean(&ScenarioPath::new(state.realized.clone()), state.t() + 1);
    let schedule = &solution.schedule;
    match config.engine {
        EdKind::PolicyGuided => policy_guided_laed(
            system,
            schedule,
            &solution.policy,
            need_set()?,
            state,
            &forecast(),
            &config.ed,
        ),
        EdKind::PolicyEnforcement => policy_enforcement_ed(
            system,
            schedule,
            &solution.policy,
            need_set()?,
            state,
            &config.ed,
        ),
        EdKind::Deterministic => {
            deterministic_laed(system, schedule, state, &forecast(), &config.ed)
        }
    }
}

/// Simulate `config.trajectories` seeded paths in parallel.
pub fn run_simulation(
    system: &PowerSystem,
    solution: &UcSolution,
    set: Option<&DynamicUncertaintySet>,
    model: &StochasticModel,
    config: &SimulationConfig,
) -> Result<(SimulationReport, Vec<TrajectoryLog>)> {
    if config.trajectories == 0 {
        return Err(Error::Invalid("at least one trajectory is required".into()));
    }
    model.validate()?;
    if model.num_units() != system.renewables.len() || model.horizon() != system.horizon {
        return Err(Error::Invalid(
            "stochastic model does not match the system".into(),
        ));
    }
    if config.engine != EdKind::Deterministic && set.is_none() {
        return Err(Error::Invalid(
            "policy-based dispatch needs an uncertainty set".into(),
        ));
    }
    let logs: Vec<TrajectoryLog> = (0..config.trajectories)
        .into_par_iter()
        .map(|i| {
            let path = model.simulate_one(config.seed, i as u64);
            run_trajectory(system, solution, set, model, &path, i, config)
        })
        .collect();
    let report = summarize(&logs);
    if report.completed == 0 {
        return Err(Error::Simulation(format!(
            "every trajectory failed; first failure: {}",
            logs[0].failure.clone().unwrap_or_default()
        )));
    }
    Ok((report, logs))
}

/// Re-run a trajectory with availability after `t` replaced and return the largest
/// difference in dispatch up to and including `t`.
pub fn nonanticipativity_gap(
    system: &PowerSystem,
    solution: &UcSolution,
    set: Option<&DynamicUncertaintySet>,
    model: &StochasticModel,
    path: &ScenarioPath,
    altered: &ScenarioPath,
    t: usize,
    config: &SimulationConfig,
) -> Result<f64> {
    let mut mixed = path.clone();
    mixed.u = None;
    mixed.v = None;
    for (row, alt) in mixed.available.iter_mut().zip(&altered.available) {
        row[t + 1..].copy_from_slice(&alt[t + 1..]);
    }
    let a = run_trajectory(system, solution, set, model, path, 0, config);
    let b = run_trajectory(system, solution, set, model, &mixed, 0, config);
    if a.records.len() <= t || b.records.len() <= t {
        return Err(Error::Simulation(
            "trajectory ended before the audited period".into(),
        ));
    }
    let flat = |d: &PeriodDispatch| -> Vec<f64> {
        d.gen
            .iter()
            .chain(&d.ren)
            .chain(&d.discharge)
            .chain(&d.charge)
            .copied()
            .collect()
    };
    let mut gap = 0.0f64;
    for k in 0..=t {
        let (x, y) = (&a.records[k], &b.records[k]);
        for (p, q) in flat(&x.dispatch).iter().zip(flat(&y.dispatch).iter()) {
            gap = gap.max((p - q).abs());
        }
        gap = gap.max((x.energy_cost - y.energy_cost).abs());
        gap = gap.max((x.penalty_cost - y.penalty_cost).abs());
    }
    Ok(gap)
}

/// Per-period log as CSV with exact float text.
pub fn logs_to_csv(system: &PowerSystem, logs: &[TrajectoryLog]) -> String {
    let mut out = String::from(
        "trajectory,period,commitment_cost,energy_cost,penalty_mw,penalty_cost,renewable_used,renewable_available,fallback",
    );
    for g in &system.generators {
        let _ = write!(out, ",gen_{}", g.id);
    }
    for r in &system.renewables {
        let _ = write!(out, ",avail_{},ren_{}", r.id, r.id);
    }
    for s in &system.storages {
        let _ = write!(out, ",discharge_{0},charge_{0},stored_{0}", s.id);
    }
    out.push('\n');
    for log in logs {
        for r in &log.records {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                log.index,
                r.period,
                log.commitment_cost,
                r.energy_cost,
                r.penalty_mw,
                r.penalty_cost,
                r.dispatch.ren.iter().sum::<f64>(),
                r.available.iter().sum::<f64>(),
                u8::from(r.fallback)
            );
            for x in &r.dispatch.gen {
                let _ = write!(out, ",{x}");
            }
            for (a, x) in r.available.iter().zip(&r.dispatch.ren) {
                let _ = write!(out, ",{a},{x}");
            }
            for s in 0..system.storages.len() {
                let _ = write!(
                    out,
                    ",{},{},{}",
                    r.dispatch.discharge[s], r.dispatch.charge[s], r.stored[s]
                );
            }
            out.push('\n');
        }
    }
    out
}

impl SimulationReport {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(format!("report serialization: {e}")))
    }

    /// Rows in the order Cost Avg, Cost Std, Cost CVaR, Penalty Cost Avg, Penalty Freq, Renewables Util, Stored Avg.
    pub fn table_rows(&self) -> Vec<(&'static str, String)> {
        vec![
            ("Cost Avg ($)", format!("{:.2}", self.cost_avg)),
            ("Cost Std ($)", format!("{:.2}", self.cost_std)),
            ("Cost CVaR ($)", format!("{:.2}", self.cost_cvar)),
            (
                "Penalty Cost Avg ($)",
                format!("{:.2}", self.penalty_cost_avg),
            ),
            ("Penalty Freq", format!("{:.2}%", 100.0 * self.penalty_freq)),
            (
                "Renewables Util",
                format!("{:.2}%", 100.0 * self.renewables_util),
            ),
            ("Stored Avg (MWh)", format!("{:.2}", self.stored_avg)),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cvar_of_one_to_hundred() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(cvar(&v, 0.1), 95.5);
        assert_eq!(cvar(&[3.0], 0.1), 3.0);
    }

    #[test]
    fn sample_std_two_points() {
        assert!((sample_std(&[90.0, 110.0]) - 200f64.sqrt()).abs() < 1e-12);
    }
}
