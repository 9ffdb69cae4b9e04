//! Day-ahead deterministic UC with reserve requirements.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backend::{make_backend, BackendKind, LinExpr, MathProgram, Sense, SolveStatus, VarId};
use crate::error::{Error, Result};
use crate::model::{
    add_period_block, build_commitment_constraints, Commitment, DispatchHistory, PeriodContext,
    PeriodVars, PowerSystem,
};
use crate::robust::{AffinePolicy, SolveStats, UcSolution};
use crate::uncertainty::{Matrix, ScenarioPath};

/// Down and up reserve requirements per period, MW.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReserveRequirement {
    pub down: Vec<f64>,
    pub up: Vec<f64>,
}

impl ReserveRequirement {
    pub fn none(horizon: usize) -> Self {
        Self {
            down: vec![0.0; horizon],
            up: vec![0.0; horizon],
        }
    }

    pub fn symmetric(levels: Vec<f64>) -> Self {
        Self {
            down: levels.clone(),
            up: levels,
        }
    }
}

/// R^±_t = Γ · sample std over trajectories of the total net load.
pub fn reserve_rule(
    system: &PowerSystem,
    trajectories: &[ScenarioPath],
    gamma: f64,
) -> Result<ReserveRequirement> {
    if trajectories.len() < 2 {
        return Err(Error::Invalid(
            "the reserve rule needs at least two trajectories".into(),
        ));
    }
    let m = trajectories.len() as f64;
    let levels = (0..system.horizon)
        .map(|t| {
            let net: Vec<f64> = trajectories
                .iter()
                .map(|p| system.total_demand(t) - p.total(t))
                .collect();
            let mean = net.iter().sum::<f64>() / m;
            let var = net.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
            gamma * var.sqrt()
        })
        .collect();
    Ok(ReserveRequirement::symmetric(levels))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetUcOptions {
    pub backend: BackendKind,
    pub mip_gap: f64,
    pub time_limit: Option<f64>,
    pub threads: usize,
}

impl Default for DetUcOptions {
    fn default() -> Self {
        Self {
            backend: BackendKind::default(),
            mip_gap: 0.01,
            time_limit: None,
            threads: 1,
        }
    }
}

/// UC over a single forecast path with reserve rows; the policy is the constant plan.
pub fn solve_deterministic_uc(
    system: &PowerSystem,
    forecast: &Matrix,
    reserves: &ReserveRequirement,
    options: &DetUcOptions,
) -> Result<UcSolution> {
    let started = Instant::now();
    system.validate()?;
    let horizon = system.horizon;
    if forecast.len() != system.renewables.len() || forecast.iter().any(|r| r.len() != horizon) {
        return Err(Error::Invalid(format!(
            "forecast must be {} × {horizon}",
            system.renewables.len()
        )));
    }
    if reserves.up.len() != horizon || reserves.down.len() != horizon {
        return Err(Error::Invalid(format!(
            "reserve requirements must have {horizon} entries"
        )));
    }
    if reserves
        .up
        .iter()
        .chain(&reserves.down)
        .any(|r| !(*r >= 0.0))
    {
        return Err(Error::Invalid(
            "reserve requirements must be nonnegative".into(),
        ));
    }
    let backend = make_backend(options.backend)?;
    let mut program = MathProgram::new();
    program.attributes.mip_gap = options.mip_gap;
    program.attributes.time_limit = options.time_limit;
    program.attributes.threads = options.threads.max(1);
    let commitment = build_commitment_constraints(system, &mut program);
    let x = Commitment::Vars(&commitment);
    let mut objective = commitment.cost_expr(system);
    let dt = system.period_length;
    let empty = DispatchHistory::new();
    let columns: Vec<Vec<f64>> = (0..horizon)
        .map(|t| forecast.iter().map(|r| r[t]).collect())
        .collect();
    let mut periods = Vec::with_capacity(horizon);
    let mut stored: Vec<LinExpr> = system
        .storages
        .iter()
        .map(|u| LinExpr::constant(u.initial_level))
        .collect();
    for t in 0..horizon {
        let up: Vec<VarId> = system
            .generators
            .iter()
            .map(|g| program.add_continuous(format!("r+[{},{t}]", g.id), 0.0, f64::INFINITY))
            .collect();
        let down: Vec<VarId> = system
            .generators
            .iter()
            .map(|g| program.add_continuous(format!("r-[{},{t}]", g.id), 0.0, f64::INFINITY))
            .collect();
        let mut ctx = PeriodContext::from_history(system, &empty, &columns[t]);
        ctx.t = t;
        if let Some(prev) = periods.last() {
            let prev: &PeriodVars = prev;
            ctx.prev_output = prev.gen.iter().map(|&v| LinExpr::var(v)).collect();
            for (s, unit) in system.storages.iter().enumerate() {
                stored[s]
                    .add_term(prev.charge[s], dt * unit.efficiency)
                    .add_term(prev.discharge[s], -dt);
            }
            ctx.stored_before = stored.clone();
        }
        ctx.reserves = Some((&up, &down));
        let vars = add_period_block(&mut program, system, x, &ctx);
        let mut total_up = LinExpr::constant(-reserves.up[t]);
        let mut total_down = LinExpr::constant(-reserves.down[t]);
        for i in 0..system.generators.len() {
            total_up.add_term(up[i], 1.0);
            total_down.add_term(down[i], 1.0);
        }
        program.add_constraint(format!("reserve_up[{t}]"), total_up, Sense::Ge);
        program.add_constraint(format!("reserve_down[{t}]"), total_down, Sense::Ge);
        objective.add_scaled(&vars.cost_expr(system), 1.0);
        periods.push(vars);
    }
    program.objective = objective;
    let sol = backend.solve(&program, None)?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Limit if sol.has_values() => log::warn!("deterministic UC stopped at a limit"),
        SolveStatus::Infeasible => {
            return Err(Error::Infeasible(
                "deterministic UC admits no schedule meeting the forecast and reserve requirements"
                    .into(),
            ))
        }
        SolveStatus::Limit => {
            return Err(Error::Limit(
                "deterministic UC hit its limit without an incumbent".into(),
            ))
        }
        other => {
            return Err(Error::Internal(format!(
                "deterministic UC finished with status {other:?}"
            )))
        }
    }
    let schedule = commitment.extract(&sol.values);
    let plan: Vec<_> = periods.iter().map(|p| p.read(&sol.values)).collect();
    let policy = AffinePolicy::constant(system, &plan);
    let commitment_cost = schedule.cost(system);
    let dispatch_cost = crate::model::dispatch_cost(system, &plan);
    Ok(UcSolution {
        schedule,
        policy,
        worst_case_cost: dispatch_cost,
        commitment_cost,
        objective: sol.objective,
        mip_gap: sol.mip_gap,
        certified: sol.status == SolveStatus::Optimal,
        stats: SolveStats {
            iterations: 1,
            master_solves: 1,
            master_rows: program.constraints.len(),
            master_vars: program.num_vars(),
            wall_time: started.elapsed().as_secs_f64(),
            ..SolveStats::default()
        },
    })
}
