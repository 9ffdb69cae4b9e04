//! Real-time economic dispatch engines.

use serde::{Deserialize, Serialize};

use crate::backend::{
    make_backend, Backend, BackendKind, LinExpr, MathProgram, Sense, SolveStatus,
};
use crate::error::{Error, Result};
use crate::model::dispatch_set::{ramp_down_limit, ramp_up_limit};
use crate::model::{
    add_period_block, Commitment, CommitmentSchedule, DispatchHistory, PeriodContext,
    PeriodDispatch, PeriodVars, PowerSystem,
};
use crate::robust::AffinePolicy;
use crate::uncertainty::{
    condition_on_history, BudgetMode, DynamicUncertaintySet, Matrix, ScenarioPath,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdKind {
    PolicyGuided,
    PolicyEnforcement,
    Deterministic,
}

impl std::str::FromStr for EdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "policy-guided" => Ok(EdKind::PolicyGuided),
            "policy-enforcement" => Ok(EdKind::PolicyEnforcement),
            "deterministic" => Ok(EdKind::Deterministic),
            other => Err(Error::Parse(format!("unknown dispatch engine `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdOptions {
    /// Look-ahead depth T'.
    pub lookahead: usize,
    /// $/MWh on balance and line slacks.
    pub penalty_price: f64,
    pub backend: BackendKind,
    pub budget_mode: BudgetMode,
    /// When the policy rows leave no feasible dispatch, re-solve without them.
    pub fallback: bool,
    pub storage_matching: StorageMatching,
}

/// What the look-ahead plan's storage must reproduce from the policy under the forecast.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageMatching {
    /// Stored energy at every look-ahead period, with the policy replayed on the realized history.
    #[default]
    Level,
    /// Net η-weighted charge accumulated from t only.
    Increment,
}

impl Default for EdOptions {
    fn default() -> Self {
        Self {
            lookahead: 3,
            penalty_price: 5000.0,
            backend: BackendKind::default(),
            budget_mode: BudgetMode::default(),
            fallback: true,
            storage_matching: StorageMatching::default(),
        }
    }
}

/// What the dispatcher knows entering period `t = history.len()`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DispatchState {
    pub history: DispatchHistory,
    /// Realized availability, unit × (t + 1).
    pub realized: Matrix,
}

impl DispatchState {
    pub fn t(&self) -> usize {
        self.history.len()
    }

    pub fn realized_now(&self) -> Vec<f64> {
        let t = self.t();
        self.realized.iter().map(|r| r[t]).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdOutcome {
    pub t: usize,
    pub dispatch: PeriodDispatch,
    /// Planned dispatch for t+1, …, t+T'.
    pub plan: Vec<PeriodDispatch>,
    /// Σ C^g p^g Δ at period t.
    pub energy_cost: f64,
    /// Sum of balance and line slacks at period t, MW.
    pub penalty_mw: f64,
    pub penalty_cost: f64,
    pub objective: f64,
    /// The policy rows were dropped to reach a feasible dispatch.
    pub fallback: bool,
}

struct EdModel {
    program: MathProgram,
    periods: Vec<PeriodVars>,
}

fn check_state(
    system: &PowerSystem,
    state: &DispatchState,
    forecast: Option<&Matrix>,
) -> Result<()> {
    let t = state.t();
    let n = system.renewables.len();
    if t >= system.horizon {
        return Err(Error::Invalid(format!(
            "period {t} outside horizon {}",
            system.horizon
        )));
    }
    if state.realized.len() != n || state.realized.iter().any(|r| r.len() <= t) {
        return Err(Error::Invalid(format!(
            "realized availability must cover {n} units and {} periods",
            t + 1
        )));
    }
    if forecast.is_some_and(|f| f.len() != n || f.iter().any(|r| r.len() != system.horizon)) {
        return Err(Error::Invalid(format!(
            "forecast must be {n} × {}",
            system.horizon
        )));
    }
    Ok(())
}

/// Ω_t at the realized availability followed by Ω_τ under the forecast for τ ≤ t + depth.
fn build_lookahead(
    system: &PowerSystem,
    schedule: &CommitmentSchedule,
    state: &DispatchState,
    forecast: &[Vec<f64>],
    depth: usize,
    price: f64,
) -> EdModel {
    let t0 = state.t();
    let last = (t0 + depth).min(system.horizon - 1);
    let mut program = MathProgram::new();
    let x = Commitment::Fixed(schedule);
    let dt = system.period_length;
    let now = state.realized_now();
    let mut ctx = PeriodContext::from_history(system, &state.history, &now);
    ctx.penalties = true;
    let first = add_period_block(&mut program, system, x, &ctx);
    let mut periods = vec![first];
    let columns: Vec<Vec<f64>> = (t0 + 1..=last)
        .map(|tau| forecast.iter().map(|r| r[tau]).collect())
        .collect();
    let mut stored: Vec<LinExpr> = ctx.stored_before.clone();
    for (k, tau) in (t0 + 1..=last).enumerate() {
        let prev = periods.last().expect("first period present");
        for (s, unit) in system.storages.iter().enumerate() {
            stored[s]
                .add_term(prev.charge[s], dt * unit.efficiency)
                .add_term(prev.discharge[s], -dt);
        }
        let ctx = PeriodContext {
            t: tau,
            prev_output: prev.gen.iter().map(|&v| LinExpr::var(v)).collect(),
            stored_before: stored.clone(),
            available: &columns[k],
            penalties: true,
            reserves: None,
        };
        let vars = add_period_block(&mut program, system, x, &ctx);
        periods.push(vars);
    }
    let mut objective = LinExpr::new();
    for p in &periods {
        objective.add_scaled(&p.cost_expr(system), 1.0);
        objective.add_scaled(&p.penalty_expr(system, price), 1.0);
    }
    program.objective = objective;
    EdModel { program, periods }
}

/// Range of Σ_j p̄_{j,t+1} over the set conditioned on the realized history, or None at the last period.
pub fn conditioned_total_range(
    set: &DynamicUncertaintySet,
    state: &DispatchState,
    mode: BudgetMode,
) -> Result<Option<(f64, f64)>> {
    let t = state.t();
    if t + 1 >= set.horizon() {
        return Ok(None);
    }
    let observed = ScenarioPath::new(state.realized.iter().map(|r| r[..=t].to_vec()).collect());
    let cond = condition_on_history(set, &observed, t + 1, mode)?;
    Ok(Some(cond.total_range()?))
}

/// Ramping from the implemented dispatch to the policy's output at t+1, at both ends of the range.
fn add_robust_ramping(
    program: &mut MathProgram,
    system: &PowerSystem,
    schedule: &CommitmentSchedule,
    policy: &AffinePolicy,
    period: &PeriodVars,
    range: (f64, f64),
) {
    let t = period.t;
    let x = Commitment::Fixed(schedule);
    let points: &[f64] = if range.0 == range.1 {
        &[range.0][..]
    } else {
        &[range.0, range.1][..]
    };
    for (i, g) in system.generators.iter().enumerate() {
        let up = ramp_up_limit(system, x, i, t + 1).constant;
        let down = ramp_down_limit(system, x, i, t + 1).constant;
        for (k, &total) in points.iter().enumerate() {
            let next = policy.gen_at_total(i, t + 1, total);
            let mut e = LinExpr::var(period.gen[i]);
            e.add_constant(up - next);
            program.add_constraint(format!("robust_ramp_up[{},{k}]", g.id), e, Sense::Ge);
            let mut e = LinExpr::var(period.gen[i]);
            e.add_constant(-next - down);
            program.add_constraint(format!("robust_ramp_down[{},{k}]", g.id), e, Sense::Le);
        }
    }
}

/// Storage of the look-ahead plan follows the policy evaluated on the realized history
/// up to t and on the forecast after.
fn add_storage_matching(
    program: &mut MathProgram,
    system: &PowerSystem,
    policy: &AffinePolicy,
    state: &DispatchState,
    forecast: &[Vec<f64>],
    periods: &[PeriodVars],
    mode: StorageMatching,
) {
    let t0 = state.t();
    let dt = system.period_length;
    let total_at = |tau: usize| -> f64 {
        if tau <= t0 {
            state.realized.iter().map(|r| r[tau]).sum()
        } else {
            forecast.iter().map(|r| r[tau]).sum()
        }
    };
    let net = |s: usize, tau: usize| -> f64 {
        let eta = system.storages[s].efficiency;
        let total = total_at(tau);
        let ch = policy.charge_intercept[s][tau] + policy.charge_slope[s][tau] * total;
        let dis = policy.discharge_intercept[s][tau] + policy.discharge_slope[s][tau] * total;
        eta * ch - dis
    };
    for (s, unit) in system.storages.iter().enumerate() {
        let eta = unit.efficiency;
        // Energy the plan must make up before following the policy's increments.
        let mut target = match mode {
            StorageMatching::Increment => 0.0,
            StorageMatching::Level => {
                let policy_level =
                    unit.initial_level + dt * (0..t0).map(|k| net(s, k)).sum::<f64>();
                (policy_level - state.history.stored(system, s)) / dt
            }
        };
        let mut plan = LinExpr::new();
        for (k, p) in periods.iter().enumerate() {
            target += net(s, p.t);
            plan.add_term(p.charge[s], eta)
                .add_term(p.discharge[s], -1.0);
            if k > 0 {
                let mut e = plan.clone();
                e.add_constant(-target);
                program.add_constraint(format!("storage_match[{},{}]", unit.id, p.t), e, Sense::Eq);
            }
        }
    }
}

fn solve_model(
    backend: &dyn Backend,
    model: &EdModel,
    system: &PowerSystem,
    price: f64,
) -> Result<Option<EdOutcome>> {
    let sol = backend.solve(&model.program, None)?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Ok(None),
        other => {
            return Err(Error::Internal(format!(
                "dispatch LP finished with status {other:?}"
            )))
        }
    }
    let first = &model.periods[0];
    let dispatch = first.read(&sol.values);
    let energy_cost = first.cost_expr(system).evaluate(&sol.values);
    let penalty_mw: f64 = first.penalty_vars().iter().map(|v| sol.values[v.0]).sum();
    Ok(Some(EdOutcome {
        t: first.t,
        dispatch,
        plan: model.periods[1..]
            .iter()
            .map(|p| p.read(&sol.values))
            .collect(),
        energy_cost,
        penalty_mw,
        penalty_cost: price * system.period_length * penalty_mw,
        objective: sol.objective,
        fallback: false,
    }))
}

fn with_fallback(
    backend: &dyn Backend,
    strict: EdModel,
    relaxed: impl FnOnce() -> EdModel,
    system: &PowerSystem,
    options: &EdOptions,
    what: &str,
) -> Result<EdOutcome> {
    if let Some(out) = solve_model(backend, &strict, system, options.penalty_price)? {
        return Ok(out);
    }
    let t = strict.periods[0].t;
    if !options.fallback {
        return Err(Error::Infeasible(format!(
            "{what} at period {t}: robust ramping and storage-matching rows admit no dispatch"
        )));
    }
    log::warn!("{what} at period {t} infeasible with policy rows; dispatching without them");
    let mut out =
        solve_model(backend, &relaxed(), system, options.penalty_price)?.ok_or_else(|| {
            Error::Infeasible(format!(
                "{what} at period {t}: no dispatch even without policy rows"
            ))
        })?;
    out.fallback = true;
    Ok(out)
}

/// Look-ahead dispatch guided by the affine policy: robust ramping into t+1 and storage matching.
pub fn policy_guided_laed(
    system: &PowerSystem,
    schedule: &CommitmentSchedule,
    policy: &AffinePolicy,
    set: &DynamicUncertaintySet,
    state: &DispatchState,
    forecast: &Matrix,
    options: &EdOptions,
) -> Result<EdOutcome> {
    check_state(system, state, Some(forecast))?;
    let backend = make_backend(options.backend)?;
    let build = || {
        build_lookahead(
            system,
            schedule,
            state,
            forecast,
            options.lookahead,
            options.penalty_price,
        )
    };
    let mut model = build();
    if let Some(range) = conditioned_total_range(set, state, options.budget_mode)? {
        add_robust_ramping(
            &mut model.program,
            system,
            schedule,
            policy,
            &model.periods[0],
            range,
        );
    }
    add_storage_matching(
        &mut model.program,
        system,
        policy,
        state,
        forecast,
        &model.periods,
        options.storage_matching,
    );
    with_fallback(
        backend.as_ref(),
        model,
        build,
        system,
        options,
        "policy-guided dispatch",
    )
}

/// Single-period dispatch with robust ramping toward the policy's next output.
pub fn policy_enforcement_ed(
    system: &PowerSystem,
    schedule: &CommitmentSchedule,
    policy: &AffinePolicy,
    set: &DynamicUncertaintySet,
    state: &DispatchState,
    options: &EdOptions,
) -> Result<EdOutcome> {
    check_state(system, state, None)?;
    let backend = make_backend(options.backend)?;
    let build = || build_lookahead(system, schedule, state, &[], 0, options.penalty_price);
    let mut model = build();
    if let Some(range) = conditioned_total_range(set, state, options.budget_mode)? {
        add_robust_ramping(
            &mut model.program,
            system,
            schedule,
            policy,
            &model.periods[0],
            range,
        );
    }
    with_fallback(
        backend.as_ref(),
        model,
        build,
        system,
        options,
        "policy-enforcement dispatch",
    )
}

/// Look-ahead dispatch over the forecast without policy rows.
pub fn deterministic_laed(
    system: &PowerSystem,
    schedule: &CommitmentSchedule,
    state: &DispatchState,
    forecast: &Matrix,
    options: &EdOptions,
) -> Result<EdOutcome> {
    check_state(system, state, Some(forecast))?;
    let backend = make_backend(options.backend)?;
    let model = build_lookahead(
        system,
        schedule,
        state,
        forecast,
        options.lookahead,
        options.penalty_price,
    );
    solve_model(backend.as_ref(), &model, system, options.penalty_price)?.ok_or_else(|| {
        Error::Infeasible(format!(
            "deterministic dispatch at period {} has no solution",
            state.t()
        ))
    })
}
