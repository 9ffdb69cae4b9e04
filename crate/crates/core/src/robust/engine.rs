//! Master problem assembly and the constraint-generation loop.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::policy::{AffinePolicy, PolicyVars};
use super::reformulate::{add_balance_rows, add_exact_dual, add_extreme_point_rows, add_oa_dual};
use super::rows::{build_robust_rows, screening_bound, RobustRow, RowKind, ScenarioPool};
use crate::backend::{
    make_backend, Backend, BackendKind, Constraint, LazyCallback, MathProgram, Sense, Solution,
    SolveStatus,
};
use crate::error::{Error, Result};
use crate::model::{
    build_commitment_constraints, Commitment, CommitmentSchedule, CommitmentVars, PowerSystem,
};
use crate::uncertainty::{DynamicUncertaintySet, ScenarioPath, SetExtrema, SetOracle};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustOptions {
    pub backend: BackendKind,
    pub mip_gap: f64,
    /// Wall-clock budget for the whole solve, seconds.
    pub time_limit: Option<f64>,
    pub threads: usize,
    /// Relative violation tolerance: a row counts as violated above eps_viol·max(1, |b|).
    pub eps_viol: f64,
    /// Rows with slack above eps_loose_factor × their violation tolerance are parked.
    pub eps_loose_factor: f64,
    pub screening: bool,
    pub loose_strategy: bool,
    /// Outer approximation for cost, ramping and storage rows; otherwise constraint generation.
    pub outer_approximation: bool,
    /// Separation inside one branch-and-bound tree when the backend supports it.
    pub one_tree: bool,
    /// Dualize every row otherwise left to constraint generation over the exact set.
    pub monolithic: bool,
    pub max_iterations: usize,
    /// With false every slope is fixed at zero (static robust dispatch).
    pub adaptive: bool,
}

impl Default for RobustOptions {
    fn default() -> Self {
        Self {
            backend: BackendKind::default(),
            mip_gap: 0.01,
            time_limit: None,
            threads: 1,
            eps_viol: 1e-5,
            eps_loose_factor: 100.0,
            screening: true,
            loose_strategy: true,
            outer_approximation: true,
            one_tree: false,
            monolithic: false,
            max_iterations: 200,
            adaptive: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub master_solves: usize,
    pub lps_solved: usize,
    pub lps_screened: usize,
    pub cuts_added: usize,
    pub rows_parked: usize,
    pub cg_rows: usize,
    pub dual_rows: usize,
    pub master_rows: usize,
    pub master_vars: usize,
    pub wall_time: f64,
    pub max_violation: f64,
    pub balance_by_cg: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UcSolution {
    pub schedule: CommitmentSchedule,
    pub policy: AffinePolicy,
    pub worst_case_cost: f64,
    pub commitment_cost: f64,
    /// Master objective cᵀx + z.
    pub objective: f64,
    pub mip_gap: Option<f64>,
    /// Passed a full separation pass over every generated row.
    pub certified: bool,
    pub stats: SolveStats,
}

impl UcSolution {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(format!("solution serialization: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// How a robust row is enforced in the master.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Route {
    ExtremePoint,
    Balance,
    OuterApproximation,
    ExactDual,
    Generation,
}

fn route(kind: RowKind, degenerate: bool, options: &RobustOptions) -> Route {
    if kind.is_limit() {
        Route::ExtremePoint
    } else if kind.is_balance() {
        if !degenerate {
            Route::Balance
        } else if options.monolithic {
            Route::ExactDual
        } else {
            Route::Generation
        }
    } else if kind.is_intertemporal() && options.outer_approximation {
        Route::OuterApproximation
    } else if options.monolithic {
        Route::ExactDual
    } else {
        Route::Generation
    }
}

/// Result of checking one row at fixed master values.
#[derive(Clone, Debug)]
pub struct RowCheck {
    pub row: usize,
    /// max aᵀp̄ − b (negative when slack).
    pub excess: f64,
    pub tolerance: f64,
    pub screened: bool,
    pub worst: Option<ScenarioPath>,
}

impl RowCheck {
    pub fn violated(&self) -> bool {
        self.excess > self.tolerance
    }
}

/// Screen, then solve the separation LP if the bound is inconclusive.
pub fn check_row(
    row: &RobustRow,
    index: usize,
    values: &[f64],
    oracle: &SetOracle,
    extrema: &SetExtrema,
    screening: bool,
    eps_viol: f64,
) -> Result<RowCheck> {
    let n = oracle.set.num_units();
    let horizon = oracle.set.horizon();
    let w = row.weights(values, n, horizon);
    let b = row.rhs_value(values);
    let tolerance = eps_viol * b.abs().max(1.0);
    if screening {
        let ub = screening_bound(&w, &extrema.unit_min, &extrema.unit_max);
        if ub <= b {
            return Ok(RowCheck {
                row: index,
                excess: ub - b,
                tolerance,
                screened: true,
                worst: None,
            });
        }
    }
    let lm = oracle.maximize(&w)?;
    Ok(RowCheck {
        row: index,
        excess: lm.value - b,
        tolerance,
        screened: false,
        worst: Some(lm.argmax),
    })
}

/// A member of the set to seed every pool: the forecast when it lies inside the bounds.
fn seed_path(oracle: &SetOracle) -> Result<ScenarioPath> {
    let set = &oracle.set;
    let drift = set.replay(&vec![vec![0.0; set.num_factors()]; set.horizon()]);
    let inside = drift.available.iter().zip(&set.p_max).all(|(p, m)| {
        p.iter()
            .zip(m)
            .all(|(x, hi)| *x >= -1e-9 && *x <= hi + 1e-9)
    });
    if inside {
        Ok(set.forecast_path())
    } else {
        let zero = vec![vec![0.0; set.horizon()]; set.num_units()];
        Ok(oracle.maximize(&zero)?.argmax)
    }
}

struct Master {
    program: MathProgram,
    commitment: CommitmentVars,
    policy: PolicyVars,
    rows: Vec<RobustRow>,
    generated: Vec<usize>,
    pools: Vec<ScenarioPool>,
    balance_by_cg: bool,
    dual_rows: usize,
}

impl Master {
    fn add_cut(&mut self, k: usize, path: &ScenarioPath) -> bool {
        if !self.pools[k].insert(path) {
            return false;
        }
        let n = self.pools[k].len();
        let row = &self.rows[k];
        self.program
            .add_constraint(format!("{}@{n}", row.name), row.cut(path), Sense::Le);
        true
    }
}

fn build_master(
    system: &PowerSystem,
    oracle: &SetOracle,
    extrema: &SetExtrema,
    fixed: Option<&CommitmentSchedule>,
    options: &RobustOptions,
) -> Result<Master> {
    let mut program = MathProgram::new();
    let commitment = build_commitment_constraints(system, &mut program);
    if let Some(s) = fixed {
        commitment.fix(&mut program, s);
    }
    let policy = PolicyVars::new(&mut program, system, options.adaptive);
    let mut objective = commitment.cost_expr(system);
    objective.add_term(policy.z, 1.0);
    program.objective = objective;

    let rows = build_robust_rows(system, Commitment::Vars(&commitment), &policy);
    let degenerate = oracle.set.is_degenerate();
    if degenerate && !options.monolithic {
        log::warn!("uncertainty set is not full-dimensional; energy balance handled by constraint generation");
    }
    let mut generated = Vec::new();
    let mut balance_added = false;
    let mut dual_rows = 0;
    for (k, row) in rows.iter().enumerate() {
        match route(row.kind, degenerate, options) {
            Route::ExtremePoint => {
                add_extreme_point_rows(&mut program, row, extrema)?;
            }
            Route::Balance => {
                if !balance_added {
                    add_balance_rows(&mut program, system, &policy);
                    balance_added = true;
                }
            }
            Route::OuterApproximation => {
                add_oa_dual(&mut program, row, extrema)?;
                dual_rows += 1;
            }
            Route::ExactDual => {
                add_exact_dual(&mut program, row, &oracle.poly);
                dual_rows += 1;
            }
            Route::Generation => generated.push(k),
        }
    }
    let pools = vec![ScenarioPool::default(); rows.len()];
    let mut master = Master {
        program,
        commitment,
        policy,
        rows,
        generated,
        pools,
        balance_by_cg: degenerate && !options.monolithic,
        dual_rows,
    };
    let seed = seed_path(oracle)?;
    for k in master.generated.clone() {
        master.add_cut(k, &seed);
    }
    Ok(master)
}

fn check_rows(
    master_rows: &[RobustRow],
    indices: &[usize],
    values: &[f64],
    oracle: &SetOracle,
    extrema: &SetExtrema,
    screening: bool,
    eps_viol: f64,
) -> Result<Vec<RowCheck>> {
    indices
        .par_iter()
        .map(|&k| {
            check_row(
                &master_rows[k],
                k,
                values,
                oracle,
                extrema,
                screening,
                eps_viol,
            )
        })
        .collect()
}

/// Solve the robust UC by constraint generation. With `fixed`, the commitment is pinned
/// and only the policy is optimized.
pub fn solve_robust_uc(
    system: &PowerSystem,
    set: &DynamicUncertaintySet,
    options: &RobustOptions,
) -> Result<UcSolution> {
    solve_with(system, set, None, options)
}

pub fn solve_robust_policy(
    system: &PowerSystem,
    set: &DynamicUncertaintySet,
    schedule: &CommitmentSchedule,
    options: &RobustOptions,
) -> Result<UcSolution> {
    solve_with(system, set, Some(schedule), options)
}

fn check_dimensions(system: &PowerSystem, set: &DynamicUncertaintySet) -> Result<()> {
    system.validate()?;
    set.validate()?;
    if set.num_units() != system.renewables.len() || set.horizon() != system.horizon {
        return Err(Error::Invalid(format!(
            "set is {} units × {} periods, system has {} renewables × {} periods",
            set.num_units(),
            set.horizon(),
            system.renewables.len(),
            system.horizon
        )));
    }
    Ok(())
}

fn solve_with(
    system: &PowerSystem,
    set: &DynamicUncertaintySet,
    fixed: Option<&CommitmentSchedule>,
    options: &RobustOptions,
) -> Result<UcSolution> {
    let started = Instant::now();
    check_dimensions(system, set)?;
    let backend = make_backend(options.backend)?;
    let oracle = SetOracle::new(set)?;
    let extrema = oracle.extrema()?;
    let mut master = build_master(system, &oracle, &extrema, fixed, options)?;
    master.program.attributes.mip_gap = options.mip_gap;
    master.program.attributes.threads = options.threads.max(1);
    let mut stats = SolveStats {
        cg_rows: master.generated.len(),
        dual_rows: master.dual_rows,
        balance_by_cg: master.balance_by_cg,
        ..SolveStats::default()
    };
    let use_tree = options.one_tree
        && backend.capability().supports_lazy_constraints
        && !master.generated.is_empty();

    let mut active: Vec<usize> = master.generated.clone();
    let mut parked: Vec<usize> = Vec::new();
    let mut certified = false;
    let mut last: Option<Solution>;
    loop {
        if let Some(limit) = options.time_limit {
            let left = limit - started.elapsed().as_secs_f64();
            if left <= 0.0 {
                return Err(Error::Limit(
                    "time limit reached before a master solution".into(),
                ));
            }
            master.program.attributes.time_limit = Some(left);
        }
        let sol = if use_tree {
            let mut cb = TreeSeparator {
                master: &master,
                oracle: &oracle,
                extrema: &extrema,
                options,
                found: Vec::new(),
                stats: &mut stats,
            };
            let sol = backend.solve(&master.program, Some(&mut cb))?;
            let found = std::mem::take(&mut cb.found);
            for (k, path) in found {
                if master.add_cut(k, &path) {
                    stats.cuts_added += 1;
                }
            }
            sol
        } else {
            backend.solve(&master.program, None)?
        };
        stats.master_solves += 1;
        stats.iterations += 1;
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => {
                return Err(diagnose_infeasible(system, fixed, backend.as_ref()))
            }
            SolveStatus::Unbounded => {
                return Err(Error::Internal("robust master is unbounded".into()))
            }
            SolveStatus::Limit if sol.has_values() => {
                log::warn!("master stopped at a limit; returning the incumbent uncertified");
                last = Some(sol);
                break;
            }
            SolveStatus::Limit => {
                return Err(Error::Limit(
                    "master solve hit its limit without an incumbent".into(),
                ))
            }
        }
        let values = sol.values.clone();

        // Separation on the active rows, then a full pass before accepting.
        let mut full_pass = use_tree;
        let mut added = 0usize;
        let mut max_violation = 0.0f64;
        loop {
            let targets = if full_pass {
                master.generated.clone()
            } else {
                active.clone()
            };
            let checks = check_rows(
                &master.rows,
                &targets,
                &values,
                &oracle,
                &extrema,
                options.screening,
                options.eps_viol,
            )?;
            let mut still_active = Vec::new();
            let mut violated = 0usize;
            for c in &checks {
                if c.screened {
                    stats.lps_screened += 1;
                } else {
                    stats.lps_solved += 1;
                }
                max_violation = max_violation.max(c.excess.max(0.0));
                if c.violated() {
                    violated += 1;
                    if let Some(p) = &c.worst {
                        if master.add_cut(c.row, p) {
                            added += 1;
                        }
                    }
                    still_active.push(c.row);
                } else if options.loose_strategy
                    && -c.excess > options.eps_loose_factor * c.tolerance
                {
                    parked.push(c.row);
                } else {
                    still_active.push(c.row);
                }
            }
            if full_pass {
                parked.clear();
            } else if options.loose_strategy {
                parked.sort_unstable();
                parked.dedup();
                stats.rows_parked = stats.rows_parked.max(parked.len());
            }
            active = still_active;
            if full_pass {
                active.sort_unstable();
                if violated == 0 {
                    certified = true;
                } else if added == 0 {
                    log::warn!("violated rows reproduce existing cuts; stopping uncertified");
                }
                break;
            }
            if violated > 0 {
                break;
            }
            full_pass = true;
            if parked.is_empty() && !options.loose_strategy {
                // Active set already covered every generated row.
                certified = true;
                break;
            }
        }
        stats.cuts_added += added;
        stats.max_violation = max_violation;
        last = Some(sol);
        if certified || added == 0 {
            break;
        }
        if stats.iterations >= options.max_iterations {
            log::warn!("iteration limit reached; returning the incumbent uncertified");
            break;
        }
        if active.is_empty() {
            active = master.generated.clone();
        }
    }
    let sol = last.ok_or_else(|| Error::Internal("no master solution".into()))?;
    let schedule = master.commitment.extract(&sol.values);
    let policy = master.policy.read(&sol.values);
    let worst_case_cost = sol.values[master.policy.z.0];
    let commitment_cost = schedule.cost(system);
    stats.master_rows = master.program.constraints.len();
    stats.master_vars = master.program.num_vars();
    stats.wall_time = started.elapsed().as_secs_f64();
    Ok(UcSolution {
        schedule,
        policy,
        worst_case_cost,
        commitment_cost,
        objective: sol.objective,
        mip_gap: sol.mip_gap,
        certified: certified && sol.status == SolveStatus::Optimal,
        stats,
    })
}

/// Lazy separation at integer incumbents of the master tree.
struct TreeSeparator<'a> {
    master: &'a Master,
    oracle: &'a SetOracle,
    extrema: &'a SetExtrema,
    options: &'a RobustOptions,
    found: Vec<(usize, ScenarioPath)>,
    stats: &'a mut SolveStats,
}

impl LazyCallback for TreeSeparator<'_> {
    fn separate(&mut self, incumbent: &[f64]) -> Vec<Constraint> {
        let checks = match check_rows(
            &self.master.rows,
            &self.master.generated,
            incumbent,
            self.oracle,
            self.extrema,
            self.options.screening,
            self.options.eps_viol,
        ) {
            Ok(c) => c,
            Err(e) => {
                log::error!("separation failed inside the tree: {e}");
                return Vec::new();
            }
        };
        let mut cuts = Vec::new();
        for c in checks {
            if c.screened {
                self.stats.lps_screened += 1;
            } else {
                self.stats.lps_solved += 1;
            }
            if !c.violated() {
                continue;
            }
            if let Some(p) = c.worst {
                let row = &self.master.rows[c.row];
                cuts.push(Constraint::from_expr(
                    format!("{}@lazy", row.name),
                    row.cut(&p),
                    Sense::Le,
                ));
                self.found.push((c.row, p));
            }
        }
        cuts
    }
}

fn diagnose_infeasible(
    system: &PowerSystem,
    fixed: Option<&CommitmentSchedule>,
    backend: &dyn Backend,
) -> Error {
    let mut program = MathProgram::new();
    let vars = build_commitment_constraints(system, &mut program);
    if let Some(s) = fixed {
        vars.fix(&mut program, s);
    }
    match backend.solve(&program, None) {
        Ok(sol) if sol.status == SolveStatus::Infeasible => {
            Error::Infeasible("commitment constraints admit no schedule".into())
        }
        _ => Error::Infeasible(
            "robust dispatch rows admit no affine policy for any feasible schedule".into(),
        ),
    }
}

/// Outcome of checking a solution against every robust row.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub rows_checked: usize,
    /// Largest max aᵀp̄ − b over all rows.
    pub max_excess: f64,
    pub worst_row: String,
    pub violations: Vec<(String, f64)>,
}

/// Exhaustive separation of every robust row by LP, independent of how the master treated it.
/// A row counts as violated above `tolerance`·max(1, |b|).
pub fn audit_solution(
    system: &PowerSystem,
    set: &DynamicUncertaintySet,
    solution: &UcSolution,
    tolerance: f64,
) -> Result<AuditReport> {
    check_dimensions(system, set)?;
    let oracle = SetOracle::new(set)?;
    let mut program = MathProgram::new();
    let pv = PolicyVars::new(&mut program, system, true);
    let rows = build_robust_rows(system, Commitment::Fixed(&solution.schedule), &pv);
    let values = policy_values(
        &pv,
        &solution.policy,
        solution.worst_case_cost,
        program.num_vars(),
    );
    let extrema = oracle.extrema()?;
    let all: Vec<usize> = (0..rows.len()).collect();
    let checks = check_rows(&rows, &all, &values, &oracle, &extrema, false, tolerance)?;
    let mut report = AuditReport {
        rows_checked: rows.len(),
        max_excess: f64::NEG_INFINITY,
        ..AuditReport::default()
    };
    for c in checks {
        if c.excess > report.max_excess {
            report.max_excess = c.excess;
            report.worst_row = rows[c.row].name.clone();
        }
        if c.violated() {
            report.violations.push((rows[c.row].name.clone(), c.excess));
        }
    }
    Ok(report)
}

/// Master-variable vector holding a given policy and z.
pub fn policy_values(pv: &PolicyVars, policy: &AffinePolicy, z: f64, num_vars: usize) -> Vec<f64> {
    let mut v = vec![0.0; num_vars];
    let mut put = |ids: &[Vec<crate::backend::VarId>], vals: &[Vec<f64>]| {
        for (r, s) in ids.iter().zip(vals) {
            for (id, x) in r.iter().zip(s) {
                v[id.0] = *x;
            }
        }
    };
    put(&pv.gen.intercept, &policy.gen_intercept);
    put(&pv.gen.slope, &policy.gen_slope);
    put(&pv.discharge.intercept, &policy.discharge_intercept);
    put(&pv.discharge.slope, &policy.discharge_slope);
    put(&pv.charge.intercept, &policy.charge_intercept);
    put(&pv.charge.slope, &policy.charge_slope);
    put(&pv.ren_intercept, &policy.ren_intercept);
    for (id, x) in pv.ren_slope.iter().zip(&policy.ren_slope) {
        v[id.0] = *x;
    }
    v[pv.z.0] = z;
    v
}
