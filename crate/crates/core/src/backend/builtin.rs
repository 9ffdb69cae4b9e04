//! Dependency-free backend: the dense simplex for LPs plus a depth-first
//! branch-and-bound for small mixed-binary programs. Lazy rows returned by a
//! callback are added globally and the node is re-solved, which is what makes
//! the one-tree constraint generation loop testable without a commercial solver.

use std::time::Instant;

use super::simplex::{self, DenseLp, LpOutcome};
use super::{
    Backend, BackendCapability, BackendError, Constraint, LazyCallback, MathProgram, Solution,
    SolveStatus, VarKind,
};

const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct BuiltinBackend {
    pub node_limit: usize,
}

impl Default for BuiltinBackend {
    fn default() -> Self {
        Self {
            node_limit: 200_000,
        }
    }
}

fn to_dense(
    program: &MathProgram,
    lazy_rows: &[Constraint],
    lower: &[f64],
    upper: &[f64],
) -> DenseLp<f64> {
    let n = program.num_vars();
    let mut objective = vec![0.0; n];
    for &(v, c) in &program.objective.terms {
        objective[v.0] += c;
    }
    let mut lp = DenseLp::new(objective);
    lp.lower = lower
        .iter()
        .map(|&l| (l > f64::NEG_INFINITY).then_some(l))
        .collect();
    lp.upper = upper
        .iter()
        .map(|&u| (u < f64::INFINITY).then_some(u))
        .collect();
    for c in program.constraints.iter().chain(lazy_rows) {
        lp.add_row(
            c.terms.iter().map(|&(v, a)| (v.0, a)).collect(),
            c.sense,
            c.rhs,
        );
    }
    lp
}

enum NodeResult {
    Optimal {
        values: Vec<f64>,
        objective: f64,
        duals: Vec<f64>,
    },
    Infeasible,
    Unbounded,
    Limit,
}

fn solve_relaxation(
    program: &MathProgram,
    lazy_rows: &[Constraint],
    lower: &[f64],
    upper: &[f64],
) -> NodeResult {
    let lp = to_dense(program, lazy_rows, lower, upper);
    match simplex::solve(&lp) {
        LpOutcome::Optimal(o) => NodeResult::Optimal {
            objective: o.objective + program.objective.constant,
            values: o.x,
            duals: o.duals,
        },
        LpOutcome::Infeasible => NodeResult::Infeasible,
        LpOutcome::Unbounded => NodeResult::Unbounded,
        LpOutcome::IterationLimit => NodeResult::Limit,
    }
}

impl BuiltinBackend {
    fn branch_and_bound(
        &self,
        program: &MathProgram,
        mut lazy: Option<&mut dyn LazyCallback>,
    ) -> Result<Solution, BackendError> {
        let start = Instant::now();
        let gap = program.attributes.mip_gap.max(0.0);
        let binaries: Vec<usize> = program
            .variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| i)
            .collect();
        let base_lower: Vec<f64> = program.variables.iter().map(|v| v.lower).collect();
        let base_upper: Vec<f64> = program.variables.iter().map(|v| v.upper).collect();

        let mut lazy_rows: Vec<Constraint> = Vec::new();
        let mut incumbent: Option<(f64, Vec<f64>)> = None;
        // node = (parent bound, fixings)
        let mut stack: Vec<(f64, Vec<(usize, f64)>)> = vec![(f64::NEG_INFINITY, Vec::new())];
        let mut nodes = 0usize;
        let mut best_open_bound = f64::NEG_INFINITY;
        let mut limited = false;

        let prunable = |bound: f64, inc: &Option<(f64, Vec<f64>)>| -> bool {
            match inc {
                Some((obj, _)) => bound >= obj - gap * obj.abs().max(1.0),
                None => false,
            }
        };

        while let Some((parent_bound, fixings)) = stack.pop() {
            if prunable(parent_bound, &incumbent) {
                continue;
            }
            nodes += 1;
            let out_of_time = program
                .attributes
                .time_limit
                .map(|t| start.elapsed().as_secs_f64() > t)
                .unwrap_or(false);
            if nodes > self.node_limit || out_of_time {
                limited = true;
                best_open_bound = stack
                    .iter()
                    .map(|n| n.0)
                    .chain(std::iter::once(parent_bound))
                    .fold(f64::INFINITY, f64::min);
                break;
            }
            let mut lower = base_lower.clone();
            let mut upper = base_upper.clone();
            for &(j, v) in &fixings {
                lower[j] = v;
                upper[j] = v;
            }
            loop {
                let (values, objective) =
                    match solve_relaxation(program, &lazy_rows, &lower, &upper) {
                        NodeResult::Optimal {
                            values, objective, ..
                        } => (values, objective),
                        NodeResult::Infeasible => break,
                        NodeResult::Unbounded => {
                            if incumbent.is_none() && fixings.is_empty() {
                                return Ok(Solution::status_only(SolveStatus::Unbounded));
                            }
                            break;
                        }
                        NodeResult::Limit => {
                            return Err(BackendError::Backend(
                                "simplex iteration limit in branch-and-bound".into(),
                            ));
                        }
                    };
                if prunable(objective, &incumbent) {
                    break;
                }
                let branch_var = binaries
                    .iter()
                    .map(|&j| (j, (values[j] - values[j].round()).abs()))
                    .filter(|&(_, frac)| frac > INTEGRALITY_TOL)
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(j, _)| j);
                match branch_var {
                    Some(j) => {
                        let mut down = fixings.clone();
                        down.push((j, 0.0));
                        let mut up = fixings.clone();
                        up.push((j, 1.0));
                        // explore the nearer side first
                        if values[j] >= 0.5 {
                            stack.push((objective, down));
                            stack.push((objective, up));
                        } else {
                            stack.push((objective, up));
                            stack.push((objective, down));
                        }
                        break;
                    }
                    None => {
                        let mut candidate = values;
                        for &j in &binaries {
                            candidate[j] = candidate[j].round();
                        }
                        if let Some(cb) = lazy.as_deref_mut() {
                            let cuts = cb.separate(&candidate);
                            if !cuts.is_empty() {
                                lazy_rows.extend(cuts);
                                continue;
                            }
                        }
                        let obj = program.objective_value(&candidate);
                        if incumbent
                            .as_ref()
                            .map(|(best, _)| obj < *best)
                            .unwrap_or(true)
                        {
                            incumbent = Some((obj, candidate));
                        }
                        break;
                    }
                }
            }
        }

        match incumbent {
            Some((objective, values)) => {
                let status = if limited {
                    SolveStatus::Limit
                } else {
                    SolveStatus::Optimal
                };
                let mip_gap = if limited {
                    (objective - best_open_bound).max(0.0) / objective.abs().max(1e-9)
                } else {
                    0.0
                };
                Ok(Solution {
                    status,
                    objective,
                    values,
                    duals: None,
                    mip_gap: Some(mip_gap),
                })
            }
            None if limited => Ok(Solution::status_only(SolveStatus::Limit)),
            None => Ok(Solution::status_only(SolveStatus::Infeasible)),
        }
    }
}

impl Backend for BuiltinBackend {
    fn name(&self) -> &'static str {
        "builtin"
    }

    fn capability(&self) -> BackendCapability {
        BackendCapability {
            supports_lazy_constraints: true,
            supports_dual_values: true,
            supports_mip: true,
        }
    }

    fn solve(
        &self,
        program: &MathProgram,
        lazy: Option<&mut dyn LazyCallback>,
    ) -> Result<Solution, BackendError> {
        program.validate()?;
        if program.is_mip() || lazy.is_some() {
            return self.branch_and_bound(program, lazy);
        }
        let lower: Vec<f64> = program.variables.iter().map(|v| v.lower).collect();
        let upper: Vec<f64> = program.variables.iter().map(|v| v.upper).collect();
        Ok(match solve_relaxation(program, &[], &lower, &upper) {
            NodeResult::Optimal {
                values,
                objective,
                duals,
            } => Solution {
                status: SolveStatus::Optimal,
                objective,
                values,
                duals: Some(duals),
                mip_gap: None,
            },
            NodeResult::Infeasible => Solution::status_only(SolveStatus::Infeasible),
            NodeResult::Unbounded => Solution::status_only(SolveStatus::Unbounded),
            NodeResult::Limit => Solution::status_only(SolveStatus::Limit),
        })
    }
}
