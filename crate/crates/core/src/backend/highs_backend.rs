use std::ffi::CString;

use highs::{HighsModelStatus, RowProblem, Sense as HighsSense};

use super::{
    Backend, BackendCapability, BackendError, LazyCallback, MathProgram, Sense, Solution,
    SolveStatus, VarKind,
};

/// HiGHS through its C interface. LP and MILP; no lazy-constraint callbacks.
#[derive(Clone, Debug)]
pub struct HighsBackend {
    pub presolve: bool,
}

impl Default for HighsBackend {
    fn default() -> Self {
        Self { presolve: true }
    }
}

impl HighsBackend {
    pub fn new() -> Self {
        Self::default()
    }

    fn run(&self, program: &MathProgram, presolve: bool) -> Result<Solution, BackendError> {
        let mut problem = RowProblem::default();
        let mut cols = Vec::with_capacity(program.num_vars());
        let mut cost = vec![0.0; program.num_vars()];
        for &(v, c) in &program.objective.terms {
            cost[v.0] += c;
        }
        for (j, v) in program.variables.iter().enumerate() {
            let col = match v.kind {
                VarKind::Continuous => problem.add_column(cost[j], v.lower..=v.upper),
                VarKind::Binary => problem.add_integer_column(cost[j], v.lower..=v.upper),
            };
            cols.push(col);
        }
        for c in &program.constraints {
            let mut merged: Vec<(usize, f64)> = c.terms.iter().map(|&(v, a)| (v.0, a)).collect();
            merged.sort_unstable_by_key(|&(v, _)| v);
            merged.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
            // HiGHS rejects repeated or tiny entries within a row.
            let terms: Vec<_> = merged
                .into_iter()
                .filter(|&(_, a)| a.abs() > 1e-12)
                .map(|(v, a)| (cols[v], a))
                .collect();
            match c.sense {
                Sense::Le => problem.add_row(..=c.rhs, terms),
                Sense::Ge => problem.add_row(c.rhs.., terms),
                Sense::Eq => problem.add_row(c.rhs..=c.rhs, terms),
            }
        }
        let mut model = problem
            .try_optimise(HighsSense::Minimise)
            .map_err(|e| BackendError::Backend(format!("HiGHS rejected the model: {e:?}")))?;
        model.make_quiet();
        model.set_option("mip_rel_gap", program.attributes.mip_gap.max(0.0));
        model.set_option("threads", program.attributes.threads.max(1) as i32);
        model.set_option("random_seed", 0);
        if let Some(limit) = program.attributes.time_limit {
            model.set_option("time_limit", limit);
        }
        if !presolve {
            model.set_option("presolve", "off");
        }
        let solved = model
            .try_solve()
            .map_err(|e| BackendError::Backend(format!("HiGHS run failed: {e:?}")))?;
        let status = solved.status();
        let offset = program.objective.constant;
        let is_mip = program.is_mip();
        let has_primal = primal_feasible(&solved);
        let collect = |status: SolveStatus| {
            let sol = solved.get_solution();
            Solution {
                status,
                objective: solved.objective_value() + offset,
                values: sol.columns().to_vec(),
                duals: (!is_mip).then(|| sol.dual_rows().to_vec()),
                mip_gap: is_mip.then(|| solved.mip_gap()),
            }
        };
        Ok(match status {
            HighsModelStatus::Optimal => collect(SolveStatus::Optimal),
            HighsModelStatus::ModelEmpty => Solution {
                status: SolveStatus::Optimal,
                objective: offset,
                values: Vec::new(),
                duals: (!is_mip).then(|| vec![0.0; program.constraints.len()]),
                mip_gap: is_mip.then_some(0.0),
            },
            HighsModelStatus::Infeasible => Solution::status_only(SolveStatus::Infeasible),
            HighsModelStatus::Unbounded => Solution::status_only(SolveStatus::Unbounded),
            HighsModelStatus::UnboundedOrInfeasible => {
                if presolve {
                    return self.run(program, false);
                }
                Solution::status_only(SolveStatus::Infeasible)
            }
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ObjectiveBound
            | HighsModelStatus::ObjectiveTarget => {
                if has_primal {
                    collect(SolveStatus::Limit)
                } else {
                    Solution::status_only(SolveStatus::Limit)
                }
            }
            other => {
                return Err(BackendError::Backend(format!(
                    "HiGHS finished with status {other:?}"
                )))
            }
        })
    }
}

fn primal_feasible(solved: &highs::SolvedModel) -> bool {
    let name = CString::new("primal_solution_status").expect("static name");
    let mut value: highs_sys::HighsInt = 0;
    let status =
        unsafe { highs_sys::Highs_getIntInfoValue(solved.as_ptr(), name.as_ptr(), &mut value) };
    status == 0 && value == 2
}

impl Backend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn capability(&self) -> BackendCapability {
        BackendCapability {
            supports_lazy_constraints: false,
            supports_dual_values: true,
            supports_mip: true,
        }
    }

    fn solve(
        &self,
        program: &MathProgram,
        lazy: Option<&mut dyn LazyCallback>,
    ) -> Result<Solution, BackendError> {
        if lazy.is_some() {
            return Err(BackendError::CapabilityMismatch(
                "the HiGHS backend cannot run lazy-constraint callbacks".into(),
            ));
        }
        program.validate()?;
        self.run(program, self.presolve)
    }
}
