//! The commitment set X: state transition, start/shut exclusivity and
//! turn-on/turn-off window inequalities for minimum up and down times.

use super::types::{CommitmentSchedule, PowerSystem};
use crate::backend::{LinExpr, MathProgram, Sense, VarId};

#[derive(Clone, Debug)]
pub struct CommitmentVars {
    pub on: Vec<Vec<VarId>>,
    pub start: Vec<Vec<VarId>>,
    pub shut: Vec<Vec<VarId>>,
}

impl CommitmentVars {
    /// x^o_{i,t-1} as an expression; the initial state at t = 0.
    pub fn prev_on(&self, system: &PowerSystem, i: usize, t: usize) -> LinExpr {
        if t == 0 {
            LinExpr::constant(f64::from(u8::from(system.generators[i].initial_on)))
        } else {
            LinExpr::var(self.on[i][t - 1])
        }
    }

    /// cᵀx
    pub fn cost_expr(&self, system: &PowerSystem) -> LinExpr {
        let mut e = LinExpr::new();
        for (i, g) in system.generators.iter().enumerate() {
            for t in 0..system.horizon {
                e.add_term(self.on[i][t], g.no_load_cost);
                e.add_term(self.start[i][t], g.startup_cost);
                e.add_term(self.shut[i][t], g.shutdown_cost);
            }
        }
        e
    }

    pub fn extract(&self, values: &[f64]) -> CommitmentSchedule {
        let read = |vars: &Vec<Vec<VarId>>| -> Vec<Vec<bool>> {
            vars.iter()
                .map(|row| row.iter().map(|v| values[v.0] > 0.5).collect())
                .collect()
        };
        CommitmentSchedule {
            on: read(&self.on),
            start: read(&self.start),
            shut: read(&self.shut),
        }
    }

    /// Pin every commitment variable to a given schedule.
    pub fn fix(&self, program: &mut MathProgram, schedule: &CommitmentSchedule) {
        for (vars, vals) in [
            (&self.on, &schedule.on),
            (&self.start, &schedule.start),
            (&self.shut, &schedule.shut),
        ] {
            for (row, vrow) in vars.iter().zip(vals) {
                for (v, &b) in row.iter().zip(vrow) {
                    let x = f64::from(u8::from(b));
                    program.variables[v.0].lower = x;
                    program.variables[v.0].upper = x;
                }
            }
        }
    }
}

/// Periods at the start of the horizon whose state is forced by the initial
/// run length: `(forced_on, forced_off)` counts.
pub fn initial_forcing(system: &PowerSystem, i: usize) -> (usize, usize) {
    let g = &system.generators[i];
    let t = system.horizon;
    if g.initial_on {
        (g.min_up.saturating_sub(g.initial_hours_in_state).min(t), 0)
    } else {
        (
            0,
            g.min_down.saturating_sub(g.initial_hours_in_state).min(t),
        )
    }
}

pub fn build_commitment_constraints(
    system: &PowerSystem,
    program: &mut MathProgram,
) -> CommitmentVars {
    let n = system.generators.len();
    let horizon = system.horizon;
    let mut vars = CommitmentVars {
        on: Vec::with_capacity(n),
        start: Vec::with_capacity(n),
        shut: Vec::with_capacity(n),
    };
    for g in &system.generators {
        vars.on.push(
            (0..horizon)
                .map(|t| program.add_binary(format!("on[{},{t}]", g.id)))
                .collect(),
        );
        vars.start.push(
            (0..horizon)
                .map(|t| program.add_binary(format!("su[{},{t}]", g.id)))
                .collect(),
        );
        vars.shut.push(
            (0..horizon)
                .map(|t| program.add_binary(format!("sd[{},{t}]", g.id)))
                .collect(),
        );
    }
    for (i, g) in system.generators.iter().enumerate() {
        let id = &g.id;
        for t in 0..horizon {
            let mut e = LinExpr::var(vars.start[i][t]);
            e.add_term(vars.shut[i][t], -1.0)
                .add_term(vars.on[i][t], -1.0);
            e.add_scaled(&vars.prev_on(system, i, t), 1.0);
            program.add_constraint(format!("transition[{id},{t}]"), e, Sense::Eq);

            let mut e = LinExpr::var(vars.start[i][t]);
            e.add_term(vars.shut[i][t], 1.0).add_constant(-1.0);
            program.add_constraint(format!("su_sd[{id},{t}]"), e, Sense::Le);

            if g.min_up > 1 {
                let mut e = LinExpr::new();
                for tau in (t + 1).saturating_sub(g.min_up)..=t {
                    e.add_term(vars.start[i][tau], 1.0);
                }
                e.add_term(vars.on[i][t], -1.0);
                program.add_constraint(format!("min_up[{id},{t}]"), e, Sense::Le);
            }
            if g.min_down > 1 {
                let mut e = LinExpr::new();
                for tau in (t + 1).saturating_sub(g.min_down)..=t {
                    e.add_term(vars.shut[i][tau], 1.0);
                }
                e.add_term(vars.on[i][t], 1.0).add_constant(-1.0);
                program.add_constraint(format!("min_down[{id},{t}]"), e, Sense::Le);
            }
        }
        let (forced_on, forced_off) = initial_forcing(system, i);
        for t in 0..forced_on {
            let mut e = LinExpr::var(vars.on[i][t]);
            e.add_constant(-1.0);
            program.add_constraint(format!("init_on[{id},{t}]"), e, Sense::Eq);
        }
        for t in 0..forced_off {
            program.add_constraint(
                format!("init_off[{id},{t}]"),
                LinExpr::var(vars.on[i][t]),
                Sense::Eq,
            );
        }
    }
    vars
}
