//! Deterministic per-period dispatch constraints Ω_t and dispatch cost.

use serde::{Deserialize, Serialize};

use super::commitment::CommitmentVars;
use super::types::{CommitmentSchedule, PowerSystem};
use crate::backend::{LinExpr, MathProgram, Sense, VarId};
use crate::error::{Error, Result};

/// Commitment as either fixed data or master-problem variables.
#[derive(Clone, Copy, Debug)]
pub enum Commitment<'a> {
    Fixed(&'a CommitmentSchedule),
    Vars(&'a CommitmentVars),
}

impl Commitment<'_> {
    pub fn on(&self, i: usize, t: usize) -> LinExpr {
        match self {
            Commitment::Fixed(s) => LinExpr::constant(s.on_value(i, t)),
            Commitment::Vars(v) => LinExpr::var(v.on[i][t]),
        }
    }

    pub fn prev_on(&self, system: &PowerSystem, i: usize, t: usize) -> LinExpr {
        match self {
            Commitment::Fixed(s) => LinExpr::constant(s.prev_on_value(system, i, t)),
            Commitment::Vars(v) => v.prev_on(system, i, t),
        }
    }

    pub fn start(&self, i: usize, t: usize) -> LinExpr {
        match self {
            Commitment::Fixed(s) => LinExpr::constant(s.start_value(i, t)),
            Commitment::Vars(v) => LinExpr::var(v.start[i][t]),
        }
    }

    pub fn shut(&self, i: usize, t: usize) -> LinExpr {
        match self {
            Commitment::Fixed(s) => LinExpr::constant(s.shut_value(i, t)),
            Commitment::Vars(v) => LinExpr::var(v.shut[i][t]),
        }
    }
}

/// Upper ramp limit RU·Δ·x^o_{t-1} + SU·Δ·x^+_t.
pub fn ramp_up_limit(system: &PowerSystem, x: Commitment<'_>, i: usize, t: usize) -> LinExpr {
    let g = &system.generators[i];
    let dt = system.period_length;
    let mut e = x.prev_on(system, i, t).scaled(g.ramp_up[t] * dt);
    e.add_scaled(&x.start(i, t), g.startup_ramp[t] * dt);
    e
}

/// Lower ramp limit magnitude RD·Δ·x^o_t + SD·Δ·x^-_t.
pub fn ramp_down_limit(system: &PowerSystem, x: Commitment<'_>, i: usize, t: usize) -> LinExpr {
    let g = &system.generators[i];
    let dt = system.period_length;
    let mut e = x.on(i, t).scaled(g.ramp_down[t] * dt);
    e.add_scaled(&x.shut(i, t), g.shutdown_ramp[t] * dt);
    e
}

/// One period of realized or planned dispatch, MW.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodDispatch {
    pub gen: Vec<f64>,
    pub ren: Vec<f64>,
    pub discharge: Vec<f64>,
    pub charge: Vec<f64>,
}

impl PeriodDispatch {
    pub fn net_injection(&self) -> f64 {
        self.gen.iter().sum::<f64>()
            + self.ren.iter().sum::<f64>()
            + self.discharge.iter().sum::<f64>()
            - self.charge.iter().sum::<f64>()
    }
}

/// Realized dispatch for periods `0..len()`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DispatchHistory {
    pub periods: Vec<PeriodDispatch>,
}

impl DispatchHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn push(&mut self, period: PeriodDispatch) {
        self.periods.push(period);
    }

    /// p^g_{i,t-1}, or the initial output before the horizon.
    pub fn prev_output(&self, system: &PowerSystem, i: usize) -> f64 {
        match self.periods.last() {
            Some(p) => p.gen[i],
            None => system.generators[i].initial_output,
        }
    }

    /// Stored energy of unit `s` after the last realized period.
    pub fn stored(&self, system: &PowerSystem, s: usize) -> f64 {
        let unit = &system.storages[s];
        let dt = system.period_length;
        let mut level = unit.initial_level;
        for p in &self.periods {
            level += dt * (unit.efficiency * p.charge[s] - p.discharge[s]);
        }
        level
    }
}

/// Stored-energy trajectory, storage × period, computed incrementally.
pub fn storage_levels(system: &PowerSystem, periods: &[PeriodDispatch]) -> Vec<Vec<f64>> {
    let dt = system.period_length;
    system
        .storages
        .iter()
        .enumerate()
        .map(|(s, unit)| {
            let mut level = unit.initial_level;
            periods
                .iter()
                .map(|p| {
                    level += dt * (unit.efficiency * p.charge[s] - p.discharge[s]);
                    level
                })
                .collect()
        })
        .collect()
}

/// Flow on line `l` under a period dispatch.
pub fn line_flow(system: &PowerSystem, l: usize, t: usize, d: &PeriodDispatch) -> f64 {
    let line = &system.lines[l];
    let dot = |a: &[f64], x: &[f64]| a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>();
    dot(&line.sf_generators, &d.gen)
        + dot(&line.sf_renewables, &d.ren)
        + line
            .sf_storages
            .iter()
            .enumerate()
            .map(|(s, a)| a * (d.discharge[s] - d.charge[s]))
            .sum::<f64>()
        - system.demand_flow(l, t)
}

/// Σ_{t∈S} Σ_i C^g_i p^g_it Δ
pub fn dispatch_cost(system: &PowerSystem, periods: &[PeriodDispatch]) -> f64 {
    periods
        .iter()
        .map(|p| {
            system
                .generators
                .iter()
                .zip(&p.gen)
                .map(|(g, x)| g.variable_cost * x * system.period_length)
                .sum::<f64>()
        })
        .sum()
}

#[derive(Clone, Debug)]
pub struct PeriodVars {
    pub t: usize,
    pub gen: Vec<VarId>,
    pub ren: Vec<VarId>,
    pub discharge: Vec<VarId>,
    pub charge: Vec<VarId>,
    /// Balance slack: unserved energy.
    pub shortfall: Option<VarId>,
    /// Balance slack: excess energy.
    pub surplus: Option<VarId>,
    pub line_over: Vec<VarId>,
    pub line_under: Vec<VarId>,
}

impl PeriodVars {
    pub fn read(&self, values: &[f64]) -> PeriodDispatch {
        let r = |v: &Vec<VarId>| v.iter().map(|x| values[x.0]).collect();
        PeriodDispatch {
            gen: r(&self.gen),
            ren: r(&self.ren),
            discharge: r(&self.discharge),
            charge: r(&self.charge),
        }
    }

    pub fn penalty_vars(&self) -> Vec<VarId> {
        self.shortfall
            .iter()
            .chain(self.surplus.iter())
            .chain(&self.line_over)
            .chain(&self.line_under)
            .copied()
            .collect()
    }

    /// Σ C^g_i p^g_it Δ
    pub fn cost_expr(&self, system: &PowerSystem) -> LinExpr {
        let mut e = LinExpr::new();
        for (g, &v) in system.generators.iter().zip(&self.gen) {
            e.add_term(v, g.variable_cost * system.period_length);
        }
        e
    }

    /// penalty price × Δ × Σ slacks
    pub fn penalty_expr(&self, system: &PowerSystem, price: f64) -> LinExpr {
        let mut e = LinExpr::new();
        for v in self.penalty_vars() {
            e.add_term(v, price * system.period_length);
        }
        e
    }
}

/// State entering period `t`.
#[derive(Clone, Debug)]
pub struct PeriodContext<'a> {
    pub t: usize,
    /// p^g_{i,t-1}
    pub prev_output: Vec<LinExpr>,
    /// Stored energy at the end of t-1.
    pub stored_before: Vec<LinExpr>,
    /// Available renewable power at t.
    pub available: &'a [f64],
    /// Add slack variables on balance and line rows.
    pub penalties: bool,
    /// Reserve variables (up, down) tightening the output limits.
    pub reserves: Option<(&'a [VarId], &'a [VarId])>,
}

impl<'a> PeriodContext<'a> {
    pub fn from_history(
        system: &PowerSystem,
        history: &DispatchHistory,
        available: &'a [f64],
    ) -> Self {
        Self {
            t: history.len(),
            prev_output: (0..system.generators.len())
                .map(|i| LinExpr::constant(history.prev_output(system, i)))
                .collect(),
            stored_before: (0..system.storages.len())
                .map(|s| LinExpr::constant(history.stored(system, s)))
                .collect(),
            available,
            penalties: false,
            reserves: None,
        }
    }
}

/// Add period-t variables and the rows of Ω_t.
pub fn add_period_block(
    program: &mut MathProgram,
    system: &PowerSystem,
    x: Commitment<'_>,
    ctx: &PeriodContext<'_>,
) -> PeriodVars {
    let t = ctx.t;
    let dt = system.period_length;
    let gen: Vec<VarId> = system
        .generators
        .iter()
        .map(|g| program.add_continuous(format!("p[{},{t}]", g.id), 0.0, f64::INFINITY))
        .collect();
    let ren: Vec<VarId> = system
        .renewables
        .iter()
        .zip(ctx.available)
        .map(|(r, &avail)| program.add_continuous(format!("pr[{},{t}]", r.id), 0.0, avail.max(0.0)))
        .collect();
    let discharge: Vec<VarId> = system
        .storages
        .iter()
        .map(|s| {
            program.add_continuous(
                format!("ps+[{},{t}]", s.id),
                s.discharge_min[t],
                s.discharge_max[t],
            )
        })
        .collect();
    let charge: Vec<VarId> = system
        .storages
        .iter()
        .map(|s| {
            program.add_continuous(
                format!("ps-[{},{t}]", s.id),
                s.charge_min[t],
                s.charge_max[t],
            )
        })
        .collect();

    for (i, g) in system.generators.iter().enumerate() {
        let id = &g.id;
        let mut upper = LinExpr::var(gen[i]);
        upper.add_scaled(&x.on(i, t), -g.p_max[t]);
        let mut lower = LinExpr::var(gen[i]);
        lower.add_scaled(&x.on(i, t), -g.p_min[t]);
        if let Some((up, down)) = ctx.reserves {
            upper.add_term(up[i], 1.0);
            lower.add_term(down[i], -1.0);
        }
        program.add_constraint(format!("pmax[{id},{t}]"), upper, Sense::Le);
        program.add_constraint(format!("pmin[{id},{t}]"), lower, Sense::Ge);

        let mut delta = LinExpr::var(gen[i]);
        delta.add_scaled(&ctx.prev_output[i], -1.0);
        program.add_comparison(
            format!("ramp_up[{id},{t}]"),
            &delta,
            Sense::Le,
            &ramp_up_limit(system, x, i, t),
        );
        let floor = ramp_down_limit(system, x, i, t).scaled(-1.0);
        program.add_comparison(format!("ramp_down[{id},{t}]"), &delta, Sense::Ge, &floor);
    }

    for (s, unit) in system.storages.iter().enumerate() {
        let mut level = ctx.stored_before[s].clone();
        level
            .add_term(charge[s], dt * unit.efficiency)
            .add_term(discharge[s], -dt);
        program.add_constraint(
            format!("soc_min[{},{t}]", unit.id),
            level.clone(),
            Sense::Ge,
        );
        level.add_constant(-unit.energy_capacity);
        program.add_constraint(format!("soc_max[{},{t}]", unit.id), level, Sense::Le);
    }

    let mut line_over = Vec::new();
    let mut line_under = Vec::new();
    for (l, line) in system.lines.iter().enumerate() {
        let mut flow = LinExpr::new();
        for (i, a) in line.sf_generators.iter().enumerate() {
            flow.add_term(gen[i], *a);
        }
        for (j, a) in line.sf_renewables.iter().enumerate() {
            flow.add_term(ren[j], *a);
        }
        for (s, a) in line.sf_storages.iter().enumerate() {
            flow.add_term(discharge[s], *a).add_term(charge[s], -*a);
        }
        flow.add_constant(-system.demand_flow(l, t));
        let mut hi = flow.clone();
        hi.add_constant(-line.flow_limit);
        let mut lo = flow;
        lo.add_constant(line.flow_limit);
        if ctx.penalties {
            let over = program.add_continuous(format!("over[{},{t}]", line.id), 0.0, f64::INFINITY);
            let under =
                program.add_continuous(format!("under[{},{t}]", line.id), 0.0, f64::INFINITY);
            hi.add_term(over, -1.0);
            lo.add_term(under, 1.0);
            line_over.push(over);
            line_under.push(under);
        }
        program.add_constraint(format!("flow_max[{},{t}]", line.id), hi, Sense::Le);
        program.add_constraint(format!("flow_min[{},{t}]", line.id), lo, Sense::Ge);
    }

    let mut balance = LinExpr::new();
    for &v in gen.iter().chain(&ren).chain(&discharge) {
        balance.add_term(v, 1.0);
    }
    for &v in &charge {
        balance.add_term(v, -1.0);
    }
    balance.add_constant(-system.total_demand(t));
    let (mut shortfall, mut surplus) = (None, None);
    if ctx.penalties {
        let short = program.add_continuous(format!("short[{t}]"), 0.0, f64::INFINITY);
        let excess = program.add_continuous(format!("excess[{t}]"), 0.0, f64::INFINITY);
        balance.add_term(short, 1.0).add_term(excess, -1.0);
        shortfall = Some(short);
        surplus = Some(excess);
    }
    program.add_constraint(format!("balance[{t}]"), balance, Sense::Eq);

    PeriodVars {
        t,
        gen,
        ren,
        discharge,
        charge,
        shortfall,
        surplus,
        line_over,
        line_under,
    }
}

/// Ω_t as a stand-alone program with zero objective.
#[derive(Clone, Debug)]
pub struct DispatchBlock {
    pub program: MathProgram,
    pub vars: PeriodVars,
}

pub fn dispatch_feasible_set(
    system: &PowerSystem,
    schedule: &CommitmentSchedule,
    t: usize,
    history: &DispatchHistory,
    available: &[f64],
) -> Result<DispatchBlock> {
    if t >= system.horizon {
        return Err(Error::Invalid(format!(
            "period {t} outside horizon {}",
            system.horizon
        )));
    }
    if history.len() != t {
        return Err(Error::Invalid(format!(
            "dispatch history covers {} periods, period {t} needs {t}",
            history.len()
        )));
    }
    if available.len() != system.renewables.len() {
        return Err(Error::Invalid(
            "availability vector does not match renewable units".into(),
        ));
    }
    let mut program = MathProgram::new();
    let ctx = PeriodContext::from_history(system, history, available);
    let vars = add_period_block(&mut program, system, Commitment::Fixed(schedule), &ctx);
    Ok(DispatchBlock { program, vars })
}

impl DispatchBlock {
    /// Place a candidate dispatch into the block's variable vector.
    pub fn point(&self, d: &PeriodDispatch) -> Vec<f64> {
        let mut x = vec![0.0; self.program.num_vars()];
        for (vars, vals) in [
            (&self.vars.gen, &d.gen),
            (&self.vars.ren, &d.ren),
            (&self.vars.discharge, &d.discharge),
            (&self.vars.charge, &d.charge),
        ] {
            for (v, val) in vars.iter().zip(vals) {
                x[v.0] = *val;
            }
        }
        x
    }

    pub fn is_feasible(&self, d: &PeriodDispatch, tol: f64) -> bool {
        self.program.max_violation(&self.point(d)) <= tol
    }
}
