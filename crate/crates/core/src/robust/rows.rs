//! Robust constraints a(W)ᵀp̄ ≤ b(x, w, z) of the affine model.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::policy::PolicyVars;
use crate::backend::LinExpr;
use crate::model::{
    dispatch_set::ramp_down_limit, dispatch_set::ramp_up_limit, Commitment, PowerSystem,
};
use crate::uncertainty::{Matrix, ScenarioPath, SetExtrema};

/// What a coefficient multiplies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scope {
    /// Σ_j p̄_jt
    Total(usize),
    /// p̄_jt
    Unit(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowKind {
    GenMax(usize, usize),
    GenMin(usize, usize),
    DischargeMax(usize, usize),
    DischargeMin(usize, usize),
    ChargeMax(usize, usize),
    ChargeMin(usize, usize),
    RenewableMax(usize, usize),
    RenewableMin(usize, usize),
    RampUp(usize, usize),
    RampDown(usize, usize),
    EnergyMax(usize, usize),
    EnergyMin(usize, usize),
    FlowMax(usize, usize),
    FlowMin(usize, usize),
    BalanceUp(usize),
    BalanceDown(usize),
    Cost,
}

impl RowKind {
    pub fn is_transmission(self) -> bool {
        matches!(self, RowKind::FlowMax(..) | RowKind::FlowMin(..))
    }

    pub fn is_intertemporal(self) -> bool {
        matches!(
            self,
            RowKind::RampUp(..)
                | RowKind::RampDown(..)
                | RowKind::EnergyMax(..)
                | RowKind::EnergyMin(..)
                | RowKind::Cost
        )
    }

    pub fn is_balance(self) -> bool {
        matches!(self, RowKind::BalanceUp(_) | RowKind::BalanceDown(_))
    }

    /// Rows replaced exactly by evaluation at set extrema.
    pub fn is_limit(self) -> bool {
        !(self.is_transmission() || self.is_intertemporal() || self.is_balance())
    }
}

/// Σ_s coef_s(vars)·value_s(p̄) ≤ rhs(vars).
#[derive(Clone, Debug)]
pub struct RobustRow {
    pub name: String,
    pub kind: RowKind,
    pub terms: Vec<(Scope, LinExpr)>,
    pub rhs: LinExpr,
}

impl RobustRow {
    /// Weights a_jt at fixed master values (unit × period).
    pub fn weights(&self, values: &[f64], units: usize, horizon: usize) -> Matrix {
        let mut w = vec![vec![0.0; horizon]; units];
        for (scope, coef) in &self.terms {
            let c = coef.evaluate(values);
            match *scope {
                Scope::Total(t) => w.iter_mut().for_each(|row| row[t] += c),
                Scope::Unit(j, t) => w[j][t] += c,
            }
        }
        w
    }

    /// Weights as expressions in the master variables (unit × period).
    pub fn weight_exprs(&self, units: usize, horizon: usize) -> Vec<Vec<LinExpr>> {
        let mut w = vec![vec![LinExpr::new(); horizon]; units];
        for (scope, coef) in &self.terms {
            match *scope {
                Scope::Total(t) => w.iter_mut().for_each(|row| {
                    row[t].add_scaled(coef, 1.0);
                }),
                Scope::Unit(j, t) => {
                    w[j][t].add_scaled(coef, 1.0);
                }
            }
        }
        w
    }

    pub fn rhs_value(&self, values: &[f64]) -> f64 {
        self.rhs.evaluate(values)
    }

    /// Left side at one scenario minus the right side; ≤ 0 when satisfied.
    pub fn cut(&self, path: &ScenarioPath) -> LinExpr {
        let mut e = LinExpr::new();
        for (scope, coef) in &self.terms {
            let v = match *scope {
                Scope::Total(t) => path.total(t),
                Scope::Unit(j, t) => path.available[j][t],
            };
            e.add_scaled(coef, v);
        }
        e.add_scaled(&self.rhs, -1.0);
        e.compact()
    }

    /// Periods whose totals the coefficients touch, as a closed span.
    pub fn total_span(&self) -> Option<(usize, usize)> {
        let ts: Vec<usize> = self
            .terms
            .iter()
            .filter_map(|(s, _)| match s {
                Scope::Total(t) => Some(*t),
                Scope::Unit(..) => None,
            })
            .collect();
        Some((*ts.iter().min()?, *ts.iter().max()?))
    }

    /// True when every term scopes a period total.
    pub fn totals_only(&self) -> bool {
        self.terms.iter().all(|(s, _)| matches!(s, Scope::Total(_)))
    }

    /// Coefficient on the total of period `t`.
    pub fn total_coef(&self, t: usize) -> LinExpr {
        let mut e = LinExpr::new();
        for (s, c) in &self.terms {
            if *s == Scope::Total(t) {
                e.add_scaled(c, 1.0);
            }
        }
        e
    }
}

/// Interval screening bound: max of aᵀp̄ over the per-unit boxes.
pub fn screening_bound(weights: &[Vec<f64>], unit_min: &[Vec<f64>], unit_max: &[Vec<f64>]) -> f64 {
    let mut ub = 0.0;
    for (i, row) in weights.iter().enumerate() {
        for (t, &a) in row.iter().enumerate() {
            ub += if a > 0.0 {
                a * unit_max[i][t]
            } else {
                a * unit_min[i][t]
            };
        }
    }
    ub
}

/// Screening bound at fixed master values.
pub fn screen_row(row: &RobustRow, values: &[f64], extrema: &SetExtrema) -> f64 {
    let n = extrema.unit_min.len();
    screening_bound(
        &row.weights(values, n, extrema.horizon()),
        &extrema.unit_min,
        &extrema.unit_max,
    )
}

/// Scenario pool with coordinates rounded to 1e-9 for deduplication.
#[derive(Clone, Debug, Default)]
pub struct ScenarioPool {
    seen: HashSet<Vec<i64>>,
    pub paths: Vec<ScenarioPath>,
}

impl ScenarioPool {
    pub fn insert(&mut self, path: &ScenarioPath) -> bool {
        let key: Vec<i64> = path
            .available
            .iter()
            .flatten()
            .map(|x| (x * 1e9).round() as i64)
            .collect();
        if self.seen.insert(key) {
            self.paths.push(path.clone());
            true
        } else {
            false
        }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Every robust constraint of the affine model.
pub fn build_robust_rows(
    system: &PowerSystem,
    x: Commitment<'_>,
    pv: &PolicyVars,
) -> Vec<RobustRow> {
    let horizon = system.horizon;
    let dt = system.period_length;
    let mut rows = Vec::new();
    let slope = |v: crate::backend::VarId, s: f64| LinExpr::term(v, s);

    for (i, g) in system.generators.iter().enumerate() {
        for t in 0..horizon {
            let w = LinExpr::var(pv.gen.intercept[i][t]);
            let mut rhs = x.on(i, t).scaled(g.p_max[t]);
            rhs.add_scaled(&w, -1.0);
            rows.push(RobustRow {
                name: format!("gen_max[{},{t}]", g.id),
                kind: RowKind::GenMax(i, t),
                terms: vec![(Scope::Total(t), slope(pv.gen.slope[i][t], 1.0))],
                rhs,
            });
            let mut rhs = w.clone();
            rhs.add_scaled(&x.on(i, t), -g.p_min[t]);
            rows.push(RobustRow {
                name: format!("gen_min[{},{t}]", g.id),
                kind: RowKind::GenMin(i, t),
                terms: vec![(Scope::Total(t), slope(pv.gen.slope[i][t], -1.0))],
                rhs,
            });
        }
    }

    for (s, unit) in system.storages.iter().enumerate() {
        for t in 0..horizon {
            for (vars, lo, hi, kmax, kmin, tag) in [
                (
                    &pv.discharge,
                    unit.discharge_min[t],
                    unit.discharge_max[t],
                    RowKind::DischargeMax(s, t),
                    RowKind::DischargeMin(s, t),
                    "discharge",
                ),
                (
                    &pv.charge,
                    unit.charge_min[t],
                    unit.charge_max[t],
                    RowKind::ChargeMax(s, t),
                    RowKind::ChargeMin(s, t),
                    "charge",
                ),
            ] {
                let w = LinExpr::var(vars.intercept[s][t]);
                let mut rhs = LinExpr::constant(hi);
                rhs.add_scaled(&w, -1.0);
                rows.push(RobustRow {
                    name: format!("{tag}_max[{},{t}]", unit.id),
                    kind: kmax,
                    terms: vec![(Scope::Total(t), slope(vars.slope[s][t], 1.0))],
                    rhs,
                });
                let mut rhs = w;
                rhs.add_constant(-lo);
                rows.push(RobustRow {
                    name: format!("{tag}_min[{},{t}]", unit.id),
                    kind: kmin,
                    terms: vec![(Scope::Total(t), slope(vars.slope[s][t], -1.0))],
                    rhs,
                });
            }
        }
    }

    for (j, r) in system.renewables.iter().enumerate() {
        for t in 0..horizon {
            let w = LinExpr::var(pv.ren_intercept[j][t]);
            let mut coef = slope(pv.ren_slope[t], 1.0);
            coef.add_constant(-1.0);
            rows.push(RobustRow {
                name: format!("ren_max[{},{t}]", r.id),
                kind: RowKind::RenewableMax(j, t),
                terms: vec![(Scope::Unit(j, t), coef)],
                rhs: w.scaled(-1.0),
            });
            rows.push(RobustRow {
                name: format!("ren_min[{},{t}]", r.id),
                kind: RowKind::RenewableMin(j, t),
                terms: vec![(Scope::Unit(j, t), slope(pv.ren_slope[t], -1.0))],
                rhs: w,
            });
        }
    }

    for (i, g) in system.generators.iter().enumerate() {
        for t in 0..horizon {
            // p_t − p_{t−1} = (w_t − w_{t−1}) + W_t P_t − W_{t−1} P_{t−1}
            let mut delta_w = LinExpr::var(pv.gen.intercept[i][t]);
            let mut up_terms = vec![(Scope::Total(t), slope(pv.gen.slope[i][t], 1.0))];
            let mut down_terms = vec![(Scope::Total(t), slope(pv.gen.slope[i][t], -1.0))];
            if t == 0 {
                delta_w.add_constant(-g.initial_output);
            } else {
                delta_w.add_term(pv.gen.intercept[i][t - 1], -1.0);
                up_terms.push((Scope::Total(t - 1), slope(pv.gen.slope[i][t - 1], -1.0)));
                down_terms.push((Scope::Total(t - 1), slope(pv.gen.slope[i][t - 1], 1.0)));
            }
            let mut rhs = ramp_up_limit(system, x, i, t);
            rhs.add_scaled(&delta_w, -1.0);
            rows.push(RobustRow {
                name: format!("ramp_up[{},{t}]", g.id),
                kind: RowKind::RampUp(i, t),
                terms: up_terms,
                rhs,
            });
            let mut rhs = ramp_down_limit(system, x, i, t);
            rhs.add_scaled(&delta_w, 1.0);
            rows.push(RobustRow {
                name: format!("ramp_down[{},{t}]", g.id),
                kind: RowKind::RampDown(i, t),
                terms: down_terms,
                rhs,
            });
        }
    }

    for (s, unit) in system.storages.iter().enumerate() {
        let eta = unit.efficiency;
        for t in 0..horizon {
            // level_t = q0 + Σ_{τ≤t} Δ(η p^-_τ − p^+_τ)
            let mut fixed = LinExpr::constant(unit.initial_level);
            let mut terms_up = Vec::new();
            let mut terms_down = Vec::new();
            for tau in 0..=t {
                fixed
                    .add_term(pv.charge.intercept[s][tau], dt * eta)
                    .add_term(pv.discharge.intercept[s][tau], -dt);
                let mut a = LinExpr::new();
                a.add_term(pv.charge.slope[s][tau], dt * eta)
                    .add_term(pv.discharge.slope[s][tau], -dt);
                terms_down.push((Scope::Total(tau), a.scaled(-1.0)));
                terms_up.push((Scope::Total(tau), a));
            }
            let mut rhs = LinExpr::constant(unit.energy_capacity);
            rhs.add_scaled(&fixed, -1.0);
            rows.push(RobustRow {
                name: format!("energy_max[{},{t}]", unit.id),
                kind: RowKind::EnergyMax(s, t),
                terms: terms_up,
                rhs,
            });
            rows.push(RobustRow {
                name: format!("energy_min[{},{t}]", unit.id),
                kind: RowKind::EnergyMin(s, t),
                terms: terms_down,
                rhs: fixed,
            });
        }
    }

    for (l, line) in system.lines.iter().enumerate() {
        for t in 0..horizon {
            let mut total_coef = LinExpr::new();
            let mut fixed = LinExpr::constant(-system.demand_flow(l, t));
            for (i, a) in line.sf_generators.iter().enumerate() {
                total_coef.add_term(pv.gen.slope[i][t], *a);
                fixed.add_term(pv.gen.intercept[i][t], *a);
            }
            for (s, a) in line.sf_storages.iter().enumerate() {
                total_coef
                    .add_term(pv.discharge.slope[s][t], *a)
                    .add_term(pv.charge.slope[s][t], -*a);
                fixed
                    .add_term(pv.discharge.intercept[s][t], *a)
                    .add_term(pv.charge.intercept[s][t], -*a);
            }
            let mut terms = vec![(Scope::Total(t), total_coef)];
            for (j, a) in line.sf_renewables.iter().enumerate() {
                fixed.add_term(pv.ren_intercept[j][t], *a);
                if *a != 0.0 {
                    terms.push((Scope::Unit(j, t), slope(pv.ren_slope[t], *a)));
                }
            }
            let neg: Vec<(Scope, LinExpr)> =
                terms.iter().map(|(s, c)| (*s, c.scaled(-1.0))).collect();
            let mut rhs = LinExpr::constant(line.flow_limit);
            rhs.add_scaled(&fixed, -1.0);
            rows.push(RobustRow {
                name: format!("flow_max[{},{t}]", line.id),
                kind: RowKind::FlowMax(l, t),
                terms,
                rhs,
            });
            let mut rhs = LinExpr::constant(line.flow_limit);
            rhs.add_scaled(&fixed, 1.0);
            rows.push(RobustRow {
                name: format!("flow_min[{},{t}]", line.id),
                kind: RowKind::FlowMin(l, t),
                terms: neg,
                rhs,
            });
        }
    }

    for t in 0..horizon {
        // supply − demand = fixed + slope·P_t + W^r_t·P_t
        let mut fixed = LinExpr::constant(-system.total_demand(t));
        for row in &pv.gen.intercept {
            fixed.add_term(row[t], 1.0);
        }
        for row in &pv.ren_intercept {
            fixed.add_term(row[t], 1.0);
        }
        for (d, c) in pv.discharge.intercept.iter().zip(&pv.charge.intercept) {
            fixed.add_term(d[t], 1.0).add_term(c[t], -1.0);
        }
        let mut coef = pv.net_slope(t);
        coef.add_term(pv.ren_slope[t], 1.0);
        rows.push(RobustRow {
            name: format!("balance_up[{t}]"),
            kind: RowKind::BalanceUp(t),
            terms: vec![(Scope::Total(t), coef.clone())],
            rhs: fixed.scaled(-1.0),
        });
        rows.push(RobustRow {
            name: format!("balance_down[{t}]"),
            kind: RowKind::BalanceDown(t),
            terms: vec![(Scope::Total(t), coef.scaled(-1.0))],
            rhs: fixed,
        });
    }

    let mut cost_terms = Vec::new();
    let mut rhs = LinExpr::var(pv.z);
    for t in 0..horizon {
        let mut a = LinExpr::new();
        for (i, g) in system.generators.iter().enumerate() {
            let c = g.variable_cost * dt;
            a.add_term(pv.gen.slope[i][t], c);
            rhs.add_term(pv.gen.intercept[i][t], -c);
        }
        cost_terms.push((Scope::Total(t), a));
    }
    rows.push(RobustRow {
        name: "cost".into(),
        kind: RowKind::Cost,
        terms: cost_terms,
        rhs,
    });
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn screening_examples() {
        assert_eq!(
            screening_bound(&[vec![0.0]], &[vec![3.0]], &[vec![5.0]]),
            0.0
        );
        assert_eq!(
            screening_bound(&[vec![2.0]], &[vec![3.0]], &[vec![5.0]]),
            10.0
        );
        assert_eq!(
            screening_bound(&[vec![-2.0]], &[vec![3.0]], &[vec![5.0]]),
            -6.0
        );
    }

    #[test]
    fn pool_deduplicates_near_copies() {
        let mut pool = ScenarioPool::default();
        assert!(pool.insert(&ScenarioPath::new(vec![vec![1.0, 2.0]])));
        assert!(!pool.insert(&ScenarioPath::new(vec![vec![1.0 + 1e-12, 2.0]])));
        assert!(pool.insert(&ScenarioPath::new(vec![vec![1.0 + 1e-6, 2.0]])));
        assert_eq!(pool.len(), 2);
    }
}
