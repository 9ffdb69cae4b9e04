//! Deterministic counterparts of robust rows.

use super::policy::PolicyVars;
use super::rows::{RobustRow, Scope};
use crate::backend::{LinExpr, MathProgram, Sense, VarId};
use crate::error::{Error, Result};
use crate::model::PowerSystem;
use crate::uncertainty::{SetExtrema, SetPolyhedron};

/// Single-scope row enforced at both extremes of its scope's range.
/// Exact because the left side is affine in one scalar.
pub fn add_extreme_point_rows(
    program: &mut MathProgram,
    row: &RobustRow,
    extrema: &SetExtrema,
) -> Result<usize> {
    let (scope, coef) = match row.terms.as_slice() {
        [(s, c)] => (*s, c),
        _ => {
            return Err(Error::Internal(format!(
                "{}: extreme-point reformulation needs exactly one scope",
                row.name
            )))
        }
    };
    let (lo, hi) = match scope {
        Scope::Total(t) => (extrema.total_min[t], extrema.total_max[t]),
        Scope::Unit(j, t) => (extrema.unit_min[j][t], extrema.unit_max[j][t]),
    };
    let points: &[f64] = if lo == hi { &[lo][..] } else { &[lo, hi][..] };
    for (k, &p) in points.iter().enumerate() {
        let mut e = coef.scaled(p);
        e.add_scaled(&row.rhs, -1.0);
        program.add_constraint(format!("{}#{k}", row.name), e, Sense::Le);
    }
    Ok(points.len())
}

/// Σ w = D_t and Σ W^g + W^r_t + Σ (W^+ − W^-) = 0 for every period.
pub fn add_balance_rows(program: &mut MathProgram, system: &PowerSystem, pv: &PolicyVars) {
    for t in 0..system.horizon {
        let mut fixed = LinExpr::constant(-system.total_demand(t));
        for row in pv.gen.intercept.iter().chain(&pv.ren_intercept) {
            fixed.add_term(row[t], 1.0);
        }
        for (d, c) in pv.discharge.intercept.iter().zip(&pv.charge.intercept) {
            fixed.add_term(d[t], 1.0).add_term(c[t], -1.0);
        }
        program.add_constraint(format!("balance_w[{t}]"), fixed, Sense::Eq);
        let mut slope = pv.net_slope(t);
        slope.add_term(pv.ren_slope[t], 1.0);
        program.add_constraint(format!("balance_W[{t}]"), slope, Sense::Eq);
    }
}

/// Multipliers of the outer-approximation dual.
#[derive(Clone, Debug)]
pub struct OaDual {
    pub span: (usize, usize),
    pub pi_max: Vec<VarId>,
    pub pi_min: Vec<VarId>,
    /// Indexed by t − t1 − 1 for t in (t1, t2].
    pub phi_max: Vec<VarId>,
    pub phi_min: Vec<VarId>,
}

/// Dual of max Σ a_t P_t over the box-and-ramp outer approximation on the row's span:
/// Σ(P̄ π̄ − P̲ π̲) + Σ(Δ̄ φ̄ − Δ̲ φ̲) ≤ b and π̄_t − π̲_t + φ̄_t − φ̲_t − φ̄_{t+1} + φ̲_{t+1} = a_t.
pub fn add_oa_dual(
    program: &mut MathProgram,
    row: &RobustRow,
    extrema: &SetExtrema,
) -> Result<OaDual> {
    if !row.totals_only() {
        return Err(Error::Internal(format!(
            "{}: outer approximation needs total-only scopes",
            row.name
        )));
    }
    let Some((t1, t2)) = row.total_span() else {
        let e = row.rhs.scaled(-1.0);
        program.add_constraint(format!("{}#const", row.name), e, Sense::Le);
        return Ok(OaDual {
            span: (0, 0),
            pi_max: Vec::new(),
            pi_min: Vec::new(),
            phi_max: Vec::new(),
            phi_min: Vec::new(),
        });
    };
    if t1 > t2 {
        return Err(Error::Invalid(format!("{}: empty span", row.name)));
    }
    let name = &row.name;
    let inf = f64::INFINITY;
    let pi_max: Vec<VarId> = (t1..=t2)
        .map(|t| program.add_continuous(format!("{name}.pi+[{t}]"), 0.0, inf))
        .collect();
    let pi_min: Vec<VarId> = (t1..=t2)
        .map(|t| program.add_continuous(format!("{name}.pi-[{t}]"), 0.0, inf))
        .collect();
    let phi_max: Vec<VarId> = (t1 + 1..=t2)
        .map(|t| program.add_continuous(format!("{name}.phi+[{t}]"), 0.0, inf))
        .collect();
    let phi_min: Vec<VarId> = (t1 + 1..=t2)
        .map(|t| program.add_continuous(format!("{name}.phi-[{t}]"), 0.0, inf))
        .collect();

    let mut budget = row.rhs.scaled(-1.0);
    for (k, t) in (t1..=t2).enumerate() {
        budget
            .add_term(pi_max[k], extrema.total_max[t])
            .add_term(pi_min[k], -extrema.total_min[t]);
    }
    for (k, t) in (t1 + 1..=t2).enumerate() {
        budget
            .add_term(phi_max[k], extrema.delta_max[t])
            .add_term(phi_min[k], -extrema.delta_min[t]);
    }
    program.add_constraint(format!("{name}.budget"), budget, Sense::Le);

    for (k, t) in (t1..=t2).enumerate() {
        let mut e = LinExpr::new();
        e.add_term(pi_max[k], 1.0).add_term(pi_min[k], -1.0);
        if t > t1 {
            e.add_term(phi_max[k - 1], 1.0)
                .add_term(phi_min[k - 1], -1.0);
        }
        if t < t2 {
            e.add_term(phi_max[k], -1.0).add_term(phi_min[k], 1.0);
        }
        e.add_scaled(&row.total_coef(t), -1.0);
        program.add_constraint(format!("{name}.stat[{t}]"), e, Sense::Eq);
    }
    Ok(OaDual {
        span: (t1, t2),
        pi_max,
        pi_min,
        phi_max,
        phi_min,
    })
}

/// LP duality over the full polyhedron: λ ≥ 0, Gᵀλ = q(W) on free columns,
/// Gᵀλ ≥ q(W) on nonnegative columns, hᵀλ + const(W) ≤ b.
pub fn add_exact_dual(
    program: &mut MathProgram,
    row: &RobustRow,
    poly: &SetPolyhedron,
) -> Vec<VarId> {
    let w = row.weight_exprs(poly.num_units, poly.horizon);
    let mut constant = LinExpr::new();
    let mut q = vec![LinExpr::new(); poly.nx];
    for i in 0..poly.num_units {
        for t in 0..poly.horizon {
            let a = &w[i][t];
            if a.terms.is_empty() && a.constant == 0.0 {
                continue;
            }
            constant.add_scaled(a, poly.base[i][t]);
            for &(j, c) in &poly.map[i][t] {
                q[j].add_scaled(a, c);
            }
        }
    }
    let name = &row.name;
    let lambda: Vec<VarId> = (0..poly.rows.len())
        .map(|r| program.add_continuous(format!("{name}.lam[{r}]"), 0.0, f64::INFINITY))
        .collect();
    let mut cols = vec![LinExpr::new(); poly.nx];
    let mut budget = constant;
    for (r, (terms, h)) in poly.rows.iter().enumerate() {
        budget.add_term(lambda[r], *h);
        for &(j, g) in terms {
            cols[j].add_term(lambda[r], g);
        }
    }
    budget.add_scaled(&row.rhs, -1.0);
    program.add_constraint(format!("{name}.dual_budget"), budget, Sense::Le);
    for (j, mut e) in cols.into_iter().enumerate() {
        e.add_scaled(&q[j], -1.0);
        let sense = if poly.lower[j].is_some() {
            Sense::Ge
        } else {
            Sense::Eq
        };
        program.add_constraint(format!("{name}.dual[{j}]"), e.compact(), sense);
    }
    lambda
}
