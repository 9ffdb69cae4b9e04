use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use super::BackendError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sense::Le => write!(f, "<="),
            Sense::Eq => write!(f, "="),
            Sense::Ge => write!(f, ">="),
        }
    }
}

/// Affine expression `Σ coeff·var + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn var(var: VarId) -> Self {
        Self::term(var, 1.0)
    }

    pub fn term(var: VarId, coeff: f64) -> Self {
        Self {
            terms: vec![(var, coeff)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, var: VarId, coeff: f64) -> &mut Self {
        if coeff != 0.0 {
            self.terms.push((var, coeff));
        }
        self
    }

    pub fn add_constant(&mut self, value: f64) -> &mut Self {
        self.constant += value;
        self
    }

    /// `self += scale · other`
    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        if scale == 0.0 {
            return self;
        }
        for &(v, c) in &other.terms {
            self.add_term(v, c * scale);
        }
        self.constant += other.constant * scale;
        self
    }

    pub fn scaled(&self, scale: f64) -> LinExpr {
        let mut out = LinExpr::new();
        out.add_scaled(self, scale);
        out
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(v, c)| c * values[v.0])
                .sum::<f64>()
    }

    /// Merge duplicate variables and drop zero coefficients.
    pub fn compact(mut self) -> Self {
        if self.terms.len() > 1 {
            let mut merged: BTreeMap<VarId, f64> = BTreeMap::new();
            for (v, c) in self.terms.drain(..) {
                *merged.entry(v).or_insert(0.0) += c;
            }
            self.terms = merged.into_iter().filter(|&(_, c)| c != 0.0).collect();
        } else {
            self.terms.retain(|&(_, c)| c != 0.0);
        }
        self
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }
}

impl From<f64> for LinExpr {
    fn from(value: f64) -> Self {
        LinExpr::constant(value)
    }
}

impl From<VarId> for LinExpr {
    fn from(var: VarId) -> Self {
        LinExpr::var(var)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    /// Build `expr sense 0`, moving the constant to the right-hand side.
    pub fn from_expr(name: impl Into<String>, expr: LinExpr, sense: Sense) -> Self {
        let expr = expr.compact();
        Self {
            name: name.into(),
            terms: expr.terms,
            sense,
            rhs: -expr.constant,
        }
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveAttributes {
    /// Relative MIP optimality gap.
    pub mip_gap: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    pub threads: usize,
}

impl Default for SolveAttributes {
    fn default() -> Self {
        Self {
            mip_gap: 0.01,
            time_limit: None,
            threads: 1,
        }
    }
}

/// A linear (mixed-binary) minimisation program.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MathProgram {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: LinExpr,
    pub attributes: SolveAttributes,
}

impl MathProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        kind: VarKind,
    ) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, lower, upper, VarKind::Continuous)
    }

    pub fn add_free(&mut self, name: impl Into<String>) -> VarId {
        self.add_continuous(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, 1.0, VarKind::Binary)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        expr: LinExpr,
        sense: Sense,
    ) -> usize {
        self.push(Constraint::from_expr(name, expr, sense))
    }

    /// Add `lhs sense rhs` for two affine expressions.
    pub fn add_comparison(
        &mut self,
        name: impl Into<String>,
        lhs: &LinExpr,
        sense: Sense,
        rhs: &LinExpr,
    ) -> usize {
        let mut expr = lhs.clone();
        expr.add_scaled(rhs, -1.0);
        self.add_constraint(name, expr, sense)
    }

    pub fn push(&mut self, constraint: Constraint) -> usize {
        self.constraints.push(constraint);
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn is_mip(&self) -> bool {
        self.variables.iter().any(|v| v.kind == VarKind::Binary)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.evaluate(values)
    }

    /// Largest bound or row violation of a candidate point.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
            .fold(0.0, f64::max);
        self.constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(bounds, f64::max)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let n = self.variables.len();
        for (i, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(BackendError::InvalidProgram(format!(
                    "variable {i} ({}) has bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(BackendError::InvalidProgram(format!(
                    "binary variable {} has bounds outside [0, 1]",
                    v.name
                )));
            }
        }
        let check = |terms: &[(VarId, f64)], what: &str| -> Result<(), BackendError> {
            for &(var, c) in terms {
                if var.0 >= n {
                    return Err(BackendError::InvalidProgram(format!(
                        "{what} references undeclared variable {}",
                        var.0
                    )));
                }
                if !c.is_finite() {
                    return Err(BackendError::InvalidProgram(format!(
                        "{what} has a non-finite coefficient"
                    )));
                }
            }
            Ok(())
        };
        check(&self.objective.terms, "objective")?;
        for c in &self.constraints {
            check(&c.terms, &format!("constraint {}", c.name))?;
            if !c.rhs.is_finite() {
                return Err(BackendError::InvalidProgram(format!(
                    "constraint {} has rhs {}",
                    c.name, c.rhs
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    /// Optimal, or within the configured MIP gap.
    Optimal,
    Infeasible,
    Unbounded,
    /// Time, node or iteration limit reached. `values` holds the incumbent if one exists.
    Limit,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    /// Row duals (LP only), sign convention of the Lagrangian `c·x − Σ yᵢ (aᵢ·x − bᵢ)`:
    /// `yᵢ ≥ 0` on `≥` rows and `yᵢ ≤ 0` on `≤` rows of a minimisation.
    pub duals: Option<Vec<f64>>,
    pub mip_gap: Option<f64>,
}

impl Solution {
    pub fn status_only(status: SolveStatus) -> Self {
        Self {
            status,
            objective: f64::NAN,
            values: Vec::new(),
            duals: None,
            mip_gap: None,
        }
    }

    pub fn has_values(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }
}
