//! Linear optimisation over the uncertainty set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::polyhedron::SetPolyhedron;
use super::set::{DynamicUncertaintySet, ScenarioPath};
use crate::backend::simplex::{self, DenseLp, LpOutcome};
use crate::backend::Sense;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct LinearMax {
    pub value: f64,
    pub argmax: ScenarioPath,
}

/// Prebuilt LP form of a set, reused across weight vectors.
#[derive(Clone, Debug)]
pub struct SetOracle {
    pub set: DynamicUncertaintySet,
    pub poly: SetPolyhedron,
}

impl SetOracle {
    pub fn new(set: &DynamicUncertaintySet) -> Result<Self> {
        Ok(Self {
            poly: SetPolyhedron::build(set)?,
            set: set.clone(),
        })
    }

    /// max Σ a_it p̄_it over the set, with one optimal vertex.
    pub fn maximize(&self, weights: &[Vec<f64>]) -> Result<LinearMax> {
        self.check_weights(weights)?;
        let (constant, q) = self.poly.objective(weights);
        let x = solve_poly::<f64>(&self.poly, &q)?;
        let value = constant + q.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        Ok(LinearMax {
            value,
            argmax: self.path_at(&x),
        })
    }

    /// Same LP in another scalar type; returns the optimal value only.
    pub fn maximize_value_in<S: Scalar>(&self, weights: &[Vec<f64>]) -> Result<S> {
        self.check_weights(weights)?;
        let (constant, q) = self.poly.objective(weights);
        let x = solve_poly::<S>(&self.poly, &q)?;
        let mut value = S::from_f64_lossy(constant);
        for (a, b) in q.iter().zip(x) {
            value = value + S::from_f64_lossy(*a) * b;
        }
        Ok(value)
    }

    pub fn minimize(&self, weights: &[Vec<f64>]) -> Result<LinearMax> {
        let neg: Vec<Vec<f64>> = weights
            .iter()
            .map(|r| r.iter().map(|x| -x).collect())
            .collect();
        let mut out = self.maximize(&neg)?;
        out.value = -out.value;
        Ok(out)
    }

    fn check_weights(&self, weights: &[Vec<f64>]) -> Result<()> {
        if weights.len() != self.poly.num_units
            || weights.iter().any(|r| r.len() != self.poly.horizon)
        {
            return Err(Error::Invalid(format!(
                "weights must be {} × {}",
                self.poly.num_units, self.poly.horizon
            )));
        }
        Ok(())
    }

    fn path_at(&self, x: &[f64]) -> ScenarioPath {
        let v = self.poly.residuals(x);
        let mut path = self.set.replay(&v);
        path.available = self.poly.available(x);
        path
    }

    pub fn total_weights(&self, t: usize, sign: f64) -> Vec<Vec<f64>> {
        let mut w = vec![vec![0.0; self.poly.horizon]; self.poly.num_units];
        for row in &mut w {
            row[t] = sign;
        }
        w
    }

    pub fn extrema(&self) -> Result<SetExtrema> {
        let n = self.poly.num_units;
        let horizon = self.poly.horizon;
        #[derive(Clone, Copy)]
        enum Job {
            Total(usize, f64),
            Delta(usize, f64),
            Unit(usize, usize, f64),
        }
        let mut jobs = Vec::new();
        for t in 0..horizon {
            jobs.push(Job::Total(t, 1.0));
            jobs.push(Job::Total(t, -1.0));
            if t > 0 {
                jobs.push(Job::Delta(t, 1.0));
                jobs.push(Job::Delta(t, -1.0));
            }
            for i in 0..n {
                jobs.push(Job::Unit(i, t, 1.0));
                jobs.push(Job::Unit(i, t, -1.0));
            }
        }
        let values: Vec<f64> = jobs
            .par_iter()
            .map(|job| {
                let mut w = vec![vec![0.0; horizon]; n];
                let sign = match *job {
                    Job::Total(t, s) => {
                        w.iter_mut().for_each(|r| r[t] = s);
                        s
                    }
                    Job::Delta(t, s) => {
                        w.iter_mut().for_each(|r| {
                            r[t] = s;
                            r[t - 1] = -s;
                        });
                        s
                    }
                    Job::Unit(i, t, s) => {
                        w[i][t] = s;
                        s
                    }
                };
                self.maximize(&w).map(|m| sign * m.value)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut ex = SetExtrema {
            total_min: vec![0.0; horizon],
            total_max: vec![0.0; horizon],
            delta_min: vec![0.0; horizon],
            delta_max: vec![0.0; horizon],
            unit_min: vec![vec![0.0; horizon]; n],
            unit_max: vec![vec![0.0; horizon]; n],
        };
        for (job, v) in jobs.iter().zip(values) {
            match *job {
                Job::Total(t, s) if s > 0.0 => ex.total_max[t] = v,
                Job::Total(t, _) => ex.total_min[t] = v,
                Job::Delta(t, s) if s > 0.0 => ex.delta_max[t] = v,
                Job::Delta(t, _) => ex.delta_min[t] = v,
                Job::Unit(i, t, s) if s > 0.0 => ex.unit_max[i][t] = v,
                Job::Unit(i, t, _) => ex.unit_min[i][t] = v,
            }
        }
        ex.tidy();
        Ok(ex)
    }
}

fn solve_poly<S: Scalar>(poly: &SetPolyhedron, q: &[f64]) -> Result<Vec<S>> {
    let mut lp = DenseLp::new(q.iter().map(|&c| S::from_f64_lossy(-c)).collect());
    lp.lower = poly
        .lower
        .iter()
        .map(|l| l.map(S::from_f64_lossy))
        .collect();
    for (terms, rhs) in &poly.rows {
        lp.add_row(
            terms
                .iter()
                .map(|&(j, c)| (j, S::from_f64_lossy(c)))
                .collect(),
            Sense::Le,
            S::from_f64_lossy(*rhs),
        );
    }
    match simplex::solve(&lp) {
        LpOutcome::Optimal(o) => Ok(o.x),
        LpOutcome::Infeasible => Err(Error::Invalid(
            "uncertainty set is empty: the forecast path violates the bounds for every residual"
                .into(),
        )),
        LpOutcome::Unbounded => Err(Error::Internal(
            "LP over a bounded set reported unbounded".into(),
        )),
        LpOutcome::IterationLimit => Err(Error::Internal(
            "simplex iteration limit over the uncertainty set".into(),
        )),
    }
}

pub fn maximize_linear(set: &DynamicUncertaintySet, weights: &[Vec<f64>]) -> Result<LinearMax> {
    SetOracle::new(set)?.maximize(weights)
}

/// Bounds of the projected set used by the reformulations and screening.
/// `delta_*[t]` bounds Σ_j (p̄_jt − p̄_{j,t-1}); entry 0 is unused.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetExtrema {
    pub total_min: Vec<f64>,
    pub total_max: Vec<f64>,
    pub delta_min: Vec<f64>,
    pub delta_max: Vec<f64>,
    pub unit_min: Vec<Vec<f64>>,
    pub unit_max: Vec<Vec<f64>>,
}

impl SetExtrema {
    pub fn horizon(&self) -> usize {
        self.total_min.len()
    }

    /// Collapse min/max pairs that cross by round-off.
    fn tidy(&mut self) {
        let fix = |lo: &mut f64, hi: &mut f64| {
            if *lo > *hi {
                let mid = 0.5 * (*lo + *hi);
                *lo = mid;
                *hi = mid;
            }
        };
        for t in 0..self.horizon() {
            fix(&mut self.total_min[t], &mut self.total_max[t]);
            fix(&mut self.delta_min[t], &mut self.delta_max[t]);
        }
        for (lo, hi) in self.unit_min.iter_mut().zip(self.unit_max.iter_mut()) {
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                fix(a, b);
            }
        }
    }

    /// Extrema of a single point (a degenerate set).
    pub fn of_path(path: &ScenarioPath) -> Self {
        let horizon = path.horizon();
        let totals: Vec<f64> = (0..horizon).map(|t| path.total(t)).collect();
        let deltas: Vec<f64> = (0..horizon)
            .map(|t| {
                if t == 0 {
                    0.0
                } else {
                    totals[t] - totals[t - 1]
                }
            })
            .collect();
        Self {
            total_min: totals.clone(),
            total_max: totals,
            delta_min: deltas.clone(),
            delta_max: deltas,
            unit_min: path.available.clone(),
            unit_max: path.available.clone(),
        }
    }
}

pub fn set_extrema(set: &DynamicUncertaintySet) -> Result<SetExtrema> {
    SetOracle::new(set)?.extrema()
}
