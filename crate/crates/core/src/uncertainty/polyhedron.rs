//! LP form of the uncertainty set with u and p̄ eliminated.
//!
//! Decision vector x = (v, a, s): residuals v_{t,k}, absolute-value epigraph
//! a_{t,k} ≥ |v_{t,k}| (l1 norms only) and per-period norm bounds s_t. Every
//! constraint is written as a row `G x ≤ h`; p̄ is an affine image of x.

use super::set::{impulse_responses, propagate, DynamicUncertaintySet, NormKind};
use crate::error::{Error, Result};

const DROP: f64 = 1e-15;

#[derive(Clone, Debug)]
pub struct SetPolyhedron {
    pub num_units: usize,
    pub horizon: usize,
    pub num_factors: usize,
    pub nx: usize,
    /// Rows of `G x ≤ h`.
    pub rows: Vec<(Vec<(usize, f64)>, f64)>,
    /// Lower bounds on x (None = free).
    pub lower: Vec<Option<f64>>,
    /// p̄_it = base_it + Σ map_it · x
    pub base: Vec<Vec<f64>>,
    pub map: Vec<Vec<Vec<(usize, f64)>>>,
}

impl SetPolyhedron {
    pub fn v_index(&self, t: usize, k: usize) -> usize {
        t * self.num_factors + k
    }

    pub fn build(set: &DynamicUncertaintySet) -> Result<Self> {
        set.validate()?;
        if !set.norm.is_polyhedral() {
            return Err(Error::Invalid(
                "the l2 norm gives a second-order cone; LP oracles need l1, linf or l1_linf".into(),
            ));
        }
        let n = set.num_units();
        let horizon = set.horizon();
        let nv = set.num_factors();
        let uses_abs = matches!(set.norm, NormKind::L1 | NormKind::L1Linf);
        let nvars_v = horizon * nv;
        let a_off = nvars_v;
        let s_off = if uses_abs { 2 * nvars_v } else { nvars_v };
        let nx = s_off + horizon;

        let zero_v = vec![vec![0.0; nv]; horizon];
        let drift = propagate(&set.lags, &set.b, &set.initial_u, &zero_v);
        let k = impulse_responses(&set.lags, &set.b, horizon);

        let mut base = vec![vec![0.0; horizon]; n];
        let mut map = vec![vec![Vec::new(); horizon]; n];
        for i in 0..n {
            for t in 0..horizon {
                let g = set.g[i][t];
                base[i][t] = set.f[i][t] + g * drift[t][i];
                if g == 0.0 {
                    continue;
                }
                for tau in 0..=t {
                    for c in 0..nv {
                        let coef = g * k[t - tau][i][c];
                        if coef.abs() > DROP {
                            map[i][t].push((tau * nv + c, coef));
                        }
                    }
                }
            }
        }

        let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        for i in 0..n {
            for t in 0..horizon {
                // Rows are normalized so that a tiny g does not leave tiny pivots.
                let scale = map[i][t].iter().fold(0.0f64, |m, &(_, c)| m.max(c.abs()));
                let scale = if scale > 0.0 { scale } else { 1.0 };
                let terms: Vec<(usize, f64)> =
                    map[i][t].iter().map(|&(j, c)| (j, c / scale)).collect();
                rows.push((terms.clone(), (set.p_max[i][t] - base[i][t]) / scale));
                rows.push((
                    terms.into_iter().map(|(j, c)| (j, -c)).collect(),
                    base[i][t] / scale,
                ));
            }
        }
        let sqrt_nv = (nv as f64).sqrt();
        for t in 0..horizon {
            let s = s_off + t;
            for c in 0..nv {
                let v = t * nv + c;
                if uses_abs {
                    let a = a_off + t * nv + c;
                    rows.push((vec![(v, 1.0), (a, -1.0)], 0.0));
                    rows.push((vec![(v, -1.0), (a, -1.0)], 0.0));
                    if set.norm == NormKind::L1Linf {
                        rows.push((vec![(a, 1.0), (s, -1.0)], 0.0));
                    }
                } else {
                    rows.push((vec![(v, 1.0), (s, -1.0)], 0.0));
                    rows.push((vec![(v, -1.0), (s, -1.0)], 0.0));
                }
            }
            if uses_abs {
                let cap = if set.norm == NormKind::L1Linf {
                    sqrt_nv
                } else {
                    1.0
                };
                let mut r: Vec<(usize, f64)> = (0..nv).map(|c| (a_off + t * nv + c, 1.0)).collect();
                r.push((s, -cap));
                rows.push((r, 0.0));
            }
            rows.push((vec![(s, 1.0)], set.gamma));
        }
        let budget = set.rho * set.gamma * horizon as f64;
        if budget < set.gamma * horizon as f64 {
            rows.push(((0..horizon).map(|t| (s_off + t, 1.0)).collect(), budget));
        }

        let mut lower = vec![None; nx];
        for l in lower.iter_mut().skip(nvars_v) {
            *l = Some(0.0);
        }
        Ok(Self {
            num_units: n,
            horizon,
            num_factors: nv,
            nx,
            rows,
            lower,
            base,
            map,
        })
    }

    /// Objective Σ a_it p̄_it as (constant, coefficient vector over x).
    pub fn objective(&self, weights: &[Vec<f64>]) -> (f64, Vec<f64>) {
        let mut constant = 0.0;
        let mut q = vec![0.0; self.nx];
        for i in 0..self.num_units {
            for t in 0..self.horizon {
                let a = weights[i][t];
                if a == 0.0 {
                    continue;
                }
                constant += a * self.base[i][t];
                for &(j, c) in &self.map[i][t] {
                    q[j] += a * c;
                }
            }
        }
        (constant, q)
    }

    /// p̄ at a point x (unit × period).
    pub fn available(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.num_units)
            .map(|i| {
                (0..self.horizon)
                    .map(|t| {
                        self.base[i][t] + self.map[i][t].iter().map(|&(j, c)| c * x[j]).sum::<f64>()
                    })
                    .collect()
            })
            .collect()
    }

    /// Residual path (period × factor) at a point x.
    pub fn residuals(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.horizon)
            .map(|t| {
                (0..self.num_factors)
                    .map(|k| x[self.v_index(t, k)])
                    .collect()
            })
            .collect()
    }
}
