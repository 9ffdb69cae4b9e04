//! Trajectory generation from the VAR model and conditional-mean forecasts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimate::VarEstimate;
use super::set::{transpose, DynamicUncertaintySet, Matrix, ScenarioPath};
use crate::error::{Error, Result};

/// p̄_t = f_t + g_t ∘ u_t, u_t = Σ A^l u_{t-l} + B ε_t, ε ~ N(0, I), clipped to [0, p̄^max].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticModel {
    pub f: Matrix,
    pub g: Matrix,
    #[serde(default)]
    pub lags: Vec<Matrix>,
    /// Noise loading, unit × noise dimension. B Bᵀ = Σ.
    pub noise: Matrix,
    pub p_max: Matrix,
    #[serde(default)]
    pub initial_u: Vec<Vec<f64>>,
}

impl StochasticModel {
    pub fn from_estimate(est: &VarEstimate, p_max: Matrix, start: usize) -> Self {
        let horizon = p_max.first().map_or(0, Vec::len);
        let (f, g) = est.seasonal.tile(horizon, start);
        Self {
            f,
            g,
            lags: est.lags.clone(),
            noise: est.b_full.clone(),
            p_max,
            initial_u: Vec::new(),
        }
    }

    /// Model sharing a set's seasonal profile and lag structure.
    pub fn from_set(set: &DynamicUncertaintySet, noise: Matrix) -> Self {
        Self {
            f: set.f.clone(),
            g: set.g.clone(),
            lags: set.lags.clone(),
            noise,
            p_max: set.p_max.clone(),
            initial_u: set.initial_u.clone(),
        }
    }

    pub fn num_units(&self) -> usize {
        self.f.len()
    }

    pub fn horizon(&self) -> usize {
        self.f.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_units();
        let t = self.horizon();
        let ok = |m: &Matrix| m.len() == n && m.iter().all(|r| r.len() == t);
        if n == 0 || t == 0 || !ok(&self.f) || !ok(&self.g) || !ok(&self.p_max) {
            return Err(Error::Invalid(format!("model arrays must be {n} × {t}")));
        }
        if self.noise.len() != n || self.noise.iter().any(|r| r.len() != self.noise[0].len()) {
            return Err(Error::Invalid(
                "noise loading must have one row per unit".into(),
            ));
        }
        if self
            .lags
            .iter()
            .any(|a| a.len() != n || a.iter().any(|r| r.len() != n))
        {
            return Err(Error::Invalid(
                "lag matrices must be square in the unit count".into(),
            ));
        }
        Ok(())
    }

    /// One trajectory; `index` selects an independent stream of `seed`.
    pub fn simulate_one(&self, seed: u64, index: u64) -> ScenarioPath {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let n = self.num_units();
        let k = self.noise.first().map_or(0, Vec::len);
        let eps: Vec<Vec<f64>> = (0..self.horizon())
            .map(|_| (0..k).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let u = super::set::propagate(&self.lags, &self.noise, &self.initial_u, &eps);
        let available = (0..n)
            .map(|i| {
                (0..self.horizon())
                    .map(|t| (self.f[i][t] + self.g[i][t] * u[t][i]).clamp(0.0, self.p_max[i][t]))
                    .collect()
            })
            .collect();
        ScenarioPath {
            available,
            u: Some(transpose(&u)),
            v: Some(transpose(&eps)),
        }
    }

    /// Forecast of periods `observed..T` given columns `0..observed` of `realized`:
    /// the recursion run forward with zero noise from the realized u, clipped.
    /// Returns unit × T with the observed columns copied through.
    pub fn conditional_mean(&self, realized: &ScenarioPath, observed: usize) -> Matrix {
        conditional_mean(
            &self.f,
            &self.g,
            &self.lags,
            &self.p_max,
            &self.initial_u,
            realized,
            observed,
        )
    }
}

pub fn simulate_paths(
    model: &StochasticModel,
    count: usize,
    seed: u64,
) -> Result<Vec<ScenarioPath>> {
    model.validate()?;
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| model.simulate_one(seed, i))
        .collect())
}

pub(crate) fn conditional_mean(
    f: &Matrix,
    g: &Matrix,
    lags: &[Matrix],
    p_max: &Matrix,
    initial_u: &[Vec<f64>],
    realized: &ScenarioPath,
    observed: usize,
) -> Matrix {
    let n = f.len();
    let horizon = f.first().map_or(0, Vec::len);
    let mut u: Vec<Vec<f64>> = Vec::with_capacity(horizon);
    let mut out = vec![vec![0.0; horizon]; n];
    for t in 0..horizon {
        let ut: Vec<f64> = if t < observed {
            (0..n)
                .map(|i| {
                    out[i][t] = realized.available[i][t];
                    if g[i][t] > 0.0 {
                        (realized.available[i][t] - f[i][t]) / g[i][t]
                    } else {
                        0.0
                    }
                })
                .collect()
        } else {
            let mut ut = vec![0.0; n];
            for (l, a) in lags.iter().enumerate() {
                let lag = l + 1;
                let prev = if t >= lag {
                    u[t - lag].clone()
                } else {
                    initial_u
                        .get(lag - t - 1)
                        .cloned()
                        .unwrap_or_else(|| vec![0.0; n])
                };
                for r in 0..n {
                    ut[r] += a[r].iter().zip(&prev).map(|(x, y)| x * y).sum::<f64>();
                }
            }
            for i in 0..n {
                out[i][t] = (f[i][t] + g[i][t] * ut[i]).clamp(0.0, p_max[i][t]);
            }
            ut
        };
        u.push(ut);
    }
    out
}

impl DynamicUncertaintySet {
    /// Conditional-mean forecast under the set's own recursion.
    pub fn conditional_mean(&self, realized: &ScenarioPath, observed: usize) -> Matrix {
        conditional_mean(
            &self.f,
            &self.g,
            &self.lags,
            &self.p_max,
            &self.initial_u,
            realized,
            observed,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_follows_profile() {
        let m = StochasticModel {
            f: vec![vec![3.0, 4.0, 5.0]],
            g: vec![vec![1.0; 3]],
            lags: vec![vec![vec![0.7]]],
            noise: vec![vec![0.0]],
            p_max: vec![vec![10.0; 3]],
            initial_u: Vec::new(),
        };
        for p in simulate_paths(&m, 5, 7).unwrap() {
            assert_eq!(p.available[0], vec![3.0, 4.0, 5.0]);
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let m = StochasticModel {
            f: vec![vec![1.0; 4]],
            g: vec![vec![10.0; 4]],
            lags: Vec::new(),
            noise: vec![vec![1.0]],
            p_max: vec![vec![2.0; 4]],
            initial_u: Vec::new(),
        };
        let a = simulate_paths(&m, 3, 11).unwrap();
        let b = simulate_paths(&m, 3, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].available, a[1].available);
        assert!(a
            .iter()
            .flat_map(|p| p.available[0].iter())
            .all(|&x| (0.0..=2.0).contains(&x)));
    }
}
