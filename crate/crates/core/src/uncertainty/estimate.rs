//! Fitting a dynamic set from history: daily profile, VAR residual model, PCA.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::set::{DynamicUncertaintySet, Matrix, NormKind};
use crate::error::{Error, Result};

pub const RIDGE: f64 = 1e-8;

/// Hour-of-cycle mean and standard deviation per unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeasonalFit {
    pub cycle: usize,
    /// unit × cycle
    pub mean: Matrix,
    /// unit × cycle, floored
    pub std: Matrix,
    /// Some (unit, hour) standard deviation hit the floor.
    pub floored: bool,
}

pub fn g_floor(f: f64) -> f64 {
    1e-6 * f.abs().max(1.0)
}

/// `series` is unit × time, starting at hour 0 of the cycle.
pub fn estimate_seasonal(series: &[Vec<f64>], cycle: usize) -> Result<SeasonalFit> {
    if cycle == 0 {
        return Err(Error::Estimation("period cycle must be positive".into()));
    }
    if series.is_empty() {
        return Err(Error::Estimation("no units in the history".into()));
    }
    let len = series[0].len();
    if series.iter().any(|s| s.len() != len) {
        return Err(Error::Estimation("unit histories differ in length".into()));
    }
    if len < 2 * cycle {
        return Err(Error::Estimation(format!(
            "need at least two full cycles ({}) of history, got {len}",
            2 * cycle
        )));
    }
    let mut floored = false;
    let mut mean = vec![vec![0.0; cycle]; series.len()];
    let mut std = vec![vec![0.0; cycle]; series.len()];
    for (i, s) in series.iter().enumerate() {
        for h in 0..cycle {
            let xs: Vec<f64> = s.iter().skip(h).step_by(cycle).copied().collect();
            let n = xs.len() as f64;
            let m = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
            let floor = g_floor(m);
            let sd = var.sqrt();
            mean[i][h] = m;
            std[i][h] = if sd < floor {
                floored = true;
                floor
            } else {
                sd
            };
        }
    }
    if floored {
        log::warn!("zero-variance hours found; g floored");
    }
    Ok(SeasonalFit {
        cycle,
        mean,
        std,
        floored,
    })
}

impl SeasonalFit {
    /// (f, g) over `horizon` periods starting at hour `start`.
    pub fn tile(&self, horizon: usize, start: usize) -> (Matrix, Matrix) {
        let pick = |m: &Matrix| -> Matrix {
            m.iter()
                .map(|row| {
                    (0..horizon)
                        .map(|t| row[(start + t) % self.cycle])
                        .collect()
                })
                .collect()
        };
        (pick(&self.mean), pick(&self.std))
    }

    /// u = (p̄ − f)/g for a unit × time history; returns time × unit.
    pub fn standardize(&self, series: &[Vec<f64>]) -> Matrix {
        let len = series.first().map_or(0, Vec::len);
        (0..len)
            .map(|t| {
                series
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let h = t % self.cycle;
                        (s[t] - self.mean[i][h]) / self.std[i][h]
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarFit {
    pub lags: Vec<Matrix>,
    pub sigma: Matrix,
    pub observations: usize,
    /// The ridge term was needed.
    pub regularized: bool,
}

/// Least squares u_t ≈ Σ_l A^l u_{t-l} without intercept. `u` is time × dim.
pub fn fit_var(u: &[Vec<f64>], lag: usize) -> Result<VarFit> {
    let dim = u.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::Estimation("empty residual history".into()));
    }
    if u.len() < lag + dim {
        return Err(Error::Estimation(format!(
            "need at least L + dim = {} observations, got {}",
            lag + dim,
            u.len()
        )));
    }
    let nobs = u.len() - lag;
    let k = lag * dim;
    let y = DMatrix::from_fn(nobs, dim, |r, c| u[r + lag][c]);
    let mut regularized = false;
    let theta = if k == 0 {
        DMatrix::zeros(0, dim)
    } else {
        let x = DMatrix::from_fn(nobs, k, |r, c| u[r + lag - 1 - c / dim][c % dim]);
        let mut xtx = x.transpose() * &x;
        let xty = x.transpose() * &y;
        let sv = xtx.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if !(smin > 1e-12 * smax.max(1e-300)) {
            regularized = true;
            for d in 0..k {
                xtx[(d, d)] += RIDGE;
            }
            log::warn!("VAR regressors are rank-deficient; ridge {RIDGE} applied");
        }
        xtx.lu()
            .solve(&xty)
            .ok_or_else(|| Error::Estimation("normal equations are singular".into()))?
    };
    let lags: Vec<Matrix> = (0..lag)
        .map(|l| {
            (0..dim)
                .map(|r| (0..dim).map(|c| theta[(l * dim + c, r)]).collect())
                .collect()
        })
        .collect();
    let mut resid = y;
    if k > 0 {
        let x = DMatrix::from_fn(nobs, k, |r, c| u[r + lag - 1 - c / dim][c % dim]);
        resid -= x * &theta;
    }
    let denom = (nobs as f64 - k as f64).max(1.0);
    let s = resid.transpose() * &resid / denom;
    let sigma = (0..dim)
        .map(|r| (0..dim).map(|c| 0.5 * (s[(r, c)] + s[(c, r)])).collect())
        .collect();
    Ok(VarFit {
        lags,
        sigma,
        observations: nobs,
        regularized,
    })
}

/// Lower-triangular L with L Lᵀ = Σ for positive semidefinite Σ.
/// Zero pivots give zero columns.
pub fn cholesky_psd(sigma: &[Vec<f64>]) -> Result<Matrix> {
    let n = sigma.len();
    if sigma.iter().any(|r| r.len() != n) {
        return Err(Error::Estimation("covariance must be square".into()));
    }
    let scale = (0..n).map(|i| sigma[i][i].abs()).fold(0.0_f64, f64::max);
    let tol = 1e-12 * scale.max(1e-300);
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = sigma[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d < -1e-8 * scale.max(1.0) {
            return Err(Error::Estimation(
                "covariance is not positive semidefinite".into(),
            ));
        }
        if d <= tol {
            continue;
        }
        let ljj = d.sqrt();
        l[j][j] = ljj;
        for i in j + 1..n {
            let s = sigma[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = s / ljj;
        }
    }
    Ok(l)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigen {
    /// Descending, clamped at zero.
    pub values: Vec<f64>,
    /// Columns are the eigenvectors, stored row-major.
    pub vectors: Matrix,
}

pub fn eigen_descending(sigma: &[Vec<f64>]) -> Eigen {
    let n = sigma.len();
    let m = DMatrix::from_fn(n, n, |r, c| sigma[r][c]);
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut vectors = vec![vec![0.0; n]; n];
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let pivot = (0..n)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
            .unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors[r][col] = sign * v[r];
        }
    }
    Eigen {
        values: order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect(),
        vectors,
    }
}

/// Leading `nv` columns of V Λ^{1/2} and the captured share of the trace.
pub fn reduce_dimension(sigma: &[Vec<f64>], nv: usize) -> Result<(Matrix, f64)> {
    let n = sigma.len();
    if nv == 0 || nv > n {
        return Err(Error::Invalid(format!("N_v must lie in 1..={n}, got {nv}")));
    }
    let eig = eigen_descending(sigma);
    Ok(truncate(&eig, nv))
}

fn truncate(eig: &Eigen, nv: usize) -> (Matrix, f64) {
    let n = eig.values.len();
    let b = (0..n)
        .map(|r| {
            (0..nv)
                .map(|c| eig.vectors[r][c] * eig.values[c].sqrt())
                .collect()
        })
        .collect();
    let trace: f64 = eig.values.iter().sum();
    let kept: f64 = eig.values[..nv].iter().sum();
    let captured = if trace > 0.0 { kept / trace } else { 1.0 };
    (b, captured)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarEstimate {
    pub seasonal: SeasonalFit,
    pub lags: Vec<Matrix>,
    pub sigma: Matrix,
    pub b_full: Matrix,
    pub eigen: Eigen,
    pub nv: usize,
    pub b_truncated: Matrix,
    pub captured_variance: f64,
    pub regularized: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub cycle: usize,
    pub lag: usize,
    pub nv: usize,
}

/// Seasonal fit, VAR, Cholesky factor and PCA in one pass. `series` is unit × time.
pub fn estimate(series: &[Vec<f64>], options: EstimateOptions) -> Result<VarEstimate> {
    let seasonal = estimate_seasonal(series, options.cycle)?;
    let u = seasonal.standardize(series);
    let var = fit_var(&u, options.lag)?;
    let b_full = cholesky_psd(&var.sigma)?;
    let n = var.sigma.len();
    if options.nv == 0 || options.nv > n {
        return Err(Error::Invalid(format!(
            "N_v must lie in 1..={n}, got {}",
            options.nv
        )));
    }
    let eigen = eigen_descending(&var.sigma);
    let (b_truncated, captured_variance) = truncate(&eigen, options.nv);
    Ok(VarEstimate {
        seasonal,
        lags: var.lags,
        sigma: var.sigma,
        b_full,
        eigen,
        nv: options.nv,
        b_truncated,
        captured_variance,
        regularized: var.regularized,
    })
}

impl VarEstimate {
    /// Dynamic set over `p_max.len()`-unit, `horizon`-period window starting at hour `start`.
    pub fn to_set(
        &self,
        p_max: Matrix,
        start: usize,
        gamma: f64,
        rho: f64,
        norm: NormKind,
    ) -> DynamicUncertaintySet {
        let horizon = p_max.first().map_or(0, Vec::len);
        let (f, g) = self.seasonal.tile(horizon, start);
        DynamicUncertaintySet {
            f,
            g,
            lags: self.lags.clone(),
            b: self.b_truncated.clone(),
            gamma,
            rho,
            p_max,
            norm,
            initial_u: Vec::new(),
        }
    }

    pub fn captured_by(&self, nv: usize) -> f64 {
        truncate(&self.eigen, nv.clamp(1, self.eigen.values.len())).1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_statistics() {
        let s = vec![vec![4.0, 1.0, 6.0, 1.0]];
        let fit = estimate_seasonal(&s, 2).unwrap();
        assert_eq!(fit.mean[0][0], 5.0);
        assert!((fit.std[0][0] - 2f64.sqrt()).abs() < 1e-12);
        assert!(fit.floored);
        assert_eq!(fit.std[0][1], 1e-6);
    }

    #[test]
    fn noiseless_ar_is_exact() {
        let mut u = vec![vec![1.0]];
        for _ in 0..30 {
            let last = u.last().unwrap()[0];
            u.push(vec![0.9 * last]);
        }
        let fit = fit_var(&u, 1).unwrap();
        assert!((fit.lags[0][0][0] - 0.9).abs() < 1e-10);
        assert!(fit.sigma[0][0].abs() < 1e-10);
    }

    #[test]
    fn diag_pca() {
        let (b, c) = reduce_dimension(&[vec![4.0, 0.0], vec![0.0, 1.0]], 1).unwrap();
        assert!((b[0][0].abs() - 2.0).abs() < 1e-12);
        assert!(b[1][0].abs() < 1e-12);
        assert!((c - 0.8).abs() < 1e-12);
    }

    #[test]
    fn cholesky_handles_singular() {
        let s = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let l = cholesky_psd(&s).unwrap();
        assert_eq!(l[1][1], 0.0);
        assert!((l[1][0] - 1.0).abs() < 1e-12);
    }
}
