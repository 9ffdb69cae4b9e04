use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
pub type Matrix = Vec<Vec<f64>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    #[serde(rename = "l1")]
    L1,
    #[serde(rename = "l2")]
    L2,
    #[serde(rename = "linf")]
    Linf,
    /// max(‖v‖₁/√N_v, ‖v‖_∞)
    #[serde(rename = "l1_linf")]
    L1Linf,
}

impl NormKind {
    pub fn eval(self, v: &[f64]) -> f64 {
        let l1: f64 = v.iter().map(|x| x.abs()).sum();
        let linf = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        match self {
            NormKind::L1 => l1,
            NormKind::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormKind::Linf => linf,
            NormKind::L1Linf => (l1 / (v.len().max(1) as f64).sqrt()).max(linf),
        }
    }

    pub fn is_polyhedral(self) -> bool {
        self != NormKind::L2
    }
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(NormKind::L1),
            "l2" => Ok(NormKind::L2),
            "linf" => Ok(NormKind::Linf),
            "l1_linf" | "l1linf" => Ok(NormKind::L1Linf),
            other => Err(Error::Parse(format!("unknown norm `{other}`"))),
        }
    }
}

/// Available renewable power p̄^r (unit × period) with optional latent paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPath {
    pub available: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Matrix>,
}

impl ScenarioPath {
    pub fn new(available: Matrix) -> Self {
        Self {
            available,
            u: None,
            v: None,
        }
    }

    pub fn num_units(&self) -> usize {
        self.available.len()
    }

    pub fn horizon(&self) -> usize {
        self.available.first().map_or(0, Vec::len)
    }

    pub fn total(&self, t: usize) -> f64 {
        self.available.iter().map(|row| row[t]).sum()
    }

    pub fn column(&self, t: usize) -> Vec<f64> {
        self.available.iter().map(|row| row[t]).collect()
    }
}

/// The polyhedron p̄ = f + g∘u, u_t = Σ A^l u_{t-l} + B v_t,
/// ‖v_t‖ ≤ Γ, Σ‖v_t‖ ≤ ρΓT, 0 ≤ p̄ ≤ p̄^max.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicUncertaintySet {
    pub f: Matrix,
    pub g: Matrix,
    /// A^1..A^L
    #[serde(default)]
    pub lags: Vec<Matrix>,
    /// unit × N_v
    pub b: Matrix,
    pub gamma: f64,
    pub rho: f64,
    pub p_max: Matrix,
    pub norm: NormKind,
    /// u_0, u_{-1}, ..., u_{1-L}; missing entries are zero.
    #[serde(default)]
    pub initial_u: Vec<Vec<f64>>,
}

pub fn identity(n: usize) -> Matrix {
    (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect()
}

impl DynamicUncertaintySet {
    /// Period-separable budget set: L = 0, B = I, ρ = 1.
    pub fn static_set(f: Matrix, g: Matrix, p_max: Matrix, gamma: f64, norm: NormKind) -> Self {
        let n = f.len();
        Self {
            f,
            g,
            lags: Vec::new(),
            b: identity(n),
            gamma,
            rho: 1.0,
            p_max,
            norm,
            initial_u: Vec::new(),
        }
    }

    /// Static set on the same profile, with g rescaled by the stationary standard deviation
    /// of u so that Γ counts standard deviations of available power.
    pub fn static_counterpart(&self, noise: &[Vec<f64>]) -> Self {
        let sd = stationary_std(&self.lags, noise);
        let g = self
            .g
            .iter()
            .zip(&sd)
            .map(|(row, s)| row.iter().map(|x| x * s).collect())
            .collect();
        Self::static_set(self.f.clone(), g, self.p_max.clone(), self.gamma, self.norm)
    }

    pub fn num_units(&self) -> usize {
        self.f.len()
    }

    pub fn horizon(&self) -> usize {
        self.f.first().map_or(0, Vec::len)
    }

    pub fn num_factors(&self) -> usize {
        self.b.first().map_or(0, Vec::len)
    }

    pub fn lag(&self) -> usize {
        self.lags.len()
    }

    /// Γ = 0 or some g_it = 0: the set is not full-dimensional.
    pub fn is_degenerate(&self) -> bool {
        self.gamma == 0.0 || self.g.iter().flatten().any(|&x| x == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_units();
        let t = self.horizon();
        let nv = self.num_factors();
        let bad = |m: String| Err(Error::Invalid(m));
        if n == 0 || t == 0 {
            return bad("uncertainty set needs at least one unit and one period".into());
        }
        for (name, m) in [("f", &self.f), ("g", &self.g), ("p_max", &self.p_max)] {
            if m.len() != n || m.iter().any(|r| r.len() != t) {
                return bad(format!("{name} must be {n} × {t}"));
            }
            if m.iter().flatten().any(|x| !x.is_finite()) {
                return bad(format!("{name} has non-finite entries"));
            }
        }
        if self.g.iter().flatten().any(|&x| x < 0.0) {
            return bad("g must be nonnegative".into());
        }
        if self.p_max.iter().flatten().any(|&x| x < 0.0) {
            return bad("p_max must be nonnegative".into());
        }
        if self.b.len() != n || nv == 0 || nv > n || self.b.iter().any(|r| r.len() != nv) {
            return bad(format!("B must be {n} × N_v with 1 ≤ N_v ≤ {n}"));
        }
        for (l, a) in self.lags.iter().enumerate() {
            if a.len() != n || a.iter().any(|r| r.len() != n) {
                return bad(format!("A^{} must be {n} × {n}", l + 1));
            }
        }
        if self.initial_u.len() > self.lag() || self.initial_u.iter().any(|u| u.len() != n) {
            return bad("initial_u must hold at most L vectors of unit dimension".into());
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return bad("Γ must be finite and nonnegative".into());
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad("ρ must lie in (0, 1]".into());
        }
        Ok(())
    }

    /// Pre-horizon value u_{-k} for k ≥ 0 (u_0 is `initial_u[0]`).
    pub fn initial(&self, k: usize) -> Vec<f64> {
        self.initial_u
            .get(k)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.num_units()])
    }

    /// Path with v ≡ 0, clipped to the bounds.
    pub fn forecast_path(&self) -> ScenarioPath {
        let t = self.horizon();
        let v = vec![vec![0.0; self.num_factors()]; t];
        let u = propagate(&self.lags, &self.b, &self.initial_u, &v);
        let available = (0..self.num_units())
            .map(|i| {
                (0..t)
                    .map(|k| (self.f[i][k] + self.g[i][k] * u[k][i]).clamp(0.0, self.p_max[i][k]))
                    .collect()
            })
            .collect();
        ScenarioPath {
            available,
            u: Some(transpose(&u)),
            v: Some(transpose(&v)),
        }
    }

    /// Replay a residual path (period × factor) through the recursion.
    /// Returns the path without clipping.
    pub fn replay(&self, v: &[Vec<f64>]) -> ScenarioPath {
        let u = propagate(&self.lags, &self.b, &self.initial_u, v);
        let available = (0..self.num_units())
            .map(|i| {
                (0..self.horizon())
                    .map(|k| self.f[i][k] + self.g[i][k] * u[k][i])
                    .collect()
            })
            .collect();
        ScenarioPath {
            available,
            u: Some(transpose(&u)),
            v: Some(transpose(v)),
        }
    }

    /// Recover the residual path (period × factor) implied by p̄, by least squares.
    /// Returns the residuals and the largest reconstruction error in MW.
    pub fn implied_v(&self, path: &ScenarioPath) -> Result<(Vec<Vec<f64>>, f64)> {
        let n = self.num_units();
        let t = self.horizon();
        let mut u = vec![vec![0.0; n]; t];
        for i in 0..n {
            for k in 0..t {
                let g = self.g[i][k];
                let p = path.available[i][k];
                if g == 0.0 {
                    if (p - self.f[i][k]).abs() > 1e-9 {
                        return Err(Error::Invalid(format!(
                            "unit {i} period {k}: g = 0 but p̄ differs from f"
                        )));
                    }
                } else {
                    u[k][i] = (p - self.f[i][k]) / g;
                }
            }
        }
        let b = DMatrix::from_fn(n, self.num_factors(), |r, c| self.b[r][c]);
        let svd = b.clone().svd(true, true);
        let mut v = Vec::with_capacity(t);
        let mut err = 0.0_f64;
        for k in 0..t {
            let mut rhs = DVector::from_vec(u[k].clone());
            for (l, a) in self.lags.iter().enumerate() {
                let prev = lagged(&u, &self.initial_u, k, l + 1, n);
                for r in 0..n {
                    rhs[r] -= a[r].iter().zip(&prev).map(|(x, y)| x * y).sum::<f64>();
                }
            }
            let vk = svd
                .solve(&rhs, 1e-12)
                .map_err(|e| Error::Internal(format!("least squares failed: {e}")))?;
            let resid = &b * &vk - &rhs;
            for i in 0..n {
                err = err.max((resid[i] * self.g[i][k]).abs());
            }
            v.push(vk.iter().copied().collect());
        }
        Ok((v, err))
    }

    /// Membership test up to `tol` (MW for bounds and reconstruction, relative for norms).
    pub fn contains(&self, path: &ScenarioPath, tol: f64) -> Result<bool> {
        for i in 0..self.num_units() {
            for k in 0..self.horizon() {
                let p = path.available[i][k];
                if p < -tol || p > self.p_max[i][k] + tol {
                    return Ok(false);
                }
            }
        }
        let (v, err) = self.implied_v(path)?;
        if err > tol {
            return Ok(false);
        }
        let scale = tol * self.gamma.max(1.0);
        let norms: Vec<f64> = v.iter().map(|vk| self.norm.eval(vk)).collect();
        let budget = self.rho * self.gamma * self.horizon() as f64;
        Ok(norms.iter().all(|&x| x <= self.gamma + scale)
            && norms.iter().sum::<f64>() <= budget + scale)
    }
}

fn lagged(u: &[Vec<f64>], initial: &[Vec<f64>], k: usize, l: usize, n: usize) -> Vec<f64> {
    if k >= l {
        u[k - l].clone()
    } else {
        initial
            .get(l - k - 1)
            .cloned()
            .unwrap_or_else(|| vec![0.0; n])
    }
}

pub fn transpose(m: &[Vec<f64>]) -> Matrix {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    (0..cols)
        .map(|c| (0..rows).map(|r| m[r][c]).collect())
        .collect()
}

/// Run u_t = Σ_l A^l u_{t-l} + B v_t for residuals `v` (period × factor).
/// Returns u as period × unit.
pub fn propagate<S: Scalar>(
    lags: &[Vec<Vec<S>>],
    b: &[Vec<S>],
    initial: &[Vec<S>],
    v: &[Vec<S>],
) -> Vec<Vec<S>> {
    let n = b.len();
    let mut u: Vec<Vec<S>> = Vec::with_capacity(v.len());
    for (k, vk) in v.iter().enumerate() {
        let mut uk: Vec<S> = (0..n)
            .map(|r| {
                b[r].iter()
                    .zip(vk)
                    .fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
            })
            .collect();
        for (l, a) in lags.iter().enumerate() {
            let lag = l + 1;
            let prev: Option<&Vec<S>> = if k >= lag {
                Some(&u[k - lag])
            } else {
                initial.get(lag - k - 1)
            };
            if let Some(prev) = prev {
                for r in 0..n {
                    let add = a[r]
                        .iter()
                        .zip(prev)
                        .fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone());
                    uk[r] = uk[r].clone() + add;
                }
            }
        }
        u.push(uk);
    }
    u
}

/// Per-component standard deviation of u under unit-variance noise, from impulse responses
/// truncated once they decay below 1e-12 (or after 10000 steps for a nonstationary recursion).
pub fn stationary_std(lags: &[Matrix], noise: &[Vec<f64>]) -> Vec<f64> {
    let n = noise.len();
    let mut var = vec![0.0; n];
    let mut steps = 64;
    loop {
        let k = impulse_responses(lags, noise, steps);
        var = vec![0.0; n];
        for kh in &k {
            for (r, row) in kh.iter().enumerate() {
                var[r] += row.iter().map(|x| x * x).sum::<f64>();
            }
        }
        let tail = k.last().map_or(0.0, |kh| {
            kh.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max)
        });
        if tail < 1e-12 || steps >= 10_000 || lags.is_empty() {
            break;
        }
        steps *= 4;
    }
    var.into_iter().map(f64::sqrt).collect()
}

/// Impulse responses K_h = Σ_{l=1}^{min(L,h)} A^l K_{h-l}, K_0 = B (unit × factor).
pub fn impulse_responses<S: Scalar>(
    lags: &[Vec<Vec<S>>],
    b: &[Vec<S>],
    horizon: usize,
) -> Vec<Vec<Vec<S>>> {
    let n = b.len();
    let nv = b.first().map_or(0, Vec::len);
    let mut k: Vec<Vec<Vec<S>>> = Vec::with_capacity(horizon);
    if horizon > 0 {
        k.push(b.to_vec());
    }
    for h in 1..horizon {
        let mut kh = vec![vec![S::zero(); nv]; n];
        for (l, a) in lags.iter().enumerate().take(h) {
            let prev = &k[h - l - 1];
            for r in 0..n {
                for c in 0..nv {
                    let mut acc = kh[r][c].clone();
                    for m in 0..n {
                        acc = acc + a[r][m].clone() * prev[m][c].clone();
                    }
                    kh[r][c] = acc;
                }
            }
        }
        k.push(kh);
    }
    k
}
