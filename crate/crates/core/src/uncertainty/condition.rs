//! One-step-ahead slice of a set given the realized history.

use serde::{Deserialize, Serialize};

use super::oracle::{SetExtrema, SetOracle};
use super::set::{DynamicUncertaintySet, ScenarioPath};
use crate::error::{Error, Result};

/// How the time budget Σ‖v_t‖ ≤ ρΓT is carried into the conditioned slice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// Keep only the per-period cap ‖v_{t+1}‖ ≤ Γ.
    #[default]
    PerPeriod,
    /// Cap at min(Γ, ρΓT − Σ_{τ≤t} ‖v̂_τ‖) using residuals implied by the history.
    Remaining,
}

#[derive(Clone, Debug)]
pub struct ConditionedSet {
    /// Horizon-1 set over the next period.
    pub set: DynamicUncertaintySet,
    /// Index of the conditioned period in the original horizon.
    pub period: usize,
    /// The history had values outside [0, p̄^max] and was clipped.
    pub clipped_history: bool,
}

/// Condition on columns `0..observed` of `realized` and return the slice for period `observed`.
pub fn condition_on_history(
    set: &DynamicUncertaintySet,
    realized: &ScenarioPath,
    observed: usize,
    mode: BudgetMode,
) -> Result<ConditionedSet> {
    set.validate()?;
    let n = set.num_units();
    let horizon = set.horizon();
    if observed >= horizon {
        return Err(Error::Invalid(format!(
            "cannot condition on {observed} periods of a {horizon}-period set"
        )));
    }
    if realized.num_units() != n || realized.horizon() < observed {
        return Err(Error::Invalid(
            "realized history has the wrong shape".into(),
        ));
    }

    let mut clipped_history = false;
    let mut u_hist: Vec<Vec<f64>> = Vec::with_capacity(observed);
    for tau in 0..observed {
        let mut u = vec![0.0; n];
        for i in 0..n {
            let raw = realized.available[i][tau];
            let p = raw.clamp(0.0, set.p_max[i][tau]);
            if p != raw {
                clipped_history = true;
            }
            let g = set.g[i][tau];
            if g == 0.0 {
                if (p - set.f[i][tau]).abs() > 1e-9 {
                    return Err(Error::Invalid(format!(
                        "unit {i} period {tau}: g = 0 but the realized value differs from f"
                    )));
                }
            } else {
                u[i] = (p - set.f[i][tau]) / g;
            }
        }
        u_hist.push(u);
    }
    if clipped_history {
        log::warn!("realized history outside the bounds was clipped before conditioning");
    }

    let initial_u: Vec<Vec<f64>> = (0..set.lag())
        .map(|l| {
            if l < observed {
                u_hist[observed - 1 - l].clone()
            } else {
                set.initial(l - observed)
            }
        })
        .collect();

    let gamma = match mode {
        BudgetMode::PerPeriod => set.gamma,
        BudgetMode::Remaining => {
            let spent = spent_budget(set, &u_hist)?;
            let total = set.rho * set.gamma * horizon as f64;
            set.gamma.min((total - spent).max(0.0))
        }
    };

    let col = |m: &Vec<Vec<f64>>| m.iter().map(|r| vec![r[observed]]).collect::<Vec<_>>();
    Ok(ConditionedSet {
        set: DynamicUncertaintySet {
            f: col(&set.f),
            g: col(&set.g),
            lags: set.lags.clone(),
            b: set.b.clone(),
            gamma,
            rho: 1.0,
            p_max: col(&set.p_max),
            norm: set.norm,
            initial_u,
        },
        period: observed,
        clipped_history,
    })
}

fn spent_budget(set: &DynamicUncertaintySet, u_hist: &[Vec<f64>]) -> Result<f64> {
    if u_hist.is_empty() {
        return Ok(0.0);
    }
    let k = u_hist.len();
    let head = |m: &Vec<Vec<f64>>| m.iter().map(|r| r[..k].to_vec()).collect::<Vec<_>>();
    let prefix = DynamicUncertaintySet {
        f: vec![vec![0.0; k]; set.num_units()],
        g: vec![vec![1.0; k]; set.num_units()],
        p_max: head(&set.p_max),
        ..set.clone()
    };
    let path = ScenarioPath::new(super::set::transpose(u_hist));
    let (v, _) = prefix.implied_v(&path)?;
    Ok(v.iter().map(|vk| set.norm.eval(vk)).sum())
}

impl ConditionedSet {
    /// Forecast value of the next period (v = 0), clipped.
    pub fn forecast(&self) -> Vec<f64> {
        self.set.forecast_path().column(0)
    }

    /// Extrema of the next-period availability. When no residual keeps the
    /// slice inside the bounds, the bound rows are dropped and the result is
    /// clamped instead; the flag reports that.
    pub fn extrema(&self) -> Result<(SetExtrema, bool)> {
        if self.set.gamma == 0.0 {
            return Ok((SetExtrema::of_path(&self.set.forecast_path()), false));
        }
        let oracle = SetOracle::new(&self.set)?;
        match oracle.extrema() {
            Ok(ex) => Ok((ex, false)),
            Err(Error::Invalid(_)) => {
                let mut relaxed = oracle.clone();
                let n = self.set.num_units();
                relaxed.poly.rows.drain(0..2 * n);
                let mut ex = relaxed.extrema()?;
                let cap: f64 = self.set.p_max.iter().map(|r| r[0]).sum();
                ex.total_min[0] = ex.total_min[0].clamp(0.0, cap);
                ex.total_max[0] = ex.total_max[0].clamp(0.0, cap);
                for i in 0..n {
                    let hi = self.set.p_max[i][0];
                    ex.unit_min[i][0] = ex.unit_min[i][0].clamp(0.0, hi);
                    ex.unit_max[i][0] = ex.unit_max[i][0].clamp(0.0, hi);
                }
                log::warn!(
                    "conditioned slice is empty within the bounds; using the clamped relaxation"
                );
                Ok((ex, true))
            }
            Err(e) => Err(e),
        }
    }

    /// [min, max] of the next-period total availability.
    pub fn total_range(&self) -> Result<(f64, f64)> {
        let (ex, _) = self.extrema()?;
        Ok((ex.total_min[0], ex.total_max[0]))
    }
}
