use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use ruc_core::dispatch::DetUcOptions;
use ruc_core::robust::RobustOptions;
use ruc_core::simulation::SimulationConfig;
use ruc_core::uncertainty::NormKind;

/// Everything a run reads, after the config file and command-line overrides are merged.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub seed: u64,
    pub threads: usize,
    pub set: SetOverrides,
    pub estimate: EstimateConfig,
    pub robust: RobustOptions,
    pub det_uc: DetUcConfig,
    pub simulation: SimulationConfig,
    pub compare: CompareConfig,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub system: Option<PathBuf>,
    pub series: Option<PathBuf>,
    pub set: Option<PathBuf>,
    /// Stochastic model used to draw trajectories; defaults to the set's own recursion.
    pub model: Option<PathBuf>,
    pub solution: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

/// Applied on top of a loaded set file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SetOverrides {
    pub gamma: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub cycle: usize,
    pub lag: usize,
    /// Defaults to the number of renewable units.
    pub nv: Option<usize>,
    /// Hour of the cycle at which the UC horizon starts.
    pub start: usize,
    pub gamma: f64,
    pub rho: f64,
    pub norm: NormKind,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            cycle: 24,
            lag: 1,
            nv: None,
            start: 0,
            gamma: 1.0,
            rho: 1.0,
            norm: NormKind::Linf,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetUcConfig {
    /// Multiplier on the sampled net-load standard deviation.
    pub reserve_gamma: f64,
    pub reserve_samples: usize,
    pub options: DetUcOptions,
}

impl Default for DetUcConfig {
    fn default() -> Self {
        Self {
            reserve_gamma: 1.0,
            reserve_samples: 200,
            options: DetUcOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub gammas: Vec<f64>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            gammas: vec![0.5, 1.0, 2.0],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let check = |name: &str, v: f64, lo: f64, hi: f64| -> anyhow::Result<()> {
            if !(lo..=hi).contains(&v) {
                bail!("{name} must lie in [{lo}, {hi}], got {v}");
            }
            Ok(())
        };
        if let Some(g) = self.set.gamma {
            check("gamma", g, 0.0, f64::MAX)?;
        }
        if let Some(r) = self.set.rho {
            check("rho", r, 0.0, 1.0)?;
        }
        check("robust.mip_gap", self.robust.mip_gap, 0.0, 1.0)?;
        check("robust.eps_viol", self.robust.eps_viol, 0.0, 1.0)?;
        check(
            "robust.eps_loose_factor",
            self.robust.eps_loose_factor,
            1.0,
            f64::MAX,
        )?;
        check(
            "det_uc.reserve_gamma",
            self.det_uc.reserve_gamma,
            0.0,
            f64::MAX,
        )?;
        check(
            "det_uc.options.mip_gap",
            self.det_uc.options.mip_gap,
            0.0,
            1.0,
        )?;
        check("estimate.gamma", self.estimate.gamma, 0.0, f64::MAX)?;
        check("estimate.rho", self.estimate.rho, 0.0, 1.0)?;
        check(
            "simulation.ed.penalty_price",
            self.simulation.ed.penalty_price,
            0.0,
            f64::MAX,
        )?;
        if self.robust.max_iterations == 0 {
            bail!("robust.max_iterations must be positive");
        }
        if self.det_uc.reserve_samples < 2 {
            bail!("det_uc.reserve_samples must be at least 2");
        }
        if self.simulation.trajectories == 0 {
            bail!("simulation.trajectories must be positive");
        }
        if self.estimate.cycle == 0 || self.estimate.lag == 0 {
            bail!("estimate.cycle and estimate.lag must be positive");
        }
        if self.compare.gammas.iter().any(|g| !(*g >= 0.0)) {
            bail!("compare.gammas must be nonnegative");
        }
        Ok(())
    }
}

pub fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> anyhow::Result<&'a Path> {
    match path {
        Some(p) => Ok(p),
        None => bail!("missing required path: {what}"),
    }
}
