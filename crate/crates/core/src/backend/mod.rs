//! LP/MILP engines behind one trait.

mod builtin;
#[cfg(feature = "highs")]
mod highs_backend;
pub mod lpformat;
mod program;
pub mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::BuiltinBackend;
#[cfg(feature = "highs")]
pub use highs_backend::HighsBackend;
pub use program::{
    Constraint, LinExpr, MathProgram, Sense, Solution, SolveAttributes, SolveStatus, VarId,
    VarKind, Variable,
};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("capability mismatch: {0}")]
    CapabilityMismatch(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("backend not available: {0}")]
    NotAvailable(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BackendCapability {
    /// The backend calls the lazy callback at every integer-feasible incumbent.
    pub supports_lazy_constraints: bool,
    pub supports_dual_values: bool,
    pub supports_mip: bool,
}

/// Rows to inject at an integer-feasible incumbent. An empty vector accepts it.
pub trait LazyCallback {
    fn separate(&mut self, incumbent: &[f64]) -> Vec<Constraint>;
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;

    fn capability(&self) -> BackendCapability;

    fn solve(
        &self,
        program: &MathProgram,
        lazy: Option<&mut dyn LazyCallback>,
    ) -> Result<Solution, BackendError>;

    /// Row duals of a continuous program.
    fn solve_lp_dual(&self, program: &MathProgram) -> Result<Vec<f64>, BackendError> {
        if program.is_mip() {
            return Err(BackendError::InvalidProgram(
                "dual values requested for a MILP".into(),
            ));
        }
        if !self.capability().supports_dual_values {
            return Err(BackendError::CapabilityMismatch(format!(
                "{} does not report duals",
                self.name()
            )));
        }
        let sol = self.solve(program, None)?;
        match (sol.status, sol.duals) {
            (SolveStatus::Optimal, Some(d)) => Ok(d),
            (status, _) => Err(BackendError::Backend(format!(
                "no duals available, status {status:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Highs,
    Builtin,
}

impl std::str::FromStr for BackendKind {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "highs" => Ok(BackendKind::Highs),
            "builtin" => Ok(BackendKind::Builtin),
            other => Err(BackendError::NotAvailable(format!(
                "unknown backend `{other}`"
            ))),
        }
    }
}

pub fn make_backend(kind: BackendKind) -> Result<Box<dyn Backend>, BackendError> {
    match kind {
        #[cfg(feature = "highs")]
        BackendKind::Highs => Ok(Box::new(HighsBackend::new())),
        #[cfg(not(feature = "highs"))]
        BackendKind::Highs => Err(BackendError::NotAvailable(
            "this build was compiled without the `highs` feature".into(),
        )),
        BackendKind::Builtin => Ok(Box::new(BuiltinBackend::default())),
    }
}

/// HiGHS when compiled in, else the builtin engine.
pub fn default_backend() -> Box<dyn Backend> {
    make_backend(BackendKind::Highs).unwrap_or_else(|_| Box::new(BuiltinBackend::default()))
}

/// Solve and require an optimal status.
pub fn solve_optimal(
    backend: &dyn Backend,
    program: &MathProgram,
) -> Result<Solution, BackendError> {
    let sol = backend.solve(program, None)?;
    match sol.status {
        SolveStatus::Optimal => Ok(sol),
        s => Err(BackendError::Backend(format!(
            "expected an optimal solution, got {s:?}"
        ))),
    }
}
