pub mod backend;
pub mod dispatch;
pub mod error;
pub mod model;
pub mod robust;
pub mod scalar;
pub mod simulation;
pub mod uncertainty;

pub use error::{Error, Result};
pub use scalar::{Exact, Scalar};

/// Default floating scalar used by the solver-facing code.
pub type Real = f64;
/// Reduced-precision scalar for the generic kernels.
pub type Real32 = f32;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
