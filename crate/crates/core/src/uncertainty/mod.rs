//! Dynamic uncertainty sets for renewable availability.

mod condition;
mod estimate;
pub mod io;
mod oracle;
mod polyhedron;
mod sampling;
mod set;
mod simulate;

pub use condition::{condition_on_history, BudgetMode, ConditionedSet};
pub use estimate::{
    cholesky_psd, eigen_descending, estimate, estimate_seasonal, fit_var, g_floor,
    reduce_dimension, Eigen, EstimateOptions, SeasonalFit, VarEstimate, VarFit,
};
pub use io::{
    load_model, load_set, load_time_series, parse_model, parse_set, parse_time_series, save_model,
    save_set, save_time_series, set_to_toml, time_series_to_csv, TimeSeries,
};
pub use oracle::{maximize_linear, set_extrema, LinearMax, SetExtrema, SetOracle};
pub use polyhedron::SetPolyhedron;
pub use sampling::MemberSampler;
pub use set::{
    identity, impulse_responses, propagate, stationary_std, transpose, DynamicUncertaintySet,
    Matrix, NormKind, ScenarioPath,
};
pub use simulate::{simulate_paths, StochasticModel};
