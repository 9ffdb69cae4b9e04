//! Adaptive robust unit commitment with affine dispatch policies.

pub mod engine;
pub mod policy;
pub mod reformulate;
pub mod rows;

pub use engine::{
    audit_solution, check_row, policy_values, solve_robust_policy, solve_robust_uc, AuditReport,
    RobustOptions, RowCheck, SolveStats, UcSolution,
};
pub use policy::{AffinePolicy, AffineVars, PolicyOutput, PolicyVars};
pub use reformulate::{
    add_balance_rows, add_exact_dual, add_extreme_point_rows, add_oa_dual, OaDual,
};
pub use rows::{
    build_robust_rows, screen_row, screening_bound, RobustRow, RowKind, ScenarioPool, Scope,
};
