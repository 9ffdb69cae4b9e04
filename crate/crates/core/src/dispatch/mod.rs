//! Real-time dispatch engines and the deterministic day-ahead baseline.

mod det_uc;
mod ed;

pub use det_uc::{reserve_rule, solve_deterministic_uc, DetUcOptions, ReserveRequirement};
pub use ed::{
    conditioned_total_range, deterministic_laed, policy_enforcement_ed, policy_guided_laed,
    DispatchState, EdKind, EdOptions, EdOutcome, StorageMatching,
};
