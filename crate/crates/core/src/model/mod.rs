//! Power system data and the deterministic constraint blocks.

pub mod commitment;
pub mod dispatch_set;
pub mod io;
pub mod types;

pub use commitment::{build_commitment_constraints, CommitmentVars};
pub use dispatch_set::{
    add_period_block, dispatch_cost, dispatch_feasible_set, line_flow, storage_levels, Commitment,
    DispatchBlock, DispatchHistory, PeriodContext, PeriodDispatch, PeriodVars,
};
pub use io::{load_system, parse_system, save_system, system_to_toml};
pub use types::{
    CommitmentSchedule, DemandNode, Generator, PowerSystem, Profile, RenewableKind, RenewableUnit,
    StorageUnit, TransmissionLine,
};
