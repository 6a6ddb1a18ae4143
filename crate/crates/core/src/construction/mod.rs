//! Inductive construction of sampling functions with finitely many
//! smoothed spectral bands and a uniformly positive smoothed Lyapunov
//! exponent, by stacking tower-column shift layers.

pub mod budgets;
pub mod engine;
pub mod layer;
pub mod ledger;

pub use budgets::Budgets;
pub use engine::{
    apply_layer, direct_integral_gap, first_level, init, run, verify_step, ConstructionParams,
    ConstructionState, RunOutcome, StepFailure, StepSnapshot,
};
pub use layer::{shift_values, ComposedSampler, ShiftLayer};
pub use ledger::{ConstructionLedger, LedgerRow, LEDGER_COLUMNS};
