//! Scenario files, batch runs and result serialization for the barrier
//! GNE-seeking library.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod builtins;
pub mod output;
pub mod runner;
pub mod scenario;

pub use runner::{compare_to_oracle, run, simulate, CompareReport, ModeName, Overrides, RunOutcome, Status};
pub use scenario::{Scenario, ScenarioError};
