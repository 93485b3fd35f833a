//! Generalized Nash equilibrium seeking for networks of output-passive
//! agents under coupled output constraints.
//!
//! Constraints are enforced by a log-barrier penalty so the closed loop
//! keeps every output strictly inside the feasible set. Three feedback
//! laws are provided (full information, consensus estimates, and the fully
//! distributed singularly perturbed law), together with a guarded RK4
//! integrator and an independent Newton oracle for cross-checking.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod feedback;
pub mod game;
pub mod graph;
pub mod oracle;
pub mod plants;
pub mod sim;

pub use error::{Error, Result};
