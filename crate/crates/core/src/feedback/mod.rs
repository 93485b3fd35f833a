//! Closed-loop assembly: full-information gradient feedback, consensus-based
//! partial-information feedback, and the singularly perturbed fully
//! distributed law.

mod selection;
mod system;

pub use selection::{
    estimate_extended_lipschitz, extended_pseudo_gradient, selection_matrices, stacked_selection,
    EstimateLayout, SelectionMatrices,
};
pub use system::{
    default_k, initial_estimates, ClosedLoopSystem, FeedbackMode, Segment, SegmentKind,
    DEFAULT_BETA, DEFAULT_K_SAFETY,
};
