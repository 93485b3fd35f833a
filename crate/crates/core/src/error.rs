use thiserror::Error;

/// Errors raised by the library.
///
/// Constraint and player indices carried by variants are zero-based; display
/// strings render them one-based to match how scenarios are written.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("point is not strictly interior; violated constraints {}", one_based(.indices))]
    InteriorViolation { indices: Vec<usize> },

    #[error("diagnostic not supported: {0}")]
    Unsupported(String),

    #[error("initial state is not strictly interior{}: margin {margin:e}", offending(.constraint))]
    InfeasibleStart { constraint: Option<usize>, margin: f64 },

    #[error("feasibility guard exhausted at t = {time}: step fell below minimum{}", offending(.constraint))]
    GuardExhausted {
        time: f64,
        constraint: Option<usize>,
        step: f64,
    },

    #[error("no convergence after {iterations} iterations (residual {residual:e}){}", at_rho(.rho))]
    NoConvergence {
        iterations: usize,
        residual: f64,
        rho: Option<f64>,
    },
}

fn one_based(indices: &[usize]) -> String {
    indices
        .iter()
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn offending(constraint: &Option<usize>) -> String {
    match constraint {
        Some(c) => format!(" (constraint {})", c + 1),
        None => String::new(),
    }
}

fn at_rho(rho: &Option<f64>) -> String {
    rho.map(|r| format!(" at rho = {r}")).unwrap_or_default()
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
