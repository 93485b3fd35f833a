use nalgebra::DVector;

use super::{BarrierPenalty, ConstraintSet, GameSpec};
use crate::error::{check_dim, Result};

/// KKT residuals of a candidate equilibrium and multiplier pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub y_star: DVector<f64>,
    pub multipliers: DVector<f64>,
    /// `|F(y) + sum_l lambda_l grad g_l(y)|`.
    pub stationarity_residual: f64,
    /// `min_l lambda_l`; nonnegative for dual feasibility.
    pub dual_feasibility: f64,
    /// `-g(y)`.
    pub margins: DVector<f64>,
    pub min_margin: f64,
    /// `lambda_l * (-g_l(y))`: zero at an exact KKT point, `rho` at the barrier equilibrium.
    pub complementarity: DVector<f64>,
    /// `p * rho` when the report came from a barrier equilibrium.
    pub epsilon_bound: Option<f64>,
    /// Whether `g(y) <= 0` holds.
    pub feasible: bool,
}

/// Residuals of the variational-GNE KKT system at `(y, lambda)`.
///
/// Infeasible points are flagged in the report rather than rejected.
pub fn kkt_residuals(
    game: &GameSpec,
    cs: &ConstraintSet,
    y: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<EquilibriumReport> {
    check_dim("multipliers", cs.n_constraints(), lambda.len())?;
    let mut stationarity = game.pseudo_gradient(y)?;
    for (l, &w) in lambda.iter().enumerate() {
        stationarity.axpy(w, &cs.gradient(l, y)?, 1.0);
    }
    let margins = cs.margins(y)?;
    let complementarity = lambda.component_mul(&margins);
    Ok(EquilibriumReport {
        y_star: y.clone(),
        multipliers: lambda.clone(),
        stationarity_residual: stationarity.norm(),
        dual_feasibility: lambda.iter().copied().fold(f64::INFINITY, f64::min),
        min_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
        feasible: margins.iter().all(|&v| v >= 0.0),
        margins,
        complementarity,
        epsilon_bound: None,
    })
}

/// KKT report at a strictly interior `y` using the barrier's implied multipliers.
pub fn certify_penalized(
    game: &GameSpec,
    pen: &BarrierPenalty,
    y: &DVector<f64>,
) -> Result<EquilibriumReport> {
    let lambda = pen.implied_multipliers(y)?;
    let mut report = kkt_residuals(game, pen.constraints(), y, &lambda)?;
    report.epsilon_bound = Some(pen.epsilon_bound());
    Ok(report)
}
