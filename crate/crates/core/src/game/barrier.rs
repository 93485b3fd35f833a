use nalgebra::DVector;

use super::{ActionLayout, ConstraintSet};
use crate::error::{Error, Result};

/// Value of the log-barrier, with outside points mapped to a marker instead
/// of an error so line searches and step guards can branch on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BarrierValue {
    Finite(f64),
    Infinite,
}

impl BarrierValue {
    pub fn is_finite(self) -> bool {
        matches!(self, BarrierValue::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            BarrierValue::Finite(v) => Some(v),
            BarrierValue::Infinite => None,
        }
    }

    /// `+inf` for the outside marker.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// `phi(y) = -rho * sum_l log(-g_l(y))` on the strict interior of the feasible set.
#[derive(Debug, Clone)]
pub struct BarrierPenalty {
    rho: f64,
    constraints: ConstraintSet,
}

impl BarrierPenalty {
    pub fn new(rho: f64, constraints: ConstraintSet) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Contract(format!("barrier weight must be positive and finite, got {rho}")));
        }
        Ok(Self { rho, constraints })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    /// Same constraints, different weight.
    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        Self::new(rho, self.constraints.clone())
    }

    pub fn value(&self, y: &DVector<f64>) -> BarrierValue {
        let Ok(g) = self.constraints.value(y) else {
            return BarrierValue::Infinite;
        };
        if g.iter().any(|&v| !(v < 0.0)) {
            return BarrierValue::Infinite;
        }
        BarrierValue::Finite(-self.rho * g.iter().map(|&v| (-v).ln()).sum::<f64>())
    }

    fn interior_values(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let g = self.constraints.value(y)?;
        let violated: Vec<usize> = (0..g.len()).filter(|&l| !(g[l] < 0.0)).collect();
        if violated.is_empty() {
            Ok(g)
        } else {
            Err(Error::InteriorViolation { indices: violated })
        }
    }

    /// `lambda_l = rho / (-g_l(y))`, the barrier's stand-in for the KKT multipliers.
    pub fn implied_multipliers(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let g = self.interior_values(y)?;
        Ok(g.map(|v| self.rho / (-v)))
    }

    /// `grad phi(y) = sum_l lambda_l(y) grad g_l(y)`.
    pub fn gradient(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let lambda = self.implied_multipliers(y)?;
        let mut out = DVector::zeros(y.len());
        for (l, &w) in lambda.iter().enumerate() {
            out.axpy(w, &self.constraints.gradient(l, y)?, 1.0);
        }
        Ok(out)
    }

    /// Block `grad_i phi(y)` of the barrier gradient.
    pub fn partial_gradient(
        &self,
        y: &DVector<f64>,
        layout: &ActionLayout,
        player: usize,
    ) -> Result<DVector<f64>> {
        if player >= layout.n_players() {
            return Err(Error::Contract(format!("player index {player} out of range")));
        }
        Ok(layout.block(&self.gradient(y)?, player))
    }

    /// Suboptimality bound `p * rho` of the barrier equilibrium.
    pub fn epsilon_bound(&self) -> f64 {
        self.constraints.n_constraints() as f64 * self.rho
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::catalog::AffineConstraints;
    use crate::game::ConstraintKind;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    fn budget() -> ConstraintSet {
        // g(y) = y1 + y2 - 1
        let model = AffineConstraints::new(dmatrix![1.0, 1.0], dvector![1.0]).unwrap();
        ConstraintSet::new(model, vec![ConstraintKind::Affine], dvector![0.0, 0.0]).unwrap()
    }

    fn nonneg() -> ConstraintSet {
        // g(y) = (-y1, -y2)
        let model = AffineConstraints::nonnegative(2);
        ConstraintSet::new(model, vec![ConstraintKind::Affine; 2], dvector![0.5, 0.5]).unwrap()
    }

    #[test]
    fn value_is_zero_at_unit_margin() {
        let pen = BarrierPenalty::new(0.1, budget()).unwrap();
        assert_eq!(pen.value(&dvector![0.0, 0.0]), BarrierValue::Finite(0.0));
    }

    #[test]
    fn value_is_infinite_on_boundary() {
        let pen = BarrierPenalty::new(0.1, budget()).unwrap();
        assert_eq!(pen.value(&dvector![0.5, 0.5]), BarrierValue::Infinite);
        assert_eq!(pen.value(&dvector![2.0, 0.5]), BarrierValue::Infinite);
        assert_eq!(pen.value(&dvector![0.5, 0.5]).to_f64(), f64::INFINITY);
    }

    #[test]
    fn value_with_two_margins_of_inverse_e() {
        let pen = BarrierPenalty::new(0.1, nonneg()).unwrap();
        let e_inv = (-1.0f64).exp();
        let v = pen.value(&dvector![e_inv, e_inv]).finite().unwrap();
        assert_relative_eq!(v, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let pen = BarrierPenalty::new(0.1, budget()).unwrap();
        let g = pen.gradient(&dvector![0.0, 0.0]).unwrap();
        assert_relative_eq!(g, dvector![0.1, 0.1], epsilon = 1e-15);

        let pen = BarrierPenalty::new(0.1, nonneg()).unwrap();
        let g = pen.gradient(&dvector![0.5, 0.5]).unwrap();
        assert_relative_eq!(g, dvector![-0.2, -0.2], epsilon = 1e-15);
    }

    #[test]
    fn gradient_errors_outside_interior() {
        let pen = BarrierPenalty::new(0.1, nonneg()).unwrap();
        let err = pen.gradient(&dvector![0.0, -1.0]).unwrap_err();
        assert_eq!(err, Error::InteriorViolation { indices: vec![0, 1] });
        let err = pen.implied_multipliers(&dvector![0.3, 0.0]).unwrap_err();
        assert_eq!(err, Error::InteriorViolation { indices: vec![1] });
    }

    #[test]
    fn partial_gradient_is_a_block() {
        let pen = BarrierPenalty::new(0.1, budget()).unwrap();
        let layout = ActionLayout::scalar(2).unwrap();
        let y = dvector![0.0, 0.0];
        assert_eq!(pen.partial_gradient(&y, &layout, 0).unwrap(), dvector![0.1]);
        let full = pen.gradient(&y).unwrap();
        let cat: Vec<f64> = (0..2)
            .flat_map(|i| pen.partial_gradient(&y, &layout, i).unwrap().iter().copied().collect::<Vec<_>>())
            .collect();
        assert_eq!(cat.as_slice(), full.as_slice());
    }

    #[test]
    fn multipliers_by_division() {
        // margins (0.5)
        let pen = BarrierPenalty::new(0.1, budget()).unwrap();
        let lam = pen.implied_multipliers(&dvector![0.25, 0.25]).unwrap();
        assert_relative_eq!(lam[0], 0.2, epsilon = 1e-15);

        // margins (1, 0.1) for g = (y1 - 1, y2 - 1) at y = (0, 0.9)
        let model = AffineConstraints::new(nalgebra::DMatrix::identity(2, 2), dvector![1.0, 1.0]).unwrap();
        let cs = ConstraintSet::new(model, vec![ConstraintKind::Affine; 2], dvector![0.0, 0.0]).unwrap();
        let pen = BarrierPenalty::new(0.1, cs).unwrap();
        let lam = pen.implied_multipliers(&dvector![0.0, 0.9]).unwrap();
        assert_relative_eq!(lam, dvector![0.1, 1.0], epsilon = 1e-12);
    }

    #[test]
    fn epsilon_bound_is_p_rho() {
        let pen = BarrierPenalty::new(0.1, nonneg()).unwrap();
        assert_relative_eq!(pen.epsilon_bound(), 0.2, epsilon = 1e-15);
        let pen = BarrierPenalty::new(1e-9, nonneg()).unwrap();
        assert!(pen.epsilon_bound() < 1e-8);
    }

    #[test]
    fn rejects_nonpositive_rho() {
        assert!(BarrierPenalty::new(0.0, budget()).is_err());
        assert!(BarrierPenalty::new(-0.1, budget()).is_err());
        assert!(BarrierPenalty::new(f64::NAN, budget()).is_err());
    }
}
