//! Games with shared coupled constraints, the log-barrier penalty that turns
//! them into unconstrained Nash problems, and certificates for the resulting
//! equilibria.
//!
//! A game is described by a [`GameSpec`] (players, action blocks, and a
//! [`CostModel`] supplying each player's cost and partial gradient) together
//! with a [`ConstraintSet`] `g(y) <= 0` shared by all players. The
//! [`BarrierPenalty`] replaces the constraints by
//! `phi(y) = -rho * sum_l log(-g_l(y))`, and the stationary point of
//! `F(y) + grad phi(y)` is a `p * rho` approximate variational GNE.

mod barrier;
pub mod catalog;
mod certificate;
mod constants;
mod constraints;

pub use barrier::{BarrierPenalty, BarrierValue};
pub use certificate::{certify_penalized, kkt_residuals, EquilibriumReport};
pub use constants::{estimate_game_constants, sample_strictly_feasible, GameConstants};
pub use constraints::{ConstraintKind, ConstraintModel, ConstraintSet};

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};

/// Block layout of the joint action `y = col(y_1, ..., y_N)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionLayout {
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl ActionLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Contract("a game needs at least one player".into()));
        }
        if dims.contains(&0) {
            return Err(Error::Contract("action dimensions must be positive".into()));
        }
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for d in &dims {
            acc += d;
            offsets.push(acc);
        }
        Ok(Self { dims, offsets })
    }

    /// `n` players with scalar actions.
    pub fn scalar(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    pub fn n_players(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, player: usize) -> usize {
        self.dims[player]
    }

    /// Total action dimension `m`.
    pub fn total(&self) -> usize {
        self.offsets[self.dims.len()]
    }

    pub fn range(&self, player: usize) -> Range<usize> {
        self.offsets[player]..self.offsets[player + 1]
    }

    pub fn block(&self, y: &DVector<f64>, player: usize) -> DVector<f64> {
        let r = self.range(player);
        DVector::from_column_slice(&y.as_slice()[r])
    }
}

/// Per-player costs `J_i(y)` and partial gradients `grad_i J_i(y)`.
///
/// Implementations receive the full joint action and must return a vector of
/// length `m_i` from [`CostModel::partial_gradient`].
pub trait CostModel: Send + Sync {
    fn cost(&self, player: usize, y: &DVector<f64>) -> f64;
    fn partial_gradient(&self, player: usize, y: &DVector<f64>) -> DVector<f64>;
}

#[derive(Clone)]
pub struct GameSpec {
    layout: ActionLayout,
    model: Arc<dyn CostModel>,
    monotonicity: Option<f64>,
    lipschitz: Option<f64>,
}

impl fmt::Debug for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameSpec")
            .field("layout", &self.layout)
            .field("monotonicity", &self.monotonicity)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl GameSpec {
    pub fn new(layout: ActionLayout, model: impl CostModel + 'static) -> Self {
        Self {
            layout,
            model: Arc::new(model),
            monotonicity: None,
            lipschitz: None,
        }
    }

    /// Strong-monotonicity constant `mu` in `(y-y')^T (F(y)-F(y')) >= mu/2 |y-y'|^2`.
    pub fn with_monotonicity(mut self, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::Contract(format!("monotonicity constant must be positive, got {mu}")));
        }
        self.monotonicity = Some(mu);
        Ok(self)
    }

    pub fn with_lipschitz(mut self, theta: f64) -> Result<Self> {
        if !(theta > 0.0) {
            return Err(Error::Contract(format!("Lipschitz constant must be positive, got {theta}")));
        }
        self.lipschitz = Some(theta);
        Ok(self)
    }

    pub fn layout(&self) -> &ActionLayout {
        &self.layout
    }

    pub fn n_players(&self) -> usize {
        self.layout.n_players()
    }

    pub fn total_dim(&self) -> usize {
        self.layout.total()
    }

    pub fn monotonicity(&self) -> Option<f64> {
        self.monotonicity
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    fn check_player(&self, player: usize) -> Result<()> {
        if player < self.n_players() {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "player index {player} out of range for {} players",
                self.n_players()
            )))
        }
    }

    pub fn cost(&self, player: usize, y: &DVector<f64>) -> Result<f64> {
        self.check_player(player)?;
        check_dim("cost", self.total_dim(), y.len())?;
        Ok(self.model.cost(player, y))
    }

    pub fn partial_gradient(&self, player: usize, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_player(player)?;
        check_dim("partial gradient", self.total_dim(), y.len())?;
        let g = self.model.partial_gradient(player, y);
        check_dim("partial gradient output", self.layout.dim(player), g.len())?;
        Ok(g)
    }

    /// Stacked partial gradients `F(y) = col(grad_i J_i(y))`.
    pub fn pseudo_gradient(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("pseudo-gradient", self.total_dim(), y.len())?;
        let mut out = DVector::zeros(self.total_dim());
        for i in 0..self.n_players() {
            let g = self.partial_gradient(i, y)?;
            out.rows_mut(self.layout.range(i).start, g.len()).copy_from(&g);
        }
        Ok(out)
    }
}
