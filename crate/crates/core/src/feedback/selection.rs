use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::game::{sample_strictly_feasible, ActionLayout, ConstraintSet, GameSpec};
use crate::graph::CommGraph;

/// Action selector `R_i` and estimate selector `S_i` for one player.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMatrices {
    pub r: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

/// `R_i = [0 I 0]` picks player `i`'s slot out of a local view `y^i`;
/// `S_i` keeps every other slot in order.
pub fn selection_matrices(layout: &ActionLayout, player: usize) -> Result<SelectionMatrices> {
    if player >= layout.n_players() {
        return Err(Error::Contract(format!("player index {player} out of range")));
    }
    let m = layout.total();
    let own = layout.range(player);
    let mut r = DMatrix::zeros(own.len(), m);
    let mut s = DMatrix::zeros(m - own.len(), m);
    for (row, col) in own.clone().enumerate() {
        r[(row, col)] = 1.0;
    }
    for (row, col) in (0..m).filter(|c| !own.contains(c)).enumerate() {
        s[(row, col)] = 1.0;
    }
    Ok(SelectionMatrices { r, s })
}

/// Block-diagonal `R = blkdiag(R_i)` and `S = blkdiag(S_i)`.
pub fn stacked_selection(layout: &ActionLayout) -> Result<SelectionMatrices> {
    let n = layout.n_players();
    let m = layout.total();
    let mut r = DMatrix::zeros(m, n * m);
    let mut s = DMatrix::zeros(n * m - m, n * m);
    let mut srow = 0;
    for i in 0..n {
        let sel = selection_matrices(layout, i)?;
        r.view_mut((layout.range(i).start, i * m), (sel.r.nrows(), m)).copy_from(&sel.r);
        s.view_mut((srow, i * m), (sel.s.nrows(), m)).copy_from(&sel.s);
        srow += sel.s.nrows();
    }
    Ok(SelectionMatrices { r, s })
}

/// Index arithmetic for the estimate stack `y_{-i}` and the full stack
/// `bold y = col(y^1, ..., y^N)` with `y^i in R^m`.
///
/// Only `y_{-i}` is stored in closed-loop states; the full stack is rebuilt
/// as `R^T y + S^T y_{-i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateLayout {
    actions: ActionLayout,
    estimate_offsets: Vec<usize>,
}

impl EstimateLayout {
    pub fn new(actions: ActionLayout) -> Self {
        let m = actions.total();
        let mut estimate_offsets = vec![0];
        for i in 0..actions.n_players() {
            estimate_offsets.push(estimate_offsets[i] + m - actions.dim(i));
        }
        Self {
            actions,
            estimate_offsets,
        }
    }

    pub fn actions(&self) -> &ActionLayout {
        &self.actions
    }

    pub fn n_players(&self) -> usize {
        self.actions.n_players()
    }

    /// `N * m`.
    pub fn stack_dim(&self) -> usize {
        self.n_players() * self.actions.total()
    }

    /// `N * m - m`.
    pub fn estimates_dim(&self) -> usize {
        *self.estimate_offsets.last().unwrap()
    }

    /// Player `i`'s segment `y^i_{-i}` inside `y_{-i}`.
    pub fn estimate_range(&self, i: usize) -> Range<usize> {
        self.estimate_offsets[i]..self.estimate_offsets[i + 1]
    }

    /// Player `i`'s view `y^i` inside the full stack.
    pub fn view_range(&self, i: usize) -> Range<usize> {
        let m = self.actions.total();
        i * m..(i + 1) * m
    }

    pub fn view(&self, stack: &DVector<f64>, i: usize) -> DVector<f64> {
        DVector::from_column_slice(&stack.as_slice()[self.view_range(i)])
    }

    fn check_y(&self, y: &DVector<f64>) -> Result<()> {
        check_dim("joint action", self.actions.total(), y.len())
    }

    fn check_stack(&self, stack: &DVector<f64>) -> Result<()> {
        check_dim("estimate stack", self.stack_dim(), stack.len())
    }

    /// `bold y = R^T y + S^T y_{-i}`.
    pub fn reconstruct(&self, y: &DVector<f64>, estimates: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_y(y)?;
        check_dim("estimates", self.estimates_dim(), estimates.len())?;
        let m = self.actions.total();
        let mut stack = DVector::zeros(self.stack_dim());
        for i in 0..self.n_players() {
            let own = self.actions.range(i);
            let mut src = self.estimate_range(i).start;
            for c in 0..m {
                stack[i * m + c] = if own.contains(&c) {
                    y[c]
                } else {
                    src += 1;
                    estimates[src - 1]
                };
            }
        }
        Ok(stack)
    }

    /// `R bold y`: each player's own slot.
    pub fn actions_of(&self, stack: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_stack(stack)?;
        let m = self.actions.total();
        let mut y = DVector::zeros(m);
        for i in 0..self.n_players() {
            for c in self.actions.range(i) {
                y[c] = stack[i * m + c];
            }
        }
        Ok(y)
    }

    /// `S bold y`: every estimate slot.
    pub fn estimates_of(&self, stack: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_stack(stack)?;
        let m = self.actions.total();
        let mut out = DVector::zeros(self.estimates_dim());
        let mut k = 0;
        for i in 0..self.n_players() {
            let own = self.actions.range(i);
            for c in (0..m).filter(|c| !own.contains(c)) {
                out[k] = stack[i * m + c];
                k += 1;
            }
        }
        Ok(out)
    }

    /// `1_N (x) y`.
    pub fn consensus_stack(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_y(y)?;
        let m = self.actions.total();
        Ok(DVector::from_fn(self.stack_dim(), |k, _| y[k % m]))
    }

    /// `S (1_N (x) y)`: every estimate equal to the true action.
    pub fn consensus_estimates(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.estimates_of(&self.consensus_stack(y)?)
    }

    /// `|bold y - 1_N (x) y|` with `y = R bold y`.
    pub fn consensus_error(&self, stack: &DVector<f64>) -> Result<f64> {
        let y = self.actions_of(stack)?;
        Ok((stack - self.consensus_stack(&y)?).norm())
    }

    /// `(L (x) I_m) bold y`, blockwise `sum_{j in N_i} (y^i - y^j)`.
    pub fn laplacian_product(&self, graph: &CommGraph, stack: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_stack(stack)?;
        check_dim("graph nodes", self.n_players(), graph.n_nodes())?;
        let m = self.actions.total();
        let mut out = DVector::zeros(self.stack_dim());
        for i in 0..self.n_players() {
            for &j in graph.neighbors(i) {
                for c in 0..m {
                    out[i * m + c] += stack[i * m + c] - stack[j * m + c];
                }
            }
        }
        Ok(out)
    }
}

/// Extended pseudo-gradient `col(grad_i J_i(y_i, y^i_{-i}))`: each player's
/// partial gradient evaluated at its own view of the joint action.
pub fn extended_pseudo_gradient(game: &GameSpec, stack: &DVector<f64>) -> Result<DVector<f64>> {
    let est = EstimateLayout::new(game.layout().clone());
    check_dim("estimate stack", est.stack_dim(), stack.len())?;
    let layout = game.layout();
    let mut out = DVector::zeros(layout.total());
    for i in 0..layout.n_players() {
        let g = game.partial_gradient(i, &est.view(stack, i))?;
        out.rows_mut(layout.range(i).start, g.len()).copy_from(&g);
    }
    Ok(out)
}

/// Sampled Lipschitz constant `theta_2` of the extended pseudo-gradient,
/// drawing every local view from the strictly feasible set.
pub fn estimate_extended_lipschitz(
    game: &GameSpec,
    cs: &ConstraintSet,
    sample_count: usize,
    seed: u64,
) -> Result<f64> {
    let est = EstimateLayout::new(game.layout().clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Result<DVector<f64>> {
        let mut stack = DVector::zeros(est.stack_dim());
        for i in 0..est.n_players() {
            let v = sample_strictly_feasible(cs, rng, 10_000).ok_or_else(|| {
                Error::Contract("could not draw strictly feasible samples from the sampling box".into())
            })?;
            stack.rows_mut(est.view_range(i).start, v.len()).copy_from(&v);
        }
        Ok(stack)
    };
    let mut theta: f64 = 0.0;
    for _ in 0..sample_count {
        let a = draw(&mut rng)?;
        let b = draw(&mut rng)?;
        let d = (&a - &b).norm();
        if d == 0.0 {
            continue;
        }
        let df = extended_pseudo_gradient(game, &a)? - extended_pseudo_gradient(game, &b)?;
        theta = theta.max(df.norm() / d);
    }
    Ok(theta)
}
