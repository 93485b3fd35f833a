//! Built-in games and constraint families.

use nalgebra::{DMatrix, DVector};

use super::{ActionLayout, ConstraintKind, ConstraintModel, ConstraintSet, CostModel, GameSpec};
use crate::error::{Error, Result};

/// Affine constraints `g(y) = A y - b`.
#[derive(Debug, Clone)]
pub struct AffineConstraints {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl AffineConstraints {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                context: "affine constraint rows",
                expected: a.nrows(),
                actual: b.len(),
            });
        }
        Ok(Self { a, b })
    }

    /// `-y_j <= 0` for every coordinate.
    pub fn nonnegative(dim: usize) -> Self {
        Self {
            a: -DMatrix::identity(dim, dim),
            b: DVector::zeros(dim),
        }
    }

    /// Optional nonnegativity rows followed by one budget row `sum_j y_j <= total`.
    pub fn budget(dim: usize, total: f64, nonnegative: bool) -> Self {
        let rows = if nonnegative { dim + 1 } else { 1 };
        let mut a = DMatrix::zeros(rows, dim);
        let mut b = DVector::zeros(rows);
        if nonnegative {
            a.view_mut((0, 0), (dim, dim)).copy_from(&(-DMatrix::identity(dim, dim)));
        }
        a.row_mut(rows - 1).fill(1.0);
        b[rows - 1] = total;
        Self { a, b }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.b
    }
}

impl ConstraintModel for AffineConstraints {
    fn count(&self) -> usize {
        self.a.nrows()
    }

    fn value(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.a * y - &self.b
    }

    fn gradient(&self, l: usize, _y: &DVector<f64>) -> DVector<f64> {
        self.a.row(l).transpose()
    }
}

/// Neighbour-gap constraints `(y_i - y_{i-1})^2 - d^2 <= 0` with `y_0` fixed
/// to the leader's reference.
#[derive(Debug, Clone, Copy)]
pub struct LeaderFollowerConstraints {
    pub leader: f64,
    pub max_gap: f64,
    pub n: usize,
}

impl LeaderFollowerConstraints {
    fn gap(&self, y: &DVector<f64>, i: usize) -> f64 {
        let prev = if i == 0 { self.leader } else { y[i - 1] };
        y[i] - prev
    }
}

impl ConstraintModel for LeaderFollowerConstraints {
    fn count(&self) -> usize {
        self.n
    }

    fn value(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| {
            let d = self.gap(y, i);
            d * d - self.max_gap * self.max_gap
        })
    }

    fn gradient(&self, l: usize, y: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(y.len());
        let d = self.gap(y, l);
        g[l] = 2.0 * d;
        if l > 0 {
            g[l - 1] = -2.0 * d;
        }
        g
    }
}

/// `J_i = w (y_i - c_i)^2 + gamma * y_i * sum_{j != i} y_j` with scalar actions.
#[derive(Debug, Clone)]
pub struct QuadraticGame {
    pub weight: f64,
    pub targets: Vec<f64>,
    pub coupling: f64,
}

impl QuadraticGame {
    fn others(&self, i: usize, y: &DVector<f64>) -> f64 {
        y.sum() - y[i]
    }
}

impl CostModel for QuadraticGame {
    fn cost(&self, i: usize, y: &DVector<f64>) -> f64 {
        let d = y[i] - self.targets[i];
        self.weight * d * d + self.coupling * y[i] * self.others(i, y)
    }

    fn partial_gradient(&self, i: usize, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(
            1,
            2.0 * self.weight * (y[i] - self.targets[i]) + self.coupling * self.others(i, y),
        )
    }
}

/// Power-control game on a shared optical link:
/// `J_i = a_i y_i - b_i ln(1 + c_i y_i / (n_i + sum_{j != i} Gamma_ij y_j))`.
#[derive(Debug, Clone)]
pub struct OsnrGame {
    pub price: Vec<f64>,
    pub utility: Vec<f64>,
    pub gain: Vec<f64>,
    pub noise: Vec<f64>,
    pub coupling: DMatrix<f64>,
}

impl OsnrGame {
    /// Default `N`-channel parameters: prices evenly spaced in `[0.8, 1.2]`,
    /// `b = 1`, `c = 3`, `n^0 = 0.5`, `Gamma_ij = 0.05` off the diagonal.
    pub fn with_defaults(n: usize) -> Self {
        let price = if n == 1 {
            vec![1.0]
        } else {
            (0..n).map(|i| 0.8 + 0.4 * i as f64 / (n - 1) as f64).collect()
        };
        let coupling = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 0.05 });
        Self {
            price,
            utility: vec![1.0; n],
            gain: vec![3.0; n],
            noise: vec![0.5; n],
            coupling,
        }
    }

    /// Effective interference `n_i + sum_{j != i} Gamma_ij y_j`.
    pub fn interference(&self, i: usize, y: &DVector<f64>) -> f64 {
        let mut s = self.noise[i];
        for j in 0..y.len() {
            if j != i {
                s += self.coupling[(i, j)] * y[j];
            }
        }
        s
    }
}

impl CostModel for OsnrGame {
    fn cost(&self, i: usize, y: &DVector<f64>) -> f64 {
        let s = self.interference(i, y);
        self.price[i] * y[i] - self.utility[i] * (1.0 + self.gain[i] * y[i] / s).ln()
    }

    fn partial_gradient(&self, i: usize, y: &DVector<f64>) -> DVector<f64> {
        let s = self.interference(i, y);
        DVector::from_element(
            1,
            self.price[i] - self.utility[i] * self.gain[i] / (s + self.gain[i] * y[i]),
        )
    }
}

/// Velocity tracking along a chain: `J_i = (y_i - y_{i-1})^2`, `y_0` = leader.
#[derive(Debug, Clone, Copy)]
pub struct LeaderFollowerGame {
    pub leader: f64,
}

impl LeaderFollowerGame {
    fn gap(&self, i: usize, y: &DVector<f64>) -> f64 {
        let prev = if i == 0 { self.leader } else { y[i - 1] };
        y[i] - prev
    }
}

impl CostModel for LeaderFollowerGame {
    fn cost(&self, i: usize, y: &DVector<f64>) -> f64 {
        self.gap(i, y).powi(2)
    }

    fn partial_gradient(&self, i: usize, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, 2.0 * self.gap(i, y))
    }
}

/// Quadratic game with a shared budget `sum y <= budget` (and optionally `y >= 0`).
pub fn quadratic_budget(
    weight: f64,
    targets: Vec<f64>,
    coupling: f64,
    budget: f64,
    nonnegative: bool,
) -> Result<(GameSpec, ConstraintSet)> {
    let n = targets.len();
    if !(weight > 0.0) {
        return Err(Error::Contract(format!("quadratic weight must be positive, got {weight}")));
    }
    if !(budget > 0.0) {
        return Err(Error::Contract(format!("budget must be positive, got {budget}")));
    }
    let layout = ActionLayout::scalar(n)?;
    let game = GameSpec::new(
        layout,
        QuadraticGame {
            weight,
            targets,
            coupling,
        },
    );
    let model = AffineConstraints::budget(n, budget, nonnegative);
    let p = model.count();
    let witness = DVector::from_element(n, budget / (2.0 * n as f64));
    let lo = if nonnegative { 0.0 } else { -budget };
    let cs = ConstraintSet::new(model, vec![ConstraintKind::Affine; p], witness)?
        .with_sampling_box(vec![(lo, budget); n])?;
    Ok((game, cs))
}

/// `N`-channel power game with `y >= 0` and `sum y <= max_power`.
pub fn osnr(game: OsnrGame, max_power: f64) -> Result<(GameSpec, ConstraintSet)> {
    let n = game.price.len();
    if !(max_power > 0.0) {
        return Err(Error::Contract(format!("link power budget must be positive, got {max_power}")));
    }
    let layout = ActionLayout::scalar(n)?;
    let spec = GameSpec::new(layout, game);
    let model = AffineConstraints::budget(n, max_power, true);
    let witness = DVector::from_element(n, max_power / (2.0 * n as f64));
    let cs = ConstraintSet::new(model, vec![ConstraintKind::Affine; n + 1], witness)?
        .with_sampling_box(vec![(0.0, 2.0 * max_power / n as f64); n])?;
    Ok((spec, cs))
}

/// `n` followers behind a leader moving at `leader`, neighbour gaps below `max_gap`.
pub fn leader_follower(n: usize, leader: f64, max_gap: f64) -> Result<(GameSpec, ConstraintSet)> {
    if !(max_gap > 0.0) {
        return Err(Error::Contract(format!("maximum gap must be positive, got {max_gap}")));
    }
    let layout = ActionLayout::scalar(n)?;
    let spec = GameSpec::new(layout, LeaderFollowerGame { leader });
    let model = LeaderFollowerConstraints {
        leader,
        max_gap,
        n,
    };
    let witness = DVector::from_element(n, leader);
    let cs = ConstraintSet::new(model, vec![ConstraintKind::ConvexSmooth; n], witness)?
        .with_sampling_box(vec![(leader - max_gap, leader + max_gap); n])?;
    Ok((spec, cs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn two_player() -> GameSpec {
        GameSpec::new(
            ActionLayout::scalar(2).unwrap(),
            QuadraticGame {
                weight: 1.0,
                targets: vec![1.0, 1.0],
                coupling: 1.0,
            },
        )
    }

    #[test]
    fn quadratic_pseudo_gradient_examples() {
        let g = two_player();
        assert_eq!(g.pseudo_gradient(&dvector![0.0, 0.0]).unwrap(), dvector![-2.0, -2.0]);
        assert_eq!(g.pseudo_gradient(&dvector![1.0, 1.0]).unwrap(), dvector![1.0, 1.0]);
    }

    #[test]
    fn pseudo_gradient_rejects_wrong_dimension() {
        let g = two_player();
        assert!(matches!(
            g.pseudo_gradient(&dvector![0.0, 0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn osnr_indexing_puts_budget_last() {
        let (_, cs) = osnr(OsnrGame::with_defaults(10), 10.0).unwrap();
        assert_eq!(cs.n_constraints(), 11);
        let y = DVector::from_element(10, 1.0);
        let g = cs.value(&y).unwrap();
        assert_relative_eq!(g[10], 0.0);
        assert_relative_eq!(g[3], -1.0);
    }

    #[test]
    fn leader_follower_gradient_touches_two_players() {
        let c = LeaderFollowerConstraints {
            leader: 3.0,
            max_gap: 3.0,
            n: 5,
        };
        let y = dvector![1.0, 2.0, 3.0, 4.0, 5.0];
        let g2 = c.gradient(2, &y);
        assert_eq!(g2, dvector![0.0, -2.0, 2.0, 0.0, 0.0]);
        let g0 = c.gradient(0, &y);
        assert_eq!(g0, dvector![-4.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn default_osnr_prices_span_range() {
        let g = OsnrGame::with_defaults(10);
        assert_relative_eq!(g.price[0], 0.8);
        assert_relative_eq!(g.price[9], 1.2);
    }
}
