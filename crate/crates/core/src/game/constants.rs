use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ConstraintSet, GameSpec};
use crate::error::{Error, Result};

/// Sampled monotonicity and Lipschitz constants of the pseudo-gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameConstants {
    /// `min 2 (y-y')^T (F(y)-F(y')) / |y-y'|^2` over sampled pairs.
    pub mu: f64,
    /// `max |F(y)-F(y')| / |y-y'|` over sampled pairs.
    pub theta1: f64,
    pub pairs: usize,
    /// Set when `mu <= 0`: strong monotonicity is likely violated.
    pub monotonicity_warning: bool,
}

/// Draws uniformly from the constraint set's sampling box and keeps the first
/// strictly feasible point.
pub fn sample_strictly_feasible<R: Rng>(
    cs: &ConstraintSet,
    rng: &mut R,
    max_tries: usize,
) -> Option<DVector<f64>> {
    for _ in 0..max_tries {
        let y = DVector::from_iterator(
            cs.dim(),
            cs.sampling_box().iter().map(|&(lo, hi)| rng.random_range(lo..hi)),
        );
        if cs.is_strictly_feasible(&y) {
            return Some(y);
        }
    }
    None
}

/// Estimates `mu` and `theta_1` from `sample_count` random strictly feasible
/// pairs. Deterministic for a given seed.
pub fn estimate_game_constants(
    game: &GameSpec,
    cs: &ConstraintSet,
    sample_count: usize,
    seed: u64,
) -> Result<GameConstants> {
    if sample_count == 0 {
        return Err(Error::Contract("sample_count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu = f64::INFINITY;
    let mut theta1: f64 = 0.0;
    let mut pairs = 0;
    while pairs < sample_count {
        let (Some(a), Some(b)) = (
            sample_strictly_feasible(cs, &mut rng, 10_000),
            sample_strictly_feasible(cs, &mut rng, 10_000),
        ) else {
            return Err(Error::Contract(
                "could not draw strictly feasible samples from the sampling box".into(),
            ));
        };
        let dy = &a - &b;
        let dist2 = dy.norm_squared();
        if dist2 == 0.0 {
            continue;
        }
        let df = game.pseudo_gradient(&a)? - game.pseudo_gradient(&b)?;
        mu = mu.min(2.0 * dy.dot(&df) / dist2);
        theta1 = theta1.max(df.norm() / dist2.sqrt());
        pairs += 1;
    }
    if !(mu > 0.0) {
        log::warn!("sampled monotonicity constant {mu:e} is not positive");
    }
    Ok(GameConstants {
        mu,
        theta1,
        pairs,
        monotonicity_warning: !(mu > 0.0),
    })
}
