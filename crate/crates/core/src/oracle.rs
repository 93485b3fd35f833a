//! Reference solvers used to audit the dynamics: damped Newton on the
//! penalized equilibrium condition, derivative-free best-response gaps, and
//! barrier continuation.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::game::{BarrierPenalty, ConstraintSet, GameSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub newton_tol: f64,
    pub max_iters: usize,
    pub fd_step: f64,
    /// Step shrink factor of the interior-preserving line search.
    pub backtrack: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_iters: 200,
            fd_step: 1e-6,
            backtrack: 0.5,
        }
    }
}

impl OracleConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.newton_tol > 0.0
            && self.max_iters > 0
            && self.fd_step > 0.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(format!("invalid oracle configuration {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub y: DVector<f64>,
    /// `|F(y) + grad phi(y)|` at `y`.
    pub residual: f64,
    pub iterations: usize,
    /// Every accepted iterate, starting with `y0`.
    pub iterates: Vec<DVector<f64>>,
}

fn penalized_residual(game: &GameSpec, pen: &BarrierPenalty, y: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(game.pseudo_gradient(y)? + pen.gradient(y)?)
}

/// Central-difference Jacobian of the residual. The step is shrunk when a
/// probe would leave the interior.
fn residual_jacobian(
    game: &GameSpec,
    pen: &BarrierPenalty,
    y: &DVector<f64>,
    step: f64,
) -> Result<DMatrix<f64>> {
    let cs = pen.constraints();
    let m = y.len();
    let mut jac = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut h = step * y[j].abs().max(1.0);
        let (plus, minus) = loop {
            let mut p = y.clone();
            let mut q = y.clone();
            p[j] += h;
            q[j] -= h;
            if cs.is_strictly_feasible(&p) && cs.is_strictly_feasible(&q) {
                break (p, q);
            }
            h *= 0.5;
            if h < 1e-14 {
                return Err(Error::Contract("cannot difference the residual inside the interior".into()));
            }
        };
        let col = (penalized_residual(game, pen, &plus)? - penalized_residual(game, pen, &minus)?) / (2.0 * h);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Damped Newton on `F(y) + grad phi(y) = 0` from a strictly interior `y0`.
/// Every accepted iterate is strictly interior.
pub fn solve_penalized_ne(
    game: &GameSpec,
    pen: &BarrierPenalty,
    y0: &DVector<f64>,
    cfg: &OracleConfig,
) -> Result<OracleSolution> {
    cfg.validate()?;
    check_dim("oracle start", game.total_dim(), y0.len())?;
    let cs = pen.constraints();
    if !cs.is_strictly_feasible(y0) {
        let (margin, constraint) = cs.min_margin(y0)?;
        return Err(Error::InfeasibleStart { constraint, margin });
    }
    let mut y = y0.clone();
    let mut r = penalized_residual(game, pen, &y)?;
    let mut iterates = vec![y.clone()];
    for it in 0..cfg.max_iters {
        let norm = r.norm();
        if norm <= cfg.newton_tol {
            return Ok(OracleSolution {
                y,
                residual: norm,
                iterations: it,
                iterates,
            });
        }
        let jac = residual_jacobian(game, pen, &y, cfg.fd_step)?;
        let dir = jac.lu().solve(&(-&r)).unwrap_or_else(|| -&r);
        let mut t = 1.0;
        let mut best: Option<(DVector<f64>, DVector<f64>, f64)> = None;
        for _ in 0..80 {
            let trial = &y + &dir * t;
            if cs.is_strictly_feasible(&trial) {
                let rt = penalized_residual(game, pen, &trial)?;
                let nt = rt.norm();
                if nt <= (1.0 - 1e-4 * t) * norm {
                    best = Some((trial, rt, nt));
                    break;
                }
                if nt < best.as_ref().map_or(norm, |b| b.2) {
                    best = Some((trial, rt, nt));
                }
            }
            t *= cfg.backtrack;
        }
        match best {
            Some((trial, rt, _)) => {
                debug_assert!(cs.is_strictly_feasible(&trial));
                y = trial;
                r = rt;
                iterates.push(y.clone());
            }
            None => {
                return Err(Error::NoConvergence {
                    iterations: it,
                    residual: norm,
                    rho: Some(pen.rho()),
                })
            }
        }
    }
    let norm = r.norm();
    if norm <= cfg.newton_tol {
        return Ok(OracleSolution {
            y,
            residual: norm,
            iterations: cfg.max_iters,
            iterates,
        });
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iters,
        residual: norm,
        rho: Some(pen.rho()),
    })
}

/// Central differences of a scalar field, one coordinate at a time.
pub fn finite_diff_gradient<F>(f: F, y: &DVector<f64>, step: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    DVector::from_fn(y.len(), |j, _| {
        let mut p = y.clone();
        let mut q = y.clone();
        p[j] += step;
        q[j] -= step;
        (f(&p) - f(&q)) / (2.0 * step)
    })
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const SLICE_CAP: f64 = 1e6;

/// Edge `[lo, hi]` of the convex feasible slice through `y` along coordinate `c`.
fn slice_interval(cs: &ConstraintSet, y: &DVector<f64>, c: usize) -> (f64, f64) {
    let feasible = |t: f64| {
        let mut p = y.clone();
        p[c] = t;
        cs.is_feasible(&p)
    };
    let edge = |dir: f64| {
        let mut inside = y[c];
        let mut s = 1e-3;
        let mut outside = None;
        while s <= SLICE_CAP {
            let t = y[c] + dir * s;
            if feasible(t) {
                inside = t;
                s *= 2.0;
            } else {
                outside = Some(t);
                break;
            }
        }
        let Some(mut out) = outside else {
            return inside;
        };
        for _ in 0..200 {
            let mid = 0.5 * (inside + out);
            if mid == inside || mid == out {
                break;
            }
            if feasible(mid) {
                inside = mid;
            } else {
                out = mid;
            }
        }
        inside
    };
    (edge(-1.0), edge(1.0))
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (b - a) > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        }
    }
    let candidates = [(a, f(a)), (b, f(b)), (x1, f1), (x2, f2)];
    candidates.into_iter().fold((a, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
}

/// Compass search over a vector action, staying inside the feasible slice.
fn pattern_search<F: Fn(&DVector<f64>) -> f64>(
    f: F,
    feasible: impl Fn(&DVector<f64>) -> bool,
    start: DVector<f64>,
    tol: f64,
) -> f64 {
    let mut x = start;
    let mut fx = f(&x);
    let mut step = 1.0;
    while step > tol {
        let mut improved = false;
        for c in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut p = x.clone();
                p[c] += dir * step;
                if feasible(&p) {
                    let fp = f(&p);
                    if fp < fx {
                        x = p;
                        fx = fp;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    fx
}

/// `J_i(y) - min_{y_i feasible} J_i(y_i, y_{-i})` for every player, found
/// without gradients. `resolution` is the search tolerance on the action.
pub fn best_response_gap(
    game: &GameSpec,
    cs: &ConstraintSet,
    y: &DVector<f64>,
    resolution: f64,
) -> Result<Vec<f64>> {
    check_dim("joint action", game.total_dim(), y.len())?;
    if !cs.is_feasible(y) {
        return Err(Error::Contract("best-response slice of an infeasible point is empty".into()));
    }
    if !(resolution > 0.0) {
        return Err(Error::Contract("search resolution must be positive".into()));
    }
    let layout = game.layout();
    let mut gaps = Vec::with_capacity(layout.n_players());
    for i in 0..layout.n_players() {
        let here = game.cost(i, y)?;
        let range = layout.range(i);
        let found = if range.len() == 1 {
            let c = range.start;
            let (lo, hi) = slice_interval(cs, y, c);
            let cost = |t: f64| {
                let mut p = y.clone();
                p[c] = t;
                game.cost(i, &p).unwrap_or(f64::INFINITY)
            };
            golden_section(cost, lo, hi, resolution).1
        } else {
            let embed = |v: &DVector<f64>| {
                let mut p = y.clone();
                p.rows_mut(range.start, range.len()).copy_from(v);
                p
            };
            pattern_search(
                |v| game.cost(i, &embed(v)).unwrap_or(f64::INFINITY),
                |v| cs.is_feasible(&embed(v)),
                layout.block(y, i),
                resolution,
            )
        };
        gaps.push((here - found.min(here)).max(0.0));
    }
    Ok(gaps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub rho: f64,
    pub y: DVector<f64>,
    pub multipliers: DVector<f64>,
    pub residual: f64,
}

/// Warm-started continuation over a descending list of barrier weights.
pub fn barrier_path(
    game: &GameSpec,
    cs: &ConstraintSet,
    rhos: &[f64],
    y0: &DVector<f64>,
    cfg: &OracleConfig,
) -> Result<Vec<PathPoint>> {
    if rhos.is_empty() || rhos.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Contract("barrier weights must be positive".into()));
    }
    if rhos.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Contract("barrier weights must be strictly descending".into()));
    }
    let mut start = y0.clone();
    let mut out = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let pen = BarrierPenalty::new(rho, cs.clone())?;
        let sol = solve_penalized_ne(game, &pen, &start, cfg)?;
        let multipliers = pen.implied_multipliers(&sol.y)?;
        start = sol.y.clone();
        out.push(PathPoint {
            rho,
            y: sol.y,
            multipliers,
            residual: sol.residual,
        });
    }
    Ok(out)
}
