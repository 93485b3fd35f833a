use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Affine,
    ConvexSmooth,
}

/// The shared constraint map `g: R^m -> R^p` and its gradients.
pub trait ConstraintModel: Send + Sync {
    fn count(&self) -> usize;
    fn value(&self, y: &DVector<f64>) -> DVector<f64>;
    /// Gradient of constraint `l` with respect to the full joint action.
    fn gradient(&self, l: usize, y: &DVector<f64>) -> DVector<f64>;
}

struct NoConstraints;

impl ConstraintModel for NoConstraints {
    fn count(&self) -> usize {
        0
    }
    fn value(&self, _y: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }
    fn gradient(&self, _l: usize, y: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(y.len())
    }
}

/// Constraints `g(y) <= 0` with a strictly feasible Slater witness.
#[derive(Clone)]
pub struct ConstraintSet {
    dim: usize,
    model: Arc<dyn ConstraintModel>,
    kinds: Vec<ConstraintKind>,
    slater: DVector<f64>,
    sampling_box: Vec<(f64, f64)>,
}

impl fmt::Debug for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintSet")
            .field("dim", &self.dim)
            .field("kinds", &self.kinds)
            .field("slater", &self.slater.as_slice())
            .finish_non_exhaustive()
    }
}

impl ConstraintSet {
    /// Builds a constraint set, rejecting a witness that is not strictly feasible.
    ///
    /// The default sampling box is the witness +/- 1 in each coordinate.
    pub fn new(
        model: impl ConstraintModel + 'static,
        kinds: Vec<ConstraintKind>,
        slater: DVector<f64>,
    ) -> Result<Self> {
        let p = model.count();
        check_dim("constraint kinds", p, kinds.len())?;
        let g = model.value(&slater);
        check_dim("constraint value", p, g.len())?;
        let violated: Vec<usize> = (0..p).filter(|&l| !(g[l] < 0.0)).collect();
        if !violated.is_empty() {
            return Err(Error::InteriorViolation { indices: violated });
        }
        let sampling_box = slater.iter().map(|&c| (c - 1.0, c + 1.0)).collect();
        Ok(Self {
            dim: slater.len(),
            model: Arc::new(model),
            kinds,
            slater,
            sampling_box,
        })
    }

    /// The empty constraint set on `R^dim` (`p = 0`).
    pub fn unconstrained(dim: usize) -> Self {
        Self {
            dim,
            model: Arc::new(NoConstraints),
            kinds: Vec::new(),
            slater: DVector::zeros(dim),
            sampling_box: vec![(-1.0, 1.0); dim],
        }
    }

    /// Box from which random points are drawn by the sampling diagnostics.
    pub fn with_sampling_box(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        check_dim("sampling box", self.dim, bounds.len())?;
        if bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Contract("sampling box bounds must satisfy lo < hi".into()));
        }
        self.sampling_box = bounds;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_constraints(&self) -> usize {
        self.kinds.len()
    }

    pub fn kinds(&self) -> &[ConstraintKind] {
        &self.kinds
    }

    pub fn slater_point(&self) -> &DVector<f64> {
        &self.slater
    }

    pub fn sampling_box(&self) -> &[(f64, f64)] {
        &self.sampling_box
    }

    pub fn value(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("constraint value", self.dim, y.len())?;
        Ok(self.model.value(y))
    }

    pub fn gradient(&self, l: usize, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("constraint gradient", self.dim, y.len())?;
        if l >= self.n_constraints() {
            return Err(Error::Contract(format!(
                "constraint index {l} out of range for {} constraints",
                self.n_constraints()
            )));
        }
        Ok(self.model.gradient(l, y))
    }

    /// Margins `-g(y)`; positive entries are strictly satisfied.
    pub fn margins(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(-self.value(y)?)
    }

    /// Smallest margin and the constraint attaining it (`None` when `p = 0`).
    pub fn min_margin(&self, y: &DVector<f64>) -> Result<(f64, Option<usize>)> {
        let m = self.margins(y)?;
        Ok(m.iter()
            .enumerate()
            .fold((f64::INFINITY, None), |(best, arg), (l, &v)| {
                if v < best || v.is_nan() {
                    (v, Some(l))
                } else {
                    (best, arg)
                }
            }))
    }

    pub fn is_strictly_feasible(&self, y: &DVector<f64>) -> bool {
        match self.value(y) {
            Ok(g) => g.iter().all(|&v| v < 0.0),
            Err(_) => false,
        }
    }

    pub fn is_feasible(&self, y: &DVector<f64>) -> bool {
        match self.value(y) {
            Ok(g) => g.iter().all(|&v| v <= 0.0),
            Err(_) => false,
        }
    }
}
