//! Agent dynamics `x_i' = f_i(x_i) + G_i u_i`, `y_i = G_i^T grad V_i(x_i)`.
//!
//! Every catalog plant is equilibrium-independent passive with zero
//! equilibrium input: for any output `ybar` the regulator state `pi(ybar)`
//! is an equilibrium producing that output. The storage potential `V_i` is
//! only needed by [`eip_probe`]; the closed loops use the drift, input matrix
//! and output map directly.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::game::ActionLayout;

/// Odd, strongly monotone spring force `psi` with `psi(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpringLaw {
    /// `psi(s) = s + atan(s)`.
    LinearPlusAtan,
    /// `psi(s) = stiffness * s`.
    Linear { stiffness: f64 },
}

impl SpringLaw {
    pub fn force(self, s: f64) -> f64 {
        match self {
            SpringLaw::LinearPlusAtan => s + s.atan(),
            SpringLaw::Linear { stiffness } => stiffness * s,
        }
    }

    /// `int_0^s psi`.
    pub fn potential(self, s: f64) -> f64 {
        match self {
            SpringLaw::LinearPlusAtan => 0.5 * s * s + s * s.atan() - 0.5 * (s * s).ln_1p(),
            SpringLaw::Linear { stiffness } => 0.5 * stiffness * s * s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlantKind {
    /// `y' = u`.
    Integrator,
    /// PI controller in cascade with a first-order lag:
    /// `x1' = -v x1 + k x2 + u`, `x2' = u`, `y = x1`.
    PiCascade { leak: f64, integral_gain: f64 },
    /// Body of mass `M` driven by `u`, coupled to an appendage of mass `m`
    /// through a spring `psi` and damper `gamma`; state is
    /// (spring stretch, body velocity, appendage velocity), output is body velocity.
    FlexibleRobot {
        body_mass: f64,
        appendage_mass: f64,
        damping: f64,
        spring: SpringLaw,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    kind: PlantKind,
    action_dim: usize,
    state_dim: usize,
    input_matrix: DMatrix<f64>,
}

fn full_column_rank(g: &DMatrix<f64>) -> bool {
    let gram = g.transpose() * g;
    gram.rank(1e-12) == g.ncols()
}

impl PlantModel {
    fn build(kind: PlantKind, action_dim: usize, input_matrix: DMatrix<f64>) -> Result<Self> {
        if action_dim == 0 {
            return Err(Error::Contract("plant action dimension must be at least 1".into()));
        }
        if !full_column_rank(&input_matrix) {
            return Err(Error::Contract("plant input matrix must have full column rank".into()));
        }
        Ok(Self {
            kind,
            action_dim,
            state_dim: input_matrix.nrows(),
            input_matrix,
        })
    }

    pub fn integrator(action_dim: usize) -> Result<Self> {
        Self::build(
            PlantKind::Integrator,
            action_dim,
            DMatrix::identity(action_dim, action_dim),
        )
    }

    /// Requires `0 < integral_gain < leak`.
    pub fn pi_cascade(action_dim: usize, leak: f64, integral_gain: f64) -> Result<Self> {
        if !(0.0 < integral_gain && integral_gain < leak) {
            return Err(Error::Contract(format!(
                "PI cascade needs 0 < k < v, got v = {leak}, k = {integral_gain}"
            )));
        }
        let mut g = DMatrix::zeros(2 * action_dim, action_dim);
        for j in 0..action_dim {
            g[(j, j)] = 1.0;
            g[(action_dim + j, j)] = 1.0;
        }
        Self::build(
            PlantKind::PiCascade {
                leak,
                integral_gain,
            },
            action_dim,
            g,
        )
    }

    /// Input column is `(0, 1/M, 0)` so the output `x2` equals `G^T grad V`.
    pub fn flexible_robot(
        body_mass: f64,
        appendage_mass: f64,
        damping: f64,
        spring: SpringLaw,
    ) -> Result<Self> {
        if !(body_mass > 0.0 && appendage_mass > 0.0 && damping > 0.0) {
            return Err(Error::Contract(format!(
                "robot masses and damping must be positive, got M = {body_mass}, m = {appendage_mass}, gamma = {damping}"
            )));
        }
        if let SpringLaw::Linear { stiffness } = spring {
            if !(stiffness > 0.0) {
                return Err(Error::Contract("linear spring stiffness must be positive".into()));
            }
        }
        let mut g = DMatrix::zeros(3, 1);
        g[(1, 0)] = 1.0 / body_mass;
        Self::build(
            PlantKind::FlexibleRobot {
                body_mass,
                appendage_mass,
                damping,
                spring,
            },
            1,
            g,
        )
    }

    pub fn kind(&self) -> PlantKind {
        self.kind
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn input_matrix(&self) -> &DMatrix<f64> {
        &self.input_matrix
    }

    pub fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            PlantKind::Integrator => DVector::zeros(self.state_dim),
            PlantKind::PiCascade {
                leak,
                integral_gain,
            } => {
                let m = self.action_dim;
                let mut d = DVector::zeros(2 * m);
                for j in 0..m {
                    d[j] = -leak * x[j] + integral_gain * x[m + j];
                }
                d
            }
            PlantKind::FlexibleRobot {
                body_mass,
                appendage_mass,
                damping,
                spring,
            } => {
                let rel = x[1] - x[2];
                let force = spring.force(x[0]) + damping * rel;
                DVector::from_column_slice(&[rel, -force / body_mass, force / appendage_mass])
            }
        }
    }

    pub fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            PlantKind::Integrator => x.clone(),
            PlantKind::PiCascade { .. } => x.rows(0, self.action_dim).into_owned(),
            PlantKind::FlexibleRobot { .. } => DVector::from_element(1, x[1]),
        }
    }

    /// Regulator map `pi(ybar)`: equilibrium state with output `ybar` and zero input.
    pub fn regulator(&self, ybar: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            PlantKind::Integrator => ybar.clone(),
            PlantKind::PiCascade {
                leak,
                integral_gain,
            } => {
                let m = self.action_dim;
                let mut x = DVector::zeros(2 * m);
                for j in 0..m {
                    x[j] = ybar[j];
                    x[m + j] = leak / integral_gain * ybar[j];
                }
                x
            }
            PlantKind::FlexibleRobot { .. } => DVector::from_column_slice(&[0.0, ybar[0], ybar[0]]),
        }
    }

    /// Storage potential `V_i(x)` when the catalog states one.
    pub fn storage(&self, x: &DVector<f64>) -> Option<f64> {
        match self.kind {
            PlantKind::Integrator => Some(0.5 * x.norm_squared()),
            PlantKind::PiCascade { .. } => None,
            PlantKind::FlexibleRobot {
                body_mass,
                appendage_mass,
                spring,
                ..
            } => Some(
                spring.potential(x[0]) + 0.5 * body_mass * x[1] * x[1] + 0.5 * appendage_mass * x[2] * x[2],
            ),
        }
    }

    pub fn storage_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        match self.kind {
            PlantKind::Integrator => Some(x.clone()),
            PlantKind::PiCascade { .. } => None,
            PlantKind::FlexibleRobot {
                body_mass,
                appendage_mass,
                spring,
                ..
            } => Some(DVector::from_column_slice(&[
                spring.force(x[0]),
                body_mass * x[1],
                appendage_mass * x[2],
            ])),
        }
    }

    /// `f(x) + G u`.
    pub fn vector_field(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.drift(x) + &self.input_matrix * u
    }
}

/// Outcome of sampling the EIP dissipation inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct EipReport {
    /// Largest `max(0, lhs - rhs)` over the samples.
    pub max_violation: f64,
    /// Index of the sample attaining it.
    pub worst_sample: Option<usize>,
    pub samples: usize,
}

/// Checks `grad V^{xbar}(x)^T (f(x) + G u) <= (y - ybar)^T u` for each sample,
/// with `V^{xbar}(x) = V(x) - V(xbar) - grad V(xbar)^T (x - xbar)` and zero
/// equilibrium input.
pub fn eip_probe(
    plant: &PlantModel,
    xbar: &DVector<f64>,
    samples: &[(DVector<f64>, DVector<f64>)],
) -> Result<EipReport> {
    check_dim("EIP reference state", plant.state_dim(), xbar.len())?;
    let grad_bar = plant.storage_gradient(xbar).ok_or_else(|| {
        Error::Unsupported("EIP probe needs a storage potential for this plant".into())
    })?;
    let ybar = plant.output(xbar);
    let mut max_violation = 0.0f64;
    let mut worst_sample = None;
    for (k, (x, u)) in samples.iter().enumerate() {
        check_dim("EIP sample state", plant.state_dim(), x.len())?;
        check_dim("EIP sample input", plant.action_dim(), u.len())?;
        // storage_gradient is Some here because it was Some at xbar.
        let grad = plant.storage_gradient(x).unwrap_or_else(|| DVector::zeros(x.len()));
        let lhs = (grad - &grad_bar).dot(&plant.vector_field(x, u));
        let rhs = (plant.output(x) - &ybar).dot(u);
        let violation = lhs - rhs;
        if violation > max_violation {
            max_violation = violation;
            worst_sample = Some(k);
        }
    }
    Ok(EipReport {
        max_violation,
        worst_sample,
        samples: samples.len(),
    })
}

/// Block-diagonal stack of agent plants.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedPlant {
    agents: Vec<PlantModel>,
    state_offsets: Vec<usize>,
    layout: ActionLayout,
}

impl StackedPlant {
    pub fn new(agents: Vec<PlantModel>) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::Contract("cannot stack an empty list of plants".into()));
        }
        let mut state_offsets = vec![0];
        for a in &agents {
            state_offsets.push(state_offsets.last().unwrap() + a.state_dim());
        }
        let layout = ActionLayout::new(agents.iter().map(PlantModel::action_dim).collect())?;
        Ok(Self {
            agents,
            state_offsets,
            layout,
        })
    }

    pub fn agents(&self) -> &[PlantModel] {
        &self.agents
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn state_dim(&self) -> usize {
        *self.state_offsets.last().unwrap()
    }

    pub fn action_dim(&self) -> usize {
        self.layout.total()
    }

    pub fn action_layout(&self) -> &ActionLayout {
        &self.layout
    }

    pub fn state_range(&self, i: usize) -> Range<usize> {
        self.state_offsets[i]..self.state_offsets[i + 1]
    }

    fn state_block(&self, x: &DVector<f64>, i: usize) -> DVector<f64> {
        DVector::from_column_slice(&x.as_slice()[self.state_range(i)])
    }

    pub fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.state_dim());
        for (i, a) in self.agents.iter().enumerate() {
            let r = self.state_range(i);
            out.rows_mut(r.start, r.len()).copy_from(&a.drift(&self.state_block(x, i)));
        }
        out
    }

    pub fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.action_dim());
        for (i, a) in self.agents.iter().enumerate() {
            let r = self.layout.range(i);
            out.rows_mut(r.start, r.len()).copy_from(&a.output(&self.state_block(x, i)));
        }
        out
    }

    pub fn regulator(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.state_dim());
        for (i, a) in self.agents.iter().enumerate() {
            let r = self.state_range(i);
            out.rows_mut(r.start, r.len())
                .copy_from(&a.regulator(&self.layout.block(y, i)));
        }
        out
    }

    /// `G = blkdiag(G_i)`.
    pub fn input_matrix(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.state_dim(), self.action_dim());
        for (i, a) in self.agents.iter().enumerate() {
            let rs = self.state_range(i);
            let ra = self.layout.range(i);
            g.view_mut((rs.start, ra.start), (rs.len(), ra.len()))
                .copy_from(a.input_matrix());
        }
        g
    }

    /// `f(x) + G u`, evaluated blockwise.
    pub fn vector_field(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.state_dim());
        for (i, a) in self.agents.iter().enumerate() {
            let r = self.state_range(i);
            let ui = self.layout.block(u, i);
            out.rows_mut(r.start, r.len())
                .copy_from(&a.vector_field(&self.state_block(x, i), &ui));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    #[test]
    fn integrator_examples() {
        let p = PlantModel::integrator(1).unwrap();
        assert_eq!(p.regulator(&dvector![3.0]), dvector![3.0]);
        assert_eq!(p.drift(&dvector![-4.2]), dvector![0.0]);
        assert_eq!(p.output(&dvector![1.5]), dvector![1.5]);
    }

    #[test]
    fn pi_cascade_regulator_solves_drift() {
        let p = PlantModel::pi_cascade(1, 1.0, 0.5).unwrap();
        let x = p.regulator(&dvector![2.0]);
        assert_eq!(x, dvector![2.0, 4.0]);
        assert_eq!(p.drift(&x), dvector![0.0, 0.0]);
        let z = dvector![0.3, -1.7];
        assert_eq!(p.drift(&(2.0 * &z)), 2.0 * p.drift(&z));
    }

    #[test]
    fn pi_cascade_rejects_bad_gains() {
        assert!(PlantModel::pi_cascade(1, 0.5, 0.5).is_err());
        assert!(PlantModel::pi_cascade(1, 1.0, 0.0).is_err());
        assert!(PlantModel::pi_cascade(1, 1.0, 2.0).is_err());
    }

    #[test]
    fn robot_examples() {
        let p = PlantModel::flexible_robot(1.0, 1.0, 1.0, SpringLaw::LinearPlusAtan).unwrap();
        let x = p.regulator(&dvector![3.0]);
        assert_eq!(x, dvector![0.0, 3.0, 3.0]);
        assert_eq!(p.drift(&x), dvector![0.0, 0.0, 0.0]);
        assert_eq!(p.drift(&dvector![0.0, 1.0, 0.0]), dvector![1.0, -1.0, 1.0]);
        assert_eq!(p.output(&dvector![5.0, 2.0, 7.0]), dvector![2.0]);
        assert!(PlantModel::flexible_robot(0.0, 1.0, 1.0, SpringLaw::LinearPlusAtan).is_err());
    }

    #[test]
    fn spring_potential_differentiates_to_force() {
        let s = SpringLaw::LinearPlusAtan;
        for &x in &[-2.0, -0.3, 0.0, 0.8, 3.1] {
            let h = 1e-5;
            let fd = (s.potential(x + h) - s.potential(x - h)) / (2.0 * h);
            assert_abs_diff_eq!(fd, s.force(x), epsilon = 1e-8);
        }
    }

    #[test]
    fn stacked_layouts() {
        let s = StackedPlant::new(vec![PlantModel::integrator(1).unwrap(); 2]).unwrap();
        assert_eq!((s.state_dim(), s.action_dim()), (2, 2));
        assert_eq!(s.input_matrix(), DMatrix::identity(2, 2));

        let s = StackedPlant::new(vec![
            PlantModel::integrator(1).unwrap(),
            PlantModel::pi_cascade(1, 1.0, 0.5).unwrap(),
        ])
        .unwrap();
        assert_eq!((s.state_dim(), s.action_dim()), (3, 2));
        let g = s.input_matrix();
        assert_eq!(g, nalgebra::dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 1.0]);
        assert_eq!(s.regulator(&dvector![1.5, 2.0]), dvector![1.5, 2.0, 4.0]);
        assert!(StackedPlant::new(vec![]).is_err());
    }

    #[test]
    fn eip_integrator_is_equality() {
        let p = PlantModel::integrator(2).unwrap();
        let xbar = dvector![0.5, -1.0];
        let samples = vec![(dvector![1.0, 2.0], dvector![-0.3, 0.7]), (xbar.clone(), dvector![0.0, 0.0])];
        let r = eip_probe(&p, &xbar, &samples).unwrap();
        assert_eq!(r.max_violation, 0.0);
    }

    #[test]
    fn eip_unsupported_for_pi_cascade() {
        let p = PlantModel::pi_cascade(1, 1.0, 0.5).unwrap();
        let err = eip_probe(&p, &dvector![0.0, 0.0], &[]).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }
}
