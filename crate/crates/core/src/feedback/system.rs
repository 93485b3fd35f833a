use std::ops::Range;

use nalgebra::DVector;

use super::selection::{extended_pseudo_gradient, EstimateLayout};
use crate::error::{check_dim, Error, Result};
use crate::game::{BarrierPenalty, BarrierValue, GameSpec};
use crate::graph::CommGraph;
use crate::plants::StackedPlant;

/// Default passivity-excess estimate for plants that admit any `beta > 0`.
pub const DEFAULT_BETA: f64 = 1e-3;
/// Default safety factor applied to `k* = beta / mu`.
pub const DEFAULT_K_SAFETY: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeedbackMode {
    FullInfo,
    PartialInfo,
    FullyDistributed { epsilon: f64, k: f64 },
}

impl FeedbackMode {
    pub fn validate(self) -> Result<Self> {
        if let FeedbackMode::FullyDistributed { epsilon, k } = self {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::Contract(format!("epsilon must be positive, got {epsilon}")));
            }
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::Contract(format!("gain k must be positive, got {k}")));
            }
        }
        Ok(self)
    }

    pub fn name(self) -> &'static str {
        match self {
            FeedbackMode::FullInfo => "full_info",
            FeedbackMode::PartialInfo => "partial_info",
            FeedbackMode::FullyDistributed { .. } => "distributed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    /// Filtered outputs `z`.
    Auxiliary,
    /// Estimate stack `y_{-i}`.
    Estimates,
    /// Plant states `x`.
    Plant,
}

/// Named slice of the closed-loop state vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub range: Range<usize>,
}

/// `k = safety * beta / mu`.
pub fn default_k(beta: f64, mu: f64, safety: f64) -> Result<f64> {
    if !(beta > 0.0 && mu > 0.0) || !(safety >= 1.0) {
        return Err(Error::Contract(format!(
            "default_k needs beta, mu > 0 and safety >= 1 (got {beta}, {mu}, {safety})"
        )));
    }
    Ok(safety * beta / mu)
}

/// Every estimate set to the matching component of `witness`.
pub fn initial_estimates(est: &EstimateLayout, witness: &DVector<f64>) -> Result<DVector<f64>> {
    est.consensus_estimates(witness)
}

/// An autonomous closed-loop system over stacked plants.
///
/// State order is `(z, y_{-i}, x)`, with absent segments omitted.
#[derive(Debug, Clone)]
pub struct ClosedLoopSystem {
    mode: FeedbackMode,
    plant: StackedPlant,
    game: GameSpec,
    barrier: BarrierPenalty,
    graph: Option<CommGraph>,
    est: EstimateLayout,
    segments: Vec<Segment>,
}

impl ClosedLoopSystem {
    fn check_parts(plant: &StackedPlant, game: &GameSpec, pen: &BarrierPenalty) -> Result<()> {
        if plant.action_layout() != game.layout() {
            return Err(Error::Contract(format!(
                "plant outputs {:?} do not match game action blocks {:?}",
                plant.action_layout().dims(),
                game.layout().dims()
            )));
        }
        check_dim("constraint dimension", game.total_dim(), pen.constraints().dim())
    }

    fn check_graph(game: &GameSpec, graph: &CommGraph) -> Result<()> {
        check_dim("graph nodes", game.n_players(), graph.n_nodes())?;
        if !graph.is_connected() {
            return Err(Error::Contract("communication graph is not connected".into()));
        }
        Ok(())
    }

    fn build(
        mode: FeedbackMode,
        plant: StackedPlant,
        game: GameSpec,
        barrier: BarrierPenalty,
        graph: Option<CommGraph>,
    ) -> Self {
        let est = EstimateLayout::new(game.layout().clone());
        let mut segments = Vec::new();
        let mut at = 0;
        let mut push = |kind, len: usize| {
            segments.push(Segment {
                kind,
                range: at..at + len,
            });
            at += len;
        };
        if matches!(mode, FeedbackMode::FullyDistributed { .. }) {
            push(SegmentKind::Auxiliary, est.actions().total());
        }
        if graph.is_some() {
            push(SegmentKind::Estimates, est.estimates_dim());
        }
        push(SegmentKind::Plant, plant.state_dim());
        Self {
            mode,
            plant,
            game,
            barrier,
            graph,
            est,
            segments,
        }
    }

    /// `x' = f(x) - G (F(y) + grad phi(y))`.
    pub fn assemble_full_info(plant: StackedPlant, game: GameSpec, pen: BarrierPenalty) -> Result<Self> {
        Self::check_parts(&plant, &game, &pen)?;
        Ok(Self::build(FeedbackMode::FullInfo, plant, game, pen, None))
    }

    /// Consensus estimates with the barrier evaluated on the true output.
    pub fn assemble_partial_info(
        plant: StackedPlant,
        game: GameSpec,
        pen: BarrierPenalty,
        graph: CommGraph,
    ) -> Result<Self> {
        Self::check_parts(&plant, &game, &pen)?;
        Self::check_graph(&game, &graph)?;
        Ok(Self::build(FeedbackMode::PartialInfo, plant, game, pen, Some(graph)))
    }

    /// Filtered outputs and estimates on the fast time scale `1/epsilon`,
    /// barrier evaluated on each player's own `(z_i, y^i_{-i})`.
    pub fn assemble_distributed(
        plant: StackedPlant,
        game: GameSpec,
        pen: BarrierPenalty,
        graph: CommGraph,
        epsilon: f64,
        k: f64,
    ) -> Result<Self> {
        let mode = FeedbackMode::FullyDistributed { epsilon, k }.validate()?;
        Self::check_parts(&plant, &game, &pen)?;
        Self::check_graph(&game, &graph)?;
        Ok(Self::build(mode, plant, game, pen, Some(graph)))
    }

    pub fn mode(&self) -> FeedbackMode {
        self.mode
    }

    pub fn plant(&self) -> &StackedPlant {
        &self.plant
    }

    pub fn game(&self) -> &GameSpec {
        &self.game
    }

    pub fn barrier(&self) -> &BarrierPenalty {
        &self.barrier
    }

    pub fn graph(&self) -> Option<&CommGraph> {
        self.graph.as_ref()
    }

    pub fn estimate_layout(&self) -> &EstimateLayout {
        &self.est
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn dim(&self) -> usize {
        self.segments.last().map_or(0, |s| s.range.end)
    }

    fn segment(&self, kind: SegmentKind) -> Option<Range<usize>> {
        self.segments.iter().find(|s| s.kind == kind).map(|s| s.range.clone())
    }

    fn slice(state: &DVector<f64>, r: Range<usize>) -> DVector<f64> {
        DVector::from_column_slice(&state.as_slice()[r])
    }

    fn check_state(&self, state: &DVector<f64>) -> Result<()> {
        check_dim("closed-loop state", self.dim(), state.len())
    }

    pub fn plant_state(&self, state: &DVector<f64>) -> DVector<f64> {
        Self::slice(state, self.segment(SegmentKind::Plant).unwrap())
    }

    pub fn estimates(&self, state: &DVector<f64>) -> Option<DVector<f64>> {
        self.segment(SegmentKind::Estimates).map(|r| Self::slice(state, r))
    }

    pub fn auxiliary(&self, state: &DVector<f64>) -> Option<DVector<f64>> {
        self.segment(SegmentKind::Auxiliary).map(|r| Self::slice(state, r))
    }

    /// The measured joint output `y = h(x)`.
    pub fn output(&self, state: &DVector<f64>) -> DVector<f64> {
        self.plant.output(&self.plant_state(state))
    }

    /// Full estimate stack `R^T y + S^T y_{-i}` in modes 2 and 3.
    pub fn stack(&self, state: &DVector<f64>) -> Result<Option<DVector<f64>>> {
        self.check_state(state)?;
        match self.estimates(state) {
            Some(e) => Ok(Some(self.est.reconstruct(&self.output(state), &e)?)),
            None => Ok(None),
        }
    }

    /// Assembles a state from its segments. `z` and `estimates` must be
    /// supplied exactly when the mode has them.
    pub fn compose_state(
        &self,
        z: Option<&DVector<f64>>,
        estimates: Option<&DVector<f64>>,
        x: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.dim());
        for seg in &self.segments {
            let part = match seg.kind {
                SegmentKind::Auxiliary => z,
                SegmentKind::Estimates => estimates,
                SegmentKind::Plant => Some(x),
            }
            .ok_or_else(|| Error::Contract(format!("{:?} segment required in {} mode", seg.kind, self.mode.name())))?;
            check_dim("state segment", seg.range.len(), part.len())?;
            out.rows_mut(seg.range.start, seg.range.len()).copy_from(part);
        }
        Ok(out)
    }

    /// Plants at `pi(y0)`, estimates at the Slater witness, and `z = y0`.
    ///
    /// Fails when any point the barrier will be evaluated on is not strictly
    /// feasible; in mode 3 that includes each `(z_i(0), y^i_{-i}(0))`.
    pub fn initial_state(&self, y0: &DVector<f64>) -> Result<DVector<f64>> {
        let witness = self.barrier.constraints().slater_point().clone();
        self.initial_state_with(y0, &initial_estimates(&self.est, &witness)?)
    }

    /// Like [`initial_state`](Self::initial_state) with explicit estimates.
    pub fn initial_state_with(&self, y0: &DVector<f64>, estimates: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self.plant.regulator(y0);
        let state = self.compose_state(Some(y0), Some(estimates), &x)?;
        let cs = self.barrier.constraints();
        for (k, p) in self.interior_points(&state)?.iter().enumerate() {
            if !cs.is_strictly_feasible(p) {
                let (margin, constraint) = cs.min_margin(p)?;
                let who = if k == 0 {
                    "initial output".to_string()
                } else {
                    format!("player {k}'s filtered output and initial estimates")
                };
                return Err(Error::Contract(format!(
                    "{who} not strictly feasible: constraint {} has margin {margin:e}",
                    constraint.map_or(0, |c| c + 1)
                )));
            }
        }
        Ok(state)
    }

    /// Designated equilibrium at `y*`: `pi(y*)` with consensus estimates and `z = y*`.
    pub fn equilibrium(&self, y_star: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("equilibrium output", self.game.total_dim(), y_star.len())?;
        let est = self.est.consensus_estimates(y_star)?;
        self.compose_state(Some(y_star), Some(&est), &self.plant.regulator(y_star))
    }

    /// Player `i`'s own barrier argument in mode 3: its view `y^i` with slot
    /// `i` replaced by `z_i`.
    fn distributed_views(&self, z: &DVector<f64>, stack: &DVector<f64>) -> Vec<DVector<f64>> {
        let layout = self.est.actions();
        (0..self.est.n_players())
            .map(|i| {
                let mut v = self.est.view(stack, i);
                for c in layout.range(i) {
                    v[c] = z[c];
                }
                v
            })
            .collect()
    }

    /// Points that must stay strictly inside the feasible set: the true
    /// output always, plus every `(z_i, y^i_{-i})` in mode 3.
    pub fn interior_points(&self, state: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        self.check_state(state)?;
        let mut pts = vec![self.output(state)];
        if let (Some(z), Some(stack)) = (self.auxiliary(state), self.stack(state)?) {
            pts.extend(self.distributed_views(&z, &stack));
        }
        Ok(pts)
    }

    /// Smallest margin `-g_l` over all interior points, with the 0-based
    /// constraint index attaining it.
    pub fn guard_margin(&self, state: &DVector<f64>) -> Result<(f64, Option<usize>)> {
        let mut worst = (f64::INFINITY, None);
        for p in self.interior_points(state)? {
            let m = self.barrier.constraints().min_margin(&p)?;
            if !(m.0 >= worst.0) {
                worst = m;
            }
        }
        Ok(worst)
    }

    pub fn barrier_value(&self, state: &DVector<f64>) -> BarrierValue {
        self.barrier.value(&self.output(state))
    }

    pub fn consensus_error(&self, state: &DVector<f64>) -> Result<Option<f64>> {
        match self.stack(state)? {
            Some(s) => Ok(Some(self.est.consensus_error(&s)?)),
            None => Ok(None),
        }
    }

    pub fn tracking_error(&self, state: &DVector<f64>) -> Result<Option<f64>> {
        self.check_state(state)?;
        Ok(self.auxiliary(state).map(|z| (z - self.output(state)).norm()))
    }

    /// Plant input `u` commanded at `state`.
    pub fn plant_input(&self, state: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_state(state)?;
        let y = self.output(state);
        let layout = self.est.actions();
        match self.mode {
            FeedbackMode::FullInfo => {
                let g = self.game.pseudo_gradient(&y)? + self.barrier.gradient(&y)?;
                Ok(-g)
            }
            FeedbackMode::PartialInfo => {
                let stack = self.stack(state)?.unwrap();
                let lap = self.est.laplacian_product(self.graph.as_ref().unwrap(), &stack)?;
                let g = extended_pseudo_gradient(&self.game, &stack)?
                    + self.barrier.gradient(&y)?
                    + self.est.actions_of(&lap)?;
                Ok(-g)
            }
            FeedbackMode::FullyDistributed { k, .. } => {
                let stack = self.stack(state)?.unwrap();
                let z = self.auxiliary(state).unwrap();
                let mut g = extended_pseudo_gradient(&self.game, &stack)?;
                for (i, v) in self.distributed_views(&z, &stack).iter().enumerate() {
                    let psi = self.barrier.partial_gradient(v, layout, i)?;
                    let r = layout.range(i);
                    for (c, val) in r.zip(psi.iter()) {
                        g[c] += val;
                    }
                }
                Ok(-(g * k))
            }
        }
    }

    /// Time derivative of the closed-loop state.
    pub fn vector_field(&self, state: &DVector<f64>) -> Result<DVector<f64>> {
        let u = self.plant_input(state)?;
        let x = self.plant_state(state);
        let xdot = self.plant.vector_field(&x, &u);
        let fast = match self.mode {
            FeedbackMode::FullyDistributed { epsilon, .. } => Some(epsilon),
            _ => None,
        };
        let est_dot = match self.stack(state)? {
            Some(stack) => {
                let lap = self.est.laplacian_product(self.graph.as_ref().unwrap(), &stack)?;
                let flow = -self.est.estimates_of(&lap)?;
                Some(match fast {
                    Some(eps) => flow / eps,
                    None => flow,
                })
            }
            None => None,
        };
        let z_dot = match (fast, self.auxiliary(state)) {
            (Some(eps), Some(z)) => Some((self.output(state) - z) / eps),
            _ => None,
        };
        self.compose_state(z_dot.as_ref(), est_dot.as_ref(), &xdot)
    }
}
