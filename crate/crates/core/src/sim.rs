//! Fixed-order Runge-Kutta integration with a strict-interior guard.

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::feedback::ClosedLoopSystem;

/// What the integrator needs from a system.
pub trait Dynamics {
    fn dim(&self) -> usize;
    fn derivative(&self, state: &DVector<f64>) -> Result<DVector<f64>>;
    fn output(&self, state: &DVector<f64>) -> DVector<f64>;
    /// Constraint margins `-g(y)` of the output.
    fn margins(&self, state: &DVector<f64>) -> Result<DVector<f64>>;
    /// Smallest margin over every point the guard must keep interior, with
    /// the constraint attaining it. `+inf` when unconstrained.
    fn guard_margin(&self, state: &DVector<f64>) -> Result<(f64, Option<usize>)>;
    fn barrier_value(&self, _state: &DVector<f64>) -> f64 {
        0.0
    }
    fn consensus_error(&self, _state: &DVector<f64>) -> Result<Option<f64>> {
        Ok(None)
    }
    fn tracking_error(&self, _state: &DVector<f64>) -> Result<Option<f64>> {
        Ok(None)
    }
}

impl Dynamics for ClosedLoopSystem {
    fn dim(&self) -> usize {
        ClosedLoopSystem::dim(self)
    }

    fn derivative(&self, state: &DVector<f64>) -> Result<DVector<f64>> {
        self.vector_field(state)
    }

    fn output(&self, state: &DVector<f64>) -> DVector<f64> {
        ClosedLoopSystem::output(self, state)
    }

    fn margins(&self, state: &DVector<f64>) -> Result<DVector<f64>> {
        self.barrier().constraints().margins(&ClosedLoopSystem::output(self, state))
    }

    fn guard_margin(&self, state: &DVector<f64>) -> Result<(f64, Option<usize>)> {
        ClosedLoopSystem::guard_margin(self, state)
    }

    fn barrier_value(&self, state: &DVector<f64>) -> f64 {
        ClosedLoopSystem::barrier_value(self, state).to_f64()
    }

    fn consensus_error(&self, state: &DVector<f64>) -> Result<Option<f64>> {
        ClosedLoopSystem::consensus_error(self, state)
    }

    fn tracking_error(&self, state: &DVector<f64>) -> Result<Option<f64>> {
        ClosedLoopSystem::tracking_error(self, state)
    }
}

/// Unconstrained ODE `x' = f(x)` whose output is the whole state.
pub struct OdeSystem<F> {
    dim: usize,
    f: F,
}

impl<F> OdeSystem<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Dynamics for OdeSystem<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn derivative(&self, state: &DVector<f64>) -> Result<DVector<f64>> {
        Ok((self.f)(state))
    }

    fn output(&self, state: &DVector<f64>) -> DVector<f64> {
        state.clone()
    }

    fn margins(&self, _state: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::zeros(0))
    }

    fn guard_margin(&self, _state: &DVector<f64>) -> Result<(f64, Option<usize>)> {
        Ok((f64::INFINITY, None))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub dt_min: f64,
    pub t_final: f64,
    /// Record every `record_stride`-th accepted step (the final step is
    /// always recorded).
    pub record_stride: usize,
    pub interior_margin: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            dt_min: 1e-9,
            t_final: 10.0,
            record_stride: 1,
            interior_margin: 1e-12,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt && self.dt.is_finite()) {
            return Err(Error::Contract(format!(
                "need 0 < dt_min <= dt, got dt = {}, dt_min = {}",
                self.dt, self.dt_min
            )));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Contract(format!("t_final must be finite and nonnegative, got {}", self.t_final)));
        }
        if self.record_stride == 0 {
            return Err(Error::Contract("record_stride must be at least 1".into()));
        }
        if !(self.interior_margin >= 0.0) {
            return Err(Error::Contract("interior_margin must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Recorded samples of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
    pub margins: Vec<DVector<f64>>,
    /// Guard margin over all interior points (equals `min(margins)` outside mode 3).
    pub guard_margins: Vec<f64>,
    pub barrier: Vec<f64>,
    pub consensus: Option<Vec<f64>>,
    pub tracking: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Smallest recorded output margin over all samples and constraints.
    pub fn min_margin(&self) -> f64 {
        self.margins
            .iter()
            .flat_map(|m| m.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_guard_margin(&self) -> f64 {
        self.guard_margins.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn push<D: Dynamics>(&mut self, sys: &D, t: f64, x: &DVector<f64>) -> Result<()> {
        self.times.push(t);
        self.states.push(x.clone());
        self.outputs.push(sys.output(x));
        self.margins.push(sys.margins(x)?);
        self.guard_margins.push(sys.guard_margin(x)?.0);
        self.barrier.push(sys.barrier_value(x));
        if let Some(c) = sys.consensus_error(x)? {
            self.consensus.get_or_insert_with(Vec::new).push(c);
        }
        if let Some(z) = sys.tracking_error(x)? {
            self.tracking.get_or_insert_with(Vec::new).push(z);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub final_time: f64,
    pub final_output: DVector<f64>,
    pub distance_to_reference: Option<f64>,
    pub min_margin: f64,
    pub settling_time: Option<f64>,
    pub steps: usize,
    pub rejections: usize,
    pub min_step: f64,
}

enum Attempt {
    Accepted(DVector<f64>),
    Rejected(Option<usize>),
}

fn violation_index(e: &Error) -> Option<Option<usize>> {
    match e {
        Error::InteriorViolation { indices } => Some(indices.first().copied()),
        _ => None,
    }
}

fn rk4_attempt<D: Dynamics>(sys: &D, x: &DVector<f64>, k1: &DVector<f64>, h: f64, margin: f64) -> Result<Attempt> {
    let check = |s: &DVector<f64>| -> Result<Option<Option<usize>>> {
        if s.iter().any(|v| !v.is_finite()) {
            return Ok(Some(None));
        }
        let (m, idx) = sys.guard_margin(s)?;
        Ok(if m > margin { None } else { Some(idx) })
    };
    let eval = |s: &DVector<f64>| -> Result<std::result::Result<DVector<f64>, Option<usize>>> {
        if let Some(idx) = check(s)? {
            return Ok(Err(idx));
        }
        match sys.derivative(s) {
            Ok(d) if d.iter().all(|v| v.is_finite()) => Ok(Ok(d)),
            Ok(_) => Ok(Err(None)),
            Err(e) => match violation_index(&e) {
                Some(idx) => Ok(Err(idx)),
                None => Err(e),
            },
        }
    };
    let k2 = match eval(&(x + k1 * (0.5 * h)))? {
        Ok(d) => d,
        Err(i) => return Ok(Attempt::Rejected(i)),
    };
    let k3 = match eval(&(x + &k2 * (0.5 * h)))? {
        Ok(d) => d,
        Err(i) => return Ok(Attempt::Rejected(i)),
    };
    let k4 = match eval(&(x + &k3 * h))? {
        Ok(d) => d,
        Err(i) => return Ok(Attempt::Rejected(i)),
    };
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    Ok(match check(&next)? {
        None => Attempt::Accepted(next),
        Some(i) => Attempt::Rejected(i),
    })
}

/// Integrates from `x0` to `cfg.t_final`.
///
/// A step is rejected and halved whenever a stage state or the endpoint
/// leaves the strict interior; accepted steps double back toward `cfg.dt`.
/// When `reference` is given, the report carries the final distance and the
/// settling time to `settle_tol`.
pub fn integrate<D: Dynamics>(
    sys: &D,
    x0: &DVector<f64>,
    cfg: &SimConfig,
    reference: Option<(&DVector<f64>, f64)>,
) -> Result<(Trajectory, RunReport)> {
    cfg.validate()?;
    check_dim("initial state", sys.dim(), x0.len())?;
    let (m0, idx0) = sys.guard_margin(x0)?;
    if !(m0 > cfg.interior_margin) {
        return Err(Error::InfeasibleStart {
            constraint: idx0,
            margin: m0,
        });
    }
    let mut traj = Trajectory::default();
    traj.push(sys, 0.0, x0)?;

    let mut x = x0.clone();
    let mut t = 0.0;
    let mut h = cfg.dt;
    let mut steps = 0;
    let mut rejections = 0;
    let mut min_step = f64::INFINITY;
    let mut k1 = sys.derivative(&x)?;
    while t < cfg.t_final {
        let remaining = cfg.t_final - t;
        let last = remaining <= h * (1.0 + 1e-9);
        let h_try = if last { remaining } else { h };
        match rk4_attempt(sys, &x, &k1, h_try, cfg.interior_margin)? {
            Attempt::Accepted(next) => {
                x = next;
                t = if last { cfg.t_final } else { t + h_try };
                steps += 1;
                min_step = min_step.min(h_try);
                k1 = sys.derivative(&x)?;
                if last || steps % cfg.record_stride == 0 {
                    traj.push(sys, t, &x)?;
                }
                h = (h * 2.0).min(cfg.dt);
            }
            Attempt::Rejected(idx) => {
                rejections += 1;
                h = h_try / 2.0;
                log::debug!("step rejected at t = {t}, retrying with {h:e}");
                if h < cfg.dt_min {
                    return Err(Error::GuardExhausted {
                        time: t,
                        constraint: idx,
                        step: h,
                    });
                }
            }
        }
    }

    let final_output = sys.output(&x);
    let (distance_to_reference, settling) = match reference {
        Some((r, tol)) => (Some((&final_output - r).norm()), settling_time(&traj, r, tol)),
        None => (None, None),
    };
    let report = RunReport {
        final_time: t,
        final_output,
        distance_to_reference,
        min_margin: traj.min_margin(),
        settling_time: settling,
        steps,
        rejections,
        min_step: if steps == 0 { cfg.dt } else { min_step },
    };
    Ok((traj, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReport {
    /// `V(t) = |y(t) - y*|^2 / 2` per sample.
    pub values: Vec<f64>,
    /// Largest increase between consecutive samples (0 when nonincreasing).
    pub max_increase: f64,
}

pub fn lyapunov_monitor(traj: &Trajectory, reference: &DVector<f64>) -> LyapunovReport {
    let values: Vec<f64> = traj.outputs.iter().map(|y| 0.5 * (y - reference).norm_squared()).collect();
    let max_increase = values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    LyapunovReport { values, max_increase }
}

/// Per-sample `|bold y - 1 (x) y|`.
pub fn consensus_error(traj: &Trajectory) -> Result<Vec<f64>> {
    traj.consensus
        .clone()
        .ok_or_else(|| Error::Unsupported("trajectory has no estimate stack".into()))
}

/// First recorded time after which every sample stays within `tol` of `reference`.
pub fn settling_time(traj: &Trajectory, reference: &DVector<f64>, tol: f64) -> Option<f64> {
    let outside = traj.outputs.iter().rposition(|y| (y - reference).norm() > tol);
    match outside {
        None => traj.times.first().copied(),
        Some(i) if i + 1 < traj.times.len() => Some(traj.times[i + 1]),
        Some(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    fn linear() -> OdeSystem<impl Fn(&DVector<f64>) -> DVector<f64>> {
        OdeSystem::new(1, |y: &DVector<f64>| y.map(|v| -2.0 * (v - 1.0)))
    }

    #[test]
    fn scalar_linear_closed_form() {
        let cfg = SimConfig {
            t_final: 5.0,
            ..SimConfig::default()
        };
        let (traj, rep) = integrate(&linear(), &dvector![0.0], &cfg, None).unwrap();
        assert_abs_diff_eq!(rep.final_output[0], 1.0 - (-10.0f64).exp(), epsilon = 1e-6);
        assert_eq!(*traj.times.last().unwrap(), 5.0);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn settling_time_of_linear_run() {
        let cfg = SimConfig {
            t_final: 6.0,
            ..SimConfig::default()
        };
        let (traj, _) = integrate(&linear(), &dvector![0.0], &cfg, None).unwrap();
        let ts = settling_time(&traj, &dvector![1.0], 1e-3).unwrap();
        assert_abs_diff_eq!(ts, 1000f64.ln() / 2.0, epsilon = 2e-3);
    }

    #[test]
    fn settling_edge_cases() {
        let traj = Trajectory {
            times: vec![0.0, 1.0, 2.0],
            outputs: vec![dvector![1.0], dvector![1.0], dvector![1.0]],
            ..Trajectory::default()
        };
        assert_eq!(settling_time(&traj, &dvector![1.0], 1e-3), Some(0.0));
        let diverging = Trajectory {
            times: vec![0.0, 1.0, 2.0],
            outputs: vec![dvector![1.0], dvector![2.0], dvector![4.0]],
            ..Trajectory::default()
        };
        assert_eq!(settling_time(&diverging, &dvector![1.0], 1e-3), None);
    }

    #[test]
    fn lyapunov_detector() {
        let cfg = SimConfig {
            t_final: 3.0,
            ..SimConfig::default()
        };
        let (mut traj, _) = integrate(&linear(), &dvector![0.0], &cfg, None).unwrap();
        assert_eq!(lyapunov_monitor(&traj, &dvector![1.0]).max_increase, 0.0);
        traj.outputs.reverse();
        assert!(lyapunov_monitor(&traj, &dvector![1.0]).max_increase > 0.0);
        let flat = Trajectory {
            times: vec![0.0, 1.0],
            outputs: vec![dvector![1.0], dvector![1.0]],
            ..Trajectory::default()
        };
        assert!(lyapunov_monitor(&flat, &dvector![1.0]).values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_horizon_records_only_the_start() {
        let cfg = SimConfig {
            t_final: 0.0,
            ..SimConfig::default()
        };
        let (traj, rep) = integrate(&linear(), &dvector![0.3], &cfg, None).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(rep.steps, 0);
    }

    #[test]
    fn config_validation() {
        let bad = SimConfig {
            dt_min: 1.0,
            dt: 0.1,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(consensus_error(&Trajectory::default()).is_err());
    }
}
