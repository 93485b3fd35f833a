//! Running scenarios, writing their artifacts and comparing against the oracle.

use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use gne_core::feedback::{estimate_extended_lipschitz, ClosedLoopSystem, FeedbackMode};
use gne_core::graph::gain_condition;
use gne_core::oracle::{best_response_gap, solve_penalized_ne, OracleConfig, OracleSolution};
use gne_core::sim::{integrate, settling_time, RunReport, Trajectory};
use gne_core::Error;
use nalgebra::DVector;

use crate::output::{write_plots, write_trajectory_csv, Summary};
use crate::scenario::{Built, ModeConfig, Scenario, CONSTANT_SAMPLES};

/// Distance to the oracle solution a converged comparison must reach.
pub const COMPARE_TOL: f64 = 1e-3;
/// Slack added to `p * rho` when checking best-response gaps.
pub const GAP_SLACK: f64 = 1e-4;
/// Search tolerance for best-response gaps.
pub const GAP_RESOLUTION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeName {
    FullInfo,
    PartialInfo,
    Distributed,
}

/// Command-line overrides of scenario values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub rho: Option<f64>,
    pub mode: Option<ModeName>,
    pub epsilon: Option<f64>,
    pub k: Option<f64>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, scn: &mut Scenario) -> anyhow::Result<()> {
        if let Some(r) = self.rho {
            scn.rho = r;
        }
        if let Some(m) = self.mode {
            scn.mode = match (m, scn.mode) {
                (ModeName::FullInfo, _) => ModeConfig::FullInfo,
                (ModeName::PartialInfo, _) => ModeConfig::PartialInfo,
                (ModeName::Distributed, d @ ModeConfig::Distributed { .. }) => d,
                (ModeName::Distributed, _) => ModeConfig::Distributed { epsilon: 1e-3, k: None, beta: None },
            };
        }
        if self.epsilon.is_some() || self.k.is_some() {
            let ModeConfig::Distributed { epsilon, k, .. } = &mut scn.mode else {
                bail!("--epsilon and --k only apply to distributed mode");
            };
            if let Some(e) = self.epsilon {
                *epsilon = e;
            }
            if let Some(v) = self.k {
                *k = Some(v);
            }
        }
        if let Some(t) = self.t_final {
            scn.sim.t_final = t;
        }
        if let Some(dt) = self.dt {
            scn.sim.dt = dt;
        }
        if let Some(s) = self.seed {
            scn.sim.seed = s;
        }
        Ok(())
    }
}

/// Exit status of a run or comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Every margin stayed positive and the run converged.
    Certified,
    /// Margins stayed positive but the final output is not within tolerance.
    NotConverged,
    GuardExhausted,
    OracleNoConvergence,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Certified => 0,
            Status::NotConverged => 1,
            Status::GuardExhausted => 2,
            Status::OracleNoConvergence => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Status::Certified => "certified",
            Status::NotConverged => "not_converged",
            Status::GuardExhausted => "guard_exhausted",
            Status::OracleNoConvergence => "oracle_no_convergence",
        }
    }
}

/// Exit code for an error that escaped a run.
pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(Error::GuardExhausted { .. }) => 2,
        Some(Error::NoConvergence { .. }) => 3,
        _ => 1,
    }
}

/// A built scenario with its closed loop, oracle reference and run result.
pub struct Simulation {
    pub scenario: Scenario,
    pub built: Built,
    pub system: ClosedLoopSystem,
    pub x0: DVector<f64>,
    pub oracle: Result<OracleSolution, Error>,
    pub result: Result<(Trajectory, RunReport), Error>,
    pub elapsed: Duration,
}

impl Simulation {
    pub fn reference(&self) -> Option<&DVector<f64>> {
        self.oracle.as_ref().ok().map(|s| &s.y)
    }

    pub fn status(&self) -> Status {
        match (&self.result, &self.oracle) {
            (Err(Error::GuardExhausted { .. }), _) => Status::GuardExhausted,
            (_, Err(_)) => Status::OracleNoConvergence,
            (Ok((_, rep)), Ok(_)) => {
                let settled = rep.distance_to_reference.is_some_and(|d| d <= self.scenario.settle_tol);
                if rep.final_time == 0.0 || settled {
                    Status::Certified
                } else {
                    Status::NotConverged
                }
            }
            (Err(_), Ok(_)) => Status::NotConverged,
        }
    }

    pub fn summary(&self) -> Summary {
        let scn = &self.scenario;
        let b = &self.built;
        let mut s = Summary::new();
        s.set("scenario", &scn.name);
        s.set("mode", scn.mode.name());
        s.set("status", self.status().name());
        s.set("n_players", scn.n_players());
        s.set("n_constraints", b.constraints.n_constraints());
        s.set("rho", scn.rho);
        s.set("epsilon_bound", b.barrier.epsilon_bound());
        s.set("mu_est", b.mu_est);
        s.set("theta1_est", b.theta1_est);
        if let FeedbackMode::FullyDistributed { epsilon, k } = self.system.mode() {
            s.set("epsilon", epsilon);
            s.set("k", k);
        }
        if let Some(g) = &b.graph {
            if let Ok(l2) = g.algebraic_connectivity() {
                s.set("lambda2", l2);
            }
        }
        if let Ok(sol) = &self.oracle {
            s.set_list("reference", sol.y.iter().copied());
            s.set("oracle_residual", format!("{:e}", sol.residual));
        } else if let Err(e) = &self.oracle {
            s.set("oracle_error", e);
        }
        match &self.result {
            Ok((traj, rep)) => {
                s.set("final_time", rep.final_time);
                s.set_list("final_output", rep.final_output.iter().copied());
                if let Some(d) = rep.distance_to_reference {
                    s.set("distance_to_reference", format!("{d:e}"));
                }
                s.set("min_margin", format!("{:e}", rep.min_margin));
                s.set("min_guard_margin", format!("{:e}", traj.min_guard_margin()));
                s.set("settle_tol", scn.settle_tol);
                s.set("settling_time", rep.settling_time.map_or("none".to_string(), |t| t.to_string()));
                s.set("steps", rep.steps);
                s.set("rejections", rep.rejections);
                s.set("min_step", format!("{:e}", rep.min_step));
                s.set("samples", traj.len());
                if let Some(c) = traj.consensus.as_ref().and_then(|c| c.last()) {
                    s.set("final_consensus_err", format!("{c:e}"));
                }
                if let Some(z) = traj.tracking.as_ref().and_then(|z| z.last()) {
                    s.set("final_z_err", format!("{z:e}"));
                }
            }
            Err(e) => s.set("error", e),
        }
        s.set("elapsed_s", format!("{:.3}", self.elapsed.as_secs_f64()));
        s
    }
}

/// `theta_2` estimate and the strict gain condition on the scenario's graph.
pub fn gain_check(scn: &Scenario, built: &Built) -> anyhow::Result<Option<(f64, f64, bool)>> {
    let Some(g) = &built.graph else { return Ok(None) };
    let theta2 = estimate_extended_lipschitz(&built.game, &built.constraints, CONSTANT_SAMPLES, scn.sim.seed)?;
    let l2 = g.algebraic_connectivity()?;
    Ok(Some((theta2, l2, gain_condition(built.mu_est, theta2, l2))))
}

/// Builds and integrates the scenario. Guard exhaustion and oracle failure
/// are captured in the result; other errors are returned.
pub fn simulate(scn: &Scenario) -> anyhow::Result<Simulation> {
    let start = Instant::now();
    let built = scn.build()?;
    let (system, x0) = scn.system(&built)?;
    let oracle = solve_penalized_ne(&built.game, &built.barrier, built.constraints.slater_point(), &OracleConfig::default());
    let reference = oracle.as_ref().ok().map(|s| (&s.y, scn.settle_tol));
    let result = match integrate(&system, &x0, &scn.sim, reference) {
        Err(e @ Error::GuardExhausted { .. }) => Err(e),
        other => Ok(other?),
    };
    Ok(Simulation {
        scenario: scn.clone(),
        built,
        system,
        x0,
        oracle,
        result,
        elapsed: start.elapsed(),
    })
}

/// Result of [`run`].
pub struct RunOutcome {
    pub simulation: Simulation,
    pub summary: Summary,
    pub status: Status,
    pub files: Vec<String>,
}

/// Simulates and writes `trajectory.csv`, `summary.txt` and the SVG plots
/// into `out_dir`.
pub fn run(scn: &Scenario, out_dir: &Path) -> anyhow::Result<RunOutcome> {
    let sim = simulate(scn)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut files = Vec::new();
    let mut summary = sim.summary();
    if scn.mode.needs_graph() {
        if let Some((theta2, _, ok)) = gain_check(scn, &sim.built)? {
            summary.set("theta2_est", theta2);
            summary.set("gain_condition", ok);
        }
    }
    if let Ok((traj, _)) = &sim.result {
        let m = sim.built.game.total_dim();
        let p = sim.built.constraints.n_constraints();
        let f = std::fs::File::create(out_dir.join("trajectory.csv"))?;
        write_trajectory_csv(traj, m, p, std::io::BufWriter::new(f))?;
        files.push("trajectory.csv".to_string());
        files.extend(write_plots(out_dir, traj)?);
    }
    std::fs::write(out_dir.join("summary.txt"), summary.to_string())?;
    files.push("summary.txt".to_string());
    let status = sim.status();
    Ok(RunOutcome {
        simulation: sim,
        summary,
        status,
        files,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub scenario: String,
    pub mode: &'static str,
    pub oracle: DVector<f64>,
    pub oracle_residual: f64,
    /// Reference the run is measured against (the oracle unless overridden).
    pub reference: DVector<f64>,
    pub final_output: DVector<f64>,
    pub final_distance: f64,
    pub settling_time: Option<f64>,
    pub min_margin: f64,
    pub gaps: Vec<f64>,
    pub max_gap: f64,
    /// `p * rho + GAP_SLACK`.
    pub gap_bound: f64,
    pub gap_ok: bool,
    /// Final distance exceeds [`COMPARE_TOL`].
    pub flagged: bool,
}

impl CompareReport {
    pub fn status(&self) -> Status {
        if !self.flagged && self.gap_ok {
            Status::Certified
        } else {
            Status::NotConverged
        }
    }

    pub fn summary(&self) -> Summary {
        let mut s = Summary::new();
        s.set("scenario", &self.scenario);
        s.set("mode", self.mode);
        s.set("status", self.status().name());
        s.set_list("oracle", self.oracle.iter().copied());
        s.set("oracle_residual", format!("{:e}", self.oracle_residual));
        s.set_list("reference", self.reference.iter().copied());
        s.set_list("final_output", self.final_output.iter().copied());
        s.set("final_distance", format!("{:e}", self.final_distance));
        s.set("tolerance", COMPARE_TOL);
        s.set("flagged", self.flagged);
        s.set("settling_time", self.settling_time.map_or("none".to_string(), |t| t.to_string()));
        s.set("min_margin", format!("{:e}", self.min_margin));
        s.set_list("best_response_gaps", self.gaps.iter().copied());
        s.set("max_gap", format!("{:e}", self.max_gap));
        s.set("gap_bound", self.gap_bound);
        s.set("gap_ok", self.gap_ok);
        s
    }
}

/// Solves the penalized equilibrium, runs the dynamics and measures the
/// distance between them, plus the best-response gaps at the oracle point.
/// `reference` replaces the oracle point as the distance target.
pub fn compare_to_oracle(scn: &Scenario, reference: Option<&DVector<f64>>) -> anyhow::Result<CompareReport> {
    let built = scn.build()?;
    let sol = solve_penalized_ne(&built.game, &built.barrier, built.constraints.slater_point(), &OracleConfig::default())?;
    let target = reference.cloned().unwrap_or_else(|| sol.y.clone());
    if target.len() != sol.y.len() {
        bail!("reference has {} entries for {} actions", target.len(), sol.y.len());
    }
    let (system, x0) = scn.system(&built)?;
    let (traj, rep) = integrate(&system, &x0, &scn.sim, Some((&target, COMPARE_TOL)))?;
    let gaps = best_response_gap(&built.game, &built.constraints, &sol.y, GAP_RESOLUTION)?;
    let max_gap = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gap_bound = built.barrier.epsilon_bound() + GAP_SLACK;
    let final_distance = (&rep.final_output - &target).norm();
    Ok(CompareReport {
        scenario: scn.name.clone(),
        mode: scn.mode.name(),
        oracle: sol.y.clone(),
        oracle_residual: sol.residual,
        reference: target.clone(),
        final_output: rep.final_output.clone(),
        final_distance,
        settling_time: settling_time(&traj, &target, COMPARE_TOL),
        min_margin: rep.min_margin,
        gap_ok: max_gap <= gap_bound,
        gaps,
        max_gap,
        gap_bound,
        flagged: !(final_distance <= COMPARE_TOL),
    })
}
