//! Scenario files: a sectioned `key = value` text format.
//!
//! ```text
//! # comment
//! [scenario]
//! name = quad3
//!
//! [game]
//! kind = quadratic            # quadratic | osnr | leader_follower
//! weight = 0.5
//! targets = 1, 1.5, 2
//! coupling = 0.2
//! budget = 3
//! nonnegative = true
//!
//! [plants]
//! all = integrator            # integrator | pi_cascade(v, k) | flexible_robot(M, m, gamma)
//! agent.2 = pi_cascade(1, 0.5)
//!
//! [graph]
//! edges = 1-2, 2-3, 1-3       # or: fixture = osnr10 | <path>, or: kind = complete | path
//!
//! [mode]
//! kind = distributed          # full_info | partial_info | distributed
//! epsilon = 1e-3
//! beta = 0.8                  # used for k = default_k(beta, mu, 2) when k is absent
//! k = 1
//!
//! [barrier]
//! rho = 0.1
//!
//! [init]
//! outputs = 0.2, 0.3, 0.4     # or: slater
//! estimates = slater          # slater | outputs
//!
//! [sim]
//! dt = 1e-3
//! dt_min = 1e-9
//! t_final = 20
//! record_stride = 10
//! interior_margin = 1e-12
//! seed = 7
//! settle_tol = 1e-3
//! ```
//!
//! Game kinds and their keys:
//! - `quadratic`: `weight`, `targets`, `coupling`, `budget`, `nonnegative`.
//! - `osnr`: `channels`, `max_power`, and optional per-channel overrides
//!   `price`, `utility`, `gain`, `noise`, plus scalar `crosstalk`.
//! - `leader_follower`: `agents`, `leader`, `max_gap`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use gne_core::feedback::{default_k, ClosedLoopSystem, DEFAULT_BETA, DEFAULT_K_SAFETY};
use gne_core::game::catalog::{leader_follower, osnr, quadratic_budget, OsnrGame};
use gne_core::game::{estimate_game_constants, BarrierPenalty, ConstraintSet, GameSpec};
use gne_core::graph::CommGraph;
use gne_core::plants::{PlantModel, SpringLaw, StackedPlant};
use gne_core::sim::SimConfig;
use nalgebra::{DMatrix, DVector};

/// Sample count used to estimate the game constants.
pub const CONSTANT_SAMPLES: usize = 2000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}

impl From<gne_core::Error> for ScenarioError {
    fn from(e: gne_core::Error) -> Self {
        ScenarioError::Invalid(e.to_string())
    }
}

type Result<T> = std::result::Result<T, ScenarioError>;

#[derive(Debug, Clone, PartialEq)]
pub struct OsnrParams {
    pub channels: usize,
    pub max_power: f64,
    pub price: Option<Vec<f64>>,
    pub utility: Option<Vec<f64>>,
    pub gain: Option<Vec<f64>>,
    pub noise: Option<Vec<f64>>,
    pub crosstalk: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GameConfig {
    Quadratic {
        weight: f64,
        targets: Vec<f64>,
        coupling: f64,
        budget: f64,
        nonnegative: bool,
    },
    Osnr(OsnrParams),
    LeaderFollower {
        agents: usize,
        leader: f64,
        max_gap: f64,
    },
}

impl GameConfig {
    pub fn n_players(&self) -> usize {
        match self {
            GameConfig::Quadratic { targets, .. } => targets.len(),
            GameConfig::Osnr(p) => p.channels,
            GameConfig::LeaderFollower { agents, .. } => *agents,
        }
    }

    pub fn build(&self) -> Result<(GameSpec, ConstraintSet)> {
        Ok(match self {
            GameConfig::Quadratic {
                weight,
                targets,
                coupling,
                budget,
                nonnegative,
            } => quadratic_budget(*weight, targets.clone(), *coupling, *budget, *nonnegative)?,
            GameConfig::Osnr(p) => {
                let n = p.channels;
                let mut g = OsnrGame::with_defaults(n);
                let check = |name: &str, v: &Option<Vec<f64>>| -> Result<()> {
                    match v {
                        Some(v) if v.len() != n => Err(ScenarioError::Invalid(format!(
                            "osnr {name} has {} entries for {n} channels",
                            v.len()
                        ))),
                        _ => Ok(()),
                    }
                };
                check("price", &p.price)?;
                check("utility", &p.utility)?;
                check("gain", &p.gain)?;
                check("noise", &p.noise)?;
                if let Some(v) = &p.price {
                    g.price = v.clone();
                }
                if let Some(v) = &p.utility {
                    g.utility = v.clone();
                }
                if let Some(v) = &p.gain {
                    g.gain = v.clone();
                }
                if let Some(v) = &p.noise {
                    g.noise = v.clone();
                }
                if let Some(c) = p.crosstalk {
                    g.coupling = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { c });
                }
                osnr(g, p.max_power)?
            }
            GameConfig::LeaderFollower {
                agents,
                leader,
                max_gap,
            } => leader_follower(*agents, *leader, *max_gap)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlantSpec {
    Integrator,
    PiCascade { v: f64, k: f64 },
    FlexibleRobot { body_mass: f64, appendage_mass: f64, damping: f64 },
}

impl PlantSpec {
    pub fn build(self) -> Result<PlantModel> {
        Ok(match self {
            PlantSpec::Integrator => PlantModel::integrator(1)?,
            PlantSpec::PiCascade { v, k } => PlantModel::pi_cascade(1, v, k)?,
            PlantSpec::FlexibleRobot {
                body_mass,
                appendage_mass,
                damping,
            } => PlantModel::flexible_robot(body_mass, appendage_mass, damping, SpringLaw::LinearPlusAtan)?,
        })
    }

    fn parse(text: &str) -> std::result::Result<Self, String> {
        let text = text.trim();
        let (tag, args) = match text.find('(') {
            Some(open) => {
                let close = text
                    .rfind(')')
                    .filter(|&c| c == text.len() - 1)
                    .ok_or_else(|| format!("unbalanced parentheses in {text:?}"))?;
                (text[..open].trim(), parse_list(&text[open + 1..close])?)
            }
            None => (text, Vec::new()),
        };
        let want = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("{tag} takes {n} arguments, got {}", args.len()))
            }
        };
        match tag {
            "integrator" => {
                want(0)?;
                Ok(PlantSpec::Integrator)
            }
            "pi_cascade" => {
                want(2)?;
                Ok(PlantSpec::PiCascade { v: args[0], k: args[1] })
            }
            "flexible_robot" => {
                want(3)?;
                Ok(PlantSpec::FlexibleRobot {
                    body_mass: args[0],
                    appendage_mass: args[1],
                    damping: args[2],
                })
            }
            other => Err(format!("unknown plant kind {other:?}")),
        }
    }
}

impl fmt::Display for PlantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlantSpec::Integrator => write!(f, "integrator"),
            PlantSpec::PiCascade { v, k } => write!(f, "pi_cascade({v}, {k})"),
            PlantSpec::FlexibleRobot {
                body_mass,
                appendage_mass,
                damping,
            } => write!(f, "flexible_robot({body_mass}, {appendage_mass}, {damping})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    /// 1-based edges as written.
    Edges(Vec<(usize, usize)>),
    /// `osnr10` or a path to an edge-list fixture.
    Fixture(String),
    Complete,
    Path,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeConfig {
    FullInfo,
    PartialInfo,
    Distributed { epsilon: f64, k: Option<f64>, beta: Option<f64> },
}

impl ModeConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModeConfig::FullInfo => "full_info",
            ModeConfig::PartialInfo => "partial_info",
            ModeConfig::Distributed { .. } => "distributed",
        }
    }

    pub fn needs_graph(&self) -> bool {
        !matches!(self, ModeConfig::FullInfo)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitOutputs {
    Slater,
    Values(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatePolicy {
    /// Every estimate starts at the Slater witness.
    Slater,
    /// Every estimate starts at the true initial output.
    Outputs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub game: GameConfig,
    pub plants: Vec<PlantSpec>,
    pub graph: Option<GraphSource>,
    pub mode: ModeConfig,
    pub rho: f64,
    pub init_outputs: InitOutputs,
    pub estimates: EstimatePolicy,
    pub sim: SimConfig,
    pub settle_tol: f64,
    /// Directory relative fixture paths resolve against.
    pub base_dir: Option<PathBuf>,
}

/// Everything a run needs, built and validated.
#[derive(Debug, Clone)]
pub struct Built {
    pub game: GameSpec,
    pub constraints: ConstraintSet,
    pub barrier: BarrierPenalty,
    pub plant: StackedPlant,
    pub graph: Option<CommGraph>,
    pub y0: DVector<f64>,
    pub mu_est: f64,
    pub theta1_est: f64,
}

fn parse_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("invalid number {:?}", s.trim())))
        .collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

struct Entry {
    line: usize,
    value: String,
}

/// Raw `section.key -> value` map with line numbers.
struct Document {
    entries: BTreeMap<(String, String), Entry>,
}

impl Document {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap().trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ScenarioError::Parse { line, message: format!("malformed section header {body:?}") })?
                    .trim();
                const SECTIONS: [&str; 8] = ["scenario", "game", "plants", "graph", "mode", "barrier", "init", "sim"];
                if !SECTIONS.contains(&name) {
                    return Err(ScenarioError::Parse { line, message: format!("unknown section [{name}]") });
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(ScenarioError::Parse { line, message: format!("expected `key = value`, found {body:?}") });
            };
            let Some(sec) = &section else {
                return Err(ScenarioError::Parse { line, message: "key outside of any section".into() });
            };
            let k = (sec.clone(), key.trim().to_string());
            if entries.contains_key(&k) {
                return Err(ScenarioError::Parse { line, message: format!("duplicate key {}", key.trim()) });
            }
            entries.insert(k, Entry { line, value: value.trim().to_string() });
        }
        Ok(Self { entries })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        self.entries.remove(&(section.to_string(), key.to_string()))
    }

    fn required(&mut self, section: &str, key: &str) -> Result<Entry> {
        self.take(section, key).ok_or_else(|| ScenarioError::Invalid(format!("missing [{section}] {key}")))
    }

    fn keys_with_prefix(&self, section: &str, prefix: &str) -> Vec<String> {
        self.entries
            .keys()
            .filter(|(s, k)| s == section && k.starts_with(prefix))
            .map(|(_, k)| k.clone())
            .collect()
    }

    fn finish(self) -> Result<()> {
        match self.entries.iter().next() {
            Some(((s, k), e)) => Err(ScenarioError::Parse { line: e.line, message: format!("unknown key [{s}] {k}") }),
            None => Ok(()),
        }
    }
}

fn value<T: std::str::FromStr>(e: &Entry) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| ScenarioError::Parse { line: e.line, message: format!("invalid value {:?}", e.value) })
}

fn list(e: &Entry) -> Result<Vec<f64>> {
    parse_list(&e.value).map_err(|message| ScenarioError::Parse { line: e.line, message })
}

fn opt<T: std::str::FromStr>(doc: &mut Document, s: &str, k: &str) -> Result<Option<T>> {
    doc.take(s, k).map(|e| value(&e)).transpose()
}

fn opt_list(doc: &mut Document, s: &str, k: &str) -> Result<Option<Vec<f64>>> {
    doc.take(s, k).map(|e| list(&e)).transpose()
}

fn parse_edges(e: &Entry) -> Result<Vec<(usize, usize)>> {
    e.value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (a, b) = pair.split_once('-').ok_or_else(|| ScenarioError::Parse {
                line: e.line,
                message: format!("edge {:?} is not of the form i-j", pair.trim()),
            })?;
            let idx = |s: &str| {
                s.trim().parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(|| ScenarioError::Parse {
                    line: e.line,
                    message: format!("invalid 1-based node index {:?}", s.trim()),
                })
            };
            Ok((idx(a)?, idx(b)?))
        })
        .collect()
}

impl Scenario {
    /// Parses scenario text; relative fixture paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut doc = Document::parse(text)?;
        let name = doc.required("scenario", "name")?.value;

        let kind = doc.required("game", "kind")?;
        let game = match kind.value.as_str() {
            "quadratic" => GameConfig::Quadratic {
                weight: value(&doc.required("game", "weight")?)?,
                targets: list(&doc.required("game", "targets")?)?,
                coupling: value(&doc.required("game", "coupling")?)?,
                budget: value(&doc.required("game", "budget")?)?,
                nonnegative: opt(&mut doc, "game", "nonnegative")?.unwrap_or(true),
            },
            "osnr" => GameConfig::Osnr(OsnrParams {
                channels: value(&doc.required("game", "channels")?)?,
                max_power: value(&doc.required("game", "max_power")?)?,
                price: opt_list(&mut doc, "game", "price")?,
                utility: opt_list(&mut doc, "game", "utility")?,
                gain: opt_list(&mut doc, "game", "gain")?,
                noise: opt_list(&mut doc, "game", "noise")?,
                crosstalk: opt(&mut doc, "game", "crosstalk")?,
            }),
            "leader_follower" => GameConfig::LeaderFollower {
                agents: value(&doc.required("game", "agents")?)?,
                leader: value(&doc.required("game", "leader")?)?,
                max_gap: value(&doc.required("game", "max_gap")?)?,
            },
            other => {
                return Err(ScenarioError::Parse { line: kind.line, message: format!("unknown game kind {other:?}") })
            }
        };
        let n = game.n_players();
        if n == 0 {
            return Err(ScenarioError::Invalid("game has no players".into()));
        }

        let plant_of = |e: &Entry| PlantSpec::parse(&e.value).map_err(|message| ScenarioError::Parse { line: e.line, message });
        let default_plant = doc.take("plants", "all").map(|e| plant_of(&e)).transpose()?;
        let mut plants: Vec<Option<PlantSpec>> = vec![default_plant; n];
        for key in doc.keys_with_prefix("plants", "agent.") {
            let e = doc.take("plants", &key).unwrap();
            let idx = key["agent.".len()..]
                .parse::<usize>()
                .ok()
                .filter(|&i| (1..=n).contains(&i))
                .ok_or_else(|| ScenarioError::Parse { line: e.line, message: format!("agent index in {key} must be in 1..={n}") })?;
            plants[idx - 1] = Some(plant_of(&e)?);
        }
        let plants = plants
            .into_iter()
            .enumerate()
            .map(|(i, p)| p.ok_or_else(|| ScenarioError::Invalid(format!("no plant given for agent {}", i + 1))))
            .collect::<Result<Vec<_>>>()?;

        let graph = if let Some(e) = doc.take("graph", "edges") {
            Some(GraphSource::Edges(parse_edges(&e)?))
        } else if let Some(e) = doc.take("graph", "fixture") {
            Some(GraphSource::Fixture(e.value))
        } else if let Some(e) = doc.take("graph", "kind") {
            Some(match e.value.as_str() {
                "complete" => GraphSource::Complete,
                "path" => GraphSource::Path,
                other => return Err(ScenarioError::Parse { line: e.line, message: format!("unknown graph kind {other:?}") }),
            })
        } else {
            None
        };

        let mode_entry = doc.take("mode", "kind");
        let mode = match mode_entry.as_ref().map(|e| e.value.as_str()) {
            None | Some("full_info") => ModeConfig::FullInfo,
            Some("partial_info") => ModeConfig::PartialInfo,
            Some("distributed") => ModeConfig::Distributed {
                epsilon: opt(&mut doc, "mode", "epsilon")?.unwrap_or(1e-3),
                k: opt(&mut doc, "mode", "k")?,
                beta: opt(&mut doc, "mode", "beta")?,
            },
            Some(other) => {
                return Err(ScenarioError::Parse {
                    line: mode_entry.as_ref().unwrap().line,
                    message: format!("unknown mode {other:?}"),
                })
            }
        };

        let rho = value(&doc.required("barrier", "rho")?)?;

        let init_outputs = match doc.take("init", "outputs") {
            None => InitOutputs::Slater,
            Some(e) if e.value == "slater" => InitOutputs::Slater,
            Some(e) => InitOutputs::Values(list(&e)?),
        };
        let estimates = match doc.take("init", "estimates") {
            None => EstimatePolicy::Slater,
            Some(e) => match e.value.as_str() {
                "slater" => EstimatePolicy::Slater,
                "outputs" => EstimatePolicy::Outputs,
                other => return Err(ScenarioError::Parse { line: e.line, message: format!("unknown estimate policy {other:?}") }),
            },
        };

        let d = SimConfig::default();
        let sim = SimConfig {
            dt: opt(&mut doc, "sim", "dt")?.unwrap_or(d.dt),
            dt_min: opt(&mut doc, "sim", "dt_min")?.unwrap_or(d.dt_min),
            t_final: opt(&mut doc, "sim", "t_final")?.unwrap_or(d.t_final),
            record_stride: opt(&mut doc, "sim", "record_stride")?.unwrap_or(d.record_stride),
            interior_margin: opt(&mut doc, "sim", "interior_margin")?.unwrap_or(d.interior_margin),
            seed: opt(&mut doc, "sim", "seed")?.unwrap_or(d.seed),
        };
        let settle_tol = opt(&mut doc, "sim", "settle_tol")?.unwrap_or(1e-3);
        doc.finish()?;

        let scn = Scenario {
            name,
            game,
            plants,
            graph,
            mode,
            rho,
            init_outputs,
            estimates,
            sim,
            settle_tol,
            base_dir: base_dir.map(Path::to_path_buf),
        };
        Ok(scn)
    }

    /// Reads a built-in name (see [`crate::builtins`]) or a scenario file
    /// without building it.
    pub fn read(name_or_path: &str) -> Result<Self> {
        if let Some(text) = crate::builtins::text(name_or_path) {
            return Self::parse(text, None);
        }
        let path = Path::new(name_or_path);
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io(format!("cannot read scenario {}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    /// [`read`](Self::read) followed by [`validate`](Self::validate).
    pub fn load(name_or_path: &str) -> Result<Self> {
        let scn = Self::read(name_or_path)?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn n_players(&self) -> usize {
        self.game.n_players()
    }

    fn graph(&self) -> Result<Option<CommGraph>> {
        let n = self.n_players();
        let g = match &self.graph {
            None => return Ok(None),
            Some(GraphSource::Edges(e)) => CommGraph::new(n, e.iter().map(|&(a, b)| (a - 1, b - 1)))?,
            Some(GraphSource::Complete) => CommGraph::complete(n),
            Some(GraphSource::Path) => CommGraph::path(n),
            Some(GraphSource::Fixture(f)) if f == "osnr10" => CommGraph::osnr10(),
            Some(GraphSource::Fixture(f)) => {
                let path = match &self.base_dir {
                    Some(base) if Path::new(f).is_relative() => base.join(f),
                    _ => PathBuf::from(f),
                };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ScenarioError::Io(format!("cannot read graph fixture {}: {e}", path.display())))?;
                CommGraph::parse_edge_list(&text, Some(n))?
            }
        };
        if g.n_nodes() != n {
            return Err(ScenarioError::Invalid(format!("graph has {} nodes for {n} players", g.n_nodes())));
        }
        Ok(Some(g))
    }

    /// Builds every component and checks the invariants eagerly.
    pub fn build(&self) -> Result<Built> {
        let n = self.n_players();
        if self.plants.len() != n {
            return Err(ScenarioError::Invalid(format!("{} plants for {n} players", self.plants.len())));
        }
        let (game, cs) = self.game.build()?;
        let barrier = BarrierPenalty::new(self.rho, cs.clone())?;
        let plant = StackedPlant::new(self.plants.iter().map(|p| p.build()).collect::<Result<Vec<_>>>()?)?;
        let graph = self.graph()?;
        if self.mode.needs_graph() {
            match &graph {
                None => return Err(ScenarioError::Invalid(format!("{} mode needs a [graph] section", self.mode.name()))),
                Some(g) if !g.is_connected() => {
                    return Err(ScenarioError::Invalid("communication graph is not connected".into()))
                }
                _ => {}
            }
        }
        let y0 = match &self.init_outputs {
            InitOutputs::Slater => cs.slater_point().clone(),
            InitOutputs::Values(v) => {
                if v.len() != n {
                    return Err(ScenarioError::Invalid(format!("{} initial outputs for {n} players", v.len())));
                }
                DVector::from_vec(v.clone())
            }
        };
        if !cs.is_strictly_feasible(&y0) {
            let margins = cs.margins(&y0)?;
            let worst = (0..margins.len()).filter(|&l| !(margins[l] > 0.0)).collect::<Vec<_>>();
            let first = worst[0];
            return Err(ScenarioError::Invalid(format!(
                "initial outputs are not strictly feasible: constraint {} has margin {:e}",
                first + 1,
                margins[first]
            )));
        }
        self.sim.validate()?;
        if !(self.settle_tol > 0.0) {
            return Err(ScenarioError::Invalid("settle_tol must be positive".into()));
        }
        let consts = estimate_game_constants(&game, &cs, CONSTANT_SAMPLES, self.sim.seed)?;
        Ok(Built {
            game,
            constraints: cs,
            barrier,
            plant,
            graph,
            y0,
            mu_est: consts.mu,
            theta1_est: consts.theta1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let built = self.build()?;
        self.system(&built)?;
        Ok(())
    }

    /// Gain used in distributed mode: the explicit `k`, or `default_k` from
    /// `beta` (default [`DEFAULT_BETA`]) and the sampled `mu`.
    pub fn distributed_gain(&self, built: &Built) -> Result<Option<f64>> {
        match self.mode {
            ModeConfig::Distributed { k: Some(k), .. } => Ok(Some(k)),
            ModeConfig::Distributed { k: None, beta, .. } => Ok(Some(default_k(
                beta.unwrap_or(DEFAULT_BETA),
                built.mu_est,
                DEFAULT_K_SAFETY,
            )?)),
            _ => Ok(None),
        }
    }

    /// The closed loop and its initial state.
    pub fn system(&self, built: &Built) -> Result<(ClosedLoopSystem, DVector<f64>)> {
        let (plant, game, pen) = (built.plant.clone(), built.game.clone(), built.barrier.clone());
        let graph = built.graph.clone();
        let sys = match self.mode {
            ModeConfig::FullInfo => ClosedLoopSystem::assemble_full_info(plant, game, pen)?,
            ModeConfig::PartialInfo => ClosedLoopSystem::assemble_partial_info(plant, game, pen, graph.unwrap())?,
            ModeConfig::Distributed { epsilon, .. } => {
                let k = self.distributed_gain(built)?.unwrap();
                ClosedLoopSystem::assemble_distributed(plant, game, pen, graph.unwrap(), epsilon, k)?
            }
        };
        let x0 = match self.estimates {
            EstimatePolicy::Slater => sys.initial_state(&built.y0)?,
            EstimatePolicy::Outputs => {
                let est = sys.estimate_layout().consensus_estimates(&built.y0)?;
                sys.initial_state_with(&built.y0, &est)?
            }
        };
        Ok((sys, x0))
    }

    /// Renders the scenario back to the text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[scenario]\nname = {}\n", self.name);
        s.push_str("[game]\n");
        match &self.game {
            GameConfig::Quadratic {
                weight,
                targets,
                coupling,
                budget,
                nonnegative,
            } => {
                let _ = writeln!(
                    s,
                    "kind = quadratic\nweight = {weight}\ntargets = {}\ncoupling = {coupling}\nbudget = {budget}\nnonnegative = {nonnegative}",
                    fmt_list(targets)
                );
            }
            GameConfig::Osnr(p) => {
                let _ = writeln!(s, "kind = osnr\nchannels = {}\nmax_power = {}", p.channels, p.max_power);
                for (k, v) in [("price", &p.price), ("utility", &p.utility), ("gain", &p.gain), ("noise", &p.noise)] {
                    if let Some(v) = v {
                        let _ = writeln!(s, "{k} = {}", fmt_list(v));
                    }
                }
                if let Some(c) = p.crosstalk {
                    let _ = writeln!(s, "crosstalk = {c}");
                }
            }
            GameConfig::LeaderFollower {
                agents,
                leader,
                max_gap,
            } => {
                let _ = writeln!(s, "kind = leader_follower\nagents = {agents}\nleader = {leader}\nmax_gap = {max_gap}");
            }
        }
        s.push_str("\n[plants]\n");
        let first = self.plants[0];
        if self.plants.iter().all(|p| *p == first) {
            let _ = writeln!(s, "all = {first}");
        } else {
            for (i, p) in self.plants.iter().enumerate() {
                let _ = writeln!(s, "agent.{} = {p}", i + 1);
            }
        }
        if let Some(g) = &self.graph {
            s.push_str("\n[graph]\n");
            match g {
                GraphSource::Edges(e) => {
                    let edges = e.iter().map(|(a, b)| format!("{a}-{b}")).collect::<Vec<_>>().join(", ");
                    let _ = writeln!(s, "edges = {edges}");
                }
                GraphSource::Fixture(f) => {
                    let _ = writeln!(s, "fixture = {f}");
                }
                GraphSource::Complete => s.push_str("kind = complete\n"),
                GraphSource::Path => s.push_str("kind = path\n"),
            }
        }
        let _ = writeln!(s, "\n[mode]\nkind = {}", self.mode.name());
        if let ModeConfig::Distributed { epsilon, k, beta } = self.mode {
            let _ = writeln!(s, "epsilon = {epsilon}");
            if let Some(b) = beta {
                let _ = writeln!(s, "beta = {b}");
            }
            if let Some(k) = k {
                let _ = writeln!(s, "k = {k}");
            }
        }
        let _ = writeln!(s, "\n[barrier]\nrho = {}\n", self.rho);
        s.push_str("[init]\n");
        match &self.init_outputs {
            InitOutputs::Slater => s.push_str("outputs = slater\n"),
            InitOutputs::Values(v) => {
                let _ = writeln!(s, "outputs = {}", fmt_list(v));
            }
        }
        let _ = writeln!(
            s,
            "estimates = {}\n",
            match self.estimates {
                EstimatePolicy::Slater => "slater",
                EstimatePolicy::Outputs => "outputs",
            }
        );
        let c = &self.sim;
        let _ = writeln!(
            s,
            "[sim]\ndt = {}\ndt_min = {}\nt_final = {}\nrecord_stride = {}\ninterior_margin = {}\nseed = {}\nsettle_tol = {}",
            c.dt, c.dt_min, c.t_final, c.record_stride, c.interior_margin, c.seed, self.settle_tol
        );
        s
    }
}
