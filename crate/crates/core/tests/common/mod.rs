#![allow(dead_code)]

use gne_core::game::catalog::{leader_follower, osnr, quadratic_budget, OsnrGame};
use gne_core::game::{ConstraintSet, GameSpec};
use gne_core::graph::CommGraph;
use gne_core::plants::{PlantModel, SpringLaw, StackedPlant};
use proptest::test_runner::{Config, RngSeed};

pub fn config(seed: u64) -> Config {
    Config {
        cases: 100,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        ..Config::default()
    }
}

pub struct Case {
    pub name: &'static str,
    pub game: GameSpec,
    pub cs: ConstraintSet,
    pub graph: CommGraph,
}

pub fn osnr10_graph() -> CommGraph {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/osnr10.edges")).unwrap();
    CommGraph::parse_edge_list(&text, Some(10)).unwrap()
}

pub fn catalog() -> Vec<Case> {
    let (g1, c1) = quadratic_budget(0.5, vec![1.0, 1.5, 2.0], 0.2, 3.0, true).unwrap();
    let (g2, c2) = quadratic_budget(1.0, vec![1.0, 1.0], 1.0, 1.0, false).unwrap();
    let (g3, c3) = osnr(OsnrGame::with_defaults(10), 10.0).unwrap();
    let (g4, c4) = leader_follower(5, 3.0, 3.0).unwrap();
    vec![
        Case { name: "quad3", game: g1, cs: c1, graph: CommGraph::complete(3) },
        Case { name: "qp2", game: g2, cs: c2, graph: CommGraph::path(2) },
        Case { name: "osnr10", game: g3, cs: c3, graph: osnr10_graph() },
        Case { name: "robots5", game: g4, cs: c4, graph: CommGraph::path(5) },
    ]
}

pub fn integrators(n: usize) -> StackedPlant {
    StackedPlant::new((0..n).map(|_| PlantModel::integrator(1).unwrap()).collect()).unwrap()
}

pub fn pi_cascades(n: usize) -> StackedPlant {
    StackedPlant::new((0..n).map(|_| PlantModel::pi_cascade(1, 1.0, 0.5).unwrap()).collect()).unwrap()
}

pub fn robots(n: usize) -> StackedPlant {
    StackedPlant::new(
        (0..n)
            .map(|_| PlantModel::flexible_robot(1.0, 1.0, 1.0, SpringLaw::LinearPlusAtan).unwrap())
            .collect(),
    )
    .unwrap()
}

/// One plant family per catalog agent count, cycling through the catalog.
pub fn plant_families(n: usize) -> Vec<StackedPlant> {
    vec![integrators(n), pi_cascades(n), robots(n)]
}
