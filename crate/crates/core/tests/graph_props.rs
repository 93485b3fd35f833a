mod common;

use gne_core::graph::CommGraph;
use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use proptest::sample::subsequence;

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

fn random_graph() -> impl Strategy<Value = CommGraph> {
    (2usize..9).prop_flat_map(|n| {
        let pairs = all_pairs(n);
        let len = pairs.len();
        subsequence(pairs, 0..=len).prop_map(move |e| CommGraph::new(n, e).unwrap())
    })
}

fn relabeling() -> impl Strategy<Value = Vec<usize>> {
    Just((0..10).collect::<Vec<usize>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(common::config(303))]

    #[test]
    fn laplacian_is_symmetric_psd(g in random_graph()) {
        let l = g.laplacian();
        prop_assert_eq!(&l, &l.transpose());
        let min = SymmetricEigen::new(l).eigenvalues.min();
        prop_assert!(min >= -1e-10);
    }

    #[test]
    fn connectivity_agrees_with_spectrum(g in random_graph()) {
        prop_assert_eq!(g.is_connected(), g.algebraic_connectivity().unwrap() > 1e-10);
    }

    #[test]
    fn algebraic_connectivity_survives_relabeling(perm in relabeling()) {
        let g = common::osnr10_graph();
        let h = g.relabeled(&perm).unwrap();
        prop_assert!((g.algebraic_connectivity().unwrap() - h.algebraic_connectivity().unwrap()).abs() <= 1e-10);
    }
}

#[test]
fn catalog_graphs_are_psd() {
    for case in common::catalog() {
        let min = SymmetricEigen::new(case.graph.laplacian()).eigenvalues.min();
        assert!(min >= -1e-10, "{}", case.name);
    }
}
