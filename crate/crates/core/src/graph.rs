//! Undirected communication graphs and their Laplacian spectrum.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Edge list of the 10-node graph shipped with the optical link scenario.
pub const OSNR10_EDGES: &str = include_str!("../fixtures/osnr10.edges");

/// Undirected, unweighted graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl CommGraph {
    /// Builds a graph from zero-based edges. Duplicate and reversed pairs
    /// collapse to one edge; self-loops are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Contract(format!("self-loop at node {}", a + 1)));
            }
            if a >= n || b >= n {
                return Err(Error::Contract(format!(
                    "edge ({}, {}) references a node outside 1..={n}",
                    a + 1,
                    b + 1
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &set {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        Ok(Self {
            n,
            edges: set,
            neighbors,
        })
    }

    /// The 10-node graph of the optical link scenario.
    pub fn osnr10() -> Self {
        Self::parse_edge_list(OSNR10_EDGES, Some(10)).expect("shipped fixture parses")
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|i| (i - 1, i))).expect("path edges are valid")
    }

    pub fn complete(n: usize) -> Self {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
            .expect("complete-graph edges are valid")
    }

    /// Parses the edge-list fixture format: one `i j` pair per line with
    /// 1-based node indices; blank lines and lines starting with `#` are
    /// skipped. The node count is the largest index seen unless given.
    pub fn parse_edge_list(text: &str, n: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_node = 0;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| -> Result<usize> {
                let v: usize = s.parse().map_err(|_| {
                    Error::Contract(format!("line {}: invalid node index {s:?}", lineno + 1))
                })?;
                if v == 0 {
                    return Err(Error::Contract(format!(
                        "line {}: node indices are 1-based",
                        lineno + 1
                    )));
                }
                Ok(v)
            };
            if fields.len() != 2 {
                return Err(Error::Contract(format!(
                    "line {}: expected two node indices, found {:?}",
                    lineno + 1,
                    line
                )));
            }
            let (a, b) = (parse(fields[0])?, parse(fields[1])?);
            max_node = max_node.max(a).max(b);
            edges.push((a - 1, b - 1));
        }
        Self::new(n.unwrap_or(max_node), edges)
    }

    /// Renders the 1-based fixture format.
    pub fn to_edge_list(&self) -> String {
        self.edges
            .iter()
            .map(|(a, b)| format!("{} {}\n", a + 1, b + 1))
            .collect()
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// `L = D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for &(a, b) in &self.edges {
            l[(a, b)] -= 1.0;
            l[(b, a)] -= 1.0;
            l[(a, a)] += 1.0;
            l[(b, b)] += 1.0;
        }
        l
    }

    /// Laplacian eigenvalues in ascending order.
    pub fn laplacian_spectrum(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.laplacian()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Second-smallest Laplacian eigenvalue `lambda_2`.
    pub fn algebraic_connectivity(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::Contract("algebraic connectivity needs at least two nodes".into()));
        }
        Ok(self.laplacian_spectrum()[1])
    }

    /// Breadth-first reachability from node 0.
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &self.neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.n
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "node permutation",
                expected: self.n,
                actual: perm.len(),
            });
        }
        Self::new(self.n, self.edges.iter().map(|&(a, b)| (perm[a], perm[b])))
    }
}

/// Sufficient condition `mu (lambda_2 - theta_2) > theta_2^2` for the
/// partial-information loop. Strict: equality fails.
pub fn gain_condition(mu: f64, theta2: f64, lambda2: f64) -> bool {
    mu * (lambda2 - theta2) > theta2 * theta2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn small_laplacians() {
        assert_eq!(CommGraph::path(2).laplacian(), nalgebra::dmatrix![1.0, -1.0; -1.0, 1.0]);
        let l = CommGraph::complete(4).laplacian();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(l[(i, j)], if i == j { 3.0 } else { -1.0 });
            }
        }
    }

    #[test]
    fn row_sums_vanish() {
        let g = CommGraph::new(5, [(0, 1), (1, 2), (0, 3), (3, 4), (2, 4)]).unwrap();
        let l = g.laplacian();
        for i in 0..5 {
            assert_eq!(l.row(i).sum(), 0.0);
        }
    }

    #[test]
    fn known_spectra() {
        assert_abs_diff_eq!(CommGraph::complete(4).algebraic_connectivity().unwrap(), 4.0, epsilon = 1e-12);
        // P3 has spectrum {0, 1, 3}.
        assert_abs_diff_eq!(CommGraph::path(3).algebraic_connectivity().unwrap(), 1.0, epsilon = 1e-12);
        assert!(CommGraph::path(1).algebraic_connectivity().is_err());
    }

    #[test]
    fn connectivity() {
        let g = CommGraph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert!(!g.is_connected());
        assert!(CommGraph::path(5).is_connected());
    }

    #[test]
    fn gain_condition_examples() {
        assert!(gain_condition(2.0, 1.0, 2.0));
        assert!(!gain_condition(2.0, 1.0, 1.0));
        // 2 * (1.5 - 1) = 1 = 1^2
        assert!(!gain_condition(2.0, 1.0, 1.5));
    }

    #[test]
    fn parse_fixture_format() {
        let g = CommGraph::parse_edge_list("# triangle\n1 2\n\n2 3\n3 1\n", None).unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.n_edges(), 3);
        assert!(CommGraph::parse_edge_list("1 1\n", None).is_err());
        assert!(CommGraph::parse_edge_list("0 1\n", None).is_err());
        let err = CommGraph::parse_edge_list("1 2\n2 x\n", None).unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn edge_list_round_trip() {
        let g = CommGraph::new(4, [(0, 1), (2, 1), (3, 0)]).unwrap();
        assert_eq!(CommGraph::parse_edge_list(&g.to_edge_list(), Some(4)).unwrap(), g);
    }
}
