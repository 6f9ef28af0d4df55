//! Undirected community adjacency and neighborhood averages.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::profile::Profile;
use crate::rng::rng_for;

/// Symmetric, loop-free graph over communities `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphDoc", into = "GraphDoc")]
pub struct NeighborhoodGraph {
    neighbors: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDoc {
    pub n_nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

impl NeighborhoodGraph {
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut sets = vec![BTreeSet::new(); n_nodes];
        for &(i, j) in edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(invalid(format!(
                    "edge ({i}, {j}) out of range for {n_nodes} nodes"
                )));
            }
            if i == j {
                return Err(invalid(format!("self-loop at node {i}")));
            }
            sets[i].insert(j);
            sets[j].insert(i);
        }
        Ok(NeighborhoodGraph {
            neighbors: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn complete(n_nodes: usize) -> Self {
        let edges: Vec<_> = (0..n_nodes)
            .flat_map(|i| (i + 1..n_nodes).map(move |j| (i, j)))
            .collect();
        NeighborhoodGraph::from_edges(n_nodes, &edges).expect("complete graph is valid")
    }

    pub fn path(n_nodes: usize) -> Self {
        let edges: Vec<_> = (1..n_nodes).map(|i| (i - 1, i)).collect();
        NeighborhoodGraph::from_edges(n_nodes, &edges).expect("path graph is valid")
    }

    /// Parses `i j` pairs, one per line, zero-based. Blank lines and text after
    /// `#` are ignored. When `n_nodes` is `None` it is inferred from the largest index.
    pub fn parse_edge_list(text: &str, n_nodes: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |s: Option<&str>| -> Result<usize> {
                s.ok_or_else(|| invalid(format!("edge list line {}: expected `i j`", lineno + 1)))?
                    .parse()
                    .map_err(|_| invalid(format!("edge list line {}: bad index", lineno + 1)))
            };
            let i = parse(parts.next())?;
            let j = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(invalid(format!(
                    "edge list line {}: trailing fields",
                    lineno + 1
                )));
            }
            edges.push((i, j));
        }
        let n =
            n_nodes.unwrap_or_else(|| edges.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0));
        NeighborhoodGraph::from_edges(n, &edges)
    }

    pub fn to_edge_list(&self) -> String {
        self.edges().map(|(i, j)| format!("{i} {j}\n")).collect()
    }

    pub fn n_nodes(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Each undirected edge once, as `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Fails with the first node that has no neighbors.
    pub fn require_no_isolated(&self) -> Result<()> {
        match self.neighbors.iter().position(Vec::is_empty) {
            Some(i) => Err(Error::IsolatedNode(i)),
            None => Ok(()),
        }
    }

    /// Writes `(1/N_i) sum_{j in N_i} values[j]` into `out`.
    pub fn neighbor_mean_into(&self, values: &Profile, i: usize, out: &mut [f64]) -> Result<()> {
        let ns = &self.neighbors[i];
        if ns.is_empty() {
            return Err(Error::IsolatedNode(i));
        }
        out.fill(0.0);
        for &j in ns {
            for (o, v) in out.iter_mut().zip(values.node(j)) {
                *o += v;
            }
        }
        let inv = 1.0 / ns.len() as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        Ok(())
    }

    pub fn neighbor_mean(&self, values: &Profile, i: usize) -> Result<Vec<f64>> {
        if values.n_nodes() != self.n_nodes() {
            return Err(invalid("profile and graph sizes differ"));
        }
        let mut out = vec![0.0; values.dim()];
        self.neighbor_mean_into(values, i, &mut out)?;
        Ok(out)
    }

    /// Deviations `d_i = v_i - mean_{N_i} v` for every node.
    pub fn deviations(&self, values: &Profile) -> Result<Profile> {
        if values.n_nodes() != self.n_nodes() {
            return Err(invalid("profile and graph sizes differ"));
        }
        let mut out = Profile::zeros(values.n_nodes(), values.dim());
        let mut mean = vec![0.0; values.dim()];
        for i in 0..self.n_nodes() {
            self.neighbor_mean_into(values, i, &mut mean)?;
            for ((o, v), m) in out.node_mut(i).iter_mut().zip(values.node(i)).zip(&mean) {
                *o = v - m;
            }
        }
        Ok(out)
    }
}

/// Erdős–Rényi graph with isolated nodes attached to one uniformly random
/// other node. Deterministic in `seed`.
pub fn random_graph(n: usize, edge_prob: f64, seed: u64) -> Result<NeighborhoodGraph> {
    if n < 2 {
        return Err(invalid("random graph needs at least two nodes"));
    }
    if !(edge_prob > 0.0 && edge_prob <= 1.0) {
        return Err(invalid("edge probability must lie in (0, 1]"));
    }
    let mut rng = rng_for(seed, &[crate::rng::stream::GRAPH]);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < edge_prob {
                edges.push((i, j));
            }
        }
    }
    let mut degree = vec![0usize; n];
    for &(i, j) in &edges {
        degree[i] += 1;
        degree[j] += 1;
    }
    for i in 0..n {
        if degree[i] == 0 {
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            edges.push((i, j));
            degree[i] += 1;
            degree[j] += 1;
        }
    }
    NeighborhoodGraph::from_edges(n, &edges)
}

impl TryFrom<GraphDoc> for NeighborhoodGraph {
    type Error = Error;

    fn try_from(doc: GraphDoc) -> Result<Self> {
        NeighborhoodGraph::from_edges(doc.n_nodes, &doc.edges)
    }
}

impl From<NeighborhoodGraph> for GraphDoc {
    fn from(g: NeighborhoodGraph) -> Self {
        GraphDoc {
            n_nodes: g.n_nodes(),
            edges: g.edges().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalars(v: &[f64]) -> Profile {
        Profile::from_flat(1, v.to_vec()).unwrap()
    }

    #[test]
    fn neighbor_mean_examples() {
        let path = NeighborhoodGraph::path(3);
        let v = scalars(&[1.0, 2.0, 3.0]);
        assert_eq!(path.neighbor_mean(&v, 1).unwrap(), vec![2.0]);
        assert_eq!(path.neighbor_mean(&v, 0).unwrap(), vec![2.0]);
        let k3 = NeighborhoodGraph::complete(3);
        assert_eq!(
            k3.neighbor_mean(&scalars(&[0.0, 3.0, 6.0]), 0).unwrap(),
            vec![4.5]
        );
        assert_eq!(
            k3.neighbor_mean(&scalars(&[0.0, 3.0, 6.0]), 1).unwrap(),
            vec![3.0]
        );
    }

    #[test]
    fn isolated_node_is_an_error() {
        let g = NeighborhoodGraph::from_edges(3, &[(0, 1)]).unwrap();
        let v = scalars(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            g.neighbor_mean(&v, 2),
            Err(Error::IsolatedNode(2))
        ));
        assert!(matches!(
            g.require_no_isolated(),
            Err(Error::IsolatedNode(2))
        ));
    }

    #[test]
    fn rejects_self_loops_and_out_of_range() {
        assert!(NeighborhoodGraph::from_edges(2, &[(0, 0)]).is_err());
        assert!(NeighborhoodGraph::from_edges(2, &[(0, 2)]).is_err());
    }

    #[test]
    fn two_node_random_graph_is_single_edge() {
        for seed in 0..20 {
            let g = random_graph(2, 0.01, seed).unwrap();
            assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);
        }
        assert!(random_graph(1, 0.5, 0).is_err());
    }

    #[test]
    fn random_graph_is_deterministic() {
        assert_eq!(
            random_graph(25, 0.2, 11).unwrap(),
            random_graph(25, 0.2, 11).unwrap()
        );
        assert_ne!(
            random_graph(25, 0.2, 11).unwrap(),
            random_graph(25, 0.2, 12).unwrap()
        );
    }

    #[test]
    fn edge_list_round_trip_and_errors() {
        let text = "# header\n0 1\n1 2  # trailing comment\n\n2 0\n";
        let g = NeighborhoodGraph::parse_edge_list(text, None).unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.neighbors(0), &[1, 2]);
        let again = NeighborhoodGraph::parse_edge_list(&g.to_edge_list(), Some(3)).unwrap();
        assert_eq!(g, again);
        assert!(NeighborhoodGraph::parse_edge_list("0 x\n", None).is_err());
        assert!(NeighborhoodGraph::parse_edge_list("0 1 2\n", None).is_err());
    }

    proptest! {
        #[test]
        fn random_graph_invariants(n in 2usize..30, p in 0.01f64..1.0, seed in any::<u64>()) {
            let g = random_graph(n, p, seed).unwrap();
            prop_assert_eq!(g.n_nodes(), n);
            for i in 0..n {
                prop_assert!(g.degree(i) >= 1);
                prop_assert!(!g.has_edge(i, i));
                for &j in g.neighbors(i) {
                    prop_assert!(g.has_edge(j, i));
                }
            }
        }

        #[test]
        fn neighbor_mean_is_linear(
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            v in prop::collection::vec(-10.0f64..10.0, 6),
            w in prop::collection::vec(-10.0f64..10.0, 6),
            seed in any::<u64>(),
        ) {
            let g = random_graph(6, 0.4, seed).unwrap();
            let pv = scalars(&v);
            let pw = scalars(&w);
            let combo = scalars(&v.iter().zip(&w).map(|(x, y)| a * x + b * y).collect::<Vec<_>>());
            for i in 0..6 {
                let lhs = g.neighbor_mean(&combo, i).unwrap()[0];
                let rhs = a * g.neighbor_mean(&pv, i).unwrap()[0] + b * g.neighbor_mean(&pw, i).unwrap()[0];
                prop_assert!((lhs - rhs).abs() < 1e-9);
            }
        }

        #[test]
        fn constant_values_have_zero_deviation(c in -100.0f64..100.0, seed in any::<u64>()) {
            let g = random_graph(8, 0.3, seed).unwrap();
            let d = g.deviations(&Profile::filled(8, 2, c)).unwrap();
            prop_assert!(d.as_slice().iter().all(|v| v.abs() < 1e-12));
        }
    }
}
