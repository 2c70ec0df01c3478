//! Undirected network topologies and their Laplacian spectra.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eigen::symmetric_eigenvalues;
use crate::error::{Error, Result};

/// Attempts a random generator makes before giving up on connectivity.
pub const MAX_GENERATION_ATTEMPTS: usize = 1000;

/// Threshold on λ₂ used to call a graph connected from its spectrum.
pub const CONNECTIVITY_TOLERANCE: f64 = 1e-8;

/// An undirected, unweighted simple graph stored as a dense 0/1 adjacency matrix.
///
/// Immutable once built. The Laplacian spectrum is computed on first use and cached.
#[derive(Debug, Clone)]
pub struct Network {
    node_count: usize,
    adjacency: Vec<u8>,
    degrees: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
    spectrum: OnceLock<Vec<f64>>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.node_count == other.node_count && self.adjacency == other.adjacency
    }
}

impl Network {
    /// Builds a network from unordered node pairs. Duplicate edges collapse to one.
    ///
    /// Connectivity is not checked here; see [`Network::is_connected`].
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::TooFewNodes { min: 1, got: 0 });
        }
        let mut adjacency = vec![0u8; node_count * node_count];
        for &(u, v) in edges {
            for index in [u, v] {
                if index >= node_count {
                    return Err(Error::IndexOutOfRange { index, node_count });
                }
            }
            if u == v {
                return Err(Error::InvalidEdge(u, v));
            }
            adjacency[u * node_count + v] = 1;
            adjacency[v * node_count + u] = 1;
        }
        Ok(Self::from_adjacency(node_count, adjacency))
    }

    fn from_adjacency(node_count: usize, adjacency: Vec<u8>) -> Self {
        let neighbors: Vec<Vec<usize>> = (0..node_count)
            .map(|n| {
                (0..node_count)
                    .filter(|&l| adjacency[n * node_count + l] == 1)
                    .collect()
            })
            .collect();
        let degrees = neighbors.iter().map(Vec::len).collect();
        Self {
            node_count,
            adjacency,
            degrees,
            neighbors,
            spectrum: OnceLock::new(),
        }
    }

    /// Complete graph K_N.
    pub fn complete(node_count: usize) -> Result<Self> {
        let edges: Vec<_> = (0..node_count)
            .flat_map(|u| ((u + 1)..node_count).map(move |v| (u, v)))
            .collect();
        Self::from_edges(node_count, &edges)
    }

    /// Path 0 - 1 - ... - (N-1).
    pub fn path(node_count: usize) -> Result<Self> {
        let edges: Vec<_> = (1..node_count).map(|v| (v - 1, v)).collect();
        Self::from_edges(node_count, &edges)
    }

    /// Cycle on N ≥ 3 nodes.
    pub fn cycle(node_count: usize) -> Result<Self> {
        if node_count < 3 {
            return Err(Error::TooFewNodes {
                min: 3,
                got: node_count,
            });
        }
        let edges: Vec<_> = (0..node_count).map(|v| (v, (v + 1) % node_count)).collect();
        Self::from_edges(node_count, &edges)
    }

    /// Random geometric graph on the unit square: nodes uniform, edge iff distance ≤ `radius`.
    ///
    /// Placements are redrawn from the same stream until the graph is connected,
    /// at most [`MAX_GENERATION_ATTEMPTS`] times.
    pub fn random_geometric(node_count: usize, radius: f64, seed: u64) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::TooFewNodes {
                min: 2,
                got: node_count,
            });
        }
        if !(0.0..=std::f64::consts::SQRT_2).contains(&radius) {
            return Err(Error::InvalidParameter(format!(
                "radius {radius} outside [0, sqrt(2)]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r2 = radius * radius;
        for _ in 0..MAX_GENERATION_ATTEMPTS {
            let points: Vec<(f64, f64)> = (0..node_count)
                .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
                .collect();
            let mut adjacency = vec![0u8; node_count * node_count];
            for u in 0..node_count {
                for v in (u + 1)..node_count {
                    let dx = points[u].0 - points[v].0;
                    let dy = points[u].1 - points[v].1;
                    if dx * dx + dy * dy <= r2 {
                        adjacency[u * node_count + v] = 1;
                        adjacency[v * node_count + u] = 1;
                    }
                }
            }
            let net = Self::from_adjacency(node_count, adjacency);
            if net.is_connected() {
                return Ok(net);
            }
        }
        Err(Error::GenerationFailed {
            attempts: MAX_GENERATION_ATTEMPTS,
        })
    }

    /// Erdős–Rényi G(N, p), redrawn until connected (bounded like [`Network::random_geometric`]).
    pub fn erdos_renyi(node_count: usize, edge_probability: f64, seed: u64) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::TooFewNodes {
                min: 2,
                got: node_count,
            });
        }
        if !(0.0..=1.0).contains(&edge_probability) {
            return Err(Error::InvalidParameter(format!(
                "edge probability {edge_probability} outside [0, 1]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_GENERATION_ATTEMPTS {
            let mut adjacency = vec![0u8; node_count * node_count];
            for u in 0..node_count {
                for v in (u + 1)..node_count {
                    if rng.random_bool(edge_probability) {
                        adjacency[u * node_count + v] = 1;
                        adjacency[v * node_count + u] = 1;
                    }
                }
            }
            let net = Self::from_adjacency(node_count, adjacency);
            if net.is_connected() {
                return Ok(net);
            }
        }
        Err(Error::GenerationFailed {
            attempts: MAX_GENERATION_ATTEMPTS,
        })
    }

    /// Parses the edge-list text format: first line `N`, then `u v` per line, `#` comments.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut node_count = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match node_count {
                None => {
                    if fields.len() != 1 {
                        return Err(parse_err(format!("expected node count, got {line:?}")));
                    }
                    let n: usize = fields[0]
                        .parse()
                        .map_err(|e| parse_err(format!("bad node count: {e}")))?;
                    node_count = Some(n);
                }
                Some(n) => {
                    if fields.len() != 2 {
                        return Err(parse_err(format!("expected `u v`, got {line:?}")));
                    }
                    let u: usize = fields[0]
                        .parse()
                        .map_err(|e| parse_err(format!("bad node index: {e}")))?;
                    let v: usize = fields[1]
                        .parse()
                        .map_err(|e| parse_err(format!("bad node index: {e}")))?;
                    for index in [u, v] {
                        if index >= n {
                            return Err(parse_err(format!(
                                "node {index} out of range for N = {n}"
                            )));
                        }
                    }
                    edges.push((u, v));
                }
            }
        }
        let node_count = node_count.ok_or(Error::Parse {
            line: 0,
            message: "missing node count".into(),
        })?;
        Self::from_edges(node_count, &edges)
    }

    /// Serializes to the edge-list format read by [`Network::parse_edge_list`].
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.node_count);
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u * self.node_count + v] == 1
    }

    /// Edges as (u, v) with u < v, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count).flat_map(move |u| {
            self.neighbors[u]
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.degrees.iter().sum::<usize>() / 2
    }

    /// Sorted neighbor indices of node `n`.
    pub fn neighbors(&self, n: usize) -> &[usize] {
        &self.neighbors[n]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// d_max.
    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    /// Laplacian D − A as an integer matrix (row-major).
    pub fn laplacian_int(&self) -> Vec<i64> {
        let n = self.node_count;
        let mut l: Vec<i64> = self.adjacency.iter().map(|&a| -(a as i64)).collect();
        for i in 0..n {
            l[i * n + i] = self.degrees[i] as i64;
        }
        l
    }

    /// Laplacian D − A (row-major).
    pub fn laplacian(&self) -> Vec<f64> {
        self.laplacian_int().into_iter().map(|v| v as f64).collect()
    }

    /// (L·v)_n = d_n v_n − Σ_{l∈N(n)} v_l.
    pub fn laplacian_apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.node_count)
            .map(|n| {
                let s: f64 = self.neighbors[n].iter().map(|&l| v[l]).sum();
                self.degrees[n] as f64 * v[n] - s
            })
            .collect()
    }

    /// Laplacian eigenvalues, ascending.
    pub fn laplacian_spectrum(&self) -> &[f64] {
        self.spectrum
            .get_or_init(|| symmetric_eigenvalues(&self.laplacian(), self.node_count))
    }

    /// λ₂(L), the algebraic connectivity. Zero for a single node.
    pub fn algebraic_connectivity(&self) -> f64 {
        let spec = self.laplacian_spectrum();
        if spec.len() < 2 {
            0.0
        } else {
            spec[1].max(0.0)
        }
    }

    /// Breadth-first search from node 0 reaches every node.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.node_count];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        reached == self.node_count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn two_node_laplacian() {
        let g = Network::from_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(g.laplacian_int(), vec![1, -1, -1, 1]);
        assert!(close(g.algebraic_connectivity(), 2.0, 1e-10));
    }

    #[test]
    fn empty_graph_is_disconnected() {
        let g = Network::from_edges(3, &[]).unwrap();
        assert!(g.laplacian_int().iter().all(|&v| v == 0));
        assert_eq!(g.algebraic_connectivity(), 0.0);
        assert!(!g.is_connected());
    }

    #[test]
    fn triangle_degrees() {
        let g = Network::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(g.degrees(), &[2, 2, 2]);
        let l = g.laplacian_int();
        assert!((0..3).all(|i| l[i * 3 + i] == 2));
        assert!(g.is_connected());
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = Network::from_edges(3, &[(0, 1), (1, 0), (0, 1)]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.degrees(), &[1, 1, 0]);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            Network::from_edges(3, &[(1, 1)]),
            Err(Error::InvalidEdge(1, 1))
        );
        assert_eq!(
            Network::from_edges(3, &[(0, 3)]),
            Err(Error::IndexOutOfRange {
                index: 3,
                node_count: 3
            })
        );
    }

    #[test]
    fn known_spectra() {
        let k4 = Network::complete(4).unwrap();
        assert!(close(k4.algebraic_connectivity(), 4.0, 1e-10));
        let c4 = Network::cycle(4).unwrap();
        let spec = c4.laplacian_spectrum();
        for (got, want) in spec.iter().zip([0.0, 2.0, 2.0, 4.0]) {
            assert!(close(*got, want, 1e-10), "{spec:?}");
        }
    }

    #[test]
    fn two_triangles_disconnected() {
        let g = Network::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        assert!(!g.is_connected());
        assert!(g.algebraic_connectivity() < CONNECTIVITY_TOLERANCE);
    }

    #[test]
    fn geometric_generator_edges() {
        let g = Network::random_geometric(2, std::f64::consts::SQRT_2, 1).unwrap();
        assert!(g.has_edge(0, 1));
        assert_eq!(
            Network::random_geometric(5, 0.0, 1),
            Err(Error::GenerationFailed {
                attempts: MAX_GENERATION_ATTEMPTS
            })
        );
        let g = Network::random_geometric(50, 0.3, 7).unwrap();
        assert!(g.is_connected());
        assert!(g.algebraic_connectivity() > 0.0);
    }

    #[test]
    fn erdos_renyi_extremes() {
        let g = Network::erdos_renyi(6, 1.0, 0).unwrap();
        assert!(close(g.algebraic_connectivity(), 6.0, 1e-10));
        assert!(matches!(
            Network::erdos_renyi(6, 0.0, 0),
            Err(Error::GenerationFailed { .. })
        ));
        let g = Network::erdos_renyi(10, 0.5, 3).unwrap();
        assert!(g.is_connected());
    }

    #[test]
    fn generators_are_seeded() {
        let a = Network::random_geometric(30, 0.35, 11).unwrap();
        let b = Network::random_geometric(30, 0.35, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn edge_list_format() {
        let text = "# ring\n4\n0 1\n1 2\n\n# comment\n2 3\n3 0\n";
        let g = Network::parse_edge_list(text).unwrap();
        assert_eq!(g, Network::cycle(4).unwrap());
        assert_eq!(Network::parse_edge_list(&g.to_edge_list()).unwrap(), g);

        let err = Network::parse_edge_list("3\n0 1\n1 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = Network::parse_edge_list("3\n0 5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(Network::parse_edge_list("# nothing\n").is_err());
        assert_eq!(
            Network::parse_edge_list("2\n1 1\n"),
            Err(Error::InvalidEdge(1, 1))
        );
    }

    #[test]
    fn laplacian_apply_matches_dense() {
        let g = Network::random_geometric(12, 0.5, 4).unwrap();
        let v: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let l = g.laplacian();
        let dense: Vec<f64> = (0..12)
            .map(|r| (0..12).map(|c| l[r * 12 + c] * v[c]).sum())
            .collect();
        for (a, b) in g.laplacian_apply(&v).iter().zip(&dense) {
            assert!(close(*a, *b, 1e-12));
        }
    }
}
