//! Random geometric graphs and doubly-stochastic mixing weights.
//!
//! Networks are generated by dropping nodes uniformly in the unit square and
//! connecting pairs closer than a radius, regenerating until the graph is
//! connected. The mixing matrix uses lazy Metropolis weights, which are
//! symmetric and doubly stochastic by construction; the second-largest
//! singular value drives how fast mixing contracts disagreement.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::rng::uniform01;

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

/// An undirected, connected communication graph with planar coordinates.
#[derive(Debug, Clone)]
pub struct Network {
    coordinates: Vec<[f64; 2]>,
    neighbors: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    attempts: usize,
}

impl Network {
    /// Build the geometric graph induced by `coordinates`: an edge joins two
    /// nodes iff their Euclidean distance is strictly below `radius`.
    pub fn from_coordinates(coordinates: Vec<[f64; 2]>, radius: f64) -> Self {
        let n = coordinates.len();
        let mut neighbors = vec![Vec::new(); n];
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = coordinates[i][0] - coordinates[j][0];
                let dy = coordinates[i][1] - coordinates[j][1];
                if (dx * dx + dy * dy).sqrt() < radius {
                    neighbors[i].push(j);
                    neighbors[j].push(i);
                    edges.push((i, j));
                }
            }
        }
        Network {
            coordinates,
            neighbors,
            edges,
            attempts: 1,
        }
    }

    /// Sample nodes uniformly in the unit square and retry from scratch until
    /// the induced geometric graph is connected.
    pub fn generate_rgg(
        n: usize,
        radius: f64,
        rng: &mut impl RngCore,
        max_attempts: usize,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("network size must be >= 2, got {n}")));
        }
        if radius <= 0.0 {
            return Err(Error::Config(format!("radius must be positive, got {radius}")));
        }
        for attempt in 1..=max_attempts {
            let coordinates: Vec<[f64; 2]> = (0..n)
                .map(|_| [uniform01(rng), uniform01(rng)])
                .collect();
            let mut network = Network::from_coordinates(coordinates, radius);
            if network.is_connected() {
                network.attempts = attempt;
                return Ok(network);
            }
        }
        Err(Error::Disconnected {
            n,
            radius,
            attempts: max_attempts,
        })
    }

    pub fn node_count(&self) -> usize {
        self.coordinates.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    pub fn coordinates(&self, node: usize) -> [f64; 2] {
        self.coordinates[node]
    }

    /// Generation attempts used before a connected graph appeared.
    pub fn attempts(&self) -> usize {
        self.attempts
    }

    /// Single breadth-first traversal from node 0.
    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut queue = vec![0usize];
        seen[0] = true;
        let mut reached = 1;
        while let Some(node) = queue.pop() {
            for &next in &self.neighbors[node] {
                if !seen[next] {
                    seen[next] = true;
                    reached += 1;
                    queue.push(next);
                }
            }
        }
        reached == n
    }

    /// Write the adjacency-list format: first line `n`, then one line per
    /// node `id: x y: neighbor ids`.
    pub fn to_adjacency_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.node_count());
        for (node, coord) in self.coordinates.iter().enumerate() {
            let ids = self.neighbors[node]
                .iter()
                .map(|id| id.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(out, "{node}: {:.17e} {:.17e}: {ids}", coord[0], coord[1]);
        }
        out
    }

    pub fn write_adjacency(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_adjacency_string())?;
        Ok(())
    }

    pub fn from_adjacency_string(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or(Error::Parse {
            kind: "adjacency",
            line: 1,
            detail: "empty file".into(),
        })?;
        let n: usize = first.trim().parse().map_err(|_| Error::Parse {
            kind: "adjacency",
            line: 1,
            detail: format!("expected node count, got `{first}`"),
        })?;
        let mut coordinates = vec![[0.0; 2]; n];
        let mut neighbors = vec![Vec::new(); n];
        for (index, line) in lines {
            let line_no = index + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::Parse {
                    kind: "adjacency",
                    line: line_no,
                    detail: "expected `id: x y: neighbors`".into(),
                });
            }
            let bad = |detail: String| Error::Parse {
                kind: "adjacency",
                line: line_no,
                detail,
            };
            let node: usize = parts[0]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad node id `{}`", parts[0])))?;
            if node >= n {
                return Err(bad(format!("node id {node} out of range")));
            }
            let coords: Vec<f64> = parts[1]
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(format!("bad coordinate `{t}`"))))
                .collect::<Result<_>>()?;
            if coords.len() != 2 {
                return Err(bad("expected two coordinates".into()));
            }
            coordinates[node] = [coords[0], coords[1]];
            neighbors[node] = parts[2]
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(format!("bad neighbor id `{t}`"))))
                .collect::<Result<_>>()?;
        }
        let mut edges = Vec::new();
        for (i, list) in neighbors.iter().enumerate() {
            for &j in list {
                if i < j {
                    edges.push((i, j));
                }
            }
        }
        Ok(Network {
            coordinates,
            neighbors,
            edges,
            attempts: 1,
        })
    }

    pub fn read_adjacency(path: &Path) -> Result<Self> {
        Self::from_adjacency_string(&std::fs::read_to_string(path)?)
    }
}

// ---------------------------------------------------------------------------
// MixingMatrix
// ---------------------------------------------------------------------------

/// Doubly-stochastic mixing weights with a cached second-largest singular
/// value.
#[derive(Debug)]
pub struct MixingMatrix {
    weights: DMatrix<f64>,
    sigma2: OnceLock<f64>,
}

impl Clone for MixingMatrix {
    fn clone(&self) -> Self {
        let sigma2 = OnceLock::new();
        if let Some(&v) = self.sigma2.get() {
            let _ = sigma2.set(v);
        }
        MixingMatrix {
            weights: self.weights.clone(),
            sigma2,
        }
    }
}

/// Lazy Metropolis weights for a connected network:
/// `a_ij = 1 / (2 max(deg_i, deg_j))` on edges, zero off-graph, and the
/// diagonal absorbs the remainder so every row sums to one.
pub fn lazy_metropolis(network: &Network) -> MixingMatrix {
    let n = network.node_count();
    let mut weights = DMatrix::zeros(n, n);
    for &(i, j) in network.edges() {
        let weight = 1.0 / (2.0 * network.degree(i).max(network.degree(j)) as f64);
        weights[(i, j)] = weight;
        weights[(j, i)] = weight;
    }
    for i in 0..n {
        let off_diagonal: f64 = network.neighbors(i).iter().map(|&j| weights[(i, j)]).sum();
        weights[(i, i)] = 1.0 - off_diagonal;
    }
    MixingMatrix {
        weights,
        sigma2: OnceLock::new(),
    }
}

impl MixingMatrix {
    /// Wrap an explicit weight matrix. The caller is responsible for it
    /// being doubly stochastic; intended for hand-built test fixtures.
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        if weights.nrows() != weights.ncols() {
            return Err(Error::Config(format!(
                "mixing matrix must be square, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        Ok(MixingMatrix {
            weights,
            sigma2: OnceLock::new(),
        })
    }

    pub fn size(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Second-largest singular value, computed once by full SVD and cached.
    pub fn second_singular_value(&self) -> Result<f64> {
        if let Some(&cached) = self.sigma2.get() {
            return Ok(cached);
        }
        let n = self.size();
        // Degenerate single-node network: mixing is exact, no second mode.
        let value = if n < 2 {
            0.0
        } else {
            let mut singular = svd_values(&self.weights)?;
            singular.sort_by(|a, b| b.partial_cmp(a).unwrap());
            singular[1]
        };
        Ok(*self.sigma2.get_or_init(|| value))
    }

    /// Spectral norm of `A (I - (1/n) 1 1^T)`: the factor by which one
    /// mixing step contracts the disagreement component. Always at most the
    /// second-largest singular value.
    pub fn mixing_contraction(&self) -> Result<f64> {
        let n = self.size();
        if n < 2 {
            return Ok(0.0);
        }
        let centering = centering_matrix(n);
        let product = &self.weights * centering;
        let mut singular = svd_values(&product)?;
        singular.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(singular[0])
    }

    /// Entries as CSV, one row per line, 17 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for i in 0..self.size() {
            let row = (0..self.size())
                .map(|j| format!("{:.16e}", self.weights[(i, j)]))
                .collect::<Vec<_>>()
                .join(",");
            let _ = writeln!(out, "{row}");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// `I - (1/n) 1 1^T`, the projector that removes the consensus component.
pub fn centering_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        let identity = if i == j { 1.0 } else { 0.0 };
        identity - 1.0 / n as f64
    })
}

fn svd_values(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    let svd = matrix
        .clone()
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or(Error::SpectralFailure)?;
    Ok(svd.singular_values.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{CounterRng, Purpose};
    use approx::assert_relative_eq;

    fn rng(seed: u64) -> CounterRng {
        CounterRng::from_parts(seed, 0, 0, Purpose::GraphCoordinates)
    }

    fn path3() -> Network {
        // 0 -- 1 -- 2 on a line; radius 0.4 links only adjacent nodes.
        Network::from_coordinates(vec![[0.0, 0.0], [0.3, 0.0], [0.6, 0.0]], 0.4)
    }

    #[test]
    fn two_nodes_with_large_radius_always_connect() {
        for seed in 0..20 {
            let net = Network::generate_rgg(2, 2.0, &mut rng(seed), 10).unwrap();
            assert_eq!(net.edge_count(), 1);
            assert!(net.is_connected());
        }
    }

    #[test]
    fn three_collinear_nodes_with_gap_are_disconnected() {
        let net = Network::from_coordinates(vec![[0.0, 0.0], [0.3, 0.0], [0.9, 0.0]], 0.4);
        assert_eq!(net.edges(), &[(0, 1)]);
        assert!(!net.is_connected());
    }

    #[test]
    fn paper_scale_network_is_connected() {
        let net = Network::generate_rgg(50, 0.4, &mut rng(7), 1000).unwrap();
        assert!(net.is_connected());
        assert!(net.attempts() >= 1);
    }

    #[test]
    fn sparse_radius_fails_with_attempt_count() {
        match Network::generate_rgg(50, 0.01, &mut rng(11), 5) {
            Err(Error::Disconnected { attempts, .. }) => assert_eq!(attempts, 5),
            other => panic!("expected connectivity failure, got {other:?}"),
        }
    }

    #[test]
    fn lazy_metropolis_path3_matches_hand_computation() {
        let mixing = lazy_metropolis(&path3());
        let expected = [
            [0.75, 0.25, 0.0],
            [0.25, 0.5, 0.25],
            [0.0, 0.25, 0.75],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(mixing.entry(i, j), expected[i][j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn lazy_metropolis_two_nodes() {
        let net = Network::from_coordinates(vec![[0.0, 0.0], [0.1, 0.0]], 1.0);
        let mixing = lazy_metropolis(&net);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(mixing.entry(i, j), 0.5, epsilon = 1e-15);
            }
        }
        assert_relative_eq!(mixing.second_singular_value().unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(mixing.mixing_contraction().unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn path3_spectrum() {
        let mixing = lazy_metropolis(&path3());
        // Eigenvalues 1, 3/4, 1/4; symmetric PSD so singular values coincide.
        assert_relative_eq!(mixing.second_singular_value().unwrap(), 0.75, epsilon = 1e-12);
        assert_relative_eq!(mixing.mixing_contraction().unwrap(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn generated_matrices_satisfy_mixing_invariants() {
        for seed in 0..100 {
            let net = Network::generate_rgg(20, 0.5, &mut rng(1000 + seed), 1000).unwrap();
            let mixing = lazy_metropolis(&net);
            let a = mixing.weights();
            let n = net.node_count();
            for i in 0..n {
                assert!((a.row(i).sum() - 1.0).abs() < 1e-12, "row sum off");
                assert!((a.column(i).sum() - 1.0).abs() < 1e-12, "column sum off");
                assert!(a[(i, i)] > 0.0, "lazy diagonal must be positive");
                for j in 0..n {
                    assert!(a[(i, j)] >= 0.0);
                    assert_eq!(a[(i, j)], a[(j, i)], "symmetry must be exact");
                    if i != j {
                        let adjacent = net.neighbors(i).contains(&j);
                        assert_eq!(a[(i, j)] > 0.0, adjacent, "support must match edges");
                    }
                }
            }
            let sigma2 = mixing.second_singular_value().unwrap();
            assert!(sigma2 < 1.0, "connected graph needs sigma2 < 1, got {sigma2}");
            assert!(mixing.mixing_contraction().unwrap() <= sigma2 + 1e-10);
        }
    }

    #[test]
    fn averaging_is_a_fixed_point() {
        let net = Network::generate_rgg(15, 0.6, &mut rng(3), 1000).unwrap();
        let mixing = lazy_metropolis(&net);
        let ones = DMatrix::from_element(net.node_count(), 1, 1.0);
        let forward = mixing.weights() * &ones;
        let backward = ones.transpose() * mixing.weights();
        for i in 0..net.node_count() {
            assert_relative_eq!(forward[(i, 0)], 1.0, epsilon = 1e-12);
            assert_relative_eq!(backward[(0, i)], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_node_contraction_is_zero() {
        let mixing = MixingMatrix::from_weights(DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert_eq!(mixing.second_singular_value().unwrap(), 0.0);
        assert_eq!(mixing.mixing_contraction().unwrap(), 0.0);
    }

    #[test]
    fn adjacency_round_trip() {
        let net = Network::generate_rgg(12, 0.5, &mut rng(5), 1000).unwrap();
        let text = net.to_adjacency_string();
        let restored = Network::from_adjacency_string(&text).unwrap();
        assert_eq!(restored.node_count(), net.node_count());
        assert_eq!(restored.edges(), net.edges());
        for i in 0..net.node_count() {
            assert_eq!(restored.coordinates(i), net.coordinates(i));
            assert_eq!(restored.neighbors(i), net.neighbors(i));
        }
    }

    #[test]
    fn adjacency_rejects_garbage() {
        assert!(Network::from_adjacency_string("").is_err());
        assert!(Network::from_adjacency_string("2\nnot a line\n").is_err());
        assert!(Network::from_adjacency_string("1\n5: 0.0 0.0:\n").is_err());
    }
}
