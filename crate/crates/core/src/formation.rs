//! Target formations: slot geometry, sensing graph, desired distances,
//! centralities and consensus weights.
//!
//! Indices are zero-based inside the crate. Everything that leaves the
//! process (JSON dumps, CSV files) is one-based.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Edge set of the symmetric cube formation (one-based slot labels).
pub const SYMMETRIC_EDGES: [(usize, usize); 20] = [
    (1, 2),
    (1, 4),
    (1, 5),
    (1, 6),
    (1, 8),
    (2, 3),
    (2, 4),
    (2, 6),
    (2, 8),
    (3, 4),
    (3, 5),
    (3, 6),
    (3, 7),
    (4, 6),
    (4, 8),
    (5, 6),
    (5, 7),
    (5, 8),
    (6, 7),
    (7, 8),
];

/// Edge set of the cube-with-center formation (one-based slot labels).
pub const ASYMMETRIC_EDGES: [(usize, usize); 22] = [
    (1, 2),
    (1, 4),
    (1, 5),
    (1, 6),
    (1, 8),
    (2, 3),
    (2, 4),
    (2, 6),
    (2, 7),
    (2, 8),
    (3, 4),
    (3, 5),
    (3, 7),
    (3, 8),
    (4, 7),
    (4, 8),
    (5, 6),
    (5, 7),
    (5, 8),
    (6, 7),
    (6, 8),
    (7, 8),
];

/// Singular values below this fraction of the largest one count as zero.
pub const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormationKind {
    /// All eight agents on the vertices of a cube.
    Symmetric,
    /// Seven cube vertices plus one agent at the barycenter.
    Asymmetric,
}

impl FormationKind {
    pub const ALL: [FormationKind; 2] = [FormationKind::Symmetric, FormationKind::Asymmetric];

    pub fn name(self) -> &'static str {
        match self {
            FormationKind::Symmetric => "symmetric",
            FormationKind::Asymmetric => "asymmetric",
        }
    }
}

impl fmt::Display for FormationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FormationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "symmetric" | "sym" => Ok(FormationKind::Symmetric),
            "asymmetric" | "asym" => Ok(FormationKind::Asymmetric),
            other => Err(Error::Config(format!(
                "unknown formation '{other}' (expected symmetric or asymmetric)"
            ))),
        }
    }
}

/// Immutable description of a target formation.
///
/// Edges are stored with `i < j`; `desired_distances` and `edge_weights`
/// are parallel to `edges`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationSpec {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub slot_positions: Vec<Vec<f64>>,
    pub edges: Vec<(usize, usize)>,
    pub desired_distances: Vec<f64>,
    pub centralities: Vec<f64>,
    pub node_weights: Vec<f64>,
    pub edge_weights: Vec<f64>,
    neighbors: Vec<Vec<Neighbor>>,
}

/// One entry of an adjacency list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub node: usize,
    pub weight: f64,
    pub distance: f64,
}

/// Canonical slot geometry: slot `s` (zero-based) sits at `d0 * bits(s)`,
/// least-significant bit on the x axis.
pub fn cube_slots(kind: FormationKind, d0: f64) -> Vec<Vec<f64>> {
    let mut slots: Vec<Vec<f64>> = (0..8usize)
        .map(|s| (0..3).map(|b| d0 * ((s >> b) & 1) as f64).collect())
        .collect();
    if kind == FormationKind::Asymmetric {
        slots[7] = vec![0.5 * d0; 3];
    }
    slots
}

pub fn build_formation(kind: FormationKind, d0: f64) -> Result<FormationSpec> {
    if !(d0 > 0.0 && d0.is_finite()) {
        return Err(Error::Formation(format!("cube side must be positive, got {d0}")));
    }
    let table: &[(usize, usize)] = match kind {
        FormationKind::Symmetric => &SYMMETRIC_EDGES,
        FormationKind::Asymmetric => &ASYMMETRIC_EDGES,
    };
    let edges = table.iter().map(|&(i, j)| (i - 1, j - 1)).collect();
    FormationSpec::new(kind.name(), cube_slots(kind, d0), edges)
}

impl FormationSpec {
    /// Builds a spec from geometry and an undirected edge list, deriving
    /// distances, centralities and weights. Validates every invariant.
    pub fn new(name: impl Into<String>, slot_positions: Vec<Vec<f64>>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let n = slot_positions.len();
        if n < 2 {
            return Err(Error::Formation(format!("need at least 2 slots, got {n}")));
        }
        let d = slot_positions[0].len();
        if d == 0 {
            return Err(Error::Formation("slot dimension must be at least 1".into()));
        }
        for (s, p) in slot_positions.iter().enumerate() {
            if p.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::Formation(format!("slot {} has a non-finite coordinate", s + 1)));
            }
        }

        let mut seen = BTreeSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(Error::IndexOutOfRange { index: a.max(b) + 1, n });
            }
            if a == b {
                return Err(Error::Formation(format!("self-loop on slot {}", a + 1)));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::Formation(format!("duplicate edge ({}, {})", e.0 + 1, e.1 + 1)));
            }
            normalized.push(e);
        }

        let desired_distances: Vec<f64> = normalized
            .iter()
            .map(|&(i, j)| distance(&slot_positions[i], &slot_positions[j]))
            .collect();
        if let Some(k) = desired_distances.iter().position(|&dij| dij <= 0.0) {
            let (i, j) = normalized[k];
            return Err(Error::Formation(format!(
                "slots {} and {} coincide, desired distance must be positive",
                i + 1,
                j + 1
            )));
        }

        let mut spec = FormationSpec {
            name: name.into(),
            n,
            d,
            slot_positions,
            edges: normalized,
            desired_distances,
            centralities: Vec::new(),
            node_weights: Vec::new(),
            edge_weights: Vec::new(),
            neighbors: Vec::new(),
        };
        if !spec.is_connected() {
            return Err(Error::Formation("sensing graph is not connected".into()));
        }

        spec.centralities = (0..n)
            .map(|i| {
                let sum: f64 = spec
                    .edges
                    .iter()
                    .zip(&spec.desired_distances)
                    .filter(|(&(a, b), _)| a == i || b == i)
                    .map(|(_, &dij)| dij)
                    .sum();
                (n as f64 - 1.0) / sum
            })
            .collect();
        let total: f64 = spec.centralities.iter().sum();
        spec.node_weights = spec.centralities.iter().map(|z| z / total).collect();
        spec.edge_weights = spec
            .edges
            .iter()
            .map(|&(i, j)| (spec.node_weights[i] * spec.node_weights[j]).sqrt())
            .collect();
        spec.rebuild_neighbors();
        Ok(spec)
    }

    /// Replaces the graph weights, for toy problems that need weights other
    /// than the centrality-derived ones.
    pub fn with_weights(mut self, node_weights: Vec<f64>, edge_weights: Vec<f64>) -> Result<Self> {
        if node_weights.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: node_weights.len(),
            });
        }
        if edge_weights.len() != self.edges.len() {
            return Err(Error::Dimension {
                expected: self.edges.len(),
                got: edge_weights.len(),
            });
        }
        if node_weights
            .iter()
            .chain(&edge_weights)
            .any(|&w| !(w > 0.0 && w.is_finite()))
        {
            return Err(Error::Formation("weights must be positive and finite".into()));
        }
        self.node_weights = node_weights;
        self.edge_weights = edge_weights;
        self.rebuild_neighbors();
        Ok(self)
    }

    fn rebuild_neighbors(&mut self) {
        let mut nb = vec![Vec::new(); self.n];
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            let (weight, distance) = (self.edge_weights[k], self.desired_distances[k]);
            nb[i].push(Neighbor {
                node: j,
                weight,
                distance,
            });
            nb[j].push(Neighbor {
                node: i,
                weight,
                distance,
            });
        }
        for list in &mut nb {
            list.sort_by_key(|e| e.node);
        }
        self.neighbors = nb;
    }

    /// Neighbors of node `i`, sorted by index.
    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn is_neighbor(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].iter().any(|e| e.node == j)
    }

    /// Desired distance between two adjacent nodes.
    pub fn desired_distance(&self, i: usize, j: usize) -> Option<f64> {
        self.neighbors[i].iter().find(|e| e.node == j).map(|e| e.distance)
    }

    /// Breadth-first reachability from node 0.
    pub fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Distance-based centrality `(n - 1) / sum of desired distances to neighbors`.
    pub fn centrality(&self, i: usize) -> Result<f64> {
        self.centralities
            .get(i)
            .copied()
            .ok_or(Error::IndexOutOfRange { index: i, n: self.n })
    }

    /// The `|E| x (n d)` rigidity matrix evaluated at the slot positions.
    pub fn rigidity_matrix(&self) -> DMatrix<f64> {
        let (n, d) = (self.n, self.d);
        let mut r = DMatrix::zeros(self.edges.len(), n * d);
        for (row, &(i, j)) in self.edges.iter().enumerate() {
            for k in 0..d {
                let diff = self.slot_positions[i][k] - self.slot_positions[j][k];
                r[(row, i * d + k)] = diff;
                r[(row, j * d + k)] = -diff;
            }
        }
        r
    }

    /// Numerical rank of the rigidity matrix.
    pub fn rigidity_rank(&self) -> usize {
        let r = self.rigidity_matrix();
        if r.nrows() == 0 {
            return 0;
        }
        let sv = r.singular_values();
        let max = sv.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > RANK_TOLERANCE * max).count()
    }

    /// Rank needed for infinitesimal rigidity, `n d - d (d + 1) / 2`.
    pub fn rigid_rank_target(&self) -> usize {
        (self.n * self.d).saturating_sub(self.d * (self.d + 1) / 2)
    }

    pub fn is_infinitesimally_rigid(&self) -> bool {
        self.rigidity_rank() == self.rigid_rank_target()
    }

    /// Re-indexes the formation by agent: node `a` of the result is the
    /// slot that `assignment` gives to agent `a`.
    pub fn relabel(&self, assignment: &AgentAssignment) -> FormationSpec {
        let slot_of = &assignment.slot_of;
        let mut agent_of = vec![0; self.n];
        for (agent, &slot) in slot_of.iter().enumerate() {
            agent_of[slot] = agent;
        }
        let mut spec = FormationSpec {
            name: self.name.clone(),
            n: self.n,
            d: self.d,
            slot_positions: slot_of.iter().map(|&s| self.slot_positions[s].clone()).collect(),
            edges: self
                .edges
                .iter()
                .map(|&(i, j)| {
                    let (a, b) = (agent_of[i], agent_of[j]);
                    (a.min(b), a.max(b))
                })
                .collect(),
            desired_distances: self.desired_distances.clone(),
            centralities: slot_of.iter().map(|&s| self.centralities[s]).collect(),
            node_weights: slot_of.iter().map(|&s| self.node_weights[s]).collect(),
            edge_weights: self.edge_weights.clone(),
            neighbors: Vec::new(),
        };
        spec.rebuild_neighbors();
        spec
    }

    pub fn to_dump(&self) -> FormationDump {
        FormationDump {
            name: self.name.clone(),
            n: self.n,
            d: self.d,
            slots: self
                .slot_positions
                .iter()
                .enumerate()
                .map(|(s, p)| SlotDump {
                    slot: s + 1,
                    position: p.clone(),
                    centrality: self.centralities[s],
                    node_weight: self.node_weights[s],
                    degree: self.degree(s),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .enumerate()
                .map(|(k, &(i, j))| EdgeDump {
                    i: i + 1,
                    j: j + 1,
                    distance: self.desired_distances[k],
                    weight: self.edge_weights[k],
                })
                .collect(),
            rigidity_rank: self.rigidity_rank(),
            rigid_rank_target: self.rigid_rank_target(),
            infinitesimally_rigid: self.is_infinitesimally_rigid(),
        }
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// JSON view of a formation, one-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FormationDump {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub slots: Vec<SlotDump>,
    pub edges: Vec<EdgeDump>,
    pub rigidity_rank: usize,
    pub rigid_rank_target: usize,
    pub infinitesimally_rigid: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlotDump {
    pub slot: usize,
    pub position: Vec<f64>,
    pub centrality: f64,
    pub node_weight: f64,
    pub degree: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeDump {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
    pub weight: f64,
}

/// User-supplied formation file.
///
/// ```json
/// { "name": "square", "slots": [[0,0,0],[1,0,0],[1,1,0],[0,1,0]],
///   "edges": [[1,2],[2,3],[3,4],[4,1],[1,3]] }
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormationFile {
    #[serde(default = "default_custom_name")]
    pub name: String,
    pub slots: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
}

fn default_custom_name() -> String {
    "custom".to_string()
}

impl FormationFile {
    /// Parses and validates a formation file. Structural errors carry the
    /// JSON path of the offending field.
    pub fn parse(text: &str) -> Result<FormationSpec> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: FormationFile = serde_path_to_error::deserialize(de).map_err(|e| Error::FormationSchema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        file.into_spec()
    }

    pub fn into_spec(self) -> Result<FormationSpec> {
        let n = self.slots.len();
        let dim = self.slots.first().map_or(0, Vec::len);
        for (s, p) in self.slots.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::FormationSchema {
                    path: format!("slots[{s}]"),
                    message: format!("expected {dim} coordinates, got {}", p.len()),
                });
            }
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for (k, &[i, j]) in self.edges.iter().enumerate() {
            for (c, v) in [i, j].into_iter().enumerate() {
                if v == 0 || v > n {
                    return Err(Error::FormationSchema {
                        path: format!("edges[{k}][{c}]"),
                        message: format!("slot label {v} outside 1..={n}"),
                    });
                }
            }
            edges.push((i - 1, j - 1));
        }
        FormationSpec::new(self.name, self.slots, edges)
    }
}

/// Agent-to-slot permutation. Agent `a` (which carries its own noise level)
/// occupies slot `slot_of[a]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgentAssignment {
    pub slot_of: Vec<usize>,
}

impl AgentAssignment {
    pub fn identity(n: usize) -> Self {
        AgentAssignment {
            slot_of: (0..n).collect(),
        }
    }

    pub fn from_slots(slot_of: Vec<usize>) -> Result<Self> {
        let n = slot_of.len();
        let mut seen = vec![false; n];
        for &s in &slot_of {
            if s >= n || std::mem::replace(&mut seen[s], true) {
                return Err(Error::Formation(format!("{slot_of:?} is not a permutation")));
            }
        }
        Ok(AgentAssignment { slot_of })
    }

    pub fn is_bijection(&self) -> bool {
        Self::from_slots(self.slot_of.clone()).is_ok()
    }
}

/// Uniformly random agent-to-slot permutation.
pub fn assign_agents<R: Rng + ?Sized>(n: usize, rng: &mut R) -> AgentAssignment {
    let mut slot_of: Vec<usize> = (0..n).collect();
    slot_of.shuffle(rng);
    AgentAssignment { slot_of }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-episode seed: `splitmix64(master ^ splitmix64(episode))`.
pub fn episode_seed(master: u64, episode: u64) -> u64 {
    splitmix64(master ^ splitmix64(episode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sym() -> FormationSpec {
        build_formation(FormationKind::Symmetric, 5.0).unwrap()
    }

    fn asym() -> FormationSpec {
        build_formation(FormationKind::Asymmetric, 5.0).unwrap()
    }

    #[test]
    fn edge_counts_follow_table() {
        let s = sym();
        assert_eq!(s.edges.len(), 20);
        assert!(s.edges.contains(&(0, 1)));
        let a = asym();
        assert_eq!(a.edges.len(), 22);
        assert!(a.edges.contains(&(1, 6)));
    }

    #[test]
    fn space_diagonal_distance() {
        let s = sym();
        let d18 = s.desired_distance(0, 7).unwrap();
        assert!((d18 - 5.0 * 3f64.sqrt()).abs() < 1e-12);
        assert!((d18 - 8.6603).abs() < 1e-4);
    }

    #[test]
    fn node7_centrality_sums_four_neighbors() {
        let s = sym();
        let slots = cube_slots(FormationKind::Symmetric, 5.0);
        let nb = [3usize, 5, 6, 8];
        assert_eq!(s.degree(6), 4);
        let sum: f64 = nb.iter().map(|&j| distance(&slots[6], &slots[j - 1])).sum();
        assert!((s.centrality(6).unwrap() - 7.0 / sum).abs() < 1e-14);
    }

    #[test]
    fn asymmetric_centralities_golden() {
        // Brute force: 7 / (sum of neighbor distances) on the canonical slots.
        let a = asym();
        let r3 = 3f64.sqrt();
        let r2 = 2f64.sqrt();
        let half = 2.5 * r3;
        let expected = [
            // 1: (0,0,0) -> 2 (5), 4 (5r2), 5 (5), 6 (5r2), 8 (center)
            7.0 / (5.0 + 5.0 * r2 + 5.0 + 5.0 * r2 + half),
            // 2: (5,0,0) -> 1, 3 (5r2), 4 (5), 6 (5), 7 (5r3), 8 (center)
            7.0 / (5.0 + 5.0 * r2 + 5.0 + 5.0 + 5.0 * r3 + half),
            // 3: (0,5,0) -> 2 (5r2), 4 (5), 5 (5r2), 7 (5), 8 (center)
            7.0 / (5.0 * r2 + 5.0 + 5.0 * r2 + 5.0 + half),
            // 4: (5,5,0) -> 1 (5r2), 2 (5), 3 (5), 7 (5r2), 8
            7.0 / (5.0 * r2 + 5.0 + 5.0 + 5.0 * r2 + half),
            // 5: (0,0,5) -> 1 (5), 3 (5r2), 6 (5), 7 (5), 8
            7.0 / (5.0 + 5.0 * r2 + 5.0 + 5.0 + half),
            // 6: (5,0,5) -> 1 (5r2), 2 (5), 5 (5), 7 (5r2), 8
            7.0 / (5.0 * r2 + 5.0 + 5.0 + 5.0 * r2 + half),
            // 7: (0,5,5) -> 2 (5r3), 3 (5), 4 (5r2), 5 (5), 6 (5r2), 8
            7.0 / (5.0 * r3 + 5.0 + 5.0 * r2 + 5.0 + 5.0 * r2 + half),
            // 8: center -> 1,2,3,4,5,6,7
            7.0 / (7.0 * half),
        ];
        for (i, e) in expected.iter().enumerate() {
            assert!((a.centralities[i] - e).abs() < 1e-13, "slot {}", i + 1);
        }
        // frozen after first computation
        let golden = [
            0.245853309512,
            0.199649479011,
            0.245853309512,
            0.245853309512,
            0.265139515271,
            0.245853309512,
            0.188514020211,
            0.230940107676,
        ];
        for (c, g) in a.centralities.iter().zip(golden) {
            assert!((c - g).abs() < 1e-11);
        }
    }

    #[test]
    fn weights_are_consistent() {
        for spec in [sym(), asym()] {
            let total: f64 = spec.node_weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for (k, &(i, j)) in spec.edges.iter().enumerate() {
                let w = spec.edge_weights[k];
                let prod = spec.node_weights[i] * spec.node_weights[j];
                assert!((w * w - prod).abs() <= 4.0 * f64::EPSILON * prod);
            }
            assert!(spec.centralities.iter().all(|&z| z > 0.0));
        }
    }

    #[test]
    fn builtins_are_connected_and_rigid() {
        for spec in [sym(), asym()] {
            assert!(spec.is_connected());
            assert_eq!(spec.rigidity_rank(), 18);
            assert!(spec.is_infinitesimally_rigid());
        }
    }

    #[test]
    fn collinear_triangle_is_not_rigid() {
        let slots = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]];
        let spec = FormationSpec::new("line", slots, vec![(0, 1), (1, 2)]).unwrap();
        assert_eq!(spec.rigidity_rank(), 2);
        assert!(spec.rigidity_rank() < spec.rigid_rank_target());
    }

    #[test]
    fn invalid_graphs_are_rejected() {
        let slots = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 1.0]];
        assert!(FormationSpec::new("x", slots.clone(), vec![(0, 1)]).is_err());
        assert!(FormationSpec::new("x", slots.clone(), vec![(0, 1), (1, 0), (1, 2)]).is_err());
        assert!(FormationSpec::new("x", slots.clone(), vec![(0, 0), (1, 2)]).is_err());
        assert!(FormationSpec::new("x", slots, vec![(0, 1), (1, 5)]).is_err());
        let same = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert!(FormationSpec::new("x", same, vec![(0, 1)]).is_err());
        assert!(build_formation(FormationKind::Symmetric, 0.0).is_err());
    }

    #[test]
    fn centrality_out_of_range() {
        assert!(matches!(sym().centrality(8), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn assignment_is_deterministic_bijection() {
        let a = assign_agents(8, &mut ChaCha8Rng::seed_from_u64(42));
        let b = assign_agents(8, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
        assert!(a.is_bijection());
    }

    #[test]
    fn episode_seeds_give_distinct_permutations() {
        let perms: BTreeSet<Vec<usize>> = (0..200u64)
            .map(|e| {
                let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(7, e));
                assign_agents(8, &mut rng).slot_of
            })
            .collect();
        // 200 draws from 40320 permutations: collisions are rare.
        assert!(perms.len() >= 195, "only {} distinct", perms.len());

        // each agent lands on each slot roughly 1/8 of the time
        let mut counts = [[0usize; 8]; 8];
        for e in 0..8000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(7, e));
            for (a, s) in assign_agents(8, &mut rng).slot_of.into_iter().enumerate() {
                counts[a][s] += 1;
            }
        }
        for row in counts {
            for c in row {
                assert!((800..1200).contains(&c), "count {c}");
            }
        }
    }

    #[test]
    fn relabel_permutes_roles() {
        let spec = asym();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let asg = assign_agents(8, &mut rng);
        let agents = spec.relabel(&asg);
        for a in 0..8 {
            assert_eq!(agents.centralities[a], spec.centralities[asg.slot_of[a]]);
        }
        for (k, &(i, j)) in agents.edges.iter().enumerate() {
            let d = distance(&agents.slot_positions[i], &agents.slot_positions[j]);
            assert!((d - agents.desired_distances[k]).abs() < 1e-12);
        }
        assert_eq!(agents.rigidity_rank(), 18);
    }

    #[test]
    fn custom_file_parses_and_reports_paths() {
        let ok = r#"{"name":"tri","slots":[[0,0],[1,0],[0,1]],"edges":[[1,2],[2,3],[3,1]]}"#;
        let spec = FormationFile::parse(ok).unwrap();
        assert_eq!(spec.n, 3);
        assert_eq!(spec.rigidity_rank(), 3);

        let bad_type = r#"{"slots":[[0,0],[1,"x"]],"edges":[]}"#;
        match FormationFile::parse(bad_type) {
            Err(Error::FormationSchema { path, .. }) => assert_eq!(path, "slots[1][1]"),
            other => panic!("unexpected {other:?}"),
        }
        let bad_label = r#"{"slots":[[0,0],[1,0]],"edges":[[1,3]]}"#;
        match FormationFile::parse(bad_label) {
            Err(Error::FormationSchema { path, .. }) => assert_eq!(path, "edges[0][1]"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
