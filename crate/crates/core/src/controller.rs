//! Gradient-based formation control with centroid tracking.

use serde::{Deserialize, Serialize};

use crate::formation::FormationSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlGains {
    /// Centroid tracking gain K_P.
    pub k_p: f64,
    /// Formation (distance) gain K_F.
    pub k_f: f64,
}

impl Default for ControlGains {
    fn default() -> Self {
        ControlGains { k_p: 10.0, k_f: 50.0 }
    }
}

impl ControlGains {
    /// Tracking needs the estimator gain to dominate both control gains.
    /// Returns a warning when `k_e` is less than twice the larger of them.
    pub fn separation_warning(&self, k_e: f64) -> Option<String> {
        let max = self.k_p.max(self.k_f);
        (k_e < 2.0 * max).then(|| {
            format!(
                "estimator gain K_E = {k_e} is not well above K_P = {}, K_F = {}; centroid tracking may lag",
                self.k_p, self.k_f
            )
        })
    }
}

/// Desired centroid `(t, 0, 5 − 5 tanh(t − T/2))` in meters.
pub fn reference_trajectory(t: f64, horizon: f64) -> [f64; 3] {
    [t, 0.0, 5.0 - 5.0 * (t - 0.5 * horizon).tanh()]
}

/// Formation part of agent `i`'s command:
/// `−k_f Σ_{j∈N_i} a_ij (‖p̂_i − p̂_j‖² − d_ij²)(p̂_i − p̂_j)`, added into `out`.
pub fn formation_term(i: usize, estimates: &[f64], graph: &FormationSpec, k_f: f64, out: &mut [f64]) {
    let d = graph.d;
    if d == 3 {
        formation_term_3d(i, estimates, graph, k_f, out);
        return;
    }
    let pi = &estimates[i * d..(i + 1) * d];
    for nb in graph.neighbors(i) {
        let pj = &estimates[nb.node * d..(nb.node + 1) * d];
        let mut sq = 0.0;
        for k in 0..d {
            let e = pi[k] - pj[k];
            sq += e * e;
        }
        let c = -k_f * nb.weight * (sq - nb.distance * nb.distance);
        for k in 0..d {
            out[k] += c * (pi[k] - pj[k]);
        }
    }
}

fn formation_term_3d(i: usize, estimates: &[f64], graph: &FormationSpec, k_f: f64, out: &mut [f64]) {
    let pi = &estimates[i * 3..i * 3 + 3];
    let mut acc = [0.0; 3];
    for nb in graph.neighbors(i) {
        let pj = &estimates[nb.node * 3..nb.node * 3 + 3];
        let e = [pi[0] - pj[0], pi[1] - pj[1], pi[2] - pj[2]];
        let sq = e[0] * e[0] + e[1] * e[1] + e[2] * e[2];
        let c = -k_f * nb.weight * (sq - nb.distance * nb.distance);
        acc[0] += c * e[0];
        acc[1] += c * e[1];
        acc[2] += c * e[2];
    }
    out[0] += acc[0];
    out[1] += acc[1];
    out[2] += acc[2];
}

/// Commanded velocity of agent `i` given its local centroid estimate and
/// the current reference point.
pub fn control_input(
    i: usize,
    estimates: &[f64],
    local_centroid: &[f64],
    reference: &[f64],
    graph: &FormationSpec,
    gains: &ControlGains,
    out: &mut [f64],
) {
    let track = -gains.k_p * graph.node_weights[i];
    for k in 0..graph.d {
        out[k] = track * (local_centroid[k] - reference[k]);
    }
    formation_term(i, estimates, graph, gains.k_f, out);
}

/// Distance potential `¼ Σ_{(i,j)∈E} a_ij (‖p_i − p_j‖² − d_ij²)²`; the
/// formation term is `−k_f` times its gradient.
pub fn formation_potential(positions: &[f64], graph: &FormationSpec) -> f64 {
    let d = graph.d;
    graph
        .edges
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let sq: f64 = (0..d)
                .map(|c| {
                    let e = positions[i * d + c] - positions[j * d + c];
                    e * e
                })
                .sum();
            let dij = graph.desired_distances[k];
            let r = sq - dij * dij;
            0.25 * graph.edge_weights[k] * r * r
        })
        .sum()
}
