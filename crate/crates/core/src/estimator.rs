//! Distributed estimate of the stacked position vector, one copy per agent,
//! driven by weighted consensus with neighbors and anchored on each agent's
//! own estimate. The local centroid is the mean of the copy's blocks.
//!
//! Stacked vectors (positions, velocities) are flat slices of length `n * d`
//! with agent `j` occupying `[j * d, (j + 1) * d)`.

use crate::error::{Error, Result};
use crate::formation::FormationSpec;

/// Agent `i`'s copy q^i of the stacked estimated positions.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub d: usize,
    pub q: Vec<f64>,
}

impl EstimatorState {
    pub fn n(&self) -> usize {
        self.q.len() / self.d
    }

    pub fn block(&self, j: usize) -> &[f64] {
        &self.q[j * self.d..(j + 1) * self.d]
    }

    /// Local centroid estimate, the mean of all blocks.
    pub fn local_centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.d];
        self.local_centroid_into(&mut c);
        c
    }

    pub fn local_centroid_into(&self, out: &mut [f64]) {
        let inv = 1.0 / self.n() as f64;
        if self.d == 3 {
            let mut s = [0.0; 3];
            for b in self.q.chunks_exact(3) {
                s[0] += b[0];
                s[1] += b[1];
                s[2] += b[2];
            }
            out[..3].copy_from_slice(&[s[0] * inv, s[1] * inv, s[2] * inv]);
            return;
        }
        out.fill(0.0);
        for block in self.q.chunks_exact(self.d) {
            for (o, x) in out.iter_mut().zip(block) {
                *o += x;
            }
        }
        out.iter_mut().for_each(|o| *o *= inv);
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().all(|x| x.is_finite())
    }
}

/// Initial copies: blocks in the closed neighborhood of `i` take the
/// neighbor's own estimate, every other block takes the closed-neighborhood
/// average.
pub fn init_estimator(graph: &FormationSpec, estimates: &[f64]) -> Result<Vec<EstimatorState>> {
    let (n, d) = (graph.n, graph.d);
    if estimates.len() != n * d {
        return Err(Error::Dimension {
            expected: n * d,
            got: estimates.len(),
        });
    }
    let states = (0..n)
        .map(|i| {
            let closed: Vec<usize> = std::iter::once(i)
                .chain(graph.neighbors(i).iter().map(|e| e.node))
                .collect();
            let mut avg = vec![0.0; d];
            for &k in &closed {
                for (a, x) in avg.iter_mut().zip(&estimates[k * d..(k + 1) * d]) {
                    *a += x;
                }
            }
            let inv = 1.0 / closed.len() as f64;
            avg.iter_mut().for_each(|a| *a *= inv);

            let mut q = Vec::with_capacity(n * d);
            for j in 0..n {
                if closed.contains(&j) {
                    q.extend_from_slice(&estimates[j * d..(j + 1) * d]);
                } else {
                    q.extend_from_slice(&avg);
                }
            }
            EstimatorState { d, q }
        })
        .collect();
    Ok(states)
}

/// Time derivative of q^i:
/// `-k_e Σ_{j∈N_i} a_ij (q^i − q^j) − k_e a_ii S_i (q^i − p̂) + v^i`,
/// where `S_i` keeps block `i` only and `v^i` keeps the velocities of the
/// closed neighborhood of `i`.
///
/// Reads only the copies of neighbors, agent `i`'s own estimate and the
/// closed-neighborhood velocity blocks.
pub fn estimator_derivative(
    i: usize,
    states: &[EstimatorState],
    own_estimate: &[f64],
    velocities: &[f64],
    graph: &FormationSpec,
    k_e: f64,
    out: &mut [f64],
) {
    let d = graph.d;
    let qi = &states[i].q[..];
    let len = qi.len();
    let out = &mut out[..len];
    out.fill(0.0);
    for nb in graph.neighbors(i) {
        accumulate_difference(out, qi, &states[nb.node].q[..len], -k_e * nb.weight);
    }
    let anchor = -k_e * graph.node_weights[i];
    for k in 0..d {
        out[i * d + k] += anchor * (qi[i * d + k] - own_estimate[k]);
    }
    for j in std::iter::once(i).chain(graph.neighbors(i).iter().map(|e| e.node)) {
        let (o, v) = (&mut out[j * d..(j + 1) * d], &velocities[j * d..(j + 1) * d]);
        for (o, v) in o.iter_mut().zip(v) {
            *o += v;
        }
    }
}

/// `out += w (a − b)`, in blocks of four so the loop vectorizes.
#[inline]
fn accumulate_difference(out: &mut [f64], a: &[f64], b: &[f64], w: f64) {
    let mut o4 = out.chunks_exact_mut(4);
    let mut a4 = a.chunks_exact(4);
    let mut b4 = b.chunks_exact(4);
    for ((o, x), y) in (&mut o4).zip(&mut a4).zip(&mut b4) {
        o[0] += w * (x[0] - y[0]);
        o[1] += w * (x[1] - y[1]);
        o[2] += w * (x[2] - y[2]);
        o[3] += w * (x[3] - y[3]);
    }
    for ((o, x), y) in o4.into_remainder().iter_mut().zip(a4.remainder()).zip(b4.remainder()) {
        *o += w * (x - y);
    }
}

/// All agents' copies, advanced together with explicit Euler steps.
#[derive(Debug, Clone)]
pub struct ConsensusEstimator {
    pub states: Vec<EstimatorState>,
    next: Vec<EstimatorState>,
    rate: Vec<f64>,
}

impl ConsensusEstimator {
    pub fn new(graph: &FormationSpec, estimates: &[f64]) -> Result<Self> {
        let states = init_estimator(graph, estimates)?;
        Ok(ConsensusEstimator {
            next: states.clone(),
            rate: vec![0.0; graph.n * graph.d],
            states,
        })
    }

    /// Jacobi step: every derivative is evaluated on the current copies
    /// before any copy is overwritten.
    pub fn step(&mut self, graph: &FormationSpec, estimates: &[f64], velocities: &[f64], k_e: f64, dt: f64) {
        let d = graph.d;
        for i in 0..graph.n {
            estimator_derivative(
                i,
                &self.states,
                &estimates[i * d..(i + 1) * d],
                velocities,
                graph,
                k_e,
                &mut self.rate,
            );
            let len = self.rate.len();
            let (next, q, rate) = (&mut self.next[i].q[..len], &self.states[i].q[..len], &self.rate[..len]);
            for k in 0..len {
                next[k] = q[k] + dt * rate[k];
            }
        }
        std::mem::swap(&mut self.states, &mut self.next);
    }

    /// Largest ‖q^i_j − p̂_j‖ over all agents and blocks.
    pub fn max_block_error(&self, estimates: &[f64]) -> f64 {
        let d = self.states[0].d;
        self.states
            .iter()
            .flat_map(|s| {
                s.q.chunks_exact(d)
                    .zip(estimates.chunks_exact(d))
                    .map(|(a, b)| crate::formation::distance(a, b))
            })
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.states.iter().all(EstimatorState::is_finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formation::{build_formation, FormationKind};

    fn pair_graph(d: usize) -> FormationSpec {
        let mut a = vec![0.0; d];
        a[0] = 0.0;
        let mut b = vec![0.0; d];
        b[0] = 1.0;
        FormationSpec::new("pair", vec![a, b], vec![(0, 1)]).unwrap()
    }

    #[test]
    fn static_copies_converge_to_the_estimates() {
        // the slowest mode of the default weights decays at roughly 1 / s at
        // K_E = 100, so 20 s brings a metre-scale error below 1e-6
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let g = build_formation(FormationKind::Asymmetric, 5.0).unwrap();
        let est: Vec<f64> = (0..24).map(|_| rng.random_range(0.0..10.0)).collect();
        let zero = vec![0.0; 24];
        let mut ce = ConsensusEstimator::new(&g, &est).unwrap();
        let mut errors = Vec::new();
        for _ in 0..20 {
            for _ in 0..10_000 {
                ce.step(&g, &est, &zero, 100.0, 1e-4);
            }
            errors.push(ce.max_block_error(&est));
        }
        assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
        assert!(errors[19] < 1e-6, "{errors:?}");
    }

    #[test]
    fn pair_initialization_uses_own_blocks() {
        let g = pair_graph(3);
        let est = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let states = init_estimator(&g, &est).unwrap();
        assert_eq!(states[0].q, est.to_vec());
        assert_eq!(states[1].q, est.to_vec());
    }

    #[test]
    fn coincident_agents_fill_every_block() {
        let g = build_formation(FormationKind::Symmetric, 5.0).unwrap();
        let est: Vec<f64> = (0..8).flat_map(|_| [1.5, -2.0, 0.25]).collect();
        for s in init_estimator(&g, &est).unwrap() {
            for j in 0..8 {
                assert_eq!(s.block(j), &[1.5, -2.0, 0.25]);
            }
        }
    }

    #[test]
    fn agent7_non_neighbor_block_averages_closed_neighborhood() {
        let g = build_formation(FormationKind::Symmetric, 5.0).unwrap();
        let est: Vec<f64> = (0..24).map(|k| (k * k) as f64 * 0.1 - 3.0).collect();
        let states = init_estimator(&g, &est).unwrap();
        // agent 7 (index 6), neighbors {3,5,6,8}
        let closed = [2usize, 4, 5, 6, 7];
        for c in 0..3 {
            let expected: f64 = closed.iter().map(|&k| est[k * 3 + c]).sum::<f64>() / 5.0;
            assert!((states[6].block(0)[c] - expected).abs() < 1e-12);
            assert!((states[6].block(1)[c] - expected).abs() < 1e-12);
            assert_eq!(states[6].block(2)[c], est[2 * 3 + c]);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let g = pair_graph(3);
        assert!(init_estimator(&g, &[0.0; 5]).is_err());
    }

    #[test]
    fn fixed_point_has_zero_derivative() {
        let g = build_formation(FormationKind::Asymmetric, 5.0).unwrap();
        let est: Vec<f64> = (0..24).map(|k| k as f64 * 0.3).collect();
        let states: Vec<_> = (0..8).map(|_| EstimatorState { d: 3, q: est.clone() }).collect();
        let v = vec![0.0; 24];
        let mut out = vec![1.0; 24];
        for i in 0..8 {
            estimator_derivative(i, &states, &est[i * 3..i * 3 + 3], &v, &g, 100.0, &mut out);
            assert!(out.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn hand_evaluated_pair_derivative() {
        // n=2, d=1, K_E=1, a_12=1, a_11=1
        let g = pair_graph(1).with_weights(vec![1.0, 1.0], vec![1.0]).unwrap();
        let states = vec![
            EstimatorState {
                d: 1,
                q: vec![0.0, 0.0],
            },
            EstimatorState {
                d: 1,
                q: vec![1.0, 1.0],
            },
        ];
        let mut out = vec![0.0; 2];
        estimator_derivative(0, &states, &[0.0], &[0.0, 0.0], &g, 1.0, &mut out);
        // consensus: -(0-1) = 1 in both blocks; anchor: -(0-0) = 0
        assert_eq!(out, vec![1.0, 1.0]);

        estimator_derivative(1, &states, &[3.0], &[0.5, -2.0], &g, 1.0, &mut out);
        // block 0: -(1-0) + v_0 = -1 + 0.5; block 1: -(1-0) - (1-3) + v_1 = -1 + 2 - 2
        assert_eq!(out, vec![-0.5, -1.0]);
    }

    #[test]
    fn derivative_ignores_non_neighbors() {
        let g = build_formation(FormationKind::Symmetric, 5.0).unwrap();
        let est: Vec<f64> = (0..24).map(|k| (k as f64).sin()).collect();
        let mut states = init_estimator(&g, &est).unwrap();
        let mut v: Vec<f64> = (0..24).map(|k| (k as f64).cos()).collect();
        let i = 6;
        for j in 0..8 {
            if j != i && !g.is_neighbor(i, j) {
                states[j].q.fill(f64::NAN);
                v[j * 3..j * 3 + 3].fill(f64::NAN);
            }
        }
        let mut out = vec![0.0; 24];
        estimator_derivative(i, &states, &est[i * 3..i * 3 + 3], &v, &g, 100.0, &mut out);
        assert!(out.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn local_centroid_is_block_mean() {
        let s = EstimatorState {
            d: 3,
            q: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        };
        let c = s.local_centroid();
        for x in c {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let same = EstimatorState {
            d: 2,
            q: vec![4.0, -1.0, 4.0, -1.0],
        };
        assert_eq!(same.local_centroid(), vec![4.0, -1.0]);
    }
}
