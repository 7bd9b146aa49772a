//! Formation loss, empirical CDFs and nearest-rank percentiles.

use serde::Serialize;

use crate::controller::ControlGains;
use crate::error::{Error, Result};
use crate::formation::FormationSpec;

/// One recorded loss pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossSample {
    pub episode: usize,
    pub t: f64,
    pub loss_true: f64,
    pub loss_estimated: f64,
}

/// Mean of the stacked positions.
pub fn centroid(positions: &[f64], d: usize) -> Vec<f64> {
    let n = positions.len() / d;
    let mut c = vec![0.0; d];
    for p in positions.chunks_exact(d) {
        for (ck, x) in c.iter_mut().zip(p) {
            *ck += x;
        }
    }
    c.iter_mut().for_each(|x| *x /= n as f64);
    c
}

/// `K_P/2 ‖p_c,des − p_c‖² + K_F/2 Σ_{(i,j)∈E} a_ij (‖p_i − p_j‖² − d_ij²)²`.
pub fn formation_loss(positions: &[f64], reference: &[f64], graph: &FormationSpec, gains: &ControlGains) -> f64 {
    let d = graph.d;
    let c = centroid(positions, d);
    let track: f64 = c.iter().zip(reference).map(|(a, b)| (b - a) * (b - a)).sum();
    let shape: f64 = graph
        .edges
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let pi = &positions[i * d..(i + 1) * d];
            let pj = &positions[j * d..(j + 1) * d];
            let sq: f64 = pi.iter().zip(pj).map(|(a, b)| (a - b) * (a - b)).sum();
            let dij = graph.desired_distances[k];
            let r = sq - dij * dij;
            graph.edge_weights[k] * r * r
        })
        .sum();
    0.5 * gains.k_p * track + 0.5 * gains.k_f * shape
}

/// Step-function ECDF: sorted distinct values with the fraction of samples
/// at or below each.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ecdf {
    pub points: Vec<(f64, f64)>,
    pub count: usize,
}

impl Ecdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        let sorted = sorted(samples);
        let m = sorted.len();
        let mut points: Vec<(f64, f64)> = Vec::new();
        for (k, &x) in sorted.iter().enumerate() {
            let p = (k + 1) as f64 / m as f64;
            match points.last_mut() {
                Some(last) if last.0 == x => last.1 = p,
                _ => points.push((x, p)),
            }
        }
        Ok(Ecdf { points, count: m })
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.points.partition_point(|&(v, _)| v <= x);
        if idx == 0 {
            0.0
        } else {
            self.points[idx - 1].1
        }
    }

    /// Smallest sample whose cumulative probability reaches `q`.
    pub fn inverse(&self, q: f64) -> f64 {
        let idx = self.points.partition_point(|&(_, p)| p < q - 1e-12);
        self.points[idx.min(self.points.len() - 1)].0
    }

    /// At most `max_points` points, always keeping the last one.
    pub fn thinned(&self, max_points: usize) -> Vec<(f64, f64)> {
        let len = self.points.len();
        if len <= max_points || max_points < 2 {
            return self.points.clone();
        }
        let stride = (len - 1) as f64 / (max_points - 1) as f64;
        (0..max_points)
            .map(|k| self.points[((k as f64 * stride).round() as usize).min(len - 1)])
            .collect()
    }
}

/// ECDF of the true loss of every sample taken at or after `burn_in` seconds.
pub fn ecdf(samples: &[LossSample], burn_in: f64) -> Result<Ecdf> {
    let kept = after_burn_in(samples, burn_in, |s| s.loss_true);
    if kept.is_empty() {
        return Err(Error::EmptyAfterBurnIn { burn_in });
    }
    Ecdf::new(&kept)
}

pub fn after_burn_in(samples: &[LossSample], burn_in: f64, pick: impl Fn(&LossSample) -> f64) -> Vec<f64> {
    samples.iter().filter(|s| s.t >= burn_in - 1e-9).map(pick).collect()
}

/// Nearest-rank percentile: the `ceil(q m)`-th smallest of `m` samples.
pub fn percentile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Config(format!("percentile level {q} outside (0, 1]")));
    }
    let sorted = sorted(samples);
    Ok(sorted[nearest_rank(sorted.len(), q) - 1])
}

/// One-based rank `ceil(q m)`, clamped to `1..=m`. The small slack keeps
/// levels like 0.99 * 100 from rounding up to 100.
fn nearest_rank(m: usize, q: f64) -> usize {
    ((q * m as f64 - 1e-9).ceil() as usize).clamp(1, m)
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formation::{build_formation, FormationKind};
    use proptest::prelude::*;

    #[test]
    fn perfect_formation_on_reference_has_zero_loss() {
        let g = build_formation(FormationKind::Symmetric, 5.0).unwrap();
        let pos: Vec<f64> = g.slot_positions.iter().flatten().copied().collect();
        let c = centroid(&pos, 3);
        assert!(formation_loss(&pos, &c, &g, &ControlGains::default()).abs() < 1e-20);
    }

    #[test]
    fn single_edge_toy_loss() {
        let g = FormationSpec::new("pair", vec![vec![0.0], vec![1.0]], vec![(0, 1)])
            .unwrap()
            .with_weights(vec![0.5, 0.5], vec![1.0])
            .unwrap();
        // ‖p1 − p2‖² − d² = 2 − 1 = 1
        let pos = [0.0, 2f64.sqrt()];
        let gains = ControlGains { k_p: 0.0, k_f: 2.0 };
        let loss = formation_loss(&pos, &[0.0], &g, &gains);
        assert!((loss - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ecdf_basics() {
        let e = Ecdf::new(&[3.0, 1.0, 2.0]).unwrap();
        assert!((e.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(10.0), 1.0);

        let flat = Ecdf::new(&[4.0; 5]).unwrap();
        assert_eq!(flat.points, vec![(4.0, 1.0)]);
        assert_eq!(flat.eval(3.999), 0.0);
        assert_eq!(flat.eval(4.0), 1.0);
    }

    #[test]
    fn ecdf_burn_in_filter() {
        let samples: Vec<LossSample> = (0..20)
            .map(|k| LossSample {
                episode: 0,
                t: k as f64 * 0.1,
                loss_true: k as f64,
                loss_estimated: 0.0,
            })
            .collect();
        let e = ecdf(&samples, 1.0).unwrap();
        assert_eq!(e.count, 10);
        assert_eq!(e.points[0].0, 10.0);
        assert!(matches!(ecdf(&samples, 5.0), Err(Error::EmptyAfterBurnIn { .. })));
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.99).unwrap(), 99.0);
        assert_eq!(percentile(&v, 0.5).unwrap(), 50.0);
        assert_eq!(percentile(&v, 1.0).unwrap(), 100.0);
        for q in [0.01, 0.3, 0.99] {
            assert_eq!(percentile(&[7.5], q).unwrap(), 7.5);
        }
        assert!(matches!(percentile(&[], 0.5), Err(Error::EmptySamples)));
        assert!(percentile(&v, 0.0).is_err());
    }

    #[test]
    fn percentile_matches_sort_oracle_and_ecdf_inversion() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let v: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>().powi(3) * 1e3).collect();
        let e = Ecdf::new(&v).unwrap();
        let mut s = v.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for permille in [500usize, 900, 990, 999] {
            let q = permille as f64 / 1000.0;
            let rank = (permille * s.len()).div_ceil(1000);
            let oracle = s[rank - 1];
            let p = percentile(&v, q).unwrap();
            assert_eq!(p, oracle);
            assert_eq!(e.inverse(q), p);
            assert!(e.eval(p) >= q - 1e-12);
        }
    }

    proptest! {
        #[test]
        fn ecdf_monotone_and_ends_at_one(v in proptest::collection::vec(-1e3..1e3f64, 1..200)) {
            let e = Ecdf::new(&v).unwrap();
            for w in e.points.windows(2) {
                prop_assert!(w[0].0 < w[1].0);
                prop_assert!(w[0].1 < w[1].1);
            }
            prop_assert_eq!(e.points.last().unwrap().1, 1.0);
        }

        #[test]
        fn loss_translation_invariant(
            pos in proptest::collection::vec(-8.0..8.0f64, 24),
            reference in proptest::array::uniform3(-5.0..5.0f64),
            shift in proptest::array::uniform3(-20.0..20.0f64),
        ) {
            let g = build_formation(FormationKind::Asymmetric, 5.0).unwrap();
            let gains = ControlGains::default();
            let moved: Vec<f64> = pos.iter().enumerate().map(|(k, x)| x + shift[k % 3]).collect();
            let moved_ref: Vec<f64> = reference.iter().zip(shift).map(|(r, s)| r + s).collect();
            let a = formation_loss(&pos, &reference, &g, &gains);
            let b = formation_loss(&moved, &moved_ref, &g, &gains);
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
            prop_assert!(a >= 0.0);
        }
    }
}
