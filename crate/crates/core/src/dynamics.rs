//! First-order agent kinematics with white actuation noise and
//! dead-reckoned position estimates.

use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    /// True position p_i (m).
    pub position: Vec<f64>,
    /// Dead-reckoned estimate p̂_i (m).
    pub estimate: Vec<f64>,
    /// Commanded velocity v_i (m/s).
    pub velocity: Vec<f64>,
    /// Per-axis noise intensity σ_i (m/s).
    pub noise_std: f64,
    /// Age of the last position fix (s).
    pub aoi: f64,
}

impl AgentState {
    /// Agent at `position` with a fresh fix and zero velocity.
    pub fn at_rest(position: Vec<f64>, noise_std: f64) -> Self {
        let d = position.len();
        AgentState {
            estimate: position.clone(),
            position,
            velocity: vec![0.0; d],
            noise_std,
            aoi: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }

    /// One Euler–Maruyama step of `ṗ = v + w` for the true position and a
    /// noiseless dead-reckoning step for the estimate. Draws exactly `d`
    /// standard normals, even when σ is zero.
    pub fn step<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) {
        let scale = self.noise_std * dt.sqrt();
        for k in 0..self.position.len() {
            let g: f64 = rng.sample(StandardNormal);
            let drift = self.velocity[k] * dt;
            self.position[k] += drift + scale * g;
            self.estimate[k] += drift;
        }
        self.aoi += dt;
    }

    /// Position fix: the estimate snaps to the true position and the age resets.
    pub fn localize(&mut self) {
        self.estimate.copy_from_slice(&self.position);
        self.aoi = 0.0;
    }

    /// ‖p − p̂‖².
    pub fn squared_error(&self) -> f64 {
        self.position
            .iter()
            .zip(&self.estimate)
            .map(|(p, q)| (p - q) * (p - q))
            .sum()
    }
}
