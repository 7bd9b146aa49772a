//! Episode simulation and Monte Carlo batches.
//!
//! Per integration step at `t = m dt`:
//!
//! 1. if `t = k T_s` with `k >= 1`, the scheduler picks an agent (or all of
//!    them) and its estimate snaps to the true position;
//! 2. on sampling instants the true and estimated losses are recorded;
//! 3. every agent reads its local centroid estimate and computes its command
//!    from the same snapshot;
//! 4. the consensus copies advance one Euler step with those commands;
//! 5. true and estimated positions advance one Euler–Maruyama step.
//!
//! The run ends after the slot at `t = T` has been applied and sampled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{control_input, reference_trajectory, ControlGains};
use crate::dynamics::AgentState;
use crate::error::{Error, Result};
use crate::estimator::ConsensusEstimator;
use crate::formation::{assign_agents, build_formation, episode_seed, AgentAssignment, FormationKind, FormationSpec};
use crate::metrics::{formation_loss, LossSample};
use crate::scheduler::{ScheduleInputs, Scheduler, SchedulerPolicy, Selection};

const NOISE_STREAM: u64 = 1;

/// Parameters of a single episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub formation: FormationKind,
    /// Set per batch from the run's scheduler list, so not echoed in outputs.
    #[serde(skip_serializing)]
    pub scheduler: SchedulerPolicy,
    /// Episode length T (s).
    pub duration: f64,
    /// Scheduling period T_s (s).
    pub slot_period: f64,
    /// Integration step (s).
    pub dt: f64,
    /// Estimator gain K_E.
    pub k_e: f64,
    pub k_p: f64,
    pub k_f: f64,
    /// Noise scale σ_0 (m/s); agent i (one-based) gets σ_0 (1 + i).
    pub sigma0: f64,
    /// Cube side d0 (m).
    pub d0: f64,
    pub n: usize,
    pub d: usize,
    /// Loss samples are taken every this many slots.
    pub sample_every: usize,
    /// Initial coordinates are `initial_center + initial_spread * N(0, 1)` (m).
    pub initial_center: f64,
    pub initial_spread: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            formation: FormationKind::Asymmetric,
            scheduler: SchedulerPolicy::Mv,
            duration: 10.0,
            slot_period: 0.1,
            dt: DEFAULT_DT,
            k_e: 100.0,
            k_p: 10.0,
            k_f: 50.0,
            sigma0: 0.5,
            d0: 5.0,
            n: 8,
            d: 3,
            sample_every: 1,
            initial_center: 10.0,
            initial_spread: 0.1,
        }
    }
}

/// Default integration step (s).
pub const DEFAULT_DT: f64 = 1e-4;

/// Integer ratio `a / b`, if `a` is a whole multiple of `b`.
fn whole_ratio(a: f64, b: f64) -> Option<u64> {
    let r = a / b;
    let k = r.round();
    (k >= 1.0 && (r - k).abs() <= 1e-9 * k.max(1.0)).then_some(k as u64)
}

impl EpisodeConfig {
    pub fn gains(&self) -> ControlGains {
        ControlGains {
            k_p: self.k_p,
            k_f: self.k_f,
        }
    }

    /// Noise level of agent `a` (zero-based).
    pub fn sigma(&self, a: usize) -> f64 {
        self.sigma0 * (a as f64 + 2.0)
    }

    pub fn sigmas(&self) -> Vec<f64> {
        (0..self.n).map(|a| self.sigma(a)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("duration", self.duration),
            ("slot period", self.slot_period),
            ("dt", self.dt),
            ("k_e", self.k_e),
            ("k_p", self.k_p),
            ("k_f", self.k_f),
            ("sigma0", self.sigma0),
            ("d0", self.d0),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.initial_spread >= 0.0 && self.initial_center.is_finite()) {
            return Err(Error::Config("initial spread must be non-negative".into()));
        }
        self.steps_per_slot()?;
        self.slots()?;
        if self.sample_every == 0 {
            return Err(Error::Config("sample_every must be at least 1".into()));
        }
        if self.d != 3 {
            return Err(Error::Config(format!(
                "the reference trajectory is three-dimensional, got d = {}",
                self.d
            )));
        }
        Ok(())
    }

    /// Integration steps per scheduling slot; `dt` must divide `T_s`.
    pub fn steps_per_slot(&self) -> Result<u64> {
        whole_ratio(self.slot_period, self.dt).ok_or_else(|| {
            Error::Config(format!(
                "dt = {} does not divide the slot period {}",
                self.dt, self.slot_period
            ))
        })
    }

    /// Scheduling slots per episode; `T_s` must divide `T`.
    pub fn slots(&self) -> Result<u64> {
        whole_ratio(self.duration, self.slot_period).ok_or_else(|| {
            Error::Config(format!(
                "slot period {} does not divide the duration {}",
                self.slot_period, self.duration
            ))
        })
    }

    pub fn build_formation(&self) -> Result<FormationSpec> {
        let spec = build_formation(self.formation, self.d0)?;
        self.check_formation(&spec)?;
        Ok(spec)
    }

    pub fn check_formation(&self, spec: &FormationSpec) -> Result<()> {
        if spec.n != self.n || spec.d != self.d {
            return Err(Error::Config(format!(
                "formation has n = {}, d = {} but the configuration says n = {}, d = {}",
                spec.n, spec.d, self.n, self.d
            )));
        }
        Ok(())
    }
}

/// Complete state of one running episode. The formation is stored in agent
/// indexing, so node `a` is agent `a` sitting on slot `assignment.slot_of[a]`.
#[derive(Debug, Clone)]
pub struct Episode {
    pub index: usize,
    pub seed: u64,
    pub config: EpisodeConfig,
    pub graph: FormationSpec,
    pub assignment: AgentAssignment,
    pub agents: Vec<AgentState>,
    pub estimator: ConsensusEstimator,
    pub scheduler: Scheduler,
    noise: ChaCha8Rng,
    step: u64,
    steps_per_slot: u64,
    total_steps: u64,
    estimates: Vec<f64>,
    positions: Vec<f64>,
    velocities: Vec<f64>,
    centroid: Vec<f64>,
}

/// Output of one episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeTrace {
    pub episode: usize,
    pub seed: u64,
    pub slot_of: Vec<usize>,
    pub samples: Vec<LossSample>,
    #[serde(skip)]
    pub schedule: Vec<Selection>,
}

impl Episode {
    /// Initial coordinates, the agent-to-slot permutation, σ profile and
    /// estimator copies, all derived from `(master_seed, index)`.
    pub fn new(spec: &FormationSpec, config: &EpisodeConfig, master_seed: u64, index: usize) -> Result<Self> {
        config.validate()?;
        config.check_formation(spec)?;
        let (n, d) = (config.n, config.d);
        let seed = episode_seed(master_seed, index as u64);
        let mut init = ChaCha8Rng::seed_from_u64(seed);
        let mut noise = ChaCha8Rng::seed_from_u64(seed);
        noise.set_stream(NOISE_STREAM);

        let coords: Vec<f64> = (0..n * d)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut init);
                config.initial_center + config.initial_spread * g
            })
            .collect();
        let assignment = assign_agents(n, &mut init);
        let graph = spec.relabel(&assignment);
        let agents: Vec<AgentState> = coords
            .chunks_exact(d)
            .enumerate()
            .map(|(a, p)| AgentState::at_rest(p.to_vec(), config.sigma(a)))
            .collect();
        let estimator = ConsensusEstimator::new(&graph, &coords)?;
        let inputs = ScheduleInputs::new(config.sigmas(), graph.centralities.clone(), d)?;
        let scheduler = Scheduler::new(config.scheduler, inputs, config.slot_period);
        let steps_per_slot = config.steps_per_slot()?;
        let total_steps = steps_per_slot * config.slots()?;

        Ok(Episode {
            index,
            seed,
            config: config.clone(),
            graph,
            assignment,
            agents,
            estimator,
            scheduler,
            noise,
            step: 0,
            steps_per_slot,
            total_steps,
            estimates: coords.clone(),
            positions: coords,
            velocities: vec![0.0; n * d],
            centroid: vec![0.0; d],
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.total_steps
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    fn sync_stacks(&mut self) {
        let d = self.config.d;
        for (a, agent) in self.agents.iter().enumerate() {
            self.estimates[a * d..(a + 1) * d].copy_from_slice(&agent.estimate);
            self.positions[a * d..(a + 1) * d].copy_from_slice(&agent.position);
        }
    }

    /// Applies the slot at the current instant if there is one.
    fn localize_if_due(&mut self) -> Option<Selection> {
        if self.step == 0 || !self.step.is_multiple_of(self.steps_per_slot) {
            return None;
        }
        let (_, sel) = self.scheduler.next_slot();
        match sel {
            Selection::Agent(a) => self.agents[a].localize(),
            Selection::All => self.agents.iter_mut().for_each(AgentState::localize),
        }
        self.sync_stacks();
        Some(sel)
    }

    fn sample_due(&self) -> bool {
        self.step
            .is_multiple_of(self.steps_per_slot * self.config.sample_every as u64)
    }

    /// Loss pair at the current state.
    pub fn sample(&self) -> LossSample {
        let slot = self.step / self.steps_per_slot;
        let t = slot as f64 * self.config.slot_period;
        let reference = reference_trajectory(t, self.config.duration);
        let gains = self.config.gains();
        LossSample {
            episode: self.index,
            t,
            loss_true: formation_loss(&self.positions, &reference, &self.graph, &gains),
            loss_estimated: formation_loss(&self.estimates, &reference, &self.graph, &gains),
        }
    }

    /// Commands, estimator and positions for one step of length `dt`.
    fn integrate(&mut self) -> Result<()> {
        let d = self.config.d;
        let dt = self.config.dt;
        let t = self.time();
        let reference = reference_trajectory(t, self.config.duration);
        let gains = self.config.gains();
        for a in 0..self.config.n {
            self.estimator.states[a].local_centroid_into(&mut self.centroid);
            control_input(
                a,
                &self.estimates,
                &self.centroid,
                &reference,
                &self.graph,
                &gains,
                &mut self.velocities[a * d..(a + 1) * d],
            );
        }
        self.estimator
            .step(&self.graph, &self.estimates, &self.velocities, self.config.k_e, dt);
        for (a, agent) in self.agents.iter_mut().enumerate() {
            agent.velocity.copy_from_slice(&self.velocities[a * d..(a + 1) * d]);
            agent.step(dt, &mut self.noise);
        }
        self.sync_stacks();
        self.step += 1;

        if self.step.is_multiple_of(self.steps_per_slot) {
            self.check_finite()?;
        }
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        let bad = if !self.positions.iter().chain(&self.estimates).all(|x| x.is_finite()) {
            Some("position")
        } else if !self.estimator.is_finite() {
            Some("estimator copy")
        } else {
            None
        };
        match bad {
            Some(what) => Err(Error::Diverged {
                episode: self.index,
                time: self.time(),
                detail: format!("non-finite {what}; reduce dt or the gains"),
            }),
            None => Ok(()),
        }
    }

    /// Runs one step; returns the sample if this instant is a sampling one.
    pub fn step(&mut self) -> Result<(Option<Selection>, Option<LossSample>)> {
        let sel = self.localize_if_due();
        let sample = self.sample_due().then(|| self.sample());
        if !self.is_finished() {
            self.integrate()?;
        } else {
            // final instant: nothing left to integrate
            self.step += 1;
        }
        Ok((sel, sample))
    }

    pub fn run(mut self) -> Result<EpisodeTrace> {
        let mut samples = Vec::new();
        let mut schedule = Vec::new();
        while self.step <= self.total_steps {
            let (sel, sample) = self.step()?;
            schedule.extend(sel);
            samples.extend(sample);
        }
        Ok(EpisodeTrace {
            episode: self.index,
            seed: self.seed,
            slot_of: self.assignment.slot_of.clone(),
            samples,
            schedule,
        })
    }
}

pub fn run_episode(
    spec: &FormationSpec,
    config: &EpisodeConfig,
    master_seed: u64,
    index: usize,
) -> Result<EpisodeTrace> {
    Episode::new(spec, config, master_seed, index)?.run()
}

/// A Monte Carlo batch: `episodes` episodes per scheduler, paired seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(flatten)]
    pub episode: EpisodeConfig,
    pub episodes: usize,
    pub seed: u64,
    pub schedulers: Vec<SchedulerPolicy>,
    /// Worker threads; 0 lets the pool decide. Results do not depend on it,
    /// so it is not echoed in outputs.
    #[serde(skip_serializing)]
    pub workers: usize,
    /// Samples before this time (s) are left out of the statistics.
    pub burn_in: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            episode: EpisodeConfig::default(),
            episodes: 100,
            seed: 7,
            schedulers: SchedulerPolicy::ALL.to_vec(),
            workers: 0,
            burn_in: 1.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.episode.validate()?;
        if self.episodes == 0 {
            return Err(Error::Config("need at least one episode".into()));
        }
        if self.schedulers.is_empty() {
            return Err(Error::Config("no scheduler selected".into()));
        }
        if !(self.burn_in >= 0.0 && self.burn_in < self.episode.duration) {
            return Err(Error::Config(format!(
                "burn-in {} must lie in [0, duration)",
                self.burn_in
            )));
        }
        Ok(())
    }
}

/// Raw traces of one scheduler, in episode order.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerRun {
    pub policy: SchedulerPolicy,
    pub traces: Vec<EpisodeTrace>,
}

impl SchedulerRun {
    pub fn samples(&self) -> impl Iterator<Item = &LossSample> {
        self.traces.iter().flat_map(|t| t.samples.iter())
    }
}

/// Runs every configured scheduler over the same episode seeds. Episodes
/// are distributed over a worker pool and gathered in index order.
pub fn run_monte_carlo(config: &RunConfig, spec: &FormationSpec) -> Result<Vec<SchedulerRun>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| {
        config
            .schedulers
            .iter()
            .map(|&policy| {
                let ep = EpisodeConfig {
                    scheduler: policy,
                    ..config.episode.clone()
                };
                let traces = (0..config.episodes)
                    .into_par_iter()
                    .map(|e| run_episode(spec, &ep, config.seed, e))
                    .collect::<Result<Vec<_>>>()?;
                Ok(SchedulerRun { policy, traces })
            })
            .collect()
    })
}
