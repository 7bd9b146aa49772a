//! Localization scheduling driven by Age and Value of Information.
//!
//! One agent receives an exact position fix per slot, at `t = k T_s` for
//! `k = 1, 2, ...`. Every policy ranks agents by `weight_i * Δ_i`, where the
//! weight depends only on the noise level, the centrality and the
//! dimension, so schedules never depend on positions and can be computed
//! ahead of time.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerPolicy {
    /// Maximum Age First.
    Maf,
    /// Maximum Expected Error: `d σ_i² Δ_i`.
    Mee,
    /// Maximum Value: `ζ_i d σ_i² Δ_i`.
    Mv,
    /// Every agent is localized every slot.
    Oracle,
}

impl SchedulerPolicy {
    pub const ALL: [SchedulerPolicy; 4] = [
        SchedulerPolicy::Oracle,
        SchedulerPolicy::Maf,
        SchedulerPolicy::Mee,
        SchedulerPolicy::Mv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerPolicy::Maf => "maf",
            SchedulerPolicy::Mee => "mee",
            SchedulerPolicy::Mv => "mv",
            SchedulerPolicy::Oracle => "oracle",
        }
    }
}

impl fmt::Display for SchedulerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "maf" => Ok(SchedulerPolicy::Maf),
            "mee" => Ok(SchedulerPolicy::Mee),
            "mv" => Ok(SchedulerPolicy::Mv),
            "oracle" => Ok(SchedulerPolicy::Oracle),
            other => Err(Error::Config(format!(
                "unknown scheduler '{other}' (expected maf, mee, mv or oracle)"
            ))),
        }
    }
}

/// Outcome of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Selection {
    Agent(usize),
    All,
}

impl fmt::Display for Selection {
    /// One-based agent label, or `all`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selection::Agent(i) => write!(f, "{}", i + 1),
            Selection::All => f.write_str("all"),
        }
    }
}

/// Expected squared positioning error `d σ² Δ`.
pub fn voi_mee(aoi: f64, sigma: f64, d: usize) -> f64 {
    d as f64 * sigma * sigma * aoi
}

/// Centrality-weighted expected error `ζ d σ² Δ`.
pub fn voi_mv(aoi: f64, sigma: f64, centrality: f64, d: usize) -> f64 {
    centrality * voi_mee(aoi, sigma, d)
}

/// Per-agent inputs of a schedule. `sigmas` is indexed by agent,
/// `centralities` holds the centrality of each agent's assigned slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleInputs {
    pub sigmas: Vec<f64>,
    pub centralities: Vec<f64>,
    pub d: usize,
}

impl ScheduleInputs {
    pub fn new(sigmas: Vec<f64>, centralities: Vec<f64>, d: usize) -> Result<Self> {
        if sigmas.len() != centralities.len() {
            return Err(Error::Dimension {
                expected: sigmas.len(),
                got: centralities.len(),
            });
        }
        if sigmas.is_empty() {
            return Err(Error::Config("schedule needs at least one agent".into()));
        }
        if sigmas.iter().chain(&centralities).any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Config("noise levels and centralities must be positive".into()));
        }
        Ok(ScheduleInputs {
            sigmas,
            centralities,
            d,
        })
    }

    pub fn n(&self) -> usize {
        self.sigmas.len()
    }
}

/// Value of localizing agent `i` at age `aoi` under `policy`.
pub fn value(policy: SchedulerPolicy, i: usize, aoi: f64, inputs: &ScheduleInputs) -> f64 {
    match policy {
        SchedulerPolicy::Maf | SchedulerPolicy::Oracle => aoi,
        SchedulerPolicy::Mee => voi_mee(aoi, inputs.sigmas[i], inputs.d),
        SchedulerPolicy::Mv => voi_mv(aoi, inputs.sigmas[i], inputs.centralities[i], inputs.d),
    }
}

/// Picks the agent to localize given the ages at the slot instant (before
/// any reset). Ties go to the lowest index.
pub fn select(policy: SchedulerPolicy, aoi: &[f64], inputs: &ScheduleInputs) -> Selection {
    if policy == SchedulerPolicy::Oracle {
        return Selection::All;
    }
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, &age) in aoi.iter().enumerate() {
        let v = value(policy, i, age, inputs);
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    Selection::Agent(best)
}

/// Ranking weight of agent `i`: the value per second of age.
pub fn weight(policy: SchedulerPolicy, i: usize, inputs: &ScheduleInputs) -> f64 {
    value(policy, i, 1.0, inputs)
}

/// Selection from ages counted in whole slots. Ranking by `weight * slots`
/// drops the common slot-period factor, so agents whose values are equal in
/// exact arithmetic compare equal here too.
pub fn select_by_slots(policy: SchedulerPolicy, age_slots: &[u64], inputs: &ScheduleInputs) -> Selection {
    if policy == SchedulerPolicy::Oracle {
        return Selection::All;
    }
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, &a) in age_slots.iter().enumerate() {
        let v = weight(policy, i, inputs) * a as f64;
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    Selection::Agent(best)
}

/// Online scheduler state: the last slot at which each agent was fixed.
#[derive(Debug, Clone)]
pub struct Scheduler {
    pub policy: SchedulerPolicy,
    pub inputs: ScheduleInputs,
    pub slot_period: f64,
    last_fix: Vec<u64>,
    slot: u64,
}

impl Scheduler {
    /// Starts with every agent localized at `t = 0`.
    pub fn new(policy: SchedulerPolicy, inputs: ScheduleInputs, slot_period: f64) -> Self {
        let n = inputs.n();
        Scheduler {
            policy,
            inputs,
            slot_period,
            last_fix: vec![0; n],
            slot: 0,
        }
    }

    /// Ages in slots at slot `k`, before any reset.
    pub fn age_slots_at(&self, k: u64) -> Vec<u64> {
        self.last_fix.iter().map(|&l| k - l).collect()
    }

    /// Ages in seconds at slot `k`, before any reset.
    pub fn ages_at(&self, k: u64) -> Vec<f64> {
        self.age_slots_at(k)
            .into_iter()
            .map(|a| a as f64 * self.slot_period)
            .collect()
    }

    /// Advances to the next slot, selects, and records the fix.
    pub fn next_slot(&mut self) -> (u64, Selection) {
        self.slot += 1;
        let k = self.slot;
        let sel = select_by_slots(self.policy, &self.age_slots_at(k), &self.inputs);
        match sel {
            Selection::Agent(i) => self.last_fix[i] = k,
            Selection::All => self.last_fix.fill(k),
        }
        (k, sel)
    }

    pub fn current_slot(&self) -> u64 {
        self.slot
    }
}

/// Offline schedule for slots `1..=slots`. Needs no positions, only the
/// noise levels and centralities.
pub fn precompute_schedule(policy: SchedulerPolicy, inputs: &ScheduleInputs, slots: usize) -> Vec<Selection> {
    if policy == SchedulerPolicy::Oracle {
        return vec![Selection::All; slots];
    }
    let mut age = vec![0u64; inputs.n()];
    let mut out = Vec::with_capacity(slots);
    for _ in 0..slots {
        age.iter_mut().for_each(|a| *a += 1);
        let sel = select_by_slots(policy, &age, inputs);
        if let Selection::Agent(i) = sel {
            age[i] = 0;
        }
        out.push(sel);
    }
    out
}
