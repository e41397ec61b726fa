//! Seeded schedule generation by simulating per-channel message events.
//!
//! Every activation of node `j` at tick `t` emits one message with send time
//! `t` towards every node. Messages to other nodes may be lost, delayed by a
//! uniformly sampled number of ticks or duplicated with an independently
//! sampled delay. A node's channel to itself is reliable with delay 1.
//! `beta(t, i, j)` is the send time of the message from `j` that arrived at
//! `i` at tick `t` (the newest one if several arrive together), otherwise the
//! previous value, starting from 0.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DynamicSchedule, EpochId, ScheduleError, Time};
use crate::nodes::{NodeId, NodeSet, MAX_NODES};

/// A change of epoch at `time`, after which `participants` take part.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochEvent {
    pub time: Time,
    pub participants: NodeSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub n: usize,
    pub horizon: Time,
    /// Probability that a node activates at a given tick.
    pub activation_probability: f64,
    #[serde(default = "default_delay")]
    pub min_delay: Time,
    #[serde(default = "default_delay")]
    pub max_delay: Time,
    #[serde(default)]
    pub loss_probability: f64,
    #[serde(default)]
    pub duplication_probability: f64,
    /// Participants of epoch 0. Defaults to every node.
    #[serde(default)]
    pub initial_participants: Option<NodeSet>,
    #[serde(default)]
    pub epoch_events: Vec<EpochEvent>,
    #[serde(default)]
    pub seed: u64,
    /// Whether nodes outside the current participant set still activate.
    #[serde(default = "default_true")]
    pub allow_inactive_activation: bool,
}

fn default_delay() -> Time {
    1
}

fn default_true() -> bool {
    true
}

impl ScheduleConfig {
    /// A reliable, fully active configuration (every node activates every
    /// tick, delay 1, nothing lost).
    pub fn reliable(n: usize, horizon: Time, seed: u64) -> Self {
        ScheduleConfig {
            n,
            horizon,
            activation_probability: 1.0,
            min_delay: 1,
            max_delay: 1,
            loss_probability: 0.0,
            duplication_probability: 0.0,
            initial_participants: None,
            epoch_events: Vec::new(),
            seed,
            allow_inactive_activation: true,
        }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        let bad = |key: &'static str, reason: String| Err(ScheduleError::InvalidConfig { key, reason });
        if self.n == 0 || self.n > MAX_NODES {
            return bad("n", format!("must lie in [1, {MAX_NODES}], got {}", self.n));
        }
        if self.horizon == 0 {
            return bad("horizon", "must be at least 1".into());
        }
        for (key, p) in [
            ("activation_probability", self.activation_probability),
            ("loss_probability", self.loss_probability),
            ("duplication_probability", self.duplication_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(key, format!("probability must lie in [0, 1], got {p}"));
            }
        }
        if self.min_delay == 0 {
            return bad("min_delay", "delay must be at least 1".into());
        }
        if self.max_delay < self.min_delay {
            return bad(
                "max_delay",
                format!("must be >= min_delay ({}), got {}", self.min_delay, self.max_delay),
            );
        }
        let universe = NodeSet::full(self.n);
        if let Some(p) = self.initial_participants {
            if !p.is_subset(universe) {
                return bad("initial_participants", format!("{p} names nodes outside [0, {})", self.n));
            }
        }
        let mut last = 0;
        for ev in &self.epoch_events {
            if ev.time <= last {
                return bad(
                    "epoch_events",
                    format!("switch times must be strictly increasing and >= 1, got {}", ev.time),
                );
            }
            if ev.time > self.horizon {
                return bad(
                    "epoch_events",
                    format!("switch time {} exceeds horizon {}", ev.time, self.horizon),
                );
            }
            if !ev.participants.is_subset(universe) {
                return bad(
                    "epoch_events",
                    format!("{} names nodes outside [0, {})", ev.participants, self.n),
                );
            }
            last = ev.time;
        }
        Ok(())
    }
}

/// Generate a schedule from `cfg`. Identical configs give identical schedules.
pub fn generate_schedule(cfg: &ScheduleConfig) -> Result<DynamicSchedule, ScheduleError> {
    cfg.validate()?;
    let n = cfg.n;
    let horizon = cfg.horizon;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut eta = Vec::with_capacity(horizon + 1);
    let mut pi = BTreeMap::new();
    pi.insert(
        EpochId(0),
        cfg.initial_participants.unwrap_or_else(|| NodeSet::full(n)),
    );
    let mut epoch = 0u32;
    let mut events = cfg.epoch_events.iter().peekable();
    for t in 0..=horizon {
        if let Some(ev) = events.next_if(|ev| ev.time == t) {
            epoch += 1;
            pi.insert(EpochId(epoch), ev.participants);
        }
        eta.push(EpochId(epoch));
    }

    // arrivals[t] holds (receiver, sender, send time) for messages landing at t.
    let mut arrivals: Vec<Vec<(NodeId, NodeId, Time)>> = vec![Vec::new(); horizon + 1];
    let mut current = vec![vec![0; n]; n];
    let mut alpha = Vec::with_capacity(horizon);
    let mut beta = Vec::with_capacity(horizon);

    for t in 1..=horizon {
        let participants = pi[&eta[t]];
        let mut active = NodeSet::empty();
        for j in 0..n {
            let eligible = cfg.allow_inactive_activation || participants.contains(j);
            if rng.gen_bool(cfg.activation_probability) && eligible {
                active.insert(j);
            }
        }

        let mut landed = vec![vec![None::<Time>; n]; n];
        for &(i, j, sent) in &arrivals[t] {
            let slot = &mut landed[i][j];
            *slot = Some(slot.map_or(sent, |s| s.max(sent)));
        }
        for i in 0..n {
            for j in 0..n {
                if let Some(sent) = landed[i][j] {
                    current[i][j] = sent;
                }
            }
        }
        beta.push(current.clone());
        alpha.push(active);

        for j in active.iter() {
            for i in 0..n {
                if i == j {
                    if t < horizon {
                        arrivals[t + 1].push((i, j, t));
                    }
                    continue;
                }
                if rng.gen_bool(cfg.loss_probability) {
                    continue;
                }
                let copies = if rng.gen_bool(cfg.duplication_probability) { 2 } else { 1 };
                for _ in 0..copies {
                    let delay = rng.gen_range(cfg.min_delay..=cfg.max_delay);
                    if t + delay <= horizon {
                        arrivals[t + delay].push((i, j, t));
                    }
                }
            }
        }
    }

    Ok(DynamicSchedule {
        n,
        horizon,
        alpha,
        beta,
        eta,
        pi,
    })
}
