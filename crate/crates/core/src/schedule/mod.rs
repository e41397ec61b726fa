//! Dynamic schedules: activation sets, data-flow times, epochs and participants.
//!
//! A [`DynamicSchedule`] is an explicit finite-horizon table. `alpha` and
//! `beta` are stored for ticks `1..=horizon` (index `t - 1`), `eta` for ticks
//! `0..=horizon` (index `t`). The JSON form uses exactly this layout.

mod generate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nodes::{NodeId, NodeSet, MAX_NODES};

pub use generate::{generate_schedule, EpochEvent, ScheduleConfig};

/// A tick of the discrete clock. Tick 0 is the start of the iteration.
pub type Time = usize;

/// Epoch label. Generated schedules number epochs consecutively from 0.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct EpochId(pub u32);

impl fmt::Display for EpochId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("time {t} is outside the schedule horizon {horizon}")]
    TimeOutOfRange { t: Time, horizon: Time },
    #[error("invalid schedule config `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
    #[error("static schedule violates causality at t={t}, i={i}, j={j}: beta={beta}")]
    StaticCausality {
        t: Time,
        i: NodeId,
        j: NodeId,
        beta: Time,
    },
    #[error("schedule is malformed: {0}")]
    Malformed(String),
}

/// A rule broken by a schedule, with its witness.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule")]
pub enum Violation {
    /// DS1: `beta(t, i, j) <= t - 1`.
    Causality {
        t: Time,
        i: NodeId,
        j: NodeId,
        beta: Time,
    },
    /// DS2: the epoch decreased between `t1` and `t2`.
    EpochDecrease { t1: Time, t2: Time },
    /// A table is missing entries or references unknown nodes/epochs.
    Totality { detail: String },
}

/// One maximal run of ticks sharing an epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EpochSegment {
    pub epoch: EpochId,
    pub participants: NodeSet,
    pub start: Time,
    /// Last tick of the epoch within the horizon (inclusive).
    pub end: Time,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicSchedule {
    pub n: usize,
    pub horizon: Time,
    /// `alpha[t - 1]` is the set of nodes activating at tick `t`.
    pub alpha: Vec<NodeSet>,
    /// `beta[t - 1][i][j]` is the send time of the data node `i` uses from `j` at tick `t`.
    pub beta: Vec<Vec<Vec<Time>>>,
    /// `eta[t]` for `t` in `0..=horizon`.
    pub eta: Vec<EpochId>,
    pub pi: BTreeMap<EpochId, NodeSet>,
}

impl DynamicSchedule {
    /// The fully synchronous single-epoch schedule: everyone activates at
    /// every tick and reads data from the previous tick.
    pub fn synchronous(n: usize, horizon: Time) -> Self {
        let all = NodeSet::full(n);
        let alpha = vec![all; horizon];
        let beta = (1..=horizon).map(|t| vec![vec![t - 1; n]; n]).collect();
        DynamicSchedule {
            n,
            horizon,
            alpha,
            beta,
            eta: vec![EpochId(0); horizon + 1],
            pi: BTreeMap::from([(EpochId(0), all)]),
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.n
    }

    /// Activation set at tick `t >= 1`. Tick 0 has no activations.
    pub fn alpha(&self, t: Time) -> NodeSet {
        if t == 0 {
            NodeSet::empty()
        } else {
            self.alpha[t - 1]
        }
    }

    /// Data-flow time for `t >= 1`.
    pub fn beta(&self, t: Time, i: NodeId, j: NodeId) -> Time {
        self.beta[t - 1][i][j]
    }

    pub fn eta(&self, t: Time) -> EpochId {
        self.eta[t]
    }

    pub fn pi(&self, e: EpochId) -> NodeSet {
        self.pi.get(&e).copied().unwrap_or_default()
    }

    /// Participants at tick `t`, `pi(eta(t))`.
    pub fn rho(&self, t: Time) -> Result<NodeSet, ScheduleError> {
        if t > self.horizon || t >= self.eta.len() {
            return Err(ScheduleError::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(self.pi(self.eta[t]))
    }

    /// Same as [`rho`](Self::rho) for ticks known to be in range.
    pub(crate) fn participants(&self, t: Time) -> NodeSet {
        self.pi(self.eta[t])
    }

    /// Last tick (inclusive, capped at the horizon) of the epoch containing `t`.
    pub fn epoch_end(&self, t: Time) -> Time {
        let e = self.eta[t];
        let mut end = t;
        while end < self.horizon && self.eta[end + 1] == e {
            end += 1;
        }
        end
    }

    /// First tick of the epoch containing `t`.
    pub fn epoch_start(&self, t: Time) -> Time {
        let e = self.eta[t];
        let mut start = t;
        while start > 0 && self.eta[start - 1] == e {
            start -= 1;
        }
        start
    }

    /// The epoch segments in time order.
    pub fn segments(&self) -> Vec<EpochSegment> {
        let mut out = Vec::new();
        let mut start = 0;
        while start <= self.horizon {
            let end = self.epoch_end(start);
            let epoch = self.eta[start];
            out.push(EpochSegment {
                epoch,
                participants: self.pi(epoch),
                start,
                end,
            });
            start = end + 1;
        }
        out
    }

    /// `(epoch, participants)` pairs appearing anywhere in the schedule, in
    /// time order without repeats.
    pub fn epoch_pairs(&self) -> Vec<(EpochId, NodeSet)> {
        let mut out: Vec<(EpochId, NodeSet)> = Vec::new();
        for seg in self.segments() {
            let pair = (seg.epoch, seg.participants);
            if !out.contains(&pair) {
                out.push(pair);
            }
        }
        out
    }
}

/// Check DS1, DS2 and totality. Returns every violation found; an empty list
/// means the schedule is valid.
pub fn validate_schedule(s: &DynamicSchedule) -> Vec<Violation> {
    let mut out = Vec::new();
    let total = |detail: String| Violation::Totality { detail };

    if s.n == 0 || s.n > MAX_NODES {
        out.push(total(format!("node count {} outside [1, {MAX_NODES}]", s.n)));
        return out;
    }
    if s.horizon == 0 {
        out.push(total("horizon must be at least 1".into()));
    }
    if s.alpha.len() != s.horizon {
        out.push(total(format!(
            "alpha has {} entries, expected {}",
            s.alpha.len(),
            s.horizon
        )));
    }
    if s.eta.len() != s.horizon + 1 {
        out.push(total(format!(
            "eta has {} entries, expected {}",
            s.eta.len(),
            s.horizon + 1
        )));
    }
    if s.beta.len() != s.horizon {
        out.push(total(format!(
            "beta has {} entries, expected {}",
            s.beta.len(),
            s.horizon
        )));
    }
    let universe = NodeSet::full(s.n);
    for (k, a) in s.alpha.iter().enumerate() {
        if !a.is_subset(universe) {
            out.push(total(format!("alpha({}) names nodes outside [0, {})", k + 1, s.n)));
        }
    }
    for (e, p) in &s.pi {
        if !p.is_subset(universe) {
            out.push(total(format!("pi({e}) names nodes outside [0, {})", s.n)));
        }
    }
    for e in &s.eta {
        if !s.pi.contains_key(e) {
            out.push(total(format!("pi is undefined for epoch {e}")));
        }
    }
    out.dedup();

    for (k, rows) in s.beta.iter().enumerate() {
        let t = k + 1;
        if rows.len() != s.n || rows.iter().any(|r| r.len() != s.n) {
            out.push(total(format!("beta({t}) is not an {0}x{0} table", s.n)));
            continue;
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                if b + 1 > t {
                    out.push(Violation::Causality { t, i, j, beta: b });
                }
            }
        }
    }

    for t in 1..s.eta.len() {
        if s.eta[t] < s.eta[t - 1] {
            out.push(Violation::EpochDecrease { t1: t - 1, t2: t });
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Two nodes; node 0 receives from node 1 with the data-flow times of the
    /// classic reorder/loss/duplicate illustration. All other pairs are fresh.
    pub(crate) fn reference_delays() -> DynamicSchedule {
        let table = [0, 0, 2, 1, 1, 1, 1, 7, 8, 7];
        let mut s = DynamicSchedule::synchronous(2, 10);
        for (k, &b) in table.iter().enumerate() {
            s.beta[k][0][1] = b;
        }
        s
    }

    #[test]
    fn reference_delays_are_valid() {
        assert!(validate_schedule(&reference_delays()).is_empty());
    }

    #[test]
    fn causality_violation_is_located() {
        let mut s = DynamicSchedule::synchronous(2, 5);
        s.beta[2][0][1] = 3;
        assert_eq!(
            validate_schedule(&s),
            vec![Violation::Causality {
                t: 3,
                i: 0,
                j: 1,
                beta: 3
            }]
        );
    }

    #[test]
    fn epoch_decrease_is_located() {
        let mut s = DynamicSchedule::synchronous(2, 4);
        s.eta = vec![EpochId(0), EpochId(0), EpochId(1), EpochId(0), EpochId(0)];
        s.pi.insert(EpochId(1), NodeSet::full(2));
        assert_eq!(
            validate_schedule(&s),
            vec![Violation::EpochDecrease { t1: 2, t2: 3 }]
        );
    }

    #[test]
    fn totality_catches_short_tables_and_missing_epochs() {
        let mut s = DynamicSchedule::synchronous(2, 4);
        s.alpha.pop();
        s.eta[4] = EpochId(3);
        let v = validate_schedule(&s);
        assert!(v.iter().all(|v| matches!(v, Violation::Totality { .. })));
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn rho_follows_epochs() {
        let mut s = DynamicSchedule::synchronous(3, 6);
        for t in 4..=6 {
            s.eta[t] = EpochId(1);
        }
        s.pi.insert(EpochId(1), NodeSet::singleton(0));
        assert_eq!(s.rho(3).unwrap(), NodeSet::full(3));
        assert_eq!(s.rho(4).unwrap(), NodeSet::singleton(0));
        assert!(s.rho(7).is_err());
        assert_eq!(s.epoch_end(0), 3);
        assert_eq!(s.epoch_start(5), 4);
        assert_eq!(s.segments().len(), 2);
    }

    #[test]
    fn json_layout() {
        let s = DynamicSchedule::synchronous(2, 2);
        let v = serde_json::to_value(&s).unwrap();
        assert_eq!(v["alpha"], serde_json::json!([[0, 1], [0, 1]]));
        assert_eq!(v["beta"][1], serde_json::json!([[1, 1], [1, 1]]));
        assert_eq!(v["eta"], serde_json::json!([0, 0, 0]));
        assert_eq!(v["pi"], serde_json::json!({"0": [0, 1]}));
        let back: DynamicSchedule = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }
}
