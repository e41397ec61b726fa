//! Activation periods, expiry periods and pseudocycles over dynamic schedules.
//!
//! The predicates here are direct transcriptions of the definitions. The
//! disjoint-pseudocycle counter uses a faster characterisation (earliest
//! expiry end, then earliest activation) which the tests pin against the
//! direct predicate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::nodes::NodeId;
use crate::schedule::{DynamicSchedule, Time};

/// How far an expiry period's "for all later times" quantifier reaches on a
/// finite horizon.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpiryScope {
    /// Quantify up to the horizon.
    Horizon,
    /// Quantify up to the last tick of the expiry period's epoch.
    #[default]
    Epoch,
}

impl FromStr for ExpiryScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "epoch" => Ok(ExpiryScope::Epoch),
            "horizon" => Ok(ExpiryScope::Horizon),
            other => Err(format!("unknown expiry scope `{other}` (expected epoch|horizon)")),
        }
    }
}

impl fmt::Display for ExpiryScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExpiryScope::Horizon => "horizon",
            ExpiryScope::Epoch => "epoch",
        })
    }
}

/// The closed interval `[t1, t2]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Period {
    pub t1: Time,
    pub t2: Time,
}

impl Period {
    pub fn new(t1: Time, t2: Time) -> Self {
        Period { t1, t2 }
    }

    fn fits(&self, s: &DynamicSchedule) -> bool {
        self.t1 <= self.t2 && self.t2 <= s.horizon
    }
}

fn same_epoch(s: &DynamicSchedule, p: Period) -> bool {
    s.eta(p.t1) == s.eta(p.t2)
}

fn scope_end(s: &DynamicSchedule, t: Time, scope: ExpiryScope) -> Time {
    match scope {
        ExpiryScope::Horizon => s.horizon,
        ExpiryScope::Epoch => s.epoch_end(t),
    }
}

pub fn is_activation_period(s: &DynamicSchedule, i: NodeId, p: Period) -> bool {
    p.fits(s)
        && same_epoch(s, p)
        && (p.t1.max(1)..=p.t2).any(|t| s.alpha(t).contains(i))
}

pub fn is_expiry_period(s: &DynamicSchedule, i: NodeId, p: Period, scope: ExpiryScope) -> bool {
    if !p.fits(s) || !same_epoch(s, p) {
        return false;
    }
    let end = scope_end(s, p.t2, scope);
    (p.t2.max(1)..=end).all(|t| (0..s.n).all(|j| p.t1 <= s.beta(t, i, j)))
}

/// Pseudocycles must have non-zero width.
pub fn is_pseudocycle(s: &DynamicSchedule, p: Period, scope: ExpiryScope) -> bool {
    if !p.fits(s) || p.t1 == p.t2 || !same_epoch(s, p) {
        return false;
    }
    s.participants(p.t1).iter().all(|i| {
        (p.t1..=p.t2).any(|t| {
            is_expiry_period(s, i, Period::new(p.t1, t), scope)
                && is_activation_period(s, i, Period::new(t, p.t2))
        })
    })
}

/// Earliest `t` such that `[t1, t]` is an expiry period for `i`.
pub fn earliest_expiry_end(
    s: &DynamicSchedule,
    i: NodeId,
    t1: Time,
    scope: ExpiryScope,
) -> Option<Time> {
    let epoch_end = s.epoch_end(t1);
    let end = scope_end(s, t1, scope);
    let last_stale = (t1.max(1)..=end)
        .rev()
        .find(|&r| (0..s.n).any(|j| s.beta(r, i, j) < t1));
    let m = last_stale.map_or(t1, |r| r + 1);
    (m <= epoch_end).then_some(m)
}

fn next_activation(s: &DynamicSchedule, i: NodeId, from: Time, until: Time) -> Option<Time> {
    (from.max(1)..=until).find(|&t| s.alpha(t).contains(i))
}

/// Smallest `t2` with `[t1, t2]` a pseudocycle, not exceeding `limit`.
pub fn earliest_pseudocycle_end(
    s: &DynamicSchedule,
    t1: Time,
    limit: Time,
    scope: ExpiryScope,
) -> Option<Time> {
    let limit = limit.min(s.epoch_end(t1));
    let mut end = t1 + 1;
    for i in s.participants(t1).iter() {
        let m = earliest_expiry_end(s, i, t1, scope)?;
        let a = next_activation(s, i, m, limit)?;
        end = end.max(a);
    }
    (end <= limit).then_some(end)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PseudocycleCount {
    pub count: usize,
    pub periods: Vec<Period>,
}

/// Greedy earliest-completion count of disjoint pseudocycles starting at
/// `p.t1`. Consecutive pseudocycles share their boundary tick.
pub fn count_disjoint_pseudocycles(
    s: &DynamicSchedule,
    p: Period,
    scope: ExpiryScope,
) -> PseudocycleCount {
    let mut periods = Vec::new();
    if p.fits(s) {
        let mut cursor = p.t1;
        while let Some(end) = earliest_pseudocycle_end(s, cursor, p.t2, scope) {
            periods.push(Period::new(cursor, end));
            cursor = end;
        }
    }
    PseudocycleCount {
        count: periods.len(),
        periods,
    }
}

/// Disjoint pseudocycles of every epoch, each counted from the epoch's first tick.
pub fn epoch_pseudocycles(s: &DynamicSchedule, scope: ExpiryScope) -> Vec<Period> {
    s.segments()
        .into_iter()
        .flat_map(|seg| count_disjoint_pseudocycles(s, Period::new(seg.start, seg.end), scope).periods)
        .collect()
}
