//! Checkers for the dynamic ACO and AMCO conditions on finite state spaces,
//! per-epoch fixed points, and the box construction from distances.

mod aco;
mod amco;
pub(crate) mod enumerate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineError, FunctionFamily, Value};
use crate::nodes::{NodeId, NodeSet};
use crate::schedule::EpochId;

pub use aco::{check_dynamic_aco, CertifiedBoxes, CertifyError};
pub use amco::{accordant_fixed_points, amco_to_aco, check_dynamic_amco, find_fixed_point, reduce_all};

/// Default cap on the number of product states a checker may enumerate.
pub const DEFAULT_BUDGET: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckOptions {
    pub budget: u128,
    /// Step cap for the fixed-point chain from `⊥`.
    pub max_steps: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            budget: DEFAULT_BUDGET,
            max_steps: 10_000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConditionError {
    #[error("enumerating {what} needs {size} states, over the budget of {budget}")]
    EnumerationTooLarge { what: String, size: u128, budget: u128 },
    #[error("no fixed point reached from bottom within {steps} steps for epoch {epoch}, participants {participants}")]
    NoFixedPoint {
        epoch: EpochId,
        participants: NodeSet,
        steps: usize,
    },
    #[error("domain of node {0} is not enumerable")]
    OpaqueDomain(NodeId),
    #[error("F^({epoch},{participants}) returned {value} for node {node}, outside its domain")]
    DomainViolation {
        epoch: EpochId,
        participants: NodeSet,
        node: NodeId,
        value: String,
    },
    #[error("no boxes supplied for epoch {epoch}, participants {participants}")]
    MissingBoxes { epoch: EpochId, participants: NodeSet },
    #[error("invalid boxes: {0}")]
    InvalidBoxes(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Per-node distance functions `d^{ep}_i` over component values.
pub trait DistanceFamily<V> {
    fn distance(&self, epoch: EpochId, participants: NodeSet, i: NodeId, u: &V, v: &V) -> u32;

    /// An upper bound on `distance(epoch, participants, i, ..)`.
    fn bound(&self, epoch: EpochId, participants: NodeSet, i: NodeId) -> u32;

    /// `D^{ep}(x, y)`, the maximum over participants.
    fn state_distance(&self, epoch: EpochId, participants: NodeSet, x: &[V], y: &[V]) -> u32 {
        participants
            .iter()
            .map(|i| self.distance(epoch, participants, i, &x[i], &y[i]))
            .max()
            .unwrap_or(0)
    }
}

/// `0` on equal values, otherwise the node's bound (1, or 0 on single-valued
/// domains).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscreteMetric {
    bounds: Vec<u32>,
}

impl DiscreteMetric {
    pub fn for_family<F: FunctionFamily>(f: &F) -> Self {
        let bounds = (0..f.node_count())
            .map(|i| match f.domain(i) {
                Some(d) if d.len() <= 1 => 0,
                _ => 1,
            })
            .collect();
        DiscreteMetric { bounds }
    }
}

impl<V: PartialEq> DistanceFamily<V> for DiscreteMetric {
    fn distance(&self, _: EpochId, _: NodeSet, i: NodeId, u: &V, v: &V) -> u32 {
        if u == v {
            0
        } else {
            self.bounds[i].max(1)
        }
    }

    fn bound(&self, _: EpochId, _: NodeSet, i: NodeId) -> u32 {
        self.bounds[i]
    }
}

/// `x ∈ A_p`: every node outside `p` holds its non-participating state.
pub fn is_accordant<V: PartialEq>(p: NodeSet, bottom: &[V], x: &[V]) -> bool {
    x.iter()
        .zip(bottom)
        .enumerate()
        .all(|(i, (v, b))| p.contains(i) || v == b)
}

/// `x =_p y`: agreement on every participant.
pub fn equal_on<V: PartialEq>(p: NodeSet, x: &[V], y: &[V]) -> bool {
    p.iter().all(|i| x[i] == y[i])
}

/// The nested boxes `B^{ep}(0), B^{ep}(1), ..` for one `(epoch, participants)`.
///
/// `levels[k][i]` is `B(k)_i`. Indices past the last stored level read the
/// last level, so a family storing `kstar + 2` levels states its constancy
/// explicitly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpochBoxes<V: Ord> {
    pub kstar: usize,
    pub xstar: Vec<V>,
    levels: Vec<Vec<BTreeSet<V>>>,
}

impl<V: Value> EpochBoxes<V> {
    pub fn new(kstar: usize, xstar: Vec<V>, levels: Vec<Vec<BTreeSet<V>>>) -> Result<Self, ConditionError> {
        let n = xstar.len();
        if levels.len() < kstar + 1 {
            return Err(ConditionError::InvalidBoxes(format!(
                "{} levels stored but kstar is {kstar}",
                levels.len()
            )));
        }
        if let Some(k) = levels.iter().position(|l| l.len() != n) {
            return Err(ConditionError::InvalidBoxes(format!(
                "level {k} has {} components, expected {n}",
                levels[k].len()
            )));
        }
        Ok(EpochBoxes { kstar, xstar, levels })
    }

    pub fn node_count(&self) -> usize {
        self.xstar.len()
    }

    pub fn level(&self, k: usize) -> &[BTreeSet<V>] {
        &self.levels[k.min(self.levels.len() - 1)]
    }

    pub fn contains(&self, k: usize, i: NodeId, v: &V) -> bool {
        self.level(k)[i].contains(v)
    }

    pub fn contains_state(&self, k: usize, x: &[V]) -> bool {
        x.iter().enumerate().all(|(i, v)| self.contains(k, i, v))
    }

    /// Largest `k <= kstar` with `v ∈ B(k)_i`.
    pub fn max_box(&self, i: NodeId, v: &V) -> Option<usize> {
        (0..=self.kstar).rev().find(|&k| self.contains(k, i, v))
    }
}

/// Boxes for every `(epoch, participants)` pair of interest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound(serialize = "V: Value", deserialize = "V: Value"))]
#[serde(into = "Vec<BoxEntry<V>>", try_from = "Vec<BoxEntry<V>>")]
pub struct BoxFamily<V: Value> {
    entries: BTreeMap<(EpochId, NodeSet), EpochBoxes<V>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxEntry<V: Ord> {
    pub epoch: EpochId,
    pub participants: NodeSet,
    pub kstar: usize,
    pub xstar: Vec<V>,
    pub levels: Vec<Vec<BTreeSet<V>>>,
}

impl<V: Value> From<BoxFamily<V>> for Vec<BoxEntry<V>> {
    fn from(b: BoxFamily<V>) -> Self {
        b.entries
            .into_iter()
            .map(|((epoch, participants), eb)| BoxEntry {
                epoch,
                participants,
                kstar: eb.kstar,
                xstar: eb.xstar,
                levels: eb.levels,
            })
            .collect()
    }
}

impl<V: Value> TryFrom<Vec<BoxEntry<V>>> for BoxFamily<V> {
    type Error = ConditionError;

    fn try_from(entries: Vec<BoxEntry<V>>) -> Result<Self, Self::Error> {
        let mut out = BoxFamily::new();
        for e in entries {
            out.insert(e.epoch, e.participants, EpochBoxes::new(e.kstar, e.xstar, e.levels)?);
        }
        Ok(out)
    }
}

impl<V: Value> Default for BoxFamily<V> {
    fn default() -> Self {
        BoxFamily { entries: BTreeMap::new() }
    }
}

impl<V: Value> BoxFamily<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, epoch: EpochId, participants: NodeSet, boxes: EpochBoxes<V>) {
        self.entries.insert((epoch, participants), boxes);
    }

    pub fn get(&self, epoch: EpochId, participants: NodeSet) -> Option<&EpochBoxes<V>> {
        self.entries.get(&(epoch, participants))
    }

    pub fn contains(&self, epoch: EpochId, participants: NodeSet, k: usize, i: NodeId, v: &V) -> Option<bool> {
        self.get(epoch, participants).map(|b| b.contains(k, i, v))
    }

    pub fn kstar(&self, epoch: EpochId, participants: NodeSet) -> Option<usize> {
        self.get(epoch, participants).map(|b| b.kstar)
    }

    pub fn xstar(&self, epoch: EpochId, participants: NodeSet) -> Option<&[V]> {
        self.get(epoch, participants).map(|b| b.xstar.as_slice())
    }

    pub fn pairs(&self) -> Vec<(EpochId, NodeSet)> {
        self.entries.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    DA1,
    DA2,
    DA3,
    DA4,
    DA5,
    DU1,
    DU2,
    DU3,
    DU4,
    DU5,
}

impl Condition {
    pub const ACO: [Condition; 5] = [Self::DA1, Self::DA2, Self::DA3, Self::DA4, Self::DA5];
    pub const AMCO: [Condition; 5] = [Self::DU1, Self::DU2, Self::DU3, Self::DU4, Self::DU5];
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A concrete counterexample to one condition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness<V> {
    pub condition: Condition,
    pub epoch: EpochId,
    pub participants: NodeSet,
    /// The second `(epoch, participants)` pair, for conditions relating two.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other: Option<(EpochId, NodeSet)>,
    pub states: Vec<Vec<V>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_index: Option<usize>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport<V> {
    pub passed: bool,
    pub conditions: BTreeMap<Condition, bool>,
    /// The first counterexample found, if any.
    pub witness: Option<Witness<V>>,
    /// One counterexample per failed condition.
    pub witnesses: Vec<Witness<V>>,
}

impl<V: Clone> CheckReport<V> {
    pub(crate) fn new(conditions: &[Condition]) -> Self {
        CheckReport {
            passed: true,
            conditions: conditions.iter().map(|&c| (c, true)).collect(),
            witness: None,
            witnesses: Vec::new(),
        }
    }

    pub(crate) fn has_failed(&self, c: Condition) -> bool {
        self.conditions.get(&c) == Some(&false)
    }

    /// Record a counterexample. Only the first one per condition is kept.
    pub(crate) fn fail(&mut self, w: Witness<V>) {
        if self.has_failed(w.condition) {
            return;
        }
        self.passed = false;
        self.conditions.insert(w.condition, false);
        if self.witness.is_none() {
            self.witness = Some(w.clone());
        }
        self.witnesses.push(w);
    }

    pub fn failed(&self) -> Vec<Condition> {
        self.conditions
            .iter()
            .filter(|(_, ok)| !**ok)
            .map(|(c, _)| *c)
            .collect()
    }
}

pub(crate) fn domains<F: FunctionFamily>(f: &F) -> Result<Vec<Vec<F::Value>>, ConditionError> {
    (0..f.node_count())
        .map(|i| {
            f.domain(i).ok_or(ConditionError::OpaqueDomain(i)).map(|mut d| {
                d.sort();
                d.dedup();
                d
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accordance_and_participant_equality() {
        let p: NodeSet = [0, 2].into_iter().collect();
        let bot = [9, 9, 9];
        assert!(is_accordant(p, &bot, &[1, 9, 3]));
        assert!(!is_accordant(p, &bot, &[1, 2, 3]));
        assert!(equal_on(p, &[1, 5, 3], &[1, 6, 3]));
        assert!(!equal_on(p, &[1, 5, 3], &[1, 5, 4]));
        // accordant states equal on p are equal
        assert_eq!(is_accordant(p, &bot, &[1, 9, 3]) && equal_on(p, &[1, 9, 3], &[1, 9, 3]), true);
    }

    #[test]
    fn box_levels_saturate() {
        let lvl = |v: &[u32]| vec![v.iter().copied().collect::<BTreeSet<_>>()];
        let b = EpochBoxes::new(1, vec![0], vec![lvl(&[0, 1]), lvl(&[0])]).unwrap();
        assert!(b.contains(0, 0, &1));
        assert!(!b.contains(5, 0, &1));
        assert_eq!(b.max_box(0, &1), Some(0));
        assert_eq!(b.max_box(0, &0), Some(1));
        assert!(EpochBoxes::new(3, vec![0], vec![lvl(&[0])]).is_err());
    }

    #[test]
    fn box_family_json_round_trip() {
        let lvl = |v: &[u32]| vec![v.iter().copied().collect::<BTreeSet<_>>(); 2];
        let mut fam = BoxFamily::new();
        fam.insert(EpochId(0), NodeSet::full(2), EpochBoxes::new(1, vec![0, 0], vec![lvl(&[0, 1]), lvl(&[0])]).unwrap());
        let json = serde_json::to_string(&fam).unwrap();
        assert!(json.starts_with("[{\"epoch\":0,\"participants\":[0,1],\"kstar\":1"));
        let back: BoxFamily<u32> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, fam);
        assert!(serde_json::from_str::<BoxFamily<u32>>(
            r#"[{"epoch":0,"participants":[0],"kstar":4,"xstar":[0],"levels":[[[0]]]}]"#
        )
        .is_err());
    }

    #[test]
    fn report_keeps_first_witness_per_condition() {
        let mut r: CheckReport<u32> = CheckReport::new(&Condition::ACO);
        let w = |c, d: &str| Witness {
            condition: c,
            epoch: EpochId(0),
            participants: NodeSet::empty(),
            other: None,
            states: vec![],
            node: None,
            box_index: None,
            detail: d.into(),
        };
        r.fail(w(Condition::DA2, "a"));
        r.fail(w(Condition::DA2, "b"));
        r.fail(w(Condition::DA4, "c"));
        assert!(!r.passed);
        assert_eq!(r.failed(), vec![Condition::DA2, Condition::DA4]);
        assert_eq!(r.witnesses.len(), 2);
        assert_eq!(r.witness.unwrap().detail, "a");
        let json = serde_json::to_value(&r.conditions).unwrap();
        assert_eq!(json["DA1"], true);
        assert_eq!(json["DA2"], false);
    }
}
