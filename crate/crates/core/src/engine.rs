//! Evaluation of the dynamic asynchronous state function over a schedule.
//!
//! The state of node `i` at tick `t` is decided by the first matching case:
//!
//! 1. `i` is not a participant at `t`: the non-participating state `⊥_i`;
//! 2. `t = 0` or `i` was not a participant at `t - 1`: the initial state `x_i`;
//! 3. `i` does not activate at `t`: its state at `t - 1`;
//! 4. otherwise `F_i` of the current epoch applied to the view
//!    `(δ^{β(t,i,1)}_1, .., δ^{β(t,i,n)}_n)`.
//!
//! [`run_delta`] fills the `(t, i)` grid bottom-up, so every referenced cell
//! is already computed when it is read.

use std::collections::HashSet;
use std::fmt::Debug;
use std::hash::Hash;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nodes::{NodeId, NodeSet};
use crate::schedule::{validate_schedule, DynamicSchedule, EpochId, ScheduleError, Time, Violation};

/// Bounds every component value type must satisfy.
pub trait Value: Clone + Eq + Ord + Hash + Debug + Serialize + DeserializeOwned {}

impl<T: Clone + Eq + Ord + Hash + Debug + Serialize + DeserializeOwned> Value for T {}

/// An indexed family of operators `F^{ep}` over `S_1 × .. × S_n`.
pub trait FunctionFamily {
    type Value: Value;

    fn node_count(&self) -> usize;

    /// The non-participating state `⊥`.
    fn bottom(&self) -> Vec<Self::Value>;

    /// Component `i` of `F^{ep}(view)`.
    fn apply_component(
        &self,
        epoch: EpochId,
        participants: NodeSet,
        i: NodeId,
        view: &[Self::Value],
    ) -> Self::Value;

    fn apply(&self, epoch: EpochId, participants: NodeSet, x: &[Self::Value]) -> Vec<Self::Value> {
        (0..self.node_count())
            .map(|i| self.apply_component(epoch, participants, i, x))
            .collect()
    }

    /// The finite domain `S_i`, sorted, when it can be enumerated.
    fn domain(&self, _i: NodeId) -> Option<Vec<Self::Value>> {
        None
    }
}

impl<F: FunctionFamily + ?Sized> FunctionFamily for &F {
    type Value = F::Value;

    fn node_count(&self) -> usize {
        (**self).node_count()
    }

    fn bottom(&self) -> Vec<Self::Value> {
        (**self).bottom()
    }

    fn apply_component(&self, e: EpochId, p: NodeSet, i: NodeId, view: &[Self::Value]) -> Self::Value {
        (**self).apply_component(e, p, i, view)
    }

    fn apply(&self, e: EpochId, p: NodeSet, x: &[Self::Value]) -> Vec<Self::Value> {
        (**self).apply(e, p, x)
    }

    fn domain(&self, i: NodeId) -> Option<Vec<Self::Value>> {
        (**self).domain(i)
    }
}

/// Which case of the state function produced a trace cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    NonParticipant,
    FreshJoin,
    Inactive,
    Activated,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("F produced {value} for node {i} at t={t}, outside its domain")]
    DomainViolation { t: Time, i: NodeId, value: String },
    #[error("state has {got} components, expected {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("schedule is invalid: {0:?}")]
    InvalidSchedule(Vec<Violation>),
    #[error("schedule covers {schedule} nodes but the family has {family}")]
    NodeCountMismatch { schedule: usize, family: usize },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// The full evaluation of the state function from one initial state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace<V> {
    pub schedule: DynamicSchedule,
    pub initial: Vec<V>,
    pub bottom: Vec<V>,
    values: Vec<Vec<V>>,
    cases: Vec<Vec<Case>>,
}

/// One JSONL line of a trace dump.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord<V> {
    pub t: Time,
    pub i: NodeId,
    pub value: V,
    pub case: Case,
    pub epoch: EpochId,
}

impl<V: Value> Trace<V> {
    pub fn horizon(&self) -> Time {
        self.schedule.horizon
    }

    pub fn value(&self, t: Time, i: NodeId) -> &V {
        &self.values[t][i]
    }

    pub fn case(&self, t: Time, i: NodeId) -> Case {
        self.cases[t][i]
    }

    /// The whole state vector at tick `t`.
    pub fn state(&self, t: Time) -> &[V] {
        &self.values[t]
    }

    pub fn values(&self) -> &[Vec<V>] {
        &self.values
    }

    pub fn records(&self) -> impl Iterator<Item = TraceRecord<V>> + '_ {
        (0..=self.horizon()).flat_map(move |t| {
            (0..self.schedule.n).map(move |i| TraceRecord {
                t,
                i,
                value: self.values[t][i].clone(),
                case: self.cases[t][i],
                epoch: self.schedule.eta(t),
            })
        })
    }

    #[cfg(test)]
    pub(crate) fn from_values(self, values: Vec<Vec<V>>) -> Self {
        Trace { values, ..self }
    }

    /// Serialize as JSONL, one record per `(t, i)`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in self.records() {
            out.push_str(&serde_json::to_string(&r).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }
}

pub(crate) struct DomainGuard<V> {
    sets: Vec<Option<HashSet<V>>>,
}

impl<V: Value> DomainGuard<V> {
    pub(crate) fn new<F: FunctionFamily<Value = V>>(f: &F) -> Self {
        let sets = (0..f.node_count())
            .map(|i| f.domain(i).map(|d| d.into_iter().collect()))
            .collect();
        DomainGuard { sets }
    }

    pub(crate) fn check(&self, t: Time, i: NodeId, v: &V) -> Result<(), EngineError> {
        match &self.sets[i] {
            Some(set) if !set.contains(v) => Err(EngineError::DomainViolation {
                t,
                i,
                value: format!("{v:?}"),
            }),
            _ => Ok(()),
        }
    }
}

fn check_inputs<F: FunctionFamily>(f: &F, s: &DynamicSchedule, x: &[F::Value]) -> Result<(), EngineError> {
    let n = f.node_count();
    if s.n != n {
        return Err(EngineError::NodeCountMismatch { schedule: s.n, family: n });
    }
    if x.len() != n {
        return Err(EngineError::StateLength { expected: n, got: x.len() });
    }
    let violations = validate_schedule(s);
    if !violations.is_empty() {
        return Err(EngineError::InvalidSchedule(violations));
    }
    Ok(())
}

/// Evaluate `δ^t_i(x)` for every tick and node of `s`.
pub fn run_delta<F: FunctionFamily>(
    f: &F,
    s: &DynamicSchedule,
    x: &[F::Value],
) -> Result<Trace<F::Value>, EngineError> {
    check_inputs(f, s, x)?;
    let n = s.n;
    let guard = DomainGuard::new(f);
    for (i, v) in x.iter().enumerate() {
        guard.check(0, i, v)?;
    }
    let bottom = f.bottom();
    if bottom.len() != n {
        return Err(EngineError::StateLength { expected: n, got: bottom.len() });
    }

    let mut values: Vec<Vec<F::Value>> = Vec::with_capacity(s.horizon + 1);
    let mut cases: Vec<Vec<Case>> = Vec::with_capacity(s.horizon + 1);
    let mut view: Vec<F::Value> = Vec::with_capacity(n);

    for t in 0..=s.horizon {
        let rho = s.participants(t);
        let prev_rho = if t > 0 { s.participants(t - 1) } else { NodeSet::empty() };
        let alpha = s.alpha(t);
        let mut row = Vec::with_capacity(n);
        let mut row_cases = Vec::with_capacity(n);
        for i in 0..n {
            let (v, c) = if !rho.contains(i) {
                (bottom[i].clone(), Case::NonParticipant)
            } else if t == 0 || !prev_rho.contains(i) {
                (x[i].clone(), Case::FreshJoin)
            } else if !alpha.contains(i) {
                (values[t - 1][i].clone(), Case::Inactive)
            } else {
                view.clear();
                view.extend((0..n).map(|j| values[s.beta(t, i, j)][j].clone()));
                let v = f.apply_component(s.eta(t), rho, i, &view);
                guard.check(t, i, &v)?;
                (v, Case::Activated)
            };
            row.push(v);
            row_cases.push(c);
        }
        values.push(row);
        cases.push(row_cases);
    }

    Ok(Trace {
        schedule: s.clone(),
        initial: x.to_vec(),
        bottom,
        values,
        cases,
    })
}

/// `(F^{ep})^k(x)`.
pub fn run_synchronous<F: FunctionFamily>(
    f: &F,
    epoch: EpochId,
    participants: NodeSet,
    x: &[F::Value],
    k: usize,
) -> Result<Vec<F::Value>, EngineError> {
    let n = f.node_count();
    if x.len() != n {
        return Err(EngineError::StateLength { expected: n, got: x.len() });
    }
    let guard = DomainGuard::new(f);
    let mut state = x.to_vec();
    for step in 1..=k {
        state = f.apply(epoch, participants, &state);
        for (i, v) in state.iter().enumerate() {
            guard.check(step, i, v)?;
        }
    }
    Ok(state)
}

/// Lift a static schedule (`alpha`, `beta` for ticks `1..=T`) into a single
/// epoch in which every node participates.
pub fn embed_static(
    alpha: Vec<NodeSet>,
    beta: Vec<Vec<Vec<Time>>>,
    n: usize,
) -> Result<DynamicSchedule, ScheduleError> {
    if alpha.len() != beta.len() {
        return Err(ScheduleError::Malformed(format!(
            "alpha covers {} ticks but beta covers {}",
            alpha.len(),
            beta.len()
        )));
    }
    for (k, rows) in beta.iter().enumerate() {
        let t = k + 1;
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(ScheduleError::Malformed(format!("beta({t}) is not an {n}x{n} table")));
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                if b >= t {
                    return Err(ScheduleError::StaticCausality { t, i, j, beta: b });
                }
            }
        }
    }
    let horizon = alpha.len();
    Ok(DynamicSchedule {
        n,
        horizon,
        alpha,
        beta,
        eta: vec![EpochId(0); horizon + 1],
        pi: [(EpochId(0), NodeSet::full(n))].into_iter().collect(),
    })
}
