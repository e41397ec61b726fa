//! Box instrumentation of traces: which box each state, each node's incoming
//! messages and each node's computation sit in, and empirical checks of the
//! stability and progress lemmas behind convergence.
//!
//! Quantifications over "every later tick" stop at the epoch end or at the
//! horizon, whichever comes first. The final epoch of a trace is cut by the
//! horizon, so results about it are provisional.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{BoxFamily, CertifiedBoxes, EpochBoxes};
use crate::engine::{Trace, Value};
use crate::nodes::{NodeId, NodeSet};
use crate::pseudocycle::{earliest_expiry_end, ExpiryScope, Period};
use crate::schedule::{EpochId, Time};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoxTraceError {
    #[error("no boxes for epoch {epoch}, participants {participants} (first used at t={t})")]
    MissingBoxes { epoch: EpochId, participants: NodeSet, t: Time },
    #[error("precondition unmet: {0}")]
    PreconditionUnmet(String),
}

fn boxes_at<'a, V: Value>(
    trace: &Trace<V>,
    boxes: &'a BoxFamily<V>,
    t: Time,
) -> Result<&'a EpochBoxes<V>, BoxTraceError> {
    let s = &trace.schedule;
    let (epoch, participants) = (s.eta(t), s.participants(t));
    boxes.get(epoch, participants).ok_or(BoxTraceError::MissingBoxes { epoch, participants, t })
}

/// `δ^t_i(x) ∈ B^t(k)_i`.
pub fn state_in_box<V: Value>(
    trace: &Trace<V>,
    boxes: &BoxFamily<V>,
    i: NodeId,
    k: usize,
    t: Time,
) -> Result<bool, BoxTraceError> {
    Ok(boxes_at(trace, boxes, t)?.contains(k, i, trace.value(t, i)))
}

/// Every message arriving at `i` after `t` and within the epoch of `t` holds
/// values in `B^t(k)`.
pub fn messages_in_box<V: Value>(
    trace: &Trace<V>,
    boxes: &BoxFamily<V>,
    i: NodeId,
    k: usize,
    t: Time,
) -> Result<bool, BoxTraceError> {
    let b = boxes_at(trace, boxes, t)?;
    let s = &trace.schedule;
    let end = s.epoch_end(t);
    Ok(((t + 1)..=end).all(|r| (0..s.n).all(|j| b.contains(k, j, trace.value(s.beta(r, i, j), j)))))
}

/// Every message arriving at `i` after `t` and within the epoch of `t` from a
/// node outside `ρ` holds that node's non-participating state.
pub fn messages_well_formed<V: Value>(trace: &Trace<V>, i: NodeId, t: Time) -> bool {
    let s = &trace.schedule;
    let end = s.epoch_end(t);
    ((t + 1)..=end).all(|r| {
        let rho = s.participants(r);
        (0..s.n)
            .filter(|&j| !rho.contains(j))
            .all(|j| trace.value(s.beta(r, i, j), j) == &trace.bottom[j])
    })
}

/// The box a node's computation is in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComputationBox {
    /// Some later message from a non-participant is not `⊥`.
    NotWellFormed,
    /// Well formed, but the state is not even in `B(0)`.
    OutsideInitial,
    InBox(usize),
}

impl ComputationBox {
    /// The box index, with 0 for the two non-box cases.
    pub fn index(self) -> usize {
        match self {
            ComputationBox::InBox(k) => k,
            _ => 0,
        }
    }
}

/// Largest `k <= kstar` such that the state is in box `k`, the messages are
/// in box `k - 1` and the messages are well formed. Non-participants report
/// `kstar`.
pub fn computation_in_box<V: Value>(
    trace: &Trace<V>,
    boxes: &BoxFamily<V>,
    i: NodeId,
    t: Time,
) -> Result<ComputationBox, BoxTraceError> {
    let b = boxes_at(trace, boxes, t)?;
    if !trace.schedule.participants(t).contains(i) {
        return Ok(ComputationBox::InBox(b.kstar));
    }
    if !messages_well_formed(trace, i, t) {
        return Ok(ComputationBox::NotWellFormed);
    }
    for k in (0..=b.kstar).rev() {
        if state_in_box(trace, boxes, i, k, t)? && (k == 0 || messages_in_box(trace, boxes, i, k - 1, t)?) {
            return Ok(ComputationBox::InBox(k));
        }
    }
    Ok(ComputationBox::OutsideInitial)
}

/// One JSONL record of [`annotate`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxAnnotation {
    pub t: Time,
    pub i: NodeId,
    pub state_box: Option<usize>,
    pub msgs_box: Option<usize>,
    pub well_formed: bool,
    pub computation_box: usize,
}

/// Precomputed box predicates for every `(t, i, k)` with `k <= kstar(t)`.
///
/// Message predicates are suffix conjunctions over arrival ticks, so the whole
/// table costs one pass per epoch.
pub struct Instrument<'a, V: Value> {
    trace: &'a Trace<V>,
    kstar: Vec<usize>,
    state: Vec<Vec<Vec<bool>>>,
    state_suffix: Vec<Vec<Vec<bool>>>,
    msgs: Vec<Vec<Vec<bool>>>,
    well_formed: Vec<Vec<bool>>,
}

impl<'a, V: Value> Instrument<'a, V> {
    pub fn new(trace: &'a Trace<V>, boxes: &BoxFamily<V>) -> Result<Self, BoxTraceError> {
        let s = &trace.schedule;
        let (n, horizon) = (s.n, s.horizon);
        let per_tick: Vec<&EpochBoxes<V>> = (0..=horizon).map(|t| boxes_at(trace, boxes, t)).collect::<Result<_, _>>()?;
        if let Some(b) = per_tick.iter().find(|b| b.node_count() != n) {
            return Err(BoxTraceError::PreconditionUnmet(format!(
                "boxes cover {} nodes, the trace has {n}",
                b.node_count()
            )));
        }
        let kstar: Vec<usize> = per_tick.iter().map(|b| b.kstar).collect();

        let state: Vec<Vec<Vec<bool>>> = (0..=horizon)
            .map(|t| {
                (0..n)
                    .map(|i| (0..=kstar[t]).map(|k| per_tick[t].contains(k, i, trace.value(t, i))).collect())
                    .collect()
            })
            .collect();

        let mut state_suffix = state.clone();
        let mut msgs: Vec<Vec<Vec<bool>>> = (0..=horizon).map(|t| vec![vec![true; kstar[t] + 1]; n]).collect();
        let mut well_formed = vec![vec![true; n]; horizon + 1];
        for seg in s.segments() {
            for t in (seg.start..seg.end).rev() {
                let r = t + 1;
                let b = per_tick[r];
                let rho = s.participants(r);
                for i in 0..n {
                    for k in 0..=kstar[t] {
                        state_suffix[t][i][k] = state[t][i][k] && state_suffix[r][i][k];
                        let arrived = (0..n).all(|j| b.contains(k, j, trace.value(s.beta(r, i, j), j)));
                        msgs[t][i][k] = arrived && msgs[r][i][k];
                    }
                    let wf = (0..n)
                        .filter(|&j| !rho.contains(j))
                        .all(|j| trace.value(s.beta(r, i, j), j) == &trace.bottom[j]);
                    well_formed[t][i] = wf && well_formed[r][i];
                }
            }
        }
        Ok(Instrument {
            trace,
            kstar,
            state,
            state_suffix,
            msgs,
            well_formed,
        })
    }

    pub fn kstar(&self, t: Time) -> usize {
        self.kstar[t]
    }

    fn clamp(&self, t: Time, k: usize) -> usize {
        k.min(self.kstar[t])
    }

    pub fn state_in_box(&self, t: Time, i: NodeId, k: usize) -> bool {
        self.state[t][i][self.clamp(t, k)]
    }

    /// The state is in box `k` from `t` to the end of the epoch.
    pub fn state_stays_in_box(&self, t: Time, i: NodeId, k: usize) -> bool {
        self.state_suffix[t][i][self.clamp(t, k)]
    }

    pub fn messages_in_box(&self, t: Time, i: NodeId, k: usize) -> bool {
        self.msgs[t][i][self.clamp(t, k)]
    }

    pub fn well_formed(&self, t: Time, i: NodeId) -> bool {
        self.well_formed[t][i]
    }

    /// Definition of "the computation at node `i` is in box `k` at `t`".
    pub fn node_in_box(&self, t: Time, i: NodeId, k: usize) -> bool {
        self.state_in_box(t, i, k) && (k == 0 || self.messages_in_box(t, i, k - 1)) && self.well_formed(t, i)
    }

    /// The computation at every participant is in box `k` at `t`.
    pub fn computation_in_box(&self, t: Time, k: usize) -> bool {
        self.trace.schedule.participants(t).iter().all(|i| self.node_in_box(t, i, k))
    }

    pub fn computation_box(&self, t: Time, i: NodeId) -> ComputationBox {
        let kstar = self.kstar[t];
        if !self.trace.schedule.participants(t).contains(i) {
            return ComputationBox::InBox(kstar);
        }
        if !self.well_formed(t, i) {
            return ComputationBox::NotWellFormed;
        }
        (0..=kstar)
            .rev()
            .find(|&k| self.node_in_box(t, i, k))
            .map_or(ComputationBox::OutsideInitial, ComputationBox::InBox)
    }

    /// Largest `k` with the whole computation in box `k` at `t`.
    pub fn computation_level(&self, t: Time) -> Option<usize> {
        (0..=self.kstar[t]).rev().find(|&k| self.computation_in_box(t, k))
    }

    pub fn annotation(&self, t: Time, i: NodeId) -> BoxAnnotation {
        let kstar = self.kstar[t];
        BoxAnnotation {
            t,
            i,
            state_box: (0..=kstar).rev().find(|&k| self.state[t][i][k]),
            msgs_box: (0..=kstar).rev().find(|&k| self.msgs[t][i][k]),
            well_formed: self.well_formed[t][i],
            computation_box: self.computation_box(t, i).index(),
        }
    }
}

/// Annotate every `(t, i)` cell.
pub fn annotate<V: Value>(trace: &Trace<V>, boxes: &BoxFamily<V>) -> Result<Vec<BoxAnnotation>, BoxTraceError> {
    let inst = Instrument::new(trace, boxes)?;
    Ok((0..=trace.horizon())
        .flat_map(|t| (0..trace.schedule.n).map(move |i| (t, i)))
        .map(|(t, i)| inst.annotation(t, i))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Lemma {
    /// Every state is in box 0.
    L1,
    /// Every node's messages are in box 0.
    L2,
    /// Once the computation at a node is in box `k`, its state stays in box
    /// `k` for the rest of the epoch.
    L3,
    /// Well-formed messages in box `k` plus an activation give a state in box
    /// `k + 1`.
    L4,
    /// The computation in box `k` plus an expiry period give messages in box
    /// `k`.
    L5,
    /// A pseudocycle advances the computation by one box.
    L6,
    /// After any pseudocycle the computation is in box 1.
    L7,
}

impl Lemma {
    pub const ALL: [Lemma; 7] = [Lemma::L1, Lemma::L2, Lemma::L3, Lemma::L4, Lemma::L5, Lemma::L6, Lemma::L7];
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaWitness {
    pub t: Time,
    /// The later tick the claim was checked at, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaResult {
    pub lemma: Lemma,
    pub passed: bool,
    /// Number of instances whose premise held.
    pub checked: usize,
    /// How many of those lie in the horizon-truncated final epoch.
    pub provisional: usize,
    pub witness: Option<LemmaWitness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub passed: bool,
    pub lemmas: Vec<LemmaResult>,
    /// The epoch cut off by the horizon.
    pub provisional_epoch: EpochId,
}

impl LemmaReport {
    pub fn result(&self, lemma: Lemma) -> &LemmaResult {
        self.lemmas.iter().find(|r| r.lemma == lemma).expect("every lemma is reported")
    }

    pub fn failed(&self) -> Vec<Lemma> {
        self.lemmas.iter().filter(|r| !r.passed).map(|r| r.lemma).collect()
    }
}

struct Tally {
    result: LemmaResult,
    final_start: Time,
}

impl Tally {
    fn new(lemma: Lemma, final_start: Time) -> Self {
        Tally {
            result: LemmaResult {
                lemma,
                passed: true,
                checked: 0,
                provisional: 0,
                witness: None,
            },
            final_start,
        }
    }

    fn check(&mut self, t: Time, holds: bool, witness: impl FnOnce() -> LemmaWitness) {
        self.result.checked += 1;
        if t >= self.final_start {
            self.result.provisional += 1;
        }
        if !holds && self.result.passed {
            self.result.passed = false;
            self.result.witness = Some(witness());
        }
    }
}

/// Check the lemmas on a trace whose boxes are certified and whose initial
/// state lies in the initial box.
pub fn verify_lemmas<V: Value>(
    trace: &Trace<V>,
    boxes: &CertifiedBoxes<V>,
    pseudocycles: &[Period],
) -> Result<LemmaReport, BoxTraceError> {
    let b0 = boxes_at(trace, boxes.boxes(), 0)?;
    if !b0.contains_state(0, &trace.initial) {
        return Err(BoxTraceError::PreconditionUnmet(format!(
            "initial state {:?} is not in the initial box",
            trace.initial
        )));
    }
    verify_lemmas_unchecked(trace, boxes.boxes(), pseudocycles)
}

/// [`verify_lemmas`] without its preconditions, for deliberately unsound
/// inputs.
pub fn verify_lemmas_unchecked<V: Value>(
    trace: &Trace<V>,
    boxes: &BoxFamily<V>,
    pseudocycles: &[Period],
) -> Result<LemmaReport, BoxTraceError> {
    let inst = Instrument::new(trace, boxes)?;
    let s = &trace.schedule;
    let (n, horizon) = (s.n, s.horizon);
    let final_start = s.epoch_start(horizon);
    let mut tallies: Vec<Tally> = Lemma::ALL.iter().map(|&l| Tally::new(l, final_start)).collect();
    let [l1, l2, l3, l4, l5, l6, l7] = &mut tallies[..] else { unreachable!() };

    let mut next_activation = vec![vec![None::<Time>; n]; horizon + 1];
    for seg in s.segments() {
        for i in 0..n {
            let mut next = None;
            for t in (seg.start..=seg.end).rev() {
                next_activation[t][i] = next;
                if t >= 1 && s.alpha(t).contains(i) {
                    next = Some(t);
                }
            }
        }
    }

    for t in 0..=horizon {
        let kstar = inst.kstar(t);
        for i in 0..n {
            l1.check(t, inst.state_in_box(t, i, 0), || LemmaWitness {
                t,
                s: None,
                i: Some(i),
                k: Some(0),
                detail: format!("state {:?} is outside B(0)", trace.value(t, i)),
            });
            l2.check(t, inst.messages_in_box(t, i, 0), || LemmaWitness {
                t,
                s: None,
                i: Some(i),
                k: Some(0),
                detail: "a later message is outside B(0)".into(),
            });
            for k in 0..=kstar {
                if inst.node_in_box(t, i, k) {
                    l3.check(t, inst.state_stays_in_box(t, i, k), || LemmaWitness {
                        t,
                        s: None,
                        i: Some(i),
                        k: Some(k),
                        detail: "state leaves the box later in the epoch".into(),
                    });
                }
                if inst.well_formed(t, i) && inst.messages_in_box(t, i, k) {
                    if let Some(a) = next_activation[t][i] {
                        l4.check(t, inst.state_stays_in_box(a, i, k + 1), || LemmaWitness {
                            t,
                            s: Some(a),
                            i: Some(i),
                            k: Some(k),
                            detail: format!("after activating at {a} the state is not always in box {}", k + 1),
                        });
                    }
                }
            }
        }

        let level = inst.computation_level(t);
        if let Some(top) = level {
            for i in 0..n {
                let Some(m) = earliest_expiry_end(s, i, t, ExpiryScope::Epoch) else {
                    continue;
                };
                for k in 0..=top {
                    if !inst.computation_in_box(t, k) {
                        continue;
                    }
                    l5.check(t, inst.messages_in_box(m, i, k), || LemmaWitness {
                        t,
                        s: Some(m),
                        i: Some(i),
                        k: Some(k),
                        detail: format!("messages not in box {k} after the expiry period [{t}, {m}]"),
                    });
                }
            }
        }
    }

    for p in pseudocycles {
        let (t, u) = (p.t1, p.t2);
        let kstar = inst.kstar(t);
        for k in 0..=kstar {
            if inst.computation_in_box(t, k) {
                l6.check(t, inst.computation_in_box(u, k + 1), || LemmaWitness {
                    t,
                    s: Some(u),
                    i: s.participants(u).iter().find(|&i| !inst.node_in_box(u, i, k + 1)),
                    k: Some(k),
                    detail: format!("computation in box {k} at {t} but not in box {} at {u}", k + 1),
                });
            }
        }
        l7.check(t, inst.computation_in_box(u, 1), || LemmaWitness {
            t,
            s: Some(u),
            i: s.participants(u).iter().find(|&i| !inst.node_in_box(u, i, 1)),
            k: Some(1),
            detail: format!("computation not in box 1 after the pseudocycle [{t}, {u}]"),
        });
    }

    let lemmas: Vec<LemmaResult> = tallies.into_iter().map(|t| t.result).collect();
    Ok(LemmaReport {
        passed: lemmas.iter().all(|r| r.passed),
        lemmas,
        provisional_epoch: s.eta(horizon),
    })
}
