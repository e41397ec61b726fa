use std::collections::BTreeSet;
use std::fmt::Debug;
use std::ops::ControlFlow;

use thiserror::Error;

use super::enumerate::{for_each_state, product_size, within_budget};
use super::{BoxFamily, CheckOptions, CheckReport, Condition, ConditionError, EpochBoxes, Witness};
use crate::engine::{FunctionFamily, Value};
use crate::nodes::{NodeId, NodeSet};
use crate::schedule::EpochId;

fn witness<V>(
    condition: Condition,
    epoch: EpochId,
    participants: NodeSet,
    states: Vec<Vec<V>>,
    node: Option<NodeId>,
    box_index: Option<usize>,
    detail: String,
) -> Witness<V> {
    Witness {
        condition,
        epoch,
        participants,
        other: None,
        states,
        node,
        box_index,
        detail,
    }
}

fn first_outside<V: Value>(b: &EpochBoxes<V>, k: usize, x: &[V]) -> Option<NodeId> {
    (0..x.len()).find(|&i| !b.contains(k, i, &x[i]))
}

/// Check DA1–DA5 for the supplied `(epoch, participants)` pairs. DA4 compares
/// initial boxes across exactly these pairs.
pub fn check_dynamic_aco<F: FunctionFamily>(
    f: &F,
    boxes: &BoxFamily<F::Value>,
    epochs: &[(EpochId, NodeSet)],
    opts: &CheckOptions,
) -> Result<CheckReport<F::Value>, ConditionError> {
    let n = f.node_count();
    let bottom = f.bottom();
    let mut report = CheckReport::new(&Condition::ACO);
    let mut first: Option<(EpochId, NodeSet, &EpochBoxes<F::Value>)> = None;

    for &(e, p) in epochs {
        let b = boxes
            .get(e, p)
            .ok_or(ConditionError::MissingBoxes { epoch: e, participants: p })?;
        if b.node_count() != n {
            return Err(ConditionError::InvalidBoxes(format!(
                "boxes for epoch {e}, participants {p} cover {} nodes, the family has {n}",
                b.node_count()
            )));
        }
        let as_choices = |k: usize| -> Vec<Vec<F::Value>> { b.level(k).iter().map(|s| s.iter().cloned().collect()).collect() };

        if !report.has_failed(Condition::DA1) {
            let choices = as_choices(0);
            within_budget(format!("B({e},{p})(0)"), product_size(&choices), opts.budget)?;
            let hit = for_each_state(&choices, |x| {
                let fx = f.apply(e, p, x);
                match first_outside(b, 0, &fx) {
                    Some(i) => ControlFlow::Break((x.to_vec(), fx, i)),
                    None => ControlFlow::Continue(()),
                }
            });
            if let Some((x, fx, i)) = hit {
                report.fail(witness(Condition::DA1, e, p, vec![x, fx], Some(i), Some(0), "F(x) leaves B(0)".into()));
            }
        }

        if !report.has_failed(Condition::DA2) {
            for k in 0..=b.kstar {
                let choices: Vec<Vec<F::Value>> = b
                    .level(k)
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        if p.contains(i) {
                            s.iter().cloned().collect()
                        } else if s.contains(&bottom[i]) {
                            vec![bottom[i].clone()]
                        } else {
                            Vec::new()
                        }
                    })
                    .collect();
                within_budget(format!("accordant part of B({e},{p})({k})"), product_size(&choices), opts.budget)?;
                let hit = for_each_state(&choices, |x| {
                    let fx = f.apply(e, p, x);
                    match first_outside(b, k + 1, &fx) {
                        Some(i) => ControlFlow::Break((x.to_vec(), fx, i)),
                        None => ControlFlow::Continue(()),
                    }
                });
                if let Some((x, fx, i)) = hit {
                    report.fail(witness(
                        Condition::DA2,
                        e,
                        p,
                        vec![x, fx],
                        Some(i),
                        Some(k),
                        format!("accordant x in B({k}) but F(x) is not in B({})", k + 1),
                    ));
                    break;
                }
            }
        }

        if !report.has_failed(Condition::DA3) {
            'da3: for k in [b.kstar, b.kstar + 1] {
                for i in 0..n {
                    let expected = BTreeSet::from([b.xstar[i].clone()]);
                    if b.level(k)[i] != expected {
                        report.fail(witness(
                            Condition::DA3,
                            e,
                            p,
                            vec![b.xstar.clone()],
                            Some(i),
                            Some(k),
                            format!("B({k})_{i} = {:?} is not {{x*_{i}}}", b.level(k)[i]),
                        ));
                        break 'da3;
                    }
                }
            }
        }

        if !report.has_failed(Condition::DA4) {
            match first {
                None => first = Some((e, p, b)),
                Some((e0, p0, b0)) => {
                    if let Some(i) = (0..n).find(|&i| b0.level(0)[i] != b.level(0)[i]) {
                        let mut w = witness(
                            Condition::DA4,
                            e0,
                            p0,
                            Vec::new(),
                            Some(i),
                            Some(0),
                            format!("B(0)_{i} differs: {:?} versus {:?}", b0.level(0)[i], b.level(0)[i]),
                        );
                        w.other = Some((e, p));
                        report.fail(w);
                    }
                }
            }
        }

        if !report.has_failed(Condition::DA5) {
            'da5: for k in 0..=b.kstar + 1 {
                for i in (0..n).filter(|&i| !p.contains(i)) {
                    if !b.contains(k, i, &bottom[i]) {
                        report.fail(witness(
                            Condition::DA5,
                            e,
                            p,
                            vec![bottom.clone()],
                            Some(i),
                            Some(k),
                            format!("bottom is missing from B({k})_{i}"),
                        ));
                        break 'da5;
                    }
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Error)]
pub enum CertifyError<V: Debug + Clone> {
    #[error("boxes fail the dynamic ACO conditions {:?}", .0.failed())]
    Failed(Box<CheckReport<V>>),
    #[error(transparent)]
    Condition(#[from] ConditionError),
}

/// A box family that has passed [`check_dynamic_aco`] against some function
/// family over all of its `(epoch, participants)` pairs.
#[derive(Clone, Debug)]
pub struct CertifiedBoxes<V: Value> {
    boxes: BoxFamily<V>,
}

impl<V: Value> CertifiedBoxes<V> {
    pub fn certify<F: FunctionFamily<Value = V>>(
        f: &F,
        boxes: BoxFamily<V>,
        opts: &CheckOptions,
    ) -> Result<Self, CertifyError<V>> {
        let report = check_dynamic_aco(f, &boxes, &boxes.pairs(), opts)?;
        if report.passed {
            Ok(CertifiedBoxes { boxes })
        } else {
            Err(CertifyError::Failed(Box::new(report)))
        }
    }

    pub fn boxes(&self) -> &BoxFamily<V> {
        &self.boxes
    }

    pub fn into_inner(self) -> BoxFamily<V> {
        self.boxes
    }
}
