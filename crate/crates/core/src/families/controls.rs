//! Small integer-valued families: min-consensus, trivial families and the
//! negative controls for the checkers.

use std::collections::BTreeSet;

use super::FamilyError;
use crate::conditions::{BoxFamily, ConditionError, EpochBoxes};
use crate::engine::FunctionFamily;
use crate::nodes::{NodeId, NodeSet};
use crate::schedule::EpochId;

/// `F_i(x) = min_{j ∈ p ∪ {i}} x_j` on `{0, .., max}`, with `⊥_i = max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MinConsensus {
    n: usize,
    max: u32,
}

pub fn build_min_consensus(n: usize, max: u32) -> Result<MinConsensus, FamilyError> {
    if max < 1 {
        return Err(FamilyError::InvalidInstance {
            key: "max",
            reason: "must be at least 1".into(),
        });
    }
    Ok(MinConsensus { n, max })
}

impl FunctionFamily for MinConsensus {
    type Value = u32;

    fn node_count(&self) -> usize {
        self.n
    }

    fn bottom(&self) -> Vec<u32> {
        vec![self.max; self.n]
    }

    fn apply_component(&self, _: EpochId, p: NodeSet, i: NodeId, view: &[u32]) -> u32 {
        if !p.contains(i) {
            return self.max;
        }
        p.iter().map(|j| view[j]).fold(view[i], u32::min)
    }

    fn domain(&self, _: NodeId) -> Option<Vec<u32>> {
        Some((0..=self.max).collect())
    }
}

/// `F_i(x) = 1 - x_i` on `{0, 1}` for participants; `⊥ = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Flip {
    pub n: usize,
}

impl FunctionFamily for Flip {
    type Value = u32;

    fn node_count(&self) -> usize {
        self.n
    }

    fn bottom(&self) -> Vec<u32> {
        vec![0; self.n]
    }

    fn apply_component(&self, _: EpochId, p: NodeSet, i: NodeId, view: &[u32]) -> u32 {
        if p.contains(i) {
            1 - view[i].min(1)
        } else {
            0
        }
    }

    fn domain(&self, _: NodeId) -> Option<Vec<u32>> {
        Some(vec![0, 1])
    }
}

/// Participants keep their value, everyone else takes `⊥ = 0`. Domain
/// `{0, .., values - 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Identity {
    pub n: usize,
    pub values: u32,
}

impl FunctionFamily for Identity {
    type Value = u32;

    fn node_count(&self) -> usize {
        self.n
    }

    fn bottom(&self) -> Vec<u32> {
        vec![0; self.n]
    }

    fn apply_component(&self, _: EpochId, p: NodeSet, i: NodeId, view: &[u32]) -> u32 {
        if p.contains(i) {
            view[i]
        } else {
            0
        }
    }

    fn domain(&self, _: NodeId) -> Option<Vec<u32>> {
        Some((0..self.values).collect())
    }
}

/// `F_i(x) = c_i` for participants and `⊥_i = 0` otherwise, on
/// `{0, .., values - 1}`. With `values = 1` the state space is a single point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constant {
    target: Vec<u32>,
    values: u32,
}

impl Constant {
    pub fn new(target: Vec<u32>, values: u32) -> Result<Self, FamilyError> {
        if values == 0 {
            return Err(FamilyError::InvalidInstance {
                key: "values",
                reason: "domain must be non-empty".into(),
            });
        }
        if let Some(c) = target.iter().find(|&&c| c >= values) {
            return Err(FamilyError::InvalidInstance {
                key: "target",
                reason: format!("{c} is outside the domain [0, {values})"),
            });
        }
        Ok(Constant { target, values })
    }

    pub fn single_state(n: usize) -> Self {
        Constant {
            target: vec![0; n],
            values: 1,
        }
    }
}

impl FunctionFamily for Constant {
    type Value = u32;

    fn node_count(&self) -> usize {
        self.target.len()
    }

    fn bottom(&self) -> Vec<u32> {
        vec![0; self.target.len()]
    }

    fn apply_component(&self, _: EpochId, p: NodeSet, i: NodeId, _: &[u32]) -> u32 {
        if p.contains(i) {
            self.target[i]
        } else {
            0
        }
    }

    fn domain(&self, _: NodeId) -> Option<Vec<u32>> {
        Some((0..self.values).collect())
    }
}

/// Participants jump to `1` in even epochs and `2` in odd epochs; `⊥ = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpochConstant {
    pub n: usize,
}

impl EpochConstant {
    fn target(e: EpochId) -> u32 {
        if e.0 % 2 == 0 {
            1
        } else {
            2
        }
    }

    /// Boxes built per epoch without a shared initial box:
    /// `B(0)_i = {⊥_i, c^e_i}` and `B(k) = {x*}` for `k >= 1`.
    pub fn naive_boxes(&self, pairs: &[(EpochId, NodeSet)]) -> Result<BoxFamily<u32>, ConditionError> {
        let mut out = BoxFamily::new();
        for &(e, p) in pairs {
            let xstar: Vec<u32> = (0..self.n).map(|i| if p.contains(i) { Self::target(e) } else { 0 }).collect();
            let first: Vec<BTreeSet<u32>> = xstar.iter().map(|&c| BTreeSet::from([0, c])).collect();
            let last: Vec<BTreeSet<u32>> = xstar.iter().map(|&c| BTreeSet::from([c])).collect();
            out.insert(e, p, EpochBoxes::new(1, xstar, vec![first, last.clone(), last])?);
        }
        Ok(out)
    }
}

impl FunctionFamily for EpochConstant {
    type Value = u32;

    fn node_count(&self) -> usize {
        self.n
    }

    fn bottom(&self) -> Vec<u32> {
        vec![0; self.n]
    }

    fn apply_component(&self, e: EpochId, p: NodeSet, i: NodeId, _: &[u32]) -> u32 {
        if p.contains(i) {
            Self::target(e)
        } else {
            0
        }
    }

    fn domain(&self, _: NodeId) -> Option<Vec<u32>> {
        Some(vec![0, 1, 2])
    }
}

/// Wraps a family and forces one node's output to a fixed value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pinned<F: FunctionFamily> {
    pub inner: F,
    pub node: NodeId,
    pub value: F::Value,
}

impl<F: FunctionFamily> FunctionFamily for Pinned<F> {
    type Value = F::Value;

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn bottom(&self) -> Vec<F::Value> {
        self.inner.bottom()
    }

    fn apply_component(&self, e: EpochId, p: NodeSet, i: NodeId, view: &[F::Value]) -> F::Value {
        if i == self.node {
            self.value.clone()
        } else {
            self.inner.apply_component(e, p, i, view)
        }
    }

    fn domain(&self, i: NodeId) -> Option<Vec<F::Value>> {
        self.inner.domain(i)
    }
}

/// The checker soundness controls.
#[derive(Clone, Debug)]
pub struct NegativeControls {
    /// No fixed point.
    pub flip: Flip,
    /// Every accordant state is a fixed point.
    pub identity: Identity,
    /// Sound per epoch but with epoch-dependent initial boxes.
    pub epoch_constant: EpochConstant,
    pub epoch_constant_boxes: BoxFamily<u32>,
    pub epoch_constant_pairs: Vec<(EpochId, NodeSet)>,
}

pub fn build_negative_controls() -> NegativeControls {
    let epoch_constant = EpochConstant { n: 2 };
    let pairs = vec![(EpochId(0), NodeSet::full(2)), (EpochId(1), NodeSet::full(2))];
    NegativeControls {
        flip: Flip { n: 2 },
        identity: Identity { n: 2, values: 2 },
        epoch_constant,
        epoch_constant_boxes: epoch_constant.naive_boxes(&pairs).expect("well-formed boxes"),
        epoch_constant_pairs: pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{
        amco_to_aco, check_dynamic_aco, check_dynamic_amco, find_fixed_point, CheckOptions, Condition,
        ConditionError, DiscreteMetric,
    };
    use crate::engine::{run_delta, run_synchronous};
    use crate::schedule::DynamicSchedule;

    fn full(n: usize) -> Vec<(EpochId, NodeSet)> {
        vec![(EpochId(0), NodeSet::full(n))]
    }

    #[test]
    fn min_consensus_two_nodes_three_ticks() {
        let f = build_min_consensus(2, 5).unwrap();
        let tr = run_delta(&f, &DynamicSchedule::synchronous(2, 3), &[5, 3]).unwrap();
        assert_eq!(tr.state(3), &[3, 3]);
        assert!(build_min_consensus(2, 0).is_err());
    }

    #[test]
    fn min_consensus_fixed_points() {
        let f = build_min_consensus(3, 7).unwrap();
        let p = NodeSet::full(3);
        assert_eq!(run_synchronous(&f, EpochId(0), p, &[5, 3, 6], 1).unwrap(), vec![3, 3, 3]);
        assert_eq!(run_synchronous(&f, EpochId(0), p, &[7, 7, 7], 4).unwrap(), vec![7, 7, 7]);
        let single = NodeSet::singleton(1);
        assert_eq!(run_synchronous(&f, EpochId(0), single, &[2, 4, 1], 3).unwrap(), vec![7, 4, 7]);
    }

    #[test]
    fn constant_reaches_its_target_in_one_step() {
        let f = Constant::new(vec![1, 2], 3).unwrap();
        assert_eq!(find_fixed_point(&f, EpochId(0), NodeSet::full(2), 10).unwrap(), (vec![1, 2], 1));
        assert_eq!(run_synchronous(&f, EpochId(0), NodeSet::full(2), &[0, 0], 1).unwrap(), vec![1, 2]);
        assert!(Constant::new(vec![3], 3).is_err());
    }

    #[test]
    fn constant_boxes_under_the_discrete_metric() {
        let f = Constant::new(vec![1, 2], 3).unwrap();
        let d = DiscreteMetric::for_family(&f);
        let opts = CheckOptions::default();
        assert!(check_dynamic_amco(&f, &d, &full(2), &opts).unwrap().passed);
        let b = amco_to_aco(&f, &d, EpochId(0), NodeSet::full(2), &opts).unwrap();
        assert_eq!(b.kstar, 2);
        assert_eq!(b.level(0)[0], BTreeSet::from([0, 1, 2]));
        assert_eq!(b.level(1)[0], BTreeSet::from([0, 1, 2]));
        assert_eq!(b.level(2)[0], BTreeSet::from([1]));
        assert_eq!(b.level(2)[1], BTreeSet::from([2]));
        let mut fam = BoxFamily::new();
        fam.insert(EpochId(0), NodeSet::full(2), b);
        assert!(check_dynamic_aco(&f, &fam, &full(2), &opts).unwrap().passed);
    }

    #[test]
    fn single_state_space_collapses_at_zero() {
        let f = Constant::single_state(2);
        let d = DiscreteMetric::for_family(&f);
        let opts = CheckOptions::default();
        assert!(check_dynamic_amco(&f, &d, &full(2), &opts).unwrap().passed);
        let b = amco_to_aco(&f, &d, EpochId(0), NodeSet::full(2), &opts).unwrap();
        assert_eq!(b.kstar, 0);
        for k in 0..4 {
            assert!(b.level(k).iter().all(|s| s == &BTreeSet::from([0])));
        }
        let mut fam = BoxFamily::new();
        fam.insert(EpochId(0), NodeSet::full(2), b);
        assert!(check_dynamic_aco(&f, &fam, &full(2), &opts).unwrap().passed);
    }

    #[test]
    fn flip_has_no_fixed_point() {
        let c = build_negative_controls();
        assert!(matches!(
            find_fixed_point(&c.flip, EpochId(0), NodeSet::full(2), 50),
            Err(ConditionError::NoFixedPoint { .. })
        ));
    }

    #[test]
    fn identity_fails_exactly_du4_with_two_fixed_points() {
        let c = build_negative_controls();
        let d = DiscreteMetric::for_family(&c.identity);
        let r = check_dynamic_amco(&c.identity, &d, &full(2), &CheckOptions::default()).unwrap();
        assert_eq!(r.failed(), vec![Condition::DU4]);
        let w = r.witness.unwrap();
        let (xs, x) = (&w.states[0], &w.states[1]);
        assert_ne!(xs, x);
        assert_eq!(c.identity.apply(EpochId(0), NodeSet::full(2), xs), *xs);
        assert_eq!(c.identity.apply(EpochId(0), NodeSet::full(2), x), *x);
    }

    #[test]
    fn naive_epoch_boxes_fail_exactly_da4() {
        let c = build_negative_controls();
        let r = check_dynamic_aco(
            &c.epoch_constant,
            &c.epoch_constant_boxes,
            &c.epoch_constant_pairs,
            &CheckOptions::default(),
        )
        .unwrap();
        assert_eq!(r.failed(), vec![Condition::DA4]);
        let w = r.witness.unwrap();
        assert_eq!((w.epoch, w.other.map(|o| o.0)), (EpochId(0), Some(EpochId(1))));
        assert_eq!(w.node, Some(0));
    }

    #[test]
    fn each_epoch_alone_is_sound() {
        let c = build_negative_controls();
        for pair in &c.epoch_constant_pairs {
            let r = check_dynamic_aco(&c.epoch_constant, &c.epoch_constant_boxes, &[*pair], &CheckOptions::default())
                .unwrap();
            assert!(r.passed);
        }
    }

    #[test]
    fn pinned_node_breaks_progress() {
        let (f, d) = crate::families::build_min_routing(crate::families::RoutingInstance::line3()).unwrap();
        let opts = CheckOptions::default();
        let b = amco_to_aco(&f, &d, EpochId(0), NodeSet::full(3), &opts).unwrap();
        let mut fam = BoxFamily::new();
        fam.insert(EpochId(0), NodeSet::full(3), b);
        let broken = Pinned {
            inner: f,
            node: 2,
            value: crate::families::PathCost::Infinite,
        };
        let r = check_dynamic_aco(&broken, &fam, &full(3), &opts).unwrap();
        assert!(r.failed().contains(&Condition::DA2));
    }

    #[test]
    fn budget_is_enforced() {
        let f = Identity { n: 7, values: 8 };
        let d = DiscreteMetric::for_family(&f);
        assert!(matches!(
            check_dynamic_amco(&f, &d, &full(7), &CheckOptions::default()),
            Err(ConditionError::EnumerationTooLarge { .. })
        ));
    }
}
