//! Truncated shortest-path routing towards a single destination.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::FamilyError;
use crate::conditions::DistanceFamily;
use crate::engine::FunctionFamily;
use crate::nodes::{NodeId, NodeSet, MAX_NODES};
use crate::schedule::EpochId;

/// A route cost: a finite value up to the cap, or unreachable.
///
/// JSON form: a number, or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PathCost {
    Finite(u32),
    Infinite,
}

impl PathCost {
    fn rank(self, cap: u32) -> u32 {
        match self {
            PathCost::Finite(v) => v,
            PathCost::Infinite => cap + 1,
        }
    }
}

impl fmt::Display for PathCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathCost::Finite(v) => v.fmt(f),
            PathCost::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for PathCost {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            PathCost::Finite(v) => s.serialize_u32(*v),
            PathCost::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for PathCost {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct CostVisitor;

        impl Visitor<'_> for CostVisitor {
            type Value = PathCost;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative integer or \"inf\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<PathCost, E> {
                u32::try_from(v)
                    .map(PathCost::Finite)
                    .map_err(|_| E::custom(format!("cost {v} does not fit in 32 bits")))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<PathCost, E> {
                u64::try_from(v)
                    .map_err(|_| E::custom(format!("negative cost {v}")))
                    .and_then(|v| self.visit_u64(v))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<PathCost, E> {
                if v == "inf" {
                    Ok(PathCost::Infinite)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }

        d.deserialize_any(CostVisitor)
    }
}

/// One epoch's graph. `weights[i][j]` is the cost for `i` to route via `j`;
/// `null` means no link. The diagonal is ignored.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingEpoch {
    pub weights: Vec<Vec<Option<u32>>>,
    pub participants: NodeSet,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingInstance {
    /// Epoch `e` uses graph `epochs[e % epochs.len()]`.
    pub epochs: Vec<RoutingEpoch>,
    pub destination: NodeId,
    pub cap: u32,
}

impl RoutingInstance {
    pub fn node_count(&self) -> usize {
        self.epochs.first().map_or(0, |e| e.weights.len())
    }

    pub fn validate(&self) -> Result<(), FamilyError> {
        let bad = |key: &'static str, reason: String| Err(FamilyError::InvalidInstance { key, reason });
        let n = self.node_count();
        if self.epochs.is_empty() {
            return bad("epochs", "at least one epoch graph is required".into());
        }
        if n == 0 || n > MAX_NODES {
            return bad("epochs", format!("node count {n} outside [1, {MAX_NODES}]"));
        }
        for (e, ep) in self.epochs.iter().enumerate() {
            if ep.weights.len() != n || ep.weights.iter().any(|r| r.len() != n) {
                return bad("epochs", format!("weights of epoch {e} are not an {n}x{n} matrix"));
            }
            if ep.weights.iter().flatten().any(|w| *w == Some(0)) {
                return bad("epochs", format!("epoch {e} has a zero weight; weights must be >= 1"));
            }
            if !ep.participants.is_subset(NodeSet::full(n)) {
                return bad("epochs", format!("participants of epoch {e} name nodes outside [0, {n})"));
            }
        }
        if self.destination >= n {
            return bad("destination", format!("{} is not a node of the {n}-node graph", self.destination));
        }
        if self.cap == u32::MAX {
            return bad("cap", "must leave room for the unreachable rank".into());
        }
        Ok(())
    }

    /// `(epoch, participants)` listed by the instance.
    pub fn epoch_pairs(&self) -> Vec<(EpochId, NodeSet)> {
        self.epochs
            .iter()
            .enumerate()
            .map(|(e, ep)| (EpochId(e as u32), ep.participants))
            .collect()
    }

    fn graph(&self, e: EpochId) -> &[Vec<Option<u32>>] {
        &self.epochs[e.0 as usize % self.epochs.len()].weights
    }

    /// Undirected graph on `n` nodes from `(a, b, weight)` links.
    pub fn weights_from_links(n: usize, links: &[(NodeId, NodeId, u32)]) -> Vec<Vec<Option<u32>>> {
        let mut w = vec![vec![None; n]; n];
        for &(a, b, c) in links {
            w[a][b] = Some(c);
            w[b][a] = Some(c);
        }
        w
    }

    /// The 3-node line `0 - 1 - 2` with unit weights, destination 0, cap 4.
    pub fn line3() -> Self {
        RoutingInstance {
            epochs: vec![RoutingEpoch {
                weights: Self::weights_from_links(3, &[(0, 1, 1), (1, 2, 1)]),
                participants: NodeSet::full(3),
            }],
            destination: 0,
            cap: 4,
        }
    }

    /// The 3-node example with link-cost changes between epochs: the unit
    /// line, the line with a heavier first hop plus a direct `0 - 2` link, and
    /// a triangle whose direct link is cheap.
    pub fn line3_varying() -> Self {
        let graph = |links: &[(NodeId, NodeId, u32)], p: &[NodeId]| RoutingEpoch {
            weights: Self::weights_from_links(3, links),
            participants: p.iter().copied().collect(),
        };
        RoutingInstance {
            epochs: vec![
                graph(&[(0, 1, 1), (1, 2, 1)], &[0, 1, 2]),
                graph(&[(0, 1, 2), (1, 2, 1), (0, 2, 4)], &[0, 2]),
                graph(&[(0, 1, 1), (1, 2, 2), (0, 2, 1)], &[0, 1]),
            ],
            destination: 0,
            cap: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutingFamily {
    instance: RoutingInstance,
}

impl RoutingFamily {
    pub fn instance(&self) -> &RoutingInstance {
        &self.instance
    }

    fn truncate(&self, v: u64) -> PathCost {
        if v > self.instance.cap as u64 {
            PathCost::Infinite
        } else {
            PathCost::Finite(v as u32)
        }
    }
}

impl FunctionFamily for RoutingFamily {
    type Value = PathCost;

    fn node_count(&self) -> usize {
        self.instance.node_count()
    }

    fn bottom(&self) -> Vec<PathCost> {
        (0..self.node_count())
            .map(|i| {
                if i == self.instance.destination {
                    PathCost::Finite(0)
                } else {
                    PathCost::Infinite
                }
            })
            .collect()
    }

    fn apply_component(&self, e: EpochId, p: NodeSet, i: NodeId, view: &[PathCost]) -> PathCost {
        if i == self.instance.destination {
            return PathCost::Finite(0);
        }
        if !p.contains(i) {
            return PathCost::Infinite;
        }
        let row = &self.instance.graph(e)[i];
        p.iter()
            .filter(|&j| j != i)
            .filter_map(|j| match (row[j], view[j]) {
                (Some(w), PathCost::Finite(x)) => Some(self.truncate(w as u64 + x as u64)),
                _ => None,
            })
            .min()
            .unwrap_or(PathCost::Infinite)
    }

    fn domain(&self, _i: NodeId) -> Option<Vec<PathCost>> {
        let mut d: Vec<PathCost> = (0..=self.instance.cap).map(PathCost::Finite).collect();
        d.push(PathCost::Infinite);
        Some(d)
    }
}

/// `d(u, v) = 0` if `u = v`, else `C + 2 - min(rank u, rank v)` with
/// `rank(inf) = C + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoutingDistance {
    pub cap: u32,
}

impl DistanceFamily<PathCost> for RoutingDistance {
    fn distance(&self, _: EpochId, _: NodeSet, _: NodeId, u: &PathCost, v: &PathCost) -> u32 {
        if u == v {
            0
        } else {
            self.cap + 2 - u.rank(self.cap).min(v.rank(self.cap))
        }
    }

    fn bound(&self, _: EpochId, _: NodeSet, _: NodeId) -> u32 {
        self.cap + 2
    }
}

pub fn build_min_routing(instance: RoutingInstance) -> Result<(RoutingFamily, RoutingDistance), FamilyError> {
    instance.validate()?;
    let cap = instance.cap;
    Ok((RoutingFamily { instance }, RoutingDistance { cap }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{
        accordant_fixed_points, amco_to_aco, check_dynamic_aco, check_dynamic_amco, find_fixed_point,
        CheckOptions, Condition,
    };
    use crate::engine::run_synchronous;
    use PathCost::{Finite as F, Infinite as Inf};

    /// Floyd–Warshall over the participants, truncated at the cap.
    fn shortest_paths(inst: &RoutingInstance, e: EpochId, p: NodeSet) -> Vec<PathCost> {
        let n = inst.node_count();
        let w = inst.graph(e);
        let mut dist = vec![vec![u64::MAX; n]; n];
        for i in p.iter() {
            dist[i][i] = 0;
            for j in p.iter() {
                if let Some(c) = w[i][j] {
                    if i != j {
                        dist[i][j] = c as u64;
                    }
                }
            }
        }
        for k in p.iter() {
            for i in p.iter() {
                for j in p.iter() {
                    let via = dist[i][k].saturating_add(dist[k][j]);
                    if via < dist[i][j] {
                        dist[i][j] = via;
                    }
                }
            }
        }
        let d = inst.destination;
        (0..n)
            .map(|i| {
                if i == d {
                    F(0)
                } else if !p.contains(i) || !p.contains(d) || dist[i][d] > inst.cap as u64 {
                    Inf
                } else {
                    F(dist[i][d] as u32)
                }
            })
            .collect()
    }

    /// Bellman–Ford relaxation written as one matrix-vector step.
    fn relax(inst: &RoutingInstance, e: EpochId, p: NodeSet, x: &[PathCost]) -> Vec<PathCost> {
        let n = inst.node_count();
        let w = inst.graph(e);
        (0..n)
            .map(|i| {
                if i == inst.destination {
                    return F(0);
                }
                if !p.contains(i) {
                    return Inf;
                }
                let mut best = u64::MAX;
                for j in 0..n {
                    if let (true, true, Some(c), F(v)) = (p.contains(j), j != i, w[i][j], x[j]) {
                        best = best.min(c as u64 + v as u64);
                    }
                }
                if best > inst.cap as u64 {
                    Inf
                } else {
                    F(best as u32)
                }
            })
            .collect()
    }

    #[test]
    fn cost_json() {
        assert_eq!(serde_json::to_string(&vec![F(3), Inf]).unwrap(), "[3,\"inf\"]");
        let back: Vec<PathCost> = serde_json::from_str("[0,\"inf\"]").unwrap();
        assert_eq!(back, vec![F(0), Inf]);
        assert!(serde_json::from_str::<PathCost>("\"oo\"").is_err());
        assert!(serde_json::from_str::<PathCost>("-1").is_err());
        assert!(F(4) < Inf);
    }

    #[test]
    fn line_fixed_point_is_shortest_paths() {
        let (f, _) = build_min_routing(RoutingInstance::line3()).unwrap();
        let full = NodeSet::full(3);
        let (x, _) = find_fixed_point(&f, EpochId(0), full, 100).unwrap();
        assert_eq!(x, vec![F(0), F(1), F(2)]);
        assert_eq!(x, shortest_paths(f.instance(), EpochId(0), full));
    }

    #[test]
    fn removing_the_middle_node_disconnects() {
        let (f, _) = build_min_routing(RoutingInstance::line3()).unwrap();
        let p: NodeSet = [0, 2].into_iter().collect();
        let (x, _) = find_fixed_point(&f, EpochId(1), p, 100).unwrap();
        assert_eq!(x, vec![F(0), Inf, Inf]);
        let (x, _) = find_fixed_point(&f, EpochId(0), NodeSet::singleton(0), 100).unwrap();
        assert_eq!(x, vec![F(0), Inf, Inf]);
    }

    #[test]
    fn fixed_points_match_oracle_on_every_subset() {
        let inst = RoutingInstance::line3_varying();
        let (f, _) = build_min_routing(inst.clone()).unwrap();
        for e in 0..3 {
            for p in NodeSet::all_subsets(3) {
                let (x, _) = find_fixed_point(&f, EpochId(e), p, 100).unwrap();
                assert_eq!(x, shortest_paths(&inst, EpochId(e), p), "e={e} p={p}");
            }
        }
    }

    #[test]
    fn second_synchronous_iterate_matches_relaxation() {
        let inst = RoutingInstance::line3_varying();
        let (f, _) = build_min_routing(inst.clone()).unwrap();
        let full = NodeSet::full(3);
        for e in 0..3 {
            let e = EpochId(e);
            let x = vec![F(0), Inf, F(1)];
            let want = relax(&inst, e, full, &relax(&inst, e, full, &x));
            assert_eq!(run_synchronous(&f, e, full, &x, 2).unwrap(), want);
        }
    }

    #[test]
    fn amco_passes_and_reduces_to_a_passing_aco() {
        let inst = RoutingInstance::line3_varying();
        let (f, d) = build_min_routing(inst).unwrap();
        let opts = CheckOptions::default();
        let pairs: Vec<_> = (0..3)
            .flat_map(|e| NodeSet::all_subsets(3).map(move |p| (EpochId(e), p)))
            .collect();
        let r = check_dynamic_amco(&f, &d, &pairs, &opts).unwrap();
        assert!(r.passed, "{:?}", r.witness);
        let mut boxes = crate::conditions::BoxFamily::new();
        for &(e, p) in &pairs {
            assert_eq!(accordant_fixed_points(&f, e, p, &opts).unwrap().len(), 1);
            let b = amco_to_aco(&f, &d, e, p, &opts).unwrap();
            if !p.is_empty() {
                assert_eq!(b.kstar, 7);
            }
            boxes.insert(e, p, b);
        }
        let r = check_dynamic_aco(&f, &boxes, &pairs, &opts).unwrap();
        assert!(r.passed, "{:?}", r.witness);
        assert!(r.conditions.values().all(|&ok| ok));
        assert_eq!(r.conditions.len(), Condition::ACO.len());
    }

    #[test]
    fn accordant_images_follow_from_progress_and_bottom_sets() {
        let (f, d) = build_min_routing(RoutingInstance::line3()).unwrap();
        let opts = CheckOptions::default();
        for p in NodeSet::all_subsets(3) {
            let b = amco_to_aco(&f, &d, EpochId(0), p, &opts).unwrap();
            for x in crate::conditions::enumerate::all_states(&crate::conditions::enumerate::accordant_choices(
                p,
                &crate::conditions::domains(&f).unwrap(),
                &f.bottom(),
            )) {
                assert!(b.contains_state(0, &x));
                let fx = f.apply(EpochId(0), p, &x);
                assert!(crate::conditions::is_accordant(p, &f.bottom(), &fx));
            }
        }
    }

    #[test]
    fn invalid_instances() {
        let mut inst = RoutingInstance::line3();
        inst.destination = 3;
        assert!(matches!(
            build_min_routing(inst),
            Err(FamilyError::InvalidInstance { key: "destination", .. })
        ));
        let mut inst = RoutingInstance::line3();
        inst.epochs[0].weights[0][1] = Some(0);
        assert!(build_min_routing(inst).is_err());
        let mut inst = RoutingInstance::line3();
        inst.epochs[0].weights.pop();
        assert!(build_min_routing(inst).is_err());
    }

    #[test]
    fn instance_json_layout() {
        let inst = RoutingInstance::line3();
        let v = serde_json::to_value(&inst).unwrap();
        assert_eq!(v["epochs"][0]["weights"][0], serde_json::json!([null, 1, null]));
        assert_eq!(v["epochs"][0]["participants"], serde_json::json!([0, 1, 2]));
        assert_eq!(v["destination"], 0);
        assert_eq!(v["cap"], 4);
    }
}
