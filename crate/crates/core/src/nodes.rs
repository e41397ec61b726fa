//! Node identifiers and compact node sets.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Index of a node in `[0, n)`.
pub type NodeId = usize;

/// Upper bound on the number of nodes a scenario may contain.
pub const MAX_NODES: usize = 64;

/// A set of nodes stored as a 64-bit mask.
///
/// Serialized as a sorted JSON array of node indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodeSet(u64);

impl NodeSet {
    pub const fn empty() -> Self {
        NodeSet(0)
    }

    /// The set `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_NODES, "node count {n} exceeds {MAX_NODES}");
        if n == MAX_NODES {
            NodeSet(u64::MAX)
        } else {
            NodeSet((1u64 << n) - 1)
        }
    }

    pub fn singleton(i: NodeId) -> Self {
        let mut s = Self::empty();
        s.insert(i);
        s
    }

    pub const fn from_bits(bits: u64) -> Self {
        NodeSet(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, i: NodeId) -> bool {
        i < MAX_NODES && self.0 & (1u64 << i) != 0
    }

    pub fn insert(&mut self, i: NodeId) {
        assert!(i < MAX_NODES, "node index {i} exceeds {MAX_NODES}");
        self.0 |= 1u64 << i;
    }

    pub fn remove(&mut self, i: NodeId) {
        if i < MAX_NODES {
            self.0 &= !(1u64 << i);
        }
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 | other.0)
    }

    pub fn intersection(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 & other.0)
    }

    pub fn is_subset(self, other: NodeSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Largest member, if any.
    pub fn max(self) -> Option<NodeId> {
        if self.0 == 0 {
            None
        } else {
            Some(63 - self.0.leading_zeros() as usize)
        }
    }

    pub fn iter(self) -> impl Iterator<Item = NodeId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        })
    }

    /// Every subset of `{0, .., n-1}`, in increasing mask order.
    pub fn all_subsets(n: usize) -> impl Iterator<Item = NodeSet> {
        assert!(n < MAX_NODES, "cannot enumerate subsets of {n} nodes");
        (0..(1u64 << n)).map(NodeSet)
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<I: IntoIterator<Item = NodeId>>(iter: I) -> Self {
        let mut s = NodeSet::empty();
        for i in iter {
            s.insert(i);
        }
        s
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for NodeSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for NodeSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ids = Vec::<NodeId>::deserialize(deserializer)?;
        let mut s = NodeSet::empty();
        for i in ids {
            if i >= MAX_NODES {
                return Err(serde::de::Error::custom(format!(
                    "node index {i} exceeds the supported maximum of {}",
                    MAX_NODES - 1
                )));
            }
            s.insert(i);
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iteration_is_sorted() {
        let s: NodeSet = [5, 1, 3].into_iter().collect();
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![1, 3, 5]);
        assert_eq!(s.len(), 3);
        assert_eq!(s.max(), Some(5));
    }

    #[test]
    fn json_is_a_sorted_array() {
        let s: NodeSet = [2, 0].into_iter().collect();
        assert_eq!(serde_json::to_string(&s).unwrap(), "[0,2]");
        let back: NodeSet = serde_json::from_str("[2,0,2]").unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<NodeSet>("[64]").is_err());
    }

    #[test]
    fn full_and_subsets() {
        assert_eq!(NodeSet::full(3).len(), 3);
        assert_eq!(NodeSet::all_subsets(3).count(), 8);
        assert!(NodeSet::singleton(1).is_subset(NodeSet::full(2)));
        assert!(!NodeSet::singleton(2).is_subset(NodeSet::full(2)));
    }
}
