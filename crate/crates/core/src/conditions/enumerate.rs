//! Budgeted enumeration of product state spaces in lexicographic order.

use std::ops::ControlFlow;

use super::ConditionError;
use crate::nodes::NodeSet;

pub(crate) fn product_size<V>(choices: &[Vec<V>]) -> u128 {
    choices
        .iter()
        .map(|c| c.len() as u128)
        .fold(1u128, |acc, c| acc.saturating_mul(c))
}

pub(crate) fn within_budget(what: impl Into<String>, size: u128, budget: u128) -> Result<(), ConditionError> {
    if size > budget {
        Err(ConditionError::EnumerationTooLarge {
            what: what.into(),
            size,
            budget,
        })
    } else {
        Ok(())
    }
}

/// Choices for the accordant states of `p`: the full domain on participants,
/// `⊥_i` elsewhere.
pub(crate) fn accordant_choices<V: Clone>(p: NodeSet, domains: &[Vec<V>], bottom: &[V]) -> Vec<Vec<V>> {
    domains
        .iter()
        .enumerate()
        .map(|(i, d)| if p.contains(i) { d.clone() } else { vec![bottom[i].clone()] })
        .collect()
}

/// Visit every element of `choices[0] × .. × choices[n-1]`, the last
/// component varying fastest. Stops early when `visit` breaks.
pub(crate) fn for_each_state<V: Clone, B>(
    choices: &[Vec<V>],
    mut visit: impl FnMut(&[V]) -> ControlFlow<B>,
) -> Option<B> {
    if choices.iter().any(|c| c.is_empty()) {
        return None;
    }
    let n = choices.len();
    let mut idx = vec![0usize; n];
    let mut state: Vec<V> = choices.iter().map(|c| c[0].clone()).collect();
    loop {
        if let ControlFlow::Break(b) = visit(&state) {
            return Some(b);
        }
        let mut pos = n;
        loop {
            if pos == 0 {
                return None;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < choices[pos].len() {
                state[pos] = choices[pos][idx[pos]].clone();
                break;
            }
            idx[pos] = 0;
            state[pos] = choices[pos][0].clone();
        }
    }
}

/// Collect the whole product. Callers check the budget first.
pub(crate) fn all_states<V: Clone>(choices: &[Vec<V>]) -> Vec<Vec<V>> {
    let mut out = Vec::new();
    for_each_state::<V, ()>(choices, |x| {
        out.push(x.to_vec());
        ControlFlow::Continue(())
    });
    out
}
