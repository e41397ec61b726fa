//! Exhaustive comparison of the engine against a direct recursive reading of
//! the state function on tiny instances.
//!
//! Every schedule is enumerated: each tick chooses an activation subset and a
//! send time in `[0, t - 1]` for every `(i, j)`. Epoch 0 has every node; an
//! optional switch at tick `s` moves to epoch 1 with the alternative
//! participant set.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::enumerate::all_states;
use crate::conditions::{domains, ConditionError, DEFAULT_BUDGET};
use crate::engine::{run_delta, EngineError, FunctionFamily, Trace};
use crate::nodes::{NodeId, NodeSet};
use crate::schedule::{DynamicSchedule, EpochId, Time};

pub const MAX_ORACLE_NODES: usize = 2;
pub const MAX_ORACLE_HORIZON: Time = 6;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{count} schedules exceed the enumeration budget {budget}")]
    BudgetExceeded { count: u128, budget: u128 },
    #[error("oracle bounds: {0}")]
    Bounds(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBounds {
    pub horizon: Time,
    /// Participants after the optional epoch switch.
    pub alternative: NodeSet,
    #[serde(default = "default_budget")]
    pub budget: u128,
}

fn default_budget() -> u128 {
    DEFAULT_BUDGET
}

impl OracleBounds {
    pub fn new(horizon: Time, alternative: NodeSet) -> Self {
        OracleBounds {
            horizon,
            alternative,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleMismatch<V> {
    pub schedule: DynamicSchedule,
    pub initial: Vec<V>,
    pub t: Time,
    pub i: NodeId,
    pub expected: V,
    pub got: Option<V>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReport<V> {
    pub passed: bool,
    pub schedules: u128,
    pub comparisons: u128,
    pub mismatch: Option<OracleMismatch<V>>,
}

/// Number of schedules the oracle enumerates for `n` nodes and `horizon`.
pub fn oracle_schedule_count(n: usize, horizon: Time) -> u128 {
    let mut count: u128 = horizon as u128 + 1;
    for t in 1..=horizon {
        let per_tick = (1u128 << n).checked_mul((t as u128).checked_pow((n * n) as u32).unwrap_or(u128::MAX));
        count = match per_tick.and_then(|c| count.checked_mul(c)) {
            Some(c) => c,
            None => return u128::MAX,
        };
    }
    count
}

/// `δ^t_i(x)` by unmemoised recursion on the definition.
pub fn naive_delta<F: FunctionFamily>(f: &F, s: &DynamicSchedule, x: &[F::Value], t: Time, i: NodeId) -> F::Value {
    let rho = |t: Time| s.pi[&s.eta[t]];
    if !rho(t).contains(i) {
        return f.bottom()[i].clone();
    }
    if t == 0 || !rho(t - 1).contains(i) {
        return x[i].clone();
    }
    if !s.alpha[t - 1].contains(i) {
        return naive_delta(f, s, x, t - 1, i);
    }
    let view: Vec<F::Value> = (0..s.n).map(|j| naive_delta(f, s, x, s.beta[t - 1][i][j], j)).collect();
    f.apply_component(s.eta[t], rho(t), i, &view)
}

struct Odometer {
    n: usize,
    digits: Vec<usize>,
    radix: Vec<usize>,
}

impl Odometer {
    fn new(n: usize, horizon: Time) -> Self {
        let radix = (1..=horizon).map(|t| (1usize << n) * t.pow((n * n) as u32)).collect();
        Odometer {
            n,
            digits: vec![0; horizon],
            radix,
        }
    }

    fn write(&self, s: &mut DynamicSchedule) {
        for (k, &d) in self.digits.iter().enumerate() {
            let t = k + 1;
            s.alpha[k] = NodeSet::from_bits((d % (1 << self.n)) as u64);
            let mut rest = d >> self.n;
            for row in s.beta[k].iter_mut() {
                for b in row.iter_mut() {
                    *b = rest % t;
                    rest /= t;
                }
            }
        }
    }

    fn advance(&mut self) -> bool {
        for (d, &r) in self.digits.iter_mut().zip(&self.radix) {
            *d += 1;
            if *d < r {
                return true;
            }
            *d = 0;
        }
        false
    }
}

fn compare<F: FunctionFamily>(
    f: &F,
    s: &DynamicSchedule,
    x: &[F::Value],
    trace: Result<Trace<F::Value>, EngineError>,
) -> Option<OracleMismatch<F::Value>> {
    let trace = trace.ok();
    for t in 0..=s.horizon {
        for i in 0..s.n {
            let expected = naive_delta(f, s, x, t, i);
            let got = trace.as_ref().map(|tr| tr.value(t, i).clone());
            if got.as_ref() != Some(&expected) {
                return Some(OracleMismatch {
                    schedule: s.clone(),
                    initial: x.to_vec(),
                    t,
                    i,
                    expected,
                    got,
                });
            }
        }
    }
    None
}

/// [`exhaustive_oracle_check_with`] using the engine.
pub fn exhaustive_oracle_check<F: FunctionFamily>(
    f: &F,
    bounds: &OracleBounds,
    initial: &[Vec<F::Value>],
) -> Result<OracleReport<F::Value>, OracleError> {
    exhaustive_oracle_check_with(f, bounds, initial, |f, s, x| run_delta(f, s, x))
}

/// Compare `evaluate` against the naive recursion on every schedule within
/// `bounds`, from every state in `initial` (every state of the domain when
/// `initial` is empty). Stops at the first mismatch.
pub fn exhaustive_oracle_check_with<F, E>(
    f: &F,
    bounds: &OracleBounds,
    initial: &[Vec<F::Value>],
    mut evaluate: E,
) -> Result<OracleReport<F::Value>, OracleError>
where
    F: FunctionFamily,
    E: FnMut(&F, &DynamicSchedule, &[F::Value]) -> Result<Trace<F::Value>, EngineError>,
{
    let n = f.node_count();
    let horizon = bounds.horizon;
    if n == 0 || n > MAX_ORACLE_NODES {
        return Err(OracleError::Bounds(format!("n must lie in [1, {MAX_ORACLE_NODES}], got {n}")));
    }
    if horizon == 0 || horizon > MAX_ORACLE_HORIZON {
        return Err(OracleError::Bounds(format!(
            "horizon must lie in [1, {MAX_ORACLE_HORIZON}], got {horizon}"
        )));
    }
    if !bounds.alternative.is_subset(NodeSet::full(n)) {
        return Err(OracleError::Bounds(format!(
            "alternative participants {} name nodes outside [0, {n})",
            bounds.alternative
        )));
    }
    let count = oracle_schedule_count(n, horizon);
    if count > bounds.budget {
        return Err(OracleError::BudgetExceeded {
            count,
            budget: bounds.budget,
        });
    }
    let starts = if initial.is_empty() { all_states(&domains(f)?) } else { initial.to_vec() };

    let mut s = DynamicSchedule::synchronous(n, horizon);
    s.pi = BTreeMap::from([(EpochId(0), NodeSet::full(n)), (EpochId(1), bounds.alternative)]);
    let mut report = OracleReport {
        passed: true,
        schedules: 0,
        comparisons: 0,
        mismatch: None,
    };
    for switch in std::iter::once(None).chain((1..=horizon).map(Some)) {
        for t in 0..=horizon {
            s.eta[t] = EpochId(u32::from(switch.is_some_and(|sw| t >= sw)));
        }
        let mut odo = Odometer::new(n, horizon);
        loop {
            odo.write(&mut s);
            report.schedules += 1;
            for x in &starts {
                report.comparisons += 1;
                if let Some(m) = compare(f, &s, x, evaluate(f, &s, x)) {
                    report.passed = false;
                    report.mismatch = Some(m);
                    return Ok(report);
                }
            }
            if !odo.advance() {
                break;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Case;
    use crate::families::{build_min_consensus, Flip};
    use crate::schedule::validate_schedule;

    #[test]
    fn counts_match_the_product_formula() {
        assert_eq!(oracle_schedule_count(2, 1), 2 * 4);
        assert_eq!(oracle_schedule_count(2, 2), 3 * 4 * (4 * 16));
        assert_eq!(oracle_schedule_count(2, 3), 4 * 4 * (4 * 16) * (4 * 81));
        assert_eq!(oracle_schedule_count(1, 3), 4 * 2 * 2 * 2 * 2 * 3);
    }

    #[test]
    fn enumeration_visits_every_valid_schedule_once() {
        let mut seen = std::collections::HashSet::new();
        let mut s = DynamicSchedule::synchronous(2, 2);
        let mut odo = Odometer::new(2, 2);
        loop {
            odo.write(&mut s);
            assert!(validate_schedule(&s).is_empty());
            assert!(seen.insert((s.alpha.clone(), s.beta.clone())));
            if !odo.advance() {
                break;
            }
        }
        assert_eq!(seen.len(), 4 * 4 * 16);
    }

    #[test]
    fn min_consensus_matches_up_to_horizon_three() {
        let f = build_min_consensus(2, 2).unwrap();
        for h in 1..=3 {
            let r = exhaustive_oracle_check(&f, &OracleBounds::new(h, NodeSet::singleton(0)), &[]).unwrap();
            assert!(r.passed, "horizon {h}: {:?}", r.mismatch);
            assert_eq!(r.schedules, oracle_schedule_count(2, h));
            assert_eq!(r.comparisons, r.schedules * 9);
        }
    }

    #[test]
    fn flip_matches_at_horizon_two() {
        let f = Flip { n: 2 };
        let r = exhaustive_oracle_check(&f, &OracleBounds::new(2, NodeSet::singleton(1)), &[]).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn budget_is_checked_before_enumerating() {
        let f = build_min_consensus(2, 2).unwrap();
        let err = exhaustive_oracle_check(&f, &OracleBounds::new(4, NodeSet::singleton(0)), &[]).unwrap_err();
        assert!(matches!(err, OracleError::BudgetExceeded { count: 424_673_280, budget: 1_000_000 }));
    }

    #[test]
    fn swapped_cases_are_caught() {
        // Tests for a fresh join before testing for non-participation.
        fn swapped<F: FunctionFamily>(f: &F, s: &DynamicSchedule, x: &[F::Value]) -> Result<Trace<F::Value>, EngineError> {
            let tr = run_delta(f, s, x)?;
            let mut values = tr.values().to_vec();
            for t in 1..=s.horizon {
                for i in 0..s.n {
                    if tr.case(t, i) == Case::NonParticipant && !s.participants(t - 1).contains(i) {
                        values[t][i] = x[i].clone();
                    }
                }
            }
            Ok(Trace::from_values(tr, values))
        }
        let f = build_min_consensus(2, 2).unwrap();
        let r = exhaustive_oracle_check_with(&f, &OracleBounds::new(3, NodeSet::singleton(0)), &[], swapped).unwrap();
        assert!(!r.passed);
        let m = r.mismatch.unwrap();
        assert!(!m.schedule.participants(m.t).contains(m.i));
        assert_eq!(m.expected, 2);
    }

    #[test]
    fn bounds_are_enforced() {
        let f = build_min_consensus(3, 1).unwrap();
        assert!(matches!(
            exhaustive_oracle_check(&f, &OracleBounds::new(2, NodeSet::empty()), &[]),
            Err(OracleError::Bounds(_))
        ));
    }
}
