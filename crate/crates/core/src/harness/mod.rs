//! Seeded convergence trials, the exhaustive engine oracle and the
//! stale-message scenario.
//!
//! A trial generates a schedule (optionally with random churn), draws a
//! starting state, evaluates the whole trace and then inspects every epoch
//! segment: when the segment holds at least `kstar` disjoint pseudocycles
//! counted from its first tick, the state must equal the epoch's fixed point
//! from the end of the `kstar`-th pseudocycle to the end of the segment.

mod demo;
mod oracle;

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{
    amco_to_aco, check_dynamic_amco, domains, CertifiedBoxes, CheckOptions, Condition, ConditionError,
    DistanceFamily,
};
use crate::engine::{run_delta, EngineError, FunctionFamily, Trace, Value};
use crate::nodes::NodeSet;
use crate::pseudocycle::{count_disjoint_pseudocycles, ExpiryScope, Period};
use crate::schedule::{generate_schedule, DynamicSchedule, EpochEvent, EpochId, ScheduleConfig, ScheduleError, Time};

pub use demo::{stale_message_demo, stale_reads, StaleDemo, StaleRead, StaleReport};
pub use oracle::{
    exhaustive_oracle_check, exhaustive_oracle_check_with, naive_delta, oracle_schedule_count, OracleBounds,
    OracleError, OracleMismatch, OracleReport,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("precondition unmet: {0}")]
    PreconditionUnmet(String),
    #[error("epoch {epoch}, participants {participants} fails the dynamic AMCO conditions {failed:?}")]
    Uncertified {
        epoch: EpochId,
        participants: NodeSet,
        failed: Vec<Condition>,
    },
    #[error("invalid harness config `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
    #[error(transparent)]
    Condition(#[from] ConditionError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Random epoch events added to each trial's schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChurnConfig {
    pub min_events: usize,
    pub max_events: usize,
    /// Probability that a node takes part in a new epoch.
    #[serde(default = "half")]
    pub inclusion_probability: f64,
}

fn half() -> f64 {
    0.5
}

fn default_witnesses() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    pub trials: usize,
    /// Base schedule. Its seed is replaced per trial; its epoch events are
    /// used as given unless `churn` is set.
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub churn: Option<ChurnConfig>,
    #[serde(default)]
    pub seed: u64,
    /// Draw starting states from the whole state space instead of `B(0)`.
    #[serde(default)]
    pub sample_full_space: bool,
    /// Run families that fail the conditions or lack fixed points and report
    /// what happens instead of refusing.
    #[serde(default)]
    pub exploratory: bool,
    #[serde(default)]
    pub scope: ExpiryScope,
    /// Pairs whose fixed points are computed before the first trial.
    #[serde(default)]
    pub precompute: Vec<(EpochId, NodeSet)>,
    #[serde(default = "default_witnesses")]
    pub max_witnesses: usize,
}

impl HarnessConfig {
    pub fn new(trials: usize, schedule: ScheduleConfig, seed: u64) -> Self {
        HarnessConfig {
            trials,
            schedule,
            churn: None,
            seed,
            sample_full_space: false,
            exploratory: false,
            scope: ExpiryScope::Epoch,
            precompute: Vec::new(),
            max_witnesses: default_witnesses(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |key: &'static str, reason: String| Err(HarnessError::InvalidConfig { key, reason });
        if self.trials == 0 {
            return bad("trials", "must be at least 1".into());
        }
        self.schedule.validate()?;
        if let Some(c) = &self.churn {
            if c.min_events > c.max_events {
                return bad("churn.min_events", format!("{} exceeds max_events {}", c.min_events, c.max_events));
            }
            if c.max_events > self.schedule.horizon {
                return bad(
                    "churn.max_events",
                    format!("{} events do not fit in horizon {}", c.max_events, self.schedule.horizon),
                );
            }
            if !(0.0..=1.0).contains(&c.inclusion_probability) {
                return bad(
                    "churn.inclusion_probability",
                    format!("probability must lie in [0, 1], got {}", c.inclusion_probability),
                );
            }
        }
        Ok(())
    }
}

/// What a trial is checked against.
pub enum Certificate<'a, V: Value> {
    /// Certified boxes supply `kstar` and `x*` for every pair they cover.
    Boxes(&'a CertifiedBoxes<V>),
    /// Boxes are built per pair from distances, after checking the AMCO
    /// conditions for that pair unless the run is exploratory.
    Distances(&'a dyn DistanceFamily<V>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Target<V> {
    kstar: usize,
    xstar: Vec<V>,
}

struct Targets<'a, F: FunctionFamily> {
    f: &'a F,
    cert: Certificate<'a, F::Value>,
    exploratory: bool,
    opts: CheckOptions,
    cache: BTreeMap<(EpochId, NodeSet), Option<Target<F::Value>>>,
}

impl<F: FunctionFamily> Targets<'_, F> {
    fn get(&mut self, e: EpochId, p: NodeSet) -> Result<Option<Target<F::Value>>, HarnessError> {
        if let Some(t) = self.cache.get(&(e, p)) {
            return Ok(t.clone());
        }
        let target = match &self.cert {
            Certificate::Boxes(b) => {
                let b = b.boxes().get(e, p).ok_or_else(|| {
                    HarnessError::PreconditionUnmet(format!("no certified boxes for epoch {e}, participants {p}"))
                })?;
                Some(Target {
                    kstar: b.kstar,
                    xstar: b.xstar.clone(),
                })
            }
            Certificate::Distances(d) => {
                if !self.exploratory {
                    let report = check_dynamic_amco(self.f, *d, &[(e, p)], &self.opts)?;
                    if !report.passed {
                        return Err(HarnessError::Uncertified {
                            epoch: e,
                            participants: p,
                            failed: report.failed(),
                        });
                    }
                }
                match amco_to_aco(self.f, *d, e, p, &self.opts) {
                    Ok(b) => Some(Target {
                        kstar: b.kstar,
                        xstar: b.xstar,
                    }),
                    Err(ConditionError::NoFixedPoint { .. }) if self.exploratory => None,
                    Err(err) => return Err(err.into()),
                }
            }
        };
        self.cache.insert((e, p), target.clone());
        Ok(target)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochRecord<V> {
    pub epoch: EpochId,
    pub participants: NodeSet,
    pub start: Time,
    pub end: Time,
    pub pseudocycles: usize,
    /// `None` when no fixed point is known (exploratory runs only).
    pub kstar: Option<usize>,
    pub qualifying: bool,
    pub converged: Option<bool>,
    /// End of the `kstar`-th pseudocycle.
    pub convergence_tick: Option<Time>,
    pub witness: Option<ConvergenceWitness<V>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergenceWitness<V> {
    pub trial: usize,
    pub seed: u64,
    pub epoch: EpochId,
    pub participants: NodeSet,
    pub t: Time,
    pub expected: Option<Vec<V>>,
    pub actual: Vec<V>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResult<V> {
    pub trial: usize,
    /// Seed of this trial's schedule, churn and starting state.
    pub seed: u64,
    pub initial: Vec<V>,
    pub epochs: Vec<EpochRecord<V>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary<V> {
    pub trials: usize,
    pub qualifying_epochs: usize,
    pub converged: usize,
    /// `converged / qualifying_epochs`, `null` when nothing qualified.
    pub rate: Option<f64>,
    pub witnesses: Vec<ConvergenceWitness<V>>,
    pub seed: u64,
}

impl<V> Summary<V> {
    /// Every qualifying epoch converged.
    pub fn passed(&self) -> bool {
        self.converged == self.qualifying_epochs
    }
}

#[derive(Clone, Debug)]
pub struct TrialRun<V> {
    pub results: Vec<TrialResult<V>>,
    pub summary: Summary<V>,
}

fn churn_events(rng: &mut ChaCha8Rng, c: &ChurnConfig, n: usize, horizon: Time) -> Vec<EpochEvent> {
    let k = rng.gen_range(c.min_events..=c.max_events);
    let mut times: Vec<Time> = sample(rng, horizon, k).into_iter().map(|t| t + 1).collect();
    times.sort_unstable();
    times
        .into_iter()
        .map(|time| EpochEvent {
            time,
            participants: (0..n).filter(|_| rng.gen_bool(c.inclusion_probability)).collect(),
        })
        .collect()
}

/// The schedule of one trial.
pub fn trial_schedule(cfg: &HarnessConfig, rng: &mut ChaCha8Rng) -> Result<DynamicSchedule, HarnessError> {
    let mut sc = cfg.schedule.clone();
    sc.seed = rng.gen();
    if let Some(c) = &cfg.churn {
        sc.epoch_events = churn_events(rng, c, sc.n, sc.horizon);
    }
    Ok(generate_schedule(&sc)?)
}

/// Per-trial seeds, derived from the run seed.
pub fn trial_seeds(seed: u64, trials: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials).map(|_| rng.gen()).collect()
}

fn starting_choices<F: FunctionFamily>(
    f: &F,
    cert: &Certificate<'_, F::Value>,
    cfg: &HarnessConfig,
    s: &DynamicSchedule,
) -> Result<Vec<Vec<F::Value>>, HarnessError> {
    if let (Certificate::Boxes(b), false) = (cert, cfg.sample_full_space) {
        let (e, p) = (s.eta(0), s.participants(0));
        let b = b.boxes().get(e, p).ok_or_else(|| {
            HarnessError::PreconditionUnmet(format!("no certified boxes for the initial epoch {e}, participants {p}"))
        })?;
        return Ok(b.level(0).iter().map(|c| c.iter().cloned().collect()).collect());
    }
    Ok(domains(f)?)
}

fn check_segments<F: FunctionFamily>(
    trace: &Trace<F::Value>,
    targets: &mut Targets<'_, F>,
    scope: ExpiryScope,
    trial: usize,
    seed: u64,
) -> Result<Vec<EpochRecord<F::Value>>, HarnessError> {
    let s = &trace.schedule;
    let mut out = Vec::new();
    for seg in s.segments() {
        let count = count_disjoint_pseudocycles(s, Period::new(seg.start, seg.end), scope);
        let target = targets.get(seg.epoch, seg.participants)?;
        let needed = target.as_ref().map_or(1, |t| t.kstar);
        let mut rec = EpochRecord {
            epoch: seg.epoch,
            participants: seg.participants,
            start: seg.start,
            end: seg.end,
            pseudocycles: count.count,
            kstar: target.as_ref().map(|t| t.kstar),
            qualifying: count.count >= needed,
            converged: None,
            convergence_tick: None,
            witness: None,
        };
        if rec.qualifying {
            let t2 = if needed == 0 { seg.start } else { count.periods[needed - 1].t2 };
            rec.convergence_tick = Some(t2);
            let expected = target.map(|t| t.xstar);
            let miss = (t2..=seg.end).find(|&t| expected.as_deref() != Some(trace.state(t)));
            rec.converged = Some(miss.is_none());
            rec.witness = miss.map(|t| ConvergenceWitness {
                trial,
                seed,
                epoch: seg.epoch,
                participants: seg.participants,
                t,
                expected: expected.clone(),
                actual: trace.state(t).to_vec(),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

/// Run `cfg.trials` seeded trials and summarise convergence on qualifying
/// epochs.
pub fn converge_trials<F: FunctionFamily>(
    f: &F,
    cert: Certificate<'_, F::Value>,
    cfg: &HarnessConfig,
    opts: &CheckOptions,
) -> Result<TrialRun<F::Value>, HarnessError> {
    cfg.validate()?;
    if cfg.schedule.n != f.node_count() {
        return Err(HarnessError::InvalidConfig {
            key: "schedule.n",
            reason: format!("{} nodes, the family has {}", cfg.schedule.n, f.node_count()),
        });
    }
    let mut targets = Targets {
        f,
        cert,
        exploratory: cfg.exploratory,
        opts: *opts,
        cache: BTreeMap::new(),
    };
    for &(e, p) in &cfg.precompute {
        targets.get(e, p)?;
    }

    let mut results = Vec::with_capacity(cfg.trials);
    for (trial, seed) in trial_seeds(cfg.seed, cfg.trials).into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = trial_schedule(cfg, &mut rng)?;
        let choices = starting_choices(f, &targets.cert, cfg, &s)?;
        if let Some(i) = choices.iter().position(|c| c.is_empty()) {
            return Err(HarnessError::PreconditionUnmet(format!("no starting value for node {i}")));
        }
        let x: Vec<F::Value> = choices.iter().map(|c| c[rng.gen_range(0..c.len())].clone()).collect();
        let trace = run_delta(f, &s, &x)?;
        let epochs = check_segments(&trace, &mut targets, cfg.scope, trial, seed)?;
        results.push(TrialResult {
            trial,
            seed,
            initial: x,
            epochs,
        });
    }

    let qualifying: Vec<&EpochRecord<F::Value>> = results.iter().flat_map(|r| &r.epochs).filter(|e| e.qualifying).collect();
    let converged = qualifying.iter().filter(|e| e.converged == Some(true)).count();
    let summary = Summary {
        trials: cfg.trials,
        qualifying_epochs: qualifying.len(),
        converged,
        rate: (!qualifying.is_empty()).then(|| converged as f64 / qualifying.len() as f64),
        witnesses: qualifying
            .iter()
            .filter_map(|e| e.witness.clone())
            .take(cfg.max_witnesses)
            .collect(),
        seed: cfg.seed,
    };
    Ok(TrialRun { results, summary })
}
