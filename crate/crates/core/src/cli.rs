//! The `dyniter` command line.
//!
//! Every subcommand reads one JSON config (`--config`) with the sections it
//! needs and writes JSON or JSONL to `--out` (stdout by default). Exit status
//! is 0 on success, 1 when a checker fails or a run does not converge, and 2
//! on usage or config errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::boxtrace::{annotate, BoxTraceError};
use crate::conditions::{
    check_dynamic_aco, check_dynamic_amco, reduce_all, BoxFamily, CertifiedBoxes, CheckOptions, CheckReport,
    ConditionError, DiscreteMetric, DistanceFamily, DEFAULT_BUDGET,
};
use crate::engine::{run_delta, EngineError, FunctionFamily, Value};
use crate::families::{
    build_min_consensus, build_min_routing, Constant, EpochConstant, FamilyError, Flip, Identity, MinConsensus,
    RoutingFamily, RoutingInstance,
};
use crate::harness::{
    converge_trials, exhaustive_oracle_check, stale_message_demo, Certificate, ChurnConfig, HarnessConfig,
    HarnessError, OracleBounds, OracleError,
};
use crate::nodes::NodeSet;
use crate::pseudocycle::{epoch_pseudocycles, ExpiryScope};
use crate::schedule::{generate_schedule, DynamicSchedule, EpochId, ScheduleConfig, ScheduleError, Time};

#[derive(Debug, Parser)]
#[command(name = "dyniter", version, about = "Dynamic asynchronous iterations: simulate, analyse and check convergence")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the trial count in the config.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// How far expiry periods look ahead: epoch or horizon.
    #[arg(long, global = true)]
    pub scope: Option<ExpiryScope>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a schedule, run the state function and write the trace as JSONL.
    Simulate {
        /// Write per-cell box annotations instead of the trace.
        #[arg(long)]
        annotate: bool,
    },
    /// Write the disjoint pseudocycles of every epoch as JSONL.
    Pseudocycles,
    /// Check the dynamic ACO conditions on a box family.
    CheckAco,
    /// Check the dynamic AMCO conditions.
    CheckAmco,
    /// Build boxes from distances and write them as JSON.
    Reduce,
    /// Run seeded convergence trials and write the summary.
    Converge,
    /// Compare the engine with the naive recursion on every small schedule.
    OracleCheck,
    /// Run the stale-message scenario.
    DemoStale,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            _ => 2,
        }
    }

    fn config(key: impl Into<String>, reason: impl ToString) -> Self {
        CliError::Config {
            key: key.into(),
            reason: reason.to_string(),
        }
    }
}

impl From<ScheduleError> for CliError {
    fn from(e: ScheduleError) -> Self {
        match e {
            ScheduleError::InvalidConfig { key, reason } => CliError::config(format!("schedule.{key}"), reason),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<FamilyError> for CliError {
    fn from(e: FamilyError) -> Self {
        match e {
            FamilyError::InvalidInstance { key, reason } => CliError::config(format!("family.{key}"), reason),
        }
    }
}

impl From<ConditionError> for CliError {
    fn from(e: ConditionError) -> Self {
        match e {
            ConditionError::EnumerationTooLarge { .. } => CliError::config("budget", e),
            ConditionError::InvalidBoxes(_) | ConditionError::MissingBoxes { .. } => CliError::config("boxes", e),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::StateLength { .. } => CliError::config("initial", e),
            EngineError::NodeCountMismatch { .. } => CliError::config("schedule.n", e),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::InvalidConfig { key, reason } if key.starts_with("schedule") => CliError::config(key, reason),
            HarnessError::InvalidConfig { key, reason } => CliError::config(format!("harness.{key}"), reason),
            HarnessError::Schedule(e) => e.into(),
            HarnessError::Condition(e) => e.into(),
            HarnessError::Engine(e) => e.into(),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::BudgetExceeded { .. } => CliError::config("oracle.budget", e),
            OracleError::Bounds(_) => CliError::config("oracle", e),
            OracleError::Engine(e) => e.into(),
            OracleError::Condition(e) => e.into(),
        }
    }
}

impl From<BoxTraceError> for CliError {
    fn from(e: BoxTraceError) -> Self {
        CliError::config("boxes", e)
    }
}

/// The bundled family a config selects.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyConfig {
    Routing(RoutingInstance),
    MinConsensus { n: usize, max: u32 },
    Flip { n: usize },
    Identity { n: usize, values: u32 },
    Constant { target: Vec<u32>, values: u32 },
    EpochConstant { n: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    #[default]
    Distances,
    Boxes,
}

fn default_trials() -> usize {
    100
}

fn default_witnesses() -> usize {
    20
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessSection {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub churn: Option<ChurnConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sample_full_space: bool,
    #[serde(default)]
    pub exploratory: bool,
    #[serde(default)]
    pub precompute: Vec<(EpochId, NodeSet)>,
    #[serde(default = "default_witnesses")]
    pub max_witnesses: usize,
    #[serde(default)]
    pub certificate: CertificateKind,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub horizon: Time,
    pub alternative: NodeSet,
    #[serde(default = "default_budget")]
    pub budget: u128,
    /// Starting states; every state of the domain when omitted.
    #[serde(default)]
    pub initial: Option<Json>,
}

fn default_budget() -> u128 {
    DEFAULT_BUDGET
}

fn default_max_steps() -> usize {
    CheckOptions::default().max_steps
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default)]
    pub family: Option<FamilyConfig>,
    #[serde(default)]
    pub harness: Option<HarnessSection>,
    /// Starting state for `simulate`; `⊥` when omitted.
    #[serde(default)]
    pub initial: Option<Json>,
    /// `(epoch, participants)` pairs to check or reduce.
    #[serde(default)]
    pub epochs: Option<Vec<(EpochId, NodeSet)>>,
    /// A box family, inline or as a path to a JSON file.
    #[serde(default)]
    pub boxes: Option<Json>,
    #[serde(default)]
    pub oracle: Option<OracleSection>,
    #[serde(default = "default_budget")]
    pub budget: u128,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

impl Config {
    fn options(&self) -> CheckOptions {
        CheckOptions {
            budget: self.budget,
            max_steps: self.max_steps,
        }
    }
}

fn load_config(path: &Path) -> Result<Config, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        CliError::config(if key == "." { "<root>".to_string() } else { key }, e.into_inner())
    })
}

fn parse_section<T: DeserializeOwned>(key: &str, v: &Json) -> Result<T, CliError> {
    serde_path_to_error::deserialize(v.clone()).map_err(|e| {
        let inner = e.path().to_string();
        let full = if inner == "." { key.to_string() } else { format!("{key}.{inner}") };
        CliError::config(full, e.into_inner())
    })
}

/// Per-family behaviour the commands need beyond [`FunctionFamily`].
trait Bundled: FunctionFamily {
    fn default_pairs(&self) -> Vec<(EpochId, NodeSet)> {
        vec![(EpochId(0), NodeSet::full(self.node_count()))]
    }

    /// Boxes to check when the config supplies none, instead of building them
    /// from distances.
    fn default_boxes(&self, _pairs: &[(EpochId, NodeSet)]) -> Option<Result<BoxFamily<Self::Value>, ConditionError>> {
        None
    }
}

impl Bundled for RoutingFamily {
    fn default_pairs(&self) -> Vec<(EpochId, NodeSet)> {
        self.instance().epoch_pairs()
    }
}

impl Bundled for MinConsensus {}
impl Bundled for Flip {}
impl Bundled for Identity {}
impl Bundled for Constant {}

impl Bundled for EpochConstant {
    fn default_pairs(&self) -> Vec<(EpochId, NodeSet)> {
        vec![(EpochId(0), NodeSet::full(self.n)), (EpochId(1), NodeSet::full(self.n))]
    }

    fn default_boxes(&self, pairs: &[(EpochId, NodeSet)]) -> Option<Result<BoxFamily<u32>, ConditionError>> {
        Some(self.naive_boxes(pairs))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Failure,
}

struct Ctx<'a> {
    cli: &'a Cli,
    config: Config,
}

impl Ctx<'_> {
    fn emit(&self, text: &str) -> Result<(), CliError> {
        match &self.cli.out {
            Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            }),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|source| CliError::Io {
                        path: PathBuf::from("<stdout>"),
                        source,
                    })
            }
        }
    }

    fn emit_json<T: Serialize>(&self, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
        text.push('\n');
        self.emit(&text)
    }

    fn scope(&self) -> ExpiryScope {
        self.cli.scope.unwrap_or_default()
    }

    fn schedule_config(&self) -> Result<ScheduleConfig, CliError> {
        let mut sc = self
            .config
            .schedule
            .clone()
            .ok_or_else(|| CliError::config("schedule", "section is required by this command"))?;
        if let Some(seed) = self.cli.seed {
            sc.seed = seed;
        }
        Ok(sc)
    }

    fn schedule(&self) -> Result<DynamicSchedule, CliError> {
        let sc = self.schedule_config()?;
        Ok(generate_schedule(&sc)?)
    }

    fn pairs<F: Bundled>(&self, f: &F) -> Result<Vec<(EpochId, NodeSet)>, CliError> {
        if let Some(p) = &self.config.epochs {
            return Ok(p.clone());
        }
        if self.config.schedule.is_some() {
            let s = self.schedule()?;
            let mut pairs: Vec<_> = s.segments().iter().map(|seg| (seg.epoch, seg.participants)).collect();
            pairs.dedup();
            return Ok(pairs);
        }
        Ok(f.default_pairs())
    }

    fn boxes<F: Bundled, D: DistanceFamily<F::Value> + ?Sized>(
        &self,
        f: &F,
        d: &D,
        pairs: &[(EpochId, NodeSet)],
    ) -> Result<BoxFamily<F::Value>, CliError> {
        match &self.config.boxes {
            Some(Json::String(path)) => {
                let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                    path: PathBuf::from(path),
                    source,
                })?;
                let v: Json = serde_json::from_str(&text).map_err(|e| CliError::config("boxes", e))?;
                parse_section("boxes", &v)
            }
            Some(v) => parse_section("boxes", v),
            None => match f.default_boxes(pairs) {
                Some(b) => Ok(b?),
                None => Ok(reduce_all(f, d, pairs, &self.config.options())?),
            },
        }
    }
}

fn report_failure<V: Value>(name: &str, report: &CheckReport<V>) {
    for w in &report.witnesses {
        eprintln!(
            "{name}: {} fails for epoch {}, participants {}: {}",
            w.condition, w.epoch, w.participants, w.detail
        );
    }
}

fn outcome(ok: bool) -> Outcome {
    if ok {
        Outcome::Success
    } else {
        Outcome::Failure
    }
}

fn simulate<F: Bundled, D: DistanceFamily<F::Value> + ?Sized>(
    ctx: &Ctx,
    f: &F,
    d: &D,
    with_boxes: bool,
) -> Result<Outcome, CliError> {
    let sc = ctx.schedule_config()?;
    let s = generate_schedule(&sc)?;
    let x: Vec<F::Value> = match &ctx.config.initial {
        Some(v) => parse_section("initial", v)?,
        None => f.bottom(),
    };
    let trace = run_delta(f, &s, &x)?;
    eprintln!("simulate: seed {}", sc.seed);
    if !with_boxes {
        return ctx.emit(&trace.to_jsonl()).map(|_| Outcome::Success);
    }
    let mut pairs: Vec<_> = s.segments().iter().map(|seg| (seg.epoch, seg.participants)).collect();
    pairs.dedup();
    let boxes = ctx.boxes(f, d, &pairs)?;
    let mut text = String::new();
    for a in annotate(&trace, &boxes)? {
        text.push_str(&serde_json::to_string(&a).expect("annotations serialize"));
        text.push('\n');
    }
    ctx.emit(&text).map(|_| Outcome::Success)
}

fn pseudocycles(ctx: &Ctx) -> Result<Outcome, CliError> {
    let s = ctx.schedule()?;
    let mut text = String::new();
    for p in epoch_pseudocycles(&s, ctx.scope()) {
        text.push_str(&serde_json::to_string(&p).expect("periods serialize"));
        text.push('\n');
    }
    ctx.emit(&text).map(|_| Outcome::Success)
}

fn check_aco<F: Bundled, D: DistanceFamily<F::Value> + ?Sized>(ctx: &Ctx, f: &F, d: &D) -> Result<Outcome, CliError> {
    let pairs = ctx.pairs(f)?;
    let boxes = ctx.boxes(f, d, &pairs)?;
    let epochs = if ctx.config.epochs.is_some() { pairs } else { boxes.pairs() };
    let report = check_dynamic_aco(f, &boxes, &epochs, &ctx.config.options())?;
    ctx.emit_json(&report)?;
    report_failure("check-aco", &report);
    Ok(outcome(report.passed))
}

fn check_amco<F: Bundled, D: DistanceFamily<F::Value> + ?Sized>(ctx: &Ctx, f: &F, d: &D) -> Result<Outcome, CliError> {
    let pairs = ctx.pairs(f)?;
    let report = check_dynamic_amco(f, d, &pairs, &ctx.config.options())?;
    ctx.emit_json(&report)?;
    report_failure("check-amco", &report);
    Ok(outcome(report.passed))
}

fn reduce<F: Bundled, D: DistanceFamily<F::Value> + ?Sized>(ctx: &Ctx, f: &F, d: &D) -> Result<Outcome, CliError> {
    let pairs = ctx.pairs(f)?;
    let boxes = reduce_all(f, d, &pairs, &ctx.config.options())?;
    ctx.emit_json(&boxes).map(|_| Outcome::Success)
}

fn converge<F: Bundled, D: DistanceFamily<F::Value>>(ctx: &Ctx, f: &F, d: &D) -> Result<Outcome, CliError> {
    let h = ctx
        .config
        .harness
        .clone()
        .ok_or_else(|| CliError::config("harness", "section is required by this command"))?;
    let schedule = ctx
        .config
        .schedule
        .clone()
        .ok_or_else(|| CliError::config("schedule", "section is required by this command"))?;
    let cfg = HarnessConfig {
        trials: ctx.cli.trials.unwrap_or(h.trials),
        schedule,
        churn: h.churn,
        seed: ctx.cli.seed.unwrap_or(h.seed),
        sample_full_space: h.sample_full_space,
        exploratory: h.exploratory,
        scope: ctx.scope(),
        precompute: h.precompute,
        max_witnesses: h.max_witnesses,
    };
    let opts = ctx.config.options();
    let run = match h.certificate {
        CertificateKind::Distances => converge_trials(f, Certificate::Distances(d), &cfg, &opts)?,
        CertificateKind::Boxes => {
            let pairs = match &ctx.config.epochs {
                Some(p) => p.clone(),
                None => {
                    let epochs = cfg
                        .churn
                        .as_ref()
                        .map_or(cfg.schedule.epoch_events.len(), |c| c.max_events);
                    (0..=epochs as u32)
                        .flat_map(|e| NodeSet::all_subsets(f.node_count()).map(move |p| (EpochId(e), p)))
                        .collect()
                }
            };
            let boxes = ctx.boxes(f, d, &pairs)?;
            let cert = CertifiedBoxes::certify(f, boxes, &opts).map_err(|e| CliError::Failed(e.to_string()))?;
            converge_trials(f, Certificate::Boxes(&cert), &cfg, &opts)?
        }
    };
    ctx.emit_json(&run.summary)?;
    for w in &run.summary.witnesses {
        eprintln!(
            "converge: trial {} (seed {}) epoch {} not at its fixed point at t={}",
            w.trial, w.seed, w.epoch, w.t
        );
    }
    Ok(outcome(run.summary.passed()))
}

fn oracle_check<F: Bundled>(ctx: &Ctx, f: &F) -> Result<Outcome, CliError> {
    let o = ctx
        .config
        .oracle
        .clone()
        .ok_or_else(|| CliError::config("oracle", "section is required by this command"))?;
    let initial: Vec<Vec<F::Value>> = match &o.initial {
        Some(v) => parse_section("oracle.initial", v)?,
        None => Vec::new(),
    };
    let bounds = OracleBounds {
        horizon: o.horizon,
        alternative: o.alternative,
        budget: o.budget,
    };
    let report = exhaustive_oracle_check(f, &bounds, &initial)?;
    ctx.emit_json(&report)?;
    if let Some(m) = &report.mismatch {
        eprintln!(
            "oracle-check: mismatch at t={}, i={}: expected {:?}, got {:?}",
            m.t, m.i, m.expected, m.got
        );
    }
    Ok(outcome(report.passed))
}

fn demo_stale(ctx: &Ctx) -> Result<Outcome, CliError> {
    let demo = stale_message_demo();
    ctx.emit_json(&demo.report)?;
    let r = &demo.report;
    Ok(outcome(
        !r.stale_reads.is_empty() && !r.not_well_formed.is_empty() && r.control_stale_reads == 0,
    ))
}

macro_rules! with_family {
    ($chosen:expr, |$f:ident, $d:ident| $body:expr) => {
        match $chosen {
            FamilyConfig::Routing(instance) => {
                let ($f, $d) = build_min_routing(instance)?;
                $body
            }
            FamilyConfig::MinConsensus { n, max } => {
                let $f = build_min_consensus(n, max)?;
                let $d = DiscreteMetric::for_family(&$f);
                $body
            }
            FamilyConfig::Flip { n } => {
                let $f = Flip { n };
                let $d = DiscreteMetric::for_family(&$f);
                $body
            }
            FamilyConfig::Identity { n, values } => {
                if values == 0 {
                    return Err(CliError::config("family.values", "domain must be non-empty"));
                }
                let $f = Identity { n, values };
                let $d = DiscreteMetric::for_family(&$f);
                $body
            }
            FamilyConfig::Constant { target, values } => {
                let $f = Constant::new(target, values)?;
                let $d = DiscreteMetric::for_family(&$f);
                $body
            }
            FamilyConfig::EpochConstant { n } => {
                let $f = EpochConstant { n };
                let $d = DiscreteMetric::for_family(&$f);
                $body
            }
        }
    };
}

fn family(config: &Config) -> Result<FamilyConfig, CliError> {
    let chosen = config
        .family
        .clone()
        .ok_or_else(|| CliError::config("family", "section is required by this command"))?;
    let n = match &chosen {
        FamilyConfig::Routing(i) => i.node_count(),
        FamilyConfig::MinConsensus { n, .. }
        | FamilyConfig::Flip { n }
        | FamilyConfig::Identity { n, .. }
        | FamilyConfig::EpochConstant { n } => *n,
        FamilyConfig::Constant { target, .. } => target.len(),
    };
    if n == 0 || n > crate::nodes::MAX_NODES {
        return Err(CliError::config("family", format!("node count {n} outside [1, {}]", crate::nodes::MAX_NODES)));
    }
    Ok(chosen)
}

/// Run one parsed invocation.
pub fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    if let Command::DemoStale = cli.command {
        let ctx = Ctx {
            cli,
            config: match &cli.config {
                Some(p) => load_config(p)?,
                None => serde_json::from_str("{}").expect("empty config parses"),
            },
        };
        return demo_stale(&ctx);
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::config("--config", "a config file is required"))?;
    let ctx = Ctx {
        cli,
        config: load_config(path)?,
    };
    match &cli.command {
        Command::Pseudocycles => pseudocycles(&ctx),
        Command::Simulate { annotate } => with_family!(family(&ctx.config)?, |f, d| simulate(&ctx, &f, &d, *annotate)),
        Command::CheckAco => with_family!(family(&ctx.config)?, |f, d| check_aco(&ctx, &f, &d)),
        Command::CheckAmco => with_family!(family(&ctx.config)?, |f, d| check_amco(&ctx, &f, &d)),
        Command::Reduce => with_family!(family(&ctx.config)?, |f, d| reduce(&ctx, &f, &d)),
        Command::Converge => with_family!(family(&ctx.config)?, |f, d| converge(&ctx, &f, &d)),
        Command::OracleCheck => with_family!(family(&ctx.config)?, |f, _d| oracle_check(&ctx, &f)),
        Command::DemoStale => unreachable!(),
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::Failure) => 1,
        Err(e) => {
            eprintln!("dyniter: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> Result<Config, CliError> {
        let de = &mut serde_json::Deserializer::from_str(json);
        serde_path_to_error::deserialize(de).map_err(|e| CliError::config(e.path().to_string(), e.into_inner()))
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse(r#"{"schedule": {"n": 2, "horizon": 5, "activation_probability": 1.0, "bogus": 1}}"#).unwrap_err();
        match err {
            CliError::Config { key, .. } => assert_eq!(key, "schedule.bogus"),
            other => panic!("{other}"),
        }
        let err = parse(r#"{"harness": {"trials": "many"}}"#).unwrap_err();
        match err {
            CliError::Config { key, .. } => assert_eq!(key, "harness.trials"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn family_configs_parse() {
        let c = parse(
            r#"{"family": {"kind": "routing", "epochs": [{"weights": [[null, 1], [1, null]], "participants": [0, 1]}],
                "destination": 0, "cap": 3}}"#,
        )
        .unwrap();
        assert!(matches!(c.family, Some(FamilyConfig::Routing(_))));
        let c = parse(r#"{"family": {"kind": "min_consensus", "n": 2, "max": 3}}"#).unwrap();
        assert!(matches!(c.family, Some(FamilyConfig::MinConsensus { n: 2, max: 3 })));
        assert!(parse(r#"{"family": {"kind": "nope"}}"#).is_err());
    }

    #[test]
    fn library_errors_map_to_config_keys() {
        let e: CliError = ScheduleError::InvalidConfig {
            key: "horizon",
            reason: "must be at least 1".into(),
        }
        .into();
        assert!(matches!(&e, CliError::Config { key, .. } if key == "schedule.horizon"));
        assert_eq!(e.exit_code(), 2);
        let e: CliError = OracleError::BudgetExceeded { count: 10, budget: 1 }.into();
        assert!(matches!(&e, CliError::Config { key, .. } if key == "oracle.budget"));
        let e: CliError = ConditionError::NoFixedPoint {
            epoch: EpochId(0),
            participants: NodeSet::full(2),
            steps: 3,
        }
        .into();
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["dyniter", "no-such-command"]), 2);
        assert_eq!(run(["dyniter", "converge"]), 2);
    }
}
