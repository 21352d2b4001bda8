//! Experiment runner: ablation conditions over seed sweeps, periodic greedy
//! evaluation on fixed layouts, cross-seed aggregation, and persistence
//! (CSV, plot data, trace, manifest).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig, TeacherKind, TimeoutPolicy};
use crate::feedback_loop::{run_episode, LoopError, LoopState, StepRecord};
use crate::gridworld::{relative_goal, EnvConfigError, GridConfig, GridWorld};
use crate::protocol::ProtocolError;
use crate::remote::{RemoteTeacher, TimeoutFallback};
use crate::rng::{derive_seed, SplitMix64};
use crate::student::{EpsilonSchedule, StateKey, StudentPolicy};
use crate::teacher::{
    ConstantTeacher, FeedbackSignal, OracleTeacher, Teacher, TeacherContext, TeacherPolicy, Token,
};

/// Ablation arms. Only Bidirectional closes the feedback loop back to the
/// teacher; the other three isolate pieces of the mechanism.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Bidirectional,
    NoFeedback,
    OracleTeacher,
    NoTeacher,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Bidirectional,
        Condition::NoFeedback,
        Condition::OracleTeacher,
        Condition::NoTeacher,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Bidirectional => "bidirectional",
            Condition::NoFeedback => "no_feedback",
            Condition::OracleTeacher => "oracle_teacher",
            Condition::NoTeacher => "no_teacher",
        }
    }

    pub fn from_name(s: &str) -> Option<Condition> {
        Condition::ALL.iter().copied().find(|c| c.name() == s)
    }

    pub fn feedback_enabled(self) -> bool {
        matches!(self, Condition::Bidirectional)
    }
}

/// Resolved teacher wiring for one run.
#[derive(Clone, Debug, PartialEq)]
pub enum TeacherSetup {
    Tabular { temperature: f64, beta: f64 },
    Oracle,
    Constant(Token),
    Remote {
        addr: String,
        timeout: Duration,
        fallback: TimeoutFallback,
    },
}

impl TeacherSetup {
    pub fn build(&self) -> Result<AnyTeacher, ProtocolError> {
        Ok(match self {
            TeacherSetup::Tabular { temperature, beta } => {
                AnyTeacher::Tabular(TeacherPolicy::new(*temperature, *beta))
            }
            TeacherSetup::Oracle => AnyTeacher::Oracle(OracleTeacher),
            TeacherSetup::Constant(token) => AnyTeacher::Constant(ConstantTeacher(*token)),
            TeacherSetup::Remote {
                addr,
                timeout,
                fallback,
            } => AnyTeacher::Remote(RemoteTeacher::connect(addr, *timeout, *fallback)?),
        })
    }
}

/// Concrete teacher behind a single dispatch point, so per-seed workers can
/// hand tabular policies back for checkpointing.
// One teacher per seed, never stored in bulk, so the size skew is harmless.
#[allow(clippy::large_enum_variant)]
pub enum AnyTeacher {
    Tabular(TeacherPolicy),
    Oracle(OracleTeacher),
    Constant(ConstantTeacher),
    Remote(RemoteTeacher),
}

impl AnyTeacher {
    pub fn tabular(&self) -> Option<&TeacherPolicy> {
        match self {
            AnyTeacher::Tabular(p) => Some(p),
            _ => None,
        }
    }

    pub fn into_tabular(self) -> Option<TeacherPolicy> {
        match self {
            AnyTeacher::Tabular(p) => Some(p),
            _ => None,
        }
    }
}

impl Teacher for AnyTeacher {
    fn emit(
        &mut self,
        ctx: TeacherContext,
        rng: &mut SplitMix64,
        episode: u64,
        t: u32,
    ) -> Result<Token, ProtocolError> {
        match self {
            AnyTeacher::Tabular(p) => p.emit(ctx, rng, episode, t),
            AnyTeacher::Oracle(p) => p.emit(ctx, rng, episode, t),
            AnyTeacher::Constant(p) => p.emit(ctx, rng, episode, t),
            AnyTeacher::Remote(p) => p.emit(ctx, rng, episode, t),
        }
    }

    fn apply_feedback(
        &mut self,
        ctx: TeacherContext,
        token: Token,
        signal: FeedbackSignal,
    ) -> Result<(), ProtocolError> {
        match self {
            AnyTeacher::Tabular(p) => p.apply_feedback(ctx, token, signal),
            AnyTeacher::Oracle(p) => p.apply_feedback(ctx, token, signal),
            AnyTeacher::Constant(p) => p.apply_feedback(ctx, token, signal),
            AnyTeacher::Remote(p) => p.apply_feedback(ctx, token, signal),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudentParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub condition: Condition,
    pub episodes: u64,
    pub seeds: Vec<u64>,
    pub eval_every: u64,
    pub grid: GridConfig,
    pub env_seed: u64,
    pub teacher: TeacherSetup,
    pub student: StudentParams,
    pub record_trace: bool,
}

impl ExperimentConfig {
    /// Resolves a validated [`RunConfig`] into concrete wiring, including the
    /// condition/teacher-kind compatibility rules.
    pub fn resolve(run: &RunConfig) -> Result<ExperimentConfig, ConfigError> {
        run.validate()?;
        let condition = run.experiment.condition;
        let t = &run.teacher;
        let teacher = match (condition, t.kind) {
            (Condition::NoTeacher, TeacherKind::Auto) => {
                TeacherSetup::Constant(Token::GO_FORWARD)
            }
            (Condition::NoTeacher, kind) => {
                return Err(ConfigError::Invalid(format!(
                    "condition no_teacher wires a built-in constant token; teacher.kind must stay auto, got {}",
                    kind.name()
                )));
            }
            (Condition::OracleTeacher, TeacherKind::Auto | TeacherKind::Oracle) => {
                TeacherSetup::Oracle
            }
            (Condition::OracleTeacher, kind) => {
                return Err(ConfigError::Invalid(format!(
                    "condition oracle_teacher requires an oracle teacher, got teacher.kind {}",
                    kind.name()
                )));
            }
            (_, TeacherKind::Auto | TeacherKind::Tabular) => TeacherSetup::Tabular {
                temperature: t.temperature,
                beta: t.beta,
            },
            (_, TeacherKind::Oracle) => TeacherSetup::Oracle,
            (_, TeacherKind::Remote) => TeacherSetup::Remote {
                addr: t.remote_addr.clone(),
                timeout: Duration::from_millis(t.timeout_ms),
                fallback: match t.on_timeout {
                    TimeoutPolicy::Oracle => TimeoutFallback::Oracle,
                    TimeoutPolicy::Abort => TimeoutFallback::Abort,
                },
            },
        };
        Ok(ExperimentConfig {
            condition,
            episodes: run.experiment.episodes,
            seeds: run.experiment.seeds.clone(),
            eval_every: run.experiment.eval_every,
            grid: run.env.grid(),
            env_seed: run.env.env_seed,
            teacher,
            student: StudentParams {
                alpha: run.student.alpha,
                gamma: run.student.gamma,
                epsilon_start: run.student.epsilon_start,
                epsilon_end: run.student.epsilon_end,
            },
            record_trace: run.experiment.write_trace,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.episodes == 0 {
            return Err(ConfigError::Invalid("episodes must be positive".to_string()));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid("seeds must be nonempty".to_string()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(ConfigError::Invalid("seeds must be distinct".to_string()));
        }
        if self.eval_every == 0 || self.eval_every > self.episodes {
            return Err(ConfigError::Invalid(
                "eval_every must lie in [1, episodes]".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub condition: Condition,
    pub seed: u64,
    pub episode: u64,
    pub success_rate: f64,
    pub mean_return: f64,
    pub mean_length: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub condition: Condition,
    pub episode: u64,
    pub success_mean: f64,
    pub success_std: f64,
    pub return_mean: f64,
    pub return_std: f64,
    pub length_mean: f64,
    pub length_std: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct MetricsSeries {
    /// One row per (seed, eval point), seeds in run order.
    pub rows: Vec<MetricsRow>,
    /// One row per eval point, folded over seeds in ascending seed order.
    pub aggregates: Vec<AggregateRow>,
}

impl MetricsSeries {
    pub fn final_aggregate(&self) -> Option<&AggregateRow> {
        self.aggregates.last()
    }

    /// First eval point whose aggregate success rate reaches `threshold`.
    pub fn episodes_to_reach(&self, threshold: f64) -> Option<u64> {
        self.aggregates
            .iter()
            .find(|a| a.success_mean >= threshold)
            .map(|a| a.episode)
    }

    /// Final-point row for one seed.
    pub fn final_row_for_seed(&self, seed: u64) -> Option<&MetricsRow> {
        self.rows.iter().rfind(|r| r.seed == seed)
    }
}

/// Everything a finished seed hands back besides metrics.
#[derive(Clone, Debug)]
pub struct SeedArtifacts {
    pub seed: u64,
    pub student: StudentPolicy,
    /// Present when the run used a learnable tabular teacher.
    pub teacher: Option<TeacherPolicy>,
    /// Empty unless the config asked for a trace.
    pub trace: Vec<StepRecord>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub metrics: MetricsSeries,
    pub artifacts: Vec<SeedArtifacts>,
}

#[derive(Error, Debug)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Env(#[from] EnvConfigError),
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("seed {seed}: {source}")]
    SeedFailed {
        seed: u64,
        source: Box<HarnessError>,
        /// Metrics and artifacts of the seeds that did finish.
        partial: Box<ExperimentOutput>,
    },
}

impl HarnessError {
    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
        move |source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub const EVAL_EPISODES: usize = 20;

// Stream tags splitting one experiment seed into independent PRNG streams.
const STREAM_LOOP: u64 = 0x4C4F_4F50;
const STREAM_LAYOUT: u64 = 0x4C41_5954;
const STREAM_EVAL_LAYOUT: u64 = 0x4556_4C41;
const STREAM_EVAL_TOKEN: u64 = 0x4556_4C54;

/// Episode ids reported to remote teachers during evaluation, clearly out of
/// the training range.
const EVAL_EPISODE_BASE: u64 = 1 << 62;

/// The 20 fixed evaluation layouts, shared by every condition and seed.
pub fn eval_seeds() -> [u64; EVAL_EPISODES] {
    std::array::from_fn(|i| derive_seed(STREAM_EVAL_LAYOUT, i as u64))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalSummary {
    pub success_rate: f64,
    pub mean_return: f64,
    pub mean_length: f64,
}

/// Greedy evaluation over the fixed layouts: epsilon is ignored, tables are
/// never written, no feedback flows. Tokens are sampled from a per-layout
/// stream so evaluation never perturbs (or depends on) training randomness.
pub fn evaluate_policy(
    env: &mut GridWorld,
    student: &StudentPolicy,
    teacher: &mut dyn Teacher,
) -> Result<EvalSummary, LoopError> {
    let mut successes = 0usize;
    let mut total_return = 0.0;
    let mut total_length = 0u64;
    for (i, &layout) in eval_seeds().iter().enumerate() {
        env.reset(layout);
        let mut token_rng = SplitMix64::new(derive_seed(STREAM_EVAL_TOKEN, layout));
        let mut t = 0u32;
        while !env.episode_over() {
            let obs = env.observe();
            let s = StateKey::from(&obs);
            let ctx = TeacherContext::new(relative_goal(&obs));
            let token = teacher.emit(ctx, &mut token_rng, EVAL_EPISODE_BASE + i as u64, t)?;
            let action = student.greedy_action(&s, token);
            let out = env.step(action).expect("loop guard keeps episode live");
            total_return += out.reward;
            t += 1;
            if out.terminated {
                successes += 1;
            }
        }
        total_length += u64::from(t);
    }
    let n = EVAL_EPISODES as f64;
    Ok(EvalSummary {
        success_rate: successes as f64 / n,
        mean_return: total_return / n,
        mean_length: total_length as f64 / n,
    })
}

type SeedResult = Result<(Vec<MetricsRow>, SeedArtifacts), HarnessError>;

fn run_seed(cfg: &ExperimentConfig, seed: u64) -> SeedResult {
    let mut env = GridWorld::new(cfg.grid)?;
    let mut teacher = cfg.teacher.build().map_err(LoopError::from)?;
    let mut student = StudentPolicy::new(
        cfg.student.alpha,
        cfg.student.gamma,
        cfg.student.epsilon_start,
    );
    let schedule = EpsilonSchedule {
        start: cfg.student.epsilon_start,
        end: cfg.student.epsilon_end,
        total_episodes: cfg.episodes,
    };
    let mut state = LoopState::new(cfg.condition.feedback_enabled());
    let root = derive_seed(cfg.env_seed, seed);
    let mut loop_rng = SplitMix64::new(derive_seed(root, STREAM_LOOP));
    let layout_root = derive_seed(root, STREAM_LAYOUT);

    let mut rows = Vec::new();
    let mut trace = Vec::new();
    for ep in 0..cfg.episodes {
        student.epsilon = schedule.at(ep);
        let records = run_episode(
            &mut env,
            &mut teacher,
            &mut student,
            &mut state,
            &mut loop_rng,
            derive_seed(layout_root, ep),
        )?;
        if cfg.record_trace {
            trace.extend(records);
        }
        let done = ep + 1;
        if done % cfg.eval_every == 0 {
            let summary = evaluate_policy(&mut env, &student, &mut teacher)?;
            rows.push(MetricsRow {
                condition: cfg.condition,
                seed,
                episode: done,
                success_rate: summary.success_rate,
                mean_return: summary.mean_return,
                mean_length: summary.mean_length,
            });
        }
    }
    Ok((
        rows,
        SeedArtifacts {
            seed,
            student,
            teacher: teacher.into_tabular(),
            trace,
        },
    ))
}

/// Runs every seed as an isolated worker (in parallel), then folds metrics in
/// a canonical order. On a seed failure the completed seeds' results ride
/// inside the error so callers can flush partial output before aborting.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    let results: Vec<(u64, SeedResult)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| (seed, run_seed(cfg, seed)))
        .collect();
    let mut rows = Vec::new();
    let mut artifacts = Vec::new();
    let mut failure = None;
    for (seed, result) in results {
        match result {
            Ok((seed_rows, seed_artifacts)) => {
                rows.extend(seed_rows);
                artifacts.push(seed_artifacts);
            }
            Err(source) => {
                failure.get_or_insert((seed, source));
            }
        }
    }
    let output = ExperimentOutput {
        metrics: aggregate(rows),
        artifacts,
    };
    match failure {
        None => Ok(output),
        Some((seed, source)) => Err(HarnessError::SeedFailed {
            seed,
            source: Box::new(source),
            partial: Box::new(output),
        }),
    }
}

/// Folds per-seed rows into per-eval-point aggregates. The fold visits seeds
/// in ascending order regardless of their order in the config, so aggregates
/// are invariant under seed-list permutation.
fn aggregate(rows: Vec<MetricsRow>) -> MetricsSeries {
    let mut by_point: BTreeMap<u64, BTreeMap<u64, MetricsRow>> = BTreeMap::new();
    for row in &rows {
        by_point.entry(row.episode).or_default().insert(row.seed, *row);
    }
    let aggregates = by_point
        .iter()
        .map(|(&episode, per_seed)| {
            let condition = per_seed.values().next().expect("nonempty point").condition;
            let collect = |f: fn(&MetricsRow) -> f64| -> Vec<f64> {
                per_seed.values().map(f).collect()
            };
            let (success_mean, success_std) = mean_std(&collect(|r| r.success_rate));
            let (return_mean, return_std) = mean_std(&collect(|r| r.mean_return));
            let (length_mean, length_std) = mean_std(&collect(|r| r.mean_length));
            AggregateRow {
                condition,
                episode,
                success_mean,
                success_std,
                return_mean,
                return_std,
                length_mean,
                length_std,
            }
        })
        .collect();
    MetricsSeries { rows, aggregates }
}

/// Mean and population standard deviation.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn csv_string(series: &MetricsSeries) -> String {
    let mut out = String::from("condition,seed,episode,success_rate,mean_return,mean_length\n");
    for r in &series.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.condition.name(),
            r.seed,
            r.episode,
            r.success_rate,
            r.mean_return,
            r.mean_length
        ));
    }
    out
}

pub fn plot_data_string(series: &MetricsSeries) -> String {
    let mut out = String::from(
        "condition,episode,success_mean,success_std,return_mean,return_std,length_mean,length_std\n",
    );
    for a in &series.aggregates {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            a.condition.name(),
            a.episode,
            a.success_mean,
            a.success_std,
            a.return_mean,
            a.return_std,
            a.length_mean,
            a.length_std
        ));
    }
    out
}

pub fn write_csv(series: &MetricsSeries, path: &Path) -> Result<(), HarnessError> {
    fs::write(path, csv_string(series)).map_err(HarnessError::io(path))
}

pub fn emit_plot_data(series: &MetricsSeries, path: &Path) -> Result<(), HarnessError> {
    fs::write(path, plot_data_string(series)).map_err(HarnessError::io(path))
}

pub fn trace_string(records: &[StepRecord]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("records always serialize"));
        out.push('\n');
    }
    out
}

pub fn write_trace(records: &[StepRecord], path: &Path) -> Result<(), HarnessError> {
    fs::write(path, trace_string(records)).map_err(HarnessError::io(path))
}

pub fn read_trace(path: &Path) -> Result<Vec<StepRecord>, HarnessError> {
    let text = fs::read_to_string(path).map_err(HarnessError::io(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(idx, line)| {
            serde_json::from_str(line).map_err(|e| HarnessError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("trace line {}: {e}", idx + 1),
                ),
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    artifact_version: String,
    config: RunConfig,
}

/// Writes the JSON manifest that makes a run reproducible: resolved config
/// (seeds included) plus the artifact version.
pub fn write_manifest(run: &RunConfig, path: &Path) -> Result<(), HarnessError> {
    let manifest = Manifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        config: run.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest always serializes");
    text.push('\n');
    fs::write(path, text).map_err(HarnessError::io(path))
}

pub fn read_manifest(path: &Path) -> Result<RunConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(HarnessError::io(path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()),
    })?;
    Ok(manifest.config)
}
