//! Run configuration: a documented TOML key tree with defaults, plus
//! `--set key=value` overrides applied on top.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::GridConfig;
use crate::harness::Condition;

pub const CONFIG_VERSION: u64 = 1;

/// Every key `--set` accepts, in documentation order.
pub const OVERRIDE_KEYS: [&str; 19] = [
    "env.grid_width",
    "env.grid_height",
    "env.max_steps",
    "env.env_seed",
    "teacher.kind",
    "teacher.beta",
    "teacher.temperature",
    "teacher.remote_addr",
    "teacher.timeout_ms",
    "teacher.on_timeout",
    "student.alpha",
    "student.gamma",
    "student.epsilon_start",
    "student.epsilon_end",
    "experiment.condition",
    "experiment.episodes",
    "experiment.seeds",
    "experiment.eval_every",
    "experiment.write_trace",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u64,
    pub env: EnvSection,
    pub teacher: TeacherSection,
    pub student: StudentSection,
    pub experiment: ExperimentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            env: EnvSection::default(),
            teacher: TeacherSection::default(),
            student: StudentSection::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub grid_width: u32,
    pub grid_height: u32,
    pub max_steps: u32,
    pub env_seed: u64,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            grid_width: 8,
            grid_height: 8,
            max_steps: 64,
            env_seed: 0,
        }
    }
}

impl EnvSection {
    pub fn grid(&self) -> GridConfig {
        GridConfig {
            width: self.grid_width,
            height: self.grid_height,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherKind {
    /// Pick per condition: tabular for Bidirectional/NoFeedback, oracle for
    /// OracleTeacher, constant for NoTeacher.
    Auto,
    Oracle,
    Tabular,
    Remote,
}

impl TeacherKind {
    pub fn name(self) -> &'static str {
        match self {
            TeacherKind::Auto => "auto",
            TeacherKind::Oracle => "oracle",
            TeacherKind::Tabular => "tabular",
            TeacherKind::Remote => "remote",
        }
    }

    pub fn from_name(s: &str) -> Option<TeacherKind> {
        match s {
            "auto" => Some(TeacherKind::Auto),
            "oracle" => Some(TeacherKind::Oracle),
            "tabular" => Some(TeacherKind::Tabular),
            "remote" => Some(TeacherKind::Remote),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeoutPolicy {
    Oracle,
    Abort,
}

impl TimeoutPolicy {
    pub fn from_name(s: &str) -> Option<TimeoutPolicy> {
        match s {
            "oracle" => Some(TimeoutPolicy::Oracle),
            "abort" => Some(TimeoutPolicy::Abort),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeacherSection {
    pub kind: TeacherKind,
    pub beta: f64,
    pub temperature: f64,
    pub remote_addr: String,
    pub timeout_ms: u64,
    pub on_timeout: TimeoutPolicy,
}

impl Default for TeacherSection {
    fn default() -> Self {
        Self {
            kind: TeacherKind::Auto,
            beta: 0.1,
            temperature: 1.0,
            remote_addr: String::new(),
            timeout_ms: 5000,
            on_timeout: TimeoutPolicy::Oracle,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudentSection {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
}

impl Default for StudentSection {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub condition: Condition,
    pub episodes: u64,
    pub seeds: Vec<u64>,
    pub eval_every: u64,
    pub write_trace: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            condition: Condition::Bidirectional,
            episodes: 2000,
            seeds: (1..=10).collect(),
            eval_every: 50,
            write_trace: false,
        }
    }
}

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("unknown config key \"{key}\"")]
    UnknownKey { key: String },
    #[error("config key \"{key}\": cannot parse {value:?} ({reason})")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("override {0:?} is not of the form key=value")]
    BadAssignment(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config file: {reason}")]
    Toml { reason: String },
    #[error("unsupported config version {found} (this build reads version {CONFIG_VERSION})")]
    UnsupportedVersion { found: u64 },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        RunConfig::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Toml {
            reason: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config always serializes")
    }

    /// Applies one `key=value` override.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::BadAssignment(assignment.to_string()))?;
        self.apply_override(key.trim(), value.trim())
    }

    /// Applies one override by dotted key. Unknown keys fail before any
    /// work starts; see [`OVERRIDE_KEYS`] for the full list.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "env.grid_width" => self.env.grid_width = parse_scalar(key, value)?,
            "env.grid_height" => self.env.grid_height = parse_scalar(key, value)?,
            "env.max_steps" => self.env.max_steps = parse_scalar(key, value)?,
            "env.env_seed" => self.env.env_seed = parse_scalar(key, value)?,
            "teacher.kind" => {
                self.teacher.kind = TeacherKind::from_name(value).ok_or_else(|| bad(
                    key,
                    value,
                    "expected auto, oracle, tabular, or remote",
                ))?;
            }
            "teacher.beta" => self.teacher.beta = parse_scalar(key, value)?,
            "teacher.temperature" => self.teacher.temperature = parse_scalar(key, value)?,
            "teacher.remote_addr" => self.teacher.remote_addr = value.to_string(),
            "teacher.timeout_ms" => self.teacher.timeout_ms = parse_scalar(key, value)?,
            "teacher.on_timeout" => {
                self.teacher.on_timeout = TimeoutPolicy::from_name(value)
                    .ok_or_else(|| bad(key, value, "expected oracle or abort"))?;
            }
            "student.alpha" => self.student.alpha = parse_scalar(key, value)?,
            "student.gamma" => self.student.gamma = parse_scalar(key, value)?,
            "student.epsilon_start" => self.student.epsilon_start = parse_scalar(key, value)?,
            "student.epsilon_end" => self.student.epsilon_end = parse_scalar(key, value)?,
            "experiment.condition" => {
                self.experiment.condition = Condition::from_name(value).ok_or_else(|| bad(
                    key,
                    value,
                    "expected bidirectional, no_feedback, oracle_teacher, or no_teacher",
                ))?;
            }
            "experiment.episodes" => self.experiment.episodes = parse_scalar(key, value)?,
            "experiment.seeds" => self.experiment.seeds = parse_seed_list(value)?,
            "experiment.eval_every" => self.experiment.eval_every = parse_scalar(key, value)?,
            "experiment.write_trace" => self.experiment.write_trace = parse_scalar(key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Structural validation of the resolved tree. Condition/teacher-kind
    /// compatibility lives in the harness resolution step.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::UnsupportedVersion { found: self.version });
        }
        self.env
            .grid()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let t = &self.teacher;
        if !(t.beta.is_finite() && t.beta > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "teacher.beta must be a positive real, got {}",
                t.beta
            )));
        }
        if !(t.temperature.is_finite() && t.temperature > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "teacher.temperature must be a positive real, got {}",
                t.temperature
            )));
        }
        if t.kind == TeacherKind::Remote && t.remote_addr.is_empty() {
            return Err(ConfigError::Invalid(
                "teacher.kind = remote requires teacher.remote_addr".to_string(),
            ));
        }
        if t.timeout_ms == 0 {
            return Err(ConfigError::Invalid(
                "teacher.timeout_ms must be positive".to_string(),
            ));
        }
        let s = &self.student;
        if !(s.alpha > 0.0 && s.alpha <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "student.alpha must lie in (0, 1], got {}",
                s.alpha
            )));
        }
        if !(0.0..=1.0).contains(&s.gamma) {
            return Err(ConfigError::Invalid(format!(
                "student.gamma must lie in [0, 1], got {}",
                s.gamma
            )));
        }
        for (name, eps) in [("epsilon_start", s.epsilon_start), ("epsilon_end", s.epsilon_end)] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(ConfigError::Invalid(format!(
                    "student.{name} must lie in [0, 1], got {eps}"
                )));
            }
        }
        let e = &self.experiment;
        if e.episodes == 0 {
            return Err(ConfigError::Invalid("experiment.episodes must be positive".to_string()));
        }
        if e.seeds.is_empty() {
            return Err(ConfigError::Invalid("experiment.seeds must be nonempty".to_string()));
        }
        let mut sorted = e.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != e.seeds.len() {
            return Err(ConfigError::Invalid("experiment.seeds must be distinct".to_string()));
        }
        if e.eval_every == 0 || e.eval_every > e.episodes {
            return Err(ConfigError::Invalid(format!(
                "experiment.eval_every must lie in [1, episodes], got {}",
                e.eval_every
            )));
        }
        Ok(())
    }
}

fn bad(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn parse_scalar<T>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| bad(key, value, &e.to_string()))
}

/// Parses a comma-separated seed list such as `1,2,3`.
pub fn parse_seed_list(value: &str) -> Result<Vec<u64>, ConfigError> {
    value
        .split(',')
        .map(|part| {
            let part = part.trim();
            part.parse::<u64>().map_err(|e| bad("experiment.seeds", part, &e.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.version, 1);
        assert_eq!(cfg.experiment.seeds.len(), 10);
    }

    #[test]
    fn toml_round_trip_preserves_everything() {
        let mut cfg = RunConfig::default();
        cfg.env.grid_width = 10;
        cfg.teacher.kind = TeacherKind::Remote;
        cfg.teacher.remote_addr = "127.0.0.1:9000".to_string();
        cfg.experiment.seeds = vec![5, 6];
        let text = cfg.to_toml();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_keeps_defaults_elsewhere() {
        let cfg = RunConfig::from_toml(
            "version = 1\n[student]\nalpha = 0.05\n",
        )
        .unwrap();
        assert_eq!(cfg.student.alpha, 0.05);
        assert_eq!(cfg.student.gamma, 0.99);
        assert_eq!(cfg.env.grid_width, 8);
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let err = RunConfig::from_toml("[studnet]\nalpha = 0.05\n").unwrap_err();
        assert!(err.to_string().contains("studnet"), "err: {err}");
    }

    #[test]
    fn overrides_take_effect_and_unknown_keys_fail() {
        let mut cfg = RunConfig::default();
        cfg.apply_assignment("student.alpha=0.05").unwrap();
        assert_eq!(cfg.student.alpha, 0.05);
        cfg.apply_assignment("experiment.seeds=4,5,6").unwrap();
        assert_eq!(cfg.experiment.seeds, vec![4, 5, 6]);
        cfg.apply_assignment("teacher.kind=remote").unwrap();
        assert_eq!(cfg.teacher.kind, TeacherKind::Remote);
        cfg.apply_assignment("experiment.write_trace=true").unwrap();
        assert!(cfg.experiment.write_trace);

        let err = cfg.apply_assignment("bogus.key=1").unwrap_err();
        assert!(err.to_string().contains("bogus.key"), "err: {err}");
        let err = cfg.apply_assignment("no_equals_sign").unwrap_err();
        assert!(matches!(err, ConfigError::BadAssignment(_)));
        let err = cfg.apply_assignment("student.alpha=fast").unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { .. }));
    }

    #[test]
    fn every_documented_key_is_settable() {
        let mut cfg = RunConfig::default();
        let values = [
            "9", "9", "50", "7", "tabular", "0.2", "0.9", "127.0.0.1:1", "100", "abort", "0.2",
            "0.95", "0.9", "0.1", "no_feedback", "100", "1,2", "10", "false",
        ];
        for (key, value) in OVERRIDE_KEYS.iter().zip(values) {
            cfg.apply_override(key, value)
                .unwrap_or_else(|e| panic!("{key}: {e}"));
        }
        cfg.validate().unwrap();
    }

    #[test]
    fn malformed_seed_lists_fail() {
        assert!(parse_seed_list("1,2,3").is_ok());
        assert!(parse_seed_list(" 1 , 2 ").is_ok());
        assert!(parse_seed_list("1,,3").is_err());
        assert!(parse_seed_list("1,two").is_err());
        assert!(parse_seed_list("").is_err());
    }

    #[test]
    fn validation_rejects_out_of_range_values() {
        let cases: &[(&str, &str)] = &[
            ("student.alpha", "0"),
            ("student.alpha", "1.5"),
            ("student.gamma", "1.1"),
            ("student.epsilon_start", "2"),
            ("teacher.beta", "0"),
            ("teacher.beta", "-1"),
            ("teacher.temperature", "0"),
            ("teacher.timeout_ms", "0"),
            ("experiment.episodes", "0"),
            ("experiment.eval_every", "0"),
            ("env.grid_width", "3"),
            ("env.max_steps", "0"),
        ];
        for (key, value) in cases {
            let mut cfg = RunConfig::default();
            cfg.apply_override(key, value).unwrap();
            assert!(cfg.validate().is_err(), "{key}={value} should not validate");
        }
        let mut cfg = RunConfig::default();
        cfg.apply_override("experiment.seeds", "1,1").unwrap();
        assert!(cfg.validate().is_err(), "duplicate seeds should not validate");
        let mut cfg = RunConfig::default();
        cfg.apply_override("experiment.eval_every", "5000").unwrap();
        assert!(cfg.validate().is_err(), "eval_every beyond episodes should fail");
        let mut cfg = RunConfig::default();
        cfg.apply_override("teacher.kind", "remote").unwrap();
        assert!(cfg.validate().is_err(), "remote kind without addr should fail");
        let cfg = RunConfig {
            version: 2,
            ..RunConfig::default()
        };
        assert!(matches!(
            cfg.validate().unwrap_err(),
            ConfigError::UnsupportedVersion { found: 2 }
        ));
    }
}
