//! Experiment configuration: a flat key-value text file plus programmatic
//! overrides, every knob validated against its documented range.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use thiserror::Error;

use crate::exectime::{ExecParams, LoadFnParams};
use crate::qwait::{QwaitConfig, StatisticMode};
use crate::simstate::{DEFAULT_LOAD_INTERVAL, DEFAULT_LOAD_WINDOW};
use crate::trace::TraceSplit;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("i/o error reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {0}: expected `key = value`")]
    MalformedLine(usize),
    #[error("unknown configuration key: {0}")]
    UnknownKey(String),
    #[error("invalid value for {key}: {value}")]
    InvalidValue { key: String, value: String },
    #[error("{0}")]
    OutOfRange(String),
}

/// How the wait predictor's statistic is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModeChoice {
    /// Pick per trace by comparing both statistics on the validation split.
    #[default]
    Auto,
    Distributions,
    FeatureSummary,
}

#[derive(Debug, Clone)]
pub struct ManagerConfig {
    /// Future point response must undercut the current one by this
    /// fraction before a job is delayed.
    pub delay_threshold: f64,
    /// Completion-chaining slack when picking the future time.
    pub future_slack: f64,
    /// System-wide estimated-runtime ceiling used when resizing jobs.
    pub max_ert_limit: i64,
}

impl Default for ManagerConfig {
    fn default() -> Self {
        ManagerConfig {
            delay_threshold: 0.30,
            future_slack: 0.05,
            max_ert_limit: 86_400,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadConfig {
    pub interval: i64,
    pub window: i64,
}

impl Default for LoadConfig {
    fn default() -> Self {
        LoadConfig {
            interval: DEFAULT_LOAD_INTERVAL,
            window: DEFAULT_LOAD_WINDOW,
        }
    }
}

/// Everything an experiment run needs besides the trace itself.
#[derive(Debug, Clone, Default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// System size override; the trace header value is used when absent.
    pub max_procs: Option<i64>,
    /// Explicit split ranges; trace-length defaults are derived when absent.
    pub split_history: Option<Range<usize>>,
    pub split_validation: Option<Range<usize>>,
    pub split_test: Option<Range<usize>>,
    pub mode: ModeChoice,
    pub qwait: QwaitConfig,
    pub exec: ExecParams,
    pub loadfn: LoadFnParams,
    pub manager: ManagerConfig,
    pub load: LoadConfig,
    /// One-at-a-time sweep grids, keyed by qwait parameter name.
    pub tune_grids: BTreeMap<String, Vec<f64>>,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse::<T>().map_err(|_| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn parse_range(key: &str, value: &str) -> Result<Range<usize>, ConfigError> {
    let parts: Vec<&str> = value.split("..").collect();
    if parts.len() != 2 {
        return Err(ConfigError::InvalidValue {
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(parse_num::<usize>(key, parts[0])?..parse_num::<usize>(key, parts[1])?)
}

impl ExperimentConfig {
    /// Apply one `key = value` assignment (file line or CLI override).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse_num(key, v)?,
            "system.max_procs" => self.max_procs = Some(parse_num(key, v)?),
            "split.history" => self.split_history = Some(parse_range(key, v)?),
            "split.validation" => self.split_validation = Some(parse_range(key, v)?),
            "split.test" => self.split_test = Some(parse_range(key, v)?),
            "qwait.mode" => {
                self.mode = match v {
                    "auto" => ModeChoice::Auto,
                    "distributions" => ModeChoice::Distributions,
                    "features" | "feature_summary" => ModeChoice::FeatureSummary,
                    _ => {
                        return Err(ConfigError::InvalidValue {
                            key: key.to_string(),
                            value: v.to_string(),
                        })
                    }
                }
            }
            "qwait.history_capacity" => self.qwait.history_capacity = parse_num(key, v)?,
            "qwait.bins" => self.qwait.bins = parse_num(key, v)?,
            "qwait.k_percent" => self.qwait.k_percent = parse_num(key, v)?,
            "qwait.avg_dist_threshold" => self.qwait.avg_dist_threshold = parse_num(key, v)?,
            "qwait.outlier_fraction" => self.qwait.outlier_fraction = parse_num(key, v)?,
            "qwait.dbscan_eps" => self.qwait.dbscan_eps = parse_num(key, v)?,
            "qwait.dbscan_min_pts" => self.qwait.dbscan_min_pts = parse_num(key, v)?,
            "qwait.sdm_window" => self.qwait.sdm_window = parse_num(key, v)?,
            "qwait.sdm_max_dist" => self.qwait.sdm_max_dist = parse_num(key, v)?,
            "qwait.ridge_lambda" => self.qwait.ridge_lambda = parse_num(key, v)?,
            "qwait.ridge_max_dist" => self.qwait.ridge_max_dist = parse_num(key, v)?,
            "qwait.wavg_neighbors" => self.qwait.wavg_neighbors = parse_num(key, v)?,
            "qwait.weight_stride" => self.qwait.weight_stride = parse_num(key, v)?,
            "exec.relevant_start" => self.exec.relevant_start = parse_num(key, v)?,
            "exec.relevant_overlap" => self.exec.relevant_overlap = parse_num(key, v)?,
            "exec.compact_frac" => self.exec.compact_frac = parse_num(key, v)?,
            "exec.merge_overlap" => self.exec.merge_overlap = parse_num(key, v)?,
            "exec.max_ranges" => self.exec.max_ranges = parse_num(key, v)?,
            "loadfn.top_k" => self.loadfn.top_k = parse_num(key, v)?,
            "loadfn.min_jobs" => self.loadfn.min_jobs = parse_num(key, v)?,
            "loadfn.min_spread" => self.loadfn.min_spread = parse_num(key, v)?,
            "loadfn.max_growth_pct" => self.loadfn.max_growth_pct = parse_num(key, v)?,
            "loadfn.bins" => self.loadfn.bins = parse_num(key, v)?,
            "manager.delay_threshold" => self.manager.delay_threshold = parse_num(key, v)?,
            "manager.future_slack" => self.manager.future_slack = parse_num(key, v)?,
            "manager.max_ert_limit" => self.manager.max_ert_limit = parse_num(key, v)?,
            "load.interval" => self.load.interval = parse_num(key, v)?,
            "load.window" => self.load.window = parse_num(key, v)?,
            _ if key.starts_with("tune.") => {
                let param = key.trim_start_matches("tune.").to_string();
                let values: Result<Vec<f64>, _> =
                    v.split(',').map(|s| parse_num::<f64>(key, s)).collect();
                self.tune_grids.insert(param, values?);
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parse a flat `key = value` file; `#` and `;` lines are comments.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::MalformedLine(i + 1))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// The effective statistic when the choice is not automatic.
    pub fn fixed_mode(&self) -> Option<StatisticMode> {
        match self.mode {
            ModeChoice::Auto => None,
            ModeChoice::Distributions => Some(StatisticMode::Distributions),
            ModeChoice::FeatureSummary => Some(StatisticMode::FeatureSummary),
        }
    }

    /// Split spec for a trace of `len` completed jobs.
    pub fn split_for(&self, len: usize) -> TraceSplit {
        let default = TraceSplit::default_for(len);
        TraceSplit {
            history: self.split_history.clone().unwrap_or(default.history),
            validation: self.split_validation.clone().unwrap_or(default.validation),
            test: self.split_test.clone().unwrap_or(default.test),
        }
    }

    /// Range checks for every documented parameter.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.qwait
            .validate()
            .map_err(|e| ConfigError::OutOfRange(e.to_string()))?;
        let checks = [
            ("exec.relevant_overlap", self.exec.relevant_overlap, 0.0, 1.0),
            ("exec.compact_frac", self.exec.compact_frac, 0.0, 1.0),
            ("exec.merge_overlap", self.exec.merge_overlap, 0.0, 1.0),
            (
                "manager.delay_threshold",
                self.manager.delay_threshold,
                0.0,
                1.0,
            ),
            ("manager.future_slack", self.manager.future_slack, 0.0, 1.0),
            ("loadfn.min_spread", self.loadfn.min_spread, 0.0, 1.0),
        ];
        for (name, value, lo, hi) in checks {
            if value < lo || value > hi {
                return Err(ConfigError::OutOfRange(format!(
                    "{name} = {value} outside [{lo}, {hi}]"
                )));
            }
        }
        if self.load.interval <= 0 || self.load.window < self.load.interval {
            return Err(ConfigError::OutOfRange(
                "load.window must be at least load.interval, both positive".into(),
            ));
        }
        if self.exec.max_ranges == 0 || self.exec.max_ranges > crate::exectime::MAX_RANGES {
            return Err(ConfigError::OutOfRange(format!(
                "exec.max_ranges = {} outside [1, {}]",
                self.exec.max_ranges,
                crate::exectime::MAX_RANGES
            )));
        }
        for (param, values) in &self.tune_grids {
            if values.is_empty() {
                return Err(ConfigError::OutOfRange(format!(
                    "tune.{param} has an empty grid"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn file_and_overrides_apply_in_order() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            "# comment\nseed = 7\nqwait.bins = 30\nsplit.test = 100..200\ntune.bins = 10,20,30"
        )
        .unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.apply_file(file.path()).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.qwait.bins, 30);
        assert_eq!(cfg.split_test, Some(100..200));
        assert_eq!(cfg.tune_grids["bins"], vec![10.0, 20.0, 30.0]);
        // CLI-style override wins by being applied later.
        cfg.set("qwait.bins", "40").unwrap();
        assert_eq!(cfg.qwait.bins, 40);
    }

    #[test]
    fn unknown_keys_and_bad_values_error() {
        let mut cfg = ExperimentConfig::default();
        assert!(matches!(
            cfg.set("nonsense.key", "1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            cfg.set("qwait.bins", "many"),
            Err(ConfigError::InvalidValue { .. })
        ));
    }

    #[test]
    fn out_of_range_parameters_fail_validation() {
        let mut cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        cfg.qwait.bins = 200;
        assert!(cfg.validate().is_err());
        cfg.qwait.bins = 20;
        cfg.manager.delay_threshold = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn split_defaults_scale_with_trace() {
        let cfg = ExperimentConfig::default();
        let s = cfg.split_for(60_000);
        assert_eq!(s.test, 20_000..60_000);
        let mut cfg2 = ExperimentConfig::default();
        cfg2.set("split.history", "0..10").unwrap();
        let s2 = cfg2.split_for(100);
        assert_eq!(s2.history, 0..10);
    }
}
