//! Experiment orchestration: prediction runs, policy simulations, tuning
//! sweeps and report emission.

mod managed;
mod predict;
mod tune;

pub use managed::{
    decisions_csv, managed_rows_csv, run_managed, DecisionRow, ManagedReport, ManagedRow, Policy,
    ReleaseRow,
};
pub use predict::{
    exec_rows_csv, exec_samples, pack_rangeset, run_predict_exec, run_predict_wait,
    run_predict_wait_scored, state_dump_csv, submission_states, unpack_rangeset, wait_rows_csv,
    ExecReport, ExecRow, WaitReport, WaitRow,
};
pub use tune::{sweep_csv, tune, SweepRow, TuneReport};

use std::path::Path;

use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::trace::{self, JobRecord, Trace};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Trace(#[from] trace::TraceError),
    #[error(transparent)]
    SimState(#[from] crate::simstate::SimStateError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A trace loaded and admitted for experiments.
#[derive(Debug, Clone)]
pub struct PreparedTrace {
    pub jobs: Vec<JobRecord>,
    pub procs: i64,
    pub rejections: Vec<trace::Rejection>,
}

/// Parse, filter and size-check a trace file.
pub fn prepare_trace(path: &Path, cfg: &ExperimentConfig) -> Result<PreparedTrace, ExperimentError> {
    let parsed: Trace = trace::parse_swf(path)?;
    prepare_parsed(parsed, cfg)
}

pub fn prepare_parsed(
    parsed: Trace,
    cfg: &ExperimentConfig,
) -> Result<PreparedTrace, ExperimentError> {
    let procs = cfg
        .max_procs
        .or(parsed.meta.max_procs)
        .ok_or(trace::TraceError::MissingMaxProcs)?;
    let (jobs, rejections) = trace::filter_completed(&parsed.jobs);
    Ok(PreparedTrace {
        jobs,
        procs,
        rejections,
    })
}

/// Convenience wrapper: write a file, creating parent directories.
pub fn write_report(dir: &Path, name: &str, contents: &str) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

/// Average-time comparison rows (minutes) between a baseline run and a
/// managed run, in the shape of the policy summary tables.
pub fn policy_summary_csv(baseline: &ManagedReport, managed: &ManagedReport) -> String {
    let minutes = |s: f64| s / 60.0;
    let mut out = String::from(
        "run,avg_qwait_minutes,avg_exec_minutes,avg_response_minutes,utilization_pct\n",
    );
    for r in [baseline, managed] {
        out.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{:.2}\n",
            r.policy.as_str(),
            minutes(r.avg_qwait),
            minutes(r.avg_exec),
            minutes(r.avg_response),
            r.utilization
        ));
    }
    out
}

/// Wait-prediction accuracy summary (hours, dimensionless) in the shape of
/// the accuracy tables.
pub fn wait_summary_csv(report: &WaitReport) -> String {
    let mut out = String::from("mode,predictions,aae_hours,scaled_aae\n");
    out.push_str(&format!(
        "{},{},{:.6},{:.6}\n",
        match report.mode {
            crate::qwait::StatisticMode::Distributions => "distributions",
            crate::qwait::StatisticMode::FeatureSummary => "feature_summary",
        },
        report.rows.len(),
        report.aae / 3600.0,
        report.scaled_aae
    ));
    out
}

pub fn wait_class_csv(report: &WaitReport) -> String {
    let mut out = String::from("class,aae_seconds\n");
    for (label, err) in crate::metrics::WAIT_CLASS_LABELS
        .iter()
        .zip(&report.class_aae)
    {
        out.push_str(&format!(
            "{},{}\n",
            label,
            err.map_or_else(|| "-".into(), |e| format!("{e:.3}"))
        ));
    }
    out
}

pub fn exec_summary_csv(report: &ExecReport) -> String {
    let mut out =
        String::from("predictions,success_rate_pct,coverage_pct,point_aae_minutes,cold_starts\n");
    out.push_str(&format!(
        "{},{:.3},{:.3},{:.4},{}\n",
        report.rows.len(),
        report.quality.success_rate,
        report.quality.coverage,
        report.point_aae / 60.0,
        report.cold_starts
    ));
    out
}

pub fn class_response_csv(report: &ManagedReport) -> String {
    let mut out = String::from("cpu_hour_class,avg_response_seconds\n");
    for (label, value) in crate::metrics::CPU_HOUR_CLASS_LABELS
        .iter()
        .zip(&report.class_response)
    {
        out.push_str(&format!(
            "{},{}\n",
            label,
            value.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
        ));
    }
    out
}

pub fn load_series_csv(report: &ManagedReport) -> String {
    let mut out = String::from("time,load\n");
    for (t, l) in &report.load_series {
        out.push_str(&format!("{t},{l:.6}\n"));
    }
    out
}

pub fn releases_csv(report: &ManagedReport) -> String {
    let mut out = String::from("job_id,original_submit,released_at\n");
    for r in &report.releases {
        out.push_str(&format!(
            "{},{},{}\n",
            r.job_id, r.original_submit, r.released_at
        ));
    }
    out
}
