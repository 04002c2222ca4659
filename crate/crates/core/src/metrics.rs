//! Evaluation metrics: absolute errors, wait-class breakdowns, and range
//! success/coverage against the min-max baseline.

use thiserror::Error;

use crate::exectime::{ResponseRangeSet, TimeRange};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("prediction and actual series have different lengths ({preds} vs {actuals})")]
    LengthMismatch { preds: usize, actuals: usize },
}

/// Mean absolute error in seconds.
pub fn aae(preds: &[f64], actuals: &[f64]) -> Result<f64, MetricsError> {
    if preds.len() != actuals.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            actuals: actuals.len(),
        });
    }
    if preds.is_empty() {
        return Ok(0.0);
    }
    Ok(preds
        .iter()
        .zip(actuals)
        .map(|(p, a)| (p - a).abs())
        .sum::<f64>()
        / preds.len() as f64)
}

/// Mean of per-job absolute error divided by that job's response time.
pub fn scaled_aae(preds: &[f64], actuals: &[f64], responses: &[f64]) -> Result<f64, MetricsError> {
    if preds.len() != actuals.len() || preds.len() != responses.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            actuals: actuals.len().min(responses.len()),
        });
    }
    if preds.is_empty() {
        return Ok(0.0);
    }
    Ok(preds
        .iter()
        .zip(actuals)
        .zip(responses)
        .map(|((p, a), r)| (p - a).abs() / r)
        .sum::<f64>()
        / preds.len() as f64)
}

/// The five decade classes actual waits are partitioned into.
pub const WAIT_CLASS_EDGES: [f64; 4] = [100.0, 1_000.0, 10_000.0, 100_000.0];
pub const WAIT_CLASS_LABELS: [&str; 5] = [
    "0-100s",
    "100-1000s",
    "1000-10000s",
    "10000-100000s",
    ">100000s",
];

pub fn wait_class(actual: f64) -> usize {
    WAIT_CLASS_EDGES.iter().position(|&e| actual < e).unwrap_or(4)
}

/// Mean absolute error per wait class; `None` for unpopulated classes.
pub fn class_errors(preds: &[f64], actuals: &[f64]) -> [Option<f64>; 5] {
    let mut sums = [0.0; 5];
    let mut counts = [0usize; 5];
    for (p, a) in preds.iter().zip(actuals) {
        let c = wait_class(*a);
        sums[c] += (p - a).abs();
        counts[c] += 1;
    }
    let mut out = [None; 5];
    for i in 0..5 {
        if counts[i] > 0 {
            out[i] = Some(sums[i] / counts[i] as f64);
        }
    }
    out
}

/// Success rate and coverage of predicted range sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeQuality {
    /// Percentage of jobs whose actual execution fell inside the set.
    pub success_rate: f64,
    /// Mean per-job ratio of set length to baseline length, as a percent.
    pub coverage: f64,
    /// Jobs excluded from coverage because their baseline had zero length.
    pub coverage_excluded: usize,
}

/// Evaluate range sets against actual executions and min-max baselines.
///
/// Coverage is the per-job ratio of total range-set length to the baseline
/// range length, averaged over jobs and expressed as a percentage;
/// zero-length baselines are excluded from the average but counted.
pub fn success_and_coverage(
    rangesets: &[ResponseRangeSet],
    actuals: &[f64],
    baselines: &[TimeRange],
) -> Result<RangeQuality, MetricsError> {
    if rangesets.len() != actuals.len() || rangesets.len() != baselines.len() {
        return Err(MetricsError::LengthMismatch {
            preds: rangesets.len(),
            actuals: actuals.len().min(baselines.len()),
        });
    }
    let mut successes = 0usize;
    let mut ratio_sum = 0.0;
    let mut ratio_count = 0usize;
    let mut excluded = 0usize;
    for ((rs, &actual), baseline) in rangesets.iter().zip(actuals).zip(baselines) {
        if rs.contains(actual) {
            successes += 1;
        }
        let blen = baseline.len();
        if blen > 0.0 {
            ratio_sum += rs.total_length() / blen;
            ratio_count += 1;
        } else {
            excluded += 1;
        }
    }
    let n = rangesets.len().max(1);
    Ok(RangeQuality {
        success_rate: 100.0 * successes as f64 / n as f64,
        coverage: if ratio_count > 0 {
            100.0 * ratio_sum / ratio_count as f64
        } else {
            0.0
        },
        coverage_excluded: excluded,
    })
}

/// CPU-hour classes used in the per-size response breakdowns.
pub const CPU_HOUR_CLASS_EDGES: [f64; 4] = [1.0, 10.0, 100.0, 1_000.0];
pub const CPU_HOUR_CLASS_LABELS: [&str; 5] =
    ["0-1", "1-10", "10-100", "100-1000", ">1000"];

pub fn cpu_hour_class(cpu_hours: f64) -> usize {
    CPU_HOUR_CLASS_EDGES
        .iter()
        .position(|&e| cpu_hours < e)
        .unwrap_or(4)
}
