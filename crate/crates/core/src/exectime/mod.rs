//! Load-aware execution-time prediction.
//!
//! The observed impact of system load on execution time is captured as
//! per-tuple linear load functions. For a target job, the functions are
//! anchored to each job in its relevant history and evaluated at the
//! predicted load, producing a disjoint, probability-weighted set of
//! execution-time ranges.

mod loadfn;
mod ranges;
mod subseq;

pub use loadfn::{
    build_load_functions, load_functions_csv, LoadFnParams, LoadFunction, LoadFunctionSet,
    SkipReason,
};
pub use ranges::{
    assign_probabilities, baseline_range, merge_ranges, point_from_rangeset, predict_ranges,
    predict_rangeset, select_relevant_history, ResponseRangeSet, TimeRange, WeightedRange,
    MAX_RANGES,
};
pub use subseq::longest_nondecreasing_subsequence;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::trace::JobRecord;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("no execution history for this tuple; prediction cold start")]
    ColdStart,
}

/// The submission tuple execution history is grouped by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TupleKey {
    pub user_id: i64,
    pub req_size: i64,
    pub queue_id: i64,
    pub group_id: i64,
}

impl TupleKey {
    pub fn of(job: &JobRecord) -> Self {
        TupleKey {
            user_id: job.user_id,
            req_size: job.req_size,
            queue_id: job.queue_id,
            group_id: job.group_id,
        }
    }

    /// Same tuple with a different request size (molding candidates).
    pub fn with_req_size(&self, req_size: i64) -> Self {
        TupleKey { req_size, ..*self }
    }
}

/// One completed execution of a tuple: when it happened, the load it
/// observed, and how long it ran.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecSample {
    /// Chronological key (submission or completion time).
    pub at: i64,
    /// Load the execution observed from other jobs.
    pub load: f64,
    /// Actual execution seconds.
    pub exec: f64,
}

/// Range-set prediction knobs.
#[derive(Debug, Clone)]
pub struct ExecParams {
    /// Initial relevant-history suffix size.
    pub relevant_start: usize,
    /// Required execution-span coverage of the full history.
    pub relevant_overlap: f64,
    /// Per-range width cap as a fraction of the range midpoint.
    pub compact_frac: f64,
    /// Overlap fraction (of the shorter range) that triggers a merge.
    pub merge_overlap: f64,
    pub max_ranges: usize,
}

impl Default for ExecParams {
    fn default() -> Self {
        ExecParams {
            relevant_start: 10,
            relevant_overlap: 0.9,
            compact_frac: 0.2,
            merge_overlap: 0.5,
            max_ranges: MAX_RANGES,
        }
    }
}

/// Chronological execution history per tuple.
#[derive(Debug, Clone, Default)]
pub struct ExecHistory {
    per_key: BTreeMap<TupleKey, Vec<ExecSample>>,
}

impl ExecHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: TupleKey, sample: ExecSample) {
        self.per_key.entry(key).or_default().push(sample);
    }

    pub fn for_key(&self, key: &TupleKey) -> &[ExecSample] {
        self.per_key.get(key).map_or(&[], |v| v.as_slice())
    }

    pub fn keys(&self) -> impl Iterator<Item = &TupleKey> {
        self.per_key.keys()
    }

    pub fn map(&self) -> &BTreeMap<TupleKey, Vec<ExecSample>> {
        &self.per_key
    }

    /// Distinct request sizes this user has history for, ascending.
    pub fn req_sizes_of_user(&self, user_id: i64) -> Vec<i64> {
        let mut sizes: Vec<i64> = self
            .per_key
            .iter()
            .filter(|(k, v)| k.user_id == user_id && !v.is_empty())
            .map(|(k, _)| k.req_size)
            .collect();
        sizes.dedup();
        sizes
    }
}
