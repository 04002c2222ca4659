//! Execution-time ranges: per-history-job candidate ranges, overlap
//! merging into a disjoint set, and history-based probabilities.

use super::{ExecError, ExecSample, LoadFunction};

/// A closed time interval in seconds, `0 <= lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeRange {
    pub lo: f64,
    pub hi: f64,
}

impl TimeRange {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi && lo >= 0.0);
        TimeRange { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// One range with its probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedRange {
    pub range: TimeRange,
    pub probability: f64,
}

/// Disjoint, lo-sorted ranges whose probabilities sum to one. Holds
/// predicted execution times, or response times once a queue-wait shift is
/// applied.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResponseRangeSet {
    pub ranges: Vec<WeightedRange>,
}

pub const MAX_RANGES: usize = 25;

impl ResponseRangeSet {
    pub fn total_length(&self) -> f64 {
        self.ranges.iter().map(|r| r.range.len()).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ranges.iter().any(|r| r.range.contains(x))
    }

    pub fn max_upper(&self) -> f64 {
        self.ranges.iter().map(|r| r.range.hi).fold(0.0, f64::max)
    }

    /// Shift every range by a constant offset (adding a predicted queue
    /// wait turns execution times into response times).
    pub fn shifted(&self, offset: f64) -> ResponseRangeSet {
        ResponseRangeSet {
            ranges: self
                .ranges
                .iter()
                .map(|r| WeightedRange {
                    range: TimeRange::new((r.range.lo + offset).max(0.0), (r.range.hi + offset).max(0.0)),
                    probability: r.probability,
                })
                .collect(),
        }
    }

    /// Check the structural invariants; returns the violation description.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.ranges.len() > MAX_RANGES {
            return Err(format!("{} ranges exceed the cap", self.ranges.len()));
        }
        let mut sum = 0.0;
        for (i, r) in self.ranges.iter().enumerate() {
            if r.range.lo > r.range.hi || r.range.lo < 0.0 {
                return Err(format!("range {i} is malformed: {:?}", r.range));
            }
            if !(0.0..=1.0 + 1e-9).contains(&r.probability) {
                return Err(format!("probability {i} out of range: {}", r.probability));
            }
            if i > 0 && self.ranges[i - 1].range.hi > r.range.lo {
                return Err(format!(
                    "ranges {} and {i} overlap: {:?} then {:?}",
                    i - 1,
                    self.ranges[i - 1].range,
                    r.range
                ));
            }
            sum += r.probability;
        }
        if !self.ranges.is_empty() && (sum - 1.0).abs() > 1e-9 {
            return Err(format!("probabilities sum to {sum}"));
        }
        Ok(())
    }
}

/// Weighted mean of the range midpoints: the point estimate a range set
/// collapses to.
pub fn point_from_rangeset(rs: &ResponseRangeSet) -> f64 {
    rs.ranges
        .iter()
        .map(|r| r.probability * r.range.midpoint())
        .sum()
}

/// The smallest recent suffix of a tuple's history whose execution-time
/// span covers at least `overlap_target` of the whole history's span.
/// Starts from the most recent `start_count` jobs and grows backwards.
pub fn select_relevant_history<'a>(
    history: &'a [ExecSample],
    start_count: usize,
    overlap_target: f64,
) -> &'a [ExecSample] {
    if history.is_empty() {
        return history;
    }
    let span = |s: &[ExecSample]| -> f64 {
        let lo = s.iter().map(|e| e.exec).fold(f64::INFINITY, f64::min);
        let hi = s.iter().map(|e| e.exec).fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    let full = span(history);
    let mut from = history.len().saturating_sub(start_count.max(1));
    loop {
        let suffix = &history[from..];
        let covered = if full > 0.0 { span(suffix) / full } else { 1.0 };
        if covered >= overlap_target || from == 0 {
            return suffix;
        }
        from -= 1;
    }
}

/// Candidate execution-time ranges, one per relevant history job.
///
/// Every load function is anchored to the history job (shifted so it
/// reproduces that job's actual execution at its actual load) and then
/// evaluated at the predicted load; the spread across functions becomes the
/// job's range. Without any function the job's own execution time stands
/// (a zero-slope trend). Ranges are floored at zero and compacted
/// symmetrically about their midpoint to at most `compact_frac` of it.
pub fn predict_ranges(
    relevant: &[ExecSample],
    functions: &[LoadFunction],
    predicted_load: f64,
    compact_frac: f64,
) -> Vec<TimeRange> {
    let mut out = Vec::with_capacity(relevant.len());
    for h in relevant {
        let (mut lo, mut hi) = if functions.is_empty() {
            (h.exec, h.exec)
        } else {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for g in functions {
                let candidate = g.eval(predicted_load) + (h.exec - g.eval(h.load));
                lo = lo.min(candidate);
                hi = hi.max(candidate);
            }
            (lo, hi)
        };
        lo = lo.max(0.0);
        hi = hi.max(lo);
        let mid = (lo + hi) / 2.0;
        if hi - lo > compact_frac * mid {
            let half = compact_frac * mid / 2.0;
            lo = mid - half;
            hi = mid + half;
        }
        out.push(TimeRange::new(lo, hi));
    }
    out
}

/// Merge ranges into a disjoint, lo-sorted set.
///
/// Ranges are processed in increasing lo order against a stack: a range
/// overlapping the stack top by at least `overlap_threshold` of the shorter
/// range's length is merged into it; a smaller overlap truncates the range
/// to begin where the top ends. Point ranges touching the top count as
/// fully overlapped. A truncated top starts past lows that are still to
/// come, so incoming ranges are first clipped to the part not already
/// covered by earlier output.
pub fn merge_ranges(mut ranges: Vec<TimeRange>, overlap_threshold: f64) -> Vec<TimeRange> {
    ranges.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap().then(a.hi.partial_cmp(&b.hi).unwrap()));
    let mut stack: Vec<TimeRange> = Vec::with_capacity(ranges.len());
    for r in ranges {
        let Some(top) = stack.last_mut() else {
            stack.push(r);
            continue;
        };
        if r.hi < top.lo {
            // Entirely inside the previous range's span (only reachable
            // behind a truncated top): merging it changes nothing.
            continue;
        }
        let r = TimeRange::new(r.lo.max(top.lo), r.hi);
        if r.lo > top.hi {
            stack.push(r);
            continue;
        }
        let inter = top.hi.min(r.hi) - r.lo;
        let shorter = top.len().min(r.len());
        let pct = if shorter > 0.0 { inter / shorter } else { 1.0 };
        if pct >= overlap_threshold {
            top.hi = top.hi.max(r.hi);
        } else {
            // Below-threshold overlap: keep both, truncated to disjointness.
            let lo = top.hi;
            stack.push(TimeRange::new(lo, r.hi.max(lo)));
        }
    }
    stack
}

/// Probabilities from tuple history: each range's share of the history
/// executions it contains. Ranges matching nothing share a fixed 0.1 while
/// the matched ones are rescaled to 0.9; a set with no matches at all
/// falls back to uniform. At most `max_ranges` highest-probability ranges
/// survive, renormalized.
pub fn assign_probabilities(
    ranges: Vec<TimeRange>,
    history_execs: &[f64],
    max_ranges: usize,
) -> ResponseRangeSet {
    if ranges.is_empty() {
        return ResponseRangeSet::default();
    }
    let mut counts = vec![0usize; ranges.len()];
    for &x in history_execs {
        // Disjoint interiors may still share a boundary point; the first
        // containing range claims the job.
        if let Some(i) = ranges.iter().position(|r| r.contains(x)) {
            counts[i] += 1;
        }
    }
    let matched_total: usize = counts.iter().sum();
    let any_unmatched = counts.iter().any(|&c| c == 0);
    let mut weighted: Vec<WeightedRange> = ranges
        .iter()
        .zip(&counts)
        .map(|(&range, &c)| {
            let probability = if matched_total == 0 {
                1.0 / ranges.len() as f64
            } else if any_unmatched {
                if c == 0 {
                    0.1 / counts.iter().filter(|&&k| k == 0).count() as f64
                } else {
                    0.9 * c as f64 / matched_total as f64
                }
            } else {
                c as f64 / matched_total as f64
            };
            WeightedRange { range, probability }
        })
        .collect();

    if weighted.len() > max_ranges {
        // Keep the most probable ranges; ties keep the earlier range.
        let mut order: Vec<usize> = (0..weighted.len()).collect();
        order.sort_by(|&a, &b| {
            weighted[b]
                .probability
                .partial_cmp(&weighted[a].probability)
                .unwrap()
                .then(a.cmp(&b))
        });
        order.truncate(max_ranges);
        order.sort_unstable();
        weighted = order.into_iter().map(|i| weighted[i]).collect();
        let total: f64 = weighted.iter().map(|w| w.probability).sum();
        if total > 0.0 {
            for w in &mut weighted {
                w.probability /= total;
            }
        }
    }
    ResponseRangeSet { ranges: weighted }
}

/// End-to-end range-set prediction for one target job.
pub fn predict_rangeset(
    key_history: &[ExecSample],
    functions: &[LoadFunction],
    predicted_load: f64,
    params: &super::ExecParams,
) -> Result<ResponseRangeSet, ExecError> {
    if key_history.is_empty() {
        return Err(ExecError::ColdStart);
    }
    let relevant = select_relevant_history(
        key_history,
        params.relevant_start,
        params.relevant_overlap,
    );
    let ranges = predict_ranges(relevant, functions, predicted_load, params.compact_frac);
    let merged = merge_ranges(ranges, params.merge_overlap);
    let execs: Vec<f64> = key_history.iter().map(|e| e.exec).collect();
    Ok(assign_probabilities(merged, &execs, params.max_ranges))
}

/// The plain min-max range over the tuple's history, the baseline the
/// range sets are judged against.
pub fn baseline_range(key_history: &[ExecSample]) -> Result<TimeRange, ExecError> {
    if key_history.is_empty() {
        return Err(ExecError::ColdStart);
    }
    let lo = key_history.iter().map(|e| e.exec).fold(f64::INFINITY, f64::min);
    let hi = key_history
        .iter()
        .map(|e| e.exec)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(TimeRange::new(lo, hi))
}
