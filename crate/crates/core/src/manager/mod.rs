//! Prediction-driven resource management: request-size molding via
//! gain-scored response range sets, and delayed submissions through a hold
//! queue released at a predicted lighter-load future time.

mod hold;

pub use hold::{HoldQueue, Release};

use rand::Rng;

use crate::exectime::{point_from_rangeset, ResponseRangeSet};

/// One molding candidate: a request size the user has used before, its
/// predicted queue wait and the response range set those predictions imply.
#[derive(Debug, Clone)]
pub struct CandidateEvaluation {
    pub req_size: i64,
    pub qwait: f64,
    pub response: ResponseRangeSet,
    pub score: f64,
}

/// Gain score of a range set whose ranges are normalized into [0, 1].
///
/// Integrating the gain `1 - t` over the ranges and dividing by their total
/// length rewards sets concentrated at low response times without letting
/// many long high-response ranges accumulate score. For a single range this
/// is one minus its midpoint; an all-degenerate set scores one minus its
/// probability-weighted point value.
pub fn score_rangeset(rs: &ResponseRangeSet) -> f64 {
    let total_len = rs.total_length();
    if total_len > 0.0 {
        let gain: f64 = rs
            .ranges
            .iter()
            .map(|r| r.range.len() * (1.0 - r.range.midpoint()))
            .sum();
        (gain / total_len).max(0.0)
    } else {
        (1.0 - point_from_rangeset(rs)).max(0.0)
    }
}

/// Score candidates against each other: every range is normalized by the
/// largest upper response bound across the candidate set, scores are
/// computed, and the best candidate (ties: smaller request size) is chosen.
/// Returns the scored candidates and the index of the chosen one.
pub fn evaluate_candidates(
    mut candidates: Vec<CandidateEvaluation>,
) -> (Vec<CandidateEvaluation>, Option<usize>) {
    if candidates.is_empty() {
        return (candidates, None);
    }
    let norm = candidates
        .iter()
        .map(|c| c.response.max_upper())
        .fold(0.0, f64::max);
    for c in &mut candidates {
        let scaled = if norm > 0.0 {
            ResponseRangeSet {
                ranges: c
                    .response
                    .ranges
                    .iter()
                    .map(|r| crate::exectime::WeightedRange {
                        range: crate::exectime::TimeRange::new(
                            r.range.lo / norm,
                            r.range.hi / norm,
                        ),
                        probability: r.probability,
                    })
                    .collect(),
            }
        } else {
            c.response.clone()
        };
        c.score = score_rangeset(&scaled);
    }
    let mut best = 0usize;
    for i in 1..candidates.len() {
        let better = candidates[i].score > candidates[best].score
            || (candidates[i].score == candidates[best].score
                && candidates[i].req_size < candidates[best].req_size);
        if better {
            best = i;
        }
    }
    (candidates, Some(best))
}

/// Outcome of a molding decision.
#[derive(Debug, Clone)]
pub enum MoldDecision {
    /// No usable history; the submission passes through untouched.
    PassThrough,
    /// The chosen candidate plus everything that was compared.
    Chosen {
        chosen: usize,
        candidates: Vec<CandidateEvaluation>,
    },
}

impl MoldDecision {
    pub fn chosen_req_size(&self, original: i64) -> i64 {
        match self {
            MoldDecision::PassThrough => original,
            MoldDecision::Chosen { chosen, candidates } => candidates[*chosen].req_size,
        }
    }

    pub fn chosen_candidate(&self) -> Option<&CandidateEvaluation> {
        match self {
            MoldDecision::PassThrough => None,
            MoldDecision::Chosen { chosen, candidates } => Some(&candidates[*chosen]),
        }
    }
}

/// Mold a job: evaluate each request size the user has used before with
/// the supplied predictor and pick the highest-scoring response range set.
///
/// `evaluate` returns the predicted queue wait and execution-time range set
/// for one candidate size, or `None` when predictions for it cold-start;
/// the execution ranges are shifted by the predicted wait before scoring.
/// Users without history pass through untouched.
pub fn mold_job<F>(candidate_sizes: &[i64], mut evaluate: F) -> MoldDecision
where
    F: FnMut(i64) -> Option<(f64, ResponseRangeSet)>,
{
    let mut evaluated = Vec::with_capacity(candidate_sizes.len());
    for &req in candidate_sizes {
        if let Some((qwait, exec_ranges)) = evaluate(req) {
            evaluated.push(CandidateEvaluation {
                req_size: req,
                qwait,
                response: exec_ranges.shifted(qwait),
                score: 0.0,
            });
        }
    }
    match evaluate_candidates(evaluated) {
        (candidates, Some(chosen)) => MoldDecision::Chosen { chosen, candidates },
        _ => MoldDecision::PassThrough,
    }
}

/// Estimated runtime for a resized submission.
///
/// Shrinking the request size is expected to lengthen the run: the estimate
/// becomes the smallest of the user's largest previous estimate at the new
/// size and the system limit that still exceeds the original estimate (the
/// limit when neither does). Growing keeps the original estimate.
pub fn set_estimated_runtime(
    original_ert: i64,
    changed_size: i64,
    original_size: i64,
    max_previous: Option<i64>,
    max_limit: i64,
) -> i64 {
    if changed_size >= original_size {
        return original_ert;
    }
    let mut candidates: Vec<i64> = Vec::with_capacity(2);
    if let Some(mp) = max_previous {
        candidates.push(mp);
    }
    candidates.push(max_limit);
    candidates
        .into_iter()
        .filter(|&c| c > original_ert)
        .min()
        .unwrap_or(max_limit)
}

/// Roulette draw over the user's previous actual runtimes at the chosen
/// size: uniform over history entries, so repeated values win
/// proportionally to their frequency.
pub fn sample_actual_runtime<R: Rng>(history: &[i64], rng: &mut R) -> Option<i64> {
    if history.is_empty() {
        return None;
    }
    Some(history[rng.gen_range(0..history.len())])
}

/// Future submission time: the earliest predicted completion among the
/// running jobs, chained forward while another completion lands within
/// `slack` of it. With nothing running the current time comes back (no
/// delay is possible).
pub fn find_future_time(predicted_completions: &[i64], now: i64, slack: f64) -> i64 {
    let mut completions: Vec<i64> = predicted_completions
        .iter()
        .map(|&c| c.max(now))
        .collect();
    completions.sort_unstable();
    let Some(&first) = completions.first() else {
        return now;
    };
    let mut t = first;
    for &c in &completions[1..] {
        if c as f64 <= (1.0 + slack) * t as f64 {
            t = c;
        } else {
            break;
        }
    }
    t
}

/// Whether to submit now or hold until the future time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayDecision {
    SubmitNow,
    DelayTo(i64),
}

/// Delay exactly when the future point response undercuts the current one
/// by more than the threshold.
pub fn decide_delay(
    rs_cur: &ResponseRangeSet,
    rs_future: &ResponseRangeSet,
    future_time: i64,
    threshold: f64,
) -> DelayDecision {
    let cur = point_from_rangeset(rs_cur);
    let future = point_from_rangeset(rs_future);
    if future < (1.0 - threshold) * cur {
        DelayDecision::DelayTo(future_time)
    } else {
        DelayDecision::SubmitNow
    }
}
