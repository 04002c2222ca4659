//! The three wait-time models: standard-deviation minimizer over distance
//! windows, ridge regression on standardized features, and kernel-weighted
//! nearest-neighbor averaging.

use crate::stats::{mean, std_dev, RidgeModel};

use super::features::JobState;
use super::neighborhood::{Neighborhood, Scored};
use super::{HistoryEntry, QwaitError};

/// Kernel weights over neighbor distances: a Gaussian with bandwidth set to
/// the median distance, so nearer jobs weigh more without the weights
/// diverging at zero distance. Degenerate bandwidths fall back to uniform.
pub fn kernel_weights(distances: &[f64]) -> Vec<f64> {
    let mut sorted = distances.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = if sorted.is_empty() {
        0.0
    } else {
        sorted[sorted.len() / 2]
    };
    if h <= 0.0 {
        return vec![1.0; distances.len()];
    }
    distances
        .iter()
        .map(|d| (-(d * d) / (h * h)).exp())
        .collect()
}

fn kernel_mean(jobs: &[Scored]) -> f64 {
    let distances: Vec<f64> = jobs.iter().map(|s| s.distance).collect();
    let weights = kernel_weights(&distances);
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return mean(&jobs.iter().map(|s| s.wait).collect::<Vec<_>>());
    }
    jobs.iter()
        .zip(&weights)
        .map(|(s, w)| s.wait * w)
        .sum::<f64>()
        / total
}

#[derive(Debug, Clone, Copy)]
pub struct SdmParams {
    /// Width of each distance window, in distance units.
    pub window_size: f64,
    /// Windows starting at or beyond this distance are not considered.
    pub max_dist_threshold: f64,
}

/// Standard-deviation minimizer: split the distance axis into fixed-width
/// windows, keep those near enough to the target, pick the one whose wait
/// times have the smallest standard deviation (ties: smaller mean distance,
/// then smaller window index), and return the kernel-weighted mean wait of
/// its jobs.
pub fn predict_sdm(neighborhood: &Neighborhood, params: &SdmParams) -> Result<f64, QwaitError> {
    assert!(params.window_size > 0.0);
    let windows = (1.0 / params.window_size).ceil() as usize;
    let mut buckets: Vec<Vec<Scored>> = vec![Vec::new(); windows.max(1)];
    for s in &neighborhood.scored {
        // The nudge keeps distances that sit exactly on a window boundary
        // from flooring into the lower window through rounding error.
        let idx = ((s.distance / params.window_size + 1e-9).floor() as usize)
            .min(buckets.len() - 1);
        buckets[idx].push(*s);
    }

    let mut best: Option<(f64, f64, usize)> = None; // (std, mean dist, index)
    for (idx, bucket) in buckets.iter().enumerate() {
        if bucket.is_empty() {
            continue;
        }
        if idx as f64 * params.window_size >= params.max_dist_threshold {
            break;
        }
        let waits: Vec<f64> = bucket.iter().map(|s| s.wait).collect();
        let dists: Vec<f64> = bucket.iter().map(|s| s.distance).collect();
        let key = (std_dev(&waits), mean(&dists), idx);
        let better = match &best {
            None => true,
            Some(b) => key < *b,
        };
        if better {
            best = Some(key);
        }
    }
    let (_, _, idx) = best.ok_or(QwaitError::SdmNoWindow)?;
    Ok(kernel_mean(&buckets[idx]))
}

#[derive(Debug, Clone, Copy)]
pub struct RidgeParams {
    pub lambda: f64,
    /// Only history jobs within this distance feed the regression.
    pub max_dist: f64,
}

/// Minimum number of history rows before the regression is attempted; with
/// sixteen features anything less is hopelessly underdetermined.
pub const RIDGE_MIN_ROWS: usize = 17;

/// Ridge regression over the near history. The result may be negative; the
/// dispatcher hands such predictions to the weighted average.
pub fn predict_ridge(
    history: &[HistoryEntry],
    neighborhood: &Neighborhood,
    target: &JobState,
    params: &RidgeParams,
) -> Result<f64, QwaitError> {
    let selected: Vec<&Scored> = neighborhood
        .scored
        .iter()
        .filter(|s| s.distance <= params.max_dist)
        .collect();
    if selected.len() < RIDGE_MIN_ROWS {
        return Err(QwaitError::NotEnoughHistory {
            needed: RIDGE_MIN_ROWS,
            have: selected.len(),
        });
    }
    let rows: Vec<Vec<f64>> = selected
        .iter()
        .map(|s| history[s.entry].state.features.0.to_vec())
        .collect();
    let ys: Vec<f64> = selected.iter().map(|s| s.wait).collect();
    let model = RidgeModel::fit(&rows, &ys, params.lambda).ok_or(QwaitError::SingularSystem)?;
    Ok(model.predict(&target.features.0))
}

/// Kernel-weighted mean wait of the k nearest history jobs; k is clamped
/// to the history size.
pub fn predict_weighted_average(neighborhood: &Neighborhood, k: usize) -> Result<f64, QwaitError> {
    if neighborhood.is_empty() {
        return Err(QwaitError::ColdStart);
    }
    let k = k.max(1).min(neighborhood.len());
    Ok(kernel_mean(&neighborhood.scored[..k]))
}
