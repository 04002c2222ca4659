//! Correlation-derived weights: the absolute Spearman rank correlation of
//! each feature (and of each histogram's L2 norm) with the observed wait
//! times of the history jobs.

use crate::stats::spearman;

use super::features::{DISTRIBUTION_COUNT, FEATURE_COUNT};
use super::{HistoryEntry, QwaitError};

/// Nonnegative per-feature and per-distribution weights in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub feature: [f64; FEATURE_COUNT],
    pub distribution: [f64; DISTRIBUTION_COUNT],
}

impl WeightVector {
    pub fn uniform() -> Self {
        WeightVector {
            feature: [1.0; FEATURE_COUNT],
            distribution: [1.0; DISTRIBUTION_COUNT],
        }
    }

    /// Sum used by the distribution-based distance: the two job-attribute
    /// weights plus the six distribution weights.
    pub fn distribution_sum(&self) -> f64 {
        self.feature[0] + self.feature[1] + self.distribution.iter().sum::<f64>()
    }

    /// Sum used by the feature-summary distance: all sixteen feature
    /// weights.
    pub fn feature_sum(&self) -> f64 {
        self.feature.iter().sum()
    }

    pub fn is_all_zero(&self) -> bool {
        self.feature.iter().all(|&w| w == 0.0) && self.distribution.iter().all(|&w| w == 0.0)
    }
}

/// Recompute weights from the current history. Constant series have an
/// undefined correlation and get weight zero.
pub fn compute_weights(history: &[HistoryEntry]) -> Result<WeightVector, QwaitError> {
    if history.len() < 3 {
        return Err(QwaitError::NotEnoughHistory {
            needed: 3,
            have: history.len(),
        });
    }
    let waits: Vec<f64> = history.iter().map(|e| e.wait).collect();
    let mut feature = [0.0; FEATURE_COUNT];
    for (i, w) in feature.iter_mut().enumerate() {
        let series: Vec<f64> = history.iter().map(|e| e.state.features.0[i]).collect();
        *w = spearman(&series, &waits).map_or(0.0, f64::abs);
    }
    let mut distribution = [0.0; DISTRIBUTION_COUNT];
    for (i, w) in distribution.iter_mut().enumerate() {
        let series: Vec<f64> = history.iter().map(|e| e.histogram_norms[i]).collect();
        *w = spearman(&series, &waits).map_or(0.0, f64::abs);
    }
    Ok(WeightVector {
        feature,
        distribution,
    })
}
