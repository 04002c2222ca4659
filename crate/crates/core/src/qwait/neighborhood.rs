//! Job-to-job distances and the cluster-structure classification that
//! drives model dispatch.

use crate::cluster;

use super::features::{FeatureVector, JobState, DISTRIBUTION_COUNT, FEATURE_COUNT};
use super::histogram::chi_square;
use super::weights::WeightVector;
use super::{HistoryEntry, QwaitError};

/// Which state statistic the distance uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StatisticMode {
    Distributions,
    #[default]
    FeatureSummary,
}

/// Per-feature (min, max) over history plus target; features where the two
/// coincide contribute zero distance.
#[derive(Debug, Clone)]
pub struct FeatureBounds(pub [(f64, f64); FEATURE_COUNT]);

impl FeatureBounds {
    pub fn over<'a, I: IntoIterator<Item = &'a FeatureVector>>(vectors: I) -> Self {
        let mut b = [(f64::INFINITY, f64::NEG_INFINITY); FEATURE_COUNT];
        for v in vectors {
            for (i, &x) in v.0.iter().enumerate() {
                b[i].0 = b[i].0.min(x);
                b[i].1 = b[i].1.max(x);
            }
        }
        FeatureBounds(b)
    }
}

/// Normalization context for the distribution-based distance: the maximum
/// chi-square seen per distribution between the target and the history
/// window, and the estimate bounds.
#[derive(Debug, Clone)]
pub struct DistributionNorm {
    pub chi_max: [f64; DISTRIBUTION_COUNT],
    pub ert_min: f64,
    pub ert_max: f64,
}

impl DistributionNorm {
    pub fn over(target: &JobState, history: &[HistoryEntry]) -> Result<Self, QwaitError> {
        let mut chi_max = [0.0f64; DISTRIBUTION_COUNT];
        let mut ert_min = target.features.ert();
        let mut ert_max = target.features.ert();
        for e in history {
            for i in 0..DISTRIBUTION_COUNT {
                let d = chi_square(&target.histograms[i], &e.state.histograms[i])?;
                chi_max[i] = chi_max[i].max(d);
            }
            ert_min = ert_min.min(e.state.features.ert());
            ert_max = ert_max.max(e.state.features.ert());
        }
        Ok(DistributionNorm {
            chi_max,
            ert_min,
            ert_max,
        })
    }
}

fn req_mismatch(a: &FeatureVector, b: &FeatureVector) -> f64 {
    if a.req_size() == b.req_size() {
        0.0
    } else {
        1.0
    }
}

fn span_scaled(delta: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span > 0.0 {
        (delta.abs() / span).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Distribution-based distance: 0/1 request-size mismatch, span-scaled
/// estimate difference and the six max-normalized chi-square terms, each
/// weighted and divided by the weight sum. Always in [0, 1].
pub fn distribution_distance(
    a: &JobState,
    b: &JobState,
    weights: &WeightVector,
    norm: &DistributionNorm,
) -> Result<f64, QwaitError> {
    let w_sum = weights.distribution_sum();
    if w_sum <= 0.0 {
        return Err(QwaitError::ZeroWeightSum);
    }
    let mut acc = weights.feature[0] * req_mismatch(&a.features, &b.features);
    acc += weights.feature[1]
        * span_scaled(
            a.features.ert() - b.features.ert(),
            norm.ert_min,
            norm.ert_max,
        );
    for i in 0..DISTRIBUTION_COUNT {
        if norm.chi_max[i] > 0.0 {
            let d = chi_square(&a.histograms[i], &b.histograms[i])?;
            acc += weights.distribution[i] * (d / norm.chi_max[i]).clamp(0.0, 1.0);
        }
    }
    Ok((acc / w_sum).clamp(0.0, 1.0))
}

/// Feature-summary distance: 0/1 request-size mismatch plus span-scaled
/// absolute differences of the remaining fifteen features. Always in [0, 1].
pub fn feature_distance(
    a: &FeatureVector,
    b: &FeatureVector,
    weights: &WeightVector,
    bounds: &FeatureBounds,
) -> Result<f64, QwaitError> {
    let w_sum = weights.feature_sum();
    if w_sum <= 0.0 {
        return Err(QwaitError::ZeroWeightSum);
    }
    let mut acc = weights.feature[0] * req_mismatch(a, b);
    for i in 1..FEATURE_COUNT {
        let (lo, hi) = bounds.0[i];
        acc += weights.feature[i] * span_scaled(a.0[i] - b.0[i], lo, hi);
    }
    Ok((acc / w_sum).clamp(0.0, 1.0))
}

/// One scored history job.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub distance: f64,
    pub wait: f64,
    /// Index into the history slice the neighborhood was scored from.
    pub entry: usize,
}

/// History jobs sorted by ascending distance to the target.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    pub scored: Vec<Scored>,
}

impl Neighborhood {
    pub fn is_empty(&self) -> bool {
        self.scored.is_empty()
    }

    pub fn len(&self) -> usize {
        self.scored.len()
    }
}

/// Score the whole history against a target state.
pub fn score_history(
    target: &JobState,
    history: &[HistoryEntry],
    weights: &WeightVector,
    mode: StatisticMode,
) -> Result<Neighborhood, QwaitError> {
    let mut scored = Vec::with_capacity(history.len());
    match mode {
        StatisticMode::Distributions => {
            let norm = DistributionNorm::over(target, history)?;
            for (i, e) in history.iter().enumerate() {
                let d = distribution_distance(target, &e.state, weights, &norm)?;
                scored.push(Scored {
                    distance: d,
                    wait: e.wait,
                    entry: i,
                });
            }
        }
        StatisticMode::FeatureSummary => {
            let bounds = FeatureBounds::over(
                history
                    .iter()
                    .map(|e| &e.state.features)
                    .chain(std::iter::once(&target.features)),
            );
            for (i, e) in history.iter().enumerate() {
                let d = feature_distance(&target.features, &e.state.features, weights, &bounds)?;
                scored.push(Scored {
                    distance: d,
                    wait: e.wait,
                    entry: i,
                });
            }
        }
    }
    scored.sort_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .unwrap()
            .then(a.entry.cmp(&b.entry))
    });
    Ok(Neighborhood { scored })
}

/// The three neighborhood shapes the predictor distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborhoodCase {
    /// Even the closest jobs are far from the target.
    FarNeighbors,
    /// A dense cluster of near jobs with coherent wait times.
    DenseCluster,
    /// Near jobs exist but their wait times scatter.
    ScatteredNeighbors,
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifyParams {
    /// Percentage (1..=5) of closest history jobs examined.
    pub k_percent: f64,
    /// Mean-distance cutoff separating the far-neighbors case.
    pub avg_dist_threshold: f64,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    /// Noise fraction below which the cluster structure counts as dense.
    pub outlier_fraction: f64,
}

/// Classify the closest k% of the neighborhood. Points are embedded as
/// (distance, wait scaled by the subset maximum) so dissimilar wait times
/// surface as clustering noise.
pub fn classify_neighborhood(
    neighborhood: &Neighborhood,
    params: &ClassifyParams,
) -> Result<NeighborhoodCase, QwaitError> {
    let n = neighborhood.len();
    if n == 0 {
        return Err(QwaitError::ColdStart);
    }
    let count = ((params.k_percent / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    let closest = &neighborhood.scored[..count];
    let mean_dist = closest.iter().map(|s| s.distance).sum::<f64>() / count as f64;
    if mean_dist > params.avg_dist_threshold {
        return Ok(NeighborhoodCase::FarNeighbors);
    }
    let max_wait = closest.iter().map(|s| s.wait).fold(0.0, f64::max);
    let points: Vec<[f64; 2]> = closest
        .iter()
        .map(|s| {
            [
                s.distance,
                if max_wait > 0.0 { s.wait / max_wait } else { 0.0 },
            ]
        })
        .collect();
    let labels = cluster::dbscan(&points, params.dbscan_eps, params.dbscan_min_pts);
    if cluster::noise_fraction(&labels) < params.outlier_fraction {
        Ok(NeighborhoodCase::DenseCluster)
    } else {
        Ok(NeighborhoodCase::ScatteredNeighbors)
    }
}
