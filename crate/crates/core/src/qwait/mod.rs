//! Adaptive queue-wait prediction.
//!
//! Each submission is described by six state histograms and a sixteen-value
//! feature summary. History jobs are scored with a correlation-weighted
//! distance, the neighborhood of the closest jobs is classified by its
//! cluster structure, and the prediction comes from the model that suits
//! that structure: a dense coherent cluster goes to the standard-deviation
//! minimizer, anything else to ridge regression, and negative regression
//! output to a kernel-weighted neighbor average.

mod features;
mod histogram;
mod models;
mod neighborhood;
mod weights;

pub use features::{
    build_state, Distribution, FeatureVector, JobState, StateBinning, DISTRIBUTION_COUNT,
    DISTRIBUTION_NAMES, FEATURE_COUNT, FEATURE_NAMES,
};
pub use histogram::{chi_square, Binning, Histogram};
pub use models::{
    kernel_weights, predict_ridge, predict_sdm, predict_weighted_average, RidgeParams, SdmParams,
    RIDGE_MIN_ROWS,
};
pub use neighborhood::{
    classify_neighborhood, distribution_distance, feature_distance, score_history, ClassifyParams,
    DistributionNorm, FeatureBounds, Neighborhood, NeighborhoodCase, Scored, StatisticMode,
};
pub use weights::{compute_weights, WeightVector};

use thiserror::Error;

use crate::simstate::HistoryWindow;

#[derive(Debug, Error)]
pub enum QwaitError {
    #[error("histograms have different bin edges")]
    MismatchedBins,
    #[error("histograms must be normalized before distance computation")]
    UnnormalizedHistogram,
    #[error("weight sum is zero")]
    ZeroWeightSum,
    #[error("need at least {needed} history entries, have {have}")]
    NotEnoughHistory { needed: usize, have: usize },
    #[error("no history available yet; prediction cold start")]
    ColdStart,
    #[error("no distance window within the threshold")]
    SdmNoWindow,
    #[error("regression system is singular")]
    SingularSystem,
    #[error("parameter {name} = {value} outside its allowed range [{lo}, {hi}]")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

/// One wait-resolved job in the predictor history: its submission-state
/// description, precomputed histogram norms and the observed wait.
#[derive(Debug, Clone)]
pub struct HistoryEntry {
    pub state: JobState,
    pub histogram_norms: [f64; DISTRIBUTION_COUNT],
    pub wait: f64,
}

impl HistoryEntry {
    pub fn new(state: JobState, wait: f64) -> Self {
        let mut norms = [0.0; DISTRIBUTION_COUNT];
        for (n, h) in norms.iter_mut().zip(&state.histograms) {
            *n = h.l2_norm();
        }
        HistoryEntry {
            state,
            histogram_norms: norms,
            wait,
        }
    }
}

/// Which model produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Sdm,
    Ridge,
    WeightedAverage,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Sdm => "sdm",
            ModelKind::Ridge => "ridge",
            ModelKind::WeightedAverage => "weighted_average",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitPrediction {
    pub seconds: f64,
    pub model: ModelKind,
    pub case: NeighborhoodCase,
}

/// Tunable knobs with their sweep ranges.
#[derive(Debug, Clone)]
pub struct QwaitConfig {
    pub history_capacity: usize, // [2000, 6000]
    pub bins: usize,             // [5, 50]
    pub k_percent: f64,          // [1, 5]
    pub avg_dist_threshold: f64,
    pub outlier_fraction: f64, // [0.10, 0.90]
    pub dbscan_eps: f64,       // [0.05, 0.1]
    pub dbscan_min_pts: usize, // [2, 5]
    pub sdm_window: f64,       // [0.01, 0.1]
    pub sdm_max_dist: f64,     // [0.3, 0.6]
    pub ridge_lambda: f64,
    pub ridge_max_dist: f64,    // [0.4, 1.0]
    pub wavg_neighbors: usize,  // [1, 20]
    pub weight_stride: usize,   // recompute weights every n insertions
    pub mode: StatisticMode,
}

impl Default for QwaitConfig {
    fn default() -> Self {
        QwaitConfig {
            history_capacity: 4000,
            bins: 20,
            k_percent: 3.0,
            avg_dist_threshold: 0.45,
            outlier_fraction: 0.5,
            dbscan_eps: 0.05,
            dbscan_min_pts: 3,
            sdm_window: 0.05,
            sdm_max_dist: 0.45,
            ridge_lambda: 1.0,
            ridge_max_dist: 0.7,
            wavg_neighbors: 5,
            weight_stride: 1,
            mode: StatisticMode::FeatureSummary,
        }
    }
}

impl QwaitConfig {
    pub fn validate(&self) -> Result<(), QwaitError> {
        let checks: [(&'static str, f64, f64, f64); 9] = [
            ("qwait.history_capacity", self.history_capacity as f64, 2000.0, 6000.0),
            ("qwait.bins", self.bins as f64, 5.0, 50.0),
            ("qwait.k_percent", self.k_percent, 1.0, 5.0),
            ("qwait.outlier_fraction", self.outlier_fraction, 0.10, 0.90),
            ("qwait.dbscan_eps", self.dbscan_eps, 0.05, 0.1),
            ("qwait.dbscan_min_pts", self.dbscan_min_pts as f64, 2.0, 5.0),
            ("qwait.sdm_window", self.sdm_window, 0.01, 0.1),
            ("qwait.sdm_max_dist", self.sdm_max_dist, 0.3, 0.6),
            ("qwait.ridge_max_dist", self.ridge_max_dist, 0.4, 1.0),
        ];
        for (name, value, lo, hi) in checks {
            if value < lo || value > hi {
                return Err(QwaitError::ParamOutOfRange { name, value, lo, hi });
            }
        }
        if !(1..=20).contains(&self.wavg_neighbors) {
            return Err(QwaitError::ParamOutOfRange {
                name: "qwait.wavg_neighbors",
                value: self.wavg_neighbors as f64,
                lo: 1.0,
                hi: 20.0,
            });
        }
        Ok(())
    }

    fn classify_params(&self) -> ClassifyParams {
        ClassifyParams {
            k_percent: self.k_percent,
            avg_dist_threshold: self.avg_dist_threshold,
            dbscan_eps: self.dbscan_eps,
            dbscan_min_pts: self.dbscan_min_pts,
            outlier_fraction: self.outlier_fraction,
        }
    }
}

/// Online wait predictor: a bounded history of wait-resolved jobs plus
/// cached correlation weights, updated as waits resolve.
#[derive(Debug, Clone)]
pub struct WaitPredictor {
    config: QwaitConfig,
    history: HistoryWindow<HistoryEntry>,
    weights: Option<WeightVector>,
    observations: usize,
}

impl WaitPredictor {
    pub fn new(config: QwaitConfig) -> Self {
        let capacity = config.history_capacity;
        WaitPredictor {
            config,
            history: HistoryWindow::new(capacity),
            weights: None,
            observations: 0,
        }
    }

    pub fn config(&self) -> &QwaitConfig {
        &self.config
    }

    pub fn set_mode(&mut self, mode: StatisticMode) {
        self.config.mode = mode;
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    /// Record a job whose wait time is now known.
    pub fn observe(&mut self, state: JobState, wait: f64) {
        self.history.push(HistoryEntry::new(state, wait));
        self.observations += 1;
        let stride = self.config.weight_stride.max(1);
        if self.history.len() >= 3 && (self.weights.is_none() || self.observations % stride == 0) {
            let entries: Vec<HistoryEntry> = self.history.iter().cloned().collect();
            self.weights = compute_weights(&entries).ok();
        }
    }

    fn effective_weights(&self) -> WeightVector {
        match &self.weights {
            // A weight vector that is all zero would make every distance
            // undefined; treat it like the warm-up phase.
            Some(w) if !w.is_all_zero() => w.clone(),
            _ => WeightVector::uniform(),
        }
    }

    /// Score the current history against a target state.
    pub fn neighborhood(&self, target: &JobState) -> Result<Neighborhood, QwaitError> {
        let entries: Vec<HistoryEntry> = self.history.iter().cloned().collect();
        score_history(target, &entries, &self.effective_weights(), self.config.mode)
    }

    /// Predict the queue wait of a job described by `target`.
    ///
    /// Dispatch: a dense cluster goes to the standard-deviation minimizer,
    /// the other cases to ridge regression; the weighted average catches
    /// negative or underdetermined regressions. The result is clamped
    /// nonnegative.
    pub fn predict(&self, target: &JobState) -> Result<WaitPrediction, QwaitError> {
        if self.history.is_empty() {
            return Err(QwaitError::ColdStart);
        }
        let entries: Vec<HistoryEntry> = self.history.iter().cloned().collect();
        let weights = self.effective_weights();
        let neighborhood = score_history(target, &entries, &weights, self.config.mode)?;
        let case = classify_neighborhood(&neighborhood, &self.config.classify_params())?;

        if case == NeighborhoodCase::DenseCluster {
            let sdm = predict_sdm(
                &neighborhood,
                &SdmParams {
                    window_size: self.config.sdm_window,
                    max_dist_threshold: self.config.sdm_max_dist,
                },
            );
            if let Ok(seconds) = sdm {
                return Ok(WaitPrediction {
                    seconds: seconds.max(0.0),
                    model: ModelKind::Sdm,
                    case,
                });
            }
            // No window near enough: fall through to the regression.
        }

        let ridge = predict_ridge(
            &entries,
            &neighborhood,
            target,
            &RidgeParams {
                lambda: self.config.ridge_lambda,
                max_dist: self.config.ridge_max_dist,
            },
        );
        match ridge {
            Ok(seconds) if seconds >= 0.0 => Ok(WaitPrediction {
                seconds,
                model: ModelKind::Ridge,
                case,
            }),
            _ => {
                let seconds =
                    predict_weighted_average(&neighborhood, self.config.wavg_neighbors)?;
                Ok(WaitPrediction {
                    seconds: seconds.max(0.0),
                    model: ModelKind::WeightedAverage,
                    case,
                })
            }
        }
    }
}

/// Pick the statistic that predicts a labeled training sequence better.
///
/// Both modes replay the sequence online (observe after predict) on top of
/// the given warm-up history; the mode with the lower mean absolute error
/// wins, with ties going to the feature summary. An empty training set also
/// selects the feature summary.
pub fn choose_statistic_mode(
    warmup: &[(JobState, f64)],
    training: &[(JobState, f64)],
    config: &QwaitConfig,
) -> StatisticMode {
    if training.is_empty() {
        return StatisticMode::FeatureSummary;
    }
    let run = |mode: StatisticMode| -> f64 {
        let mut cfg = config.clone();
        cfg.mode = mode;
        let mut predictor = WaitPredictor::new(cfg);
        for (state, wait) in warmup {
            predictor.observe(state.clone(), *wait);
        }
        let mut abs_err = 0.0;
        let mut counted = 0usize;
        for (state, wait) in training {
            if let Ok(p) = predictor.predict(state) {
                abs_err += (p.seconds - wait).abs();
                counted += 1;
            }
            predictor.observe(state.clone(), *wait);
        }
        if counted == 0 {
            f64::INFINITY
        } else {
            abs_err / counted as f64
        }
    };
    let aae_distributions = run(StatisticMode::Distributions);
    let aae_features = run(StatisticMode::FeatureSummary);
    if aae_distributions < aae_features {
        StatisticMode::Distributions
    } else {
        StatisticMode::FeatureSummary
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simstate::{SnapshotEntry, SystemSnapshot};
    use crate::trace::{JobRecord, JobStatus};

    fn job(user: i64, req: i64, ert: i64) -> JobRecord {
        JobRecord {
            job_id: 1,
            submit_time: 0,
            wait_time: 0,
            run_time: 10,
            req_size: req,
            ert,
            ert_estimated: false,
            user_id: user,
            group_id: 1,
            queue_id: 1,
            status: JobStatus::Completed,
        }
    }

    fn binning() -> StateBinning {
        StateBinning::from_bounds(
            10,
            [
                (1.0, 64.0),
                (1.0, 20000.0),
                (0.0, 20000.0),
                (1.0, 64.0),
                (1.0, 20000.0),
                (0.0, 20000.0),
            ],
        )
    }

    fn empty_state(req: i64, ert: i64) -> JobState {
        build_state(&SystemSnapshot::empty(0), &job(1, req, ert), &binning())
    }

    fn test_config() -> QwaitConfig {
        QwaitConfig {
            history_capacity: 2000,
            weight_stride: 10,
            ..QwaitConfig::default()
        }
    }

    /// wait = 100 * req_size, erts correlated so weights are informative.
    fn wait_law_predictor(n: usize) -> WaitPredictor {
        let mut p = WaitPredictor::new(test_config());
        for i in 0..n {
            let req = [1, 2, 4, 8, 16][i % 5];
            p.observe(empty_state(req, req * 10), (req * 100) as f64);
        }
        p
    }

    #[test]
    fn cold_start_errors() {
        let p = WaitPredictor::new(test_config());
        assert!(matches!(
            p.predict(&empty_state(4, 40)),
            Err(QwaitError::ColdStart)
        ));
    }

    #[test]
    fn dense_identical_neighborhood_goes_to_sdm_exactly() {
        let p = wait_law_predictor(100);
        let pred = p.predict(&empty_state(4, 40)).unwrap();
        assert_eq!(pred.model, ModelKind::Sdm);
        assert_eq!(pred.case, NeighborhoodCase::DenseCluster);
        assert!((pred.seconds - 400.0).abs() < 1e-9, "{}", pred.seconds);
    }

    #[test]
    fn far_target_dispatches_to_ridge() {
        // Unseen request size far outside the history attribute ranges.
        let mut p = wait_law_predictor(100);
        p.config.avg_dist_threshold = 0.3;
        p.config.ridge_max_dist = 1.0;
        let state = empty_state(64, 20000);
        let pred = p.predict(&state).unwrap();
        assert_eq!(pred.case, NeighborhoodCase::FarNeighbors);
        assert_eq!(pred.model, ModelKind::Ridge);
        assert!(pred.seconds >= 0.0);
    }

    #[test]
    fn negative_ridge_falls_to_weighted_average() {
        // Steeply decreasing wait law; extrapolating far beyond the seen
        // estimates drives the regression negative.
        let mut p = WaitPredictor::new(test_config());
        for i in 0..60 {
            let ert = 100 + (i % 20) * 45; // 100..955
            let wait = 10_000.0 - 10.0 * ert as f64;
            p.observe(empty_state(4, ert), wait);
        }
        p.config.avg_dist_threshold = 0.05;
        p.config.ridge_max_dist = 1.0; // admit the rows so the fit itself goes negative
        let target = empty_state(32, 19000);
        let pred = p.predict(&target).unwrap();
        assert_eq!(pred.model, ModelKind::WeightedAverage);
        assert!(pred.seconds >= 0.0);
    }

    #[test]
    fn predictions_are_never_negative_across_dispatch() {
        let mut p = wait_law_predictor(60);
        for req in [1, 3, 5, 7, 64] {
            for ert in [1, 500, 20000] {
                if let Ok(pred) = p.predict(&empty_state(req, ert)) {
                    assert!(pred.seconds >= 0.0);
                }
            }
        }
        p.config.avg_dist_threshold = 0.0; // force the far case everywhere
        for req in [1, 2, 64] {
            let pred = p.predict(&empty_state(req, req * 10)).unwrap();
            assert!(pred.seconds >= 0.0);
        }
    }

    #[test]
    fn synthetic_wait_law_reaches_tiny_error() {
        let p = wait_law_predictor(500);
        let mut abs_err = 0.0;
        let mut mean_wait = 0.0;
        let cases = [1, 2, 4, 8, 16];
        for req in cases {
            let pred = p.predict(&empty_state(req, req * 10)).unwrap();
            abs_err += (pred.seconds - (req * 100) as f64).abs();
            mean_wait += (req * 100) as f64;
        }
        let aae = abs_err / cases.len() as f64;
        let mean = mean_wait / cases.len() as f64;
        assert!(aae < 0.01 * mean, "aae {aae} vs mean {mean}");
    }

    #[test]
    fn statistic_mode_tie_breaks_to_feature_summary() {
        let cfg = test_config();
        assert_eq!(
            choose_statistic_mode(&[], &[], &cfg),
            StatisticMode::FeatureSummary
        );
        // Identical predictions in both modes (empty snapshots): tie.
        let warm: Vec<(JobState, f64)> =
            (0..20).map(|i| (empty_state(4, 40), 100.0 + (i % 2) as f64)).collect();
        let train: Vec<(JobState, f64)> = (0..10).map(|_| (empty_state(4, 40), 100.5)).collect();
        assert_eq!(
            choose_statistic_mode(&warm, &train, &cfg),
            StatisticMode::FeatureSummary
        );
    }

    #[test]
    fn statistic_mode_prefers_features_when_histograms_are_uniform() {
        // Waiting sets {2, 60} and {2, 2, 60, 60} histogram identically
        // (half the mass in each of two bins) but differ in the request
        // sum, and the wait is linear in that sum. Only the feature
        // summary can separate them.
        let binning = binning();
        let mk = |double: bool| -> (JobState, f64) {
            let reqs: &[i64] = if double { &[2, 2, 60, 60] } else { &[2, 60] };
            let snap = SystemSnapshot {
                at_time: 100,
                waiting: reqs
                    .iter()
                    .map(|&r| SnapshotEntry {
                        job: job(2, r, 100),
                        elapsed: 10,
                    })
                    .collect(),
                running: vec![],
            };
            let f3: i64 = reqs.iter().sum();
            (
                build_state(&snap, &job(1, 4, 40), &binning),
                10.0 * f3 as f64,
            )
        };
        let warm: Vec<(JobState, f64)> = (0..40).map(|i| mk(i % 2 == 0)).collect();
        let train: Vec<(JobState, f64)> = (0..20).map(|i| mk(i % 2 == 0)).collect();
        // Identical histograms across the two populations.
        assert_eq!(
            warm[0].0.histograms[0].counts,
            warm[1].0.histograms[0].counts
        );
        let cfg = test_config();
        assert_eq!(
            choose_statistic_mode(&warm, &train, &cfg),
            StatisticMode::FeatureSummary
        );
    }

    #[test]
    fn statistic_mode_prefers_distributions_when_histograms_carry_signal() {
        // Wait depends on the queue-length histogram shape only: the
        // feature summary sees identical sums, the distributions differ.
        let binning = binning();
        let mk = |spread: bool, wait: f64| -> (JobState, f64) {
            // Two waiting jobs with equal req sums: (8,8) vs (2,14).
            let reqs: [i64; 2] = if spread { [2, 14] } else { [8, 8] };
            let snap = SystemSnapshot {
                at_time: 100,
                waiting: reqs
                    .iter()
                    .map(|&r| SnapshotEntry {
                        job: job(2, r, 100),
                        elapsed: 10,
                    })
                    .collect(),
                running: vec![],
            };
            (build_state(&snap, &job(1, 4, 40), &binning), wait)
        };
        let mut warm = Vec::new();
        for i in 0..40 {
            let spread = i % 2 == 0;
            warm.push(mk(spread, if spread { 1000.0 } else { 100.0 }));
        }
        let train: Vec<(JobState, f64)> = (0..20)
            .map(|i| {
                let spread = i % 2 == 0;
                mk(spread, if spread { 1000.0 } else { 100.0 })
            })
            .collect();
        let mut cfg = test_config();
        cfg.k_percent = 5.0;
        assert_eq!(
            choose_statistic_mode(&warm, &train, &cfg),
            StatisticMode::Distributions
        );
    }
}
