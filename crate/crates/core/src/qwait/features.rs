//! The sixteen-feature summary of a submission state and its six
//! population histograms.

use std::fmt;

use crate::simstate::SystemSnapshot;
use crate::trace::JobRecord;

use super::histogram::{Binning, Histogram};

pub const FEATURE_COUNT: usize = 16;
pub const DISTRIBUTION_COUNT: usize = 6;

/// Index of the six state distributions, in their canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    WaitingReqSize = 0,
    WaitingErt = 1,
    WaitingElapsed = 2,
    RunningReqSize = 3,
    RunningErt = 4,
    RunningElapsed = 5,
}

pub const DISTRIBUTION_NAMES: [&str; DISTRIBUTION_COUNT] = [
    "waiting_req_size",
    "waiting_ert",
    "waiting_elapsed",
    "running_req_size",
    "running_ert",
    "running_elapsed",
];

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "req_size",
    "ert",
    "waiting_req_sum",
    "waiting_ert_sum",
    "waiting_elapsed_sum",
    "running_req_sum",
    "running_ert_sum",
    "running_elapsed_sum",
    "user_waiting_cpu_seconds",
    "user_waiting_req_sum",
    "user_waiting_ert_sum",
    "user_waiting_count",
    "user_running_cpu_seconds",
    "user_running_req_sum",
    "user_running_ert_sum",
    "user_running_count",
];

/// Feature 1 is the (nominal) request size, feature 2 the user estimate;
/// 3..8 are system-wide sums over waiting and running jobs, 9..16 the same
/// restricted to the submitting user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn req_size(&self) -> f64 {
        self.0[0]
    }

    pub fn ert(&self) -> f64 {
        self.0[1]
    }
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Calibrated binning for the six populations.
#[derive(Debug, Clone)]
pub struct StateBinning {
    pub per_distribution: [Binning; DISTRIBUTION_COUNT],
    pub bins: usize,
}

impl StateBinning {
    /// Bin edges from explicit per-population (min, max) bounds, in the
    /// canonical distribution order.
    pub fn from_bounds(bins: usize, bounds: [(f64, f64); DISTRIBUTION_COUNT]) -> Self {
        StateBinning {
            per_distribution: bounds.map(|(lo, hi)| Binning::new(bins, lo, hi)),
            bins,
        }
    }

    /// Calibrate bounds from a job sample: request sizes and estimates from
    /// the records themselves, elapsed bounds from the observed wait and
    /// run times.
    pub fn calibrate(bins: usize, jobs: &[JobRecord]) -> Self {
        let mut req = (f64::MAX, 0.0f64);
        let mut ert = (f64::MAX, 0.0f64);
        let mut wait = 0.0f64;
        let mut run = 0.0f64;
        for j in jobs {
            req = (req.0.min(j.req_size as f64), req.1.max(j.req_size as f64));
            ert = (ert.0.min(j.ert as f64), ert.1.max(j.ert as f64));
            wait = wait.max(j.wait_time as f64);
            run = run.max(j.run_time as f64);
        }
        if jobs.is_empty() {
            req = (1.0, 1.0);
            ert = (0.0, 0.0);
        }
        Self::from_bounds(
            bins,
            [
                req,
                ert,
                (0.0, wait),
                req,
                ert,
                (0.0, run),
            ],
        )
    }
}

/// A job's full submission-state description: six histograms plus the
/// feature summary.
#[derive(Debug, Clone)]
pub struct JobState {
    pub histograms: [Histogram; DISTRIBUTION_COUNT],
    pub features: FeatureVector,
}

/// Build the state description of `job` arriving into `snapshot`.
pub fn build_state(snapshot: &SystemSnapshot, job: &JobRecord, binning: &StateBinning) -> JobState {
    let waiting = &snapshot.waiting;
    let running = &snapshot.running;

    let histograms = [
        binning.per_distribution[0].histogram(waiting.iter().map(|e| e.job.req_size as f64)),
        binning.per_distribution[1].histogram(waiting.iter().map(|e| e.job.ert as f64)),
        binning.per_distribution[2].histogram(waiting.iter().map(|e| e.elapsed as f64)),
        binning.per_distribution[3].histogram(running.iter().map(|e| e.job.req_size as f64)),
        binning.per_distribution[4].histogram(running.iter().map(|e| e.job.ert as f64)),
        binning.per_distribution[5].histogram(running.iter().map(|e| e.elapsed as f64)),
    ];

    let mut f = [0.0; FEATURE_COUNT];
    f[0] = job.req_size as f64;
    f[1] = job.ert as f64;
    for e in waiting {
        let req = e.job.req_size as f64;
        let ert = e.job.ert as f64;
        f[2] += req;
        f[3] += ert;
        f[4] += e.elapsed as f64;
        if e.job.user_id == job.user_id {
            f[8] += req * ert;
            f[9] += req;
            f[10] += ert;
            f[11] += 1.0;
        }
    }
    for e in running {
        let req = e.job.req_size as f64;
        let ert = e.job.ert as f64;
        f[5] += req;
        f[6] += ert;
        f[7] += e.elapsed as f64;
        if e.job.user_id == job.user_id {
            f[12] += req * ert;
            f[13] += req;
            f[14] += ert;
            f[15] += 1.0;
        }
    }

    JobState {
        histograms,
        features: FeatureVector(f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simstate::SnapshotEntry;
    use crate::trace::JobStatus;

    fn job(id: u64, user: i64, req: i64, ert: i64) -> JobRecord {
        JobRecord {
            job_id: id,
            submit_time: 0,
            wait_time: 0,
            run_time: ert,
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
                (1.0, 10_000.0),
                (0.0, 10_000.0),
                (1.0, 64.0),
                (1.0, 10_000.0),
                (0.0, 10_000.0),
            ],
        )
    }

    #[test]
    fn empty_snapshot_gives_zero_sums_and_own_attributes() {
        let snap = SystemSnapshot::empty(100);
        let target = job(1, 5, 16, 3600);
        let state = build_state(&snap, &target, &binning());
        assert_eq!(state.features.req_size(), 16.0);
        assert_eq!(state.features.ert(), 3600.0);
        for i in 2..FEATURE_COUNT {
            assert_eq!(state.features.0[i], 0.0, "feature {}", i + 1);
        }
        for h in &state.histograms {
            assert!(h.counts.iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn single_waiting_job_sums() {
        let snap = SystemSnapshot {
            at_time: 100,
            waiting: vec![SnapshotEntry {
                job: job(2, 9, 4, 100),
                elapsed: 10,
            }],
            running: vec![],
        };
        let target = job(1, 5, 16, 3600);
        let state = build_state(&snap, &target, &binning());
        assert_eq!(state.features.0[2], 4.0);
        assert_eq!(state.features.0[3], 100.0);
        assert_eq!(state.features.0[4], 10.0);
        // Different user: user-specific features stay zero.
        assert_eq!(state.features.0[8..12], [0.0; 4]);
    }

    #[test]
    fn features_match_direct_recomputation() {
        // 15-job pseudo-random snapshot checked against an independent
        // accumulation of every sum.
        let mut x: u64 = 99;
        let mut next = |m: u64| {
            x = x.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            (x >> 33) % m
        };
        let mut waiting = Vec::new();
        let mut running = Vec::new();
        for i in 0..15u64 {
            let j = job(i + 10, (next(3) + 1) as i64, (next(32) + 1) as i64, (next(5000) + 1) as i64);
            let e = SnapshotEntry {
                job: j,
                elapsed: next(900) as i64,
            };
            if next(2) == 0 {
                waiting.push(e);
            } else {
                running.push(e);
            }
        }
        let snap = SystemSnapshot {
            at_time: 1000,
            waiting: waiting.clone(),
            running: running.clone(),
        };
        let target = job(1, 2, 8, 600);
        let state = build_state(&snap, &target, &binning());

        let sum = |entries: &[SnapshotEntry], f: &dyn Fn(&SnapshotEntry) -> f64| -> f64 {
            entries.iter().map(f).sum()
        };
        let user = target.user_id;
        let expected = [
            8.0,
            600.0,
            sum(&waiting, &|e| e.job.req_size as f64),
            sum(&waiting, &|e| e.job.ert as f64),
            sum(&waiting, &|e| e.elapsed as f64),
            sum(&running, &|e| e.job.req_size as f64),
            sum(&running, &|e| e.job.ert as f64),
            sum(&running, &|e| e.elapsed as f64),
            sum(&waiting, &|e| {
                if e.job.user_id == user {
                    (e.job.req_size * e.job.ert) as f64
                } else {
                    0.0
                }
            }),
            sum(&waiting, &|e| {
                if e.job.user_id == user {
                    e.job.req_size as f64
                } else {
                    0.0
                }
            }),
            sum(&waiting, &|e| {
                if e.job.user_id == user {
                    e.job.ert as f64
                } else {
                    0.0
                }
            }),
            waiting.iter().filter(|e| e.job.user_id == user).count() as f64,
            sum(&running, &|e| {
                if e.job.user_id == user {
                    (e.job.req_size * e.job.ert) as f64
                } else {
                    0.0
                }
            }),
            sum(&running, &|e| {
                if e.job.user_id == user {
                    e.job.req_size as f64
                } else {
                    0.0
                }
            }),
            sum(&running, &|e| {
                if e.job.user_id == user {
                    e.job.ert as f64
                } else {
                    0.0
                }
            }),
            running.iter().filter(|e| e.job.user_id == user).count() as f64,
        ];
        for (i, (got, want)) in state.features.0.iter().zip(&expected).enumerate() {
            assert!((got - want).abs() < 1e-9, "feature {}: {got} vs {want}", i + 1);
        }
        // Snapshot-derived features are finite and nonnegative.
        for &v in &state.features.0[2..] {
            assert!(v.is_finite() && v >= 0.0);
        }
    }
}
