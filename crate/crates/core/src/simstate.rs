//! Chronological trace replay: queue and processor state at every
//! submission instant, rolling history, and system-load calculation and
//! prediction.
//!
//! Replay does not schedule anything; it reconstructs the state a recorded
//! trace implies. At a timestamp, terminations are processed before starts
//! and starts before submissions, so a processor freed at time t is visible
//! to a job arriving at t and no job is counted both waiting and running.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::trace::JobRecord;

pub const DEFAULT_LOAD_INTERVAL: i64 = 1800;
pub const DEFAULT_LOAD_WINDOW: i64 = 7 * 24 * 3600;

#[derive(Debug, Error)]
pub enum SimStateError {
    #[error("jobs are not sorted by submit time (index {0})")]
    UnsortedInput(usize),
    #[error("no execution history before the target submission; load prediction cold start")]
    LoadColdStart,
}

/// One job visible in a snapshot, with its elapsed seconds in the
/// respective state (waiting or running).
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotEntry {
    pub job: JobRecord,
    pub elapsed: i64,
}

/// Queue and processor state at a given instant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SystemSnapshot {
    pub at_time: i64,
    pub waiting: Vec<SnapshotEntry>,
    pub running: Vec<SnapshotEntry>,
}

impl SystemSnapshot {
    pub fn empty(at_time: i64) -> Self {
        SystemSnapshot {
            at_time,
            waiting: Vec::new(),
            running: Vec::new(),
        }
    }
}

/// Bounded FIFO of history entries; pushing past capacity evicts the
/// oldest entry.
#[derive(Debug, Clone)]
pub struct HistoryWindow<T> {
    capacity: usize,
    entries: VecDeque<T>,
}

impl<T> HistoryWindow<T> {
    pub fn new(capacity: usize) -> Self {
        HistoryWindow {
            capacity,
            entries: VecDeque::new(),
        }
    }

    pub fn push(&mut self, entry: T) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.entries.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    End = 0,
    Start = 1,
    Submit = 2,
}

/// Replay a sorted trace and call `visit` with each job and the snapshot at
/// its submission instant. The submitting job itself is not part of its own
/// snapshot.
pub fn replay<F>(jobs: &[JobRecord], mut visit: F) -> Result<(), SimStateError>
where
    F: FnMut(usize, &JobRecord, &SystemSnapshot),
{
    for w in 1..jobs.len() {
        if jobs[w].submit_time < jobs[w - 1].submit_time {
            return Err(SimStateError::UnsortedInput(w));
        }
    }

    // (time, kind, job index); sorting puts ends before starts before
    // submissions at equal timestamps, then index order for determinism.
    let mut events: Vec<(i64, u8, usize)> = Vec::with_capacity(jobs.len() * 3);
    for (i, j) in jobs.iter().enumerate() {
        events.push((j.submit_time, EventKind::Submit as u8, i));
        events.push((j.start_time(), EventKind::Start as u8, i));
        events.push((j.end_time(), EventKind::End as u8, i));
    }
    events.sort_unstable();

    let mut waiting: BTreeSet<usize> = BTreeSet::new();
    let mut running: BTreeSet<usize> = BTreeSet::new();

    for (time, kind, idx) in events {
        match kind {
            k if k == EventKind::End as u8 => {
                running.remove(&idx);
            }
            k if k == EventKind::Start as u8 => {
                // A zero-wait job starts at its own submit event, which
                // sorts after this one; handling it here would leak the job
                // into its own snapshot.
                if jobs[idx].wait_time > 0 {
                    waiting.remove(&idx);
                    // Zero-length executions never enter the running set;
                    // their end event sorts before the start.
                    if jobs[idx].run_time > 0 {
                        running.insert(idx);
                    }
                }
            }
            _ => {
                let snapshot = SystemSnapshot {
                    at_time: time,
                    waiting: waiting
                        .iter()
                        .map(|&w| SnapshotEntry {
                            job: jobs[w].clone(),
                            elapsed: time - jobs[w].submit_time,
                        })
                        .collect(),
                    running: running
                        .iter()
                        .map(|&r| SnapshotEntry {
                            job: jobs[r].clone(),
                            elapsed: time - jobs[r].start_time(),
                        })
                        .collect(),
                };
                visit(idx, &jobs[idx], &snapshot);
                if jobs[idx].wait_time > 0 {
                    waiting.insert(idx);
                } else if jobs[idx].run_time > 0 {
                    // Instant start: the start event at this same timestamp
                    // was already processed, so insert directly.
                    running.insert(idx);
                }
            }
        }
    }
    Ok(())
}

/// Collect replay output into a vector of snapshots, index-aligned with
/// `jobs`.
pub fn replay_collect(jobs: &[JobRecord]) -> Result<Vec<SystemSnapshot>, SimStateError> {
    let mut out = vec![SystemSnapshot::empty(0); jobs.len()];
    replay(jobs, |idx, _, snap| out[idx] = snap.clone())?;
    Ok(out)
}

/// An execution interval with a processor footprint, the unit of load
/// accounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Execution {
    pub start: i64,
    pub end: i64,
    pub req_size: i64,
}

impl Execution {
    pub fn of(job: &JobRecord) -> Self {
        Execution {
            start: job.start_time(),
            end: job.end_time(),
            req_size: job.req_size,
        }
    }
}

/// Fraction of available CPU-seconds consumed over `[t, t + interval)` by
/// the given executions, clamped to [0, 1].
pub fn compute_load(executions: &[Execution], t: i64, interval: i64, procs: i64) -> f64 {
    assert!(interval > 0 && procs >= 1);
    let total = (interval as f64) * (procs as f64);
    let mut used = 0.0;
    for e in executions {
        let lo = e.start.max(t);
        let hi = e.end.min(t + interval);
        if hi > lo {
            used += (hi - lo) as f64 * e.req_size as f64;
        }
    }
    (used / total).clamp(0.0, 1.0)
}

/// Indexed execution list for repeated interval-load queries.
///
/// Queries scan executions whose start lies in `[lo - max_duration, hi)`,
/// which is exact because no execution lasts longer than `max_duration`.
#[derive(Debug, Clone, Default)]
pub struct LoadIndex {
    by_start: Vec<Execution>,
    max_duration: i64,
}

impl LoadIndex {
    pub fn new(mut executions: Vec<Execution>) -> Self {
        executions.sort_by_key(|e| (e.start, e.end, e.req_size));
        let max_duration = executions
            .iter()
            .map(|e| e.end - e.start)
            .max()
            .unwrap_or(0);
        LoadIndex {
            by_start: executions,
            max_duration,
        }
    }

    pub fn from_jobs<'a, I: IntoIterator<Item = &'a JobRecord>>(jobs: I) -> Self {
        Self::new(jobs.into_iter().map(Execution::of).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.by_start.is_empty()
    }

    pub fn earliest_start(&self) -> Option<i64> {
        self.by_start.first().map(|e| e.start)
    }

    fn overlapping(&self, lo: i64, hi: i64) -> &[Execution] {
        let from = self
            .by_start
            .partition_point(|e| e.start < lo - self.max_duration);
        let to = self.by_start.partition_point(|e| e.start < hi);
        &self.by_start[from..to]
    }

    /// Load over `[t, t + interval)`, optionally ignoring one execution
    /// (used to measure the pressure other jobs put on a given one).
    pub fn load(
        &self,
        t: i64,
        interval: i64,
        procs: i64,
        exclude: Option<Execution>,
    ) -> f64 {
        assert!(interval > 0 && procs >= 1);
        let total = (interval as f64) * (procs as f64);
        let mut used = 0.0;
        let mut skipped = false;
        for e in self.overlapping(t, t + interval) {
            if !skipped && Some(*e) == exclude {
                skipped = true;
                continue;
            }
            let lo = e.start.max(t);
            let hi = e.end.min(t + interval);
            if hi > lo {
                used += (hi - lo) as f64 * e.req_size as f64;
            }
        }
        (used / total).clamp(0.0, 1.0)
    }

    /// Average load another job observed over its own execution interval.
    pub fn load_during(&self, exec: Execution, procs: i64, exclude_self: bool) -> f64 {
        let dur = exec.end - exec.start;
        if dur <= 0 {
            return 0.0;
        }
        self.load(
            exec.start,
            dur,
            procs,
            if exclude_self { Some(exec) } else { None },
        )
    }
}

/// Per-interval loads over a window, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSeries {
    pub interval: i64,
    pub loads: Vec<f64>,
}

impl LoadSeries {
    pub fn mean(&self) -> f64 {
        if self.loads.is_empty() {
            0.0
        } else {
            self.loads.iter().sum::<f64>() / self.loads.len() as f64
        }
    }
}

/// Interval loads for the window preceding `target_submit`, clipped to the
/// available history. Intervals are aligned so the last one ends exactly at
/// `target_submit`.
pub fn load_series_before(
    index: &LoadIndex,
    target_submit: i64,
    interval: i64,
    window: i64,
    procs: i64,
) -> Result<LoadSeries, SimStateError> {
    let earliest = index.earliest_start().ok_or(SimStateError::LoadColdStart)?;
    let span = (target_submit - earliest).min(window);
    let n = span / interval;
    if n <= 0 {
        return Err(SimStateError::LoadColdStart);
    }
    let mut loads = Vec::with_capacity(n as usize);
    for k in (1..=n).rev() {
        let t = target_submit - k * interval;
        loads.push(index.load(t, interval, procs, None));
    }
    Ok(LoadSeries { interval, loads })
}

/// Predicted load at a submission instant: the mean of the interval loads
/// over the preceding window.
pub fn predict_load(
    index: &LoadIndex,
    target_submit: i64,
    interval: i64,
    window: i64,
    procs: i64,
) -> Result<f64, SimStateError> {
    Ok(load_series_before(index, target_submit, interval, window, procs)?.mean())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::JobStatus;

    fn job(id: u64, submit: i64, wait: i64, run: i64, req: i64) -> JobRecord {
        JobRecord {
            job_id: id,
            submit_time: submit,
            wait_time: wait,
            run_time: run,
            req_size: req,
            ert: run,
            ert_estimated: false,
            user_id: 1,
            group_id: 1,
            queue_id: 1,
            status: JobStatus::Completed,
        }
    }

    #[test]
    fn snapshot_sees_running_job_with_elapsed() {
        let jobs = vec![job(1, 0, 0, 100, 4), job(2, 50, 0, 10, 2)];
        let snaps = replay_collect(&jobs).unwrap();
        assert!(snaps[0].waiting.is_empty() && snaps[0].running.is_empty());
        assert_eq!(snaps[1].running.len(), 1);
        assert_eq!(snaps[1].running[0].job.job_id, 1);
        assert_eq!(snaps[1].running[0].elapsed, 50);
    }

    #[test]
    fn snapshot_after_termination_is_empty() {
        let jobs = vec![job(1, 0, 0, 100, 4), job(2, 150, 0, 10, 2)];
        let snaps = replay_collect(&jobs).unwrap();
        assert!(snaps[1].waiting.is_empty());
        assert!(snaps[1].running.is_empty());
    }

    #[test]
    fn termination_processed_before_simultaneous_submission() {
        let jobs = vec![job(1, 0, 0, 100, 4), job(2, 100, 0, 10, 2)];
        let snaps = replay_collect(&jobs).unwrap();
        assert!(snaps[1].running.is_empty());
    }

    #[test]
    fn waiting_job_visible_with_elapsed_wait() {
        let jobs = vec![job(1, 0, 60, 100, 4), job(2, 40, 0, 10, 2)];
        let snaps = replay_collect(&jobs).unwrap();
        assert_eq!(snaps[1].waiting.len(), 1);
        assert_eq!(snaps[1].waiting[0].elapsed, 40);
        assert!(snaps[1].running.is_empty());
    }

    #[test]
    fn unsorted_input_rejected() {
        let jobs = vec![job(1, 10, 0, 5, 1), job(2, 0, 0, 5, 1)];
        assert!(matches!(
            replay(&jobs, |_, _, _| {}),
            Err(SimStateError::UnsortedInput(1))
        ));
    }

    /// Brute-force interval-membership oracle: a job is waiting at t when
    /// submit <= t < start, running when start <= t < end.
    fn brute_snapshot(jobs: &[JobRecord], at: i64, exclude: usize) -> (Vec<u64>, Vec<u64>) {
        let mut waiting = Vec::new();
        let mut running = Vec::new();
        for (i, j) in jobs.iter().enumerate() {
            if i == exclude {
                continue;
            }
            if j.submit_time <= at && at < j.start_time() {
                waiting.push(j.job_id);
            } else if j.start_time() <= at && at < j.end_time() {
                running.push(j.job_id);
            }
        }
        (waiting, running)
    }

    #[test]
    fn replay_matches_interval_membership_oracle() {
        // Deterministic pseudo-random toy trace, 20 jobs.
        let mut jobs = Vec::new();
        let mut x: u64 = 12345;
        let mut next = |m: u64| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 33) % m
        };
        let mut t = 0i64;
        for id in 1..=20u64 {
            t += next(30) as i64;
            jobs.push(job(id, t, next(50) as i64, 1 + next(80) as i64, 1 + next(8) as i64));
        }
        let snaps = replay_collect(&jobs).unwrap();
        for (i, j) in jobs.iter().enumerate() {
            let (bw, br) = brute_snapshot(&jobs, j.submit_time, i);
            let got_w: Vec<u64> = snaps[i].waiting.iter().map(|e| e.job.job_id).collect();
            let got_r: Vec<u64> = snaps[i].running.iter().map(|e| e.job.job_id).collect();
            assert_eq!(got_w, bw, "waiting set at job {}", j.job_id);
            assert_eq!(got_r, br, "running set at job {}", j.job_id);
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let jobs = vec![
            job(1, 0, 5, 100, 4),
            job(2, 0, 2, 30, 2),
            job(3, 5, 0, 10, 1),
            job(4, 5, 9, 1, 8),
        ];
        let a = replay_collect(&jobs).unwrap();
        let b = replay_collect(&jobs).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn history_window_evicts_oldest() {
        let mut w = HistoryWindow::new(2);
        w.push(1);
        w.push(2);
        w.push(3);
        assert_eq!(w.iter().copied().collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn load_half_machine_for_full_hour() {
        let e = vec![Execution {
            start: 0,
            end: 3600,
            req_size: 50,
        }];
        assert_eq!(compute_load(&e, 0, 3600, 100), 0.5);
    }

    #[test]
    fn load_no_jobs_is_zero() {
        assert_eq!(compute_load(&[], 0, 3600, 100), 0.0);
    }

    #[test]
    fn load_saturated_machine_is_one() {
        let e = vec![
            Execution {
                start: -100,
                end: 4000,
                req_size: 60,
            },
            Execution {
                start: 0,
                end: 3600,
                req_size: 40,
            },
        ];
        assert_eq!(compute_load(&e, 0, 3600, 100), 1.0);
    }

    #[test]
    fn load_is_additive_and_monotone() {
        let a = Execution {
            start: 0,
            end: 1800,
            req_size: 10,
        };
        let b = Execution {
            start: 900,
            end: 2700,
            req_size: 20,
        };
        let la = compute_load(&[a], 0, 1800, 100);
        let lb = compute_load(&[b], 0, 1800, 100);
        let lab = compute_load(&[a, b], 0, 1800, 100);
        assert!((lab - (la + lb)).abs() < 1e-12);
        assert!(lab >= la && lab >= lb);
    }

    #[test]
    fn predict_load_constant_week() {
        // 50 procs of 100 busy for the whole week before t = 700000.
        let idx = LoadIndex::new(vec![Execution {
            start: 0,
            end: 800_000,
            req_size: 50,
        }]);
        let p = predict_load(&idx, 700_000, DEFAULT_LOAD_INTERVAL, DEFAULT_LOAD_WINDOW, 100)
            .unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn predict_load_symmetric_halves() {
        // Half the intervals at 0.2, half at 0.8.
        let mut execs = Vec::new();
        let week = DEFAULT_LOAD_WINDOW;
        let half = week / 2;
        execs.push(Execution {
            start: 0,
            end: half,
            req_size: 20,
        });
        execs.push(Execution {
            start: half,
            end: week,
            req_size: 80,
        });
        let idx = LoadIndex::new(execs);
        let p = predict_load(&idx, week, DEFAULT_LOAD_INTERVAL, week, 100).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn predict_load_matches_direct_interval_recomputation() {
        // Synthetic diurnal profile: occupancy alternates every 6 h.
        let mut execs = Vec::new();
        let week = DEFAULT_LOAD_WINDOW;
        let block = 6 * 3600;
        let mut t = 0;
        let mut heavy = true;
        while t < week {
            execs.push(Execution {
                start: t,
                end: t + block,
                req_size: if heavy { 90 } else { 15 },
            });
            heavy = !heavy;
            t += block;
        }
        let idx = LoadIndex::new(execs.clone());
        let target = week;
        let p = predict_load(&idx, target, DEFAULT_LOAD_INTERVAL, week, 100).unwrap();

        // Independent recomputation: 336 interval loads averaged directly.
        let n = week / DEFAULT_LOAD_INTERVAL;
        let mut acc = 0.0;
        for k in (1..=n).rev() {
            let t0 = target - k * DEFAULT_LOAD_INTERVAL;
            acc += compute_load(&execs, t0, DEFAULT_LOAD_INTERVAL, 100);
        }
        let expect = acc / n as f64;
        assert!((p - expect).abs() < 1e-12, "{p} vs {expect}");
    }

    #[test]
    fn predict_load_cold_start() {
        let idx = LoadIndex::new(vec![]);
        assert!(matches!(
            predict_load(&idx, 1000, 1800, 604800, 10),
            Err(SimStateError::LoadColdStart)
        ));
        // History exists but only after the target: still cold.
        let idx = LoadIndex::new(vec![Execution {
            start: 5000,
            end: 6000,
            req_size: 1,
        }]);
        assert!(predict_load(&idx, 1000, 1800, 604800, 10).is_err());
    }

    #[test]
    fn excluding_own_execution_measures_other_pressure() {
        let mine = Execution {
            start: 100,
            end: 200,
            req_size: 10,
        };
        let other = Execution {
            start: 0,
            end: 300,
            req_size: 30,
        };
        let idx = LoadIndex::new(vec![mine, other]);
        let with_self = idx.load_during(mine, 100, false);
        let without = idx.load_during(mine, 100, true);
        assert!((with_self - 0.4).abs() < 1e-12);
        assert!((without - 0.3).abs() < 1e-12);
    }
}
