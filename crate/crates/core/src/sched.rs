//! EASY backfilling scheduler simulator.
//!
//! FCFS with aggressive backfilling: the queue head holds the single
//! reservation, computed from the estimated (kill-time) ends of the running
//! jobs; any later job may start immediately if it fits in the free
//! processors and either finishes by the reservation per its own estimate
//! or only uses processors the reservation does not need. Jobs whose actual
//! runtime exceeds their estimate are killed at the estimate.
//!
//! The event loop is integer-second and fully deterministic. At one
//! timestamp: completions, a scheduling pass, arrivals, another scheduling
//! pass. A freed processor is therefore visible to a same-instant arrival,
//! and an arrival on an idle machine starts with zero wait.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchedError {
    #[error("job {job_id} requests {req_size} processors on a {procs}-processor system")]
    JobTooLarge {
        job_id: u64,
        req_size: i64,
        procs: i64,
    },
    #[error("job {job_id} submitted at {submit} but the clock is already at {clock}")]
    SubmitInPast { job_id: u64, submit: i64, clock: i64 },
    #[error("jobs are not sorted by submit time (index {0})")]
    UnsortedInput(usize),
    #[error("line {0}: malformed SimJob CSV record")]
    MalformedCsv(usize),
}

/// One job as the scheduler sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimJob {
    pub job_id: u64,
    pub submit_time: i64,
    pub req_size: i64,
    /// User estimate; the scheduler kills the job at this point.
    pub est_run: i64,
    pub actual_run: i64,
}

impl SimJob {
    /// Occupation time: the actual runtime truncated at the kill-time.
    pub fn effective_run(&self) -> i64 {
        self.actual_run.min(self.est_run).max(0)
    }
}

/// Scheduled outcome of one job.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleEntry {
    pub job_id: u64,
    pub submit_time: i64,
    pub req_size: i64,
    pub wait: i64,
    pub start: i64,
    pub end: i64,
    /// Reservation in force when the job first became queue head, if it
    /// ever waited there.
    pub reservation: Option<i64>,
}

/// State-change notifications since the last drain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimEvent {
    Started { job_id: u64, time: i64, wait: i64 },
    Completed { job_id: u64, time: i64 },
}

/// A running job, visible to policy code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunningView {
    pub job_id: u64,
    pub req_size: i64,
    pub est_run: i64,
    pub submit_time: i64,
    pub start: i64,
}

/// A waiting job, visible to policy code, in FCFS order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WaitingView {
    pub job_id: u64,
    pub req_size: i64,
    pub est_run: i64,
    pub submit_time: i64,
}

#[derive(Debug, Clone, Copy)]
struct Running {
    idx: usize,
    est_end: i64,
    real_end: i64,
}

#[derive(Debug)]
pub struct EasySimulator {
    procs: i64,
    free: i64,
    clock: i64,
    jobs: Vec<SimJob>,
    /// Pending future submissions: (submit, sequence, job index).
    arrivals: BinaryHeap<Reverse<(i64, u64, usize)>>,
    seq: u64,
    queue: VecDeque<usize>,
    running: Vec<Running>,
    finished: Vec<ScheduleEntry>,
    reservation: Vec<Option<i64>>,
    events: Vec<SimEvent>,
}

impl EasySimulator {
    pub fn new(procs: i64) -> Self {
        assert!(procs >= 1);
        EasySimulator {
            procs,
            free: procs,
            clock: i64::MIN,
            jobs: Vec::new(),
            arrivals: BinaryHeap::new(),
            seq: 0,
            queue: VecDeque::new(),
            running: Vec::new(),
            finished: Vec::new(),
            reservation: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn procs(&self) -> i64 {
        self.procs
    }

    pub fn clock(&self) -> i64 {
        self.clock
    }

    pub fn free_procs(&self) -> i64 {
        self.free
    }

    /// Enqueue a future submission. Jobs may be submitted in any order as
    /// long as their submit time has not already passed.
    pub fn submit(&mut self, job: SimJob) -> Result<(), SchedError> {
        if job.req_size > self.procs || job.req_size < 1 {
            return Err(SchedError::JobTooLarge {
                job_id: job.job_id,
                req_size: job.req_size,
                procs: self.procs,
            });
        }
        if self.clock != i64::MIN && job.submit_time < self.clock {
            return Err(SchedError::SubmitInPast {
                job_id: job.job_id,
                submit: job.submit_time,
                clock: self.clock,
            });
        }
        let idx = self.jobs.len();
        self.jobs.push(job);
        self.reservation.push(None);
        self.arrivals
            .push(Reverse((job.submit_time, self.seq, idx)));
        self.seq += 1;
        Ok(())
    }

    pub fn next_event_time(&self) -> Option<i64> {
        let arrival = self.arrivals.peek().map(|Reverse((t, _, _))| *t);
        let completion = self.running.iter().map(|r| r.real_end).min();
        match (arrival, completion) {
            (Some(a), Some(c)) => Some(a.min(c)),
            (Some(a), None) => Some(a),
            (None, Some(c)) => Some(c),
            (None, None) => None,
        }
    }

    /// Advance the clock to `t`, processing every event at or before it.
    pub fn advance_to(&mut self, t: i64) {
        while let Some(tick) = self.next_event_time() {
            if tick > t {
                break;
            }
            self.process_tick(tick);
        }
        if self.clock == i64::MIN || t > self.clock {
            self.clock = t;
        }
    }

    /// Run until no arrivals or running jobs remain.
    pub fn run_to_completion(&mut self) {
        while let Some(tick) = self.next_event_time() {
            self.process_tick(tick);
        }
    }

    fn process_tick(&mut self, tick: i64) {
        self.clock = tick;
        self.complete_finished(tick);
        self.schedule_pass();
        self.admit_arrivals(tick);
        self.schedule_pass();
    }

    fn complete_finished(&mut self, tick: i64) {
        let mut done: Vec<Running> = self
            .running
            .iter()
            .copied()
            .filter(|r| r.real_end <= tick)
            .collect();
        done.sort_by_key(|r| (r.real_end, r.idx));
        self.running.retain(|r| r.real_end > tick);
        for r in done {
            self.free += self.jobs[r.idx].req_size;
            self.record_finish(r.idx, r.real_end);
        }
        debug_assert!(self.free <= self.procs);
    }

    fn admit_arrivals(&mut self, tick: i64) {
        while let Some(Reverse((t, _, idx))) = self.arrivals.peek().copied() {
            if t > tick {
                break;
            }
            self.arrivals.pop();
            self.queue.push_back(idx);
        }
    }

    fn record_finish(&mut self, idx: usize, end: i64) {
        self.events.push(SimEvent::Completed {
            job_id: self.jobs[idx].job_id,
            time: end,
        });
    }

    fn start_job(&mut self, idx: usize) {
        let job = self.jobs[idx];
        let start = self.clock;
        let end = start + job.effective_run();
        self.free -= job.req_size;
        debug_assert!(self.free >= 0);
        self.finished.push(ScheduleEntry {
            job_id: job.job_id,
            submit_time: job.submit_time,
            req_size: job.req_size,
            wait: start - job.submit_time,
            start,
            end,
            reservation: self.reservation[idx],
        });
        self.events.push(SimEvent::Started {
            job_id: job.job_id,
            time: start,
            wait: start - job.submit_time,
        });
        if end > start {
            self.running.push(Running {
                idx,
                est_end: start + job.est_run.max(0),
                real_end: end,
            });
        } else {
            // Zero-length execution: finishes the instant it starts.
            self.free += job.req_size;
            self.record_finish(idx, end);
        }
    }

    /// Head reservation: the earliest time enough processors free up per
    /// the estimated ends, plus the processors left over at that time.
    fn head_reservation(&self, head_req: i64) -> (i64, i64) {
        let mut ends: Vec<(i64, usize)> =
            self.running.iter().map(|r| (r.est_end, r.idx)).collect();
        ends.sort_unstable();
        let mut avail = self.free;
        for (end, idx) in ends {
            avail += self.jobs[idx].req_size;
            if avail >= head_req {
                return (end, avail - head_req);
            }
        }
        // Unreachable when req <= procs, but stay defensive for callers
        // that drained the running set.
        (self.clock, self.procs - head_req)
    }

    fn schedule_pass(&mut self) {
        loop {
            // FCFS: start the head while it fits.
            while let Some(&head) = self.queue.front() {
                if self.jobs[head].req_size <= self.free {
                    self.queue.pop_front();
                    self.start_job(head);
                } else {
                    break;
                }
            }
            let Some(&head) = self.queue.front() else {
                return;
            };
            let (shadow_time, extra) = self.head_reservation(self.jobs[head].req_size);
            if self.reservation[head].is_none() {
                self.reservation[head] = Some(shadow_time);
            }
            // Backfill scan in FCFS order behind the head. Restart the
            // whole pass after any start so the reservation stays current.
            let mut started = None;
            for qi in 1..self.queue.len() {
                let idx = self.queue[qi];
                let job = &self.jobs[idx];
                if job.req_size > self.free {
                    continue;
                }
                let fits_window = self.clock + job.est_run.max(0) <= shadow_time;
                let fits_shadow = job.req_size <= extra;
                if fits_window || fits_shadow {
                    started = Some(qi);
                    break;
                }
            }
            match started {
                Some(qi) => {
                    let idx = self.queue.remove(qi).unwrap();
                    self.start_job(idx);
                }
                None => return,
            }
        }
    }

    /// Jobs currently running, sorted by start then id.
    pub fn running_view(&self) -> Vec<RunningView> {
        let mut v: Vec<RunningView> = self
            .running
            .iter()
            .map(|r| {
                let j = &self.jobs[r.idx];
                RunningView {
                    job_id: j.job_id,
                    req_size: j.req_size,
                    est_run: j.est_run,
                    submit_time: j.submit_time,
                    start: r.real_end - j.effective_run(),
                }
            })
            .collect();
        v.sort_by_key(|r| (r.start, r.job_id));
        v
    }

    /// Jobs currently queued, in FCFS order.
    pub fn waiting_view(&self) -> Vec<WaitingView> {
        self.queue
            .iter()
            .map(|&idx| {
                let j = &self.jobs[idx];
                WaitingView {
                    job_id: j.job_id,
                    req_size: j.req_size,
                    est_run: j.est_run,
                    submit_time: j.submit_time,
                }
            })
            .collect()
    }

    pub fn take_events(&mut self) -> Vec<SimEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty() && self.running.is_empty() && self.arrivals.is_empty()
    }

    /// Completed schedule entries, sorted by (start, job id).
    pub fn into_results(mut self) -> Vec<ScheduleEntry> {
        self.finished.sort_by_key(|e| (e.start, e.job_id));
        self.finished
    }
}

/// Outcome of a batch simulation.
#[derive(Debug, Clone, Default)]
pub struct SimOutcome {
    pub schedule: Vec<ScheduleEntry>,
    pub rejected: Vec<(u64, String)>,
}

/// Simulate a whole sorted job stream. Oversized jobs are rejected with an
/// error record instead of aborting the run.
pub fn run_simulation(jobs: &[SimJob], procs: i64) -> Result<SimOutcome, SchedError> {
    for w in 1..jobs.len() {
        if jobs[w].submit_time < jobs[w - 1].submit_time {
            return Err(SchedError::UnsortedInput(w));
        }
    }
    let mut sim = EasySimulator::new(procs);
    let mut rejected = Vec::new();
    for job in jobs {
        if let Err(e) = sim.submit(*job) {
            rejected.push((job.job_id, e.to_string()));
        }
    }
    sim.run_to_completion();
    Ok(SimOutcome {
        schedule: sim.into_results(),
        rejected,
    })
}

/// Percentage of CPU time spent executing over `horizon` seconds.
pub fn utilization(schedule: &[ScheduleEntry], procs: i64, horizon: i64) -> f64 {
    assert!(procs >= 1 && horizon > 0);
    let used: f64 = schedule
        .iter()
        .map(|e| (e.req_size * (e.end - e.start)) as f64)
        .sum();
    100.0 * used / (procs as f64 * horizon as f64)
}

/// Parse a SimJob CSV: `job_id,submit,procs,est,actual` per line, with an
/// optional header.
pub fn parse_sim_jobs_csv(text: &str) -> Result<Vec<SimJob>, SchedError> {
    let mut jobs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("job_id")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |idx: usize| -> Result<i64, SchedError> {
            fields
                .get(idx)
                .and_then(|f| f.parse::<i64>().ok())
                .ok_or(SchedError::MalformedCsv(i + 1))
        };
        if fields.len() != 5 {
            return Err(SchedError::MalformedCsv(i + 1));
        }
        jobs.push(SimJob {
            job_id: parse(0)? as u64,
            submit_time: parse(1)?,
            req_size: parse(2)?,
            est_run: parse(3)?,
            actual_run: parse(4)?,
        });
    }
    jobs.sort_by_key(|j| j.submit_time);
    Ok(jobs)
}

/// Per-job schedule CSV.
pub fn schedule_csv(schedule: &[ScheduleEntry]) -> String {
    let mut out = String::from("job_id,submit,procs,wait,start,end\n");
    for e in schedule {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.job_id, e.submit_time, e.req_size, e.wait, e.start, e.end
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(id: u64, submit: i64, req: i64, est: i64, actual: i64) -> SimJob {
        SimJob {
            job_id: id,
            submit_time: submit,
            req_size: req,
            est_run: est,
            actual_run: actual,
        }
    }

    fn entry(schedule: &[ScheduleEntry], id: u64) -> ScheduleEntry {
        *schedule.iter().find(|e| e.job_id == id).unwrap()
    }

    #[test]
    fn single_job_on_empty_machine_waits_zero() {
        let out = run_simulation(&[job(1, 100, 4, 50, 50)], 8).unwrap();
        let e = entry(&out.schedule, 1);
        assert_eq!((e.wait, e.start, e.end), (0, 100, 150));
    }

    #[test]
    fn short_job_backfills_ahead_of_blocked_head() {
        // P=4. J1 runs 2 procs for 10. J2 wants the whole machine and must
        // wait until t=10 for its reservation. J3 (2 procs, est 10) fits
        // beside J1 and finishes exactly at the reservation: it backfills.
        let jobs = [
            job(1, 0, 2, 10, 10),
            job(2, 0, 4, 10, 10),
            job(3, 0, 2, 10, 10),
        ];
        let out = run_simulation(&jobs, 4).unwrap();
        assert_eq!(entry(&out.schedule, 1).start, 0);
        assert_eq!(entry(&out.schedule, 3).start, 0);
        let e2 = entry(&out.schedule, 2);
        assert_eq!(e2.start, 10);
        assert_eq!(e2.reservation, Some(10));
    }

    #[test]
    fn long_estimate_cannot_backfill_past_reservation() {
        // Same as above but J3's estimate (15) overruns the reservation
        // and it does not fit in the shadow's spare processors.
        let jobs = [
            job(1, 0, 2, 10, 10),
            job(2, 0, 4, 10, 10),
            job(3, 0, 2, 15, 15),
        ];
        let out = run_simulation(&jobs, 4).unwrap();
        let e2 = entry(&out.schedule, 2);
        let e3 = entry(&out.schedule, 3);
        assert_eq!(e2.start, 10);
        assert_eq!(e3.start, 20, "J3 runs after J2 finishes");
    }

    #[test]
    fn backfill_on_spare_processors_outside_shadow() {
        // P=8. J1 holds 4 procs until t=100. J2 (head) wants 6: reservation
        // at t=100 with 2 spare. J3 wants 2 with a huge estimate: it still
        // backfills because it fits the spare processors.
        let jobs = [
            job(1, 0, 4, 100, 100),
            job(2, 0, 6, 50, 50),
            job(3, 0, 2, 1000, 900),
        ];
        let out = run_simulation(&jobs, 8).unwrap();
        assert_eq!(entry(&out.schedule, 3).start, 0);
        assert_eq!(entry(&out.schedule, 2).start, 100);
    }

    #[test]
    fn actual_runtime_is_killed_at_estimate() {
        let out = run_simulation(&[job(1, 0, 1, 10, 25)], 2).unwrap();
        assert_eq!(entry(&out.schedule, 1).end, 10);
    }

    #[test]
    fn oversized_job_is_rejected_with_record() {
        let out = run_simulation(&[job(1, 0, 16, 10, 10), job(2, 0, 2, 5, 5)], 8).unwrap();
        assert_eq!(out.rejected.len(), 1);
        assert_eq!(out.rejected[0].0, 1);
        assert_eq!(out.schedule.len(), 1);
    }

    #[test]
    fn early_completion_frees_processors_for_same_instant_arrival() {
        // J1 finishes at t=50 (early); J2 arrives exactly at 50 and starts
        // immediately.
        let jobs = [job(1, 0, 8, 100, 50), job(2, 50, 8, 10, 10)];
        let out = run_simulation(&jobs, 8).unwrap();
        assert_eq!(entry(&out.schedule, 2).start, 50);
    }

    #[test]
    fn full_machine_jobs_reduce_to_fcfs() {
        let jobs: Vec<SimJob> = (0..20)
            .map(|i| job(i + 1, (i as i64) * 3, 8, 40 + i as i64, 40 + i as i64))
            .collect();
        let out = run_simulation(&jobs, 8).unwrap();
        // FCFS oracle: each job starts at max(submit, previous end).
        let mut t = 0i64;
        for (i, j) in jobs.iter().enumerate() {
            let start = t.max(j.submit_time);
            let e = entry(&out.schedule, i as u64 + 1);
            assert_eq!(e.start, start, "job {}", j.job_id);
            t = start + j.effective_run();
        }
    }

    fn pseudo_random_jobs(seed: u64, n: usize, procs: i64) -> Vec<SimJob> {
        let mut x = seed;
        let mut next = |m: u64| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 33) % m
        };
        let mut t = 0i64;
        (0..n)
            .map(|i| {
                t += next(30) as i64;
                let actual = next(200) as i64;
                let est = actual + next(100) as i64;
                job(i as u64 + 1, t, 1 + next(procs as u64) as i64, est, actual)
            })
            .collect()
    }

    #[test]
    fn random_traces_conserve_processors_and_reservations() {
        let procs = 32;
        let jobs = pseudo_random_jobs(42, 2000, procs);
        let out = run_simulation(&jobs, procs).unwrap();
        assert!(out.rejected.is_empty());
        assert_eq!(out.schedule.len(), jobs.len());

        // Processor conservation at every event boundary.
        let mut events: Vec<(i64, i64)> = Vec::new();
        for e in &out.schedule {
            events.push((e.start, e.req_size));
            events.push((e.end, -e.req_size));
        }
        events.sort_unstable();
        let mut in_use = 0i64;
        let mut grouped = events.iter().peekable();
        while let Some(&&(t, _)) = grouped.peek() {
            // Releases sort before acquisitions at one instant because
            // negative deltas come first in the tuple ordering.
            while let Some(&&(t2, d)) = grouped.peek() {
                if t2 != t {
                    break;
                }
                in_use += d;
                grouped.next();
            }
            assert!(in_use <= procs, "over-allocation at t={t}");
            assert!(in_use >= 0);
        }

        // No job that held a reservation while queue head starts past it.
        for e in &out.schedule {
            if let Some(r) = e.reservation {
                assert!(e.start <= r, "job {} started {} after reservation {r}", e.job_id, e.start);
            }
        }
    }

    #[test]
    fn repeated_runs_are_byte_identical() {
        let jobs = pseudo_random_jobs(7, 1000, 16);
        let a = schedule_csv(&run_simulation(&jobs, 16).unwrap().schedule);
        let b = schedule_csv(&run_simulation(&jobs, 16).unwrap().schedule);
        assert_eq!(a, b);
    }

    #[test]
    fn utilization_examples() {
        // Fully busy machine over the horizon.
        let full = vec![ScheduleEntry {
            job_id: 1,
            submit_time: 0,
            req_size: 8,
            wait: 0,
            start: 0,
            end: 100,
            reservation: None,
        }];
        assert_eq!(utilization(&full, 8, 100), 100.0);
        // 50 procs for an hour on a 100-proc machine over an hour.
        let half = vec![ScheduleEntry {
            job_id: 1,
            submit_time: 0,
            req_size: 50,
            wait: 0,
            start: 0,
            end: 3600,
            reservation: None,
        }];
        assert_eq!(utilization(&half, 100, 3600), 50.0);
    }

    #[test]
    fn utilization_matches_direct_recomputation() {
        let jobs = pseudo_random_jobs(99, 300, 16);
        let out = run_simulation(&jobs, 16).unwrap();
        let horizon = out.schedule.iter().map(|e| e.end).max().unwrap();
        let direct: f64 = out
            .schedule
            .iter()
            .map(|e| (e.req_size * (e.end - e.start)) as f64)
            .sum::<f64>()
            / (16.0 * horizon as f64)
            * 100.0;
        assert!((utilization(&out.schedule, 16, horizon) - direct).abs() < 1e-12);
    }

    #[test]
    fn incremental_api_matches_batch_run() {
        let jobs = pseudo_random_jobs(3, 500, 16);
        let batch = run_simulation(&jobs, 16).unwrap();

        let mut sim = EasySimulator::new(16);
        for j in &jobs {
            sim.advance_to(j.submit_time - 1);
            sim.submit(*j).unwrap();
        }
        sim.run_to_completion();
        let inc = sim.into_results();
        assert_eq!(batch.schedule, inc);
    }

    #[test]
    fn sim_jobs_csv_round_trips_through_the_simulator() {
        let text = "job_id,submit,procs,est,actual\n1,0,4,50,50\n2,10,2,20,15\n";
        let jobs = parse_sim_jobs_csv(text).unwrap();
        assert_eq!(jobs.len(), 2);
        assert_eq!(jobs[1].effective_run(), 15);
        let out = run_simulation(&jobs, 8).unwrap();
        assert_eq!(out.schedule.len(), 2);
        assert!(parse_sim_jobs_csv("1,2,3\n").is_err());
    }

    #[test]
    fn views_reflect_queue_and_machine() {
        let mut sim = EasySimulator::new(4);
        sim.submit(job(1, 0, 4, 100, 100)).unwrap();
        sim.submit(job(2, 10, 2, 50, 50)).unwrap();
        sim.advance_to(20);
        let running = sim.running_view();
        let waiting = sim.waiting_view();
        assert_eq!(running.len(), 1);
        assert_eq!(running[0].job_id, 1);
        assert_eq!(running[0].start, 0);
        assert_eq!(waiting.len(), 1);
        assert_eq!(waiting[0].job_id, 2);
        let events = sim.take_events();
        assert!(events
            .iter()
            .any(|e| matches!(e, SimEvent::Started { job_id: 1, .. })));
    }
}
