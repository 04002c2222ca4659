//! Policy simulations: replay a trace through the EASY scheduler either
//! untouched (baseline), with request-size molding, or with molding plus
//! delayed submissions.
//!
//! The predictors run online inside the simulation: a job's submission
//! state enters the wait predictor when the scheduler starts it, and its
//! execution sample enters the tuple history when it completes. Jobs
//! before the policy range pass through unmanaged and only feed the
//! predictors.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::exectime::{
    build_load_functions, point_from_rangeset, predict_rangeset, ExecHistory, ExecSample,
    LoadFunctionSet, ResponseRangeSet, TimeRange, TupleKey, WeightedRange,
};
use crate::manager::{
    decide_delay, find_future_time, mold_job, sample_actual_runtime, set_estimated_runtime,
    DelayDecision, HoldQueue, MoldDecision,
};
use crate::metrics::cpu_hour_class;
use crate::qwait::{build_state, JobState, QwaitConfig, StateBinning, WaitPredictor};
use crate::sched::{EasySimulator, SimEvent, SimJob};
use crate::simstate::{predict_load, Execution, LoadIndex, SnapshotEntry, SystemSnapshot};
use crate::trace::JobRecord;

use super::predict::exec_samples;
use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Baseline,
    Mold,
    Delay,
}

impl Policy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Policy::Baseline => "baseline",
            Policy::Mold => "mold",
            Policy::Delay => "delay",
        }
    }
}

/// Outcome of one job in a managed run. Queue wait is measured from the
/// original submission to the manager, so hold time counts as waiting.
#[derive(Debug, Clone, Copy)]
pub struct ManagedRow {
    pub job_id: u64,
    pub original_submit: i64,
    pub scheduler_submit: i64,
    pub original_req: i64,
    pub final_req: i64,
    pub qwait: i64,
    pub exec: i64,
    pub response: i64,
}

/// One molding / delay decision, for the decision log.
#[derive(Debug, Clone)]
pub struct DecisionRow {
    pub job_id: u64,
    pub at: i64,
    pub original_req: i64,
    pub chosen_req: i64,
    pub candidate_scores: Vec<(i64, f64)>,
    pub delayed_to: Option<i64>,
    pub pass_through: bool,
}

/// A held job that was released, with order information.
#[derive(Debug, Clone, Copy)]
pub struct ReleaseRow {
    pub job_id: u64,
    pub original_submit: i64,
    pub released_at: i64,
}

#[derive(Debug, Clone)]
pub struct ManagedReport {
    pub policy: Policy,
    pub rows: Vec<ManagedRow>,
    pub decisions: Vec<DecisionRow>,
    pub releases: Vec<ReleaseRow>,
    pub avg_qwait: f64,
    pub avg_exec: f64,
    pub avg_response: f64,
    pub utilization: f64,
    /// Mean response per CPU-hour class of the managed range.
    pub class_response: [Option<f64>; 5],
    /// System load per interval over the run.
    pub load_series: Vec<(i64, f64)>,
}

pub fn managed_rows_csv(rows: &[ManagedRow]) -> String {
    let mut out = String::from(
        "job_id,original_submit,scheduler_submit,original_req,final_req,qwait,exec,response\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.job_id,
            r.original_submit,
            r.scheduler_submit,
            r.original_req,
            r.final_req,
            r.qwait,
            r.exec,
            r.response
        ));
    }
    out
}

pub fn decisions_csv(decisions: &[DecisionRow]) -> String {
    let mut out =
        String::from("job_id,at,original_req,chosen_req,delayed_to,pass_through,scores\n");
    for d in decisions {
        let scores = d
            .candidate_scores
            .iter()
            .map(|(req, s)| format!("{req}:{s:.6}"))
            .collect::<Vec<_>>()
            .join("|");
        let delayed = d
            .delayed_to
            .map_or_else(|| "-".to_string(), |t| t.to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            d.job_id, d.at, d.original_req, d.chosen_req, delayed, d.pass_through, scores
        ));
    }
    out
}

/// Meta information the simulator does not carry.
struct JobMeta {
    record: JobRecord,
    original_submit: i64,
}

/// Everything the policy engine tracks while the simulation runs.
struct Engine<'a> {
    cfg: &'a ExperimentConfig,
    procs: i64,
    binning: StateBinning,
    predictor: WaitPredictor,
    exec_history: ExecHistory,
    functions: LoadFunctionSet,
    rng: ChaCha8Rng,
    sim: EasySimulator,
    meta: BTreeMap<u64, JobMeta>,
    /// Submission states stashed until the wait resolves.
    pending_states: BTreeMap<u64, JobState>,
    /// All executions started so far: (start, end or running, req).
    executions: Vec<(i64, Option<i64>, i64, u64)>,
    /// Per-user max previous estimate per request size.
    max_ert: BTreeMap<(i64, i64), i64>,
    decisions: Vec<DecisionRow>,
    releases: Vec<ReleaseRow>,
}

impl<'a> Engine<'a> {
    /// Load index over everything that has executed so far; running jobs
    /// count up to `now`.
    fn load_index(&self, now: i64) -> LoadIndex {
        let execs: Vec<Execution> = self
            .executions
            .iter()
            .map(|&(start, end, req, _)| Execution {
                start,
                end: end.unwrap_or(now.max(start)),
                req_size: req,
            })
            .collect();
        LoadIndex::new(execs)
    }

    fn predicted_load(&self, at: i64) -> f64 {
        predict_load(
            &self.load_index(at),
            at,
            self.cfg.load.interval,
            self.cfg.load.window,
            self.procs,
        )
        .unwrap_or(0.0)
    }

    /// Observed load of a completed execution, excluding itself.
    fn observed_load(&self, start: i64, end: i64, job_id: u64) -> f64 {
        if end <= start {
            return 0.0;
        }
        let dur = (end - start) as f64;
        let mut used = 0.0;
        for &(s, e, req, id) in &self.executions {
            if id == job_id {
                continue;
            }
            let e = e.unwrap_or(end);
            let lo = s.max(start);
            let hi = e.min(end);
            if hi > lo {
                used += (hi - lo) as f64 * req as f64;
            }
        }
        (used / (dur * self.procs as f64)).clamp(0.0, 1.0)
    }

    /// Snapshot of the scheduler state as the predictors expect it.
    fn snapshot(&self, at: i64) -> SystemSnapshot {
        let mut snap = SystemSnapshot::empty(at);
        for w in self.sim.waiting_view() {
            if let Some(meta) = self.meta.get(&w.job_id) {
                let mut rec = meta.record.clone();
                rec.req_size = w.req_size;
                rec.ert = w.est_run;
                rec.submit_time = w.submit_time;
                snap.waiting.push(SnapshotEntry {
                    job: rec,
                    elapsed: at - w.submit_time,
                });
            }
        }
        for r in self.sim.running_view() {
            if let Some(meta) = self.meta.get(&r.job_id) {
                let mut rec = meta.record.clone();
                rec.req_size = r.req_size;
                rec.ert = r.est_run;
                rec.submit_time = r.submit_time;
                snap.running.push(SnapshotEntry {
                    job: rec,
                    elapsed: at - r.start,
                });
            }
        }
        snap
    }

    /// Projected snapshot at the future time: running jobs predicted to be
    /// done by then are gone, everything else ages forward.
    fn projected_snapshot(&self, future: i64) -> SystemSnapshot {
        let mut snap = SystemSnapshot::empty(future);
        for w in self.sim.waiting_view() {
            if let Some(meta) = self.meta.get(&w.job_id) {
                let mut rec = meta.record.clone();
                rec.req_size = w.req_size;
                rec.ert = w.est_run;
                rec.submit_time = w.submit_time;
                snap.waiting.push(SnapshotEntry {
                    job: rec,
                    elapsed: future - w.submit_time,
                });
            }
        }
        for r in self.sim.running_view() {
            if self.predicted_completion(&r) <= future {
                continue;
            }
            if let Some(meta) = self.meta.get(&r.job_id) {
                let mut rec = meta.record.clone();
                rec.req_size = r.req_size;
                rec.ert = r.est_run;
                rec.submit_time = r.submit_time;
                snap.running.push(SnapshotEntry {
                    job: rec,
                    elapsed: future - r.start,
                });
            }
        }
        snap
    }

    fn predicted_completion(&self, r: &crate::sched::RunningView) -> i64 {
        let key = self
            .meta
            .get(&r.job_id)
            .map(|m| {
                let mut k = TupleKey::of(&m.record);
                k.req_size = r.req_size;
                k
            })
            .unwrap_or(TupleKey {
                user_id: -1,
                req_size: r.req_size,
                queue_id: -1,
                group_id: -1,
            });
        let history = self.exec_history.for_key(&key);
        let exec = if history.is_empty() {
            r.est_run as f64
        } else {
            let load = self.predicted_load(self.sim.clock());
            match predict_rangeset(history, &self.functions.functions, load, &self.cfg.exec) {
                Ok(rs) => point_from_rangeset(&rs),
                Err(_) => r.est_run as f64,
            }
        };
        r.start + exec.round().max(0.0) as i64
    }

    /// Candidate request sizes: every size this user has completed jobs at.
    fn candidate_sizes(&self, user: i64) -> Vec<i64> {
        self.exec_history
            .req_sizes_of_user(user)
            .into_iter()
            .filter(|&r| r >= 1 && r <= self.procs)
            .collect()
    }

    fn candidate_ert(&self, job: &JobRecord, req: i64) -> i64 {
        let max_prev = self.max_ert.get(&(job.user_id, req)).copied();
        set_estimated_runtime(
            job.ert,
            req,
            job.req_size,
            max_prev,
            self.cfg.manager.max_ert_limit,
        )
    }

    /// Evaluate all candidate sizes of the user against a snapshot.
    fn mold_at(&self, job: &JobRecord, snapshot: &SystemSnapshot, load: f64) -> MoldDecision {
        let sizes = self.candidate_sizes(job.user_id);
        mold_job(&sizes, |req| {
            let ert = self.candidate_ert(job, req);
            let mut candidate = job.clone();
            candidate.req_size = req;
            candidate.ert = ert;
            let state = build_state(snapshot, &candidate, &self.binning);
            let qwait = self.predictor.predict(&state).ok()?.seconds;
            let key = TupleKey::of(job).with_req_size(req);
            let exec_rs =
                match predict_rangeset(self.exec_history.for_key(&key), &self.functions.functions, load, &self.cfg.exec) {
                    Ok(rs) => rs,
                    // No execution history for the tuple: the user estimate
                    // stands in as a degenerate range.
                    Err(_) => ResponseRangeSet {
                        ranges: vec![WeightedRange {
                            range: TimeRange::new(ert.max(0) as f64, ert.max(0) as f64),
                            probability: 1.0,
                        }],
                    },
                };
            Some((qwait, exec_rs))
        })
    }

    /// Turn a molding decision into the job actually submitted.
    fn realize(&mut self, job: &JobRecord, decision: &MoldDecision, submit_at: i64) -> SimJob {
        let final_req = decision.chosen_req_size(job.req_size);
        let (est, actual) = if final_req == job.req_size {
            (job.ert, job.run_time)
        } else {
            let key = TupleKey::of(job).with_req_size(final_req);
            let history: Vec<i64> = self
                .exec_history
                .for_key(&key)
                .iter()
                .map(|s| s.exec.round() as i64)
                .collect();
            let actual = sample_actual_runtime(&history, &mut self.rng)
                .unwrap_or(job.run_time);
            (self.candidate_ert(job, final_req), actual)
        };
        SimJob {
            job_id: job.job_id,
            submit_time: submit_at,
            req_size: final_req,
            est_run: est,
            actual_run: actual,
        }
    }

    /// Submit to the scheduler and stash the submission state for the wait
    /// predictor.
    fn submit(&mut self, record: &JobRecord, sim_job: SimJob, original_submit: i64) {
        let snapshot = self.snapshot(sim_job.submit_time);
        let mut as_submitted = record.clone();
        as_submitted.req_size = sim_job.req_size;
        as_submitted.ert = sim_job.est_run;
        let state = build_state(&snapshot, &as_submitted, &self.binning);
        self.pending_states.insert(sim_job.job_id, state);
        self.meta.insert(
            sim_job.job_id,
            JobMeta {
                record: as_submitted,
                original_submit,
            },
        );
        self.max_ert
            .entry((record.user_id, sim_job.req_size))
            .and_modify(|e| *e = (*e).max(sim_job.est_run))
            .or_insert(sim_job.est_run);
        self.sim.submit(sim_job).expect("validated submission");
    }

    /// Drain scheduler events into the predictors.
    fn absorb_events(&mut self) {
        for event in self.sim.take_events() {
            match event {
                SimEvent::Started { job_id, time, wait } => {
                    if let Some(state) = self.pending_states.remove(&job_id) {
                        self.predictor.observe(state, wait as f64);
                    }
                    if let Some(meta) = self.meta.get(&job_id) {
                        self.executions.push((
                            time,
                            None,
                            meta.record.req_size,
                            job_id,
                        ));
                    }
                }
                SimEvent::Completed { job_id, time } => {
                    let mut exec_info = None;
                    for e in self.executions.iter_mut() {
                        if e.3 == job_id && e.1.is_none() {
                            e.1 = Some(time);
                            exec_info = Some((e.0, time, e.2));
                            break;
                        }
                    }
                    if let (Some((start, end, req)), Some(meta)) =
                        (exec_info, self.meta.get(&job_id))
                    {
                        let mut key = TupleKey::of(&meta.record);
                        key.req_size = req;
                        let load = self.observed_load(start, end, job_id);
                        self.exec_history.push(
                            key,
                            ExecSample {
                                at: end,
                                load,
                                exec: (end - start) as f64,
                            },
                        );
                    }
                }
            }
        }
    }
}

/// Run one policy over the trace.
pub fn run_managed(
    jobs: &[JobRecord],
    procs: i64,
    cfg: &ExperimentConfig,
    policy: Policy,
) -> Result<ManagedReport, ExperimentError> {
    let split = cfg.split_for(jobs.len());
    split.validate(jobs.len())?;
    let policy_start = split.test.start.min(jobs.len());

    // Warm pieces computed from the recorded trace: histogram bounds and
    // load functions from the pre-test prefix.
    let calibration: &[JobRecord] = if split.validation.is_empty() {
        &jobs[..policy_start.max(1).min(jobs.len())]
    } else {
        &jobs[split.validation.clone()]
    };
    let binning = StateBinning::calibrate(cfg.qwait.bins, calibration);
    let functions = if policy == Policy::Baseline {
        LoadFunctionSet::default()
    } else {
        let index = LoadIndex::from_jobs(jobs.iter());
        let mut per_key = BTreeMap::<TupleKey, Vec<ExecSample>>::new();
        let fn_slice = if split.validation.is_empty() {
            &jobs[..policy_start]
        } else {
            &jobs[split.validation.clone()]
        };
        for (key, sample) in exec_samples(fn_slice, &index, procs) {
            per_key.entry(key).or_default().push(sample);
        }
        build_load_functions(&per_key, &cfg.loadfn)
    };

    let mut qcfg: QwaitConfig = cfg.qwait.clone();
    if let Some(mode) = cfg.fixed_mode() {
        qcfg.mode = mode;
    }
    let mut engine = Engine {
        cfg,
        procs,
        binning,
        predictor: WaitPredictor::new(qcfg),
        exec_history: ExecHistory::new(),
        functions,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        sim: EasySimulator::new(procs),
        meta: BTreeMap::new(),
        pending_states: BTreeMap::new(),
        executions: Vec::new(),
        max_ert: BTreeMap::new(),
        decisions: Vec::new(),
        releases: Vec::new(),
    };

    // Manager event loop: original arrivals interleaved with hold-queue
    // releases.
    let mut arrivals = jobs.iter().enumerate().peekable();
    let mut pending_releases: Vec<(i64, u64, JobRecord, i64)> = Vec::new(); // (time, seq, job, orig)
    let mut release_seq = 0u64;
    let mut episode: Option<HoldQueue<JobRecord>> = None;

    loop {
        let next_arrival = arrivals.peek().map(|(_, j)| j.submit_time);
        let next_release = pending_releases.first().map(|r| r.0);
        let episode_release = episode.as_ref().map(|e| e.release_time());

        let candidates = [next_arrival, next_release, episode_release];
        let Some(now) = candidates.iter().flatten().min().copied() else {
            break;
        };

        engine.sim.advance_to(now);
        engine.absorb_events();

        // Close an episode whose release time has come: queue its jobs as
        // pending releases (molded individually when their slot arrives).
        if episode.as_ref().is_some_and(|e| e.release_time() <= now) {
            let hq = episode.take().unwrap();
            for release in hq.release() {
                pending_releases.push((
                    release.submit_at,
                    release_seq,
                    release.job,
                    release.original_submit,
                ));
                release_seq += 1;
            }
            pending_releases.sort_by_key(|r| (r.0, r.1));
            continue;
        }

        if next_release == Some(now)
            && next_arrival.map_or(true, |a| now <= a)
        {
            let (_, _, record, original_submit) = pending_releases.remove(0);
            engine.releases.push(ReleaseRow {
                job_id: record.job_id,
                original_submit,
                released_at: now,
            });
            let load = engine.predicted_load(now);
            let snapshot = engine.snapshot(now);
            let decision = engine.mold_at(&record, &snapshot, load);
            log_decision(&mut engine.decisions, &record, now, &decision, None);
            let sim_job = engine.realize(&record, &decision, now);
            engine.submit(&record, sim_job, original_submit);
            continue;
        }

        let Some((idx, record)) = arrivals.next() else {
            continue;
        };
        let record = record.clone();
        let managed = policy != Policy::Baseline && idx >= policy_start;

        // Jobs arriving while a hold episode is open join it unevaluated.
        if let Some(hq) = episode.as_mut() {
            hq.enqueue(record.clone(), record.submit_time);
            continue;
        }

        if !managed {
            let sim_job = SimJob {
                job_id: record.job_id,
                submit_time: record.submit_time,
                req_size: record.req_size,
                est_run: record.ert,
                actual_run: record.run_time,
            };
            engine.submit(&record, sim_job, record.submit_time);
            continue;
        }

        let load = engine.predicted_load(now);
        let snapshot = engine.snapshot(now);
        let decision = engine.mold_at(&record, &snapshot, load);

        if policy == Policy::Delay && decision.chosen_candidate().is_some() {
            let running = engine.sim.running_view();
            if !running.is_empty() {
                let completions: Vec<i64> = running
                    .iter()
                    .map(|r| engine.predicted_completion(r))
                    .collect();
                let future = find_future_time(&completions, now, cfg.manager.future_slack);
                if future > now {
                    let projected = engine.projected_snapshot(future);
                    let future_load = engine.predicted_load(future);
                    let future_decision = engine.mold_at(&record, &projected, future_load);
                    if let (Some(cur), Some(fut)) = (
                        decision.chosen_candidate(),
                        future_decision.chosen_candidate(),
                    ) {
                        if decide_delay(
                            &cur.response,
                            &fut.response,
                            future,
                            cfg.manager.delay_threshold,
                        ) == DelayDecision::DelayTo(future)
                        {
                            log_decision(
                                &mut engine.decisions,
                                &record,
                                now,
                                &decision,
                                Some(future),
                            );
                            episode = Some(HoldQueue::new(
                                record.clone(),
                                record.submit_time,
                                future,
                            ));
                            continue;
                        }
                    }
                }
            }
        }

        log_decision(&mut engine.decisions, &record, now, &decision, None);
        let sim_job = engine.realize(&record, &decision, now.max(record.submit_time));
        engine.submit(&record, sim_job, record.submit_time);
    }

    engine.sim.run_to_completion();
    engine.absorb_events();

    let meta = std::mem::take(&mut engine.meta);
    let decisions = std::mem::take(&mut engine.decisions);
    let releases = std::mem::take(&mut engine.releases);
    let schedule = engine.sim.into_results();

    let mut rows = Vec::with_capacity(schedule.len());
    for e in &schedule {
        let m = &meta[&e.job_id];
        let orig = jobs
            .iter()
            .find(|j| j.job_id == e.job_id)
            .expect("job came from the trace");
        let qwait = e.start - m.original_submit;
        let exec = e.end - e.start;
        rows.push(ManagedRow {
            job_id: e.job_id,
            original_submit: m.original_submit,
            scheduler_submit: e.submit_time,
            original_req: orig.req_size,
            final_req: e.req_size,
            qwait,
            exec,
            response: qwait + exec,
        });
    }
    rows.sort_by_key(|r| (r.original_submit, r.job_id));

    // Averages over the managed range only, so policies are compared on
    // the jobs they actually touch.
    let managed_rows: Vec<&ManagedRow> = rows
        .iter()
        .filter(|r| {
            jobs.iter()
                .position(|j| j.job_id == r.job_id)
                .is_some_and(|i| i >= policy_start)
        })
        .collect();
    let denom = managed_rows.len().max(1) as f64;
    let avg_qwait = managed_rows.iter().map(|r| r.qwait as f64).sum::<f64>() / denom;
    let avg_exec = managed_rows.iter().map(|r| r.exec as f64).sum::<f64>() / denom;
    let avg_response = managed_rows.iter().map(|r| r.response as f64).sum::<f64>() / denom;

    let mut class_sum = [0.0; 5];
    let mut class_count = [0usize; 5];
    for r in &managed_rows {
        let c = cpu_hour_class(r.final_req as f64 * r.exec as f64 / 3600.0);
        class_sum[c] += r.response as f64;
        class_count[c] += 1;
    }
    let mut class_response = [None; 5];
    for i in 0..5 {
        if class_count[i] > 0 {
            class_response[i] = Some(class_sum[i] / class_count[i] as f64);
        }
    }

    let horizon_start = jobs.first().map(|j| j.submit_time).unwrap_or(0);
    let horizon_end = schedule.iter().map(|e| e.end).max().unwrap_or(horizon_start + 1);
    let horizon = (horizon_end - horizon_start).max(1);
    let executions: Vec<Execution> = schedule
        .iter()
        .map(|e| Execution {
            start: e.start,
            end: e.end,
            req_size: e.req_size,
        })
        .collect();
    let utilization = crate::sched::utilization(&schedule, procs, horizon);

    let mut load_series = Vec::new();
    let mut t = horizon_start;
    while t < horizon_end {
        load_series.push((
            t,
            crate::simstate::compute_load(&executions, t, cfg.load.interval, procs),
        ));
        t += cfg.load.interval;
    }

    Ok(ManagedReport {
        policy,
        rows,
        decisions,
        releases,
        avg_qwait,
        avg_exec,
        avg_response,
        utilization,
        class_response,
        load_series,
    })
}

fn log_decision(
    decisions: &mut Vec<DecisionRow>,
    record: &JobRecord,
    at: i64,
    decision: &MoldDecision,
    delayed_to: Option<i64>,
) {
    let (chosen_req, scores, pass_through) = match decision {
        MoldDecision::PassThrough => (record.req_size, Vec::new(), true),
        MoldDecision::Chosen { chosen, candidates } => (
            candidates[*chosen].req_size,
            candidates
                .iter()
                .map(|c| (c.req_size, c.score))
                .collect(),
            false,
        ),
    };
    decisions.push(DecisionRow {
        job_id: record.job_id,
        at,
        original_req: record.req_size,
        chosen_req,
        candidate_scores: scores,
        delayed_to,
        pass_through,
    });
}
