//! Offline prediction runs over a recorded trace: queue waits at every
//! test submission, and execution-time range sets per tuple.

use std::ops::Range;

use crate::config::ExperimentConfig;
use crate::exectime::{
    baseline_range, build_load_functions, point_from_rangeset, predict_rangeset, ExecHistory,
    ExecSample, LoadFunctionSet, ResponseRangeSet, TimeRange, TupleKey,
};
use crate::metrics::{self, RangeQuality};
use crate::qwait::{
    build_state, choose_statistic_mode, JobState, ModelKind, NeighborhoodCase, QwaitConfig,
    StateBinning, StatisticMode, WaitPredictor,
};
use crate::simstate::{self, Execution, LoadIndex};
use crate::trace::JobRecord;

use super::ExperimentError;

/// One scored wait prediction.
#[derive(Debug, Clone)]
pub struct WaitRow {
    pub job_id: u64,
    pub prediction: f64,
    pub actual: f64,
    pub response: f64,
    pub model: ModelKind,
    pub case: NeighborhoodCase,
}

#[derive(Debug, Clone)]
pub struct WaitReport {
    pub rows: Vec<WaitRow>,
    pub mode: StatisticMode,
    pub aae: f64,
    pub scaled_aae: f64,
    pub class_aae: [Option<f64>; 5],
    pub cold_starts: usize,
}

fn case_name(case: NeighborhoodCase) -> &'static str {
    match case {
        NeighborhoodCase::FarNeighbors => "far",
        NeighborhoodCase::DenseCluster => "dense",
        NeighborhoodCase::ScatteredNeighbors => "scattered",
    }
}

pub fn wait_rows_csv(rows: &[WaitRow]) -> String {
    let mut out = String::from("job_id,model,case,prediction,actual,response\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.job_id,
            r.model.as_str(),
            case_name(r.case),
            r.prediction,
            r.actual,
            r.response
        ));
    }
    out
}

/// States of every job at its own submission instant, index-aligned.
pub fn submission_states(jobs: &[JobRecord], binning: &StateBinning) -> Result<Vec<JobState>, ExperimentError> {
    let mut states: Vec<Option<JobState>> = vec![None; jobs.len()];
    simstate::replay(jobs, |idx, job, snapshot| {
        states[idx] = Some(build_state(snapshot, job, binning));
    })?;
    Ok(states.into_iter().map(Option::unwrap).collect())
}

/// Per-submission state dump: queue/processor counts plus the sixteen
/// feature values at every submission instant.
pub fn state_dump_csv(jobs: &[JobRecord], binning: &StateBinning) -> Result<String, ExperimentError> {
    let mut out = String::from("job_id,at_time,waiting,running,");
    out.push_str(&crate::qwait::FEATURE_NAMES.join(","));
    out.push('\n');
    simstate::replay(jobs, |_, job, snapshot| {
        let state = build_state(snapshot, job, binning);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            job.job_id,
            snapshot.at_time,
            snapshot.waiting.len(),
            snapshot.running.len(),
            state.features
        ));
    })?;
    Ok(out)
}

/// Online wait-prediction replay: a job's state enters the predictor
/// history when its wait resolves (at its start), and every submission in
/// the scored range is predicted first.
pub fn run_predict_wait_scored(
    jobs: &[JobRecord],
    cfg: &ExperimentConfig,
    scored: Range<usize>,
) -> Result<WaitReport, ExperimentError> {
    let split = cfg.split_for(jobs.len());
    split.validate(jobs.len())?;
    let calibration: &[JobRecord] = if split.validation.is_empty() {
        jobs
    } else {
        &jobs[split.validation.clone()]
    };
    let binning = StateBinning::calibrate(cfg.qwait.bins, calibration);
    let states = submission_states(jobs, &binning)?;

    let mode = match cfg.fixed_mode() {
        Some(m) => m,
        None => {
            let warmup: Vec<(JobState, f64)> = split
                .history
                .clone()
                .map(|i| (states[i].clone(), jobs[i].wait_time as f64))
                .collect();
            let training: Vec<(JobState, f64)> = split
                .validation
                .clone()
                .map(|i| (states[i].clone(), jobs[i].wait_time as f64))
                .collect();
            choose_statistic_mode(&warmup, &training, &cfg.qwait)
        }
    };

    let mut qcfg: QwaitConfig = cfg.qwait.clone();
    qcfg.mode = mode;
    let mut predictor = WaitPredictor::new(qcfg);

    // Start events interleave with submissions: a job joins the history
    // the moment it starts.
    let mut starts: Vec<(i64, usize)> = jobs
        .iter()
        .enumerate()
        .map(|(i, j)| (j.start_time(), i))
        .collect();
    starts.sort_unstable();
    let mut started = 0usize;

    let mut rows = Vec::new();
    let mut cold_starts = 0usize;
    for (idx, job) in jobs.iter().enumerate() {
        while started < starts.len() && starts[started].0 <= job.submit_time {
            let s = starts[started].1;
            predictor.observe(states[s].clone(), jobs[s].wait_time as f64);
            started += 1;
        }
        if scored.contains(&idx) {
            match predictor.predict(&states[idx]) {
                Ok(p) => rows.push(WaitRow {
                    job_id: job.job_id,
                    prediction: p.seconds,
                    actual: job.wait_time as f64,
                    response: job.response_time() as f64,
                    model: p.model,
                    case: p.case,
                }),
                Err(_) => cold_starts += 1,
            }
        }
    }

    let preds: Vec<f64> = rows.iter().map(|r| r.prediction).collect();
    let actuals: Vec<f64> = rows.iter().map(|r| r.actual).collect();
    let responses: Vec<f64> = rows.iter().map(|r| r.response.max(1.0)).collect();
    Ok(WaitReport {
        aae: metrics::aae(&preds, &actuals)?,
        scaled_aae: metrics::scaled_aae(&preds, &actuals, &responses)?,
        class_aae: metrics::class_errors(&preds, &actuals),
        rows,
        mode,
        cold_starts,
    })
}

pub fn run_predict_wait(
    jobs: &[JobRecord],
    cfg: &ExperimentConfig,
) -> Result<WaitReport, ExperimentError> {
    let split = cfg.split_for(jobs.len());
    run_predict_wait_scored(jobs, cfg, split.test)
}

/// One scored range-set prediction, with enough detail to recompute every
/// metric from the emitted CSV alone.
#[derive(Debug, Clone)]
pub struct ExecRow {
    pub job_id: u64,
    pub actual: f64,
    pub rangeset: ResponseRangeSet,
    pub baseline: TimeRange,
    pub point: f64,
}

#[derive(Debug, Clone)]
pub struct ExecReport {
    pub rows: Vec<ExecRow>,
    pub quality: RangeQuality,
    pub point_aae: f64,
    pub cold_starts: usize,
    pub functions: LoadFunctionSet,
}

pub fn pack_rangeset(rs: &ResponseRangeSet) -> String {
    rs.ranges
        .iter()
        .map(|r| format!("{}:{}:{}", r.range.lo, r.range.hi, r.probability))
        .collect::<Vec<_>>()
        .join("|")
}

pub fn unpack_rangeset(packed: &str) -> Option<ResponseRangeSet> {
    if packed.is_empty() {
        return Some(ResponseRangeSet::default());
    }
    let mut ranges = Vec::new();
    for part in packed.split('|') {
        let fields: Vec<&str> = part.split(':').collect();
        if fields.len() != 3 {
            return None;
        }
        ranges.push(crate::exectime::WeightedRange {
            range: TimeRange::new(fields[0].parse().ok()?, fields[1].parse().ok()?),
            probability: fields[2].parse().ok()?,
        });
    }
    Some(ResponseRangeSet { ranges })
}

pub fn exec_rows_csv(rows: &[ExecRow]) -> String {
    let mut out = String::from("job_id,actual,point,baseline_lo,baseline_hi,ranges\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.job_id,
            r.actual,
            r.point,
            r.baseline.lo,
            r.baseline.hi,
            pack_rangeset(&r.rangeset)
        ));
    }
    out
}

/// Execution samples (observed load + runtime) for a job slice, measured
/// against the whole trace's executions.
pub fn exec_samples(
    jobs: &[JobRecord],
    index: &LoadIndex,
    procs: i64,
) -> Vec<(TupleKey, ExecSample)> {
    jobs.iter()
        .map(|j| {
            let exec = Execution::of(j);
            (
                TupleKey::of(j),
                ExecSample {
                    at: j.submit_time,
                    load: index.load_during(exec, procs, true),
                    exec: j.run_time as f64,
                },
            )
        })
        .collect()
}

/// Range-set predictions over the test split.
///
/// Load functions come from the validation split; per-tuple history
/// accumulates online in completion order, so a test job sees every
/// execution that finished before it was submitted (its own included for
/// later jobs).
pub fn run_predict_exec(
    jobs: &[JobRecord],
    procs: i64,
    cfg: &ExperimentConfig,
) -> Result<ExecReport, ExperimentError> {
    let split = cfg.split_for(jobs.len());
    split.validate(jobs.len())?;
    let index = LoadIndex::from_jobs(jobs.iter());

    let mut per_key = std::collections::BTreeMap::<TupleKey, Vec<ExecSample>>::new();
    for (key, sample) in exec_samples(&jobs[split.validation.clone()], &index, procs) {
        per_key.entry(key).or_default().push(sample);
    }
    let functions = build_load_functions(&per_key, &cfg.loadfn);

    // Jobs enter tuple history when they complete.
    let mut by_end: Vec<(i64, usize)> = jobs
        .iter()
        .enumerate()
        .map(|(i, j)| (j.end_time(), i))
        .collect();
    by_end.sort_unstable();
    let mut completed = 0usize;
    let mut history = ExecHistory::new();

    let mut rows = Vec::new();
    let mut cold_starts = 0usize;
    for (idx, job) in jobs.iter().enumerate() {
        while completed < by_end.len() && by_end[completed].0 <= job.submit_time {
            let c = by_end[completed].1;
            let done = &jobs[c];
            history.push(
                TupleKey::of(done),
                ExecSample {
                    at: done.end_time(),
                    load: index.load_during(Execution::of(done), procs, true),
                    exec: done.run_time as f64,
                },
            );
            completed += 1;
        }
        if !split.test.contains(&idx) {
            continue;
        }
        let key = TupleKey::of(job);
        let key_history = history.for_key(&key);
        if key_history.is_empty() {
            cold_starts += 1;
            continue;
        }
        let predicted_load = match simstate::predict_load(
            &index,
            job.submit_time,
            cfg.load.interval,
            cfg.load.window,
            procs,
        ) {
            Ok(l) => l,
            Err(_) => {
                cold_starts += 1;
                continue;
            }
        };
        let rangeset = match predict_rangeset(key_history, &functions.functions, predicted_load, &cfg.exec)
        {
            Ok(rs) => rs,
            Err(_) => {
                cold_starts += 1;
                continue;
            }
        };
        let baseline = baseline_range(key_history).expect("nonempty history");
        rows.push(ExecRow {
            job_id: job.job_id,
            actual: job.run_time as f64,
            point: point_from_rangeset(&rangeset),
            rangeset,
            baseline,
        });
    }

    let sets: Vec<ResponseRangeSet> = rows.iter().map(|r| r.rangeset.clone()).collect();
    let actuals: Vec<f64> = rows.iter().map(|r| r.actual).collect();
    let baselines: Vec<TimeRange> = rows.iter().map(|r| r.baseline).collect();
    let points: Vec<f64> = rows.iter().map(|r| r.point).collect();
    Ok(ExecReport {
        quality: metrics::success_and_coverage(&sets, &actuals, &baselines)?,
        point_aae: metrics::aae(&points, &actuals)?,
        rows,
        cold_starts,
        functions,
    })
}
