//! Deterministic synthetic workloads for validation and demos.
//!
//! Three families: a load-coupled trace whose execution times follow known
//! linear laws of the measured system load, a wait-law trace whose waits are
//! an exact function of the request size, and two policy traces (heavy-load
//! and diurnal) built from repeating motifs where resizing or delaying
//! provably helps.

use crate::trace::{JobRecord, JobStatus};

/// A generated workload: the jobs plus the system size they assume.
#[derive(Debug, Clone)]
pub struct SyntheticTrace {
    pub jobs: Vec<JobRecord>,
    pub procs: i64,
    /// Index of the first job the policies should manage (test start).
    pub policy_start: usize,
}

fn job(
    id: u64,
    submit: i64,
    wait: i64,
    run: i64,
    req: i64,
    ert: i64,
    user: i64,
    queue: i64,
) -> JobRecord {
    JobRecord {
        job_id: id,
        submit_time: submit,
        wait_time: wait,
        run_time: run,
        req_size: req,
        ert,
        ert_estimated: false,
        user_id: user,
        group_id: 1,
        queue_id: queue,
        status: JobStatus::Completed,
    }
}

/// Linear load-law trace parameters; the first payload tuple follows
/// exactly `exec = intercept + slope * load`.
#[derive(Debug, Clone)]
pub struct LoadLawSpec {
    pub procs: i64,
    /// Triangle-wave period of the background load, seconds.
    pub period: i64,
    /// Background occupancy refresh interval, seconds.
    pub interval: i64,
    /// Spacing between foreground submissions, seconds.
    pub foreground_spacing: i64,
    /// Trace length, seconds.
    pub horizon: i64,
    /// End of the function-building (validation) phase, seconds.
    pub validation_end: i64,
}

impl Default for LoadLawSpec {
    fn default() -> Self {
        const WEEK: i64 = 7 * 24 * 3600;
        LoadLawSpec {
            procs: 100,
            period: 24 * WEEK,
            interval: 1800,
            foreground_spacing: 2400,
            horizon: 20 * WEEK,
            validation_end: 12 * WEEK,
        }
    }
}

/// The five payload laws; the first is the reference (100, 200) law.
pub const PAYLOAD_LAWS: [(f64, f64); 5] = [
    (100.0, 200.0),
    (90.0, 185.0),
    (110.0, 215.0),
    (95.0, 170.0),
    (105.0, 230.0),
];
/// Helper laws submitted only during validation to widen the slope range
/// the prediction anchors span.
const HELPER_LAWS: [(f64, f64); 2] = [(100.0, 120.0), (100.0, 280.0)];

/// Triangle load profile in [0.1, 0.9].
fn target_load(t: i64, period: i64) -> f64 {
    let phase = (t.rem_euclid(period)) as f64 / period as f64;
    let tri = if phase < 0.5 {
        2.0 * phase
    } else {
        2.0 * (1.0 - phase)
    };
    0.1 + 0.8 * tri
}

/// Background occupancy (processors) during one refresh interval.
fn background_procs(t: i64, spec: &LoadLawSpec) -> i64 {
    let load = target_load(t, spec.period);
    ((load * spec.procs as f64).round() as i64).clamp(1, spec.procs - 1)
}

/// Mean background load over a window, from the piecewise-constant profile.
fn background_load_over(start: i64, dur: i64, spec: &LoadLawSpec) -> f64 {
    if dur <= 0 {
        return target_load(start, spec.period);
    }
    let mut t = start;
    let mut acc = 0.0;
    while t < start + dur {
        let interval_end = ((t / spec.interval) + 1) * spec.interval;
        let seg_end = interval_end.min(start + dur);
        let procs = background_procs((t / spec.interval) * spec.interval, spec);
        acc += (procs as f64 / spec.procs as f64) * (seg_end - t) as f64;
        t = seg_end;
    }
    acc / dur as f64
}

/// Execution seconds of a foreground job under a linear law, measured
/// against the background it actually overlaps (fixed point on the
/// duration, then rounded to whole seconds).
fn foreground_exec(submit: i64, law: (f64, f64), spec: &LoadLawSpec) -> i64 {
    let (a, b) = law;
    let mut run = a + b * target_load(submit, spec.period);
    for _ in 0..4 {
        let load = background_load_over(submit, run.round() as i64, spec);
        run = a + b * load;
    }
    run.round().max(1.0) as i64
}

/// Load-coupled trace: background jobs hold a slowly drifting occupancy
/// while foreground tuples run with execution times that are exact linear
/// functions of the load they observe. All waits are zero.
pub fn linear_load_trace(spec: &LoadLawSpec) -> SyntheticTrace {
    let mut jobs = Vec::new();
    let mut id = 1u64;

    // Background: one job per interval, each under a unique user so no
    // background tuple accumulates history.
    let mut t = 0;
    while t < spec.horizon {
        let procs = background_procs(t, spec);
        jobs.push(job(
            id,
            t,
            0,
            spec.interval,
            procs,
            spec.interval,
            1_000_000 + id as i64,
            2,
        ));
        id += 1;
        t += spec.interval;
    }

    // Foreground: payload tuples 1..=5 all along, helper tuples 6..=7 only
    // during validation, interleaved halfway between payload slots.
    let mut slot = 0i64;
    let mut payload_turn = 0usize;
    let mut helper_turn = 0usize;
    while slot < spec.horizon {
        let user = 1 + (payload_turn % PAYLOAD_LAWS.len()) as i64;
        let law = PAYLOAD_LAWS[payload_turn % PAYLOAD_LAWS.len()];
        let run = foreground_exec(slot, law, spec);
        jobs.push(job(id, slot, 0, run, 8, 2 * run, user, 1));
        id += 1;
        payload_turn += 1;

        let helper_at = slot + spec.foreground_spacing / 2;
        if helper_at < spec.validation_end {
            let user = 6 + (helper_turn % HELPER_LAWS.len()) as i64;
            let law = HELPER_LAWS[helper_turn % HELPER_LAWS.len()];
            let run = foreground_exec(helper_at, law, spec);
            jobs.push(job(id, helper_at, 0, run, 8, 2 * run, user, 1));
            id += 1;
            helper_turn += 1;
        }
        slot += spec.foreground_spacing;
    }

    jobs.sort_by_key(|j| (j.submit_time, j.job_id));
    let policy_start = jobs
        .iter()
        .position(|j| j.submit_time >= spec.validation_end)
        .unwrap_or(jobs.len());
    SyntheticTrace {
        jobs,
        procs: spec.procs,
        policy_start,
    }
}

/// Wait-law trace: isolated submissions (nothing waiting or running at any
/// submission instant) whose recorded waits follow `wait = 100 * req_size`
/// over a fixed cycle of request sizes.
pub fn wait_law_trace(n: usize) -> SyntheticTrace {
    const SIZES: [i64; 5] = [1, 2, 4, 8, 16];
    let mut jobs = Vec::new();
    for i in 0..n {
        let req = SIZES[i % SIZES.len()];
        let wait = 100 * req;
        jobs.push(job(
            i as u64 + 1,
            i as i64 * 100_000,
            wait,
            50,
            req,
            10 * req,
            1,
            1,
        ));
    }
    SyntheticTrace {
        jobs,
        procs: 32,
        policy_start: n / 2,
    }
}

/// Heavy-load motif trace: fifteen small filler jobs saturate 60 of 64
/// processors, so small requests keep starting instantly while the wide
/// payload request waits behind them. Waits correlate strongly with
/// request size, and every payload user carries narrow-size history (the
/// probe), so molding the payload down slashes its response.
///
/// Jobs per motif: 15 fillers (4 procs each, wait 0), one probe (4 procs,
/// wait 0, same user as the payload, finished before the payload arrives)
/// and one payload (32 procs, waits out the fillers).
pub fn heavy_load_trace(history_motifs: usize, test_motifs: usize) -> SyntheticTrace {
    const PERIOD: i64 = 2500;
    const USERS: i64 = 8;
    const FILLERS: i64 = 15;
    let mut jobs = Vec::new();
    let mut id = 1u64;
    for m in 0..(history_motifs + test_motifs) as i64 {
        let t0 = m * PERIOD;
        let user = 1 + (m % USERS);
        for i in 0..FILLERS {
            let filler_user = 500 + (m * FILLERS + i) % 30;
            jobs.push(job(id, t0, 0, 2000, 4, 2000, filler_user, 1));
            id += 1;
        }
        // Probe: takes the 4 spare processors and is gone again before the
        // payload shows up.
        jobs.push(job(id, t0 + 20, 0, 9, 4, 450, user, 1));
        id += 1;
        // Payload: wide request, blocked until the fillers end.
        jobs.push(job(id, t0 + 30, 1970, 300, 32, 400, user, 1));
        id += 1;
    }
    SyntheticTrace {
        jobs,
        procs: 64,
        policy_start: history_motifs * (FILLERS as usize + 2),
    }
}

/// Diurnal motif trace: a full-machine blocker (the daytime spike) holds
/// back a victim job; at night the machine drains. The victim's user has
/// history at a narrow slow size and a wide fast size, so delaying to the
/// blocker's predicted completion and re-molding there flips it to the
/// fast size with no extra wait.
pub fn diurnal_trace(history_motifs: usize, test_motifs: usize) -> SyntheticTrace {
    const PERIOD: i64 = 9000;
    const VICTIM_USERS: i64 = 4;
    let mut jobs = Vec::new();
    let mut id = 1u64;
    for m in 0..(history_motifs + test_motifs) {
        let t0 = m as i64 * PERIOD;
        let user = 1 + (m as i64 % VICTIM_USERS);
        let in_test = m >= history_motifs;
        // Blocker: the whole machine for 3000 s (estimate overshoots so a
        // later candidate evaluation on the drained machine matches it).
        jobs.push(job(id, t0, 0, 3000, 64, 5000, 200, 1));
        id += 1;
        // Victim: type alternates in the history phase so the user owns
        // history at both sizes; the test phase always submits the slow
        // narrow variant.
        let narrow = in_test || m % 2 == 0;
        if narrow {
            jobs.push(job(id, t0 + 100, 2900, 4800, 8, 5000, user, 1));
        } else {
            jobs.push(job(id, t0 + 100, 2900, 600, 64, 5000, user, 1));
        }
        id += 1;
        // Followers: small jobs arriving while the machine is saturated.
        // Behind a narrow victim they start with it at 3000; a wide victim
        // keeps the machine full until 3600.
        let f1_wait = if narrow { 2800 } else { 3400 };
        jobs.push(job(id, t0 + 200, f1_wait, 60, 2, 100, 300, 1));
        id += 1;
        jobs.push(job(id, t0 + 300, f1_wait - 100, 60, 2, 100, 301, 1));
        id += 1;
    }
    SyntheticTrace {
        jobs,
        procs: 64,
        policy_start: history_motifs * 4,
    }
}
