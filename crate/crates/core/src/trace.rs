//! Standard Workload Format traces: parsing, completed-job filtering and
//! chronological splits.
//!
//! SWF is a line-oriented text format with 18 whitespace-separated integer
//! fields per job and `;`-prefixed header comments. Missing values are
//! encoded as `-1` and are kept as explicit unknowns until admission
//! filtering.

use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::ops::Range;
use std::path::Path;

use thiserror::Error;

/// Completion status of a job, from SWF field 11.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobStatus {
    Completed,
    Failed,
    Cancelled,
    Other,
}

impl JobStatus {
    fn from_swf(code: i64) -> Self {
        match code {
            1 => JobStatus::Completed,
            0 => JobStatus::Failed,
            5 => JobStatus::Cancelled,
            _ => JobStatus::Other,
        }
    }

    fn to_swf(self) -> i64 {
        match self {
            JobStatus::Completed => 1,
            JobStatus::Failed => 0,
            JobStatus::Cancelled => 5,
            JobStatus::Other => -1,
        }
    }
}

/// One job from a workload trace. Times are in seconds relative to the
/// trace epoch; `-1` marks unknown ids and sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobRecord {
    pub job_id: u64,
    pub submit_time: i64,
    pub wait_time: i64,
    pub run_time: i64,
    /// Requested processor count; `-1` when the trace does not record it.
    pub req_size: i64,
    /// User runtime estimate (the scheduler kill-time). Unknown estimates
    /// are replaced by the actual runtime and flagged via `ert_estimated`.
    pub ert: i64,
    /// True when the trace had no user estimate and `ert` was backfilled
    /// from the actual runtime. Predictors may exclude such jobs from
    /// estimate-based features.
    pub ert_estimated: bool,
    pub user_id: i64,
    pub group_id: i64,
    pub queue_id: i64,
    pub status: JobStatus,
}

impl JobRecord {
    pub fn start_time(&self) -> i64 {
        self.submit_time + self.wait_time
    }

    pub fn end_time(&self) -> i64 {
        self.start_time() + self.run_time
    }

    pub fn response_time(&self) -> i64 {
        self.wait_time + self.run_time
    }
}

/// Header metadata gathered from `;` comment lines.
#[derive(Debug, Clone, Default)]
pub struct TraceMeta {
    /// `MaxProcs` header value: the system size P, when present.
    pub max_procs: Option<i64>,
    /// All header lines, verbatim, in file order.
    pub comments: Vec<String>,
}

/// A parsed trace: records in nondecreasing submit order plus header
/// metadata.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub jobs: Vec<JobRecord>,
    pub meta: TraceMeta,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error reading trace: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed SWF record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("trace has no MaxProcs header and no system size override was given")]
    MissingMaxProcs,
    #[error("split range {which} ({range:?}) exceeds trace length {len}")]
    SplitOutOfRange {
        which: &'static str,
        range: Range<usize>,
        len: usize,
    },
    #[error("split ranges overlap: {0}")]
    SplitOverlap(String),
}

/// Half-open index ranges over the chronological completed-job sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceSplit {
    pub history: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl TraceSplit {
    /// Reference split for a 60k-job trace: 6000 history jobs from index
    /// 10000, 4000 validation jobs from 16000, test from 20000 to 60000.
    /// Shorter traces scale every boundary proportionally.
    pub fn default_for(len: usize) -> Self {
        const REF: [usize; 4] = [10_000, 16_000, 20_000, 60_000];
        let scale = |b: usize| -> usize {
            if len >= REF[3] {
                b
            } else {
                b * len / REF[3]
            }
        };
        let test_end = if len >= REF[3] { REF[3] } else { len };
        TraceSplit {
            history: scale(REF[0])..scale(REF[1]),
            validation: scale(REF[1])..scale(REF[2]),
            test: scale(REF[2])..test_end.max(scale(REF[2])),
        }
    }

    fn check_range(
        which: &'static str,
        r: &Range<usize>,
        len: usize,
    ) -> Result<(), TraceError> {
        if r.start > r.end || r.end > len {
            return Err(TraceError::SplitOutOfRange {
                which,
                range: r.clone(),
                len,
            });
        }
        Ok(())
    }

    pub fn validate(&self, len: usize) -> Result<(), TraceError> {
        Self::check_range("history", &self.history, len)?;
        Self::check_range("validation", &self.validation, len)?;
        Self::check_range("test", &self.test, len)?;
        let overlaps = |a: &Range<usize>, b: &Range<usize>| a.start < b.end && b.start < a.end;
        for (an, a, bn, b) in [
            ("history", &self.history, "validation", &self.validation),
            ("history", &self.history, "test", &self.test),
            ("validation", &self.validation, "test", &self.test),
        ] {
            if overlaps(a, b) {
                return Err(TraceError::SplitOverlap(format!(
                    "{an} {a:?} intersects {bn} {b:?}"
                )));
            }
        }
        Ok(())
    }
}

/// A job dropped by admission filtering, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub job_id: u64,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    NotCompleted,
    UnknownReqSize,
    NegativeRunTime,
    NegativeWaitTime,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::NotCompleted => "not_completed",
            RejectReason::UnknownReqSize => "unknown_req_size",
            RejectReason::NegativeRunTime => "negative_run_time",
            RejectReason::NegativeWaitTime => "negative_wait_time",
        };
        f.write_str(s)
    }
}

fn parse_field(tok: &str, line: usize, what: &str) -> Result<i64, TraceError> {
    tok.parse::<i64>().map_err(|_| TraceError::Malformed {
        line,
        reason: format!("field {what} is not an integer: {tok:?}"),
    })
}

/// Parse a single 18-field SWF record line.
fn parse_record(line: &str, line_no: usize) -> Result<JobRecord, TraceError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 18 {
        return Err(TraceError::Malformed {
            line: line_no,
            reason: format!("expected 18 fields, found {}", fields.len()),
        });
    }
    let f = |i: usize, what: &str| parse_field(fields[i], line_no, what);

    let job_id = f(0, "job id")?;
    if job_id <= 0 {
        return Err(TraceError::Malformed {
            line: line_no,
            reason: format!("job id must be positive, found {job_id}"),
        });
    }
    let submit_time = f(1, "submit time")?;
    let wait_time = f(2, "wait time")?;
    let run_time = f(3, "run time")?;
    let alloc_procs = f(4, "allocated processors")?;
    let req_procs = f(7, "requested processors")?;
    let req_time = f(8, "requested time")?;
    let status = JobStatus::from_swf(f(10, "status")?);
    let user_id = f(11, "user id")?;
    let group_id = f(12, "group id")?;
    let queue_id = f(14, "queue id")?;

    // Requested processors take precedence; traces that only log the
    // allocation fall back to it.
    let req_size = if req_procs > 0 { req_procs } else { alloc_procs };
    let ert_estimated = req_time < 0;
    let ert = if ert_estimated { run_time.max(0) } else { req_time };

    Ok(JobRecord {
        job_id: job_id as u64,
        submit_time,
        wait_time,
        run_time,
        req_size,
        ert,
        ert_estimated,
        user_id,
        group_id,
        queue_id,
        status,
    })
}

fn parse_header(line: &str, meta: &mut TraceMeta) {
    meta.comments.push(line.to_string());
    let body = line.trim_start_matches(';').trim();
    if let Some((key, value)) = body.split_once(':') {
        if key.trim() == "MaxProcs" {
            if let Ok(v) = value.trim().parse::<i64>() {
                meta.max_procs = Some(v);
            }
        }
    }
}

/// Parse an SWF trace from a reader. Records are returned sorted by submit
/// time; ties keep file order.
pub fn parse_swf_reader<R: Read>(reader: R) -> Result<Trace, TraceError> {
    let mut jobs = Vec::new();
    let mut meta = TraceMeta::default();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with(';') {
            parse_header(trimmed, &mut meta);
            continue;
        }
        jobs.push(parse_record(trimmed, line_no)?);
    }
    // Stable: equal submit times keep file order.
    jobs.sort_by_key(|j| j.submit_time);
    Ok(Trace { jobs, meta })
}

pub fn parse_swf<P: AsRef<Path>>(path: P) -> Result<Trace, TraceError> {
    let file = std::fs::File::open(path)?;
    parse_swf_reader(file)
}

/// Write records back out as SWF. Only the fields retained in `JobRecord`
/// carry data; the rest are emitted as `-1`. Parsing the output yields the
/// same records.
pub fn serialize_swf(jobs: &[JobRecord], meta: &TraceMeta) -> String {
    let mut out = String::new();
    for c in &meta.comments {
        out.push_str(c);
        out.push('\n');
    }
    if meta.comments.is_empty() {
        if let Some(p) = meta.max_procs {
            out.push_str(&format!("; MaxProcs: {p}\n"));
        }
    }
    for j in jobs {
        let ert = if j.ert_estimated { -1 } else { j.ert };
        out.push_str(&format!(
            "{} {} {} {} {} -1 -1 {} {} -1 {} {} {} -1 {} -1 -1 -1\n",
            j.job_id,
            j.submit_time,
            j.wait_time,
            j.run_time,
            j.req_size,
            j.req_size,
            ert,
            j.status.to_swf(),
            j.user_id,
            j.group_id,
            j.queue_id,
        ));
    }
    out
}

/// Keep only completed jobs admissible downstream: positive request size
/// and nonnegative run and wait times. Order is preserved; everything else
/// lands in the rejection report.
pub fn filter_completed(jobs: &[JobRecord]) -> (Vec<JobRecord>, Vec<Rejection>) {
    let mut kept = Vec::with_capacity(jobs.len());
    let mut rejected = Vec::new();
    for j in jobs {
        let reason = if j.status != JobStatus::Completed {
            Some(RejectReason::NotCompleted)
        } else if j.req_size < 1 {
            Some(RejectReason::UnknownReqSize)
        } else if j.run_time < 0 {
            Some(RejectReason::NegativeRunTime)
        } else if j.wait_time < 0 {
            Some(RejectReason::NegativeWaitTime)
        } else {
            None
        };
        match reason {
            None => kept.push(j.clone()),
            Some(reason) => rejected.push(Rejection {
                job_id: j.job_id,
                reason,
            }),
        }
    }
    (kept, rejected)
}

/// Render the rejection report as CSV.
pub fn rejection_report_csv(rejections: &[Rejection]) -> String {
    let mut out = String::from("job_id,reason\n");
    for r in rejections {
        out.push_str(&format!("{},{}\n", r.job_id, r.reason));
    }
    out
}

/// Slice the chronological job list into history/validation/test lists.
pub fn split<'a>(
    jobs: &'a [JobRecord],
    spec: &TraceSplit,
) -> Result<(&'a [JobRecord], &'a [JobRecord], &'a [JobRecord]), TraceError> {
    spec.validate(jobs.len())?;
    Ok((
        &jobs[spec.history.clone()],
        &jobs[spec.validation.clone()],
        &jobs[spec.test.clone()],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swf_line(
        id: u64,
        submit: i64,
        wait: i64,
        run: i64,
        procs: i64,
        ert: i64,
        status: i64,
        user: i64,
    ) -> String {
        format!("{id} {submit} {wait} {run} {procs} -1 -1 {procs} {ert} -1 {status} {user} 1 -1 1 -1 -1 -1")
    }

    #[test]
    fn parses_basic_line() {
        let text = swf_line(1, 0, 10, 100, 4, 120, 1, 7);
        let trace = parse_swf_reader(text.as_bytes()).unwrap();
        assert_eq!(trace.jobs.len(), 1);
        let j = &trace.jobs[0];
        assert_eq!(j.job_id, 1);
        assert_eq!(j.submit_time, 0);
        assert_eq!(j.wait_time, 10);
        assert_eq!(j.run_time, 100);
        assert_eq!(j.req_size, 4);
        assert_eq!(j.ert, 120);
        assert!(!j.ert_estimated);
        assert_eq!(j.status, JobStatus::Completed);
        assert_eq!(j.user_id, 7);
    }

    #[test]
    fn header_only_file_is_empty_with_metadata() {
        let text = "; Version: 2\n; MaxProcs: 128\n";
        let trace = parse_swf_reader(text.as_bytes()).unwrap();
        assert!(trace.jobs.is_empty());
        assert_eq!(trace.meta.max_procs, Some(128));
        assert_eq!(trace.meta.comments.len(), 2);
    }

    #[test]
    fn three_line_fixture_matches_hand_parse() {
        // Hand-parsed against the 18-field layout: job id, submit, wait,
        // run, alloc procs, cpu, mem, req procs, req time, req mem, status,
        // user, group, exe, queue, partition, preceding, think time.
        let text = "\
; MaxProcs: 64
3 50 0 30 8 -1 -1 8 60 -1 1 2 1 -1 2 -1 -1 -1
1 0 10 100 4 -1 -1 -1 -1 -1 1 1 1 -1 1 -1 -1 -1
2 20 5 40 2 -1 -1 2 50 -1 5 1 1 -1 1 -1 -1 -1
";
        let trace = parse_swf_reader(text.as_bytes()).unwrap();
        // Sorted by submit time.
        assert_eq!(
            trace.jobs.iter().map(|j| j.job_id).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        let j1 = &trace.jobs[0];
        // Requested procs missing (-1): falls back to allocated procs.
        assert_eq!(j1.req_size, 4);
        // Requested time missing: ert backfilled from run time and flagged.
        assert_eq!(j1.ert, 100);
        assert!(j1.ert_estimated);
        let j2 = &trace.jobs[1];
        assert_eq!(j2.status, JobStatus::Cancelled);
        assert_eq!(j2.ert, 50);
        let j3 = &trace.jobs[2];
        assert_eq!((j3.submit_time, j3.wait_time, j3.run_time), (50, 0, 30));
        assert_eq!(j3.queue_id, 2);
        assert_eq!(trace.meta.max_procs, Some(64));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "; header\n1 0 10 100 4 -1 -1 4 120 -1 1 1 1 -1 1 -1 -1\n";
        let err = parse_swf_reader(text.as_bytes()).unwrap_err();
        match err {
            TraceError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn filter_keeps_only_completed() {
        let text = [
            swf_line(1, 0, 1, 10, 2, 20, 1, 1),
            swf_line(2, 1, 1, 10, 2, 20, 5, 1),
            swf_line(3, 2, 1, 10, 2, 20, 1, 1),
        ]
        .join("\n");
        let trace = parse_swf_reader(text.as_bytes()).unwrap();
        let (kept, rejected) = filter_completed(&trace.jobs);
        assert_eq!(kept.iter().map(|j| j.job_id).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(rejected.len(), 1);
        assert_eq!(rejected[0].reason, RejectReason::NotCompleted);
    }

    #[test]
    fn filter_all_cancelled_is_empty() {
        let text = [
            swf_line(1, 0, 1, 10, 2, 20, 5, 1),
            swf_line(2, 1, 1, 10, 2, 20, 5, 1),
        ]
        .join("\n");
        let trace = parse_swf_reader(text.as_bytes()).unwrap();
        let (kept, rejected) = filter_completed(&trace.jobs);
        assert!(kept.is_empty());
        assert_eq!(rejected.len(), 2);
    }

    #[test]
    fn filter_drops_unknown_req_size_with_report() {
        let text = "1 0 1 10 -1 -1 -1 -1 20 -1 1 1 1 -1 1 -1 -1 -1";
        let trace = parse_swf_reader(text.as_bytes()).unwrap();
        let (kept, rejected) = filter_completed(&trace.jobs);
        assert!(kept.is_empty());
        assert_eq!(rejected[0].reason, RejectReason::UnknownReqSize);
        let csv = rejection_report_csv(&rejected);
        assert!(csv.contains("1,unknown_req_size"));
    }

    #[test]
    fn split_whole_trace_as_test() {
        let jobs: Vec<JobRecord> = (0..10)
            .map(|i| {
                parse_swf_reader(swf_line(i + 1, i as i64, 0, 1, 1, 1, 1, 1).as_bytes())
                    .unwrap()
                    .jobs
                    .remove(0)
            })
            .collect();
        let spec = TraceSplit {
            history: 0..0,
            validation: 0..0,
            test: 0..10,
        };
        let (h, v, t) = split(&jobs, &spec).unwrap();
        assert!(h.is_empty() && v.is_empty());
        assert_eq!(t.len(), 10);
    }

    #[test]
    fn split_toy_trace_halves() {
        let jobs: Vec<JobRecord> = (0..100)
            .map(|i| {
                parse_swf_reader(swf_line(i + 1, i as i64, 0, 1, 1, 1, 1, 1).as_bytes())
                    .unwrap()
                    .jobs
                    .remove(0)
            })
            .collect();
        let spec = TraceSplit {
            history: 0..50,
            validation: 50..50,
            test: 50..100,
        };
        let (h, _, t) = split(&jobs, &spec).unwrap();
        assert_eq!((h.len(), t.len()), (50, 50));
    }

    #[test]
    fn split_out_of_range_errors() {
        let jobs: Vec<JobRecord> = Vec::new();
        let spec = TraceSplit {
            history: 0..1,
            validation: 1..1,
            test: 1..1,
        };
        assert!(split(&jobs, &spec).is_err());
    }

    #[test]
    fn default_split_mirrors_reference_indices() {
        let s = TraceSplit::default_for(60_000);
        assert_eq!(s.history, 10_000..16_000);
        assert_eq!(s.validation, 16_000..20_000);
        assert_eq!(s.test, 20_000..60_000);
        let small = TraceSplit::default_for(6_000);
        assert_eq!(small.history, 1_000..1_600);
        assert_eq!(small.validation, 1_600..2_000);
        assert_eq!(small.test, 2_000..6_000);
    }

    #[test]
    fn roundtrip_preserves_retained_fields() {
        let text = "\
; MaxProcs: 64
1 0 10 100 4 -1 -1 -1 -1 -1 1 1 1 -1 1 -1 -1 -1
2 20 5 40 2 -1 -1 2 50 -1 5 3 2 -1 4 -1 -1 -1
";
        let trace = parse_swf_reader(text.as_bytes()).unwrap();
        let rendered = serialize_swf(&trace.jobs, &trace.meta);
        let reparsed = parse_swf_reader(rendered.as_bytes()).unwrap();
        assert_eq!(trace.jobs, reparsed.jobs);
        assert_eq!(trace.meta.max_procs, reparsed.meta.max_procs);
    }

    #[test]
    fn admitted_records_have_consistent_times() {
        let text = [
            swf_line(1, 0, 10, 100, 4, 120, 1, 1),
            swf_line(2, 5, 0, 0, 1, 0, 1, 2),
        ]
        .join("\n");
        let trace = parse_swf_reader(text.as_bytes()).unwrap();
        let (kept, _) = filter_completed(&trace.jobs);
        for j in &kept {
            assert!(j.end_time() >= j.start_time());
            assert!(j.start_time() >= j.submit_time);
        }
    }
}
