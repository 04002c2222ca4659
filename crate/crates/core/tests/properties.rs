//! Property tests over the structural invariants: trace round-trips,
//! range merging, probability assignment and deterministic reports.

use proptest::prelude::*;

use qpredict::config::ExperimentConfig;
use qpredict::exectime::{assign_probabilities, merge_ranges, TimeRange, MAX_RANGES};
use qpredict::experiment::{managed_rows_csv, run_managed, Policy};
use qpredict::synth;
use qpredict::trace::{
    filter_completed, parse_swf_reader, serialize_swf, JobRecord, JobStatus, TraceMeta,
};

fn job_strategy() -> impl Strategy<Value = JobRecord> {
    (
        1u64..1_000_000,
        0i64..1_000_000,
        0i64..100_000,
        0i64..100_000,
        1i64..1024,
        prop::option::of(0i64..100_000),
        0i64..500,
        prop_oneof![
            Just(JobStatus::Completed),
            Just(JobStatus::Failed),
            Just(JobStatus::Cancelled),
            Just(JobStatus::Other),
        ],
    )
        .prop_map(
            |(job_id, submit, wait, run, req, ert, user, status)| JobRecord {
                job_id,
                submit_time: submit,
                wait_time: wait,
                run_time: run,
                req_size: req,
                ert: ert.unwrap_or(run),
                ert_estimated: ert.is_none(),
                user_id: user,
                group_id: user % 7,
                queue_id: user % 3,
                status,
            },
        )
}

proptest! {
    #[test]
    fn swf_roundtrip_preserves_records(mut jobs in prop::collection::vec(job_strategy(), 0..40)) {
        jobs.sort_by_key(|j| j.submit_time);
        let meta = TraceMeta {
            max_procs: Some(1024),
            comments: vec!["; MaxProcs: 1024".into()],
        };
        let text = serialize_swf(&jobs, &meta);
        let reparsed = parse_swf_reader(text.as_bytes()).unwrap();
        prop_assert_eq!(&jobs, &reparsed.jobs);
    }

    #[test]
    fn filter_output_is_a_subsequence(jobs in prop::collection::vec(job_strategy(), 0..60)) {
        let (kept, rejected) = filter_completed(&jobs);
        prop_assert_eq!(kept.len() + rejected.len(), jobs.len());
        // Subsequence: every kept record appears in input order.
        let mut cursor = 0usize;
        for k in &kept {
            let found = jobs[cursor..].iter().position(|j| j == k);
            prop_assert!(found.is_some(), "kept record out of order");
            cursor += found.unwrap() + 1;
        }
        for k in &kept {
            prop_assert_eq!(k.status, JobStatus::Completed);
            prop_assert!(k.req_size >= 1 && k.run_time >= 0 && k.wait_time >= 0);
        }
    }

    #[test]
    fn merged_ranges_are_disjoint_sorted_idempotent(
        raw in prop::collection::vec((0.0f64..1000.0, 0.0f64..120.0), 1..50)
    ) {
        let ranges: Vec<TimeRange> = raw
            .iter()
            .map(|&(lo, len)| TimeRange::new(lo, lo + len))
            .collect();
        let merged = merge_ranges(ranges, 0.5);
        for w in merged.windows(2) {
            prop_assert!(w[0].hi <= w[1].lo, "overlap in output");
            prop_assert!(w[0].lo <= w[1].lo, "output not sorted");
        }
        let again = merge_ranges(merged.clone(), 0.5);
        prop_assert_eq!(again, merged);
    }

    #[test]
    fn probabilities_always_sum_to_one(
        raw in prop::collection::vec((0.0f64..1000.0, 0.0f64..50.0), 1..60),
        execs in prop::collection::vec(0.0f64..1200.0, 0..80)
    ) {
        let ranges: Vec<TimeRange> = raw
            .iter()
            .map(|&(lo, len)| TimeRange::new(lo, lo + len))
            .collect();
        let merged = merge_ranges(ranges, 0.5);
        let rs = assign_probabilities(merged, &execs, MAX_RANGES);
        prop_assert!(rs.check_invariants().is_ok(), "{:?}", rs.check_invariants());
    }
}

#[test]
fn fixed_seed_fixes_every_report_byte() {
    let trace = synth::heavy_load_trace(20, 20);
    let mut cfg = ExperimentConfig::default();
    cfg.set("qwait.history_capacity", "2000").unwrap();
    cfg.set("qwait.weight_stride", "25").unwrap();
    cfg.set("qwait.mode", "features").unwrap();
    cfg.set("split.history", "0..170").unwrap();
    cfg.set("split.validation", "170..340").unwrap();
    cfg.set("split.test", &format!("340..{}", trace.jobs.len())).unwrap();
    cfg.seed = 99;
    let a = run_managed(&trace.jobs, trace.procs, &cfg, Policy::Mold).unwrap();
    let b = run_managed(&trace.jobs, trace.procs, &cfg, Policy::Mold).unwrap();
    assert_eq!(managed_rows_csv(&a.rows), managed_rows_csv(&b.rows));
    assert_eq!(
        qpredict::experiment::decisions_csv(&a.decisions),
        qpredict::experiment::decisions_csv(&b.decisions)
    );
}
