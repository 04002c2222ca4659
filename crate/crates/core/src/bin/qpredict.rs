//! Command-line front end: trace validation, prediction runs, policy
//! simulations, tuning sweeps and the full report bundle.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qpredict::config::ExperimentConfig;
use qpredict::experiment::{
    self, class_response_csv, decisions_csv, exec_rows_csv, exec_summary_csv, load_series_csv,
    managed_rows_csv, policy_summary_csv, releases_csv, run_managed, run_predict_exec,
    run_predict_wait, sweep_csv, wait_class_csv, wait_rows_csv, wait_summary_csv, Policy,
    PreparedTrace,
};
use qpredict::synth;
use qpredict::trace::{rejection_report_csv, serialize_swf, TraceMeta};

#[derive(Parser)]
#[command(
    name = "qpredict",
    about = "Queue-wait and execution-time prediction with molding and delayed submissions on an EASY backfilling simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Workload trace in Standard Workload Format.
    #[arg(long)]
    trace: PathBuf,
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline overrides (repeatable), e.g. --set qwait.bins=30.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory for report CSVs.
    #[arg(long, default_value = "qpredict-out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a trace, check the configuration, and report admission counts.
    Validate(CommonArgs),
    /// Queue-wait predictions over the test split.
    PredictWait {
        #[command(flatten)]
        common: CommonArgs,
        /// Also dump the per-submission state features.
        #[arg(long)]
        dump_states: bool,
    },
    /// Execution-time range-set predictions over the test split.
    PredictExec(CommonArgs),
    /// Replay the trace through the EASY scheduler under a policy.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "baseline")]
        policy: PolicyArg,
    },
    /// One-at-a-time parameter sweep over the configured grids.
    Tune(CommonArgs),
    /// Full benchmark bundle: predictions plus all three simulations.
    Report(CommonArgs),
    /// Run the scheduler alone on a SimJob CSV (job_id,submit,procs,est,actual).
    SchedRun {
        /// SimJob CSV file.
        #[arg(long)]
        jobs: PathBuf,
        /// System size in processors.
        #[arg(long)]
        procs: i64,
        /// Output directory.
        #[arg(long, default_value = "qpredict-out")]
        out: PathBuf,
    },
    /// Write a bundled synthetic workload as an SWF file.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Baseline,
    Mold,
    Delay,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Policy {
        match p {
            PolicyArg::Baseline => Policy::Baseline,
            PolicyArg::Mold => Policy::Mold,
            PolicyArg::Delay => Policy::Delay,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Execution times follow linear laws of the measured load.
    LoadLaw,
    /// Waits are an exact function of the request size.
    WaitLaw,
    /// Saturated machine where narrow requests start instantly.
    HeavyLoad,
    /// Alternating spike/idle motifs that reward delaying.
    Diurnal,
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(path)
            .with_context(|| format!("reading config {}", path.display()))?;
    }
    for assignment in &common.set {
        let (key, value) = assignment
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got {assignment:?}"))?;
        cfg.set(key.trim(), value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_trace(common: &CommonArgs, cfg: &ExperimentConfig) -> Result<PreparedTrace> {
    let prepared = experiment::prepare_trace(&common.trace, cfg)
        .with_context(|| format!("loading trace {}", common.trace.display()))?;
    if prepared.jobs.is_empty() {
        bail!("trace contains no admissible completed jobs");
    }
    Ok(prepared)
}

fn write(common: &CommonArgs, name: &str, contents: &str) -> Result<()> {
    experiment::write_report(&common.out, name, contents)?;
    println!("wrote {}", common.out.join(name).display());
    Ok(())
}

fn cmd_validate(common: &CommonArgs) -> Result<()> {
    let cfg = load_config(common)?;
    let prepared = load_trace(common, &cfg)?;
    let split = cfg.split_for(prepared.jobs.len());
    split.validate(prepared.jobs.len())?;
    println!(
        "trace ok: {} completed jobs admitted, {} rejected, {} processors",
        prepared.jobs.len(),
        prepared.rejections.len(),
        prepared.procs
    );
    println!(
        "split: history {:?}, validation {:?}, test {:?}",
        split.history, split.validation, split.test
    );
    if !prepared.rejections.is_empty() {
        write(common, "rejections.csv", &rejection_report_csv(&prepared.rejections))?;
    }
    Ok(())
}

fn cmd_predict_wait(common: &CommonArgs, dump_states: bool) -> Result<()> {
    let cfg = load_config(common)?;
    let prepared = load_trace(common, &cfg)?;
    if dump_states {
        let binning =
            qpredict::qwait::StateBinning::calibrate(cfg.qwait.bins, &prepared.jobs);
        let dump = qpredict::experiment::state_dump_csv(&prepared.jobs, &binning)?;
        write(common, "states.csv", &dump)?;
    }
    let report = run_predict_wait(&prepared.jobs, &cfg)?;
    write(common, "wait_predictions.csv", &wait_rows_csv(&report.rows))?;
    write(common, "wait_summary.csv", &wait_summary_csv(&report))?;
    write(common, "wait_class_errors.csv", &wait_class_csv(&report))?;
    println!(
        "predict-wait: {} predictions, AAE {:.1} s, scaled AAE {:.4}, {} cold starts",
        report.rows.len(),
        report.aae,
        report.scaled_aae,
        report.cold_starts
    );
    Ok(())
}

fn cmd_predict_exec(common: &CommonArgs) -> Result<()> {
    let cfg = load_config(common)?;
    let prepared = load_trace(common, &cfg)?;
    let report = run_predict_exec(&prepared.jobs, prepared.procs, &cfg)?;
    write(common, "exec_predictions.csv", &exec_rows_csv(&report.rows))?;
    write(common, "exec_summary.csv", &exec_summary_csv(&report))?;
    write(
        common,
        "load_functions.csv",
        &qpredict::exectime::load_functions_csv(&report.functions),
    )?;
    println!(
        "predict-exec: {} predictions, success {:.1}%, coverage {:.1}%, {} cold starts",
        report.rows.len(),
        report.quality.success_rate,
        report.quality.coverage,
        report.cold_starts
    );
    Ok(())
}

fn emit_simulation(common: &CommonArgs, report: &experiment::ManagedReport) -> Result<()> {
    let p = report.policy.as_str();
    write(common, &format!("schedule_{p}.csv"), &managed_rows_csv(&report.rows))?;
    write(common, &format!("decisions_{p}.csv"), &decisions_csv(&report.decisions))?;
    write(common, &format!("load_series_{p}.csv"), &load_series_csv(report))?;
    write(
        common,
        &format!("class_response_{p}.csv"),
        &class_response_csv(report),
    )?;
    if !report.releases.is_empty() {
        write(common, &format!("releases_{p}.csv"), &releases_csv(report))?;
    }
    println!(
        "simulate-{p}: avg qwait {:.1} s, avg exec {:.1} s, avg response {:.1} s, utilization {:.1}%",
        report.avg_qwait, report.avg_exec, report.avg_response, report.utilization
    );
    Ok(())
}

fn cmd_simulate(common: &CommonArgs, policy: Policy) -> Result<()> {
    let cfg = load_config(common)?;
    let prepared = load_trace(common, &cfg)?;
    let report = run_managed(&prepared.jobs, prepared.procs, &cfg, policy)?;
    emit_simulation(common, &report)
}

fn cmd_tune(common: &CommonArgs) -> Result<()> {
    let cfg = load_config(common)?;
    let prepared = load_trace(common, &cfg)?;
    let report = experiment::tune(&prepared.jobs, &cfg)?;
    write(common, "tune_sweep.csv", &sweep_csv(&report.rows))?;
    println!(
        "tune: best validation AAE {:.2} s over {} evaluations",
        report.best_aae,
        report.rows.len()
    );
    println!("best: {:?}", report.best);
    Ok(())
}

fn cmd_report(common: &CommonArgs) -> Result<()> {
    let cfg = load_config(common)?;
    let prepared = load_trace(common, &cfg)?;

    let wait = run_predict_wait(&prepared.jobs, &cfg)?;
    write(common, "wait_predictions.csv", &wait_rows_csv(&wait.rows))?;
    write(common, "wait_summary.csv", &wait_summary_csv(&wait))?;
    write(common, "wait_class_errors.csv", &wait_class_csv(&wait))?;

    let exec = run_predict_exec(&prepared.jobs, prepared.procs, &cfg)?;
    write(common, "exec_predictions.csv", &exec_rows_csv(&exec.rows))?;
    write(common, "exec_summary.csv", &exec_summary_csv(&exec))?;

    let baseline = run_managed(&prepared.jobs, prepared.procs, &cfg, Policy::Baseline)?;
    let mold = run_managed(&prepared.jobs, prepared.procs, &cfg, Policy::Mold)?;
    let delay = run_managed(&prepared.jobs, prepared.procs, &cfg, Policy::Delay)?;
    emit_simulation(common, &baseline)?;
    emit_simulation(common, &mold)?;
    emit_simulation(common, &delay)?;
    write(common, "molding_summary.csv", &policy_summary_csv(&baseline, &mold))?;
    write(common, "delay_summary.csv", &policy_summary_csv(&baseline, &delay))?;
    println!("report bundle complete");
    Ok(())
}

fn cmd_sched_run(jobs_path: &PathBuf, procs: i64, out: &PathBuf) -> Result<()> {
    let text = std::fs::read_to_string(jobs_path)
        .with_context(|| format!("reading {}", jobs_path.display()))?;
    let jobs = qpredict::sched::parse_sim_jobs_csv(&text)?;
    let outcome = qpredict::sched::run_simulation(&jobs, procs)?;
    std::fs::create_dir_all(out)?;
    let path = out.join("schedule.csv");
    std::fs::write(&path, qpredict::sched::schedule_csv(&outcome.schedule))?;
    println!(
        "scheduled {} jobs ({} rejected); wrote {}",
        outcome.schedule.len(),
        outcome.rejected.len(),
        path.display()
    );
    Ok(())
}

fn cmd_synth(kind: SynthKind, out: &PathBuf) -> Result<()> {
    let trace = match kind {
        SynthKind::LoadLaw => synth::linear_load_trace(&synth::LoadLawSpec::default()),
        SynthKind::WaitLaw => synth::wait_law_trace(1000),
        SynthKind::HeavyLoad => synth::heavy_load_trace(60, 118),
        SynthKind::Diurnal => synth::diurnal_trace(150, 350),
    };
    let meta = TraceMeta {
        max_procs: Some(trace.procs),
        comments: vec![
            format!("; MaxProcs: {}", trace.procs),
            format!(
                "; Synthetic workload; policy range starts at job index {}",
                trace.policy_start
            ),
        ],
    };
    std::fs::write(out, serialize_swf(&trace.jobs, &meta))?;
    println!(
        "wrote {} ({} jobs, {} processors)",
        out.display(),
        trace.jobs.len(),
        trace.procs
    );
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(c) => cmd_validate(c),
        Command::PredictWait {
            common,
            dump_states,
        } => cmd_predict_wait(common, *dump_states),
        Command::PredictExec(c) => cmd_predict_exec(c),
        Command::Simulate { common, policy } => cmd_simulate(common, (*policy).into()),
        Command::Tune(c) => cmd_tune(c),
        Command::Report(c) => cmd_report(c),
        Command::SchedRun { jobs, procs, out } => cmd_sched_run(jobs, *procs, out),
        Command::Synth { kind, out } => cmd_synth(*kind, out),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
