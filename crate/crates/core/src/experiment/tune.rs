//! One-at-a-time parameter sweeps: each gridded parameter varies while the
//! others stay fixed, keeping the value with the lowest validation error
//! before moving to the next parameter.

use crate::config::ExperimentConfig;
use crate::qwait::QwaitConfig;
use crate::trace::JobRecord;

use super::predict::run_predict_wait_scored;
use super::ExperimentError;

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub validation_aae: f64,
    pub kept: bool,
}

#[derive(Debug, Clone)]
pub struct TuneReport {
    pub rows: Vec<SweepRow>,
    pub best: QwaitConfig,
    pub best_aae: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("parameter,value,validation_aae,kept\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.parameter, r.value, r.validation_aae, r.kept
        ));
    }
    out
}

fn apply_param(cfg: &mut QwaitConfig, name: &str, value: f64) -> Result<(), ExperimentError> {
    match name {
        "history_capacity" => cfg.history_capacity = value as usize,
        "bins" => cfg.bins = value as usize,
        "k_percent" => cfg.k_percent = value,
        "avg_dist_threshold" => cfg.avg_dist_threshold = value,
        "outlier_fraction" => cfg.outlier_fraction = value,
        "dbscan_eps" => cfg.dbscan_eps = value,
        "dbscan_min_pts" => cfg.dbscan_min_pts = value as usize,
        "sdm_window" => cfg.sdm_window = value,
        "sdm_max_dist" => cfg.sdm_max_dist = value,
        "ridge_lambda" => cfg.ridge_lambda = value,
        "ridge_max_dist" => cfg.ridge_max_dist = value,
        "wavg_neighbors" => cfg.wavg_neighbors = value as usize,
        _ => {
            return Err(ExperimentError::Config(format!(
                "unknown tunable parameter {name}"
            )))
        }
    }
    Ok(())
}

/// Sweep the configured grids, minimizing wait-prediction error on the
/// validation split. Grids are visited in name order; within a grid the
/// first value of any tie wins.
pub fn tune(jobs: &[JobRecord], cfg: &ExperimentConfig) -> Result<TuneReport, ExperimentError> {
    if cfg.tune_grids.is_empty() {
        return Err(ExperimentError::Config(
            "tune requires at least one tune.<parameter> grid".into(),
        ));
    }
    let split = cfg.split_for(jobs.len());
    split.validate(jobs.len())?;

    let evaluate = |qwait: &QwaitConfig| -> Result<f64, ExperimentError> {
        let mut probe = cfg.clone();
        probe.qwait = qwait.clone();
        let report = run_predict_wait_scored(jobs, &probe, split.validation.clone())?;
        Ok(report.aae)
    };

    let mut current = cfg.qwait.clone();
    let mut current_aae = evaluate(&current)?;
    let mut rows = Vec::new();

    for (param, grid) in &cfg.tune_grids {
        let mut best_value: Option<f64> = None;
        let mut best_aae = f64::INFINITY;
        let mut grid_rows = Vec::with_capacity(grid.len());
        for &value in grid {
            let mut probe = current.clone();
            apply_param(&mut probe, param, value)?;
            let aae = evaluate(&probe)?;
            grid_rows.push(SweepRow {
                parameter: param.clone(),
                value,
                validation_aae: aae,
                kept: false,
            });
            if aae < best_aae {
                best_aae = aae;
                best_value = Some(value);
            }
        }
        if let Some(v) = best_value {
            if best_aae <= current_aae {
                apply_param(&mut current, param, v)?;
                current_aae = best_aae;
                for r in grid_rows.iter_mut() {
                    r.kept = r.value == v;
                }
            }
        }
        rows.extend(grid_rows);
    }

    Ok(TuneReport {
        rows,
        best: current,
        best_aae: current_aae,
    })
}
