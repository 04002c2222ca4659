//! Per-tuple load functions: linear maps from system load to execution
//! time, learned from a validation set.
//!
//! For each heavily-submitting (user, request size, queue, group) tuple the
//! jobs are bucketed into load bins, each bin is reduced to the average of
//! its densest execution-time cluster, the longest bounded-growth
//! subsequence of the bin averages discards outlier bins, and a least
//! squares line through the survivors becomes the tuple's load function.

use std::collections::BTreeMap;

use crate::cluster::dbscan_1d;

use super::subseq::longest_nondecreasing_subsequence;
use super::{ExecSample, TupleKey};

/// A fitted linear load-to-runtime trend for one tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadFunction {
    pub key: TupleKey,
    /// Seconds of runtime per unit of load.
    pub slope: f64,
    /// Runtime at zero load, seconds.
    pub intercept: f64,
    /// Load range the fit was supported on.
    pub load_range: (f64, f64),
    /// Number of bin points behind the fit.
    pub points: usize,
}

impl LoadFunction {
    pub fn eval(&self, load: f64) -> f64 {
        self.intercept + self.slope * load
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    TooFewJobs,
    LoadSpreadTooSmall,
    TooFewSurvivingPoints,
}

#[derive(Debug, Clone)]
pub struct LoadFnParams {
    /// Number of highest-volume tuples considered.
    pub top_k: usize,
    /// Minimum jobs a tuple needs.
    pub min_jobs: usize,
    /// Minimum spread between the tuple's smallest and largest load.
    pub min_spread: f64,
    /// Growth cap (percent) between consecutive surviving bin averages.
    pub max_growth_pct: f64,
    /// Number of load bins over [0, 1].
    pub bins: usize,
    /// Per-bin clustering epsilon, as a fraction of the bin's runtime
    /// spread.
    pub dbscan_eps_frac: f64,
    pub dbscan_min_pts: usize,
}

impl Default for LoadFnParams {
    fn default() -> Self {
        LoadFnParams {
            top_k: 25,
            min_jobs: 10,
            min_spread: 0.5,
            max_growth_pct: 50.0,
            bins: 20,
            dbscan_eps_frac: 0.15,
            dbscan_min_pts: 2,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadFunctionSet {
    pub functions: Vec<LoadFunction>,
    pub skipped: Vec<(TupleKey, SkipReason)>,
}

impl LoadFunctionSet {
    pub fn for_key(&self, key: &TupleKey) -> Option<&LoadFunction> {
        self.functions.iter().find(|f| f.key == *key)
    }
}

/// Average execution time of the densest cluster in one load bin, along
/// with the average load of the clustered jobs. Bins whose jobs never form
/// a cluster contribute nothing.
fn bin_point(samples: &[&ExecSample], params: &LoadFnParams) -> Option<(f64, f64)> {
    let execs: Vec<f64> = samples.iter().map(|s| s.exec).collect();
    let spread = execs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - execs.iter().cloned().fold(f64::INFINITY, f64::min);
    let eps = params.dbscan_eps_frac * spread.max(0.0);
    let labels = dbscan_1d(&execs, eps, params.dbscan_min_pts);
    let clusters = crate::cluster::cluster_count(&labels);
    if clusters == 0 {
        return None;
    }
    // Densest cluster wins; ties go to the lower mean execution time.
    let mut best: Option<(usize, f64, usize)> = None; // (size, mean, id)
    for c in 0..clusters {
        let members: Vec<f64> = labels
            .iter()
            .zip(&execs)
            .filter(|(l, _)| **l == Some(c))
            .map(|(_, &e)| e)
            .collect();
        let m = crate::stats::mean(&members);
        let candidate = (members.len(), m, c);
        let better = match best {
            None => true,
            Some((bs, bm, _)) => {
                candidate.0 > bs || (candidate.0 == bs && m < bm)
            }
        };
        if better {
            best = Some(candidate);
        }
    }
    let (_, _, chosen) = best.unwrap();
    let mut load_sum = 0.0;
    let mut exec_sum = 0.0;
    let mut count = 0usize;
    for (l, s) in labels.iter().zip(samples) {
        if *l == Some(chosen) {
            load_sum += s.load;
            exec_sum += s.exec;
            count += 1;
        }
    }
    Some((load_sum / count as f64, exec_sum / count as f64))
}

fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in points {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Build the load-function set from per-tuple validation samples.
pub fn build_load_functions(
    per_key: &BTreeMap<TupleKey, Vec<ExecSample>>,
    params: &LoadFnParams,
) -> LoadFunctionSet {
    let mut ranked: Vec<(&TupleKey, usize)> =
        per_key.iter().map(|(k, v)| (k, v.len())).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.truncate(params.top_k);

    let mut out = LoadFunctionSet::default();
    for (key, count) in ranked {
        if count < params.min_jobs {
            out.skipped.push((*key, SkipReason::TooFewJobs));
            continue;
        }
        let samples = &per_key[key];
        let min_load = samples.iter().map(|s| s.load).fold(f64::INFINITY, f64::min);
        let max_load = samples
            .iter()
            .map(|s| s.load)
            .fold(f64::NEG_INFINITY, f64::max);
        if max_load - min_load < params.min_spread {
            out.skipped.push((*key, SkipReason::LoadSpreadTooSmall));
            continue;
        }

        let mut bins: Vec<Vec<&ExecSample>> = vec![Vec::new(); params.bins];
        for s in samples {
            let idx = ((s.load * params.bins as f64).floor() as usize).min(params.bins - 1);
            bins[idx].push(s);
        }
        let mut points: Vec<(f64, f64)> = bins
            .iter()
            .filter(|b| !b.is_empty())
            .filter_map(|b| bin_point(b, params))
            .collect();
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let selected = longest_nondecreasing_subsequence(&points, params.max_growth_pct);
        let survivors: Vec<(f64, f64)> = selected.iter().map(|&i| points[i]).collect();
        if survivors.len() < 2 {
            out.skipped.push((*key, SkipReason::TooFewSurvivingPoints));
            continue;
        }
        match least_squares(&survivors) {
            Some((slope, intercept)) => out.functions.push(LoadFunction {
                key: *key,
                slope,
                intercept,
                load_range: (survivors[0].0, survivors[survivors.len() - 1].0),
                points: survivors.len(),
            }),
            None => out
                .skipped
                .push((*key, SkipReason::TooFewSurvivingPoints)),
        }
    }
    out
}

/// Serialize the function set as CSV.
pub fn load_functions_csv(set: &LoadFunctionSet) -> String {
    let mut out =
        String::from("user_id,req_size,queue_id,group_id,slope,intercept,load_min,load_max,points\n");
    for f in &set.functions {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            f.key.user_id,
            f.key.req_size,
            f.key.queue_id,
            f.key.group_id,
            f.slope,
            f.intercept,
            f.load_range.0,
            f.load_range.1,
            f.points,
        ));
    }
    out
}
