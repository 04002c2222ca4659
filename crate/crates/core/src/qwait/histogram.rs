//! Frequency-normalized histograms over queue/processor populations and
//! the chi-square distance between them.

use std::sync::Arc;

use super::QwaitError;

/// Histogram with shared bin edges. When `normalized`, counts sum to one
/// (or are all zero for an empty population).
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Arc<[f64]>,
    pub counts: Vec<f64>,
    pub normalized: bool,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Euclidean norm of the count vector.
    pub fn l2_norm(&self) -> f64 {
        self.counts.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Shared binning for one population: fixed-width bins in log space between
/// calibrated bounds. Heavy-tailed populations (request sizes, runtimes,
/// elapsed times) spread far more evenly this way than with linear bins.
#[derive(Debug, Clone)]
pub struct Binning {
    edges: Arc<[f64]>,
    lo: f64,
    scale: f64,
    bins: usize,
}

fn log1p_clamped(v: f64) -> f64 {
    v.max(0.0).ln_1p()
}

impl Binning {
    pub fn new(bins: usize, min: f64, max: f64) -> Self {
        assert!(bins >= 1);
        let lo = log1p_clamped(min.min(max));
        let hi = log1p_clamped(max.max(min));
        let width = hi - lo;
        let scale = if width > 0.0 { bins as f64 / width } else { 0.0 };
        let edges: Vec<f64> = (0..=bins)
            .map(|i| {
                let x = lo + width * i as f64 / bins as f64;
                x.exp_m1()
            })
            .collect();
        Binning {
            edges: edges.into(),
            lo,
            scale,
            bins,
        }
    }

    fn index(&self, value: f64) -> usize {
        if self.scale == 0.0 {
            return 0;
        }
        let pos = (log1p_clamped(value) - self.lo) * self.scale;
        (pos.floor().max(0.0) as usize).min(self.bins - 1)
    }

    /// Histogram of `values`, each bin divided by the population size.
    pub fn histogram(&self, values: impl Iterator<Item = f64>) -> Histogram {
        let mut counts = vec![0.0; self.bins];
        let mut total = 0usize;
        for v in values {
            counts[self.index(v)] += 1.0;
            total += 1;
        }
        if total > 0 {
            let inv = 1.0 / total as f64;
            for c in &mut counts {
                *c *= inv;
            }
        }
        Histogram {
            edges: self.edges.clone(),
            counts,
            normalized: true,
        }
    }
}

/// Chi-square distance between two histograms over the same bins. Terms
/// with an empty bin pair contribute zero; the result is symmetric, zero
/// exactly on equal histograms, and at most 2 for normalized inputs.
pub fn chi_square(p: &Histogram, q: &Histogram) -> Result<f64, QwaitError> {
    let same_edges = Arc::ptr_eq(&p.edges, &q.edges) || p.edges == q.edges;
    if !same_edges || p.counts.len() != q.counts.len() {
        return Err(QwaitError::MismatchedBins);
    }
    if !(p.normalized && q.normalized) {
        return Err(QwaitError::UnnormalizedHistogram);
    }
    let mut acc = 0.0;
    for (a, b) in p.counts.iter().zip(&q.counts) {
        let denom = a + b;
        if denom > 0.0 {
            let diff = a - b;
            acc += diff * diff / denom;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(counts: &[f64]) -> Histogram {
        let edges: Vec<f64> = (0..=counts.len()).map(|i| i as f64).collect();
        Histogram {
            edges: edges.into(),
            counts: counts.to_vec(),
            normalized: true,
        }
    }

    #[test]
    fn identical_histograms_have_zero_distance() {
        let p = hist(&[0.5, 0.5]);
        assert_eq!(chi_square(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_mass_reaches_two() {
        // (1-0)^2/1 + (0-1)^2/1 = 2, the maximum for normalized inputs.
        let p = hist(&[1.0, 0.0]);
        let q = hist(&[0.0, 1.0]);
        assert_eq!(chi_square(&p, &q).unwrap(), 2.0);
    }

    #[test]
    fn hand_evaluated_pair() {
        // 0.0625/0.75 + 0.0625/1.25 = 0.13333...
        let p = hist(&[0.5, 0.5]);
        let q = hist(&[0.25, 0.75]);
        let d = chi_square(&p, &q).unwrap();
        assert!((d - (0.0625 / 0.75 + 0.0625 / 1.25)).abs() < 1e-12);
        assert!((d - 2.0 / 15.0).abs() < 1e-9);
    }

    #[test]
    fn mismatched_edges_error() {
        let p = hist(&[1.0, 0.0]);
        let q = Histogram {
            edges: vec![0.0, 5.0, 10.0].into(),
            counts: vec![0.0, 1.0],
            normalized: true,
        };
        assert!(matches!(
            chi_square(&p, &q),
            Err(QwaitError::MismatchedBins)
        ));
    }

    #[test]
    fn empty_population_yields_zero_histogram() {
        let b = Binning::new(4, 1.0, 100.0);
        let h = b.histogram(std::iter::empty());
        assert!(h.counts.iter().all(|&c| c == 0.0));
        assert!(h.normalized);
        assert_eq!(h.l2_norm(), 0.0);
    }

    #[test]
    fn binning_normalizes_by_population_size() {
        let b = Binning::new(4, 1.0, 100.0);
        let h = b.histogram([1.0, 1.0, 100.0].into_iter());
        let sum: f64 = h.counts.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert_eq!(h.counts[0], 2.0 / 3.0);
        assert_eq!(h.counts[3], 1.0 / 3.0);
    }

    #[test]
    fn degenerate_bounds_put_everything_in_first_bin() {
        let b = Binning::new(8, 5.0, 5.0);
        let h = b.histogram([0.0, 5.0, 99.0].into_iter());
        assert_eq!(h.counts[0], 1.0);
    }

    #[test]
    fn out_of_range_values_clamp_to_edge_bins() {
        let b = Binning::new(4, 10.0, 1000.0);
        let h = b.histogram([0.5, 1e9].into_iter());
        assert_eq!(h.counts[0], 0.5);
        assert_eq!(h.counts[3], 0.5);
    }
}
