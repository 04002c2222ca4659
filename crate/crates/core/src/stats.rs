//! Small numeric helpers: rank correlation, moments, and a dense
//! symmetric-system solver for the ridge normal equations.

/// Average ranks (1-based) with ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the average 1-based rank.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

/// Spearman's rank correlation with average ranks for ties. `None` when
/// either series is constant (the coefficient is undefined).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return None;
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Solve `A x = b` for a dense square system by Gaussian elimination with
/// partial pivoting. Returns `None` for a singular matrix.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Ridge regression on standardized features.
///
/// Columns are shifted to mean zero and scaled to unit variance over the
/// training rows (constant columns are dropped to zero), the intercept is
/// left unpenalized, and the coefficient system `(XᵀX + λI) β = Xᵀ(y - ȳ)`
/// is solved directly. Evaluation standardizes the target with the same
/// statistics.
#[derive(Debug, Clone)]
pub struct RidgeModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl RidgeModel {
    pub fn fit(rows: &[Vec<f64>], ys: &[f64], lambda: f64) -> Option<RidgeModel> {
        let n = rows.len();
        if n == 0 || n != ys.len() {
            return None;
        }
        let d = rows[0].len();
        let mut means = vec![0.0; d];
        let mut scales = vec![0.0; d];
        for j in 0..d {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            means[j] = mean(&col);
            let sd = std_dev(&col);
            scales[j] = if sd > 0.0 { sd } else { 0.0 };
        }
        let standardized: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                (0..d)
                    .map(|j| {
                        if scales[j] > 0.0 {
                            (r[j] - means[j]) / scales[j]
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let y_mean = mean(ys);
        let centered: Vec<f64> = ys.iter().map(|y| y - y_mean).collect();

        let mut xtx = vec![vec![0.0; d]; d];
        let mut xty = vec![0.0; d];
        for (row, &cy) in standardized.iter().zip(&centered) {
            for j in 0..d {
                xty[j] += row[j] * cy;
                for k in j..d {
                    xtx[j][k] += row[j] * row[k];
                }
            }
        }
        for j in 0..d {
            for k in 0..j {
                xtx[j][k] = xtx[k][j];
            }
            xtx[j][j] += lambda;
        }
        let coefficients = solve_dense(&xtx, &xty)?;
        Some(RidgeModel {
            intercept: y_mean,
            coefficients,
            means,
            scales,
        })
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut acc = self.intercept;
        for (j, &v) in row.iter().enumerate() {
            if self.scales[j] > 0.0 {
                acc += self.coefficients[j] * (v - self.means[j]) / self.scales[j];
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_handle_ties_with_averages() {
        let ranks = average_ranks(&[10.0, 20.0, 20.0, 30.0]);
        assert_eq!(ranks, vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn spearman_perfect_monotone_is_one() {
        let xs = [1.0, 2.0, 5.0, 9.0];
        let ys = [10.0, 400.0, 500.0, 90000.0];
        assert!((spearman(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_perfect_decreasing_is_minus_one() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [8.0, 6.0, 4.0, 2.0];
        assert!((spearman(&xs, &ys).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_with_ties_matches_reference() {
        // Reference value computed with average ranks by hand:
        // x = [1, 2, 2, 3], y = [10, 20, 30, 30]
        // rx = [1, 2.5, 2.5, 4], ry = [1, 2, 3.5, 3.5]
        // cov = 3.75, var_x = var_y = 4.5, rho = 3.75/4.5 = 5/6.
        let xs = [1.0, 2.0, 2.0, 3.0];
        let ys = [10.0, 20.0, 30.0, 30.0];
        let rho = spearman(&xs, &ys).unwrap();
        assert!((rho - 5.0 / 6.0).abs() < 1e-12, "{rho}");
    }

    #[test]
    fn spearman_constant_series_is_undefined() {
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_none());
    }

    #[test]
    fn spearman_invariant_under_monotone_transform() {
        let xs = [0.5, 3.0, 1.5, 9.0, 4.0];
        let ys = [3.0, 8.0, 1.0, 14.0, 9.5];
        let transformed: Vec<f64> = xs.iter().map(|x| (x * 10.0_f64).exp().ln_1p()).collect();
        let a = spearman(&xs, &ys).unwrap();
        let b = spearman(&transformed, &ys).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn solver_recovers_known_solution() {
        let a = vec![
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ];
        let x_true = [1.0, -2.0, 3.0];
        let b: Vec<f64> = a
            .iter()
            .map(|row| row.iter().zip(&x_true).map(|(c, x)| c * x).sum())
            .collect();
        let x = solve_dense(&a, &b).unwrap();
        for (got, want) in x.iter().zip(&x_true) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn ridge_recovers_linear_law_with_tiny_penalty() {
        // y = 2 * x0 exactly.
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, 7.0]).collect();
        let ys: Vec<f64> = rows.iter().map(|r| 2.0 * r[0]).collect();
        let model = RidgeModel::fit(&rows, &ys, 1e-8).unwrap();
        let pred = model.predict(&[17.5, 7.0]);
        assert!((pred - 35.0).abs() < 1e-6, "{pred}");
    }

    #[test]
    fn ridge_constant_target_predicts_constant() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let ys = vec![42.0; 20];
        let model = RidgeModel::fit(&rows, &ys, 1.0).unwrap();
        assert!((model.predict(&[100.0, 5.0]) - 42.0).abs() < 1e-9);
    }

    #[test]
    fn ridge_survives_collinear_columns() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let ys: Vec<f64> = (0..30).map(|i| 3.0 * i as f64 + 1.0).collect();
        let model = RidgeModel::fit(&rows, &ys, 1.0).unwrap();
        let pred = model.predict(&[10.0, 20.0]);
        assert!(pred.is_finite());
        assert!((pred - 31.0).abs() < 5.0);
    }
}
