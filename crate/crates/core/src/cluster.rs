//! DBSCAN over low-dimensional points.
//!
//! Clusters are grown from core points (at least `min_pts` neighbors within
//! `eps`, the point itself included); everything unreachable is noise. Used
//! both to judge the wait-time structure of a prediction neighborhood and
//! to isolate per-load-bin execution-time clusters.

/// Cluster assignment per point: `Some(cluster_index)` or `None` for noise.
pub type Labels = Vec<Option<usize>>;

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Plain quadratic DBSCAN; fine for the neighborhood sizes involved here.
pub fn dbscan(points: &[[f64; 2]], eps: f64, min_pts: usize) -> Labels {
    let n = points.len();
    let eps2 = eps * eps;
    let neighbors = |i: usize| -> Vec<usize> {
        (0..n)
            .filter(|&j| dist2(&points[i], &points[j]) <= eps2)
            .collect()
    };

    let mut labels: Labels = vec![None; n];
    let mut visited = vec![false; n];
    let mut cluster = 0usize;

    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let seed = neighbors(i);
        if seed.len() < min_pts {
            continue; // stays noise unless later claimed as a border point
        }
        labels[i] = Some(cluster);
        let mut queue = seed;
        while let Some(j) = queue.pop() {
            if labels[j].is_none() {
                labels[j] = Some(cluster);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let nj = neighbors(j);
            if nj.len() >= min_pts {
                queue.extend(nj);
            }
        }
        cluster += 1;
    }
    labels
}

/// Number of clusters present in a label set.
pub fn cluster_count(labels: &Labels) -> usize {
    labels.iter().flatten().max().map_or(0, |&m| m + 1)
}

/// Fraction of points labeled noise.
pub fn noise_fraction(labels: &Labels) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    labels.iter().filter(|l| l.is_none()).count() as f64 / labels.len() as f64
}

/// One-dimensional convenience wrapper.
pub fn dbscan_1d(values: &[f64], eps: f64, min_pts: usize) -> Labels {
    let points: Vec<[f64; 2]> = values.iter().map(|&v| [v, 0.0]).collect();
    dbscan(&points, eps, min_pts)
}
