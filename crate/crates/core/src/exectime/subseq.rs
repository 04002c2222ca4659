//! Longest bounded-growth subsequence of (load, runtime) points.
//!
//! Points are nodes of a DAG with an edge x -> y when the load strictly
//! increases, the runtime does not decrease, and the relative runtime
//! growth stays within the percentage cap. The longest path is found by
//! dynamic programming over the (already load-sorted) linearized order in
//! O(n^2). Ties prefer the smaller total runtime span and then the
//! lexicographically smallest index sequence, which keeps the selection
//! fully deterministic.

/// One candidate point: (load, runtime).
pub type Point = (f64, f64);

fn edge(a: Point, b: Point, max_growth_pct: f64) -> bool {
    let (la, ra) = a;
    let (lb, rb) = b;
    if !(la < lb) || !(ra <= rb) {
        return false;
    }
    if ra == 0.0 {
        // Relative growth from zero is undefined; only a flat step is
        // within any percentage cap.
        return rb == 0.0;
    }
    (rb - ra) * 100.0 <= max_growth_pct * ra
}

/// Indices of the selected subsequence, in order. Expects `points` sorted
/// by ascending load. A single point selects itself.
pub fn longest_nondecreasing_subsequence(points: &[Point], max_growth_pct: f64) -> Vec<usize> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }

    // Longest path length starting at each node, plus the smallest
    // reachable end-runtime among paths of that length.
    let mut len = vec![1usize; n];
    let mut min_end = vec![0.0f64; n];
    for i in (0..n).rev() {
        min_end[i] = points[i].1;
        for j in i + 1..n {
            if edge(points[i], points[j], max_growth_pct) && len[j] + 1 >= len[i] {
                if len[j] + 1 > len[i] {
                    len[i] = len[j] + 1;
                    min_end[i] = min_end[j];
                } else if min_end[j] < min_end[i] {
                    min_end[i] = min_end[j];
                }
            }
        }
    }

    let best_len = *len.iter().max().unwrap();
    let start = (0..n)
        .filter(|&i| len[i] == best_len)
        .min_by(|&a, &b| {
            let span_a = min_end[a] - points[a].1;
            let span_b = min_end[b] - points[b].1;
            span_a.partial_cmp(&span_b).unwrap().then(a.cmp(&b))
        })
        .unwrap();
    let target_end = min_end[start];

    // `reaches[i][l]`: some path from i of length l ends exactly at the
    // target runtime. Guides the lexicographically-smallest reconstruction.
    let mut reaches = vec![vec![false; best_len + 1]; n];
    for i in (0..n).rev() {
        reaches[i][1] = points[i].1 == target_end;
        for l in 2..=best_len {
            for j in i + 1..n {
                if edge(points[i], points[j], max_growth_pct) && reaches[j][l - 1] {
                    reaches[i][l] = true;
                    break;
                }
            }
        }
    }

    let mut path = Vec::with_capacity(best_len);
    let mut current = start;
    let mut remaining = best_len;
    path.push(start);
    while remaining > 1 {
        let next = (current + 1..n)
            .find(|&j| {
                edge(points[current], points[j], max_growth_pct)
                    && len[j] >= remaining - 1
                    && reaches[j][remaining - 1]
            })
            .expect("path reconstruction follows the length table");
        path.push(next);
        current = next;
        remaining -= 1;
    }
    path
}
