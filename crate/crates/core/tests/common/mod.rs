//! Brute-force reference implementations used as independent oracles.
//!
//! Everything here works on plain coordinate triples and deliberately avoids
//! calling into the library's geometry/model/defense code paths.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Exhaustive linear-scan nearest neighbor comparing squared distances,
/// ties resolved to the lowest index.
pub fn brute_nearest(q: [f64; 3], pts: &[[f64; 3]]) -> (usize, f64) {
    let mut best_i = 0usize;
    let mut best_d2 = f64::INFINITY;
    for (i, p) in pts.iter().enumerate() {
        let dx = q[0] - p[0];
        let dy = q[1] - p[1];
        let dz = q[2] - p[2];
        let d2 = dx * dx + dy * dy + dz * dz;
        if d2 < best_d2 {
            best_d2 = d2;
            best_i = i;
        }
    }
    (best_i, best_d2.sqrt())
}

/// O(|a|·|b|) double-loop Hausdorff distance.
pub fn brute_hausdorff(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let directed = |from: &[[f64; 3]], to: &[[f64; 3]]| -> f64 {
        let mut worst = 0.0f64;
        for p in from {
            let mut best = f64::INFINITY;
            for q in to {
                let dx = p[0] - q[0];
                let dy = p[1] - q[1];
                let dz = p[2] - q[2];
                let d2 = dx * dx + dy * dy + dz * dz;
                if d2 < best {
                    best = d2;
                }
            }
            if best > worst {
                worst = best;
            }
        }
        worst
    };
    directed(a, b).max(directed(b, a)).sqrt()
}

/// Per-point mean distance to the `k` nearest other points, by full sort.
pub fn brute_knn_mean_distances(pts: &[[f64; 3]], k: usize) -> Vec<f64> {
    let n = pts.len();
    let mut stats = Vec::with_capacity(n);
    for i in 0..n {
        let mut dists: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let dx = pts[i][0] - pts[j][0];
                let dy = pts[i][1] - pts[j][1];
                let dz = pts[i][2] - pts[j][2];
                (dx * dx + dy * dy + dz * dz).sqrt()
            })
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        stats.push(dists[..k].iter().sum::<f64>() / k as f64);
    }
    stats
}

/// Survivor indices of a statistical outlier removal pass: drop points whose
/// k-NN mean distance exceeds mean + mult * population std of that statistic.
pub fn brute_sor_survivors(pts: &[[f64; 3]], k: usize, mult: f64) -> Vec<usize> {
    let stats = brute_knn_mean_distances(pts, k);
    let n = stats.len() as f64;
    let mean = stats.iter().sum::<f64>() / n;
    let var = stats.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    let threshold = mean + mult * var.sqrt();
    (0..pts.len()).filter(|&i| stats[i] <= threshold).collect()
}

/// Indices of the `m` largest values, ties preferring the lowest index.
pub fn brute_top_m_indices(values: &[f64], m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    order.truncate(m);
    order
}

/// Deterministic random cloud generator for oracle battles.
pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| {
            [
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
            ]
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
