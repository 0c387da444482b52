//! Lloyd's k-means with seeded k-means++ initialization.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const KMEANS_MAX_ITER: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    /// Within-cluster sum of squares of the returned labels.
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after every Lloyd iteration.
    pub inertia_trace: Vec<f64>,
    pub converged: bool,
}

pub fn kmeans(rows: &Array2<f64>, k: usize, seed: u64) -> Result<KMeansResult> {
    kmeans_with_limit(rows, k, seed, KMEANS_MAX_ITER)
}

/// Clusters the rows of `rows` into exactly `k` non-empty groups.
///
/// Runs until the assignment stops changing or `max_iter` iterations. A
/// centroid left without members takes over the point farthest from its
/// current centroid among clusters that can spare one.
pub fn kmeans_with_limit(
    rows: &Array2<f64>,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<KMeansResult> {
    let (n, dim) = rows.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k-means needs 1 <= K <= {n}, got K = {k}"
        )));
    }
    let data = rows.as_standard_layout();
    let data = data.as_slice().expect("standard layout");
    let row = |i: usize| &data[i * dim..(i + 1) * dim];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(&row, n, dim, k, &mut rng);

    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let changed = assign(&row, &centroids, dim, k, &mut labels, &mut dist);
        repair_empty(&row, &mut centroids, dim, k, &mut labels, &mut dist);
        update_centroids(&row, &mut centroids, dim, k, &labels);
        trace.push(inertia(&row, &centroids, dim, &labels));
        if !changed {
            converged = true;
            break;
        }
    }

    let inertia = *trace.last().unwrap_or(&0.0);
    let centroids = Array2::from_shape_vec((k, dim), centroids).expect("centroid shape");
    Ok(KMeansResult {
        labels,
        centroids,
        inertia,
        iterations,
        inertia_trace: trace,
        converged,
    })
}

fn plus_plus_init<'a>(
    row: &impl Fn(usize) -> &'a [f64],
    n: usize,
    dim: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut chosen = Vec::with_capacity(k);
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    chosen.push(first);
    centroids.extend_from_slice(row(first));

    let mut best: Vec<f64> = (0..n).map(|i| sq_dist(row(i), row(first))).collect();
    while chosen.len() < k {
        let total: f64 = best.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in best.iter().enumerate() {
                if d > 0.0 {
                    if target < d {
                        pick = Some(i);
                        break;
                    }
                    target -= d;
                }
            }
            // Rounding can leave `target` past the last positive weight.
            pick.unwrap_or_else(|| best.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            // Every row coincides with a centroid; fall back to unchosen rows.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        centroids.extend_from_slice(row(next));
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(sq_dist(row(i), row(next)));
        }
    }
    centroids
}

/// Nearest-centroid assignment. Ties keep the current label, otherwise go to
/// the lowest centroid index. Returns whether any label changed.
fn assign<'a>(
    row: &impl Fn(usize) -> &'a [f64],
    centroids: &[f64],
    dim: usize,
    k: usize,
    labels: &mut [usize],
    dist: &mut [f64],
) -> bool {
    let mut changed = false;
    for (i, label) in labels.iter_mut().enumerate() {
        let x = row(i);
        let mut best_c = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..k {
            let d = sq_dist(x, &centroids[c * dim..(c + 1) * dim]);
            if d < best_d {
                best_d = d;
                best_c = c;
            }
        }
        if *label < k {
            let cur = sq_dist(x, &centroids[*label * dim..(*label + 1) * dim]);
            if cur <= best_d {
                best_c = *label;
                best_d = cur;
            }
        }
        if best_c != *label {
            *label = best_c;
            changed = true;
        }
        dist[i] = best_d;
    }
    changed
}

fn repair_empty<'a>(
    row: &impl Fn(usize) -> &'a [f64],
    centroids: &mut [f64],
    dim: usize,
    k: usize,
    labels: &mut [usize],
    dist: &mut [f64],
) {
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let donor = (0..labels.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .fold(None, |acc: Option<usize>, i| match acc {
                Some(j) if dist[j] >= dist[i] => Some(j),
                _ => Some(i),
            })
            .expect("K <= rows guarantees a cluster with a spare point");
        sizes[labels[donor]] -= 1;
        sizes[c] = 1;
        labels[donor] = c;
        dist[donor] = 0.0;
        centroids[c * dim..(c + 1) * dim].copy_from_slice(row(donor));
    }
}

fn update_centroids<'a>(
    row: &impl Fn(usize) -> &'a [f64],
    centroids: &mut [f64],
    dim: usize,
    k: usize,
    labels: &[usize],
) {
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, x) in sums[l * dim..(l + 1) * dim].iter_mut().zip(row(i)) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            for (dst, s) in centroids[c * dim..(c + 1) * dim]
                .iter_mut()
                .zip(&sums[c * dim..(c + 1) * dim])
            {
                *dst = s * inv;
            }
        }
    }
}

fn inertia<'a>(
    row: &impl Fn(usize) -> &'a [f64],
    centroids: &[f64],
    dim: usize,
    labels: &[usize],
) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(row(i), &centroids[l * dim..(l + 1) * dim]))
        .sum()
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
