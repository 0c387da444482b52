//! Mesh segmentation and controller assignment strategies.

use ndarray::Array2;

use super::kmeans::kmeans;
use super::{labels_to_clusters, Clustering, Method};
use crate::error::{Error, Result};

/// Mesh clusters from k-means over the rows of the offset matrix.
pub fn segment_mesh_rsjd(offsets: &Array2<f64>, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let r = kmeans(offsets, k, seed)?;
    Ok(labels_to_clusters(&r.labels, k))
}

/// Mesh clusters from k-means over the rows of the rearranged basis.
pub fn segment_mesh_rs(delta: &Array2<f64>, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let r = kmeans(delta, k, seed)?;
    Ok(labels_to_clusters(&r.labels, k))
}

/// Splits scalars into a low and a high group by 2-means and returns the
/// membership mask of the high group. `None` when all values are equal.
///
/// On the real line an optimal 2-means partition is a threshold split of the
/// sorted values, so every split between distinct values is scored and the
/// best one taken. Ties between splits go to the lowest threshold.
pub fn two_means_high_group(values: &[f64]) -> Option<Vec<bool>> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let (lo, hi) = (sorted.first()?, sorted.last()?);
    if lo == hi {
        return None;
    }

    let mut prefix = vec![0.0; sorted.len() + 1];
    let mut prefix_sq = vec![0.0; sorted.len() + 1];
    for (i, &v) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
        prefix_sq[i + 1] = prefix_sq[i] + v * v;
    }
    let sse = |a: usize, b: usize| {
        let len = (b - a) as f64;
        let s = prefix[b] - prefix[a];
        (prefix_sq[b] - prefix_sq[a]) - s * s / len
    };

    let total = sorted.len();
    let split = (1..total)
        .filter(|&s| sorted[s - 1] < sorted[s])
        .map(|s| (s, sse(0, s) + sse(s, total)))
        .fold(None, |best: Option<(usize, f64)>, cand| match best {
            Some(b) if b.1 <= cand.1 => Some(b),
            _ => Some(cand),
        })
        .map(|(s, _)| s)?;

    let mut high = vec![false; values.len()];
    for &i in &order[split..] {
        high[i] = true;
    }
    Some(high)
}

/// Assigns every controller to the mesh clusters in which its mean
/// per-vertex offset falls in the high group of a 2-means split.
///
/// A controller whose per-cluster means are all equal (including a
/// controller that moves nothing) is assigned to every cluster.
pub fn assign_controllers_rsjd(
    offsets: &Array2<f64>,
    mesh_clusters: &[Vec<usize>],
) -> Result<Vec<Vec<usize>>> {
    let (n, m) = offsets.dim();
    check_partition(mesh_clusters, n, false)?;
    let k = mesh_clusters.len();
    let mut ctrl = vec![Vec::new(); k];
    for i in 0..m {
        let h: Vec<f64> = mesh_clusters
            .iter()
            .map(|cluster| {
                cluster.iter().map(|&l| offsets[[l, i]]).sum::<f64>() / cluster.len() as f64
            })
            .collect();
        match two_means_high_group(&h) {
            Some(high) => {
                for (c, _) in high.iter().enumerate().filter(|(_, &hi)| hi) {
                    ctrl[c].push(i);
                }
            }
            None => {
                if h.iter().all(|&v| v == 0.0) {
                    log::warn!("controller {i} has no deformation; assigned to every cluster");
                }
                for c in ctrl.iter_mut() {
                    c.push(i);
                }
            }
        }
    }
    Ok(ctrl)
}

/// Threshold adjustment of an assignment: inside each cluster, every
/// unassigned controller whose summed offset over the cluster's vertices
/// strictly exceeds the weakest assigned controller's is added.
pub fn adjust_assignment_rsjd_a(offsets: &Array2<f64>, clustering: &Clustering) -> Result<Clustering> {
    let (n, m) = offsets.dim();
    clustering.validate(n, m)?;
    let mut out = clustering.clone();
    for (k, (mesh, ctrl)) in clustering
        .mesh_clusters
        .iter()
        .zip(&clustering.ctrl_clusters)
        .enumerate()
    {
        if ctrl.is_empty() {
            log::warn!("cluster {k} has no controllers; threshold undefined, skipped");
            continue;
        }
        let magnitude: Vec<f64> = (0..m)
            .map(|j| mesh.iter().map(|&l| offsets[[l, j]]).sum())
            .collect();
        let threshold = ctrl
            .iter()
            .map(|&j| magnitude[j])
            .fold(f64::INFINITY, f64::min);
        let mut assigned = vec![false; m];
        for &j in ctrl {
            assigned[j] = true;
        }
        out.ctrl_clusters[k] = (0..m)
            .filter(|&j| assigned[j] || magnitude[j] > threshold)
            .collect();
    }
    out.method = Some(Method::RsjdA);
    Ok(out)
}

/// Assigns each controller to the segment holding more than half of its
/// total offset mass; without such a segment, to the segment with the most
/// mass (lowest index on ties). Inert controllers go to segment 0.
pub fn assign_controllers_ssk(
    offsets: &Array2<f64>,
    segments: &[Vec<usize>],
) -> Result<Vec<Vec<usize>>> {
    let (n, m) = offsets.dim();
    check_partition(segments, n, false)?;
    let mut ctrl = vec![Vec::new(); segments.len()];
    for i in 0..m {
        let shares: Vec<f64> = segments
            .iter()
            .map(|seg| seg.iter().map(|&l| offsets[[l, i]]).sum())
            .collect();
        let total: f64 = shares.iter().sum();
        let target = if total == 0.0 {
            log::warn!("controller {i} has no deformation; assigned to segment 0");
            0
        } else if let Some(k) = shares.iter().position(|&s| s > total / 2.0) {
            k
        } else {
            argmax_lowest(&shares)
        };
        ctrl[target].push(i);
    }
    Ok(ctrl)
}

/// One cluster per controller; each vertex joins the controller with the
/// largest offset at that vertex (lowest index on ties). Mesh clusters may be
/// empty.
pub fn sparse_clustering(offsets: &Array2<f64>) -> Clustering {
    let m = offsets.ncols();
    let labels: Vec<usize> = offsets
        .rows()
        .into_iter()
        .map(|r| argmax_lowest(r.as_slice().unwrap_or(&r.to_vec())))
        .collect();
    let mesh = labels_to_clusters(&labels, m);
    let ctrl = (0..m).map(|k| vec![k]).collect();
    Clustering::new(mesh, ctrl).with_provenance(Method::Sparse, None)
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_partition(clusters: &[Vec<usize>], n: usize, allow_empty: bool) -> Result<()> {
    let mut seen = vec![false; n];
    for (k, c) in clusters.iter().enumerate() {
        if c.is_empty() && !allow_empty {
            return Err(Error::InvalidClustering(format!("mesh cluster {k} is empty")));
        }
        for &l in c {
            if l >= n || std::mem::replace(&mut seen[l], true) {
                return Err(Error::InvalidClustering(format!(
                    "vertex {l} is out of range or repeated"
                )));
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidClustering(
            "mesh clusters do not cover every vertex".into(),
        ));
    }
    Ok(())
}
