//! Data-free scores of a clustering: density, inter-density and
//! reconstruction error.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Clustering;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterScores {
    #[serde(rename = "E_D")]
    pub density: f64,
    #[serde(rename = "E_ID")]
    pub inter_density: f64,
    #[serde(rename = "E_R")]
    pub reconstruction_error: f64,
}

/// Fraction of vertex-controller pairs kept: `sum_k n_k m_k / (n m)`.
pub fn density(clustering: &Clustering, n: usize, m: usize) -> f64 {
    let edges: usize = clustering
        .mesh_clusters
        .iter()
        .zip(&clustering.ctrl_clusters)
        .map(|(mesh, ctrl)| mesh.len() * ctrl.len())
        .sum();
    edges as f64 / (n * m) as f64
}

/// Fraction of vertex-controller pairs kept whose controller belongs to more
/// than one cluster.
pub fn inter_density(clustering: &Clustering, n: usize, m: usize) -> f64 {
    let mult = clustering.controller_multiplicity(m);
    let shared: usize = clustering
        .mesh_clusters
        .iter()
        .zip(&clustering.ctrl_clusters)
        .map(|(mesh, ctrl)| mesh.len() * ctrl.iter().filter(|&&j| mult[j] > 1).count())
        .sum();
    shared as f64 / (n * m) as f64
}

/// Ratio of offset mass discarded by the clustering to the mass it keeps.
pub fn reconstruction_error(offsets: &Array2<f64>, clustering: &Clustering) -> Result<f64> {
    let m = offsets.ncols();
    let mut kept = 0.0;
    let mut rejected = 0.0;
    let mut member = vec![false; m];
    for (mesh, ctrl) in clustering.mesh_clusters.iter().zip(&clustering.ctrl_clusters) {
        member.iter_mut().for_each(|b| *b = false);
        for &j in ctrl {
            member[j] = true;
        }
        // fixed summation order keeps the sums monotone under set inclusion
        for &l in mesh {
            for (j, &keep) in member.iter().enumerate() {
                if keep {
                    kept += offsets[[l, j]];
                } else {
                    rejected += offsets[[l, j]];
                }
            }
        }
    }
    if kept == 0.0 {
        return Err(Error::DegenerateClustering);
    }
    Ok(rejected / kept)
}

pub fn score(offsets: &Array2<f64>, clustering: &Clustering) -> Result<ClusterScores> {
    let (n, m) = offsets.dim();
    clustering.validate(n, m)?;
    Ok(ClusterScores {
        density: density(clustering, n, m),
        inter_density: inter_density(clustering, n, m),
        reconstruction_error: reconstruction_error(offsets, clustering)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn full_clustering_scores() {
        let d = array![[1.0, 2.0], [0.5, 0.0]];
        let s = score(&d, &Clustering::full(2, 2)).unwrap();
        assert_eq!(s.density, 1.0);
        assert_eq!(s.inter_density, 0.0);
        assert_eq!(s.reconstruction_error, 0.0);
    }

    #[test]
    fn diagonal_clustering_hand_values() {
        let d = array![[1.0, 1.0], [1.0, 1.0]];
        let c = Clustering::new(vec![vec![0], vec![1]], vec![vec![0], vec![1]]);
        assert_eq!(density(&c, 2, 2), 0.5);
        assert_eq!(inter_density(&c, 2, 2), 0.0);
        assert_eq!(reconstruction_error(&d, &c).unwrap(), 1.0);
    }

    #[test]
    fn inter_density_hand_case() {
        // edges (v0,c0), (v0,c1), (v1,c1); c1 is shared
        let c = Clustering::new(vec![vec![0], vec![1]], vec![vec![0, 1], vec![1]]);
        assert_eq!(inter_density(&c, 2, 2), 0.5);
        assert_eq!(density(&c, 2, 2), 0.75);
    }

    #[test]
    fn every_controller_shared_makes_inter_density_equal_density() {
        let c = Clustering::new(vec![vec![0, 1], vec![2]], vec![vec![0, 1], vec![0, 1]]);
        assert_eq!(inter_density(&c, 3, 2), density(&c, 3, 2));
    }

    #[test]
    fn empty_assignment_is_degenerate() {
        let d = array![[1.0, 1.0]];
        let c = Clustering::new(vec![vec![0]], vec![vec![]]);
        assert!(matches!(
            reconstruction_error(&d, &c),
            Err(Error::DegenerateClustering)
        ));
    }
}
