//! Mesh/controller co-clustering of a blendshape model.
//!
//! A clustering splits the vertices into disjoint mesh clusters and attaches
//! to each one a set of relevant controllers. Controller sets may overlap.
//! Read as a bipartite graph between vertices and controllers, the edges are
//! every `(vertex, controller)` pair that shares a cluster.

mod assign;
mod kmeans;
mod scores;
mod sweep;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BlendshapeModel;

pub use assign::{
    adjust_assignment_rsjd_a, assign_controllers_rsjd, assign_controllers_ssk, segment_mesh_rs,
    segment_mesh_rsjd, sparse_clustering, two_means_high_group,
};
pub use kmeans::{kmeans, kmeans_with_limit, KMeansResult, KMEANS_MAX_ITER};
pub use scores::{density, inter_density, reconstruction_error, score, ClusterScores};
pub use sweep::{knee_suggestion, read_sweep_csv, sweep_k, write_sweep_csv, SweepRecord};

/// Strategy used to produce a clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// k-means over rows of the offset matrix, h-vector controller assignment.
    Rsjd,
    /// `Rsjd` followed by the per-cluster magnitude threshold adjustment.
    RsjdA,
    /// k-means over rows of the rearranged basis, h-vector controller assignment.
    Rs,
    /// One cluster per controller, each vertex owned by its largest offset.
    Sparse,
    /// Given mesh segments, majority-share controller assignment.
    Ssk,
    /// One cluster holding everything.
    Full,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Rsjd => "rsjd",
            Method::RsjdA => "rsjd_a",
            Method::Rs => "rs",
            Method::Sparse => "sparse",
            Method::Ssk => "ssk",
            Method::Full => "full",
        }
    }

    /// Whether the cluster count is chosen by the caller.
    pub fn takes_k(self) -> bool {
        matches!(self, Method::Rsjd | Method::RsjdA | Method::Rs)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "rsjd" => Method::Rsjd,
            "rsjd_a" | "rsjda" | "rsjd-a" => Method::RsjdA,
            "rs" => Method::Rs,
            "sparse" => Method::Sparse,
            "ssk" | "sskln" => Method::Ssk,
            "full" | "holistic" => Method::Full,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown clustering method `{other}`"
                )))
            }
        })
    }
}

/// Mesh clusters plus the controllers assigned to each of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    #[serde(rename = "K")]
    pub k: usize,
    pub mesh_clusters: Vec<Vec<usize>>,
    pub ctrl_clusters: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Clustering {
    pub fn new(mesh_clusters: Vec<Vec<usize>>, ctrl_clusters: Vec<Vec<usize>>) -> Self {
        Self {
            k: mesh_clusters.len(),
            mesh_clusters,
            ctrl_clusters,
            method: None,
            seed: None,
        }
    }

    /// The trivial clustering: one cluster with every vertex and controller.
    pub fn full(n: usize, m: usize) -> Self {
        let mut c = Self::new(vec![(0..n).collect()], vec![(0..m).collect()]);
        c.method = Some(Method::Full);
        c
    }

    pub fn with_provenance(mut self, method: Method, seed: Option<u64>) -> Self {
        self.method = Some(method);
        self.seed = seed;
        self
    }

    /// Checks the partition and index invariants against model dimensions.
    /// Empty mesh clusters are only accepted for the sparse method.
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidClustering(msg));
        if self.mesh_clusters.len() != self.k || self.ctrl_clusters.len() != self.k {
            return bad(format!(
                "K = {} but {} mesh and {} controller clusters",
                self.k,
                self.mesh_clusters.len(),
                self.ctrl_clusters.len()
            ));
        }
        if self.k == 0 {
            return bad("no clusters".into());
        }
        let mut owner = vec![usize::MAX; n];
        for (k, cluster) in self.mesh_clusters.iter().enumerate() {
            if cluster.is_empty() && self.method != Some(Method::Sparse) {
                return bad(format!("mesh cluster {k} is empty"));
            }
            if cluster.windows(2).any(|p| p[0] >= p[1]) {
                return bad(format!("mesh cluster {k} is not sorted and unique"));
            }
            for &l in cluster {
                if l >= n {
                    return bad(format!("vertex {l} out of range (n = {n})"));
                }
                if owner[l] != usize::MAX {
                    return bad(format!("vertex {l} in clusters {} and {k}", owner[l]));
                }
                owner[l] = k;
            }
        }
        if let Some(l) = owner.iter().position(|&o| o == usize::MAX) {
            return bad(format!("vertex {l} belongs to no mesh cluster"));
        }
        for (k, ctrl) in self.ctrl_clusters.iter().enumerate() {
            if ctrl.windows(2).any(|p| p[0] >= p[1]) {
                return bad(format!("controller cluster {k} is not sorted and unique"));
            }
            if let Some(&j) = ctrl.iter().find(|&&j| j >= m) {
                return bad(format!("controller {j} out of range (m = {m})"));
            }
        }
        Ok(())
    }

    /// Number of clusters each controller belongs to.
    pub fn controller_multiplicity(&self, m: usize) -> Vec<usize> {
        let mut counts = vec![0; m];
        for ctrl in &self.ctrl_clusters {
            for &j in ctrl {
                counts[j] += 1;
            }
        }
        counts
    }
}

/// Groups per-row labels into sorted index lists, one per label in `0..k`.
pub(crate) fn labels_to_clusters(labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut clusters = vec![Vec::new(); k];
    for (row, &label) in labels.iter().enumerate() {
        clusters[label].push(row);
    }
    clusters
}

/// Inputs shared by every clustering strategy, derived once per model.
#[derive(Debug, Clone)]
pub struct ClusteringInputs {
    pub offsets: Array2<f64>,
    pub delta: Array2<f64>,
}

impl ClusteringInputs {
    pub fn from_model(model: &BlendshapeModel) -> Self {
        Self {
            offsets: model.offset_matrix(),
            delta: model.delta_matrix(),
        }
    }
}

/// Runs one clustering strategy end to end.
///
/// `k` is ignored by the sparse and ssk methods; ssk requires `segments`.
pub fn cluster(
    inputs: &ClusteringInputs,
    method: Method,
    k: usize,
    seed: u64,
    segments: Option<&[Vec<usize>]>,
) -> Result<Clustering> {
    let d = &inputs.offsets;
    let (n, m) = d.dim();
    let clustering = match method {
        Method::Rsjd | Method::RsjdA => {
            let mesh = segment_mesh_rsjd(d, k, seed)?;
            let ctrl = assign_controllers_rsjd(d, &mesh)?;
            let base = Clustering::new(mesh, ctrl);
            if method == Method::RsjdA {
                adjust_assignment_rsjd_a(d, &base)?
            } else {
                base
            }
        }
        Method::Rs => {
            let mesh = segment_mesh_rs(&inputs.delta, k, seed)?;
            let ctrl = assign_controllers_rsjd(d, &mesh)?;
            Clustering::new(mesh, ctrl)
        }
        Method::Sparse => sparse_clustering(d),
        Method::Ssk => {
            let segments = segments.ok_or_else(|| {
                Error::InvalidArgument("the ssk method needs manual mesh segments".into())
            })?;
            let ctrl = assign_controllers_ssk(d, segments)?;
            Clustering::new(segments.to_vec(), ctrl)
        }
        Method::Full => Clustering::full(n, m),
    };
    let seed = method.takes_k().then_some(seed);
    let clustering = clustering.with_provenance(method, seed);
    clustering.validate(n, m)?;
    Ok(clustering)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_catches_broken_partitions() {
        let ok = Clustering::new(vec![vec![0], vec![1]], vec![vec![0], vec![0, 1]]);
        ok.validate(2, 2).unwrap();

        let missing = Clustering::new(vec![vec![0]], vec![vec![0]]);
        assert!(missing.validate(2, 1).is_err());

        let overlap = Clustering::new(vec![vec![0, 1], vec![1]], vec![vec![0], vec![0]]);
        assert!(overlap.validate(2, 1).is_err());

        let empty = Clustering::new(vec![vec![0, 1], vec![]], vec![vec![0], vec![0]]);
        assert!(empty.validate(2, 1).is_err());
        let sparse_empty = empty.clone().with_provenance(Method::Sparse, None);
        sparse_empty.validate(2, 1).unwrap();

        let ctrl_range = Clustering::new(vec![vec![0, 1]], vec![vec![3]]);
        assert!(ctrl_range.validate(2, 2).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [
            Method::Rsjd,
            Method::RsjdA,
            Method::Rs,
            Method::Sparse,
            Method::Ssk,
            Method::Full,
        ] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.as_str()));
        }
        assert!("spectral".parse::<Method>().is_err());
    }

    #[test]
    fn clustering_file_uses_capital_k() {
        let c = Clustering::full(2, 3).with_provenance(Method::Rsjd, Some(7));
        let v: serde_json::Value = serde_json::to_value(&c).unwrap();
        assert_eq!(v["K"], 1);
        assert_eq!(v["method"], "rsjd");
        assert_eq!(v["seed"], 7);
        let back: Clustering = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn multiplicity_counts() {
        let c = Clustering::new(vec![vec![0], vec![1]], vec![vec![0, 1], vec![1, 2]]);
        assert_eq!(c.controller_multiplicity(3), vec![1, 2, 1]);
    }
}
