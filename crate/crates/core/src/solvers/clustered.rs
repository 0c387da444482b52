use std::time::Instant;

use super::cd::{Descent, SweepOrder};
use super::{SolveResult, SolverConfig};
use crate::clustering::Clustering;
use crate::error::{check_len, Error, Result};
use crate::model::{BlendshapeModel, SubModel};

/// Local-to-global controller indices, one ordered list per cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMap {
    clusters: Vec<Vec<usize>>,
}

impl IndexMap {
    pub fn new(clusters: Vec<Vec<usize>>) -> Self {
        Self { clusters }
    }

    /// Global index of local coordinate `i` in cluster `k`.
    pub fn global(&self, k: usize, i: usize) -> usize {
        self.clusters[k][i]
    }

    pub fn cluster(&self, k: usize) -> &[usize] {
        &self.clusters[k]
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Adds a local vector into a global one at the mapped positions.
    pub fn lift_add(&self, k: usize, local: &[f64], global: &mut [f64]) {
        for (&j, &v) in self.clusters[k].iter().zip(local) {
            global[j] += v;
        }
    }

    /// Local copy of a global vector for cluster `k`.
    pub fn gather(&self, k: usize, global: &[f64]) -> Vec<f64> {
        self.clusters[k].iter().map(|&j| global[j]).collect()
    }
}

/// Diagonal count of clusters per controller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiplicityMatrix {
    pub diag: Vec<usize>,
}

pub fn multiplicity_matrix(clustering: &Clustering, m: usize) -> MultiplicityMatrix {
    MultiplicityMatrix {
        diag: clustering.controller_multiplicity(m),
    }
}

/// A model split into cluster submodels, ready for per-frame solving.
///
/// Clusters that own no vertex or no controller are dropped; controllers
/// left in no cluster are fixed at 0.
#[derive(Debug, Clone)]
pub struct ClusteredModel {
    n: usize,
    m: usize,
    submodels: Vec<SubModel>,
    /// Position of each retained submodel in the source clustering.
    source: Vec<usize>,
    index: IndexMap,
    multiplicity: MultiplicityMatrix,
}

impl ClusteredModel {
    pub fn new(model: &BlendshapeModel, clustering: &Clustering) -> Result<Self> {
        clustering.validate(model.n(), model.m())?;
        let mut submodels = Vec::new();
        let mut source = Vec::new();
        for (k, (mesh, ctrl)) in clustering
            .mesh_clusters
            .iter()
            .zip(&clustering.ctrl_clusters)
            .enumerate()
        {
            if mesh.is_empty() || ctrl.is_empty() {
                continue;
            }
            submodels.push(model.restrict(mesh, ctrl)?);
            source.push(k);
        }
        if submodels.is_empty() {
            return Err(Error::InvalidClustering(
                "no cluster has both vertices and controllers".into(),
            ));
        }
        let index = IndexMap::new(submodels.iter().map(|s| s.controllers.clone()).collect());
        let mut diag = vec![0; model.m()];
        for s in &submodels {
            for &j in &s.controllers {
                diag[j] += 1;
            }
        }
        Ok(Self {
            n: model.n(),
            m: model.m(),
            submodels,
            source,
            index,
            multiplicity: MultiplicityMatrix { diag },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn submodels(&self) -> &[SubModel] {
        &self.submodels
    }

    pub fn index_map(&self) -> &IndexMap {
        &self.index
    }

    pub fn multiplicity(&self) -> &MultiplicityMatrix {
        &self.multiplicity
    }

    pub(crate) fn source_cluster(&self, k: usize) -> usize {
        self.source[k]
    }

    /// Per-cluster slices of a full target, in submodel order.
    pub fn split_target(&self, target: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_len("target", 3 * self.n, target.len())?;
        self.submodels.iter().map(|s| s.restrict_target(target)).collect()
    }

    /// `S^{-1} sum_k v^{(k)}`; unassigned controllers stay 0.
    pub fn average(&self, locals: &[Vec<f64>]) -> Vec<f64> {
        let mut w = vec![0.0; self.m];
        for (k, local) in locals.iter().enumerate() {
            self.index.lift_add(k, local, &mut w);
        }
        for (wj, &s) in w.iter_mut().zip(&self.multiplicity.diag) {
            if s > 0 {
                *wj /= s as f64;
            }
        }
        w
    }
}

/// Convenience wrapper building the [`ClusteredModel`] on the fly.
pub fn solve_naive_clustered(
    model: &BlendshapeModel,
    clustering: &Clustering,
    target: &[f64],
    config: &SolverConfig,
) -> Result<SolveResult> {
    let clustered = ClusteredModel::new(model, clustering)?;
    solve_naive(&clustered, target, config, None)
}

/// Solves every cluster independently by coordinate descent and averages
/// the estimates of shared controllers.
pub fn solve_naive(
    clustered: &ClusteredModel,
    target: &[f64],
    config: &SolverConfig,
    init: Option<&[f64]>,
) -> Result<SolveResult> {
    config.validate()?;
    if let Some(w0) = init {
        check_len("initial weights", clustered.m, w0.len())?;
    }
    let start = Instant::now();
    let targets = clustered.split_target(target)?;
    let mut locals = Vec::with_capacity(targets.len());
    let mut objective = 0.0;
    let mut sweeps = 0;
    let mut converged = true;
    for (k, (sub, t)) in clustered.submodels.iter().zip(&targets).enumerate() {
        let problem = Descent {
            model: &sub.model,
            target: t,
            alpha: config.alpha_for(clustered.source_cluster(k)),
            prox: None,
        };
        let mut w = match init {
            Some(w0) => clustered.index.gather(k, w0).iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            None => vec![0.0; sub.model.m()],
        };
        let mut r = problem.residual(&w);
        let mut order = SweepOrder::new(
            sub.model.m(),
            config.shuffle_order,
            config.order_seed.wrapping_add(k as u64),
        );
        let out = problem.run(&mut w, &mut r, config.cd_iters, config.cd_tol, &mut order, |_, _| {});
        objective += out.trace.last().copied().unwrap_or(0.0);
        sweeps = sweeps.max(out.sweeps);
        converged &= out.converged;
        locals.push(w);
    }
    let w = clustered.average(&locals);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("naive clustered solve"));
    }
    Ok(SolveResult {
        w,
        objective_trace: vec![objective],
        residual_trace: Vec::new(),
        wall_time: start.elapsed(),
        iterations: sweeps,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplicity_examples() {
        let c = Clustering::new(vec![vec![0], vec![1]], vec![vec![0, 1], vec![1, 2]]);
        let s = multiplicity_matrix(&c, 3);
        assert_eq!(s.diag, vec![1, 2, 1]);
        let total: usize = c.ctrl_clusters.iter().map(Vec::len).sum();
        assert_eq!(s.diag.iter().sum::<usize>(), total);

        let disjoint = Clustering::new(vec![vec![0], vec![1]], vec![vec![0], vec![2]]);
        assert_eq!(multiplicity_matrix(&disjoint, 4).diag, vec![1, 0, 1, 0]);
    }

    #[test]
    fn averaging_shared_estimates() {
        let model = BlendshapeModel::new(
            vec![0.0; 6],
            vec![vec![1.0; 6], vec![1.0; 6], vec![1.0; 6]],
            vec![],
        )
        .unwrap();
        let c = Clustering::new(vec![vec![0], vec![1]], vec![vec![0, 1], vec![1, 2]]);
        let cm = ClusteredModel::new(&model, &c).unwrap();
        let w = cm.average(&[vec![0.2, 0.4], vec![0.6, 0.9]]);
        assert_eq!(w[0], 0.2);
        assert!((w[1] - 0.5).abs() < 1e-15);
        assert_eq!(w[2], 0.9);
    }

    #[test]
    fn index_map_gather_after_lift_is_identity() {
        let map = IndexMap::new(vec![vec![3, 1], vec![0]]);
        let mut global = vec![0.0; 4];
        map.lift_add(0, &[0.25, 0.75], &mut global);
        assert_eq!(map.gather(0, &global), vec![0.25, 0.75]);
        assert_eq!(map.global(0, 0), 3);
    }

    #[test]
    fn empty_clusters_are_dropped() {
        let model = BlendshapeModel::new(vec![0.0; 6], vec![vec![1.0; 6]; 2], vec![]).unwrap();
        let c = Clustering::new(vec![vec![0, 1], vec![]], vec![vec![0], vec![1]])
            .with_provenance(crate::clustering::Method::Sparse, None);
        let cm = ClusteredModel::new(&model, &c).unwrap();
        assert_eq!(cm.submodels().len(), 1);
        assert_eq!(cm.multiplicity().diag, vec![1, 0]);
        let res = solve_naive(&cm, &[1.0; 6], &SolverConfig::default(), None).unwrap();
        assert_eq!(res.w[1], 0.0);
    }
}
