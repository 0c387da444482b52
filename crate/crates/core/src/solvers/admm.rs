//! General-form consensus ADMM over cluster submodels.
//!
//! Each cluster `k` keeps a local copy `x^(k)` of its controllers and a
//! scaled dual `u^(k)`; the global `z` carries the sparsity penalty and the
//! box. One outer iteration is
//!
//! ```text
//! x^(k) <- argmin_{0<=x<=1} 1/2 ||f^(k)(x) - b^(k)||^2 + rho/2 ||x - z~^(k) + u^(k)||^2
//! z_j   <- clamp((sum_{(k,i) -> j} (x^(k)_i + u^(k)_i) - alpha/rho) / S_jj, 0, 1)
//! u^(k) <- u^(k) + x^(k) - z~^(k)
//! ```
//!
//! where `z~^(k)` gathers `z` at the cluster's controllers. The x-updates are
//! independent and may run in parallel; `z` is reduced in cluster order.

use std::time::Instant;

use rayon::prelude::*;

use super::cd::{Descent, SweepOrder};
use super::clustered::ClusteredModel;
use super::{SolveResult, SolverConfig};
use crate::error::{check_len, Error, Result};

/// Iterates of one ADMM solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusState {
    pub z: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub iteration: usize,
    /// `max(primal, dual)` after every outer iteration.
    pub residual_history: Vec<f64>,
}

impl ConsensusState {
    fn new(clustered: &ClusteredModel, init: Option<&[f64]>) -> Self {
        let z = match init {
            Some(w) => w.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            None => vec![0.0; clustered.m()],
        };
        let map = clustered.index_map();
        let x = (0..map.len()).map(|k| map.gather(k, &z)).collect();
        let u = (0..map.len())
            .map(|k| vec![0.0; map.cluster(k).len()])
            .collect();
        Self {
            z,
            x,
            u,
            iteration: 0,
            residual_history: Vec::new(),
        }
    }

    /// Largest `|x^(k)_i - z_G(k,i)|` over all clusters.
    pub fn consensus_gap(&self, clustered: &ClusteredModel) -> f64 {
        let map = clustered.index_map();
        self.x
            .iter()
            .enumerate()
            .flat_map(|(k, x)| x.iter().enumerate().map(move |(i, &v)| (k, i, v)))
            .map(|(k, i, v)| (v - self.z[map.global(k, i)]).abs())
            .fold(0.0, f64::max)
    }
}

pub fn admm_solve(
    clustered: &ClusteredModel,
    target: &[f64],
    config: &SolverConfig,
) -> Result<SolveResult> {
    admm_solve_from(clustered, target, config, None).map(|(r, _)| r)
}

/// ADMM from an optional starting `z` (local copies start at `z`, duals at
/// 0). Returns the final iterates alongside the result.
pub fn admm_solve_from(
    clustered: &ClusteredModel,
    target: &[f64],
    config: &SolverConfig,
    init: Option<&[f64]>,
) -> Result<(SolveResult, ConsensusState)> {
    config.validate()?;
    if let Some(w0) = init {
        check_len("initial weights", clustered.m(), w0.len())?;
    }
    let start = Instant::now();
    let targets = clustered.split_target(target)?;
    let submodels = clustered.submodels();
    let map = clustered.index_map();
    let diag = &clustered.multiplicity().diag;
    let rho = config.rho;
    let inner_sweeps = if config.inexact { 1 } else { config.cd_iters };

    let mut state = ConsensusState::new(clustered, init);
    let mut residuals: Vec<Vec<f64>> = submodels
        .iter()
        .zip(&targets)
        .zip(&state.x)
        .map(|((s, t), x)| {
            Descent {
                model: &s.model,
                target: t,
                alpha: 0.0,
                prox: None,
            }
            .residual(x)
        })
        .collect();
    let mut orders: Vec<SweepOrder> = submodels
        .iter()
        .enumerate()
        .map(|(k, s)| {
            SweepOrder::new(
                s.model.m(),
                config.shuffle_order,
                config.order_seed.wrapping_add(k as u64),
            )
        })
        .collect();

    let mut trace = Vec::with_capacity(config.admm_iters);
    let mut converged = false;

    while state.iteration < config.admm_iters {
        state.iteration += 1;

        // x-update
        let x_step = |k: usize,
                      x: &mut Vec<f64>,
                      u: &Vec<f64>,
                      r: &mut Vec<f64>,
                      order: &mut SweepOrder|
         -> f64 {
            let anchor: Vec<f64> = map
                .cluster(k)
                .iter()
                .zip(u)
                .map(|(&j, ui)| state.z[j] - ui)
                .collect();
            let problem = Descent {
                model: &submodels[k].model,
                target: &targets[k],
                alpha: 0.0,
                prox: Some((rho, &anchor)),
            };
            problem.run(x, r, inner_sweeps, config.cd_tol, order, |_, _| {});
            0.5 * crate::model::dot(r, r)
        };
        let fit: f64 = {
            let state_x = &mut state.x;
            let state_u = &state.u;
            let jobs = state_x
                .iter_mut()
                .zip(state_u)
                .zip(residuals.iter_mut())
                .zip(orders.iter_mut())
                .enumerate();
            let per_cluster: Vec<f64> = if config.parallel_clusters {
                jobs.collect::<Vec<_>>()
                    .into_par_iter()
                    .map(|(k, (((x, u), r), o))| x_step(k, x, u, r, o))
                    .collect()
            } else {
                jobs.map(|(k, (((x, u), r), o))| x_step(k, x, u, r, o)).collect()
            };
            per_cluster.iter().sum()
        };

        // z-update, reduced in fixed cluster order
        let mut acc = vec![0.0; clustered.m()];
        for (k, (x, u)) in state.x.iter().zip(&state.u).enumerate() {
            for (i, &j) in map.cluster(k).iter().enumerate() {
                acc[j] += x[i] + u[i];
            }
        }
        let mut z_new = vec![0.0; clustered.m()];
        for j in 0..clustered.m() {
            if diag[j] > 0 {
                z_new[j] = ((acc[j] - config.alpha / rho) / diag[j] as f64).clamp(0.0, 1.0);
            }
        }

        // dual update
        let mut primal: f64 = 0.0;
        for (k, (x, u)) in state.x.iter().zip(state.u.iter_mut()).enumerate() {
            for (i, &j) in map.cluster(k).iter().enumerate() {
                let gap = x[i] - z_new[j];
                u[i] += gap;
                primal = primal.max(gap.abs());
            }
        }
        let dual = state
            .z
            .iter()
            .zip(&z_new)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        state.z = z_new;

        let res = primal.max(dual);
        state.residual_history.push(res);
        trace.push(fit + config.alpha * state.z.iter().sum::<f64>());
        if res < config.admm_tol {
            converged = true;
            break;
        }
    }

    if state.z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("admm"));
    }
    let result = SolveResult {
        w: state.z.clone(),
        objective_trace: trace,
        residual_trace: state.residual_history.clone(),
        wall_time: start.elapsed(),
        iterations: state.iteration,
        converged,
    };
    Ok((result, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Clustering;
    use crate::model::BlendshapeModel;
    use crate::solvers::{solve_cd, solve_naive};

    /// Two vertices, three controllers. Controller 1 moves both vertices;
    /// controllers 0 and 2 each move one vertex along the same axis as 1.
    fn shared_model() -> BlendshapeModel {
        BlendshapeModel::new(
            vec![0.0; 6],
            vec![
                vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.5],
                vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            ],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn neutral_target_gives_zero() {
        let model = shared_model();
        let c = Clustering::new(vec![vec![0], vec![1]], vec![vec![0, 1], vec![1, 2]]);
        let cm = ClusteredModel::new(&model, &c).unwrap();
        let cfg = SolverConfig::default().with_alpha(0.1);
        let r = admm_solve(&cm, &[0.0; 6], &cfg).unwrap();
        assert!(r.w.iter().all(|&v| v == 0.0));
        assert!(r.converged);
    }

    #[test]
    fn rejects_nonpositive_rho() {
        let model = shared_model();
        let cm = ClusteredModel::new(&model, &Clustering::full(2, 3)).unwrap();
        let cfg = SolverConfig { rho: 0.0, ..Default::default() };
        assert!(matches!(admm_solve(&cm, &[0.0; 6], &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn single_block_matches_holistic() {
        let model = shared_model();
        let target = [0.9, 0.0, 0.0, 0.6, 0.0, 0.2];
        let cfg = SolverConfig {
            admm_iters: 200,
            cd_iters: 500,
            cd_tol: 1e-12,
            admm_tol: 1e-10,
            ..Default::default()
        };
        let cm = ClusteredModel::new(&model, &Clustering::full(2, 3)).unwrap();
        let a = admm_solve(&cm, &target, &cfg).unwrap();
        let h = solve_cd(&model, &target, &cfg).unwrap();
        for (x, y) in a.w.iter().zip(&h.w) {
            assert!((x - y).abs() < 1e-3, "{:?} vs {:?}", a.w, h.w);
        }
    }

    #[test]
    fn consensus_on_shared_weight_beats_averaging() {
        let model = shared_model();
        // true weights (0.3, 0.6, 0.2)
        let truth = [0.3, 0.6, 0.2];
        let target = model.evaluate(&truth).unwrap();
        let c = Clustering::new(vec![vec![0], vec![1]], vec![vec![0, 1], vec![1, 2]]);
        let cm = ClusteredModel::new(&model, &c).unwrap();
        let cfg = SolverConfig {
            admm_iters: 500,
            cd_iters: 200,
            cd_tol: 1e-12,
            admm_tol: 1e-6,
            ..Default::default()
        };
        let (res, state) = admm_solve_from(&cm, &target, &cfg, None).unwrap();
        assert!(res.converged);
        assert!(state.consensus_gap(&cm) <= cfg.admm_tol);
        let naive = solve_naive(&cm, &target, &cfg, None).unwrap();
        let fit = |w: &[f64]| {
            let f = model.evaluate(w).unwrap();
            f.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        };
        assert!(fit(&res.w) < fit(&naive.w));
    }

    #[test]
    fn parallel_and_sequential_are_bitwise_equal() {
        let model = shared_model();
        let target = [0.5, 0.1, 0.0, 0.7, 0.0, 0.3];
        let c = Clustering::new(vec![vec![0], vec![1]], vec![vec![0, 1], vec![1, 2]]);
        let cm = ClusteredModel::new(&model, &c).unwrap();
        let seq = SolverConfig::default().with_alpha(0.01);
        let par = SolverConfig { parallel_clusters: true, ..seq.clone() };
        let a = admm_solve(&cm, &target, &seq).unwrap();
        let b = admm_solve(&cm, &target, &par).unwrap();
        assert_eq!(a.w, b.w);
        assert_eq!(a.objective_trace, b.objective_trace);
    }
}
