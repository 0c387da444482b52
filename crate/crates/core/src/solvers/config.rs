use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters shared by the holistic, naive clustered and ADMM solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Sparsity weight on `1^T w`.
    pub alpha: f64,
    /// Per-cluster override of `alpha` for the naive clustered solver.
    pub cluster_alpha: Option<Vec<f64>>,
    /// ADMM penalty.
    pub rho: f64,
    pub admm_iters: usize,
    /// Maximum coordinate sweeps per (sub)problem.
    pub cd_iters: usize,
    /// A sweep whose largest coordinate change is below this ends the descent.
    pub cd_tol: f64,
    pub admm_tol: f64,
    /// Weights at or below this magnitude count as zero.
    pub zero_threshold: f64,
    /// Visit coordinates in a freshly shuffled order each sweep.
    pub shuffle_order: bool,
    pub order_seed: u64,
    /// One coordinate sweep per ADMM x-update instead of running to `cd_tol`.
    pub inexact: bool,
    /// Run the per-cluster ADMM x-updates on the rayon pool.
    pub parallel_clusters: bool,
    /// Start each frame from the previous frame's solution.
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            cluster_alpha: None,
            rho: 1.0,
            admm_iters: 30,
            cd_iters: 50,
            cd_tol: 1e-6,
            admm_tol: 1e-4,
            zero_threshold: 1e-6,
            shuffle_order: false,
            order_seed: 0,
            inexact: false,
            parallel_clusters: false,
            warm_start: false,
        }
    }
}

impl SolverConfig {
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad("alpha must be finite and >= 0");
        }
        if let Some(a) = &self.cluster_alpha {
            if a.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return bad("cluster_alpha entries must be finite and >= 0");
            }
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return bad("rho must be finite and > 0");
        }
        if self.admm_iters == 0 || self.cd_iters == 0 {
            return bad("iteration limits must be at least 1");
        }
        if !(self.cd_tol > 0.0 && self.admm_tol > 0.0) {
            return bad("tolerances must be > 0");
        }
        if !(self.zero_threshold > 0.0 && self.zero_threshold <= 0.01) {
            return bad("zero_threshold must lie in (0, 0.01]");
        }
        Ok(())
    }

    /// Sparsity weight of cluster `k` (falls back to the global `alpha`).
    pub fn alpha_for(&self, k: usize) -> f64 {
        self.cluster_alpha
            .as_ref()
            .and_then(|a| a.get(k).copied())
            .unwrap_or(self.alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SolverConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let base = SolverConfig::default();
        for cfg in [
            SolverConfig { rho: 0.0, ..base.clone() },
            SolverConfig { rho: -1.0, ..base.clone() },
            SolverConfig { alpha: -0.1, ..base.clone() },
            SolverConfig { cd_iters: 0, ..base.clone() },
            SolverConfig { zero_threshold: 0.5, ..base.clone() },
            SolverConfig { zero_threshold: 0.0, ..base.clone() },
            SolverConfig { cluster_alpha: Some(vec![f64::NAN]), ..base.clone() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: SolverConfig = serde_json::from_str(r#"{"alpha": 0.5, "rho": 2.0}"#).unwrap();
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.rho, 2.0);
        assert_eq!(cfg.admm_iters, 30);
        assert!(serde_json::from_str::<SolverConfig>(r#"{"alhpa": 1}"#).is_err());
    }

    #[test]
    fn cluster_alpha_override() {
        let cfg = SolverConfig {
            alpha: 1.0,
            cluster_alpha: Some(vec![0.5]),
            ..Default::default()
        };
        assert_eq!(cfg.alpha_for(0), 0.5);
        assert_eq!(cfg.alpha_for(3), 1.0);
    }
}
