//! Per-frame inverse rig solvers.
//!
//! * [`solve_cd`]: holistic coordinate descent over every controller.
//! * [`solve_naive`]: each cluster solved alone, shared weights averaged.
//! * [`admm_solve`]: clusters coupled through consensus ADMM on the shared
//!   weights, with the sparsity term carried by the global variable.
//!
//! All three minimize `1/2 ||f(w) - b||^2 + alpha 1^T w` over `[0, 1]^m`
//! (restricted to cluster submodels where applicable).

mod admm;
mod cd;
mod clustered;
mod config;
mod sequence;

use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use admm::{admm_solve, admm_solve_from, ConsensusState};
pub use cd::{coordinate_update, solve_cd, solve_cd_observed, Prox};
pub use clustered::{
    multiplicity_matrix, solve_naive, solve_naive_clustered, ClusteredModel, IndexMap,
    MultiplicityMatrix,
};
pub use config::SolverConfig;
pub use sequence::{solve_sequence, FrameSolver};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub w: Vec<f64>,
    /// Objective after every sweep (holistic) or outer iteration (ADMM); the
    /// naive solver reports the summed cluster objectives once.
    pub objective_trace: Vec<f64>,
    /// ADMM only: `max(primal, dual)` residual per outer iteration.
    pub residual_trace: Vec<f64>,
    pub wall_time: Duration,
    pub iterations: usize,
    pub converged: bool,
}

impl SolveResult {
    pub fn time_ms(&self) -> f64 {
        self.wall_time.as_secs_f64() * 1e3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Holistic,
    Naive,
    Admm,
}

impl SolveMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveMethod::Holistic => "holistic",
            SolveMethod::Naive => "naive",
            SolveMethod::Admm => "admm",
        }
    }

    pub fn needs_clustering(self) -> bool {
        !matches!(self, SolveMethod::Holistic)
    }
}

impl std::fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolveMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "holistic" | "cd" => Ok(SolveMethod::Holistic),
            "naive" | "clustered" => Ok(SolveMethod::Naive),
            "admm" => Ok(SolveMethod::Admm),
            other => Err(Error::InvalidArgument(format!("unknown solve method `{other}`"))),
        }
    }
}
