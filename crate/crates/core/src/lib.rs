//! Inversion of blendshape facial rigs with corrective terms, solved either
//! holistically by coordinate descent or per mesh cluster, with the
//! clusters reconciled by averaging or by consensus ADMM.
//!
//! The pipeline is: build or load a [`BlendshapeModel`], partition it with
//! [`clustering::cluster`], then solve frames with a [`solvers::FrameSolver`]
//! and score them with [`evaluation`].

pub mod clustering;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod model;
pub mod solvers;
pub mod synth;

pub use clustering::{Clustering, ClusterScores, Method};
pub use error::{Error, Result};
pub use model::{BlendshapeModel, CorrectiveTerm, SubModel};
pub use solvers::{SolveMethod, SolveResult, SolverConfig};
