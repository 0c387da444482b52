use super::admm::admm_solve_from;
use super::cd::solve_cd_observed;
use super::clustered::{solve_naive, ClusteredModel};
use super::{SolveMethod, SolveResult, SolverConfig};
use crate::clustering::Clustering;
use crate::error::{check_len, Error, Result};
use crate::model::BlendshapeModel;

/// A solver bound to one model (and clustering), reused across frames so
/// submodels are built once.
#[derive(Debug, Clone)]
pub struct FrameSolver<'a> {
    model: &'a BlendshapeModel,
    method: SolveMethod,
    clustered: Option<ClusteredModel>,
}

impl<'a> FrameSolver<'a> {
    /// The holistic method ignores `clustering`; the others require it.
    pub fn new(
        model: &'a BlendshapeModel,
        clustering: Option<&Clustering>,
        method: SolveMethod,
    ) -> Result<Self> {
        let clustered = match (method, clustering) {
            (SolveMethod::Holistic, _) => None,
            (_, Some(c)) => Some(ClusteredModel::new(model, c)?),
            (_, None) => {
                return Err(Error::InvalidArgument(format!(
                    "the {method} solver needs a clustering"
                )))
            }
        };
        Ok(Self {
            model,
            method,
            clustered,
        })
    }

    pub fn method(&self) -> SolveMethod {
        self.method
    }

    pub fn model(&self) -> &BlendshapeModel {
        self.model
    }

    pub fn clustered(&self) -> Option<&ClusteredModel> {
        self.clustered.as_ref()
    }

    pub fn solve(
        &self,
        target: &[f64],
        config: &SolverConfig,
        init: Option<&[f64]>,
    ) -> Result<SolveResult> {
        match (self.method, &self.clustered) {
            (SolveMethod::Holistic, _) => {
                solve_cd_observed(self.model, target, config, init, |_, _| {})
            }
            (SolveMethod::Naive, Some(c)) => solve_naive(c, target, config, init),
            (SolveMethod::Admm, Some(c)) => admm_solve_from(c, target, config, init).map(|r| r.0),
            _ => unreachable!("clustered methods are built with a clustering"),
        }
    }
}

/// Solves every frame in order. Frames are independent unless
/// `config.warm_start` is set, in which case each starts from its
/// predecessor's solution.
pub fn solve_sequence(
    model: &BlendshapeModel,
    clustering: Option<&Clustering>,
    targets: &[Vec<f64>],
    method: SolveMethod,
    config: &SolverConfig,
) -> Result<Vec<SolveResult>> {
    config.validate()?;
    let solver = FrameSolver::new(model, clustering, method)?;
    let mut out: Vec<SolveResult> = Vec::with_capacity(targets.len());
    for (t, target) in targets.iter().enumerate() {
        let wrap = |e: Error| Error::Frame {
            index: t,
            source: Box::new(e),
        };
        check_len("target", model.rows(), target.len()).map_err(wrap)?;
        let init = if config.warm_start {
            out.last().map(|r| r.w.as_slice())
        } else {
            None
        };
        let res = solver.solve(target, config, init).map_err(wrap)?;
        out.push(res);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> BlendshapeModel {
        BlendshapeModel::new(
            vec![0.0; 6],
            vec![
                vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0],
            ],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn empty_sequence() {
        let m = model();
        let r = solve_sequence(&m, None, &[], SolveMethod::Holistic, &SolverConfig::default());
        assert!(r.unwrap().is_empty());
    }

    #[test]
    fn identical_frames_identical_results() {
        let m = model();
        let t = m.evaluate(&[0.4, 0.7]).unwrap();
        let c = Clustering::new(vec![vec![0], vec![1]], vec![vec![0, 1], vec![1]]);
        for method in [SolveMethod::Holistic, SolveMethod::Naive, SolveMethod::Admm] {
            let r = solve_sequence(
                &m,
                Some(&c),
                &[t.clone(), t.clone()],
                method,
                &SolverConfig::default(),
            )
            .unwrap();
            assert_eq!(r[0].w, r[1].w, "{method}");
        }
    }

    #[test]
    fn clustered_methods_require_a_clustering() {
        let m = model();
        assert!(FrameSolver::new(&m, None, SolveMethod::Admm).is_err());
        assert!(FrameSolver::new(&m, None, SolveMethod::Naive).is_err());
        assert!(FrameSolver::new(&m, None, SolveMethod::Holistic).is_ok());
    }

    #[test]
    fn frame_errors_carry_the_index() {
        let m = model();
        let err = solve_sequence(
            &m,
            None,
            &[vec![0.0; 6], vec![0.0; 3]],
            SolveMethod::Holistic,
            &SolverConfig::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("frame 1"), "{err}");
    }

    #[test]
    fn warm_start_uses_previous_frame() {
        let m = model();
        let t = m.evaluate(&[0.4, 0.7]).unwrap();
        let cfg = SolverConfig {
            warm_start: true,
            ..Default::default()
        };
        let r = solve_sequence(&m, None, &[t.clone(), t], SolveMethod::Holistic, &cfg).unwrap();
        assert!(r[1].iterations <= r[0].iterations);
        assert!((r[1].w[0] - 0.4).abs() < 1e-6);
    }
}
