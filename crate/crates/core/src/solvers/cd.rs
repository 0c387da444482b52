//! Box-constrained coordinate descent on the rig-fitting objective
//!
//! ```text
//! 1/2 ||f(w) - b||^2 + alpha 1^T w [+ rho/2 ||w - a||^2],   0 <= w <= 1
//! ```
//!
//! The rig is affine in every single weight, so each coordinate step is the
//! exact minimizer of a one-dimensional quadratic clamped to `[0, 1]`.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{SolveResult, SolverConfig};
use crate::error::{check_len, Error, Result};
use crate::model::{axpy, dot, BlendshapeModel};

/// Proximal pull `rho/2 (t - anchor)^2` on one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prox {
    pub rho: f64,
    pub anchor: f64,
}

/// Optimal value of coordinate `i` with all other weights held fixed.
///
/// Evaluates `c = f(w with w_i = 0)` and the controller gradient `g`
/// directly and returns
/// `clamp((g^T (b - c) - alpha + rho a) / (g^T g + rho), 0, 1)`, or 0 when the
/// denominator vanishes.
pub fn coordinate_update(
    model: &BlendshapeModel,
    target: &[f64],
    w: &[f64],
    i: usize,
    alpha: f64,
    prox: Option<Prox>,
) -> Result<f64> {
    check_len("target", model.rows(), target.len())?;
    let g = model.controller_gradient(w, i)?;
    let mut without = w.to_vec();
    without[i] = 0.0;
    let c = model.evaluate(&without)?;
    let Prox { rho, anchor } = prox.unwrap_or(Prox { rho: 0.0, anchor: 0.0 });
    let num: f64 = g
        .iter()
        .zip(target.iter().zip(&c))
        .map(|(gi, (bi, ci))| gi * (bi - ci))
        .sum::<f64>()
        - alpha
        + rho * anchor;
    let den = dot(&g, &g) + rho;
    Ok(if den == 0.0 { 0.0 } else { (num / den).clamp(0.0, 1.0) })
}

/// Order in which a sweep visits coordinates.
pub(crate) struct SweepOrder {
    order: Vec<usize>,
    rng: Option<ChaCha8Rng>,
}

impl SweepOrder {
    pub fn new(len: usize, shuffle: bool, seed: u64) -> Self {
        Self {
            order: (0..len).collect(),
            rng: shuffle.then(|| ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    fn next(&mut self) -> &[usize] {
        if let Some(rng) = &mut self.rng {
            self.order.shuffle(rng);
        }
        &self.order
    }
}

/// One fitting problem: a (sub)model, its target, and the penalties.
pub(crate) struct Descent<'a> {
    pub model: &'a BlendshapeModel,
    pub target: &'a [f64],
    pub alpha: f64,
    /// `(rho, anchors)` with one anchor per coordinate.
    pub prox: Option<(f64, &'a [f64])>,
}

pub(crate) struct DescentOutcome {
    pub sweeps: usize,
    pub converged: bool,
    /// Objective after every sweep.
    pub trace: Vec<f64>,
}

impl Descent<'_> {
    /// `f(w) - target`.
    pub fn residual(&self, w: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = self
            .model
            .neutral()
            .iter()
            .zip(self.target)
            .map(|(b0, b)| b0 - b)
            .collect();
        self.model.accumulate(w, &mut r);
        r
    }

    pub fn objective(&self, w: &[f64], residual: &[f64]) -> f64 {
        let mut obj = 0.5 * dot(residual, residual) + self.alpha * w.iter().sum::<f64>();
        if let Some((rho, anchor)) = self.prox {
            obj += 0.5
                * rho
                * w.iter()
                    .zip(anchor)
                    .map(|(x, a)| (x - a) * (x - a))
                    .sum::<f64>();
        }
        obj
    }

    /// Exact minimization over coordinate `i`; keeps `residual` equal to
    /// `f(w) - target`. Returns the absolute change of `w_i`.
    #[inline]
    fn update(&self, w: &mut [f64], residual: &mut [f64], scratch: &mut [f64], i: usize) -> f64 {
        let model = self.model;
        let col = model.blendshape(i);
        let mut use_scratch = false;
        let (gg, gr) = if model.has_active_correctives(w, i) {
            scratch.copy_from_slice(col);
            model.add_corrective_gradient(w, i, scratch);
            use_scratch = true;
            (dot(scratch, scratch), dot(scratch, residual))
        } else {
            (model.column_norm_sq(i), dot(col, residual))
        };
        let (rho, anchor) = match self.prox {
            Some((rho, a)) => (rho, a[i]),
            None => (0.0, 0.0),
        };
        let den = gg + rho;
        // g^T (b - c) = w_i g^T g - g^T r  since  r = c + w_i g - b
        let t = if den == 0.0 {
            0.0
        } else {
            ((w[i] * gg - gr - self.alpha + rho * anchor) / den).clamp(0.0, 1.0)
        };
        let delta = t - w[i];
        if delta != 0.0 {
            let g = if use_scratch { &*scratch } else { col };
            axpy(delta, g, residual);
            w[i] = t;
        }
        delta.abs()
    }

    /// Cyclic sweeps until the largest change in a sweep drops below `tol`.
    /// `observe` sees the coordinate and the iterate after every update.
    pub fn run<F: FnMut(usize, &[f64])>(
        &self,
        w: &mut [f64],
        residual: &mut [f64],
        max_sweeps: usize,
        tol: f64,
        order: &mut SweepOrder,
        mut observe: F,
    ) -> DescentOutcome {
        let mut scratch = vec![0.0; self.model.rows()];
        let mut trace = Vec::with_capacity(max_sweeps);
        let mut converged = false;
        let mut sweeps = 0;
        while sweeps < max_sweeps {
            sweeps += 1;
            let mut max_change: f64 = 0.0;
            for &i in order.next() {
                max_change = max_change.max(self.update(w, residual, &mut scratch, i));
                observe(i, w);
            }
            trace.push(self.objective(w, residual));
            if max_change < tol {
                converged = true;
                break;
            }
        }
        DescentOutcome {
            sweeps,
            converged,
            trace,
        }
    }
}

/// Holistic solve of the full rig by coordinate descent from `w = 0`.
pub fn solve_cd(model: &BlendshapeModel, target: &[f64], config: &SolverConfig) -> Result<SolveResult> {
    solve_cd_observed(model, target, config, None, |_, _| {})
}

/// [`solve_cd`] from an explicit starting point (clamped into the box) and
/// with a callback after every coordinate update.
pub fn solve_cd_observed<F: FnMut(usize, &[f64])>(
    model: &BlendshapeModel,
    target: &[f64],
    config: &SolverConfig,
    init: Option<&[f64]>,
    observe: F,
) -> Result<SolveResult> {
    config.validate()?;
    check_len("target", model.rows(), target.len())?;
    let start = Instant::now();
    let mut w = match init {
        Some(w0) => {
            check_len("initial weights", model.m(), w0.len())?;
            w0.iter().map(|v| v.clamp(0.0, 1.0)).collect()
        }
        None => vec![0.0; model.m()],
    };
    let problem = Descent {
        model,
        target,
        alpha: config.alpha,
        prox: None,
    };
    let mut residual = problem.residual(&w);
    let mut order = SweepOrder::new(model.m(), config.shuffle_order, config.order_seed);
    let outcome = problem.run(
        &mut w,
        &mut residual,
        config.cd_iters,
        config.cd_tol,
        &mut order,
        observe,
    );
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("coordinate descent"));
    }
    Ok(SolveResult {
        w,
        objective_trace: outcome.trace,
        residual_trace: Vec::new(),
        wall_time: start.elapsed(),
        iterations: outcome.sweeps,
        converged: outcome.converged,
    })
}
