#![allow(dead_code)]

use facerig_core::{BlendshapeModel, CorrectiveTerm};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense random rig with `correctives` terms of 2 to 4 controllers each.
pub fn random_model(rng: &mut ChaCha8Rng, n: usize, m: usize, correctives: usize) -> BlendshapeModel {
    let rows = 3 * n;
    let mut vec = |scale: f64| -> Vec<f64> { (0..rows).map(|_| rng.random_range(-scale..scale)).collect() };
    let neutral = vec(1.0);
    let blendshapes: Vec<Vec<f64>> = (0..m).map(|_| vec(1.0)).collect();
    let mut terms = Vec::new();
    if m >= 2 {
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..correctives {
            let size = rng.random_range(2..=m.min(4));
            let mut ids = sample(rng, m, size).into_vec();
            ids.sort_unstable();
            if !seen.insert(ids.clone()) {
                continue;
            }
            let offset = (0..rows).map(|_| rng.random_range(-0.5..0.5)).collect();
            terms.push(CorrectiveTerm::new(ids, offset));
        }
    }
    BlendshapeModel::new(neutral, blendshapes, terms).unwrap()
}

pub fn random_weights(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(0.0..1.0)).collect()
}

/// Literal rig function: neutral, plus linear terms, plus every corrective
/// scaled by the product of its weights.
pub fn evaluate_naive(model: &BlendshapeModel, w: &[f64]) -> Vec<f64> {
    let mut out = model.neutral().to_vec();
    for (i, wi) in w.iter().enumerate() {
        for (o, b) in out.iter_mut().zip(model.blendshape(i)) {
            *o += wi * b;
        }
    }
    for t in model.correctives() {
        let p: f64 = t.ids.iter().map(|&i| w[i]).product();
        for (o, b) in out.iter_mut().zip(&t.offset) {
            *o += p * b;
        }
    }
    out
}

/// `1/2 ||f(w) - b||^2 + alpha * sum(w)`, evaluated from scratch.
pub fn objective(model: &BlendshapeModel, target: &[f64], w: &[f64], alpha: f64) -> f64 {
    let f = evaluate_naive(model, w);
    0.5 * f.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() + alpha * w.iter().sum::<f64>()
}

/// Minimizer of the scalar coordinate objective over a uniform grid on [0, 1].
#[allow(clippy::too_many_arguments)]
pub fn grid_argmin(
    model: &BlendshapeModel,
    target: &[f64],
    w: &[f64],
    i: usize,
    alpha: f64,
    rho: f64,
    anchor: f64,
    step: f64,
) -> (f64, f64) {
    let steps = (1.0 / step).round() as usize;
    let mut best = (0.0, f64::INFINITY);
    let mut x = w.to_vec();
    for s in 0..=steps {
        let t = s as f64 * step;
        x[i] = t;
        let v = objective(model, target, &x, alpha) + 0.5 * rho * (t - anchor).powi(2);
        if v < best.1 {
            best = (t, v);
        }
    }
    best
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
