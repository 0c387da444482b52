//! Fit quality, sparsity and temporal smoothness of solved weight sequences.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::error::{check_len, Error, Result};
use crate::model::BlendshapeModel;
use crate::solvers::{FrameSolver, SolveMethod, SolverConfig};

/// Root mean squared mesh error against the full model, divided by the
/// vertex count `n` (not `3n`).
pub fn rmse(model: &BlendshapeModel, w: &[f64], target: &[f64]) -> Result<f64> {
    check_len("target", model.rows(), target.len())?;
    let f = model.evaluate(w)?;
    let sq: f64 = f.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sq / model.n() as f64).sqrt())
}

/// Number of weights with magnitude above `zero_threshold`.
pub fn cardinality(w: &[f64], zero_threshold: f64) -> usize {
    w.iter().filter(|v| v.abs() > zero_threshold).count()
}

/// Sum of squared second differences of one weight curve.
pub fn roughness(curve: &[f64]) -> Result<f64> {
    if curve.len() < 3 {
        return Err(Error::TooFewFrames(curve.len()));
    }
    Ok(curve
        .windows(3)
        .map(|s| {
            let d = s[0] - 2.0 * s[1] + s[2];
            d * d
        })
        .sum())
}

/// Roughness of every controller's curve in a `T x m` weight sequence.
pub fn roughness_per_controller(weights: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = weights.first().map_or(0, Vec::len);
    if weights.len() < 3 {
        return Err(Error::TooFewFrames(weights.len()));
    }
    (0..m)
        .map(|i| {
            let curve: Vec<f64> = weights.iter().map(|w| w[i]).collect();
            roughness(&curve)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub rmse: f64,
    pub cardinality: usize,
    pub time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMetrics {
    pub frames: Vec<FrameMetrics>,
    /// `None` for fewer than three frames.
    pub roughness: Option<Vec<f64>>,
    pub mean_rmse: f64,
    pub median_rmse: f64,
    pub max_rmse: f64,
    pub mean_cardinality: f64,
    pub mean_time_ms: f64,
    pub total_roughness: Option<f64>,
}

/// Per-frame metrics plus aggregates. `times_ms`, when given, is attached
/// to the frames in order.
pub fn sequence_metrics(
    model: &BlendshapeModel,
    weights: &[Vec<f64>],
    targets: &[Vec<f64>],
    times_ms: Option<&[f64]>,
    zero_threshold: f64,
) -> Result<SequenceMetrics> {
    check_len("target frames", weights.len(), targets.len())?;
    if let Some(t) = times_ms {
        check_len("frame times", weights.len(), t.len())?;
    }
    let frames = weights
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(t, (w, b))| {
            Ok(FrameMetrics {
                rmse: rmse(model, w, b)?,
                cardinality: cardinality(w, zero_threshold),
                time_ms: times_ms.map_or(0.0, |ts| ts[t]),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let roughness = (weights.len() >= 3)
        .then(|| roughness_per_controller(weights))
        .transpose()?;
    Ok(aggregate(frames, roughness))
}

pub fn aggregate(frames: Vec<FrameMetrics>, roughness: Option<Vec<f64>>) -> SequenceMetrics {
    let count = frames.len().max(1) as f64;
    let rmses: Vec<f64> = frames.iter().map(|f| f.rmse).collect();
    SequenceMetrics {
        mean_rmse: rmses.iter().sum::<f64>() / count,
        median_rmse: median(&rmses),
        max_rmse: rmses.iter().copied().fold(0.0, f64::max),
        mean_cardinality: frames.iter().map(|f| f.cardinality as f64).sum::<f64>() / count,
        mean_time_ms: frames.iter().map(|f| f.time_ms).sum::<f64>() / count,
        total_roughness: roughness.as_ref().map(|r| r.iter().sum()),
        roughness,
        frames,
    }
}

/// Median (mean of the middle pair for even lengths); 0 for no data.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    }
}

/// Mean and standard deviation of per-frame cardinality of a reference
/// animation; the band `[mean - std, mean + std]` is the target region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CardinalityBand {
    pub mean: f64,
    pub std: f64,
}

impl CardinalityBand {
    pub fn of(weights: &[Vec<f64>], zero_threshold: f64) -> Self {
        let counts: Vec<f64> = weights
            .iter()
            .map(|w| cardinality(w, zero_threshold) as f64)
            .collect();
        let n = counts.len().max(1) as f64;
        let mean = counts.iter().sum::<f64>() / n;
        let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.std
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.std
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.lower() && value <= self.upper()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub alpha: f64,
    pub mean_rmse: f64,
    pub max_rmse: f64,
    pub mean_cardinality: f64,
    pub mean_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffTable {
    pub method: SolveMethod,
    pub rows: Vec<TradeoffRow>,
    /// Smallest grid `alpha` whose mean cardinality is at most the band's
    /// upper edge.
    pub alpha_star: Option<f64>,
}

/// RMSE / cardinality / time per `alpha` on a fixed set of frames.
pub fn tradeoff_table(
    model: &BlendshapeModel,
    clustering: Option<&Clustering>,
    targets: &[Vec<f64>],
    method: SolveMethod,
    alpha_grid: &[f64],
    config: &SolverConfig,
    band: Option<CardinalityBand>,
) -> Result<TradeoffTable> {
    if alpha_grid.is_empty() {
        return Err(Error::InvalidArgument("empty alpha grid".into()));
    }
    let solver = FrameSolver::new(model, clustering, method)?;
    let mut alphas = alpha_grid.to_vec();
    alphas.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in &alphas {
        let cfg = config.clone().with_alpha(alpha);
        let mut frames = Vec::with_capacity(targets.len());
        for target in targets {
            let r = solver.solve(target, &cfg, None)?;
            frames.push(FrameMetrics {
                rmse: rmse(model, &r.w, target)?,
                cardinality: cardinality(&r.w, cfg.zero_threshold),
                time_ms: r.time_ms(),
            });
        }
        let agg = aggregate(frames, None);
        rows.push(TradeoffRow {
            alpha,
            mean_rmse: agg.mean_rmse,
            max_rmse: agg.max_rmse,
            mean_cardinality: agg.mean_cardinality,
            mean_time_ms: agg.mean_time_ms,
        });
    }
    let alpha_star = band.and_then(|b| select_alpha(&rows, b));
    Ok(TradeoffTable {
        method,
        rows,
        alpha_star,
    })
}

/// The first row (in ascending `alpha`) whose mean cardinality falls to or
/// below the band's upper edge.
pub fn select_alpha(rows: &[TradeoffRow], band: CardinalityBand) -> Option<f64> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    sorted
        .iter()
        .find(|r| r.mean_cardinality <= band.upper())
        .map(|r| r.alpha)
}

pub fn write_tradeoff_csv<W: Write>(table: &TradeoffTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "alpha", "mean_rmse", "max_rmse", "mean_cardinality", "mean_time_ms"])?;
    for r in &table.rows {
        w.write_record([
            table.method.as_str().to_string(),
            r.alpha.to_string(),
            r.mean_rmse.to_string(),
            r.max_rmse.to_string(),
            r.mean_cardinality.to_string(),
            r.mean_time_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
