//! Repeated clustering over a range of cluster counts, for picking `K`
//! from the density / reconstruction-error trade-off without animation data.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cluster, score, ClusterScores, ClusteringInputs, Method};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub method: Method,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    pub repeat: usize,
    pub scores: Option<ClusterScores>,
    /// Set when this run failed; the sweep itself carries on.
    pub error: Option<String>,
}

/// Clusters and scores the model once per `(K, repeat)` pair.
///
/// Repeat `r` runs with seed `seed + r`, so two methods swept with the same
/// base seed see the same k-means initializations. Methods with a fixed
/// cluster count (sparse, ssk, full) are deterministic and yield a single
/// record, ignoring `k_values` and `repeats`. Output is sorted by
/// `(K, repeat)`.
pub fn sweep_k(
    inputs: &ClusteringInputs,
    method: Method,
    k_values: &[usize],
    repeats: usize,
    seed: u64,
    segments: Option<&[Vec<usize>]>,
) -> Result<Vec<SweepRecord>> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    let m = inputs.offsets.ncols();
    let jobs: Vec<(usize, usize)> = match method {
        _ if method.takes_k() => {
            if k_values.is_empty() {
                return Err(Error::InvalidArgument("empty K range".into()));
            }
            let mut ks = k_values.to_vec();
            ks.sort_unstable();
            ks.dedup();
            ks.into_iter()
                .flat_map(|k| (0..repeats).map(move |r| (k, r)))
                .collect()
        }
        Method::Sparse => vec![(m, 0)],
        Method::Full => vec![(1, 0)],
        Method::Ssk => {
            let segs = segments.ok_or_else(|| {
                Error::InvalidArgument("the ssk method needs manual mesh segments".into())
            })?;
            vec![(segs.len(), 0)]
        }
        _ => unreachable!(),
    };

    let records = jobs
        .into_par_iter()
        .map(|(k, repeat)| {
            let run_seed = seed.wrapping_add(repeat as u64);
            let outcome = cluster(inputs, method, k, run_seed, segments)
                .and_then(|c| score(&inputs.offsets, &c));
            let (scores, error) = match outcome {
                Ok(s) => (Some(s), None),
                Err(e) => {
                    log::warn!("{method} K={k} seed={run_seed}: {e}");
                    (None, Some(e.to_string()))
                }
            };
            SweepRecord {
                method,
                k,
                seed: run_seed,
                repeat,
                scores,
                error,
            }
        })
        .collect::<Vec<_>>();
    debug_assert!(records.windows(2).all(|p| (p[0].k, p[0].repeat) < (p[1].k, p[1].repeat)));
    Ok(records)
}

/// Writes `method,K,seed,E_D,E_ID,E_R`; failed runs carry `NaN` scores.
pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "K", "seed", "E_D", "E_ID", "E_R"])?;
    for r in records {
        let (d, id, e) = match &r.scores {
            Some(s) => (s.density, s.inter_density, s.reconstruction_error),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        w.write_record([
            r.method.as_str().to_string(),
            r.k.to_string(),
            r.seed.to_string(),
            d.to_string(),
            id.to_string(),
            e.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    method: Method,
    #[serde(rename = "K")]
    k: usize,
    seed: u64,
    #[serde(rename = "E_D")]
    density: f64,
    #[serde(rename = "E_ID")]
    inter_density: f64,
    #[serde(rename = "E_R")]
    reconstruction_error: f64,
}

/// Reads a sweep table back. The repeat index is not stored and comes back
/// as the row's position within its `K`.
pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out: Vec<SweepRecord> = Vec::new();
    for row in rdr.deserialize::<CsvRow>() {
        let row = row?;
        let repeat = out.iter().filter(|r| r.k == row.k).count();
        let failed = row.density.is_nan();
        out.push(SweepRecord {
            method: row.method,
            k: row.k,
            seed: row.seed,
            repeat,
            scores: (!failed).then_some(ClusterScores {
                density: row.density,
                inter_density: row.inter_density,
                reconstruction_error: row.reconstruction_error,
            }),
            error: failed.then(|| "failed run".to_string()),
        });
    }
    Ok(out)
}

/// Heuristic knee of the `E_R` versus `E_D` cloud: the record farthest from
/// the chord joining the lowest-density and highest-density points, after
/// scaling both axes to `[0, 1]`. Returns an index into `records`.
pub fn knee_suggestion(records: &[SweepRecord]) -> Option<usize> {
    let pts: Vec<(usize, f64, f64)> = records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            r.scores
                .filter(|s| s.reconstruction_error.is_finite())
                .map(|s| (i, s.density, s.reconstruction_error))
        })
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let (dmin, dmax) = min_max(pts.iter().map(|p| p.1));
    let (emin, emax) = min_max(pts.iter().map(|p| p.2));
    let scale = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
    let norm: Vec<(usize, f64, f64)> = pts
        .iter()
        .map(|&(i, d, e)| (i, scale(d, dmin, dmax), scale(e, emin, emax)))
        .collect();

    let first = norm.iter().min_by(|a, b| a.1.total_cmp(&b.1))?;
    let last = norm.iter().max_by(|a, b| a.1.total_cmp(&b.1))?;
    let (dx, dy) = (last.1 - first.1, last.2 - first.2);
    let len = (dx * dx + dy * dy).sqrt();
    if len == 0.0 {
        return None;
    }
    norm.iter()
        .map(|&(i, x, y)| (i, ((x - first.1) * dy - (y - first.2) * dx).abs() / len))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}
