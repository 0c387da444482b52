//! Reproducible synthetic rigs, sparse animations and noisy scan targets.
//!
//! Vertices sit on the front half of an ellipsoid 18 cm wide. Every
//! blendshape displaces a compact patch of nearby vertices with a smooth
//! falloff, so the model is local in the way real facial rigs are.
//! Correctives join controllers whose patches overlap.

use std::collections::{BTreeSet, HashMap};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::CardinalityBand;
use crate::model::{BlendshapeModel, CorrectiveTerm};

/// Semi-axes of the head ellipsoid in centimeters.
const HEAD_SEMI_AXES: [f64; 3] = [9.0, 11.0, 9.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSpec {
    pub n: usize,
    pub m: usize,
    pub pairs: usize,
    pub triples: usize,
    pub quads: usize,
    /// Vertices in each blendshape's footprint.
    pub locality: usize,
    pub frames: usize,
    /// Expected number of active controllers per frame.
    pub sparsity: f64,
    /// Standard deviation of the per-coordinate target noise, in cm.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Number of vertex groups with disjoint footprints (1 = one face).
    pub regions: usize,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self::desk()
    }
}

impl GenSpec {
    /// Small model for fast experiments.
    pub fn desk() -> Self {
        Self {
            n: 600,
            m: 24,
            pairs: 20,
            triples: 6,
            quads: 2,
            locality: 120,
            frames: 60,
            sparsity: 5.0,
            noise_sigma: 0.03,
            seed: 0,
            regions: 1,
        }
    }

    /// Production-sized rig: 10000 vertices, 102 controllers.
    pub fn full_scale() -> Self {
        Self {
            n: 10_000,
            m: 102,
            pairs: 120,
            triples: 30,
            quads: 8,
            locality: 1_000,
            frames: 300,
            sparsity: 12.0,
            noise_sigma: 0.03,
            seed: 0,
            regions: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InfeasibleSpec(msg));
        if self.n == 0 || self.m == 0 {
            return bad("n and m must be positive".into());
        }
        if self.regions == 0 || self.regions > self.m || self.regions > self.n {
            return bad(format!("regions must lie in 1..=min(n, m), got {}", self.regions));
        }
        let per_region = self.n / self.regions;
        if self.locality == 0 || self.locality > per_region {
            return bad(format!(
                "locality must lie in 1..={per_region}, got {}",
                self.locality
            ));
        }
        if !(self.sparsity >= 0.0 && self.sparsity <= self.m as f64) {
            return bad(format!("sparsity must lie in [0, m], got {}", self.sparsity));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and >= 0".into());
        }
        Ok(())
    }
}

struct Footprint {
    vertices: Vec<usize>,
    falloff: Vec<f64>,
}

pub fn generate_model(spec: &GenSpec) -> Result<BlendshapeModel> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;
    let positions = face_vertices(n, &mut rng);
    let regions = split_regions(&positions, spec.regions);

    let mut footprints = Vec::with_capacity(spec.m);
    let mut blendshapes = Vec::with_capacity(spec.m);
    for i in 0..spec.m {
        let region = &regions[i % spec.regions];
        let center = positions[*region.choose(&mut rng).expect("non-empty region")];
        let fp = footprint(&positions, region, center, spec.locality);
        let amplitude = rng.random_range(0.5..1.5);
        let dir = unit_vector(&mut rng);
        let mut b = vec![0.0; 3 * n];
        for (&l, &phi) in fp.vertices.iter().zip(&fp.falloff) {
            for c in 0..3 {
                b[3 * l + c] = amplitude * phi * dir[c];
            }
        }
        blendshapes.push(b);
        footprints.push(fp);
    }

    let mut weight_at: Vec<HashMap<usize, f64>> = vec![HashMap::new(); spec.m];
    let mut cover: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, fp) in footprints.iter().enumerate() {
        for (&l, &phi) in fp.vertices.iter().zip(&fp.falloff) {
            weight_at[i].insert(l, phi);
            cover[l].push(i);
        }
    }

    let mut correctives = Vec::new();
    for (size, count) in [(2, spec.pairs), (3, spec.triples), (4, spec.quads)] {
        for ids in pick_tuples(&cover, size, count, &mut rng)? {
            let amplitude = rng.random_range(0.2..0.6);
            let dir = unit_vector(&mut rng);
            let mut offset = vec![0.0; 3 * n];
            for (&l, &phi) in &weight_at[ids[0]] {
                let joint: Option<f64> = ids[1..]
                    .iter()
                    .map(|j| weight_at[*j].get(&l).copied())
                    .product();
                if let Some(rest) = joint {
                    for c in 0..3 {
                        offset[3 * l + c] = amplitude * phi * rest * dir[c];
                    }
                }
            }
            correctives.push(CorrectiveTerm::new(ids, offset));
        }
    }

    BlendshapeModel::new(positions.iter().flatten().copied().collect(), blendshapes, correctives)
}

/// A ground-truth animation and its per-frame cardinality statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Animation {
    /// `T x m` weights in `[0, 1]`.
    pub weights: Vec<Vec<f64>>,
    pub cardinality: CardinalityBand,
}

/// Every controller alternates idle gaps with smooth bumps of activation,
/// with a duty cycle giving `spec.sparsity` active controllers per frame on
/// average.
pub fn generate_animation(model: &BlendshapeModel, spec: &GenSpec) -> Result<Animation> {
    spec.validate()?;
    if spec.frames == 0 {
        return Err(Error::InfeasibleSpec("frames must be positive".into()));
    }
    let m = model.m();
    let frames = spec.frames;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);

    let mut weights = vec![vec![0.0; m]; frames];
    let duty = (spec.sparsity / m as f64).min(1.0);
    if duty > 0.0 {
        const MIN_LEN: usize = 6;
        const MAX_LEN: usize = 20;
        let mean_len = (MIN_LEN + MAX_LEN) as f64 / 2.0;
        let mean_gap = mean_len * (1.0 - duty) / duty;
        #[allow(clippy::needless_range_loop)]
        for i in 0..m {
            let mut t = -(rng.random_range(0.0..mean_len + mean_gap + 1.0) as i64);
            while t < frames as i64 {
                let len = rng.random_range(MIN_LEN..=MAX_LEN) as i64;
                let peak = rng.random_range(0.3..1.0);
                for s in 0..len {
                    let tt = t + s;
                    if (0..frames as i64).contains(&tt) {
                        let phase = std::f64::consts::PI * (s + 1) as f64 / (len + 1) as f64;
                        weights[tt as usize][i] = peak * phase.sin().powi(2);
                    }
                }
                let gap = if mean_gap > 0.0 {
                    let u: f64 = rng.random_range(f64::EPSILON..1.0);
                    (-mean_gap * u.ln()).round() as i64
                } else {
                    0
                };
                t += len + gap;
            }
        }
    }
    let cardinality = CardinalityBand::of(&weights, 0.0);
    Ok(Animation {
        weights,
        cardinality,
    })
}

/// Rig evaluations of `weights` plus i.i.d. Gaussian noise of standard
/// deviation `noise_sigma` on every coordinate.
pub fn make_targets(
    model: &BlendshapeModel,
    weights: &[Vec<f64>],
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument("noise_sigma must be finite and >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let noise = Normal::new(0.0, noise_sigma).expect("valid sigma");
    weights
        .iter()
        .map(|w| {
            let mut b = model.evaluate(w)?;
            if noise_sigma > 0.0 {
                for v in b.iter_mut() {
                    *v += noise.sample(&mut rng);
                }
            }
            Ok(b)
        })
        .collect()
}

fn face_vertices(n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| {
            let mut d = unit_vector(rng);
            d[2] = d[2].abs();
            [
                d[0] * HEAD_SEMI_AXES[0],
                d[1] * HEAD_SEMI_AXES[1],
                d[2] * HEAD_SEMI_AXES[2],
            ]
        })
        .collect()
}

/// Splits vertices into `k` bands along x.
fn split_regions(positions: &[[f64; 3]], k: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&a, &b| positions[a][0].total_cmp(&positions[b][0]));
    let size = positions.len().div_ceil(k);
    let mut regions: Vec<Vec<usize>> = order.chunks(size).map(<[usize]>::to_vec).collect();
    for r in &mut regions {
        r.sort_unstable();
    }
    regions
}

/// The `locality` vertices of `region` nearest to `center`, weighted by
/// `(1 - (d/R)^2)^2` with `R` just past the farthest of them.
fn footprint(positions: &[[f64; 3]], region: &[usize], center: [f64; 3], locality: usize) -> Footprint {
    let dist = |l: usize| {
        let p = positions[l];
        ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) + (p[2] - center[2]).powi(2))
            .sqrt()
    };
    let mut nearest: Vec<(usize, f64)> = region.iter().map(|&l| (l, dist(l))).collect();
    nearest.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    nearest.truncate(locality);
    let radius = nearest.last().map_or(1.0, |p| p.1).max(1e-9) * 1.1;
    nearest.sort_unstable_by_key(|p| p.0);
    Footprint {
        vertices: nearest.iter().map(|p| p.0).collect(),
        falloff: nearest
            .iter()
            .map(|p| (1.0 - (p.1 / radius).powi(2)).powi(2))
            .collect(),
    }
}

/// `count` distinct controller tuples of `size` whose footprints share a
/// vertex. Random sampling first; exhaustive enumeration decides
/// feasibility when sampling stalls.
fn pick_tuples(
    cover: &[Vec<usize>],
    size: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let eligible: Vec<usize> = (0..cover.len()).filter(|&l| cover[l].len() >= size).collect();
    let mut chosen = BTreeSet::new();
    let mut picked = Vec::with_capacity(count);
    let mut attempts = 0;
    while picked.len() < count && attempts < 200 * count + 1000 && !eligible.is_empty() {
        attempts += 1;
        let l = *eligible.choose(rng).expect("non-empty");
        let mut ids: Vec<usize> = cover[l].choose_multiple(rng, size).copied().collect();
        ids.sort_unstable();
        if chosen.insert(ids.clone()) {
            picked.push(ids);
        }
    }
    if picked.len() == count {
        return Ok(picked);
    }

    let distinct: BTreeSet<&Vec<usize>> = eligible.iter().map(|&l| &cover[l]).collect();
    let mut all = BTreeSet::new();
    for set in distinct {
        combinations(set, size, &mut |c| {
            all.insert(c.to_vec());
        });
    }
    if all.len() < count {
        return Err(Error::InfeasibleSpec(format!(
            "asked for {count} correctives of {size} controllers but only {} overlapping tuples exist",
            all.len()
        )));
    }
    let mut rest: Vec<Vec<usize>> = all.into_iter().filter(|c| !chosen.contains(c)).collect();
    rest.shuffle(rng);
    picked.extend(rest.into_iter().take(count - picked.len()));
    Ok(picked)
}

fn combinations(items: &[usize], size: usize, emit: &mut impl FnMut(&[usize])) {
    fn rec(items: &[usize], size: usize, start: usize, cur: &mut Vec<usize>, emit: &mut impl FnMut(&[usize])) {
        if cur.len() == size {
            emit(cur);
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, size, i + 1, cur, emit);
            cur.pop();
        }
    }
    rec(items, size, 0, &mut Vec::with_capacity(size), emit);
}

fn unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 1e-12 {
            return [v[0] / norm, v[1] / norm, v[2] / norm];
        }
    }
}
