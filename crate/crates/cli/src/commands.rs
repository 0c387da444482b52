use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{info, warn};
use serde::Serialize;
use serde_json::{json, Value};

use facerig_core::clustering::{self, ClusteringInputs, Method};
use facerig_core::evaluation::{self, CardinalityBand};
use facerig_core::io::{self, FrameRecord};
use facerig_core::solvers::{FrameSolver, SolveMethod, SolverConfig};
use facerig_core::synth::{self, GenSpec};
use facerig_core::{BlendshapeModel, Clustering};

use crate::config::{
    apply_patch, load_patch, parse_k_range, usage, ClusterOptions, EvalOptions, SweepOptions,
};
use crate::{Cli, ClusterArgs, Command, EvalArgs, GenArgs, Preset, SolveArgs, SweepArgs};

/// Inputs, settings and outputs of one command, written next to its
/// artifacts as `<command>_manifest.json`.
#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: Option<u64>,
    method: Option<String>,
    model: Option<&'a Path>,
    clustering: Option<&'a Path>,
    weights: Option<&'a Path>,
    targets: Option<&'a Path>,
    config: Value,
    outputs: Vec<String>,
}

impl<'a> RunManifest<'a> {
    fn new(command: &'a str, config: Value) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: None,
            method: None,
            model: None,
            clustering: None,
            weights: None,
            targets: None,
            config,
            outputs: Vec::new(),
        }
    }
}

struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    fn finish(mut self, mut manifest: RunManifest<'_>) -> Result<()> {
        let name = format!("{}_manifest.json", manifest.command.replace('-', "_"));
        let path = self.path(&name);
        manifest.outputs = self.written;
        io::write_json(&path, &manifest)?;
        Ok(())
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let patch = load_patch(cli.config.as_deref())?;
    let patch = patch.as_ref();
    match &cli.command {
        Command::Gen(args) => gen(cli, args, patch),
        Command::Cluster(args) => cluster(cli, args, patch),
        Command::SweepK(args) => sweep(cli, args, patch),
        Command::Solve(args) => solve(cli, args, patch),
        Command::Eval(args) => eval(cli, args, patch),
    }
}

type Patch<'a> = Option<&'a serde_json::Map<String, Value>>;

fn load_model(path: &Path) -> Result<BlendshapeModel> {
    io::read_model(path).with_context(|| format!("loading model {}", path.display()))
}

fn load_matrix(path: &Path, what: &str) -> Result<Vec<Vec<f64>>> {
    io::read_weights(path).with_context(|| format!("loading {what} {}", path.display()))
}

fn gen(cli: &Cli, args: &GenArgs, patch: Patch<'_>) -> Result<()> {
    let mut spec = match args.preset {
        Preset::Desk => GenSpec::desk(),
        Preset::Full => GenSpec::full_scale(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = args.$field { spec.$field = v; })* };
    }
    set!(n, m, pairs, triples, quads, locality, frames, sparsity, noise_sigma, regions);
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    let spec: GenSpec = apply_patch(&spec, patch)?;

    let model = synth::generate_model(&spec)?;
    let anim = synth::generate_animation(&model, &spec)?;
    let targets = synth::make_targets(&model, &anim.weights, spec.noise_sigma, spec.seed)?;
    info!(
        "generated n={} m={} with {} correctives, {} frames",
        model.n(),
        model.m(),
        model.correctives().len(),
        spec.frames
    );

    let mut out = Outputs::new(&cli.out_dir)?;
    io::write_json(out.path("model.json"), &model)?;
    io::write_weights(out.path("weights.csv"), &anim.weights)?;
    io::write_targets(out.path("targets.csv"), &targets)?;
    io::write_json(out.path("ground_truth.json"), &json!({ "cardinality": anim.cardinality }))?;

    let mut manifest = RunManifest::new("gen", serde_json::to_value(&spec)?);
    manifest.seed = Some(spec.seed);
    out.finish(manifest)
}

fn parse_method(name: &str) -> Result<Method> {
    Ok(name.parse::<Method>()?)
}

fn load_segments(path: Option<&Path>) -> Result<Option<Vec<Vec<usize>>>> {
    path.map(|p| io::read_segments(p).with_context(|| format!("loading segments {}", p.display())))
        .transpose()
}

fn cluster(cli: &Cli, args: &ClusterArgs, patch: Patch<'_>) -> Result<()> {
    let opts = ClusterOptions {
        method: args.method.clone(),
        k: args.k,
        seed: cli.seed.unwrap_or(0),
        segments: args.segments.clone(),
    };
    let opts: ClusterOptions = apply_patch(&opts, patch)?;
    let method = parse_method(&opts.method)?;
    let k = match (method.takes_k(), opts.k) {
        (true, Some(k)) => k,
        (true, None) => return Err(usage(format!("--k is required for {method}"))),
        (false, Some(k)) => {
            warn!("--k {k} is ignored by the {method} method");
            0
        }
        (false, None) => 0,
    };
    if method != Method::Ssk && opts.segments.is_some() {
        warn!("--segments is ignored by the {method} method");
    }
    if method == Method::Ssk && opts.segments.is_none() {
        return Err(usage("the ssk method requires --segments"));
    }
    let segments = load_segments(opts.segments.as_deref())?;

    let model = load_model(&args.model)?;
    let inputs = ClusteringInputs::from_model(&model);
    let clustering = clustering::cluster(&inputs, method, k, opts.seed, segments.as_deref())?;
    let scores = clustering::score(&inputs.offsets, &clustering)?;
    info!(
        "{method}: K={} E_D={:.4} E_ID={:.4} E_R={:.4}",
        clustering.k, scores.density, scores.inter_density, scores.reconstruction_error
    );

    let mut out = Outputs::new(&cli.out_dir)?;
    io::write_json(out.path("clustering.json"), &clustering)?;
    io::write_json(out.path("scores.json"), &scores)?;
    let mut manifest = RunManifest::new("cluster", serde_json::to_value(&opts)?);
    manifest.seed = Some(opts.seed);
    manifest.method = Some(method.as_str().to_string());
    manifest.model = Some(&args.model);
    out.finish(manifest)
}

fn sweep(cli: &Cli, args: &SweepArgs, patch: Patch<'_>) -> Result<()> {
    let opts = SweepOptions {
        method: args.method.clone(),
        k_range: args.k_range.clone(),
        repeats: args.repeats,
        seed: cli.seed.unwrap_or(0),
        segments: args.segments.clone(),
    };
    let opts: SweepOptions = apply_patch(&opts, patch)?;
    let method = parse_method(&opts.method)?;
    let model = load_model(&args.model)?;

    let ks = match (&opts.k_range, method.takes_k()) {
        (Some(r), true) => parse_k_range(r)?,
        (None, true) => (4.min(model.m())..=model.m()).collect(),
        (Some(_), false) => {
            warn!("--k-range is ignored by the {method} method");
            Vec::new()
        }
        (None, false) => Vec::new(),
    };
    if !method.takes_k() && opts.repeats.is_some_and(|r| r > 1) {
        warn!("--repeats is ignored by the deterministic {method} method");
    }
    if method == Method::Ssk && opts.segments.is_none() {
        return Err(usage("the ssk method requires --segments"));
    }
    let segments = load_segments(opts.segments.as_deref())?;
    let repeats = opts.repeats.unwrap_or(1);

    let inputs = ClusteringInputs::from_model(&model);
    let records = clustering::sweep_k(&inputs, method, &ks, repeats, opts.seed, segments.as_deref())?;
    if let Some(k) = clustering::knee_suggestion(&records) {
        info!("suggested K (knee of E_D vs E_R): {k}");
    }

    let mut out = Outputs::new(&cli.out_dir)?;
    let path = out.path("sweep.csv");
    clustering::write_sweep_csv(&records, BufWriter::new(File::create(&path)?))?;
    let mut manifest = RunManifest::new("sweep-k", serde_json::to_value(&opts)?);
    manifest.seed = Some(opts.seed);
    manifest.method = Some(method.as_str().to_string());
    manifest.model = Some(&args.model);
    out.finish(manifest)
}

fn solver_config(cli: &Cli, args: &SolveArgs, patch: Patch<'_>) -> Result<SolverConfig> {
    let mut cfg = SolverConfig::default();
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = args.$field { cfg.$field = v; })* };
    }
    set!(alpha, rho, admm_iters, cd_iters, cd_tol, admm_tol, zero_threshold);
    cfg.inexact |= args.inexact;
    cfg.parallel_clusters |= args.parallel;
    cfg.warm_start |= args.warm_start;
    cfg.shuffle_order |= args.shuffle;
    if let Some(s) = cli.seed {
        cfg.order_seed = s;
    }
    let cfg: SolverConfig = apply_patch(&cfg, patch)?;
    cfg.validate()?;
    Ok(cfg)
}

fn solve(cli: &Cli, args: &SolveArgs, patch: Patch<'_>) -> Result<()> {
    let method: SolveMethod = args.method.parse()?;
    let cfg = solver_config(cli, args, patch)?;
    let model = load_model(&args.model)?;
    let targets = load_matrix(&args.targets, "targets")?;

    let clustering: Option<Clustering> = match (method, &args.clustering) {
        (SolveMethod::Holistic, Some(_)) => {
            warn!("--clustering is ignored by the holistic solver");
            None
        }
        (SolveMethod::Holistic, None) => None,
        (_, Some(p)) => Some(
            io::read_clustering(p).with_context(|| format!("loading clustering {}", p.display()))?,
        ),
        (_, None) => return Err(usage(format!("the {method} solver requires --clustering"))),
    };
    if method != SolveMethod::Admm && (args.parallel || args.inexact) {
        warn!("--parallel and --inexact only affect the admm solver");
    }

    let solver = FrameSolver::new(&model, clustering.as_ref(), method)?;
    let mut weights: Vec<Vec<f64>> = Vec::with_capacity(targets.len());
    let mut records = Vec::with_capacity(targets.len());
    for (t, target) in targets.iter().enumerate() {
        let frame_err = |e: facerig_core::Error| facerig_core::Error::Frame {
            index: t,
            source: Box::new(e),
        };
        let init = cfg.warm_start.then(|| weights.last()).flatten().map(Vec::as_slice);
        let res = solver.solve(target, &cfg, init).map_err(frame_err)?;
        records.push(FrameRecord {
            frame: t,
            method: method.as_str().to_string(),
            rmse: evaluation::rmse(&model, &res.w, target).map_err(frame_err)?,
            cardinality: evaluation::cardinality(&res.w, cfg.zero_threshold),
            time_ms: res.time_ms(),
            iters: res.iterations,
            converged: res.converged,
        });
        weights.push(res.w);
    }
    let unconverged = records.iter().filter(|r| !r.converged).count();
    if unconverged > 0 {
        info!("{unconverged} of {} frames hit the iteration limit", records.len());
    }

    let prefix = args.prefix.clone().unwrap_or_else(|| method.as_str().to_string());
    let mut out = Outputs::new(&cli.out_dir)?;
    io::write_weights(out.path(&format!("{prefix}_weights.csv")), &weights)?;
    let frames = out.path(&format!("{prefix}_frames.csv"));
    io::write_frame_records(BufWriter::new(File::create(frames)?), &records)?;

    let mut manifest = RunManifest::new("solve", serde_json::to_value(&cfg)?);
    manifest.seed = Some(cfg.order_seed);
    manifest.method = Some(method.as_str().to_string());
    manifest.model = Some(&args.model);
    manifest.targets = Some(&args.targets);
    manifest.clustering = clustering.as_ref().and(args.clustering.as_deref());
    out.finish(manifest)
}

#[derive(Debug, Serialize)]
struct EvalSummary {
    frames: usize,
    mean_rmse: f64,
    median_rmse: f64,
    max_rmse: f64,
    mean_cardinality: f64,
    total_roughness: Option<f64>,
    note: Option<String>,
    ground_truth: Option<GroundTruthSummary>,
}

#[derive(Debug, Serialize)]
struct GroundTruthSummary {
    cardinality: CardinalityBand,
    cardinality_in_band: bool,
    mean_abs_weight_error: f64,
    total_roughness: Option<f64>,
}

fn eval(cli: &Cli, args: &EvalArgs, patch: Patch<'_>) -> Result<()> {
    let opts = EvalOptions {
        zero_threshold: args
            .zero_threshold
            .unwrap_or(SolverConfig::default().zero_threshold),
    };
    let opts: EvalOptions = apply_patch(&opts, patch)?;
    if cli.seed.is_some() {
        warn!("--seed is ignored by eval");
    }
    let model = load_model(&args.model)?;
    let weights = load_matrix(&args.weights, "weights")?;
    let targets = load_matrix(&args.targets, "targets")?;
    let metrics =
        evaluation::sequence_metrics(&model, &weights, &targets, None, opts.zero_threshold)?;
    let note = metrics
        .roughness
        .is_none()
        .then(|| format!("roughness needs at least 3 frames, got {}", weights.len()));
    if let Some(n) = &note {
        warn!("{n}");
    }

    let ground_truth = match &args.ground_truth {
        None => None,
        Some(p) => {
            let gt = load_matrix(p, "ground truth")?;
            if gt.len() != weights.len() {
                return Err(facerig_core::Error::DimensionMismatch {
                    what: "ground-truth frames",
                    expected: weights.len(),
                    got: gt.len(),
                }
                .into());
            }
            let band = CardinalityBand::of(&gt, opts.zero_threshold);
            let count = weights.iter().map(Vec::len).sum::<usize>().max(1) as f64;
            let abs_err: f64 = weights
                .iter()
                .flatten()
                .zip(gt.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .sum();
            let gt_rough = (gt.len() >= 3)
                .then(|| evaluation::roughness_per_controller(&gt))
                .transpose()?;
            Some(GroundTruthSummary {
                cardinality: band,
                cardinality_in_band: band.contains(metrics.mean_cardinality),
                mean_abs_weight_error: abs_err / count,
                total_roughness: gt_rough.map(|r| r.iter().sum()),
            })
        }
    };

    let mut out = Outputs::new(&cli.out_dir)?;
    let frame_rows: Vec<Vec<f64>> = metrics
        .frames
        .iter()
        .enumerate()
        .map(|(t, f)| vec![t as f64, f.rmse, f.cardinality as f64])
        .collect();
    let header = ["frame", "rmse", "cardinality"].map(String::from);
    io::write_matrix_csv(
        BufWriter::new(File::create(out.path(&format!("{}_metrics.csv", args.prefix)))?),
        &header,
        &frame_rows,
    )?;
    if let Some(r) = &metrics.roughness {
        let rows: Vec<Vec<f64>> = r.iter().enumerate().map(|(i, v)| vec![i as f64, *v]).collect();
        io::write_matrix_csv(
            BufWriter::new(File::create(out.path(&format!("{}_roughness.csv", args.prefix)))?),
            &["controller", "roughness"].map(String::from),
            &rows,
        )?;
    }
    let summary = EvalSummary {
        frames: metrics.frames.len(),
        mean_rmse: metrics.mean_rmse,
        median_rmse: metrics.median_rmse,
        max_rmse: metrics.max_rmse,
        mean_cardinality: metrics.mean_cardinality,
        total_roughness: metrics.total_roughness,
        note,
        ground_truth,
    };
    io::write_json(out.path(&format!("{}_summary.json", args.prefix)), &summary)?;

    let mut manifest = RunManifest::new("eval", serde_json::to_value(&opts)?);
    manifest.model = Some(&args.model);
    manifest.weights = Some(&args.weights);
    manifest.targets = Some(&args.targets);
    out.finish(manifest)
}
