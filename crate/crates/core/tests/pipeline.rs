mod common;

use facerig_core::clustering::{cluster, score, sweep_k, ClusteringInputs, Method};
use facerig_core::evaluation::{rmse, sequence_metrics, tradeoff_table, CardinalityBand};
use facerig_core::io;
use facerig_core::solvers::{solve_sequence, SolveMethod, SolverConfig};
use facerig_core::synth::{generate_animation, generate_model, make_targets, GenSpec};
use facerig_core::{BlendshapeModel, Clustering};
use rand::Rng;

fn small() -> GenSpec {
    GenSpec {
        n: 200,
        m: 10,
        pairs: 6,
        triples: 2,
        quads: 1,
        locality: 50,
        frames: 30,
        sparsity: 3.0,
        ..GenSpec::desk()
    }
}

#[test]
fn desk_spec_generates() {
    let spec = GenSpec::desk();
    let model = generate_model(&spec).unwrap();
    assert_eq!((model.n(), model.m()), (600, 24));
    let levels: Vec<usize> = model.correctives().iter().map(|t| t.level()).collect();
    assert_eq!(levels.iter().filter(|&&l| l == 2).count(), 20);
    assert_eq!(levels.iter().filter(|&&l| l == 3).count(), 6);
    assert_eq!(levels.iter().filter(|&&l| l == 4).count(), 2);
    // every blendshape is local
    let d = model.offset_matrix();
    for i in 0..model.m() {
        let support = (0..model.n()).filter(|&l| d[[l, i]] > 0.0).count();
        assert!(support <= spec.locality, "{i}: {support}");
    }
}

#[test]
fn disjoint_regions_are_recovered_by_two_clusters() {
    // two vertex groups, each moved only by its own controllers
    let n = 40;
    let mut r = common::rng(11);
    let shapes: Vec<Vec<f64>> = (0..6)
        .map(|i| {
            let mut b = vec![0.0; 3 * n];
            let group = if i % 2 == 0 { 0..n / 2 } else { n / 2..n };
            for l in group {
                b[3 * l] = r.random_range(0.8..1.2);
            }
            b
        })
        .collect();
    let model = BlendshapeModel::new(vec![0.0; 3 * n], shapes, Vec::new()).unwrap();
    let d = model.offset_matrix();
    let inputs = ClusteringInputs::from_model(&model);
    for seed in 0..5 {
        let c = cluster(&inputs, Method::Rsjd, 2, seed, None).unwrap();
        let mut groups: Vec<Vec<usize>> = c.ctrl_clusters.clone();
        groups.sort();
        assert_eq!(groups, vec![vec![0, 2, 4], vec![1, 3, 5]]);
        for mesh in &c.mesh_clusters {
            assert!(mesh.iter().all(|&l| (l < n / 2) == (mesh[0] < n / 2)), "{mesh:?}");
        }
        let s = score(&d, &c).unwrap();
        assert_eq!(s.reconstruction_error, 0.0);
        assert_eq!(s.inter_density, 0.0);
    }
}

#[test]
fn noise_level_matches_expectation() {
    // E[RMSE^2] of the true weights against their own noisy targets is 3 sigma^2
    let spec = GenSpec {
        frames: 200,
        ..small()
    };
    let model = generate_model(&spec).unwrap();
    let anim = generate_animation(&model, &spec).unwrap();
    let sigma = 0.05;
    let targets = make_targets(&model, &anim.weights, sigma, 3).unwrap();
    let mean_sq: f64 = anim
        .weights
        .iter()
        .zip(&targets)
        .map(|(w, t)| rmse(&model, w, t).unwrap().powi(2))
        .sum::<f64>()
        / spec.frames as f64;
    let expected = 3.0 * sigma * sigma;
    assert!((mean_sq / expected - 1.0).abs() < 0.02, "{mean_sq} vs {expected}");
}

#[test]
fn generated_models_pass_model_invariants() {
    let model = generate_model(&small()).unwrap();
    let json = serde_json::to_string(&model).unwrap();
    let back: BlendshapeModel = serde_json::from_str(&json).unwrap();
    assert_eq!(back, model);
    for t in model.correctives() {
        assert!((2..=4).contains(&t.level()));
        assert!(t.ids.windows(2).all(|p| p[0] < p[1]));
    }
}

#[test]
fn files_round_trip_between_stages() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small();
    let model = generate_model(&spec).unwrap();
    let anim = generate_animation(&model, &spec).unwrap();
    let targets = make_targets(&model, &anim.weights, 0.03, 1).unwrap();

    io::write_json(dir.path().join("model.json"), &model).unwrap();
    io::write_weights(dir.path().join("w.csv"), &anim.weights).unwrap();
    io::write_targets(dir.path().join("t.csv"), &targets).unwrap();
    assert_eq!(io::read_model(dir.path().join("model.json")).unwrap(), model);
    assert_eq!(io::read_weights(dir.path().join("w.csv")).unwrap(), anim.weights);
    assert_eq!(io::read_targets(dir.path().join("t.csv")).unwrap(), targets);

    let inputs = ClusteringInputs::from_model(&model);
    let c = cluster(&inputs, Method::RsjdA, 3, 5, None).unwrap();
    io::write_json(dir.path().join("c.json"), &c).unwrap();
    let back: Clustering = io::read_clustering(dir.path().join("c.json")).unwrap();
    assert_eq!(back, c);
    let text = std::fs::read_to_string(dir.path().join("c.json")).unwrap();
    assert!(text.contains("\"K\"") && text.contains("rsjd_a"));
}

#[test]
fn noiseless_ground_truth_has_zero_rmse() {
    let spec = small();
    let model = generate_model(&spec).unwrap();
    let anim = generate_animation(&model, &spec).unwrap();
    let targets = make_targets(&model, &anim.weights, 0.0, 0).unwrap();
    let m = sequence_metrics(&model, &anim.weights, &targets, None, 1e-6).unwrap();
    assert!(m.max_rmse < 1e-12);
    assert!(m.total_roughness.is_some());
}

#[test]
fn all_solvers_run_a_sequence() {
    let spec = small();
    let model = generate_model(&spec).unwrap();
    let anim = generate_animation(&model, &spec).unwrap();
    let targets = make_targets(&model, &anim.weights, 0.03, 1).unwrap();
    let inputs = ClusteringInputs::from_model(&model);
    let c = cluster(&inputs, Method::RsjdA, 3, 0, None).unwrap();
    let cfg = SolverConfig::default().with_alpha(0.1);
    for method in [SolveMethod::Holistic, SolveMethod::Naive, SolveMethod::Admm] {
        let res = solve_sequence(&model, Some(&c), &targets, method, &cfg).unwrap();
        assert_eq!(res.len(), spec.frames);
        let w: Vec<Vec<f64>> = res.iter().map(|r| r.w.clone()).collect();
        assert!(w.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        let again = solve_sequence(&model, Some(&c), &targets, method, &cfg).unwrap();
        assert!(res.iter().zip(&again).all(|(a, b)| a.w == b.w), "{method}");
        // well below the all-zero baseline
        let m = sequence_metrics(&model, &w, &targets, None, 1e-6).unwrap();
        let zeros = vec![vec![0.0; model.m()]; spec.frames];
        let base = sequence_metrics(&model, &zeros, &targets, None, 1e-6).unwrap();
        assert!(m.mean_rmse < 0.5 * base.mean_rmse, "{method}");
    }
}

#[test]
fn tradeoff_table_trends() {
    let spec = small();
    let model = generate_model(&spec).unwrap();
    let anim = generate_animation(&model, &spec).unwrap();
    let targets = make_targets(&model, &anim.weights, 0.03, 1).unwrap();
    let grid = [0.0, 0.01, 0.1, 1.0, 100.0];
    let band = CardinalityBand::of(&anim.weights, 1e-6);
    let cfg = SolverConfig::default();
    let t = tradeoff_table(&model, None, &targets, SolveMethod::Holistic, &grid, &cfg, Some(band))
        .unwrap();
    assert_eq!(t.rows.len(), grid.len());
    let first = t.rows[0].mean_cardinality;
    assert!(t.rows.iter().all(|r| r.mean_cardinality <= first));
    assert_eq!(t.rows.last().unwrap().mean_cardinality, 0.0);
    let again = tradeoff_table(&model, None, &targets, SolveMethod::Holistic, &grid, &cfg, Some(band))
        .unwrap();
    assert_eq!(
        t.rows.iter().map(|r| r.mean_rmse).collect::<Vec<_>>(),
        again.rows.iter().map(|r| r.mean_rmse).collect::<Vec<_>>()
    );
    let single = tradeoff_table(&model, None, &targets, SolveMethod::Holistic, &[0.1], &cfg, None)
        .unwrap();
    assert_eq!(single.rows.len(), 1);
}

#[test]
fn sweep_is_deterministic_and_complete() {
    let model = generate_model(&small()).unwrap();
    let inputs = ClusteringInputs::from_model(&model);
    let a = sweep_k(&inputs, Method::Rsjd, &[2, 3, 4], 2, 9, None).unwrap();
    let b = sweep_k(&inputs, Method::Rsjd, &[4, 2, 3], 2, 9, None).unwrap();
    assert_eq!(a.len(), 6);
    assert_eq!(a, b);
    let keys: Vec<(usize, usize)> = a.iter().map(|r| (r.k, r.repeat)).collect();
    let mut sorted = keys.clone();
    sorted.sort_unstable();
    assert_eq!(keys, sorted);
}
