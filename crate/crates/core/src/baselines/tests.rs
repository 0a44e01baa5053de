use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{Tape, Tensor};
use crate::models::{Classifier, FnDecoder, FnGenerator, MlpClassifier};
use crate::recourse::RecourseOutcome;

fn identity_generator(d: usize) -> FnGenerator {
    let decoder = FnDecoder::new(d, 0, d, |_: &mut Tape, v, _| Ok(v));
    FnGenerator::new(decoder, Vec::new(), |x| x.to_vec())
}

fn assert_contract(out: &RecourseOutcome, clf: &dyn Classifier) {
    if out.success {
        assert!(clf.score(&out.counterfactual).unwrap() >= clf.target_score());
        assert!(out.counterfactual.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn scfe_moves_the_strongest_feature() {
    let clf = MlpClassifier::linear(&[2.0, 0.5, 0.25], -1.5).unwrap();
    let x = [0.3, 0.3, 0.3];
    let out = scfe(&x, &clf, &[], &BaselineConfig::default()).unwrap();
    assert!(out.success);
    assert_contract(&out, &clf);
    let d = &out.delta;
    assert!(d[0] > 0.0 && d[0].abs() > d[1].abs() && d[0].abs() > d[2].abs());
    // Optimal l1 cost moves only x0, by 0.675 / 2.
    assert!(out.l1_cost() < 0.3375 * 1.05, "cost {}", out.l1_cost());
}

#[test]
fn scfe_never_moves_frozen_columns() {
    let clf = MlpClassifier::linear(&[2.0, 0.5, 0.25], -1.5).unwrap();
    let x = [0.3, 0.3, 0.3];
    let out = scfe(&x, &clf, &[0], &BaselineConfig::default()).unwrap();
    assert_eq!(out.delta[0], 0.0);
    assert_eq!(out.counterfactual[0], x[0]);
    assert_contract(&out, &clf);
}

#[test]
fn baselines_reject_positive_instances() {
    let clf = MlpClassifier::linear(&[1.0, 1.0], -0.5).unwrap();
    let x = [0.9, 0.9];
    let config = BaselineConfig::default();
    assert!(scfe(&x, &clf, &[], &config).is_err());
    assert!(growing_spheres(&x, &clf, &[], &config).is_err());
    assert!(latent_gradient(&x, &clf, &identity_generator(2), &config).is_err());
}

#[test]
fn budgets_bound_classifier_calls() {
    // Unreachable target: every method runs until it exhausts its budget.
    let clf = MlpClassifier::linear(&[1.0, 1.0], -10.0).unwrap();
    let x = [0.5, 0.5];
    let gen = identity_generator(2);
    let config = BaselineConfig {
        budget: 157,
        ..BaselineConfig::default()
    };
    let runs: Vec<(&str, Box<dyn Fn(&dyn Classifier) -> RecourseOutcome>)> = vec![
        ("scfe", Box::new(|c| scfe(&x, c, &[], &config).unwrap())),
        ("gs", Box::new(|c| growing_spheres(&x, c, &[], &config).unwrap())),
        ("revise", Box::new(|c| latent_gradient(&x, c, &gen, &config).unwrap())),
        ("cchvae", Box::new(|c| latent_random(&x, c, &gen, &config).unwrap())),
    ];
    for (name, run) in runs {
        let outer = CountingClassifier::new(&clf, usize::MAX);
        let out = run(&outer);
        assert!(!out.success, "{name}");
        assert!(outer.calls() <= config.budget, "{name} used {} calls", outer.calls());
        assert!(outer.calls() > config.budget / 2, "{name} stopped early at {}", outer.calls());
    }
}

#[test]
fn growing_spheres_with_everything_frozen_fails_immediately() {
    let clf = MlpClassifier::linear(&[1.0, 1.0], -1.5).unwrap();
    let out = growing_spheres(&[0.2, 0.2], &clf, &[0, 1], &BaselineConfig::default()).unwrap();
    assert!(!out.success);
    assert_eq!(out.iterations, 0);
    assert_eq!(out.counterfactual, vec![0.2, 0.2]);
}

#[test]
fn growing_spheres_near_boundary_succeeds_early() {
    // f = x0 + x1 - 1, x sits 0.05 below the boundary along the l1 direction.
    let clf = MlpClassifier::linear(&[1.0, 1.0], -1.0).unwrap();
    let x = [0.475, 0.475];

    // Monte Carlo oracle for the first-round hit probability.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let trials = 200_000;
    let hits = (0..trials)
        .filter(|_| {
            let d = sample_l1_ball(&mut rng, 2, 0.1);
            d[0] + d[1] >= 0.05
        })
        .count();
    let p = hits as f64 / trials as f64;
    // Exact value: the l1 ball is a square in (d0 + d1, d0 - d1), so p = (r - c) / 2r.
    assert!((p - 0.25).abs() < 0.005, "per-sample hit rate {p}");
    let round_one = 1.0 - (1.0 - p).powi(100);
    assert!(round_one > 0.999);

    let mut successes = 0;
    for seed in 0..50 {
        let config = BaselineConfig {
            seed,
            ..BaselineConfig::default()
        };
        let out = growing_spheres(&x, &clf, &[], &config).unwrap();
        assert_contract(&out, &clf);
        if out.success && out.iterations <= 2 {
            successes += 1;
        }
    }
    assert!(successes >= 48, "{successes} of 50");
}

#[test]
fn growing_spheres_is_deterministic_per_seed() {
    let clf = MlpClassifier::linear(&[1.0, 0.5, -0.5], -0.8).unwrap();
    let x = [0.2, 0.4, 0.6];
    let config = BaselineConfig {
        seed: 7,
        ..BaselineConfig::default()
    };
    let a = growing_spheres(&x, &clf, &[2], &config).unwrap();
    let b = growing_spheres(&x, &clf, &[2], &config).unwrap();
    assert_eq!(a.counterfactual, b.counterfactual);
    assert_eq!(a.counterfactual[2], 0.6);
    assert!(a.success);
}

#[test]
fn latent_random_with_identity_coding_matches_growing_spheres() {
    let clf = MlpClassifier::linear(&[1.0, 0.5, 0.3], -1.0).unwrap();
    let gen = identity_generator(3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..10 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..0.4)).collect();
        let config = BaselineConfig {
            seed,
            ..BaselineConfig::default()
        };
        let gs = growing_spheres(&x, &clf, &[], &config).unwrap();
        let lr = latent_random(&x, &clf, &gen, &config).unwrap();
        assert_eq!(gs.counterfactual, lr.counterfactual);
        assert_eq!(gs.success, lr.success);
        assert_contract(&lr, &clf);
    }
}

#[test]
fn latent_gradient_with_identity_coding_matches_scfe_costs() {
    let clf = MlpClassifier::linear(&[1.2, 0.8, 0.4], -1.2).unwrap();
    let gen = identity_generator(3);
    let config = BaselineConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    while a.len() < 40 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..0.6)).collect();
        if clf.score(&x).unwrap() >= 0.0 {
            continue;
        }
        let s = scfe(&x, &clf, &[], &config).unwrap();
        let r = latent_gradient(&x, &clf, &gen, &config).unwrap();
        assert!(s.success && r.success);
        assert_contract(&r, &clf);
        a.push(s.l1_cost());
        b.push(r.l1_cost());
    }
    let med = |v: &mut Vec<f64>| crate::analysis::median(v).unwrap();
    let (ms, mr) = (med(&mut a), med(&mut b));
    assert!((mr - ms).abs() <= 0.1 * ms, "scfe {ms}, revise {mr}");
}

fn line_points(xs: &[f64]) -> Tensor {
    Tensor::from_rows(&xs.iter().map(|&v| vec![v, 0.0]).collect::<Vec<_>>()).unwrap()
}

#[test]
fn face_single_hop_returns_the_adjacent_positive() {
    let clf = MlpClassifier::linear(&[1.0, 0.0], -0.5).unwrap();
    let points = line_points(&[0.1, 0.6, 0.9]);
    let graph = FaceGraph::build(&points, &clf, FaceVariant::Epsilon(0.25)).unwrap();
    let out = graph.query(&[0.45, 0.0], &clf).unwrap();
    assert!(out.success);
    assert_eq!(out.counterfactual, vec![0.6, 0.0]);
    assert_eq!(out.method, FACE_E_METHOD);
}

#[test]
fn face_follows_paths_and_picks_nearest_positive() {
    let clf = MlpClassifier::linear(&[1.0, 0.0], -0.5).unwrap();
    let points = line_points(&[0.05, 0.2, 0.35, 0.55, 0.7, 0.95]);
    let graph = FaceGraph::build(&points, &clf, FaceVariant::Knn(2)).unwrap();
    let out = graph.query(&[0.0, 0.0], &clf).unwrap();
    assert!(out.success);
    assert_eq!(out.counterfactual, vec![0.55, 0.0]);
    assert!(out.iterations >= 4);
    assert!((out.trace[0] - 0.55).abs() < 1e-12);
}

#[test]
fn face_disconnected_positive_cluster_fails() {
    let clf = MlpClassifier::linear(&[1.0, 0.0], -0.5).unwrap();
    let points = line_points(&[0.1, 0.2, 0.3, 0.8, 0.9]);
    let graph = FaceGraph::build(&points, &clf, FaceVariant::Epsilon(0.15)).unwrap();
    let out = graph.query(&[0.15, 0.0], &clf).unwrap();
    assert!(!out.success);
    assert_eq!(out.iterations, 3);
}

#[test]
fn face_knn_graph_is_symmetric() {
    let clf = MlpClassifier::linear(&[1.0, 0.0], -0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random(), rng.random()]).collect();
    let graph = FaceGraph::build(&Tensor::from_rows(&rows).unwrap(), &clf, FaceVariant::Knn(3)).unwrap();
    for i in 0..graph.len() {
        assert!(graph.edges(i).len() >= 3);
        for &(j, w) in graph.edges(i) {
            assert!(graph.edges(j).iter().any(|&(k, w2)| k == i && w2 == w));
        }
    }
}
