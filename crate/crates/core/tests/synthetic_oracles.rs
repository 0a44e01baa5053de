//! Checks derived from the synthetic generator `x2 = a * x1 + noise`: what a
//! trained CAE and the search should reproduce when `a = 2`.

use std::sync::{Arc, OnceLock};

use dear_core::analysis::{jacobian_blocks, median, split_quadratic_cost};
use dear_core::autodiff::{jacobian, JacobianMethod};
use dear_core::data::synth_linear;
use dear_core::eval::SyntheticSetup;
use dear_core::models::{
    train_cae, Activation, CaeArchitecture, Classifier, Generator, Mlp, TrainConfig,
};
use dear_core::recourse::{
    alignment_score, dear_search, recourse_with_selection, CandidateStrategy, RecourseRequest,
};
use dear_core::ModelBundle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bundle() -> &'static ModelBundle {
    static BUNDLE: OnceLock<ModelBundle> = OnceLock::new();
    BUNDLE.get_or_init(|| SyntheticSetup::default().build().unwrap().0)
}

fn negatives(bundle: &ModelBundle, limit: usize) -> Vec<Vec<f64>> {
    let clf = bundle.classifier();
    let test = bundle.test_set();
    (0..test.len())
        .map(|i| test.row(i).to_vec())
        .filter(|x| clf.score(x).unwrap() < clf.target_score())
        .take(limit)
        .collect()
}

fn generator(bundle: &ModelBundle, columns: &[usize]) -> Arc<dyn Generator> {
    bundle.cae_for(columns).unwrap()
}

#[test]
fn reverse_and_central_difference_jacobians_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let net = Mlp::new(&[4, 8, 3], Activation::Softplus, &mut rng).unwrap();
        let at: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = |tape: &mut dear_core::Tape, z| net.forward(tape, z);
        let exact = jacobian(f, &at, JacobianMethod::Reverse).unwrap();
        let fd = jacobian(f, &at, JacobianMethod::finite_difference()).unwrap();
        let gap = exact
            .values()
            .iter()
            .zip(fd.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap < 1e-5, "max gap {gap}");
    }
}

#[test]
fn elasticity_of_x2_follows_the_coupling() {
    let bundle = bundle();
    let g = generator(bundle, &[0]);
    let test = bundle.test_set();
    // away from the clamp at x2 = 1
    let elasticities: Vec<f64> = (0..test.len())
        .map(|i| test.row(i))
        .filter(|x| x[0] < 0.45 && x[1] < 0.9)
        .map(|x| jacobian_blocks(g.as_ref(), x).unwrap().indirect.get(0, 0))
        .collect();
    assert!(elasticities.len() > 50);
    let mean = elasticities.iter().sum::<f64>() / elasticities.len() as f64;
    assert!((1.5..=2.5).contains(&mean), "mean elasticity {mean}");
}

#[test]
fn first_order_cost_matches_the_decoder_difference() {
    let bundle = bundle();
    let cae = bundle.cae_for(&[0]).unwrap();
    let test = bundle.test_set();
    for i in 0..20 {
        let x = test.row(i);
        if x[0] > 0.45 || x[1] > 0.9 {
            continue;
        }
        let d = 1e-2;
        let blocks = jacobian_blocks(cae.as_ref(), x).unwrap();
        let predicted = split_quadratic_cost(&blocks, &[d]).unwrap().total();
        let v = cae.latent_of(x).unwrap();
        let before = cae.decode_row(&v, &blocks.x_s).unwrap();
        let after = cae.decode_row(&v, &[blocks.x_s[0] + d]).unwrap();
        let actual: f64 = before.iter().zip(&after).map(|(a, b)| (b - a).powi(2)).sum();
        let rel = (predicted - actual).abs() / actual;
        assert!(rel < 0.05, "row {i}: predicted {predicted}, actual {actual}");
    }
}

#[test]
fn raising_x1_raises_x2() {
    let bundle = bundle();
    let g = generator(bundle, &[0]);
    let request = RecourseRequest {
        strategy: CandidateStrategy::Explicit(vec![0]),
        ..RecourseRequest::default()
    };
    let mut agree = 0;
    let mut moved = 0;
    for x in negatives(bundle, 60) {
        let out = dear_search(&x, bundle.classifier(), g.as_ref(), bundle.encoder(), &request).unwrap();
        assert!(out.success);
        let dx1 = out.counterfactual[0] - x[0];
        let dx2 = out.counterfactual[1] - x[1];
        if dx1.abs() > 1e-3 {
            moved += 1;
            agree += usize::from(dx1.signum() == dx2.signum());
        }
    }
    assert!(moved > 30, "only {moved} rows moved x1");
    assert!(agree as f64 >= 0.95 * moved as f64, "{agree} of {moved} agree in sign");
}

#[test]
fn x1_is_better_aligned_than_x3() {
    let bundle = bundle();
    let (g1, g3) = (generator(bundle, &[0]), generator(bundle, &[2]));
    let clf = bundle.classifier();
    let rows = negatives(bundle, 50);
    let a1: Vec<f64> = rows.iter().map(|x| alignment_score(x, clf, g1.as_ref()).unwrap()).collect();
    let a3: Vec<f64> = rows.iter().map(|x| alignment_score(x, clf, g3.as_ref()).unwrap()).collect();
    let (m1, m3) = (median(&a1).unwrap(), median(&a3).unwrap());
    assert!(m1 > m3, "alignment x1 {m1}, x3 {m3}");
}

#[test]
fn selection_is_no_worse_than_any_candidate() {
    let bundle = bundle();
    let provider = |columns: &[usize]| -> dear_core::Result<Arc<dyn Generator>> { Ok(generator(bundle, columns)) };
    let request = RecourseRequest::default();
    for x in negatives(bundle, 10) {
        let chosen = recourse_with_selection(&x, bundle.classifier(), bundle.encoder(), &provider, &request).unwrap();
        for f in 0..3 {
            let g = generator(bundle, &[f]);
            let single = dear_search(&x, bundle.classifier(), g.as_ref(), bundle.encoder(), &request).unwrap();
            if single.success {
                assert!(chosen.success);
                assert!(chosen.l1_cost() <= single.l1_cost() + 1e-12, "feature {f}");
            }
        }
    }
}

#[test]
fn realizable_target_is_fit_by_linear_nets() {
    let data = synth_linear(1000, 1.0, 0.0, 3).unwrap();
    let arch = CaeArchitecture {
        encoder_hidden: vec![4],
        code_len: 2,
        decoder_hidden: vec![4],
        activation: Activation::Identity,
    };
    let config = TrainConfig {
        epochs: 200,
        learning_rate: 0.01,
        gamma: 0.0,
        ..TrainConfig::default()
    };
    let fit = train_cae(&data, &[0], &arch, &config).unwrap();
    let loss = fit.losses.last().unwrap().reconstruction;
    assert!(loss < 1e-4, "final reconstruction {loss}");
    let out = fit.model.reconstruct_row(&[0.3, 0.3, 0.7]).unwrap();
    assert!((out[1] - 0.3).abs() < 0.02, "{out:?}");
}
