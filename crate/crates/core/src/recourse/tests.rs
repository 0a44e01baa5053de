use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::autodiff::{Tape, Tensor};
use crate::data::{Actionability, FeatureSchema, FeatureSpec, TabularEncoder};
use crate::models::{Classifier, FnDecoder, FnGenerator, Generator, MlpClassifier};
use crate::Error;

fn continuous_encoder(d: usize) -> TabularEncoder {
    let features = (0..d).map(|i| FeatureSpec::continuous(&format!("x{i}"))).collect();
    TabularEncoder::identity(FeatureSchema::new(features).unwrap())
}

/// `g(v, x_S) = [v, x_S] M + b` with a constant `M` (`(k + l) x d`).
fn linear_generator(m: Tensor, bias: Vec<f64>, columns: Vec<usize>, latent: Vec<usize>) -> FnGenerator {
    let (k, l, d) = (latent.len(), columns.len(), m.cols());
    let decoder = FnDecoder::new(k, l, d, move |tape: &mut Tape, v, s| {
        let z = if k == 0 { s } else { tape.concat_cols(&[v, s])? };
        let mm = tape.leaf(m.clone());
        let b = tape.leaf(Tensor::row_vector(&bias)?);
        let y = tape.matmul(z, mm)?;
        tape.add(y, b)
    });
    FnGenerator::new(decoder, columns, move |x| latent.iter().map(|&i| x[i]).collect())
}

/// The copy decoder `g(v, x_S) = [x_S, x_S]` over two columns with `S = {0}`.
fn copy_generator() -> FnGenerator {
    let m = Tensor::from_rows(&[vec![1.0, 1.0]]).unwrap();
    linear_generator(m, vec![0.0, 0.0], vec![0], vec![])
}

#[test]
fn closed_form_copy_decoder_example() {
    let clf = MlpClassifier::linear(&[1.0, 1.0], -0.6).unwrap();
    let x = [0.2, 0.2];
    let m = 1.0;
    let target = clf.score(&x).unwrap() + m;
    let cf = closed_form_action(&x, &clf, &copy_generator(), 0.0, target).unwrap();
    assert_eq!(cf.w, vec![2.0]);
    assert!((cf.action[0] - 0.5).abs() < 1e-12);
    assert!((cf.delta[0] - 0.5).abs() < 1e-12 && (cf.delta[1] - 0.5).abs() < 1e-12);
    let moved: Vec<f64> = x.iter().zip(&cf.delta).map(|(a, b)| a + b).collect();
    assert!((clf.score(&moved).unwrap() - clf.score(&x).unwrap() - m).abs() < 1e-12);
}

#[test]
fn closed_form_zero_gap_and_large_lambda() {
    let clf = MlpClassifier::linear(&[1.0, 1.0], -0.6).unwrap();
    let x = [0.2, 0.2];
    let s0 = clf.score(&x).unwrap();
    let cf = closed_form_action(&x, &clf, &copy_generator(), 0.0, s0).unwrap();
    assert_eq!(cf.action, vec![0.0]);
    assert!(cf.delta.iter().all(|&d| d == 0.0));
    let mut last = f64::INFINITY;
    for lambda in [0.0, 0.1, 1.0, 10.0, 1e3, 1e6] {
        let d = closed_form_action(&x, &clf, &copy_generator(), lambda, s0 + 1.0).unwrap().action[0];
        assert!(d < last && d > 0.0);
        last = d;
    }
    assert!(last < 1e-5);
}

#[test]
fn closed_form_degenerate_direction() {
    let clf = MlpClassifier::linear(&[1.0, -1.0], 0.0).unwrap();
    let err = closed_form_action(&[0.1, 0.3], &clf, &copy_generator(), 0.0, 0.0);
    assert!(matches!(err, Err(Error::Degenerate(_))));
}

fn identity_pair() -> FnGenerator {
    // S = {0}; v carries column 1 through unchanged.
    let m = Tensor::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    linear_generator(m, vec![0.0, 0.0], vec![0], vec![1])
}

#[test]
fn search_rejects_positive_instances() {
    let clf = MlpClassifier::linear(&[1.0, 1.0], -0.5).unwrap();
    let err = dear_search(&[0.6, 0.3], &clf, &identity_pair(), &continuous_encoder(2), &RecourseRequest::default());
    assert!(matches!(err, Err(Error::Precondition(_))));
}

#[test]
fn search_with_identity_decoder_has_monotone_trace() {
    let clf = MlpClassifier::linear(&[2.0, 1.0], -1.5).unwrap();
    let request = RecourseRequest {
        lambda: 0.0,
        step_rule: StepRule::Gradient,
        alpha: 0.01,
        target_margin: 0.5,
        ..RecourseRequest::default()
    };
    let x = [0.2, 0.4];
    let out = dear_search(&x, &clf, &identity_pair(), &continuous_encoder(2), &request).unwrap();
    assert!(out.success);
    assert!(out.score >= 0.0);
    assert!(out.trace.windows(2).all(|w| w[1] >= w[0]), "{:?}", out.trace);
    assert_eq!(out.counterfactual[1], 0.4);
    // m = 0.9, |df/dx_S| = 2: each gradient step gains 2 * alpha * 2 * 2 * gap.
    assert!(out.iterations <= 60, "{}", out.iterations);
    let recon: Vec<f64> = x.iter().zip(&out.delta).map(|(a, b)| a + b).collect();
    for (a, b) in recon.iter().zip(&out.counterfactual) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn monotone_and_immutable_projection_in_search() {
    let schema = FeatureSchema::new(vec![
        FeatureSpec::continuous("a"),
        FeatureSpec::continuous("b").with_actionability(Actionability::Immutable),
    ])
    .unwrap();
    let enc = TabularEncoder::identity(schema);
    // The decoder drags b along with a; projection must pin it.
    let m = Tensor::from_rows(&[vec![1.0, 1.0]]).unwrap();
    let generator = linear_generator(m, vec![0.0, 0.0], vec![0], vec![]);
    let clf = MlpClassifier::linear(&[1.0, 0.0], -0.5).unwrap();
    let out = dear_search(&[0.2, 0.2], &clf, &generator, &enc, &RecourseRequest::default()).unwrap();
    assert!(out.success);
    assert_eq!(out.counterfactual[1], 0.2);
    assert!(out.violations.iter().any(|v| v.kind == ViolationKind::Immutable));
    let bad = linear_generator(Tensor::from_rows(&[vec![1.0, 1.0]]).unwrap(), vec![0.0, 0.0], vec![1], vec![]);
    assert!(matches!(
        dear_search(&[0.2, 0.2], &clf, &bad, &enc, &RecourseRequest::default()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn replaying_the_action_reproduces_the_counterfactual() {
    let schema = FeatureSchema::new(vec![
        FeatureSpec::continuous("a"),
        FeatureSpec::continuous("b").with_actionability(Actionability::Immutable),
    ])
    .unwrap();
    let enc = TabularEncoder::identity(schema);
    let m = Tensor::from_rows(&[vec![1.0, 0.7]]).unwrap();
    let generator = linear_generator(m, vec![0.0, 0.05], vec![0], vec![]);
    let clf = MlpClassifier::linear(&[1.0, 0.0], -0.5).unwrap();
    let x = [0.2, 0.2];
    let out = dear_search(&x, &clf, &generator, &enc, &RecourseRequest::default()).unwrap();
    let action = out.action.clone().unwrap();
    let eval = evaluate_action(&x, &action, &clf, &generator, &enc, true).unwrap();
    assert_eq!(eval.counterfactual, out.counterfactual);
    assert_eq!(eval.score, out.score);

    let zero = evaluate_action(&x, &[0.0], &clf, &generator, &enc, true).unwrap();
    assert_eq!(zero.raw, generator.generate(&[], &[0.2]).unwrap());
    assert_eq!(zero.counterfactual[1], 0.2);
    assert!(matches!(
        evaluate_action(&x, &[0.1, 0.1], &clf, &generator, &enc, true),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn singleton_ranking() {
    let clf = MlpClassifier::linear(&[3.0, 1.0, 0.0], 0.0).unwrap();
    let enc = continuous_encoder(3);
    let c = select_singletons(&[1.0, 1.0, 1.0], &clf, &enc, 2).unwrap();
    assert_eq!(c.iter().map(|c| c.feature).collect::<Vec<_>>(), vec![0, 1]);
    let flat = MlpClassifier::linear(&[0.0, 0.0, 0.0], 0.0).unwrap();
    let c = select_singletons(&[0.5, 0.5, 0.5], &flat, &enc, 5).unwrap();
    assert_eq!(c.iter().map(|c| c.feature).collect::<Vec<_>>(), vec![0, 1, 2]);
}

#[test]
fn selection_prefers_success_then_cost() {
    let mk = |success: bool, cost: f64, s: usize| {
        let mut o = RecourseOutcome::new("dear", &[0.0], vec![cost], if success { 1.0 } else { -1.0 }, 0.0);
        o.s_columns = vec![s];
        o
    };
    let best = best_outcome(vec![mk(false, 0.1, 0), mk(true, 0.9, 1)]).unwrap();
    assert!(best.success);
    let best = best_outcome(vec![mk(true, 0.5, 2), mk(true, 0.3, 1), mk(true, 0.3, 0)]).unwrap();
    assert_eq!(best.s_columns, vec![0]);
}

#[test]
fn top_one_selection_equals_direct_search() {
    let clf = MlpClassifier::linear(&[2.0, 1.0], -1.5).unwrap();
    let enc = continuous_encoder(2);
    let provider = |cols: &[usize]| -> crate::Result<Arc<dyn Generator>> {
        let m = if cols == [0] {
            Tensor::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
        } else {
            Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
        };
        let latent = if cols == [0] { vec![1] } else { vec![0] };
        Ok(Arc::new(linear_generator(m, vec![0.0, 0.0], cols.to_vec(), latent)))
    };
    let request = RecourseRequest {
        strategy: CandidateStrategy::TopK(1),
        ..RecourseRequest::default()
    };
    let x = [0.2, 0.4];
    let picked = recourse_with_selection(&x, &clf, &enc, &provider, &request).unwrap();
    let direct = dear_search(&x, &clf, &identity_pair(), &enc, &request).unwrap();
    assert_eq!(picked, direct);
}

fn random_linear_instance() -> impl Strategy<Value = (Vec<f64>, f64, Vec<Vec<f64>>, Vec<f64>, usize, f64)> {
    (2usize..=6, 1usize..=2).prop_flat_map(|(d, l)| {
        (
            prop::collection::vec(-2.0..2.0f64, d),
            -1.0..0.0f64,
            prop::collection::vec(prop::collection::vec(-1.5..1.5f64, d), l),
            prop::collection::vec(0.1..0.9f64, d),
            Just(l),
            0.0..2.0f64,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_first_order_identity((w, b, rows, x, l, lambda) in random_linear_instance()) {
        let clf = MlpClassifier::linear(&w, b).unwrap();
        let d = w.len();
        let m = Tensor::from_rows(&rows).unwrap();
        let generator = linear_generator(m, vec![0.0; d], (0..l).collect(), vec![]);
        let target = clf.score(&x).unwrap() + 0.7;
        match closed_form_action(&x, &clf, &generator, lambda, target) {
            Ok(cf) => {
                let norm: f64 = cf.w.iter().map(|a| a * a).sum();
                let moved: Vec<f64> = x.iter().zip(&cf.delta).map(|(a, b)| a + b).collect();
                let gain = clf.score(&moved).unwrap() - clf.score(&x).unwrap();
                prop_assert!((gain - 0.7 * norm / (lambda + norm)).abs() < 1e-9);
                // Direction is invariant under positive rescaling of m.
                let cf2 = closed_form_action(&x, &clf, &generator, lambda, clf.score(&x).unwrap() + 2.1).unwrap();
                let n1: f64 = cf.action.iter().map(|a| a * a).sum::<f64>().sqrt();
                let n2: f64 = cf2.action.iter().map(|a| a * a).sum::<f64>().sqrt();
                for (a, b) in cf.action.iter().zip(&cf2.action) {
                    prop_assert!((a / n1 - b / n2).abs() < 1e-9);
                }
            }
            Err(Error::Degenerate(_)) => prop_assert!(lambda == 0.0),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn projection_is_idempotent(candidate in prop::collection::vec(-0.5..1.5f64, 6), factual in prop::collection::vec(0.0..1.0f64, 3)) {
        let schema = FeatureSchema::new(vec![
            FeatureSpec::continuous("a").with_actionability(Actionability::MonotoneIncrease),
            FeatureSpec::categorical("c", &["p", "q", "r"]),
            FeatureSpec::continuous("m").with_actionability(Actionability::MonotoneDecrease),
            FeatureSpec::binary("s").with_actionability(Actionability::Immutable),
        ]).unwrap();
        let enc = TabularEncoder::identity(schema);
        let hot = (factual[1] * 3.0) as usize % 3;
        let mut x = vec![factual[0], 0.0, 0.0, 0.0, factual[2], 1.0];
        x[1 + hot] = 1.0;
        let once = apply_constraints(&candidate, &x, &enc);
        let twice = apply_constraints(&once.x, &x, &enc);
        prop_assert_eq!(&once.x, &twice.x);
        prop_assert!(once.x.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(once.x[5], 1.0);
        prop_assert!(once.x[0] >= x[0] && once.x[4] <= x[4]);
    }
}
