//! Shared fixtures for the criterion benches.

use dear_core::autodiff::Tensor;
use dear_core::eval::SyntheticSetup;
use dear_core::models::{Activation, Classifier, Mlp};
use dear_core::ModelBundle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small synthetic bundle with the `{x1}` CAE already trained.
pub fn synthetic_bundle(n: usize) -> ModelBundle {
    let setup = SyntheticSetup::parse(&format!("n={n}")).expect("valid setup");
    let (bundle, _) = setup.build().expect("synthetic bundle");
    bundle.cae_for(&[0]).expect("cae for x1");
    bundle
}

/// First negatively classified test row.
pub fn negative_row(bundle: &ModelBundle) -> Vec<f64> {
    let clf = bundle.classifier();
    let test = bundle.test_set();
    (0..test.len())
        .map(|i| test.row(i))
        .find(|x| clf.score(x).unwrap() < clf.target_score())
        .expect("a negative row")
        .to_vec()
}

pub fn random_mlp(sizes: &[usize], seed: u64) -> Mlp {
    Mlp::new(sizes, Activation::Relu, &mut ChaCha8Rng::seed_from_u64(seed)).expect("valid sizes")
}

pub fn random_batch(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..rows * cols).map(|_| rng.random::<f64>()).collect();
    Tensor::new(rows, cols, values).expect("shape")
}
