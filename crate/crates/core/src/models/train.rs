use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cae::{BoundCae, ConditionalAutoencoder, Decoder};
use super::classifier::{accuracy, MlpClassifier};
use super::config::{CaeArchitecture, ClassifierArch, TrainConfig};
use super::hessian::hessian_penalty;
use super::mlp::{Activation, Mlp};
use super::optim::Optimizer;
use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use crate::data::EncodedDataset;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierFit {
    pub model: MlpClassifier,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    /// Mean binary cross-entropy per epoch.
    pub losses: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub reconstruction: f64,
    pub penalty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaeFit {
    pub model: ConditionalAutoencoder,
    pub losses: Vec<EpochLoss>,
}

fn diverged(epoch: usize) -> impl Fn(AutodiffError) -> Error {
    move |e| Error::Diverged {
        epoch,
        detail: e.to_string(),
    }
}

fn batches(n: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(size).map(<[usize]>::to_vec).collect()
}

/// Mean over rows of the squared Euclidean error between `recon` and `x`.
pub fn reconstruction_error(tape: &mut Tape, recon: Var, x: Var) -> Result<Var, AutodiffError> {
    let rows = tape.shape(x).0.max(1);
    let diff = tape.sub(recon, x)?;
    let sq = tape.square(diff)?;
    let total = tape.sum(sq)?;
    tape.scale(total, 1.0 / rows as f64)
}

/// `x_S` as a node, via a constant selection matrix.
pub fn select_columns(tape: &mut Tape, x: Var, columns: &[usize]) -> Result<Var, AutodiffError> {
    let d = tape.shape(x).1;
    let mut sel = Tensor::zeros(d, columns.len());
    let values = sel.values_mut();
    for (j, &c) in columns.iter().enumerate() {
        values[c * columns.len() + j] = 1.0;
    }
    let sel = tape.leaf(sel);
    tape.matmul(x, sel)
}

/// Reconstruction loss of a bound autoencoder on a batch; also returns `v`.
pub fn reconstruction_loss(tape: &mut Tape, cae: &BoundCae<'_>, s_columns: &[usize], x: Var) -> Result<(Var, Var), AutodiffError> {
    let v = cae.encode(tape, x)?;
    let x_s = select_columns(tape, x, s_columns)?;
    let recon = cae.decode(tape, v, x_s)?;
    Ok((reconstruction_error(tape, recon, x)?, v))
}

/// Sum of squared batch covariances between the code `v` (`B x k`) and the
/// data columns `x_s` (`B x l`).
pub fn cross_covariance_penalty(tape: &mut Tape, v: Var, x_s: &Tensor) -> Result<Var, AutodiffError> {
    let (b, l) = (x_s.rows(), x_s.cols());
    let mut centred = Tensor::zeros(l, b);
    let values = centred.values_mut();
    for j in 0..l {
        let mean = (0..b).map(|i| x_s.get(i, j)).sum::<f64>() / b as f64;
        for i in 0..b {
            values[j * b + i] = (x_s.get(i, j) - mean) / b as f64;
        }
    }
    let centred = tape.leaf(centred);
    let cov = tape.matmul(centred, v)?;
    let sq = tape.square(cov)?;
    tape.sum(sq)
}

/// Narrow ReLU stacks occasionally collapse to a constant output; such runs
/// are repeated on a fresh stream of the same seed.
const MAX_CLASSIFIER_ATTEMPTS: u64 = 5;

/// Trains a classifier by minimising mean binary cross-entropy of the logit.
pub fn train_classifier(
    train: &EncodedDataset,
    test: Option<&EncodedDataset>,
    arch: ClassifierArch,
    config: &TrainConfig,
) -> Result<ClassifierFit> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let mut attempt = 0;
    loop {
        let fit = train_classifier_once(train, test, arch, config, attempt)?;
        let scores = fit.model.net().predict(&train.x)?;
        let spread = scores.values().iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - scores.values().iter().fold(f64::INFINITY, |a, &b| a.min(b));
        attempt += 1;
        if config.epochs == 0 || spread > 1e-9 || attempt == MAX_CLASSIFIER_ATTEMPTS {
            return Ok(fit);
        }
    }
}

fn train_classifier_once(
    train: &EncodedDataset,
    test: Option<&EncodedDataset>,
    arch: ClassifierArch,
    config: &TrainConfig,
    attempt: u64,
) -> Result<ClassifierFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(attempt);
    let net = Mlp::new(&arch.sizes(train.dim()), Activation::Relu, &mut rng)?;
    let mut model = MlpClassifier::new(net, 0.5)?;
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate);
    let mut losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut total = 0.0;
        for batch in batches(train.len(), config.batch_size, &mut rng) {
            let mut tape = Tape::new();
            let bound = model.net().bind(&mut tape);
            let x = tape.leaf(train.x.select_rows(&batch));
            let y = Tensor::from_parts(batch.len(), 1, batch.iter().map(|&i| f64::from(train.labels[i])).collect());
            let y = tape.leaf(y);
            let step = |tape: &mut Tape| -> Result<Var, AutodiffError> {
                let z = bound.forward(tape, x)?;
                let sp = tape.softplus(z);
                let yz = tape.mul(y, z)?;
                let l = tape.sub(sp, yz)?;
                tape.mean(l)
            };
            let loss = step(&mut tape).map_err(diverged(epoch))?;
            let value = tape.value(loss).values()[0];
            if !value.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: "non-finite cross-entropy".into(),
                });
            }
            total += value * batch.len() as f64;
            let mut grads = tape.backward(loss).map_err(diverged(epoch))?;
            let grads: Vec<Tensor> = bound.parameters().map(|p| grads.take(p)).collect();
            opt.step(model.net_mut().parameters_mut(), &grads);
        }
        losses.push(total / train.len() as f64);
    }
    let train_accuracy = accuracy(&model, &train.x, &train.labels)?;
    let test_accuracy = test.map(|t| accuracy(&model, &t.x, &t.labels)).transpose()?;
    Ok(ClassifierFit {
        model,
        train_accuracy,
        test_accuracy,
        losses,
    })
}

/// Trains a conditional autoencoder for action columns `s_columns`,
/// minimising reconstruction loss plus the warm-up-weighted Hessian penalty
/// (computed on a detached `v`, per batch). An empty `s_columns` trains a
/// plain autoencoder without penalty.
pub fn train_cae(
    train: &EncodedDataset,
    s_columns: &[usize],
    arch: &CaeArchitecture,
    config: &TrainConfig,
) -> Result<CaeFit> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let immutable = train.encoder.immutable_columns();
    if let Some(c) = s_columns.iter().find(|c| immutable.contains(c)) {
        return Err(Error::Precondition(format!("action set contains immutable column {c}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let groups = train.encoder.categorical_groups();
    let mut model = ConditionalAutoencoder::new(train.dim(), s_columns.to_vec(), groups, arch, &mut rng)?;
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate);
    let mut losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let gamma = config.gamma_at(epoch);
        let (mut rec_total, mut pen_total) = (0.0, 0.0);
        for batch in batches(train.len(), config.batch_size, &mut rng) {
            let mut tape = Tape::new();
            let bound = model.bind(&mut tape);
            let x = tape.leaf(train.x.select_rows(&batch));
            let (rec, v) = reconstruction_loss(&mut tape, &bound, s_columns, x).map_err(diverged(epoch))?;
            let mut loss = rec;
            let mut penalty_value = 0.0;
            if config.independence > 0.0 && !s_columns.is_empty() {
                let x_s = train.x.select_rows(&batch).select_columns(s_columns);
                let cov = cross_covariance_penalty(&mut tape, v, &x_s).map_err(diverged(epoch))?;
                let weighted = tape.scale(cov, config.independence).map_err(diverged(epoch))?;
                loss = tape.add(loss, weighted).map_err(diverged(epoch))?;
            }
            if gamma > 0.0 && !s_columns.is_empty() {
                let v_detached = tape.leaf(tape.value(v).clone());
                let x_s = tape.leaf(train.x.select_rows(&batch).select_columns(s_columns));
                let pen = hessian_penalty(
                    &mut tape,
                    &bound,
                    v_detached,
                    x_s,
                    config.hessian_epsilon,
                    config.hessian_mode,
                    config.penalty_form,
                    &mut rng,
                )
                .map_err(|e| match e {
                    Error::Autodiff(a) => diverged(epoch)(a),
                    other => other,
                })?;
                penalty_value = tape.value(pen).values()[0];
                let weighted = tape.scale(pen, gamma).map_err(diverged(epoch))?;
                loss = tape.add(loss, weighted).map_err(diverged(epoch))?;
            }
            let rec_value = tape.value(rec).values()[0];
            if !rec_value.is_finite() || !penalty_value.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: "non-finite autoencoder loss".into(),
                });
            }
            rec_total += rec_value * batch.len() as f64;
            pen_total += penalty_value * batch.len() as f64;
            let mut grads = tape.backward(loss).map_err(diverged(epoch))?;
            let grads: Vec<Tensor> = bound.parameters().into_iter().map(|p| grads.take(p)).collect();
            let (enc, dec) = model.networks_mut();
            opt.step(enc.parameters_mut().chain(dec.parameters_mut()), &grads);
        }
        losses.push(EpochLoss {
            reconstruction: rec_total / train.len() as f64,
            penalty: pen_total / train.len() as f64,
        });
    }
    Ok(CaeFit { model, losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_linear, FeatureSchema, FeatureSpec, TabularEncoder};
    use crate::models::Classifier;
    use rand::Rng;
    use std::sync::Arc;

    fn blobs(n: usize, seed: u64) -> EncodedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y = (i % 2) as u8;
            let c = if y == 1 { 0.75 } else { 0.25 };
            values.push((c + rng.random_range(-0.15..0.15f64)).clamp(0.0, 1.0));
            values.push((c + rng.random_range(-0.15..0.15f64)).clamp(0.0, 1.0));
            labels.push(y);
        }
        let schema = FeatureSchema::new(vec![FeatureSpec::continuous("a"), FeatureSpec::continuous("b")]).unwrap();
        EncodedDataset::new(Tensor::new(n, 2, values).unwrap(), labels, Arc::new(TabularEncoder::identity(schema))).unwrap()
    }

    #[test]
    fn separable_blobs_are_learned() {
        let train = blobs(400, 1);
        let test = blobs(200, 2);
        let cfg = TrainConfig {
            epochs: 60,
            learning_rate: 0.01,
            ..TrainConfig::classifier()
        };
        let fit = train_classifier(&train, Some(&test), ClassifierArch::Ann, &cfg).unwrap();
        assert!(fit.test_accuracy.unwrap() >= 0.98, "{:?} {:?}", fit.test_accuracy, fit.losses);
        let again = train_classifier(&train, Some(&test), ClassifierArch::Ann, &cfg).unwrap();
        assert_eq!(fit.model, again.model);
    }

    #[test]
    fn zero_epochs_is_chance_level() {
        let data = blobs(400, 3);
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::classifier()
        };
        let fit = train_classifier(&data, None, ClassifierArch::Ann, &cfg).unwrap();
        assert!((fit.train_accuracy - 0.5).abs() <= 0.1, "{}", fit.train_accuracy);
        assert!(fit.losses.is_empty());
        assert!(fit.model.predict(&[0.1, 0.1]).is_ok());
    }

    #[test]
    fn reconstruction_error_of_zero_output() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::filled(1, 4, 1.0));
        let g = tape.leaf(Tensor::zeros(1, 4));
        let l = reconstruction_error(&mut tape, g, x).unwrap();
        assert_eq!(tape.value(l).values(), &[4.0]);
    }

    #[test]
    fn cae_loss_decreases_early() {
        let data = synth_linear(600, 2.0, 0.01, 8).unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            learning_rate: 0.005,
            ..TrainConfig::default()
        };
        let fit = train_cae(&data, &[0], &CaeArchitecture::synthetic(), &cfg).unwrap();
        let r: Vec<f64> = fit.losses.iter().map(|l| l.reconstruction).collect();
        assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
    }

    #[test]
    fn cross_covariance_of_linear_code() {
        let x = Tensor::column_vector(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        let mut tape = Tape::new();
        // v = 2 x + 1: covariance 2 var(x) = 2.5
        let v = tape.leaf(x.map(|t| 2.0 * t + 1.0));
        let p = cross_covariance_penalty(&mut tape, v, &x).unwrap();
        assert!((tape.value(p).values()[0] - 6.25).abs() < 1e-12);
        let grads = tape.backward(p).unwrap();
        let g = grads.get(v);
        for (i, gi) in g.values().iter().enumerate() {
            let expected = 2.0 * 2.5 * (i as f64 - 1.5) / 4.0;
            assert!((gi - expected).abs() < 1e-12);
        }

        let mut tape = Tape::new();
        let flat = tape.leaf(Tensor::column_vector(&[0.3; 4]).unwrap());
        let p = cross_covariance_penalty(&mut tape, flat, &x).unwrap();
        assert!(tape.value(p).values()[0].abs() < 1e-15);
    }

    #[test]
    fn immutable_action_column_is_rejected() {
        let data = crate::data::SyntheticLinear::new(50, 1.0, 0.0, 0).with_immutable_x3().generate().unwrap();
        let err = train_cae(&data, &[2], &CaeArchitecture::synthetic(), &TrainConfig::default());
        assert!(matches!(err, Err(Error::Precondition(_))));
    }
}
