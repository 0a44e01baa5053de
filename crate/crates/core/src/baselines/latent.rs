use crate::autodiff::{Tape, Tensor};
use crate::models::{Classifier, Generator, Optimizer, OptimizerKind};
use crate::recourse::{check_negative, RecourseOutcome};
use crate::Result;

use super::config::BaselineConfig;
use super::counting::CountingClassifier;

pub const REVISE_METHOD: &str = "revise";

/// Gradient search over the latent code of a plain autoencoder:
/// `BCE(sigmoid(f(g(z)) - s), 1) + lambda |x - g(z)|_1`, one run per lambda,
/// keeping the cheapest success.
pub fn latent_gradient(x: &[f64], classifier: &dyn Classifier, generator: &dyn Generator, config: &BaselineConfig) -> Result<RecourseOutcome> {
    config.validate()?;
    let counter = CountingClassifier::new(classifier, config.budget);
    let target = counter.target_score();
    let initial = counter.score(x)?;
    check_negative(initial, target)?;
    let z0 = generator.latent_of(x)?;
    let x_s: Vec<f64> = generator.action_columns().iter().map(|&c| x[c]).collect();
    let params = &config.latent;

    let mut best: Option<RecourseOutcome> = None;
    let mut trace = Vec::new();
    let mut iterations = 0;
    'lambdas: for &lambda in &params.lambdas {
        let mut z = Tensor::row_vector(&z0)?;
        let mut opt = Optimizer::new(OptimizerKind::Adam, params.learning_rate);
        for _ in 0..params.max_steps {
            if !counter.affords(2) {
                break 'lambdas;
            }
            let mut tape = Tape::new();
            let zv = tape.leaf(z.clone());
            let sv = tape.leaf(Tensor::new(1, x_s.len(), x_s.clone())?);
            let xl = tape.leaf(Tensor::row_vector(x)?);
            let decoded = generator.decode(&mut tape, zv, sv)?;
            let logit = counter.logits(&mut tape, decoded)?;
            let raw = tape.value(decoded).values().to_vec();
            let candidate: Vec<f64> = raw.iter().map(|v| v.clamp(0.0, 1.0)).collect();
            let score = if candidate == raw {
                tape.value(logit).values()[0]
            } else {
                counter.score(&candidate)?
            };
            trace.push(score);
            if score >= target {
                let mut out = RecourseOutcome::new(REVISE_METHOD, x, candidate, score, target);
                if best.as_ref().is_none_or(|b| out.l1_cost() < b.l1_cost()) {
                    out.iterations = iterations;
                    best = Some(out);
                }
                continue 'lambdas;
            }
            let margin = tape.offset(logit, -target)?;
            let neg = tape.scale(margin, -1.0)?;
            let bce = tape.softplus(neg);
            let bce = tape.sum(bce)?;
            let diff = tape.sub(xl, decoded)?;
            let a = tape.abs(diff);
            let l1 = tape.sum(a)?;
            let pen = tape.scale(l1, lambda)?;
            let loss = tape.add(bce, pen)?;
            let grad = tape.backward(loss)?.get(zv);
            opt.step([&mut z], &[grad]);
            iterations += 1;
        }
    }
    let mut out = best.unwrap_or_else(|| RecourseOutcome::failure(REVISE_METHOD, x, initial, target));
    out.iterations = iterations;
    out.trace = trace;
    Ok(out)
}
