use crate::autodiff::{Tape, Tensor};
use crate::models::{Classifier, Optimizer, OptimizerKind};
use crate::recourse::{check_negative, RecourseOutcome};
use crate::Result;

use super::config::BaselineConfig;
use super::counting::CountingClassifier;

pub const SCFE_METHOD: &str = "scfe";

/// Input-space counterfactual search: Adam on
/// `BCE(sigmoid(f(x + delta) - s), 1) + lambda |delta|_1`, halving `lambda`
/// after each unsuccessful stage. Columns in `frozen` never move.
pub fn scfe(x: &[f64], classifier: &dyn Classifier, frozen: &[usize], config: &BaselineConfig) -> Result<RecourseOutcome> {
    config.validate()?;
    let counter = CountingClassifier::new(classifier, config.budget);
    let target = counter.target_score();
    let (initial, grad) = counter.gradient(x)?;
    check_negative(initial, target)?;
    let params = &config.scfe;

    let mut opt = Optimizer::new(OptimizerKind::Adam, params.learning_rate);
    let mut point = Tensor::row_vector(x)?;
    let mut lambda = match params.initial_lambda {
        Some(l) => l,
        None => {
            let top = (0..x.len())
                .filter(|c| !frozen.contains(c))
                .map(|c| grad[c].abs())
                .fold(0.0, f64::max);
            if top > 0.0 {
                top
            } else {
                1.0
            }
        }
    };
    let mut trace = Vec::new();
    let mut iterations = 0;

    for _stage in 0..=params.halvings {
        for _ in 0..params.steps_per_lambda {
            if !counter.affords(1) {
                break;
            }
            let mut tape = Tape::new();
            let p = tape.leaf(point.clone());
            let xl = tape.leaf(Tensor::row_vector(x)?);
            let z = counter.logits(&mut tape, p)?;
            let score = tape.value(z).values()[0];
            trace.push(score);
            if score >= target {
                let mut out = RecourseOutcome::new(SCFE_METHOD, x, point.into_values(), score, target);
                out.iterations = iterations;
                out.trace = trace;
                return Ok(out);
            }
            let margin = tape.offset(z, -target)?;
            let neg = tape.scale(margin, -1.0)?;
            let bce = tape.softplus(neg);
            let bce = tape.sum(bce)?;
            let diff = tape.sub(p, xl)?;
            let a = tape.abs(diff);
            let l1 = tape.sum(a)?;
            let pen = tape.scale(l1, lambda)?;
            let loss = tape.add(bce, pen)?;
            let mut grad = tape.backward(loss)?.get(p);
            for &c in frozen {
                grad.values_mut()[c] = 0.0;
            }
            opt.step([&mut point], &[grad]);
            for v in point.values_mut() {
                *v = v.clamp(0.0, 1.0);
            }
            iterations += 1;
        }
        lambda *= 0.5;
    }
    let score = trace.last().copied().unwrap_or(initial);
    let mut out = RecourseOutcome::new(SCFE_METHOD, x, point.into_values(), score, target);
    out.success = false;
    out.iterations = iterations;
    out.trace = trace;
    Ok(out)
}
