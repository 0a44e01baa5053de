use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use crate::data::{Actionability, TabularEncoder};
use crate::models::{Classifier, Generator, Optimizer, OptimizerKind};
use crate::{Error, Result};

use serde::{Deserialize, Serialize};

use super::constraints::{apply_constraints, Violation};
use super::types::{RecourseOutcome, RecourseRequest, StepRule};

pub const DEAR_METHOD: &str = "dear";

/// Raw features whose encoded columns intersect `columns`.
pub fn features_of_columns(encoder: &TabularEncoder, columns: &[usize]) -> Vec<usize> {
    let mut features: Vec<usize> = columns.iter().map(|&c| encoder.columns()[c].feature).collect();
    features.sort_unstable();
    features.dedup();
    features
}

pub(crate) fn check_action_set(encoder: &TabularEncoder, columns: &[usize]) -> Result<()> {
    if columns.is_empty() {
        return Err(Error::Precondition("action set S is empty".into()));
    }
    if let Some(c) = columns.iter().find(|&&c| c >= encoder.width()) {
        return Err(Error::Precondition(format!("action column {c} out of range")));
    }
    let immutable = encoder.immutable_columns();
    if let Some(c) = columns.iter().find(|c| immutable.contains(c)) {
        return Err(Error::Precondition(format!(
            "action set contains immutable column '{}'",
            encoder.columns()[*c].name
        )));
    }
    Ok(())
}

pub(crate) fn check_negative(score: f64, target: f64) -> Result<()> {
    if score >= target {
        return Err(Error::Precondition(format!(
            "instance already has score {score:.6} >= target {target:.6}; no recourse needed"
        )));
    }
    Ok(())
}

/// Column masks for the monotone hinge terms.
fn monotone_masks(encoder: &TabularEncoder) -> (Vec<f64>, Vec<f64>) {
    let width = encoder.width();
    let (mut up, mut down) = (vec![0.0; width], vec![0.0; width]);
    for (f, spec) in encoder.schema().features().iter().enumerate() {
        let cols = encoder.feature_columns(f);
        if cols.len() != 1 {
            continue;
        }
        match spec.actionability {
            Actionability::MonotoneIncrease => up[cols.start] = 1.0,
            Actionability::MonotoneDecrease => down[cols.start] = 1.0,
            _ => {}
        }
    }
    (up, down)
}

struct Surrogate<'a> {
    x: &'a [f64],
    v: &'a [f64],
    x_s: &'a [f64],
    target: f64,
    up: Option<Tensor>,
    down: Option<Tensor>,
}

impl Surrogate<'_> {
    /// `(z - target)^2 + lambda * |x - x_hat|_1 + hinge`, and its gradient in `d`.
    fn value_and_grad(
        &self,
        clf: &dyn Classifier,
        generator: &dyn Generator,
        d: &Tensor,
        lambda: f64,
        monotone_weight: f64,
    ) -> Result<(f64, Tensor), AutodiffError> {
        let mut tape = Tape::new();
        let dv = tape.leaf(d.clone());
        let xs = tape.leaf(Tensor::new(1, self.x_s.len(), self.x_s.to_vec())?);
        let v = tape.leaf(Tensor::new(1, self.v.len(), self.v.to_vec())?);
        let xl = tape.leaf(Tensor::row_vector(self.x)?);
        let s_in = tape.add(xs, dv)?;
        let x_hat = generator.decode(&mut tape, v, s_in)?;
        let z = clf.logits(&mut tape, x_hat)?;
        let gap = tape.offset(z, -self.target)?;
        let sq = tape.square(gap)?;
        let mut loss = tape.sum(sq)?;
        let diff = tape.sub(xl, x_hat)?;
        if lambda > 0.0 {
            let a = tape.abs(diff);
            let l1 = tape.sum(a)?;
            let weighted = tape.scale(l1, lambda)?;
            loss = tape.add(loss, weighted)?;
        }
        let hinge = |tape: &mut Tape, mask: &Option<Tensor>, sign: f64| -> Result<Option<Var>, AutodiffError> {
            let Some(mask) = mask else { return Ok(None) };
            let signed = tape.scale(diff, sign)?;
            let r = tape.relu(signed);
            let m = tape.leaf(mask.clone());
            let masked = tape.mul(r, m)?;
            let total = tape.sum(masked)?;
            Ok(Some(tape.scale(total, monotone_weight)?))
        };
        // Increase: penalise x - x_hat > 0. Decrease: penalise x_hat - x > 0.
        for term in [hinge(&mut tape, &self.up, 1.0)?, hinge(&mut tape, &self.down, -1.0)?]
            .into_iter()
            .flatten()
        {
            loss = tape.add(loss, term)?;
        }
        let value = tape.value(loss).values()[0];
        let grads = tape.backward(loss)?;
        Ok((value, grads.get(dv)))
    }
}

/// A decoded, projected and scored direct action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionEvaluation {
    /// Decoder output before projection.
    pub raw: Vec<f64>,
    pub counterfactual: Vec<f64>,
    pub score: f64,
    pub violations: Vec<Violation>,
}

#[allow(clippy::too_many_arguments)]
fn evaluate_at(
    x: &[f64],
    v: &[f64],
    x_s: &[f64],
    d: &[f64],
    classifier: &dyn Classifier,
    generator: &dyn Generator,
    encoder: &TabularEncoder,
    enforce_constraints: bool,
) -> Result<ActionEvaluation> {
    let shifted: Vec<f64> = x_s.iter().zip(d).map(|(a, b)| a + b).collect();
    let raw = generator.generate(v, &shifted)?;
    let (counterfactual, violations) = if enforce_constraints {
        let p = apply_constraints(&raw, x, encoder);
        (p.x, p.violations)
    } else {
        (raw.clone(), Vec::new())
    };
    let score = classifier.score(&counterfactual)?;
    Ok(ActionEvaluation {
        raw,
        counterfactual,
        score,
        violations,
    })
}

/// Decodes `(e(x), x_S + d_S)` with the generator's action set, projects it
/// when `enforce_constraints` is set and scores it. Replaying the action of
/// a DEAR outcome reproduces its counterfactual exactly.
pub fn evaluate_action(
    x: &[f64],
    d_s: &[f64],
    classifier: &dyn Classifier,
    generator: &dyn Generator,
    encoder: &TabularEncoder,
    enforce_constraints: bool,
) -> Result<ActionEvaluation> {
    let columns = generator.action_columns();
    if x.len() != encoder.width() {
        return Err(Error::Precondition(format!(
            "instance has {} columns, encoder expects {}",
            x.len(),
            encoder.width()
        )));
    }
    if d_s.len() != columns.len() {
        return Err(Error::Precondition(format!(
            "action has {} entries but S has {} columns",
            d_s.len(),
            columns.len()
        )));
    }
    let v = generator.latent_of(x)?;
    let x_s: Vec<f64> = columns.iter().map(|&c| x[c]).collect();
    evaluate_at(x, &v, &x_s, d_s, classifier, generator, encoder, enforce_constraints)
}

/// DEAR search for one action set: descends on `d_S` in the code
/// `(v, x_S + d_S)` until the projected decoder output reaches the target
/// score or the iteration budget runs out.
pub fn dear_search(
    x: &[f64],
    classifier: &dyn Classifier,
    generator: &dyn Generator,
    encoder: &TabularEncoder,
    request: &RecourseRequest,
) -> Result<RecourseOutcome> {
    request.validate()?;
    if x.len() != encoder.width() || x.len() != classifier.input_dim() {
        return Err(Error::Precondition(format!(
            "instance has {} columns, encoder expects {}",
            x.len(),
            encoder.width()
        )));
    }
    let columns = generator.action_columns().to_vec();
    check_action_set(encoder, &columns)?;
    let target = request.target.unwrap_or_else(|| classifier.target_score());
    check_negative(classifier.score(x)?, target)?;

    let v = generator.latent_of(x)?;
    let x_s: Vec<f64> = columns.iter().map(|&c| x[c]).collect();
    let (up, down) = monotone_masks(encoder);
    let to_mask = |m: Vec<f64>| m.iter().any(|&b| b > 0.0).then(|| Tensor::from_parts(1, m.len(), m));
    let surrogate = Surrogate {
        x,
        v: &v,
        x_s: &x_s,
        target: target + request.target_margin,
        up: to_mask(up),
        down: to_mask(down),
    };

    let project = |d: &[f64]| evaluate_at(x, &v, &x_s, d, classifier, generator, encoder, request.enforce_constraints);

    let kind = match request.step_rule {
        StepRule::Gradient => OptimizerKind::Sgd,
        StepRule::Adam => OptimizerKind::Adam,
    };
    let mut opt = Optimizer::new(kind, request.alpha);
    let mut d = Tensor::zeros(1, columns.len());
    let mut lambda = request.lambda;
    let mut restarted = false;
    let mut stall_anchor = 0;
    let mut trace = Vec::with_capacity(request.max_iterations + 1);

    let mut iteration = 0;
    let (mut cf, mut score, mut violations);
    loop {
        let eval = project(d.values())?;
        (cf, score, violations) = (eval.counterfactual, eval.score, eval.violations);
        trace.push(score);
        if score >= target || iteration == request.max_iterations {
            break;
        }
        if !restarted
            && iteration - stall_anchor >= request.stall_window
            && trace[iteration] - trace[iteration - request.stall_window] < request.stall_tolerance
        {
            lambda *= 0.5;
            restarted = true;
            stall_anchor = iteration;
        }
        iteration += 1;
        let (loss, grad) = surrogate
            .value_and_grad(classifier, generator, &d, lambda, request.monotone_weight)
            .map_err(|_| Error::NonFiniteLoss { iteration })?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration });
        }
        opt.step([&mut d], &[grad]);
        for (di, &si) in d.values_mut().iter_mut().zip(&x_s) {
            *di = di.clamp(-si, 1.0 - si);
        }
    }

    let mut outcome = RecourseOutcome::new(DEAR_METHOD, x, cf, score, target);
    outcome.action = Some(d.into_values());
    outcome.s_features = features_of_columns(encoder, &columns);
    outcome.s_columns = columns;
    outcome.iterations = iteration;
    outcome.trace = trace;
    outcome.violations = violations;
    debug_assert!(!outcome.success || outcome.score >= target);
    Ok(outcome)
}
