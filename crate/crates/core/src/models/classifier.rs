use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Dense, Mlp};
use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use crate::{Error, Result};

/// A scoring model `f` with decision rule `f(x) >= s`.
///
/// Implementors supply the tape form; the provided methods derive batch
/// scores, gradients and predictions from it.
pub trait Classifier: Send + Sync {
    fn input_dim(&self) -> usize;

    /// Score threshold `s` on the logit scale.
    fn target_score(&self) -> f64;

    /// Logits for a batch `x` (`n x d`), as an `n x 1` node.
    fn logits(&self, tape: &mut Tape, x: Var) -> Result<Var, AutodiffError>;

    fn scores(&self, x: &Tensor) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let z = self.logits(&mut tape, xv)?;
        Ok(tape.value(z).values().to_vec())
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.scores(&Tensor::row_vector(x)?)?[0])
    }

    /// Score and its gradient with respect to the input.
    fn gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut tape = Tape::new();
        let xv = tape.leaf(Tensor::row_vector(x)?);
        let z = self.logits(&mut tape, xv)?;
        let seed = tape.sum(z)?;
        let grads = tape.backward(seed)?;
        Ok((tape.value(z).values()[0], grads.get(xv).into_values()))
    }

    fn predict(&self, x: &[f64]) -> Result<bool> {
        Ok(self.score(x)? >= self.target_score())
    }
}

/// Feed-forward classifier with ReLU hidden layers and a scalar logit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifier {
    net: Mlp,
    /// Probability threshold; the score threshold is its logit.
    threshold: f64,
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl MlpClassifier {
    pub fn new(net: Mlp, threshold: f64) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::Config(format!("classifier must output one logit, got {}", net.output_dim())));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::Config(format!("threshold must lie in (0, 1), got {threshold}")));
        }
        Ok(MlpClassifier { net, threshold })
    }

    /// Logistic model `f(x) = w.x + b`.
    pub fn linear(weights: &[f64], bias: f64) -> Result<Self> {
        let layer = Dense {
            weight: Tensor::column_vector(weights)?,
            bias: Tensor::scalar(bias)?,
        };
        MlpClassifier::new(Mlp::from_layers(vec![layer], Activation::Relu)?, 0.5)
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub(crate) fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::Config(format!("threshold must lie in (0, 1), got {threshold}")));
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        Ok(1.0 / (1.0 + (-self.score(x)?).exp()))
    }
}

impl Classifier for MlpClassifier {
    fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn target_score(&self) -> f64 {
        logit(self.threshold)
    }

    fn logits(&self, tape: &mut Tape, x: Var) -> Result<Var, AutodiffError> {
        self.net.forward(tape, x)
    }

    fn scores(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(self.net.predict(x)?.into_values())
    }
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn target_score(&self) -> f64 {
        (**self).target_score()
    }
    fn logits(&self, tape: &mut Tape, x: Var) -> Result<Var, AutodiffError> {
        (**self).logits(tape, x)
    }
    fn scores(&self, x: &Tensor) -> Result<Vec<f64>> {
        (**self).scores(x)
    }
}

pub fn accuracy(clf: &dyn Classifier, x: &Tensor, labels: &[u8]) -> Result<f64> {
    if labels.is_empty() {
        return Ok(0.0);
    }
    let s = clf.target_score();
    let hits = clf
        .scores(x)?
        .iter()
        .zip(labels)
        .filter(|(z, &y)| (**z >= s) == (y == 1))
        .count();
    Ok(hits as f64 / labels.len() as f64)
}
