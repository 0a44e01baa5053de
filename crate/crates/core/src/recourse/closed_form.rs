use serde::{Deserialize, Serialize};

use crate::autodiff::{JacobianMethod, Tensor};
use crate::models::{decoder_jacobian, Classifier, Generator};
use crate::{Error, Result};

/// Closed-form minimiser of the linearised objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormAction {
    /// `d_S*`.
    pub action: Vec<f64>,
    /// `delta_x* = Y d_S*`.
    pub delta: Vec<f64>,
    /// `w = Y^T grad f(x)`.
    pub w: Vec<f64>,
    /// Logit gap `m = s - f(x)`.
    pub gap: f64,
    /// `Y = d g / d x_S`, `d x |S|`.
    pub jacobian: Tensor,
}

/// `d_S* = m w / (lambda + |w|^2)` with `w = Y^T grad f(x)`.
pub fn closed_form_action(
    x: &[f64],
    classifier: &dyn Classifier,
    generator: &dyn Generator,
    lambda: f64,
    target: f64,
) -> Result<ClosedFormAction> {
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
    }
    let columns = generator.action_columns();
    let v = generator.latent_of(x)?;
    let x_s: Vec<f64> = columns.iter().map(|&c| x[c]).collect();
    let full = decoder_jacobian(generator, &v, &x_s, JacobianMethod::Reverse)?;
    let k = v.len();
    let l = x_s.len();
    let y = full.select_columns(&(k..k + l).collect::<Vec<_>>());
    let (score, grad) = classifier.gradient(x)?;
    let gap = target - score;
    let w: Vec<f64> = (0..l).map(|j| (0..y.rows()).map(|i| y.get(i, j) * grad[i]).sum()).collect();
    let norm_sq: f64 = w.iter().map(|a| a * a).sum();
    let denom = lambda + norm_sq;
    if denom == 0.0 {
        return Err(Error::Degenerate("w = Y^T grad f(x) is zero and lambda = 0".into()));
    }
    let action: Vec<f64> = w.iter().map(|wi| gap * wi / denom).collect();
    let delta = (0..y.rows())
        .map(|i| (0..l).map(|j| y.get(i, j) * action[j]).sum())
        .collect();
    Ok(ClosedFormAction {
        action,
        delta,
        w,
        gap,
        jacobian: y,
    })
}
