use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First-order optimizer over an ordered list of parameter tensors.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Optimizer {
            kind,
            lr,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    /// Applies one update. `grads[i]` must match the shape of the i-th parameter.
    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Tensor>, grads: &[Tensor]) {
        self.step += 1;
        if self.m.is_empty() && self.kind == OptimizerKind::Adam {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        let (c1, c2) = (
            1.0 - ADAM_BETA1.powi(self.step),
            1.0 - ADAM_BETA2.powi(self.step),
        );
        for (i, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let values = p.values_mut();
            match self.kind {
                OptimizerKind::Sgd => {
                    for (w, d) in values.iter_mut().zip(g.values()) {
                        *w -= self.lr * d;
                    }
                }
                OptimizerKind::Adam => {
                    let (m, v) = (&mut self.m[i], &mut self.v[i]);
                    for (j, (w, d)) in values.iter_mut().zip(g.values()).enumerate() {
                        m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * d;
                        v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * d * d;
                        *w -= self.lr * (m[j] / c1) / ((v[j] / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}
