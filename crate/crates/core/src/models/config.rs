use serde::{Deserialize, Serialize};

use super::hessian::{HessianMode, PenaltyForm};
use super::mlp::Activation;
use super::optim::OptimizerKind;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Hessian-penalty weight; ignored by classifier training.
    pub gamma: f64,
    /// Weight of the squared batch covariance between `v` and `x_S`;
    /// ignored by classifier training.
    #[serde(default)]
    pub independence: f64,
    /// Fraction of epochs over which `gamma` ramps linearly from 0.
    pub warmup_fraction: f64,
    pub hessian_epsilon: f64,
    pub hessian_mode: HessianMode,
    pub penalty_form: PenaltyForm,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 64,
            learning_rate: 0.002,
            optimizer: OptimizerKind::Adam,
            gamma: 0.1,
            independence: 1.0,
            warmup_fraction: 0.1,
            hessian_epsilon: 1e-2,
            hessian_mode: HessianMode::ExactLoop,
            penalty_form: PenaltyForm::SumOfSquares,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn classifier() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            gamma: 0.0,
            independence: 0.0,
            ..TrainConfig::default()
        }
    }

    /// Zero-epoch configs are allowed and return the initialisation.
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.independence >= 0.0 && self.independence.is_finite()) {
            return Err(Error::Config(format!("independence weight must be >= 0, got {}", self.independence)));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config("warm-up fraction must lie in [0, 1]".into()));
        }
        if !(self.hessian_epsilon > 0.0) {
            return Err(Error::Config(format!("hessian epsilon must be positive, got {}", self.hessian_epsilon)));
        }
        Ok(())
    }

    /// Penalty weight in effect during `epoch` (0-based).
    pub fn gamma_at(&self, epoch: usize) -> f64 {
        let ramp = (self.warmup_fraction * self.epochs as f64).ceil() as usize;
        if ramp == 0 {
            self.gamma
        } else {
            self.gamma * ((epoch + 1) as f64 / ramp as f64).min(1.0)
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierArch {
    /// Logistic regression.
    Linear,
    /// Hidden layers 18, 9, 3.
    #[default]
    Ann,
}

impl ClassifierArch {
    pub fn sizes(self, input_dim: usize) -> Vec<usize> {
        match self {
            ClassifierArch::Linear => vec![input_dim, 1],
            ClassifierArch::Ann => vec![input_dim, 18, 9, 3, 1],
        }
    }
}

/// Encoder/decoder shape. The code length counts both `v` and the
/// copied-through `x_S`, so `|v| = code_len - |S|` (at least 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaeArchitecture {
    pub encoder_hidden: Vec<usize>,
    pub code_len: usize,
    pub decoder_hidden: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl CaeArchitecture {
    /// Encoder `[d, 16, 32, 10]`, mirrored decoder.
    pub fn adult() -> Self {
        CaeArchitecture {
            encoder_hidden: vec![16, 32],
            code_len: 10,
            decoder_hidden: vec![32, 16],
            activation: Activation::Relu,
        }
    }

    /// Small net for the three-feature generator (intrinsic dimension 2).
    pub fn synthetic() -> Self {
        CaeArchitecture {
            encoder_hidden: vec![16, 16],
            code_len: 2,
            decoder_hidden: vec![16, 16],
            activation: Activation::Softplus,
        }
    }

    pub fn latent_dim(&self, action_dim: usize) -> usize {
        self.code_len.saturating_sub(action_dim).max(1)
    }
}
