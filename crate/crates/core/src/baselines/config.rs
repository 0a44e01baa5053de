use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScfeParams {
    /// Starting penalty weight; `None` uses the largest free-coordinate
    /// gradient magnitude of `f` at the factual, the smallest value at
    /// which `delta = 0` is stationary.
    pub initial_lambda: Option<f64>,
    /// Number of times lambda is halved after an unsuccessful stage.
    pub halvings: usize,
    pub steps_per_lambda: usize,
    pub learning_rate: f64,
}

impl Default for ScfeParams {
    fn default() -> Self {
        ScfeParams {
            initial_lambda: None,
            halvings: 8,
            steps_per_lambda: 100,
            learning_rate: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SphereParams {
    pub initial_radius: f64,
    pub growth: f64,
    pub rounds: usize,
    pub samples: usize,
}

impl Default for SphereParams {
    fn default() -> Self {
        SphereParams {
            initial_radius: 0.1,
            growth: 1.5,
            rounds: 20,
            samples: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatentParams {
    pub lambdas: Vec<f64>,
    pub max_steps: usize,
    pub learning_rate: f64,
}

impl Default for LatentParams {
    fn default() -> Self {
        LatentParams {
            lambdas: vec![1.0, 0.5, 0.1, 0.05],
            max_steps: 500,
            learning_rate: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaceParams {
    pub k: usize,
    pub epsilon: f64,
}

impl Default for FaceParams {
    fn default() -> Self {
        FaceParams { k: 50, epsilon: 0.25 }
    }
}

/// Parameters shared by every baseline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub seed: u64,
    /// Maximum classifier evaluations (rows scored) per instance.
    pub budget: usize,
    pub scfe: ScfeParams,
    pub spheres: SphereParams,
    pub latent: LatentParams,
    pub face: FaceParams,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            seed: 0,
            budget: 10_000,
            scfe: ScfeParams::default(),
            spheres: SphereParams::default(),
            latent: LatentParams::default(),
            face: FaceParams::default(),
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("baseline config: {what}")));
        if self.budget == 0 {
            return bad("budget must be positive");
        }
        if self.scfe.initial_lambda.is_some_and(|l| !(l > 0.0)) || !(self.scfe.learning_rate > 0.0) || self.scfe.steps_per_lambda == 0 {
            return bad("scfe needs positive lambda, learning rate and steps");
        }
        let s = &self.spheres;
        if !(s.initial_radius > 0.0) || !(s.growth > 1.0) || s.rounds == 0 || s.samples == 0 {
            return bad("spheres need radius > 0, growth > 1 and positive rounds/samples");
        }
        let l = &self.latent;
        if l.lambdas.is_empty() || l.lambdas.iter().any(|x| !(*x >= 0.0)) || l.max_steps == 0 || !(l.learning_rate > 0.0) {
            return bad("latent search needs lambdas >= 0, steps and a positive learning rate");
        }
        if self.face.k == 0 || !(self.face.epsilon > 0.0) {
            return bad("face needs k >= 1 and epsilon > 0");
        }
        Ok(())
    }
}
