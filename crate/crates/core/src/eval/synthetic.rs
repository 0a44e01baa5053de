use serde::{Deserialize, Serialize};

use crate::bundle::ModelBundle;
use crate::data::{split, SplitSpec, SyntheticLinear};
use crate::models::{CaeArchitecture, ClassifierArch, ClassifierFit, TrainConfig};
use crate::{Error, Result};

/// Everything needed to rebuild the synthetic benchmark bundle from scratch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSetup {
    pub n: usize,
    pub coupling: f64,
    pub noise: f64,
    pub seed: u64,
    pub immutable_x3: bool,
    pub train_fraction: f64,
    pub classifier: ClassifierArch,
    pub classifier_config: TrainConfig,
    pub cae_arch: CaeArchitecture,
    pub cae_config: TrainConfig,
}

impl Default for SyntheticSetup {
    fn default() -> Self {
        SyntheticSetup {
            n: 2000,
            coupling: 2.0,
            noise: 0.01,
            seed: 0,
            immutable_x3: false,
            train_fraction: 0.8,
            classifier: ClassifierArch::Linear,
            classifier_config: TrainConfig {
                learning_rate: 0.01,
                ..TrainConfig::classifier()
            },
            cae_arch: CaeArchitecture::synthetic(),
            cae_config: TrainConfig {
                epochs: 100,
                ..TrainConfig::default()
            },
        }
    }
}

impl SyntheticSetup {
    /// Parses `key=value` pairs separated by commas, e.g. `a=2,n=2000`.
    /// Keys: `a`, `n`, `noise`, `seed`, `gamma`, `epochs`, `immutable`
    /// (`x3` or `none`), `model` (`linear` or `ann`).
    pub fn parse(spec: &str) -> Result<Self> {
        let mut setup = SyntheticSetup::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got '{part}'")))?;
            let bad = || Error::Config(format!("bad value '{value}' for '{key}'"));
            match key.trim() {
                "a" => setup.coupling = value.parse().map_err(|_| bad())?,
                "n" => setup.n = value.parse().map_err(|_| bad())?,
                "noise" => setup.noise = value.parse().map_err(|_| bad())?,
                "seed" => setup.seed = value.parse().map_err(|_| bad())?,
                "gamma" => setup.cae_config.gamma = value.parse().map_err(|_| bad())?,
                "epochs" => {
                    let e = value.parse().map_err(|_| bad())?;
                    setup.cae_config.epochs = e;
                    setup.classifier_config.epochs = e;
                }
                "immutable" => {
                    setup.immutable_x3 = match value {
                        "x3" => true,
                        "none" => false,
                        _ => return Err(bad()),
                    }
                }
                "model" => {
                    setup.classifier = match value {
                        "linear" => ClassifierArch::Linear,
                        "ann" => ClassifierArch::Ann,
                        _ => return Err(bad()),
                    }
                }
                other => return Err(Error::Config(format!("unknown synthetic key '{other}'"))),
            }
        }
        Ok(setup)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Generates data, splits it and trains the classifier; every model
    /// seed follows `seed`.
    pub fn build(&self) -> Result<(ModelBundle, ClassifierFit)> {
        let mut generator = SyntheticLinear::new(self.n, self.coupling, self.noise, self.seed);
        generator.immutable_x3 = self.immutable_x3;
        let data = generator.generate()?;
        let (train, test) = split(&data, SplitSpec::new(self.train_fraction, self.seed)?)?;
        let classifier_config = TrainConfig {
            seed: self.seed,
            ..self.classifier_config.clone()
        };
        let cae_config = TrainConfig {
            seed: self.seed,
            ..self.cae_config.clone()
        };
        ModelBundle::train(train, test, self.classifier, &classifier_config, self.cae_arch.clone(), cae_config)
    }
}
