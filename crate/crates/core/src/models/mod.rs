//! Classifiers, the conditional autoencoder, and their training loops.

mod cae;
mod classifier;
mod config;
mod hessian;
mod mlp;
mod optim;
mod train;

pub use cae::{decoder_jacobian, BoundCae, ConditionalAutoencoder, Decoder, FnDecoder, FnGenerator, Generator};
pub use classifier::{accuracy, logit, Classifier, MlpClassifier};
pub use config::{CaeArchitecture, ClassifierArch, TrainConfig};
pub use hessian::{hessian_penalty, mixed_partials, HessianMode, PenaltyForm, MAX_EXACT_DIM};
pub use mlp::{Activation, BoundMlp, Dense, Mlp};
pub use optim::{Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use train::{
    reconstruction_error, reconstruction_loss, select_columns, train_cae, train_classifier, CaeFit, ClassifierFit,
    EpochLoss,
};
