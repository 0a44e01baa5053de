//! Low-cost algorithmic recourse for tabular classifiers under feature
//! dependencies.
//!
//! A conditional autoencoder splits each input into an actionable subset
//! `x_S` and a latent code `v` that is trained to be disentangled from it.
//! Recourse actions are searched over `x_S` only; the decoder propagates them
//! to the remaining features, so every suggested change carries its induced
//! (indirect) effects and their cost.
//!
//! Modules, bottom-up: [`autodiff`], [`data`], [`models`], [`recourse`],
//! [`analysis`], [`baselines`], [`eval`], with [`bundle`] for persistence.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod autodiff;
pub mod baselines;
pub mod bundle;
pub mod data;
mod error;
pub mod eval;
pub mod models;
pub mod recourse;

pub use autodiff::{Tape, Tensor, Var};
pub use bundle::ModelBundle;
pub use data::{EncodedDataset, FeatureSchema, TabularEncoder};
pub use error::{Error, Result};
pub use models::{ConditionalAutoencoder, MlpClassifier, TrainConfig};
pub use recourse::{RecourseOutcome, RecourseRequest};
