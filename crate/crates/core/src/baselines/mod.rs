//! Comparison methods: SCFE and growing spheres work feature-wise in input
//! space; the REVISE-like and CCHVAE-like searches move through the latent
//! space of a plain autoencoder; FACE walks a neighbourhood graph of
//! training points.
//!
//! Every counterfactual is clamped to `[0, 1]`. None of these methods
//! projects onto categorical or monotone constraints.

mod config;
mod counting;
mod face;
mod latent;
mod sampling;
mod scfe;
mod spheres;

pub use config::{BaselineConfig, FaceParams, LatentParams, ScfeParams, SphereParams};
pub use counting::CountingClassifier;
pub use face::{FaceGraph, FaceVariant, FACE_E_METHOD, FACE_K_METHOD};
pub use latent::{latent_gradient, REVISE_METHOD};
pub use sampling::sample_l1_ball;
pub use scfe::{scfe, SCFE_METHOD};
pub use spheres::{growing_spheres, latent_random, CCHVAE_METHOD, GS_METHOD};

#[cfg(test)]
mod tests;
