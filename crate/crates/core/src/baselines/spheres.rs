use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tensor;
use crate::models::{Classifier, Generator};
use crate::recourse::{check_negative, RecourseOutcome};
use crate::Result;

use super::config::{BaselineConfig, SphereParams};
use super::counting::CountingClassifier;
use super::sampling::sample_l1_ball;

pub const GS_METHOD: &str = "gs";
pub const CCHVAE_METHOD: &str = "cchvae";

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum()
}

/// Shared growing-radius loop: each round draws `samples` perturbations of
/// dimension `dims` from the l1 ball, maps them to candidates with
/// `propose`, and returns the cheapest success of the first successful round.
fn sphere_search(
    method: &str,
    x: &[f64],
    counter: &CountingClassifier<'_>,
    dims: usize,
    params: &SphereParams,
    seed: u64,
    mut propose: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<RecourseOutcome> {
    let target = counter.target_score();
    let initial = counter.score(x)?;
    check_negative(initial, target)?;
    if dims == 0 {
        return Ok(RecourseOutcome::failure(method, x, initial, target));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = Vec::new();
    let mut radius = params.initial_radius;
    for round in 0..params.rounds {
        if !counter.affords(params.samples) {
            break;
        }
        let mut rows = Vec::with_capacity(params.samples);
        for _ in 0..params.samples {
            rows.push(propose(&sample_l1_ball(&mut rng, dims, radius))?);
        }
        let scores = counter.scores(&Tensor::from_rows(&rows)?)?;
        trace.push(scores.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let best = scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| s >= target)
            .map(|(i, _)| (l1(&rows[i], x), i))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, i)) = best {
            let mut out = RecourseOutcome::new(method, x, rows.swap_remove(i), scores[i], target);
            out.iterations = round + 1;
            out.trace = trace;
            return Ok(out);
        }
        radius *= params.growth;
    }
    let mut out = RecourseOutcome::failure(method, x, initial, target);
    out.iterations = trace.len();
    out.trace = trace;
    Ok(out)
}

/// Random search in input space; `frozen` columns stay at their factual values
/// and candidates are clamped to `[0, 1]`.
pub fn growing_spheres(x: &[f64], classifier: &dyn Classifier, frozen: &[usize], config: &BaselineConfig) -> Result<RecourseOutcome> {
    config.validate()?;
    let counter = CountingClassifier::new(classifier, config.budget);
    let free: Vec<usize> = (0..x.len()).filter(|c| !frozen.contains(c)).collect();
    sphere_search(GS_METHOD, x, &counter, free.len(), &config.spheres, config.seed, |delta| {
        let mut candidate = x.to_vec();
        for (&c, d) in free.iter().zip(delta) {
            candidate[c] = (x[c] + d).clamp(0.0, 1.0);
        }
        Ok(candidate)
    })
}

/// Random search in the latent space of a plain autoencoder; candidates are
/// decoded and clamped to `[0, 1]`.
pub fn latent_random(x: &[f64], classifier: &dyn Classifier, generator: &dyn Generator, config: &BaselineConfig) -> Result<RecourseOutcome> {
    config.validate()?;
    let counter = CountingClassifier::new(classifier, config.budget);
    let z0 = generator.latent_of(x)?;
    let x_s: Vec<f64> = generator.action_columns().iter().map(|&c| x[c]).collect();
    sphere_search(CCHVAE_METHOD, x, &counter, z0.len(), &config.spheres, config.seed, |delta| {
        let z: Vec<f64> = z0.iter().zip(delta).map(|(a, b)| a + b).collect();
        Ok(generator.generate(&z, &x_s)?.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
    })
}
