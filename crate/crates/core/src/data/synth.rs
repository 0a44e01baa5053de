use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::encode::{EncodedDataset, TabularEncoder};
use super::datasets::adult_schema;
use super::schema::{Actionability, FeatureSchema, FeatureSpec};
use super::table::{RawTable, RawValue};
use crate::autodiff::Tensor;
use crate::{Error, Result};

/// Three-feature generator with a known linear dependency:
/// `x1 ~ U[0,1]`, `x2 = clamp(a * x1 + eps, 0, 1)` with `eps ~ N(0, sigma^2)`,
/// `x3 ~ U[0,1]` independent. The label is `1[x1 + x2 > t]` with `t` the
/// sample median, so classes are balanced.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticLinear {
    pub n: usize,
    pub coupling: f64,
    pub noise: f64,
    pub seed: u64,
    /// Marks `x3` immutable in the schema.
    pub immutable_x3: bool,
}

impl SyntheticLinear {
    pub fn new(n: usize, coupling: f64, noise: f64, seed: u64) -> Self {
        SyntheticLinear {
            n,
            coupling,
            noise,
            seed,
            immutable_x3: false,
        }
    }

    pub fn with_immutable_x3(mut self) -> Self {
        self.immutable_x3 = true;
        self
    }

    pub fn schema(&self) -> FeatureSchema {
        let x3 = if self.immutable_x3 {
            FeatureSpec::continuous("x3").with_actionability(Actionability::Immutable)
        } else {
            FeatureSpec::continuous("x3")
        };
        FeatureSchema::new(vec![FeatureSpec::continuous("x1"), FeatureSpec::continuous("x2"), x3])
            .expect("static schema is valid")
    }

    pub fn generate(&self) -> Result<EncodedDataset> {
        if self.n < 10 {
            return Err(Error::Config(format!("synthetic data needs n >= 10, got {}", self.n)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!("noise must be >= 0, got {}", self.noise)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(0.0, self.noise.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::Config(e.to_string()))?;
        let mut values = Vec::with_capacity(self.n * 3);
        let mut scores = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let x1: f64 = rng.random();
            let eps = if self.noise > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            let x2 = (self.coupling * x1 + eps).clamp(0.0, 1.0);
            let x3: f64 = rng.random();
            values.extend([x1, x2, x3]);
            scores.push(x1 + x2);
        }
        let threshold = median(&scores);
        let labels = scores.iter().map(|&s| u8::from(s > threshold)).collect();
        let encoder = Arc::new(TabularEncoder::identity(self.schema()));
        EncodedDataset::new(Tensor::new(self.n, 3, values)?, labels, encoder)
    }
}

/// Convenience wrapper for [`SyntheticLinear::generate`].
pub fn synth_linear(n: usize, coupling: f64, noise: f64, seed: u64) -> Result<EncodedDataset> {
    SyntheticLinear::new(n, coupling, noise, seed).generate()
}

/// Raw table with the Adult column schema and plausible value ranges, for
/// tests and demos when the real file is absent. Education drives
/// occupation and hours; age drives marital status; the label follows a
/// logistic score of education, hours, age and capital gain.
pub fn adult_like_table(n: usize, seed: u64) -> Result<RawTable> {
    if n < 10 {
        return Err(Error::Config(format!("adult-like table needs n >= 10, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).map_err(|e| Error::Config(e.to_string()))?;
    let flip = |p: f64, rng: &mut ChaCha8Rng| RawValue::Number(f64::from(u8::from(rng.random::<f64>() < p)));
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let age = rng.random_range(17.0..90.0_f64).round();
        let edu = rng.random_range(1.0..17.0_f64).floor();
        let gain = if rng.random::<f64>() < 0.1 { rng.random_range(1000.0..20000.0_f64).round() } else { 0.0 };
        let loss = if rng.random::<f64>() < 0.05 { rng.random_range(100.0..3000.0_f64).round() } else { 0.0 };
        let hours = (25.0 + 1.5 * edu + 8.0 * noise.sample(&mut rng)).clamp(1.0, 99.0).round();
        let z = 0.35 * (edu - 10.0) + 0.05 * (hours - 40.0) + 0.03 * (age - 40.0) + gain / 5000.0 + 0.5 * noise.sample(&mut rng);
        rows.push(vec![
            RawValue::Number(age),
            RawValue::Number(edu),
            RawValue::Number(gain),
            RawValue::Number(loss),
            RawValue::Number(hours),
            flip(0.7, &mut rng),
            flip(((age - 17.0) / 40.0).min(0.9), &mut rng),
            flip(edu / 17.0, &mut rng),
            flip(0.85, &mut rng),
            flip(0.65, &mut rng),
            flip(0.9, &mut rng),
        ]);
        labels.push(u8::from(z > 0.0));
    }
    Ok(RawTable {
        schema: adult_schema(),
        rows,
        labels,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    }
}

/// Height of the segment in [`segment_manifold`].
pub const SEGMENT_HEIGHT: f64 = 0.2;

/// Two features on a thin horizontal band: `t ~ U[0,1]`,
/// `h = SEGMENT_HEIGHT + U[-0.025, 0.025]`. Any boundary of the form
/// `h > c` with `c > 0.225` lies off the data, so a decoder trained on it
/// has nowhere to go along its one latent direction. Labels are all 0.
pub fn segment_manifold(n: usize, seed: u64) -> Result<EncodedDataset> {
    if n == 0 {
        return Err(Error::Config("segment manifold needs n >= 1".into()));
    }
    let schema = FeatureSchema::new(vec![FeatureSpec::continuous("t"), FeatureSpec::continuous("h")])
        .expect("static schema is valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let t: f64 = rng.random();
        let h = SEGMENT_HEIGHT + 0.05 * (rng.random::<f64>() - 0.5);
        values.extend([t, h]);
    }
    EncodedDataset::new(
        Tensor::new(n, 2, values)?,
        vec![0; n],
        Arc::new(TabularEncoder::identity(schema)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn segment_stays_in_its_band() {
        let ds = segment_manifold(300, 1).unwrap();
        assert!(ds.x.column(1).iter().all(|h| (h - SEGMENT_HEIGHT).abs() <= 0.025));
        let t = ds.x.column(0);
        assert!(t.iter().any(|&v| v < 0.1) && t.iter().any(|&v| v > 0.9));
        assert_eq!(segment_manifold(300, 1).unwrap().x, ds.x);
    }

    #[test]
    fn zero_coupling_gives_constant_zero_x2() {
        let ds = synth_linear(500, 0.0, 0.0, 3).unwrap();
        assert!(ds.x.column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_coupling_copies_x1() {
        let ds = synth_linear(200, 1.0, 0.0, 4).unwrap();
        assert_eq!(ds.x.column(0), ds.x.column(1));
    }

    #[test]
    fn ols_slope_recovers_coupling_in_unclamped_region() {
        let ds = synth_linear(5000, 2.0, 0.01, 5).unwrap();
        let (x1, x2) = (ds.x.column(0), ds.x.column(1));
        let (xs, ys): (Vec<f64>, Vec<f64>) = x1
            .iter()
            .zip(&x2)
            .filter(|(a, b)| **a < 0.45 && **b > 0.0 && **b < 1.0)
            .map(|(a, b)| (*a, *b))
            .unzip();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((1.9..=2.1).contains(&slope), "slope {slope}");
        assert!(pearson(&x1, &ds.x.column(2)).abs() < 0.05);
    }

    #[test]
    fn adult_like_rows_fit_the_schema() {
        let t = adult_like_table(300, 1).unwrap();
        assert_eq!(t.len(), 300);
        let (enc, _) = crate::data::TabularEncoder::fit(&t, None).unwrap();
        let ds = Arc::new(enc).encode(&t).unwrap();
        assert_eq!(ds.dim(), 11);
        let pos = t.labels.iter().filter(|&&y| y == 1).count();
        assert!((60..240).contains(&pos), "{pos}");
        assert_eq!(adult_like_table(300, 1).unwrap(), t);
    }

    #[test]
    fn labels_are_balanced_and_n_is_checked() {
        let ds = synth_linear(1000, 2.0, 0.01, 6).unwrap();
        let pos = ds.labels.iter().filter(|&&y| y == 1).count();
        assert_eq!(pos, 500);
        assert!(synth_linear(9, 1.0, 0.0, 0).is_err());
    }
}
