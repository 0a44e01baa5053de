use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encode::EncodedDataset;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        Ok(SplitSpec { train_fraction, seed })
    }
}

/// Shuffled, disjoint train/test index sets covering `0..n`.
pub fn split_indices(n: usize, spec: SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::Config("cannot split an empty dataset".into()));
    }
    SplitSpec::new(spec.train_fraction, spec.seed)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut n_train = (n as f64 * spec.train_fraction).round() as usize;
    if n >= 2 {
        n_train = n_train.clamp(1, n - 1);
    }
    let test = order.split_off(n_train.min(n));
    Ok((order, test))
}

pub fn split(dataset: &EncodedDataset, spec: SplitSpec) -> Result<(EncodedDataset, EncodedDataset)> {
    let (train, test) = split_indices(dataset.len(), spec)?;
    Ok((dataset.select(&train), dataset.select(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_determinism_and_partition() {
        let spec = SplitSpec::new(0.8, 11).unwrap();
        let (a, b) = split_indices(10, spec).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!(split_indices(10, spec).unwrap(), (a.clone(), b.clone()));
        let mut all: Vec<_> = a.into_iter().chain(b).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_fraction_and_empty() {
        assert!(SplitSpec::new(1.0, 0).is_err());
        assert!(SplitSpec::new(0.0, 0).is_err());
        assert!(split_indices(0, SplitSpec::default()).is_err());
    }
}
