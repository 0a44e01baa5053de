//! Trained-model bundle: encoder, classifier, training data and a cache of
//! conditional autoencoders keyed by action set, persisted as one JSON
//! document (`dear-bundle/1`).

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use once_cell::sync::OnceCell;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::baselines::{FaceGraph, FaceVariant};
use crate::data::{encode_scale, split_indices, EncodedDataset, EncodingWarning, RawTable, SplitSpec, TabularEncoder};
use crate::models::{
    train_cae, train_classifier, CaeArchitecture, ClassifierArch, ClassifierFit, ConditionalAutoencoder, Generator,
    Classifier, MlpClassifier, TrainConfig,
};
use crate::recourse::GeneratorProvider;
use crate::{Error, Result};

pub const BUNDLE_VERSION: &str = "dear-bundle/1";

type CaeSlot = Arc<OnceCell<Arc<ConditionalAutoencoder>>>;

/// Classifier plus everything needed to train or reuse a CAE for any `S`.
///
/// CAEs are trained lazily on first request with the stored CAE config and a
/// seed derived from `S`; concurrent requests for the same `S` wait for the
/// first one to finish.
pub struct ModelBundle {
    encoder: Arc<TabularEncoder>,
    classifier: MlpClassifier,
    classifier_arch: ClassifierArch,
    cae_arch: CaeArchitecture,
    cae_config: TrainConfig,
    train: EncodedDataset,
    test: EncodedDataset,
    cache: Mutex<HashMap<Vec<usize>, CaeSlot>>,
    graphs: Mutex<Vec<(FaceVariant, Arc<FaceGraph>)>>,
}

#[derive(Serialize, Deserialize)]
struct DataBlock {
    x: Tensor,
    labels: Vec<u8>,
}

impl DataBlock {
    fn of(d: &EncodedDataset) -> Self {
        DataBlock {
            x: d.x.clone(),
            labels: d.labels.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct BundleFile {
    version: String,
    encoder: TabularEncoder,
    classifier_arch: ClassifierArch,
    classifier: MlpClassifier,
    cae_arch: CaeArchitecture,
    cae_config: TrainConfig,
    train: DataBlock,
    test: DataBlock,
    #[serde(default)]
    autoencoders: Vec<ConditionalAutoencoder>,
}

/// Seed derived from `base` and `parts`, stable across platforms and builds.
pub fn stable_seed(base: u64, parts: &[usize]) -> u64 {
    let mut h = base ^ 0x9e37_79b9_7f4a_7c15;
    for &c in parts {
        h = splitmix(h ^ (c as u64 + 1));
    }
    splitmix(h)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl ModelBundle {
    pub fn new(
        classifier: MlpClassifier,
        classifier_arch: ClassifierArch,
        cae_arch: CaeArchitecture,
        cae_config: TrainConfig,
        train: EncodedDataset,
        test: EncodedDataset,
    ) -> Result<Self> {
        cae_config.validate()?;
        if *train.encoder != *test.encoder {
            return Err(Error::Config("train and test sets use different encoders".into()));
        }
        if classifier.input_dim() != train.dim() {
            return Err(Error::Config(format!(
                "classifier expects {} columns, data has {}",
                classifier.input_dim(),
                train.dim()
            )));
        }
        Ok(ModelBundle {
            encoder: Arc::clone(&train.encoder),
            classifier,
            classifier_arch,
            cae_arch,
            cae_config,
            train,
            test,
            cache: Mutex::new(HashMap::new()),
            graphs: Mutex::new(Vec::new()),
        })
    }

    /// Trains the classifier and wraps it with the data. CAEs stay untrained
    /// until requested.
    pub fn train(
        train: EncodedDataset,
        test: EncodedDataset,
        classifier_arch: ClassifierArch,
        classifier_config: &TrainConfig,
        cae_arch: CaeArchitecture,
        cae_config: TrainConfig,
    ) -> Result<(Self, ClassifierFit)> {
        let fit = train_classifier(&train, Some(&test), classifier_arch, classifier_config)?;
        let bundle = ModelBundle::new(fit.model.clone(), classifier_arch, cae_arch, cae_config, train, test)?;
        Ok((bundle, fit))
    }

    /// Splits `table`, fits the encoder on the training rows only, encodes
    /// both splits and trains the classifier.
    pub fn from_table(
        table: &RawTable,
        split: SplitSpec,
        classifier_arch: ClassifierArch,
        classifier_config: &TrainConfig,
        cae_arch: CaeArchitecture,
        cae_config: TrainConfig,
    ) -> Result<(Self, ClassifierFit, Vec<EncodingWarning>)> {
        let (train_rows, test_rows) = split_indices(table.len(), split)?;
        let (data, warnings) = encode_scale(table, &train_rows)?;
        let (bundle, fit) = Self::train(
            data.select(&train_rows),
            data.select(&test_rows),
            classifier_arch,
            classifier_config,
            cae_arch,
            cae_config,
        )?;
        Ok((bundle, fit, warnings))
    }

    pub fn encoder(&self) -> &Arc<TabularEncoder> {
        &self.encoder
    }

    pub fn classifier(&self) -> &MlpClassifier {
        &self.classifier
    }

    pub fn classifier_arch(&self) -> ClassifierArch {
        self.classifier_arch
    }

    pub fn cae_arch(&self) -> &CaeArchitecture {
        &self.cae_arch
    }

    pub fn cae_config(&self) -> &TrainConfig {
        &self.cae_config
    }

    pub fn train_set(&self) -> &EncodedDataset {
        &self.train
    }

    pub fn test_set(&self) -> &EncodedDataset {
        &self.test
    }

    fn slot(&self, columns: &[usize]) -> CaeSlot {
        let mut cache = self.cache.lock().expect("cae cache poisoned");
        Arc::clone(cache.entry(columns.to_vec()).or_default())
    }

    /// The CAE for action columns `columns` (encoded indices, in order);
    /// an empty slice gives the plain autoencoder.
    pub fn cae_for(&self, columns: &[usize]) -> Result<Arc<ConditionalAutoencoder>> {
        let slot = self.slot(columns);
        slot.get_or_try_init(|| {
            let config = TrainConfig {
                seed: stable_seed(self.cae_config.seed, columns),
                ..self.cae_config.clone()
            };
            train_cae(&self.train, columns, &self.cae_arch, &config).map(|fit| Arc::new(fit.model))
        })
        .cloned()
    }

    pub fn plain_autoencoder(&self) -> Result<Arc<ConditionalAutoencoder>> {
        self.cae_for(&[])
    }

    /// Trains every listed action set in parallel.
    pub fn prewarm(&self, sets: &[Vec<usize>]) -> Result<()> {
        sets.par_iter().try_for_each(|s| self.cae_for(s).map(|_| ()))
    }

    /// Stores an externally trained CAE under its own action set.
    pub fn insert_cae(&self, cae: ConditionalAutoencoder) -> Result<()> {
        if cae.dim() != self.train.dim() {
            return Err(Error::Config(format!("cae width {} does not match data width {}", cae.dim(), self.train.dim())));
        }
        let key = cae.s_columns().to_vec();
        let slot = Arc::new(OnceCell::with_value(Arc::new(cae)));
        self.cache.lock().expect("cae cache poisoned").insert(key, slot);
        Ok(())
    }

    /// FACE graph over the training split, built once per variant.
    pub fn face_graph(&self, variant: FaceVariant) -> Result<Arc<FaceGraph>> {
        let mut graphs = self.graphs.lock().expect("graph cache poisoned");
        if let Some((_, g)) = graphs.iter().find(|(v, _)| *v == variant) {
            return Ok(Arc::clone(g));
        }
        let graph = Arc::new(FaceGraph::build(&self.train.x, &self.classifier, variant)?);
        graphs.push((variant, Arc::clone(&graph)));
        Ok(graph)
    }

    /// Action sets with a trained CAE, sorted.
    pub fn cached_action_sets(&self) -> Vec<Vec<usize>> {
        let cache = self.cache.lock().expect("cae cache poisoned");
        let mut sets: Vec<Vec<usize>> = cache.iter().filter(|(_, c)| c.get().is_some()).map(|(k, _)| k.clone()).collect();
        sets.sort();
        sets
    }

    pub fn to_json(&self) -> Result<String> {
        let autoencoders = self
            .cached_action_sets()
            .iter()
            .map(|s| self.cae_for(s).map(|c| (*c).clone()))
            .collect::<Result<Vec<_>>>()?;
        let file = BundleFile {
            version: BUNDLE_VERSION.to_string(),
            encoder: (*self.encoder).clone(),
            classifier_arch: self.classifier_arch,
            classifier: self.classifier.clone(),
            cae_arch: self.cae_arch.clone(),
            cae_config: self.cae_config.clone(),
            train: DataBlock::of(&self.train),
            test: DataBlock::of(&self.test),
            autoencoders,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            version: String,
        }
        let Version { version } = serde_json::from_str(text)?;
        if version != BUNDLE_VERSION {
            return Err(Error::BundleVersion(version));
        }
        let file: BundleFile = serde_json::from_str(text)?;
        let encoder = Arc::new(file.encoder);
        let train = EncodedDataset::new(file.train.x, file.train.labels, Arc::clone(&encoder))?;
        let test = EncodedDataset::new(file.test.x, file.test.labels, encoder)?;
        let bundle = ModelBundle::new(file.classifier, file.classifier_arch, file.cae_arch, file.cae_config, train, test)?;
        for cae in file.autoencoders {
            bundle.insert_cae(cae)?;
        }
        Ok(bundle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl GeneratorProvider for ModelBundle {
    fn generator_for(&self, columns: &[usize]) -> Result<Arc<dyn Generator>> {
        Ok(self.cae_for(columns)? as Arc<dyn Generator>)
    }
}

impl std::fmt::Debug for ModelBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelBundle")
            .field("width", &self.train.dim())
            .field("train", &self.train.len())
            .field("test", &self.test.len())
            .field("cached", &self.cached_action_sets())
            .finish()
    }
}
