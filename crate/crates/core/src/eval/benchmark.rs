use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::method::Method;
use super::metrics::{metric_cost, metric_cv, verify_success, YnnReference, YNN_K};
use super::report::{BenchmarkReport, MetricRecord};
use super::runner::run_method;
use crate::baselines::{BaselineConfig, FaceVariant};
use crate::bundle::{stable_seed, ModelBundle};
use crate::models::Classifier;
use crate::recourse::{CandidateStrategy, RecourseOutcome, RecourseRequest};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    /// Seeds for the stochastic baselines; each seed is a full pass.
    pub seeds: Vec<u64>,
    /// Cap on the number of negatively classified test instances.
    pub limit: Option<usize>,
    pub request: RecourseRequest,
    pub baselines: BaselineConfig,
    pub ynn_k: usize,
    /// Worker threads; `None` uses the global pool. Not part of the report.
    #[serde(skip)]
    pub jobs: Option<usize>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            methods: Method::ALL.to_vec(),
            seeds: vec![0],
            limit: None,
            request: RecourseRequest::default(),
            baselines: BaselineConfig::default(),
            ynn_k: YNN_K,
            jobs: None,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("benchmark needs at least one method".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("benchmark needs at least one seed".into()));
        }
        if self.ynn_k == 0 {
            return Err(Error::Config("ynn k must be >= 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be >= 1".into()));
        }
        self.request.validate()?;
        self.baselines.validate()
    }
}

/// Records plus the raw outcomes (same order) and the aggregated report.
#[derive(Clone, Debug)]
pub struct BenchmarkRun {
    pub report: BenchmarkReport,
    pub records: Vec<MetricRecord>,
    pub outcomes: Vec<RecourseOutcome>,
}

impl BenchmarkRun {
    pub fn outcomes_for(&self, method: Method) -> impl Iterator<Item = &RecourseOutcome> {
        self.records.iter().zip(&self.outcomes).filter(move |(r, _)| r.method == method).map(|(_, o)| o)
    }
}

/// Test rows the classifier places below `target`, capped at `limit`.
pub fn negative_instances(bundle: &ModelBundle, target: f64, limit: Option<usize>) -> Result<Vec<usize>> {
    let scores = bundle.classifier().scores(&bundle.test_set().x)?;
    let ids = scores.iter().enumerate().filter(|(_, &s)| s < target).map(|(i, _)| i);
    Ok(match limit {
        Some(n) => ids.take(n).collect(),
        None => ids.collect(),
    })
}

/// Action sets DEAR may request under `strategy`.
fn action_sets(bundle: &ModelBundle, strategy: &CandidateStrategy) -> Vec<Vec<usize>> {
    let encoder = bundle.encoder();
    match strategy {
        CandidateStrategy::TopK(_) => encoder
            .schema()
            .features()
            .iter()
            .enumerate()
            .filter(|(_, f)| f.actionability.is_actionable())
            .map(|(i, _)| encoder.feature_columns(i).collect())
            .collect(),
        CandidateStrategy::Explicit(features) => {
            let mut features = features.clone();
            features.sort_unstable();
            features.dedup();
            vec![features.iter().filter(|&&f| f < encoder.schema().len()).flat_map(|&f| encoder.feature_columns(f)).collect()]
        }
    }
}

/// Re-scores the counterfactual and fails if the outcome's own success flag
/// disagrees.
pub(crate) fn audit(outcome: &RecourseOutcome, classifier: &dyn Classifier, method: Method, id: usize, seed: u64) -> Result<bool> {
    let verified = verify_success(outcome, classifier)?;
    if verified != outcome.success {
        return Err(Error::Audit(format!(
            "{method} on instance {id} (seed {seed}) reports success={} but the classifier disagrees",
            outcome.success
        )));
    }
    Ok(verified)
}

/// Runs every configured method on every negatively classified test instance,
/// once per seed, and aggregates the results.
///
/// A method error on one instance is recorded as a failure. A success flag
/// that disagrees with re-scoring the counterfactual aborts the run.
pub fn run_benchmark(bundle: &ModelBundle, config: &BenchmarkConfig) -> Result<BenchmarkRun> {
    config.validate()?;
    match config.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| run_inner(bundle, config)),
        None => run_inner(bundle, config),
    }
}

fn run_inner(bundle: &ModelBundle, config: &BenchmarkConfig) -> Result<BenchmarkRun> {
    let clf = bundle.classifier();
    let encoder = bundle.encoder();
    let target = config.request.target.unwrap_or_else(|| clf.target_score());
    let instances = negative_instances(bundle, target, config.limit)?;

    let mut sets = Vec::new();
    if config.methods.contains(&Method::Dear) {
        sets.extend(action_sets(bundle, &config.request.strategy));
    }
    if config.methods.iter().any(|m| m.uses_plain_autoencoder()) {
        sets.push(Vec::new());
    }
    bundle.prewarm(&sets)?;

    // Build graphs up front so a bad FACE config fails the run, not each task.
    if config.methods.contains(&Method::FaceK) {
        bundle.face_graph(FaceVariant::Knn(config.baselines.face.k))?;
    }
    if config.methods.contains(&Method::FaceE) {
        bundle.face_graph(FaceVariant::Epsilon(config.baselines.face.epsilon))?;
    }
    let train = &bundle.train_set().x;
    let reference = YnnReference::new(train.clone(), clf, config.ynn_k.min(train.rows()))?;

    let tasks: Vec<(u64, usize, Method)> = config
        .seeds
        .iter()
        .flat_map(|&seed| instances.iter().flat_map(move |&i| config.methods.iter().map(move |&m| (seed, i, m))))
        .collect();
    let results: Vec<Result<(MetricRecord, RecourseOutcome)>> = tasks
        .par_iter()
        .map(|&(seed, id, method)| {
            let x = bundle.test_set().row(id);
            let started = Instant::now();
            let baselines = BaselineConfig {
                seed: stable_seed(seed, &[id]),
                ..config.baselines.clone()
            };
            let run = run_method(bundle, method, x, &config.request, &baselines);
            let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
            let (outcome, error) = match run {
                Ok(o) => (o, None),
                Err(e) => (RecourseOutcome::failure(method.name(), x, f64::NAN, target), Some(e.to_string())),
            };
            let success = error.is_none() && audit(&outcome, clf, method, id, seed)?;
            let ynn = if success { Some(reference.agreement(&outcome.counterfactual, clf)?) } else { None };
            let record = MetricRecord {
                seed,
                method,
                instance_id: id,
                success,
                l1_cost: metric_cost(x, &outcome.counterfactual),
                cv_count: metric_cv(x, &outcome.counterfactual, encoder),
                ynn,
                iterations: outcome.iterations,
                runtime_ms,
                error,
            };
            Ok((record, outcome))
        })
        .collect();

    let mut records = Vec::with_capacity(results.len());
    let mut outcomes = Vec::with_capacity(results.len());
    for r in results {
        let (rec, out) = r?;
        records.push(rec);
        outcomes.push(out);
    }
    let report = BenchmarkReport::aggregate(config, target, &instances, &records);
    Ok(BenchmarkRun {
        report,
        records,
        outcomes,
    })
}
