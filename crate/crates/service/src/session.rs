use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use dear_core::analysis::cost_breakdown;
use dear_core::baselines::BaselineConfig;
use dear_core::data::{parse_named_row, Actionability, FeatureKind, RawValue};
use dear_core::eval::{run_method, Method};
use dear_core::models::Classifier;
use dear_core::recourse::{evaluate_action, rank_candidates, CandidateStrategy, RecourseOutcome, RecourseRequest};
use dear_core::ModelBundle;
use serde::Serialize;

use crate::error::ApiError;
use crate::views::*;

/// Defaults applied to every request.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub request: RecourseRequest,
    pub baselines: BaselineConfig,
    /// Number of ranked singletons returned by `/api/candidates`.
    pub candidates: usize,
    /// CORS origin; any origin when `None`.
    pub allowed_origin: Option<String>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            request: RecourseRequest::default(),
            baselines: BaselineConfig::default(),
            candidates: 6,
            allowed_origin: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RequestCounts {
    pub schema: u64,
    pub candidates: u64,
    pub recourse: u64,
    pub whatif: u64,
}

#[derive(Debug, Default)]
struct Counters {
    schema: AtomicU64,
    candidates: AtomicU64,
    recourse: AtomicU64,
    whatif: AtomicU64,
}

/// Read-only bundle plus request defaults. The bundle's CAE cache is the
/// only state that fills in over the session's lifetime.
#[derive(Debug)]
pub struct ApiSession {
    bundle: Arc<ModelBundle>,
    config: SessionConfig,
    counters: Counters,
}

impl ApiSession {
    pub fn new(bundle: Arc<ModelBundle>, config: SessionConfig) -> Result<Self, ApiError> {
        config.request.validate()?;
        config.baselines.validate()?;
        Ok(ApiSession {
            bundle,
            config,
            counters: Counters::default(),
        })
    }

    pub fn bundle(&self) -> &ModelBundle {
        &self.bundle
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn counts(&self) -> RequestCounts {
        let c = &self.counters;
        RequestCounts {
            schema: c.schema.load(Ordering::Relaxed),
            candidates: c.candidates.load(Ordering::Relaxed),
            recourse: c.recourse.load(Ordering::Relaxed),
            whatif: c.whatif.load(Ordering::Relaxed),
        }
    }

    fn target(&self) -> f64 {
        self.config
            .request
            .target
            .unwrap_or_else(|| self.bundle.classifier().target_score())
    }

    /// Encodes the referenced instance.
    pub fn instance(&self, r: &InstanceRef) -> Result<Vec<f64>, ApiError> {
        match (&r.instance, r.row) {
            (Some(values), None) => {
                let encoder = self.bundle.encoder();
                let raw = parse_named_row(encoder.schema(), values)?;
                Ok(encoder.encode_row(&raw)?)
            }
            (None, Some(row)) => {
                let test = self.bundle.test_set();
                if row >= test.len() {
                    return Err(ApiError::bad_request(format!("row {row} out of range (test split has {})", test.len())));
                }
                Ok(test.row(row).to_vec())
            }
            _ => Err(ApiError::bad_request("give exactly one of 'instance' or 'row'")),
        }
    }

    /// Resolves `S` to sorted feature indices and their encoded columns.
    pub fn action_set(&self, refs: &[FeatureRef]) -> Result<(Vec<usize>, Vec<usize>), ApiError> {
        if refs.is_empty() {
            return Err(ApiError::bad_request("action set S is empty"));
        }
        let encoder = self.bundle.encoder();
        let schema = encoder.schema();
        let mut features = Vec::with_capacity(refs.len());
        for r in refs {
            let f = match r {
                FeatureRef::Index(i) if *i < schema.len() => *i,
                FeatureRef::Index(i) => return Err(ApiError::bad_request(format!("feature index {i} out of range"))),
                FeatureRef::Name(n) => schema
                    .index_of(n)
                    .ok_or_else(|| ApiError::bad_request(format!("unknown feature '{n}'")))?,
            };
            if schema.features()[f].actionability == Actionability::Immutable {
                return Err(ApiError::unprocessable(format!("feature '{}' is immutable", schema.features()[f].name)));
            }
            features.push(f);
        }
        features.sort_unstable();
        features.dedup();
        let columns = features.iter().flat_map(|&f| encoder.feature_columns(f)).collect();
        Ok((features, columns))
    }

    pub fn schema(&self) -> SchemaView {
        self.counters.schema.fetch_add(1, Ordering::Relaxed);
        let encoder = self.bundle.encoder();
        let scaler = encoder.scaler();
        let features = encoder
            .schema()
            .features()
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let columns: Vec<usize> = encoder.feature_columns(i).collect();
                let continuous = f.kind == FeatureKind::Continuous;
                FeatureView {
                    index: i,
                    name: f.name.clone(),
                    kind: f.kind,
                    levels: f.levels.clone(),
                    actionability: f.actionability,
                    immutable: f.actionability == Actionability::Immutable,
                    group: f.group.clone(),
                    min: continuous.then(|| scaler.min[columns[0]]),
                    max: continuous.then(|| scaler.max[columns[0]]),
                    columns,
                }
            })
            .collect();
        SchemaView {
            features,
            columns: encoder.columns().to_vec(),
            target: self.target(),
        }
    }

    pub fn candidates(&self, body: &CandidatesRequest) -> Result<CandidatesView, ApiError> {
        self.counters.candidates.fetch_add(1, Ordering::Relaxed);
        let x = self.instance(&body.target)?;
        let clf = self.bundle.classifier();
        let score = clf.score(&x)?;
        let target = self.target();
        if score >= target {
            return Err(ApiError::unprocessable(format!(
                "instance is already positively classified (score {score:.6} >= {target:.6})"
            )));
        }
        let k = body.k.unwrap_or(self.config.candidates);
        if k == 0 {
            return Err(ApiError::bad_request("k must be >= 1"));
        }
        let candidates = rank_candidates(&x, clf, self.bundle.encoder(), self.bundle.as_ref(), k)?;
        Ok(CandidatesView {
            score,
            target,
            candidates,
        })
    }

    pub fn recourse(&self, body: &RecourseBody) -> Result<RecourseView, ApiError> {
        self.counters.recourse.fetch_add(1, Ordering::Relaxed);
        let x = self.instance(&body.target)?;
        let method = body.method.unwrap_or(Method::Dear);
        let mut request = self.config.request.clone();
        if let Some(lambda) = body.lambda {
            request.lambda = lambda;
        }
        if let Some(refs) = &body.s {
            if method != Method::Dear {
                return Err(ApiError::bad_request(format!("{method} does not take an action set")));
            }
            request.strategy = CandidateStrategy::Explicit(self.action_set(refs)?.0);
        }
        request.validate()?;
        let outcome = run_method(&self.bundle, method, &x, &request, &self.config.baselines)?;
        let view = self.recourse_view(&outcome)?;
        if !outcome.success {
            let detail = serde_json::to_value(&view).map_err(|e| ApiError::internal(e.to_string()))?;
            return Err(ApiError::no_recourse(detail));
        }
        Ok(view)
    }

    fn recourse_view(&self, outcome: &RecourseOutcome) -> Result<RecourseView, ApiError> {
        let cost = match &outcome.action {
            Some(_) => {
                let generator = self.bundle.cae_for(&outcome.s_columns)?;
                CostView::from_breakdown(&cost_breakdown(outcome, generator.as_ref())?)
            }
            None => CostView {
                total_l1: outcome.l1_cost(),
                ..CostView::default()
            },
        };
        let encoder = self.bundle.encoder();
        Ok(RecourseView {
            method: outcome.method.clone(),
            success: outcome.success,
            score: outcome.score,
            target: outcome.target,
            iterations: outcome.iterations,
            trace: outcome.trace.clone(),
            factual: encoder.decode_row(&outcome.factual),
            counterfactual: encoder.decode_row(&outcome.counterfactual),
            counterfactual_encoded: outcome.counterfactual.clone(),
            s: self.names(&outcome.s_features),
            s_columns: outcome.s_columns.clone(),
            action: outcome.action.clone(),
            cost,
            features: self.feature_deltas(&outcome.factual, &outcome.counterfactual, &outcome.s_features),
            violations: outcome.violations.clone(),
        })
    }

    pub fn whatif(&self, body: &WhatIfBody) -> Result<WhatIfView, ApiError> {
        self.counters.whatif.fetch_add(1, Ordering::Relaxed);
        let x = self.instance(&body.target)?;
        let (features, columns) = self.action_set(&body.s)?;
        if body.d_s.len() != columns.len() {
            return Err(ApiError::bad_request(format!(
                "d_S has {} entries but S spans {} encoded columns",
                body.d_s.len(),
                columns.len()
            )));
        }
        if let Some(bad) = body.d_s.iter().find(|d| !d.is_finite()) {
            return Err(ApiError::bad_request(format!("d_S entry {bad} is not finite")));
        }
        let generator = self.bundle.cae_for(&columns)?;
        let clf = self.bundle.classifier();
        let eval = evaluate_action(
            &x,
            &body.d_s,
            clf,
            generator.as_ref(),
            self.bundle.encoder(),
            self.config.request.enforce_constraints,
        )?;
        let direct_l1: f64 = body.d_s.iter().map(|d| d.abs()).sum();
        let indirect_l1: f64 = (0..x.len())
            .filter(|c| !columns.contains(c))
            .map(|c| (x[c] - eval.counterfactual[c]).abs())
            .sum();
        let target = self.target();
        Ok(WhatIfView {
            s: self.names(&features),
            s_columns: columns,
            action: body.d_s.clone(),
            score: eval.score,
            target,
            positive: eval.score >= target,
            counterfactual: self.bundle.encoder().decode_row(&eval.counterfactual),
            features: self.feature_deltas(&x, &eval.counterfactual, &features),
            counterfactual_encoded: eval.counterfactual,
            decoded: eval.raw,
            cost: WhatIfCost {
                direct_l1,
                indirect_l1,
                total_l1: direct_l1 + indirect_l1,
            },
            violations: eval.violations,
        })
    }

    fn names(&self, features: &[usize]) -> Vec<String> {
        let schema = self.bundle.encoder().schema();
        features.iter().map(|&f| schema.features()[f].name.clone()).collect()
    }

    fn feature_deltas(&self, x: &[f64], cf: &[f64], s_features: &[usize]) -> Vec<FeatureDelta> {
        let encoder = self.bundle.encoder();
        let before = encoder.decode_row(x);
        let after = encoder.decode_row(cf);
        encoder
            .schema()
            .features()
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let raw_delta = match (&before[i], &after[i]) {
                    (RawValue::Number(a), RawValue::Number(b)) => Some(b - a),
                    _ => None,
                };
                FeatureDelta {
                    feature: i,
                    name: f.name.clone(),
                    in_s: s_features.contains(&i),
                    before: before[i].clone(),
                    after: after[i].clone(),
                    raw_delta,
                    encoded_l1: encoder.feature_columns(i).map(|c| (x[c] - cf[c]).abs()).sum(),
                }
            })
            .collect()
    }
}
