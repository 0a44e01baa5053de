use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::TabularEncoder;
use crate::models::{Classifier, Generator};
use crate::Result;

use super::closed_form::closed_form_action;
use super::search::{check_negative, dear_search};
use super::types::{CandidateStrategy, RecourseOutcome, RecourseRequest};

/// Weight of the gradient-magnitude tie-break in the attribution score.
pub const RANK_EPSILON: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub feature: usize,
    pub name: String,
    pub columns: Vec<usize>,
    /// `sum |grad_i * x_i| + RANK_EPSILON * sum |grad_i|` over the feature's columns.
    pub attribution: f64,
    /// `|Y^T grad f(x)|`, filled in once a generator for this `S` is available.
    pub alignment: Option<f64>,
}

/// Supplies a trained generator for an action set (encoded columns).
pub trait GeneratorProvider: Sync {
    fn generator_for(&self, columns: &[usize]) -> Result<Arc<dyn Generator>>;
}

impl<F> GeneratorProvider for F
where
    F: Fn(&[usize]) -> Result<Arc<dyn Generator>> + Sync,
{
    fn generator_for(&self, columns: &[usize]) -> Result<Arc<dyn Generator>> {
        self(columns)
    }
}

/// Ranks actionable raw features by gradient x input and returns the top `k`
/// (all of them when fewer exist). Ties keep feature order.
pub fn select_singletons(x: &[f64], classifier: &dyn Classifier, encoder: &TabularEncoder, k: usize) -> Result<Vec<Candidate>> {
    let (_, grad) = classifier.gradient(x)?;
    let mut ranked: Vec<Candidate> = encoder
        .schema()
        .features()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.actionability.is_actionable())
        .map(|(i, f)| {
            let columns: Vec<usize> = encoder.feature_columns(i).collect();
            let attribution = columns
                .iter()
                .map(|&c| (grad[c] * x[c]).abs() + RANK_EPSILON * grad[c].abs())
                .sum();
            Candidate {
                feature: i,
                name: f.name.clone(),
                columns,
                attribution,
                alignment: None,
            }
        })
        .collect();
    ranked.sort_by(|a, b| b.attribution.total_cmp(&a.attribution));
    ranked.truncate(k.max(1));
    Ok(ranked)
}

/// `|Y^T grad f(x)|_2` for the generator's action set.
pub fn alignment_score(x: &[f64], classifier: &dyn Classifier, generator: &dyn Generator) -> Result<f64> {
    let cf = closed_form_action(x, classifier, generator, 1.0, classifier.target_score())?;
    Ok(cf.w.iter().map(|w| w * w).sum::<f64>().sqrt())
}

fn candidate_sets(x: &[f64], classifier: &dyn Classifier, encoder: &TabularEncoder, request: &RecourseRequest) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    match &request.strategy {
        CandidateStrategy::TopK(k) => Ok(select_singletons(x, classifier, encoder, *k)?
            .into_iter()
            .map(|c| (vec![c.feature], c.columns))
            .collect()),
        CandidateStrategy::Explicit(features) => {
            let mut features = features.clone();
            features.sort_unstable();
            features.dedup();
            if let Some(f) = features.iter().find(|&&f| f >= encoder.schema().len()) {
                return Err(crate::Error::Precondition(format!("unknown feature index {f}")));
            }
            let columns = features.iter().flat_map(|&f| encoder.feature_columns(f)).collect();
            Ok(vec![(features, columns)])
        }
    }
}

/// Picks the preferred outcome: any success beats any failure; among
/// successes lower l1 cost, then fewer iterations, then lower `S`; among
/// failures the highest final score, then lower `S`.
pub fn best_outcome(outcomes: Vec<RecourseOutcome>) -> Option<RecourseOutcome> {
    outcomes.into_iter().reduce(|best, next| {
        let better = match (next.success, best.success) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => next
                .l1_cost()
                .total_cmp(&best.l1_cost())
                .then(next.iterations.cmp(&best.iterations))
                .then(next.s_columns.cmp(&best.s_columns))
                .is_lt(),
            (false, false) => best
                .score
                .total_cmp(&next.score)
                .then(next.s_columns.cmp(&best.s_columns))
                .is_lt(),
        };
        if better {
            next
        } else {
            best
        }
    })
}

/// [`select_singletons`] with each candidate's alignment filled in from the
/// generator trained for its columns. A zero direction scores 0.
pub fn rank_candidates(
    x: &[f64],
    classifier: &dyn Classifier,
    encoder: &TabularEncoder,
    provider: &dyn GeneratorProvider,
    k: usize,
) -> Result<Vec<Candidate>> {
    let mut ranked = select_singletons(x, classifier, encoder, k)?;
    for c in &mut ranked {
        let generator = provider.generator_for(&c.columns)?;
        c.alignment = Some(match alignment_score(x, classifier, generator.as_ref()) {
            Err(crate::Error::Degenerate(_)) => 0.0,
            other => other?,
        });
    }
    Ok(ranked)
}

/// Runs [`dear_search`] for every candidate action set and keeps the best.
pub fn recourse_with_selection(
    x: &[f64],
    classifier: &dyn Classifier,
    encoder: &TabularEncoder,
    provider: &dyn GeneratorProvider,
    request: &RecourseRequest,
) -> Result<RecourseOutcome> {
    request.validate()?;
    let target = request.target.unwrap_or_else(|| classifier.target_score());
    check_negative(classifier.score(x)?, target)?;
    let mut outcomes = Vec::new();
    for (_, columns) in candidate_sets(x, classifier, encoder, request)? {
        let generator = provider.generator_for(&columns)?;
        outcomes.push(dear_search(x, classifier, generator.as_ref(), encoder, request)?);
    }
    Ok(best_outcome(outcomes).expect("at least one candidate"))
}
