use crate::autodiff::Tensor;
use crate::data::TabularEncoder;
use crate::models::Classifier;
use crate::recourse::{RecourseOutcome, CHANGE_TOL};
use crate::{Error, Result};

pub const YNN_K: usize = 5;

/// l1 distance between two encoded rows.
pub fn metric_cost(x: &[f64], counterfactual: &[f64]) -> f64 {
    x.iter().zip(counterfactual).map(|(a, b)| (a - b).abs()).sum()
}

/// Whether `classifier` actually places the counterfactual at or above the
/// outcome's target, independent of the outcome's own flag.
pub fn verify_success(outcome: &RecourseOutcome, classifier: &dyn Classifier) -> Result<bool> {
    Ok(classifier.score(&outcome.counterfactual)? >= outcome.target)
}

/// Fraction of outcomes whose counterfactual re-verifies as a success.
pub fn metric_sr(outcomes: &[RecourseOutcome], classifier: &dyn Classifier) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Precondition("success rate of an empty outcome set".into()));
    }
    let mut hits = 0;
    for o in outcomes {
        hits += usize::from(verify_success(o, classifier)?);
    }
    Ok(hits as f64 / outcomes.len() as f64)
}

/// Number of immutable raw features whose encoded columns changed.
pub fn metric_cv(x: &[f64], counterfactual: &[f64], encoder: &TabularEncoder) -> usize {
    encoder
        .schema()
        .immutable_features()
        .filter(|&f| encoder.feature_columns(f).any(|c| (x[c] - counterfactual[c]).abs() > CHANGE_TOL))
        .count()
}

/// Reference points with their thresholded predictions, for neighbourhood
/// agreement.
#[derive(Clone, Debug)]
pub struct YnnReference {
    points: Tensor,
    positive: Vec<bool>,
    k: usize,
}

impl YnnReference {
    pub fn new(points: Tensor, classifier: &dyn Classifier, k: usize) -> Result<Self> {
        if k == 0 || k > points.rows() {
            return Err(Error::Precondition(format!("ynn needs 1 <= k <= {} reference points, got {k}", points.rows())));
        }
        let target = classifier.target_score();
        let positive = classifier.scores(&points)?.into_iter().map(|s| s >= target).collect();
        Ok(YnnReference { points, positive, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Indices of the `k` nearest reference points under l1, ties to the
    /// lower index.
    pub fn neighbours(&self, x: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = (0..self.points.rows()).map(|j| (metric_cost(x, self.points.row(j)), j)).collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().take(self.k).map(|(_, j)| j).collect()
    }

    /// `1 - (disagreeing neighbours) / k` for one counterfactual.
    pub fn agreement(&self, counterfactual: &[f64], classifier: &dyn Classifier) -> Result<f64> {
        let label = classifier.score(counterfactual)? >= classifier.target_score();
        let disagree = self.neighbours(counterfactual).into_iter().filter(|&j| self.positive[j] != label).count();
        Ok(1.0 - disagree as f64 / self.k as f64)
    }
}

/// Mean neighbourhood agreement over a set of counterfactuals.
pub fn metric_ynn(counterfactuals: &[Vec<f64>], classifier: &dyn Classifier, reference: &YnnReference) -> Result<f64> {
    if counterfactuals.is_empty() {
        return Err(Error::Precondition("ynn of an empty counterfactual set".into()));
    }
    let mut total = 0.0;
    for cf in counterfactuals {
        total += reference.agreement(cf, classifier)?;
    }
    Ok(total / counterfactuals.len() as f64)
}
