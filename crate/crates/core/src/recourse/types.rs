use serde::{Deserialize, Serialize};

use super::constraints::Violation;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum CandidateStrategy {
    /// Raw feature indices forming `S`.
    Explicit(Vec<usize>),
    /// The `k` best-ranked singletons.
    TopK(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `d <- d - alpha * grad`.
    Gradient,
    /// Adam with step size `alpha`.
    #[default]
    Adam,
}

/// Search parameters; the factual row is passed separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecourseRequest {
    /// Target score `s`; `None` uses the classifier's threshold.
    pub target: Option<f64>,
    pub lambda: f64,
    pub alpha: f64,
    pub max_iterations: usize,
    pub strategy: CandidateStrategy,
    pub enforce_constraints: bool,
    pub step_rule: StepRule,
    /// The squared-error term pulls the score toward `s + margin`.
    pub target_margin: f64,
    /// Weight of the monotonicity hinge terms.
    pub monotone_weight: f64,
    pub stall_window: usize,
    pub stall_tolerance: f64,
}

impl Default for RecourseRequest {
    fn default() -> Self {
        RecourseRequest {
            target: None,
            lambda: 0.5,
            alpha: 0.05,
            max_iterations: 500,
            strategy: CandidateStrategy::TopK(6),
            enforce_constraints: true,
            step_rule: StepRule::Adam,
            target_margin: 1.0,
            monotone_weight: 1.0,
            stall_window: 25,
            stall_tolerance: 1e-6,
        }
    }
}

impl RecourseRequest {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if let CandidateStrategy::TopK(0) = self.strategy {
            return Err(Error::Config("top-k strategy needs k >= 1".into()));
        }
        if let CandidateStrategy::Explicit(ref s) = self.strategy {
            if s.is_empty() {
                return Err(Error::Config("explicit action set is empty".into()));
            }
        }
        if self.target_margin < 0.0 {
            return Err(Error::Config("target margin must be >= 0".into()));
        }
        Ok(())
    }
}

/// Result of one recourse search, shared by DEAR and the baselines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecourseOutcome {
    pub method: String,
    pub factual: Vec<f64>,
    pub counterfactual: Vec<f64>,
    /// `counterfactual - factual`.
    pub delta: Vec<f64>,
    /// Direct action `d_S`; absent for methods without an action set.
    pub action: Option<Vec<f64>>,
    /// Raw feature indices of `S`.
    pub s_features: Vec<usize>,
    /// Encoded columns of `S`.
    pub s_columns: Vec<usize>,
    pub success: bool,
    pub iterations: usize,
    pub score: f64,
    pub target: f64,
    /// Score after each iteration or round.
    pub trace: Vec<f64>,
    /// Breaches removed by the final projection.
    pub violations: Vec<Violation>,
}

impl RecourseOutcome {
    pub fn new(method: &str, factual: &[f64], counterfactual: Vec<f64>, score: f64, target: f64) -> Self {
        let delta = counterfactual.iter().zip(factual).map(|(c, f)| c - f).collect();
        RecourseOutcome {
            method: method.to_string(),
            factual: factual.to_vec(),
            counterfactual,
            delta,
            action: None,
            s_features: Vec::new(),
            s_columns: Vec::new(),
            success: score >= target,
            iterations: 0,
            score,
            target,
            trace: Vec::new(),
            violations: Vec::new(),
        }
    }

    /// Outcome for a search that produced no candidate.
    pub fn failure(method: &str, factual: &[f64], score: f64, target: f64) -> Self {
        let mut out = RecourseOutcome::new(method, factual, factual.to_vec(), score, target);
        out.success = false;
        out
    }

    pub fn l1_cost(&self) -> f64 {
        self.delta.iter().map(|d| d.abs()).sum()
    }
}
