use serde::{Deserialize, Serialize};

use crate::data::{argmax, Actionability, FeatureKind, TabularEncoder};

/// Tolerance below which a changed immutable column is not a violation.
pub const CHANGE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Immutable,
    Monotone,
    Range,
}

/// A constraint breach observed before projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub feature: usize,
    pub column: usize,
    pub kind: ViolationKind,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub x: Vec<f64>,
    pub violations: Vec<Violation>,
}

/// Projects a candidate counterfactual onto the admissible set: continuous
/// columns clamped to `[0, 1]`, binaries thresholded at 0.5, categorical
/// groups hard-assigned by argmax, monotone features kept on their allowed
/// side of the factual, immutables reset to the factual.
pub fn apply_constraints(candidate: &[f64], factual: &[f64], encoder: &TabularEncoder) -> Projection {
    let mut x = candidate.to_vec();
    let mut violations = Vec::new();
    for (feature, spec) in encoder.schema().features().iter().enumerate() {
        let cols = encoder.feature_columns(feature);
        for c in cols.clone() {
            if !(0.0..=1.0).contains(&candidate[c]) {
                violations.push(Violation {
                    feature,
                    column: c,
                    kind: ViolationKind::Range,
                    value: candidate[c],
                });
            }
        }
        match spec.kind {
            FeatureKind::Continuous => x[cols.start] = x[cols.start].clamp(0.0, 1.0),
            FeatureKind::Binary => x[cols.start] = if x[cols.start] >= 0.5 { 1.0 } else { 0.0 },
            FeatureKind::Categorical => {
                let hot = argmax(&x[cols.clone()]);
                for (i, c) in cols.clone().enumerate() {
                    x[c] = if i == hot { 1.0 } else { 0.0 };
                }
            }
        }
        match spec.actionability {
            Actionability::Free => {}
            Actionability::Immutable => {
                for c in cols {
                    if (candidate[c] - factual[c]).abs() > CHANGE_TOL {
                        violations.push(Violation {
                            feature,
                            column: c,
                            kind: ViolationKind::Immutable,
                            value: candidate[c],
                        });
                    }
                    x[c] = factual[c];
                }
            }
            Actionability::MonotoneIncrease | Actionability::MonotoneDecrease if cols.len() == 1 => {
                let c = cols.start;
                let up = spec.actionability == Actionability::MonotoneIncrease;
                let breach = if up { candidate[c] < factual[c] } else { candidate[c] > factual[c] };
                if breach {
                    violations.push(Violation {
                        feature,
                        column: c,
                        kind: ViolationKind::Monotone,
                        value: candidate[c],
                    });
                }
                x[c] = if up { x[c].max(factual[c]) } else { x[c].min(factual[c]) };
            }
            _ => {}
        }
    }
    Projection { x, violations }
}
