//! Request and response bodies.

use std::collections::BTreeMap;

use dear_core::analysis::CostBreakdown;
use dear_core::data::{Actionability, EncodedColumn, FeatureKind, RawValue};
use dear_core::eval::Method;
use dear_core::recourse::{Candidate, Violation};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// The instance to explain: raw values by feature name, or a row of the
/// bundle's test split. Exactly one must be given.
#[derive(Clone, Debug, Default, Deserialize)]
pub struct InstanceRef {
    #[serde(default)]
    pub instance: Option<BTreeMap<String, Value>>,
    #[serde(default)]
    pub row: Option<usize>,
}

/// A feature by name or schema index.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum FeatureRef {
    Index(usize),
    Name(String),
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct CandidatesRequest {
    #[serde(flatten)]
    pub target: InstanceRef,
    #[serde(default)]
    pub k: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct RecourseBody {
    #[serde(flatten)]
    pub target: InstanceRef,
    /// Action set for DEAR; ranked singletons when absent.
    #[serde(default, alias = "S")]
    pub s: Option<Vec<FeatureRef>>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub method: Option<Method>,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct WhatIfBody {
    #[serde(flatten)]
    pub target: InstanceRef,
    #[serde(alias = "S")]
    pub s: Vec<FeatureRef>,
    /// One entry per encoded column of `s`, in column order.
    pub d_s: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureView {
    pub index: usize,
    pub name: String,
    pub kind: FeatureKind,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub levels: Vec<String>,
    pub actionability: Actionability,
    pub immutable: bool,
    pub group: Option<String>,
    /// Encoded column indices.
    pub columns: Vec<usize>,
    /// Raw range of continuous features from the scaler.
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemaView {
    pub features: Vec<FeatureView>,
    pub columns: Vec<EncodedColumn>,
    /// Score at or above which an instance is positively classified.
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidatesView {
    pub score: f64,
    pub target: f64,
    pub candidates: Vec<Candidate>,
}

/// Per-feature change for UI bars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDelta {
    pub feature: usize,
    pub name: String,
    pub in_s: bool,
    pub before: RawValue,
    pub after: RawValue,
    /// `after - before` in raw units for numeric features.
    pub raw_delta: Option<f64>,
    /// l1 change over the feature's encoded columns.
    pub encoded_l1: f64,
}

/// Cost split. Methods without an action set leave every field except
/// `total_l1` null.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostView {
    pub total_l1: f64,
    pub direct_l1: Option<f64>,
    pub indirect_l1: Option<f64>,
    pub action_l1: Option<f64>,
    pub direct_sq: Option<f64>,
    pub indirect_sq: Option<f64>,
    pub entanglement: Option<f64>,
}

impl CostView {
    pub fn from_breakdown(b: &CostBreakdown) -> Self {
        CostView {
            total_l1: b.total_l1,
            direct_l1: Some(b.direct_l1),
            indirect_l1: Some(b.indirect_l1),
            action_l1: Some(b.action_l1),
            direct_sq: Some(b.direct_sq),
            indirect_sq: Some(b.indirect_sq),
            entanglement: Some(b.entanglement),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecourseView {
    pub method: String,
    pub success: bool,
    pub score: f64,
    pub target: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
    pub factual: Vec<RawValue>,
    pub counterfactual: Vec<RawValue>,
    pub counterfactual_encoded: Vec<f64>,
    /// Names of the features in `S`; empty for methods without an action set.
    pub s: Vec<String>,
    pub s_columns: Vec<usize>,
    /// `d_S` over `s_columns`.
    pub action: Option<Vec<f64>>,
    pub cost: CostView,
    pub features: Vec<FeatureDelta>,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhatIfCost {
    /// `|d_S|_1`.
    pub direct_l1: f64,
    /// `|x_Sc - x_check_Sc|_1`, including reconstruction drift.
    pub indirect_l1: f64,
    pub total_l1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhatIfView {
    pub s: Vec<String>,
    pub s_columns: Vec<usize>,
    pub action: Vec<f64>,
    pub score: f64,
    pub target: f64,
    pub positive: bool,
    pub counterfactual: Vec<RawValue>,
    pub counterfactual_encoded: Vec<f64>,
    /// Decoder output before projection.
    pub decoded: Vec<f64>,
    pub cost: WhatIfCost,
    pub features: Vec<FeatureDelta>,
    pub violations: Vec<Violation>,
}
