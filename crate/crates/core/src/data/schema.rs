use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Binary,
    Categorical,
}

/// Which changes to a feature are admissible in a counterfactual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Actionability {
    #[default]
    Free,
    Immutable,
    MonotoneIncrease,
    MonotoneDecrease,
}

impl Actionability {
    pub fn is_actionable(self) -> bool {
        self != Actionability::Immutable
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Level names for categorical features. Binary features may carry two
    /// names (false, true) used when parsing text values.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
    #[serde(default)]
    pub actionability: Actionability,
    /// Optional concept label shared by features that act together.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl FeatureSpec {
    pub fn continuous(name: &str) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
            levels: Vec::new(),
            actionability: Actionability::Free,
            group: None,
        }
    }

    pub fn binary(name: &str) -> Self {
        FeatureSpec {
            kind: FeatureKind::Binary,
            ..FeatureSpec::continuous(name)
        }
    }

    pub fn categorical(name: &str, levels: &[&str]) -> Self {
        FeatureSpec {
            kind: FeatureKind::Categorical,
            levels: levels.iter().map(|l| l.to_string()).collect(),
            ..FeatureSpec::continuous(name)
        }
    }

    pub fn with_actionability(mut self, actionability: Actionability) -> Self {
        self.actionability = actionability;
        self
    }

    pub fn with_group(mut self, group: &str) -> Self {
        self.group = Some(group.to_string());
        self
    }

    /// Number of encoded columns this feature expands to.
    pub fn width(&self) -> usize {
        match self.kind {
            FeatureKind::Categorical => self.levels.len(),
            _ => 1,
        }
    }
}

/// Declarative description of raw tabular columns and their action constraints.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SchemaFile {
    Wrapped { features: Vec<FeatureSpec> },
    Bare(Vec<FeatureSpec>),
}

impl<'de> Deserialize<'de> for FeatureSchema {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let features = match SchemaFile::deserialize(deserializer)? {
            SchemaFile::Wrapped { features } | SchemaFile::Bare(features) => features,
        };
        FeatureSchema::new(features).map_err(serde::de::Error::custom)
    }
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &features {
            if f.name.is_empty() {
                return Err(Error::Schema("feature with empty name".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name '{}'", f.name)));
            }
            match f.kind {
                FeatureKind::Categorical if f.levels.is_empty() => {
                    return Err(Error::Schema(format!(
                        "categorical feature '{}' has no levels",
                        f.name
                    )));
                }
                FeatureKind::Categorical => {
                    let distinct: HashSet<_> = f.levels.iter().collect();
                    if distinct.len() != f.levels.len() {
                        return Err(Error::Schema(format!(
                            "categorical feature '{}' repeats a level",
                            f.name
                        )));
                    }
                }
                FeatureKind::Binary if !(f.levels.is_empty() || f.levels.len() == 2) => {
                    return Err(Error::Schema(format!(
                        "binary feature '{}' must name zero or two levels",
                        f.name
                    )));
                }
                _ => {}
            }
        }
        if !features.iter().any(|f| f.actionability == Actionability::Free) {
            return Err(Error::Schema("schema needs at least one free feature".into()));
        }
        Ok(FeatureSchema { features })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn encoded_width(&self) -> usize {
        self.features.iter().map(FeatureSpec::width).sum()
    }

    pub fn immutable_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.actionability == Actionability::Immutable)
            .map(|(i, _)| i)
    }
}
