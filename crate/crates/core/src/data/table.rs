use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schema::{FeatureKind, FeatureSchema, FeatureSpec};
use crate::{Error, Result};

/// A typed raw cell. Binary features are stored as `Number(0.0 | 1.0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Number(f64),
    Level(String),
}

/// Rows validated against a schema, before encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub schema: FeatureSchema,
    pub rows: Vec<Vec<RawValue>>,
    pub labels: Vec<u8>,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> RawTable {
        RawTable {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

fn parse_cell(spec: &FeatureSpec, text: &str, row: usize) -> Result<RawValue> {
    let text = text.trim();
    let fail = |message: String| Error::Data {
        row,
        column: spec.name.clone(),
        message,
    };
    if text.is_empty() {
        return Err(fail("missing value".into()));
    }
    match spec.kind {
        FeatureKind::Continuous => {
            let v: f64 = text
                .parse()
                .map_err(|_| fail(format!("'{text}' is not a number")))?;
            if !v.is_finite() {
                return Err(fail(format!("'{text}' is not finite")));
            }
            Ok(RawValue::Number(v))
        }
        FeatureKind::Binary => parse_binary(spec, text)
            .map(RawValue::Number)
            .ok_or_else(|| fail(format!("'{text}' is not a binary value"))),
        FeatureKind::Categorical => {
            if spec.levels.iter().any(|l| l == text) {
                Ok(RawValue::Level(text.to_string()))
            } else {
                Err(fail(format!("unknown level '{text}'")))
            }
        }
    }
}

fn parse_binary(spec: &FeatureSpec, text: &str) -> Option<f64> {
    if let Some(i) = spec.levels.iter().position(|l| l == text) {
        return Some(i as f64);
    }
    parse_flag(text)
}

fn parse_flag(text: &str) -> Option<f64> {
    match text.to_ascii_lowercase().as_str() {
        "0" | "0.0" | "false" | "no" => Some(0.0),
        "1" | "1.0" | "true" | "yes" => Some(1.0),
        _ => None,
    }
}

/// Parses a row given as feature name -> JSON scalar. Every schema feature
/// must be present and no other key is accepted.
pub fn parse_named_row(schema: &FeatureSchema, values: &BTreeMap<String, serde_json::Value>) -> Result<Vec<RawValue>> {
    if let Some(extra) = values.keys().find(|k| schema.index_of(k).is_none()) {
        return Err(Error::Schema(format!("unknown feature '{extra}'")));
    }
    schema
        .features()
        .iter()
        .map(|spec| {
            let value = values.get(&spec.name).ok_or_else(|| Error::Data {
                row: 0,
                column: spec.name.clone(),
                message: "missing value".into(),
            })?;
            let text = match value {
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                serde_json::Value::String(s) => s.clone(),
                other => {
                    return Err(Error::Data {
                        row: 0,
                        column: spec.name.clone(),
                        message: format!("expected a scalar, got {other}"),
                    })
                }
            };
            parse_cell(spec, &text, 0)
        })
        .collect()
}

/// Reads CSV text with a header row. Every schema feature and the label must
/// appear in the header; other columns are ignored.
pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema, label_column: &str) -> Result<RawTable> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("csv header lacks column '{name}'")))
    };
    let positions = schema
        .features()
        .iter()
        .map(|f| find(&f.name))
        .collect::<Result<Vec<_>>>()?;
    let label_pos = find(label_column)?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in csv.records().enumerate() {
        let record = record?;
        let mut values = Vec::with_capacity(positions.len());
        for (spec, &pos) in schema.features().iter().zip(&positions) {
            values.push(parse_cell(spec, record.get(pos).unwrap_or(""), row)?);
        }
        let raw_label = record.get(label_pos).unwrap_or("").trim();
        let label = parse_flag(raw_label).ok_or_else(|| Error::Data {
            row,
            column: label_column.to_string(),
            message: format!("label '{raw_label}' is not binary"),
        })?;
        rows.push(values);
        labels.push(label as u8);
    }
    Ok(RawTable {
        schema: schema.clone(),
        rows,
        labels,
    })
}

pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema, label_column: &str) -> Result<RawTable> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file), schema, label_column)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            FeatureSpec::continuous("income"),
            FeatureSpec::categorical("city", &["A", "B"]),
        ])
        .unwrap()
    }

    #[test]
    fn reads_typed_rows() {
        let text = "income,city,y\n1.5,A,0\n2,B,1\n0,B,0\n";
        let t = read_csv(text.as_bytes(), &schema(), "y").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.rows[1], vec![RawValue::Number(2.0), RawValue::Level("B".into())]);
        assert_eq!(t.labels, vec![0, 1, 0]);
    }

    #[test]
    fn unknown_level_reports_row() {
        let text = "income,city,y\n1,A,0\n1,Z,1\n";
        match read_csv(text.as_bytes(), &schema(), "y") {
            Err(Error::Data { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "city");
            }
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn named_rows() {
        let values: BTreeMap<String, serde_json::Value> =
            serde_json::from_str(r#"{"income": 2.5, "city": "B"}"#).unwrap();
        let row = parse_named_row(&schema(), &values).unwrap();
        assert_eq!(row, vec![RawValue::Number(2.5), RawValue::Level("B".into())]);
        let missing: BTreeMap<String, serde_json::Value> = serde_json::from_str(r#"{"income": 1}"#).unwrap();
        assert!(matches!(parse_named_row(&schema(), &missing), Err(Error::Data { .. })));
        let extra: BTreeMap<String, serde_json::Value> =
            serde_json::from_str(r#"{"income": 1, "city": "A", "zip": 3}"#).unwrap();
        assert!(matches!(parse_named_row(&schema(), &extra), Err(Error::Schema(_))));
        let nested: BTreeMap<String, serde_json::Value> =
            serde_json::from_str(r#"{"income": [1], "city": "A"}"#).unwrap();
        assert!(parse_named_row(&schema(), &nested).is_err());
    }

    #[test]
    fn missing_values_and_bad_labels_are_rejected() {
        assert!(read_csv("income,city,y\n,A,0\n".as_bytes(), &schema(), "y").is_err());
        assert!(read_csv("income,city,y\n1,A,2\n".as_bytes(), &schema(), "y").is_err());
        assert!(read_csv("income,y\n1,0\n".as_bytes(), &schema(), "y").is_err());
    }
}
