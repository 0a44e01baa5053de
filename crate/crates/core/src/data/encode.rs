use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::schema::{Actionability, FeatureKind, FeatureSchema};
use super::table::{RawTable, RawValue};
use crate::autodiff::Tensor;
use crate::{Error, Result};

/// Source of one encoded column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub name: String,
    pub feature: usize,
    /// Level index for one-hot columns of categorical features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
}

/// Per encoded column min/max learned from the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingWarning {
    pub column: String,
    pub message: String,
}

/// Fitted one-hot + min-max encoder for a schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularEncoder {
    schema: FeatureSchema,
    columns: Vec<EncodedColumn>,
    scaler: ScalerParams,
}

fn layout(schema: &FeatureSchema) -> Vec<EncodedColumn> {
    let mut columns = Vec::with_capacity(schema.encoded_width());
    for (i, f) in schema.features().iter().enumerate() {
        match f.kind {
            FeatureKind::Categorical => {
                for (l, level) in f.levels.iter().enumerate() {
                    columns.push(EncodedColumn {
                        name: format!("{}={}", f.name, level),
                        feature: i,
                        level: Some(l),
                    });
                }
            }
            _ => columns.push(EncodedColumn {
                name: f.name.clone(),
                feature: i,
                level: None,
            }),
        }
    }
    columns
}

impl TabularEncoder {
    /// Fits scaler parameters on `rows` of `table` (all rows when `None`).
    pub fn fit(table: &RawTable, rows: Option<&[usize]>) -> Result<(Self, Vec<EncodingWarning>)> {
        let schema = table.schema.clone();
        let columns = layout(&schema);
        let mut min = vec![0.0; columns.len()];
        let mut max = vec![1.0; columns.len()];
        let mut warnings = Vec::new();
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => r,
            None => {
                all = (0..table.len()).collect();
                &all
            }
        };
        if rows.is_empty() {
            return Err(Error::Config("cannot fit an encoder on zero rows".into()));
        }
        for (c, col) in columns.iter().enumerate() {
            if schema.features()[col.feature].kind != FeatureKind::Continuous {
                continue;
            }
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &r in rows {
                if let RawValue::Number(v) = table.rows[r][col.feature] {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            if lo == hi {
                warnings.push(EncodingWarning {
                    column: col.name.clone(),
                    message: format!("constant column (value {lo}) mapped to 0.0"),
                });
            }
            min[c] = lo;
            max[c] = hi;
        }
        let encoder = TabularEncoder {
            schema,
            columns,
            scaler: ScalerParams { min, max },
        };
        Ok((encoder, warnings))
    }

    /// Encoder for schemas whose continuous values already lie in [0, 1].
    pub fn identity(schema: FeatureSchema) -> Self {
        let columns = layout(&schema);
        let n = columns.len();
        TabularEncoder {
            schema,
            columns,
            scaler: ScalerParams {
                min: vec![0.0; n],
                max: vec![1.0; n],
            },
        }
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn columns(&self) -> &[EncodedColumn] {
        &self.columns
    }

    pub fn scaler(&self) -> &ScalerParams {
        &self.scaler
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Encoded column range of raw feature `feature`.
    pub fn feature_columns(&self, feature: usize) -> Range<usize> {
        let start = self.columns.iter().position(|c| c.feature == feature).unwrap_or(0);
        start..start + self.schema.features()[feature].width()
    }

    /// Column ranges of every categorical feature, for grouped softmax.
    pub fn categorical_groups(&self) -> Vec<Range<usize>> {
        self.schema
            .features()
            .iter()
            .enumerate()
            .filter(|(_, f)| f.kind == FeatureKind::Categorical)
            .map(|(i, _)| self.feature_columns(i))
            .collect()
    }

    pub fn immutable_columns(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| self.schema.features()[c.feature].actionability == Actionability::Immutable)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn encode_row(&self, row: &[RawValue]) -> Result<Vec<f64>> {
        if row.len() != self.schema.len() {
            return Err(Error::Config(format!(
                "row has {} values, schema has {} features",
                row.len(),
                self.schema.len()
            )));
        }
        let mut out = vec![0.0; self.columns.len()];
        for (i, (spec, value)) in self.schema.features().iter().zip(row).enumerate() {
            let range = self.feature_columns(i);
            let mismatch = || Error::Data {
                row: 0,
                column: spec.name.clone(),
                message: format!("value {value:?} does not match kind {:?}", spec.kind),
            };
            match (spec.kind, value) {
                (FeatureKind::Continuous, RawValue::Number(v)) => {
                    let c = range.start;
                    let (lo, hi) = (self.scaler.min[c], self.scaler.max[c]);
                    out[c] = if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
                }
                (FeatureKind::Binary, RawValue::Number(v)) if *v == 0.0 || *v == 1.0 => {
                    out[range.start] = *v;
                }
                (FeatureKind::Binary, RawValue::Level(l)) => {
                    let v = spec.levels.iter().position(|x| x == l).ok_or_else(mismatch)?;
                    out[range.start] = v as f64;
                }
                (FeatureKind::Categorical, RawValue::Level(l)) => {
                    let level = spec.levels.iter().position(|x| x == l).ok_or_else(|| Error::Data {
                        row: 0,
                        column: spec.name.clone(),
                        message: format!("unknown level '{l}'"),
                    })?;
                    out[range.start + level] = 1.0;
                }
                _ => return Err(mismatch()),
            }
        }
        Ok(out)
    }

    /// Inverse of [`encode_row`](Self::encode_row); categorical groups decode by argmax
    /// and binary columns by rounding.
    pub fn decode_row(&self, encoded: &[f64]) -> Vec<RawValue> {
        self.schema
            .features()
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let range = self.feature_columns(i);
                match spec.kind {
                    FeatureKind::Continuous => {
                        let c = range.start;
                        let (lo, hi) = (self.scaler.min[c], self.scaler.max[c]);
                        RawValue::Number(lo + encoded[c] * (hi - lo))
                    }
                    FeatureKind::Binary => {
                        RawValue::Number(if encoded[range.start] >= 0.5 { 1.0 } else { 0.0 })
                    }
                    FeatureKind::Categorical => {
                        let block = &encoded[range];
                        let best = argmax(block);
                        RawValue::Level(spec.levels[best].clone())
                    }
                }
            })
            .collect()
    }

    pub fn encode(self: &Arc<Self>, table: &RawTable) -> Result<EncodedDataset> {
        let mut values = Vec::with_capacity(table.len() * self.width());
        for (r, row) in table.rows.iter().enumerate() {
            let encoded = self.encode_row(row).map_err(|e| match e {
                Error::Data { column, message, .. } => Error::Data { row: r, column, message },
                other => other,
            })?;
            values.extend(encoded);
        }
        Ok(EncodedDataset {
            x: Tensor::new(table.len(), self.width(), values)?,
            labels: table.labels.clone(),
            encoder: Arc::clone(self),
        })
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Encoded feature matrix in [0, 1] with labels and the encoder that produced it.
#[derive(Clone, Debug)]
pub struct EncodedDataset {
    pub x: Tensor,
    pub labels: Vec<u8>,
    pub encoder: Arc<TabularEncoder>,
}

impl EncodedDataset {
    pub fn new(x: Tensor, labels: Vec<u8>, encoder: Arc<TabularEncoder>) -> Result<Self> {
        if x.rows() != labels.len() || x.cols() != encoder.width() {
            return Err(Error::Config(format!(
                "dataset shape {:?} does not match {} labels / {} columns",
                x.shape(),
                labels.len(),
                encoder.width()
            )));
        }
        if x.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config("encoded values must lie in [0, 1]".into()));
        }
        Ok(EncodedDataset { x, labels, encoder })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    pub fn select(&self, indices: &[usize]) -> EncodedDataset {
        EncodedDataset {
            x: self.x.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            encoder: Arc::clone(&self.encoder),
        }
    }
}

/// Fits the encoder on `fit_rows` and encodes every row of `table`.
/// Values outside the training range are clipped into [0, 1].
pub fn encode_scale(
    table: &RawTable,
    fit_rows: &[usize],
) -> Result<(EncodedDataset, Vec<EncodingWarning>)> {
    let (encoder, warnings) = TabularEncoder::fit(table, Some(fit_rows))?;
    let encoder = Arc::new(encoder);
    Ok((encoder.encode(table)?, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::FeatureSpec;

    fn table() -> RawTable {
        let schema = FeatureSchema::new(vec![
            FeatureSpec::continuous("x"),
            FeatureSpec::categorical("c", &["A", "B"]),
            FeatureSpec::binary("flag"),
        ])
        .unwrap();
        let rows = [(0.0, "A", 0.0), (5.0, "B", 1.0), (10.0, "B", 0.0), (12.0, "A", 1.0)]
            .iter()
            .map(|&(x, c, b)| {
                vec![RawValue::Number(x), RawValue::Level(c.into()), RawValue::Number(b)]
            })
            .collect();
        RawTable {
            schema,
            rows,
            labels: vec![0, 1, 1, 0],
        }
    }

    #[test]
    fn min_max_one_hot_and_clipping() {
        let t = table();
        let (ds, warnings) = encode_scale(&t, &[0, 1, 2]).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(ds.row(0), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(ds.row(1), &[0.5, 0.0, 1.0, 1.0]);
        assert_eq!(ds.row(2), &[1.0, 0.0, 1.0, 0.0]);
        // 12 lies above the training max of 10
        assert_eq!(ds.row(3)[0], 1.0);
        assert_eq!(ds.encoder.scaler().max[0], 10.0);
    }

    #[test]
    fn constant_column_maps_to_zero_with_warning() {
        let t = table();
        let (ds, warnings) = encode_scale(&t, &[1]).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(ds.x.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decode_inverts_encode() {
        let t = table();
        let (ds, _) = encode_scale(&t, &[0, 1, 2]).unwrap();
        for r in 0..3 {
            assert_eq!(ds.encoder.decode_row(ds.row(r)), t.rows[r]);
        }
        assert_eq!(ds.encoder.categorical_groups(), vec![1..3]);
    }
}
