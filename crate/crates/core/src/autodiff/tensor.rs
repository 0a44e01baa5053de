use std::fmt;

use serde::{Deserialize, Serialize};

use super::AutodiffError;

/// Dense row-major matrix of finite `f64` values.
#[derive(Clone, PartialEq, Serialize)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

/// Matrix shape as `(rows, cols)`.
pub type Shape = (usize, usize);

impl Tensor {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, AutodiffError> {
        if values.len() != rows * cols {
            return Err(AutodiffError::BadLength {
                shape: (rows, cols),
                len: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFinite {
                context: format!("tensor construction at flat index {index}"),
            });
        }
        Ok(Tensor { rows, cols, values })
    }

    /// Builds a tensor without the finiteness scan. Callers guarantee the invariant.
    pub(crate) fn from_parts(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), rows * cols);
        Tensor { rows, cols, values }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor::from_parts(rows, cols, vec![0.0; rows * cols])
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(value.is_finite());
        Tensor::from_parts(rows, cols, vec![value; rows * cols])
    }

    pub fn scalar(value: f64) -> Result<Self, AutodiffError> {
        Tensor::new(1, 1, vec![value])
    }

    pub fn row_vector(values: &[f64]) -> Result<Self, AutodiffError> {
        Tensor::new(1, values.len(), values.to_vec())
    }

    pub fn column_vector(values: &[f64]) -> Result<Self, AutodiffError> {
        Tensor::new(values.len(), 1, values.to_vec())
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AutodiffError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(AutodiffError::ShapeMismatch {
                    op: "from_rows",
                    left: (1, cols),
                    right: (r, row.len()),
                });
            }
            values.extend_from_slice(row);
        }
        Tensor::new(rows.len(), cols, values)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(n, n);
        for i in 0..n {
            t.values[i * n + i] = 1.0;
        }
        t
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> Shape {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    /// Single entry of a 1x1 tensor.
    pub fn item(&self) -> Option<f64> {
        (self.values.len() == 1).then(|| self.values[0])
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Tensor {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &r in indices {
            values.extend_from_slice(self.row(r));
        }
        Tensor::from_parts(indices.len(), self.cols, values)
    }

    pub fn select_columns(&self, indices: &[usize]) -> Tensor {
        let mut values = Vec::with_capacity(self.rows * indices.len());
        for r in 0..self.rows {
            let row = self.row(r);
            values.extend(indices.iter().map(|&c| row[c]));
        }
        Tensor::from_parts(self.rows, indices.len(), values)
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = vec![0.0; self.values.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c * self.rows + r] = self.values[r * self.cols + c];
            }
        }
        Tensor::from_parts(self.cols, self.rows, out)
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, AutodiffError> {
        if self.cols != other.rows {
            return Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(matmul_raw(self, other))
    }

    /// Overwrites the entries in place; rejects non-finite updates.
    pub fn assign(&mut self, values: &[f64]) -> Result<(), AutodiffError> {
        if values.len() != self.values.len() {
            return Err(AutodiffError::BadLength {
                shape: self.shape(),
                len: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFinite {
                context: "tensor assignment".into(),
            });
        }
        self.values.copy_from_slice(values);
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_parts(self.rows, self.cols, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

pub(crate) fn matmul_raw(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, k, m) = (a.rows, a.cols, b.cols);
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let out_row = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let aip = a.values[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let b_row = &b.values[p * m..(p + 1) * m];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aip * bv;
            }
        }
    }
    Tensor::from_parts(n, m, out)
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{}x{}[", self.rows, self.cols)?;
        for r in 0..self.rows {
            if r > 0 {
                write!(f, "; ")?;
            }
            for c in 0..self.cols {
                if c > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.get(r, c))?;
            }
        }
        write!(f, "]")
    }
}

#[derive(Deserialize)]
struct RawTensor {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl<'de> Deserialize<'de> for Tensor {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawTensor::deserialize(deserializer)?;
        Tensor::new(raw.rows, raw.cols, raw.values).map_err(serde::de::Error::custom)
    }
}
