use std::ops::Range;

use super::tensor::{matmul_raw, Shape, Tensor};
use super::AutodiffError;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    Same,
    Row,
    Scalar,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var, Broadcast),
    Sub(Var, Var, Broadcast),
    Mul(Var, Var, Broadcast),
    Scale(Var, f64),
    Offset(Var),
    Relu(Var),
    Sigmoid(Var),
    Softplus(Var),
    Square(Var),
    Abs(Var),
    Sum(Var),
    Mean(Var),
    RowSum(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    SoftmaxGroups(Var, Vec<Range<usize>>),
}

impl Op {
    fn tag(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Offset(..) => "offset",
            Op::Relu(..) => "relu",
            Op::Sigmoid(..) => "sigmoid",
            Op::Softplus(..) => "softplus",
            Op::Square(..) => "square",
            Op::Abs(..) => "abs",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::RowSum(..) => "row_sum",
            Op::ConcatCols(..) => "concat_cols",
            Op::SliceCols(..) => "slice_cols",
            Op::ConcatRows(..) => "concat_rows",
            Op::SliceRows(..) => "slice_rows",
            Op::SoftmaxGroups(..) => "softmax_groups",
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Append-only record of a computation. Nodes are stored in creation order,
/// which is a topological order because every op only references earlier nodes.
#[derive(Default, Debug)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Result of a backward pass: one gradient per node up to the seed.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Shape>,
}

impl Gradients {
    /// Gradient of the seed with respect to `var`; zeros when `var` does not
    /// influence the seed.
    pub fn get(&self, var: Var) -> Tensor {
        match self.grads.get(var.0) {
            Some(Some(g)) => g.clone(),
            Some(None) => {
                let (r, c) = self.shapes[var.0];
                Tensor::zeros(r, c)
            }
            None => panic!("variable {var:?} was recorded after the seed"),
        }
    }

    pub fn take(&mut self, var: Var) -> Tensor {
        let (r, c) = self.shapes[var.0];
        self.grads[var.0].take().unwrap_or_else(|| Tensor::zeros(r, c))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> Shape {
        self.nodes[var.0].value.shape()
    }

    /// Operation tag of a recorded node, e.g. `"matmul"`.
    pub fn op_name(&self, var: Var) -> &'static str {
        self.nodes[var.0].op.tag()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn push_checked(&mut self, value: Tensor, op: Op) -> Result<Var, AutodiffError> {
        if value.values().iter().any(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFinite {
                context: format!("forward value of {}", op.tag()),
            });
        }
        Ok(self.push(value, op))
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push_checked(value, Op::MatMul(a, b))
    }

    fn broadcast_kind(&self, op: &'static str, a: Var, b: Var) -> Result<Broadcast, AutodiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb {
            Ok(Broadcast::Same)
        } else if sb == (1, 1) {
            Ok(Broadcast::Scalar)
        } else if sb.0 == 1 && sb.1 == sa.1 {
            Ok(Broadcast::Row)
        } else {
            Err(AutodiffError::ShapeMismatch {
                op,
                left: sa,
                right: sb,
            })
        }
    }

    fn elementwise(&self, a: Var, b: Var, kind: Broadcast, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let ta = self.value(a);
        let tb = self.value(b);
        let cols = ta.cols();
        let values = ta
            .values()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let y = match kind {
                    Broadcast::Same => tb.values()[i],
                    Broadcast::Row => tb.values()[i % cols],
                    Broadcast::Scalar => tb.values()[0],
                };
                f(x, y)
            })
            .collect();
        Tensor::from_parts(ta.rows(), cols, values)
    }

    /// Elementwise `a + b`; `b` may be a row vector or a 1x1 scalar broadcast over `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let kind = self.broadcast_kind("add", a, b)?;
        let value = self.elementwise(a, b, kind, |x, y| x + y);
        self.push_checked(value, Op::Add(a, b, kind))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let kind = self.broadcast_kind("sub", a, b)?;
        let value = self.elementwise(a, b, kind, |x, y| x - y);
        self.push_checked(value, Op::Sub(a, b, kind))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let kind = self.broadcast_kind("mul", a, b)?;
        let value = self.elementwise(a, b, kind, |x, y| x * y);
        self.push_checked(value, Op::Mul(a, b, kind))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, AutodiffError> {
        let value = self.value(a).map(|x| x * factor);
        self.push_checked(value, Op::Scale(a, factor))
    }

    /// Adds a constant to every entry.
    pub fn offset(&mut self, a: Var, constant: f64) -> Result<Var, AutodiffError> {
        let value = self.value(a).map(|x| x + constant);
        self.push_checked(value, Op::Offset(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    /// `ln(1 + e^x)`, computed stably.
    pub fn softplus(&mut self, a: Var) -> Var {
        let value = self.value(a).map(softplus);
        self.push(value, Op::Softplus(a))
    }

    pub fn square(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let value = self.value(a).map(|x| x * x);
        self.push_checked(value, Op::Square(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::abs);
        self.push(value, Op::Abs(a))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let value = Tensor::from_parts(1, 1, vec![self.value(a).sum()]);
        self.push_checked(value, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(AutodiffError::ShapeMismatch {
                op: "mean",
                left: t.shape(),
                right: (1, 1),
            });
        }
        let value = Tensor::from_parts(1, 1, vec![t.sum() / t.len() as f64]);
        self.push_checked(value, Op::Mean(a))
    }

    /// Sums each row, producing an `n x 1` column.
    pub fn row_sum(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let t = self.value(a);
        let values = (0..t.rows()).map(|r| t.row(r).iter().sum()).collect();
        let value = Tensor::from_parts(t.rows(), 1, values);
        self.push_checked(value, Op::RowSum(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let rows = parts.first().map_or(0, |&p| self.shape(p).0);
        let mut cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.0 != rows {
                return Err(AutodiffError::ShapeMismatch {
                    op: "concat_cols",
                    left: self.shape(parts[0]),
                    right: s,
                });
            }
            cols += s.1;
        }
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                values.extend_from_slice(self.value(p).row(r));
            }
        }
        Ok(self.push(Tensor::from_parts(rows, cols, values), Op::ConcatCols(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, a: Var, cols: Range<usize>) -> Result<Var, AutodiffError> {
        let t = self.value(a);
        if cols.start > cols.end || cols.end > t.cols() {
            return Err(AutodiffError::ShapeMismatch {
                op: "slice_cols",
                left: t.shape(),
                right: (cols.start, cols.end),
            });
        }
        let width = cols.end - cols.start;
        let mut values = Vec::with_capacity(t.rows() * width);
        for r in 0..t.rows() {
            values.extend_from_slice(&t.row(r)[cols.clone()]);
        }
        let value = Tensor::from_parts(t.rows(), width, values);
        Ok(self.push(value, Op::SliceCols(a, cols.start)))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let cols = parts.first().map_or(0, |&p| self.shape(p).1);
        let mut rows = 0;
        let mut values = Vec::new();
        for &p in parts {
            let s = self.shape(p);
            if s.1 != cols {
                return Err(AutodiffError::ShapeMismatch {
                    op: "concat_rows",
                    left: self.shape(parts[0]),
                    right: s,
                });
            }
            rows += s.0;
            values.extend_from_slice(self.value(p).values());
        }
        Ok(self.push(Tensor::from_parts(rows, cols, values), Op::ConcatRows(parts.to_vec())))
    }

    pub fn slice_rows(&mut self, a: Var, rows: Range<usize>) -> Result<Var, AutodiffError> {
        let t = self.value(a);
        if rows.start > rows.end || rows.end > t.rows() {
            return Err(AutodiffError::ShapeMismatch {
                op: "slice_rows",
                left: t.shape(),
                right: (rows.start, rows.end),
            });
        }
        let c = t.cols();
        let values = t.values()[rows.start * c..rows.end * c].to_vec();
        let value = Tensor::from_parts(rows.end - rows.start, c, values);
        Ok(self.push(value, Op::SliceRows(a, rows.start)))
    }

    /// Softmax applied independently to each column range in `groups`, per row.
    /// Columns outside every group pass through unchanged.
    pub fn softmax_groups(&mut self, a: Var, groups: &[Range<usize>]) -> Result<Var, AutodiffError> {
        let t = self.value(a);
        let cols = t.cols();
        for g in groups {
            if g.start >= g.end || g.end > cols {
                return Err(AutodiffError::ShapeMismatch {
                    op: "softmax_groups",
                    left: t.shape(),
                    right: (g.start, g.end),
                });
            }
        }
        let mut values = t.values().to_vec();
        for r in 0..t.rows() {
            let row = &mut values[r * cols..(r + 1) * cols];
            for g in groups {
                let block = &mut row[g.clone()];
                let max = block.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for v in block.iter_mut() {
                    *v = (*v - max).exp();
                    total += *v;
                }
                for v in block.iter_mut() {
                    *v /= total;
                }
            }
        }
        let value = Tensor::from_parts(t.rows(), cols, values);
        self.push_checked(value, Op::SoftmaxGroups(a, groups.to_vec()))
    }

    /// Reverse pass from a scalar `seed`. Every node recorded before the seed
    /// is visited once, in reverse creation order.
    pub fn backward(&self, seed: Var) -> Result<Gradients, AutodiffError> {
        let seed_shape = self.shape(seed);
        if seed_shape != (1, 1) {
            return Err(AutodiffError::NonScalarSeed { shape: seed_shape });
        }
        let count = seed.0 + 1;
        let mut grads: Vec<Option<Tensor>> = vec![None; count];
        grads[seed.0] = Some(Tensor::from_parts(1, 1, vec![1.0]));

        for i in (0..count).rev() {
            let Some(upstream) = grads[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            self.propagate(node, &upstream, &mut grads);
            grads[i] = Some(upstream);
        }

        for g in grads.iter().flatten() {
            if g.values().iter().any(|v| !v.is_finite()) {
                return Err(AutodiffError::NonFinite {
                    context: "backward pass".into(),
                });
            }
        }
        let shapes = self.nodes[..count].iter().map(|n| n.value.shape()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn propagate(&self, node: &Node, up: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let ta = self.value(*a);
                let tb = self.value(*b);
                accumulate(grads, *a, matmul_raw(up, &tb.transpose()));
                accumulate(grads, *b, matmul_raw(&ta.transpose(), up));
            }
            Op::Add(a, b, kind) => {
                accumulate(grads, *a, up.clone());
                accumulate(grads, *b, reduce_broadcast(up, *kind));
            }
            Op::Sub(a, b, kind) => {
                accumulate(grads, *a, up.clone());
                accumulate(grads, *b, reduce_broadcast(&up.map(|g| -g), *kind));
            }
            Op::Mul(a, b, kind) => {
                let ta = self.value(*a);
                let tb = self.value(*b);
                let cols = ta.cols();
                let pick = |i: usize| match kind {
                    Broadcast::Same => tb.values()[i],
                    Broadcast::Row => tb.values()[i % cols],
                    Broadcast::Scalar => tb.values()[0],
                };
                let ga: Vec<f64> = up.values().iter().enumerate().map(|(i, g)| g * pick(i)).collect();
                let gb_full: Vec<f64> = up
                    .values()
                    .iter()
                    .zip(ta.values())
                    .map(|(g, x)| g * x)
                    .collect();
                accumulate(grads, *a, Tensor::from_parts(ta.rows(), cols, ga));
                let gb_full = Tensor::from_parts(ta.rows(), cols, gb_full);
                accumulate(grads, *b, reduce_broadcast(&gb_full, *kind));
            }
            Op::Scale(a, factor) => accumulate(grads, *a, up.map(|g| g * factor)),
            Op::Offset(a) => accumulate(grads, *a, up.clone()),
            Op::Relu(a) => {
                let x = self.value(*a);
                accumulate(grads, *a, zip_map(up, x, |g, x| if x > 0.0 { g } else { 0.0 }));
            }
            Op::Sigmoid(a) => accumulate(grads, *a, zip_map(up, out, |g, y| g * y * (1.0 - y))),
            Op::Softplus(a) => {
                let x = self.value(*a);
                accumulate(grads, *a, zip_map(up, x, |g, x| g * sigmoid(x)));
            }
            Op::Square(a) => {
                let x = self.value(*a);
                accumulate(grads, *a, zip_map(up, x, |g, x| 2.0 * g * x));
            }
            Op::Abs(a) => {
                let x = self.value(*a);
                accumulate(grads, *a, zip_map(up, x, |g, x| g * sign(x)));
            }
            Op::Sum(a) => {
                let (r, c) = self.shape(*a);
                accumulate(grads, *a, Tensor::filled(r, c, up.values()[0]));
            }
            Op::Mean(a) => {
                let (r, c) = self.shape(*a);
                accumulate(grads, *a, Tensor::filled(r, c, up.values()[0] / (r * c) as f64));
            }
            Op::RowSum(a) => {
                let (r, c) = self.shape(*a);
                let mut g = Vec::with_capacity(r * c);
                for row in 0..r {
                    g.extend(std::iter::repeat_n(up.values()[row], c));
                }
                accumulate(grads, *a, Tensor::from_parts(r, c, g));
            }
            Op::ConcatCols(parts) => {
                let total = out.cols();
                let mut offset = 0;
                for &p in parts {
                    let (r, c) = self.shape(p);
                    let mut g = Vec::with_capacity(r * c);
                    for row in 0..r {
                        g.extend_from_slice(&up.values()[row * total + offset..row * total + offset + c]);
                    }
                    accumulate(grads, p, Tensor::from_parts(r, c, g));
                    offset += c;
                }
            }
            Op::SliceCols(a, start) => {
                let (r, c) = self.shape(*a);
                let width = out.cols();
                let mut g = vec![0.0; r * c];
                for row in 0..r {
                    g[row * c + start..row * c + start + width].copy_from_slice(up.row(row));
                }
                accumulate(grads, *a, Tensor::from_parts(r, c, g));
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (r, c) = self.shape(p);
                    let g = up.values()[offset * c..(offset + r) * c].to_vec();
                    accumulate(grads, p, Tensor::from_parts(r, c, g));
                    offset += r;
                }
            }
            Op::SliceRows(a, start) => {
                let (r, c) = self.shape(*a);
                let mut g = vec![0.0; r * c];
                g[start * c..start * c + up.len()].copy_from_slice(up.values());
                accumulate(grads, *a, Tensor::from_parts(r, c, g));
            }
            Op::SoftmaxGroups(a, groups) => {
                let cols = out.cols();
                let mut g = up.values().to_vec();
                for row in 0..out.rows() {
                    let y = out.row(row);
                    let gu = &up.values()[row * cols..(row + 1) * cols];
                    for grp in groups {
                        let dot: f64 = grp.clone().map(|j| gu[j] * y[j]).sum();
                        for j in grp.clone() {
                            g[row * cols + j] = y[j] * (gu[j] - dot);
                        }
                    }
                }
                accumulate(grads, *a, Tensor::from_parts(out.rows(), cols, g));
            }
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let values = a.values().iter().zip(b.values()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_parts(a.rows(), a.cols(), values)
}

fn reduce_broadcast(g: &Tensor, kind: Broadcast) -> Tensor {
    match kind {
        Broadcast::Same => g.clone(),
        Broadcast::Scalar => Tensor::from_parts(1, 1, vec![g.sum()]),
        Broadcast::Row => {
            let mut sums = vec![0.0; g.cols()];
            for r in 0..g.rows() {
                for (s, v) in sums.iter_mut().zip(g.row(r)) {
                    *s += v;
                }
            }
            Tensor::from_parts(1, g.cols(), sums)
        }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], var: Var, g: Tensor) {
    match &mut grads[var.0] {
        Some(existing) => {
            for (e, v) in existing.values_mut().iter_mut().zip(g.values()) {
                *e += v;
            }
        }
        slot @ None => *slot = Some(g),
    }
}
