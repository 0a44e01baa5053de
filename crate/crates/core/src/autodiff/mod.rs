//! Dense reverse-mode automatic differentiation.
//!
//! A [`Tape`] records operations on small row-major matrices; [`Tape::backward`]
//! replays them in reverse from a scalar seed. Second derivatives are not
//! supported; callers that need them build finite differences out of forward
//! evaluations so the result stays differentiable in the model weights.

mod tape;
mod tensor;

pub use tape::{Gradients, Tape, Var};
pub(crate) use tape::softplus;
pub use tensor::{Shape, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Shape,
        right: Shape,
    },
    #[error("tensor of shape {shape:?} cannot hold {len} values")]
    BadLength { shape: Shape, len: usize },
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
    #[error("backward seed must be a 1x1 scalar, got {shape:?}")]
    NonScalarSeed { shape: Shape },
}

/// How [`jacobian`] obtains derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JacobianMethod {
    /// One reverse pass per output entry.
    Reverse,
    /// Central differences with the given step.
    CentralDifference { step: f64 },
}

impl JacobianMethod {
    pub const DEFAULT_FD_STEP: f64 = 1e-4;

    pub fn finite_difference() -> Self {
        JacobianMethod::CentralDifference {
            step: Self::DEFAULT_FD_STEP,
        }
    }
}

/// Jacobian (`m x n`) of a function mapping a `1 x n` row to a `1 x m` row.
pub fn jacobian<F>(f: F, at: &[f64], method: JacobianMethod) -> Result<Tensor, AutodiffError>
where
    F: Fn(&mut Tape, Var) -> Result<Var, AutodiffError>,
{
    let n = at.len();
    match method {
        JacobianMethod::Reverse => {
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::row_vector(at)?);
            let y = f(&mut tape, x)?;
            let (rows, m) = tape.shape(y);
            if rows != 1 {
                return Err(AutodiffError::ShapeMismatch {
                    op: "jacobian output",
                    left: (rows, m),
                    right: (1, m),
                });
            }
            let mut out = Vec::with_capacity(m * n);
            for i in 0..m {
                let yi = tape.slice_cols(y, i..i + 1)?;
                let seed = tape.sum(yi)?;
                let grads = tape.backward(seed)?;
                out.extend_from_slice(grads.get(x).values());
            }
            Tensor::new(m, n, out)
        }
        JacobianMethod::CentralDifference { step } => {
            let eval = |point: &[f64]| -> Result<Vec<f64>, AutodiffError> {
                let mut tape = Tape::new();
                let x = tape.leaf(Tensor::row_vector(point)?);
                let y = f(&mut tape, x)?;
                Ok(tape.value(y).values().to_vec())
            };
            let base = eval(at)?;
            let m = base.len();
            let mut columns = Vec::with_capacity(n);
            let mut probe = at.to_vec();
            for j in 0..n {
                probe[j] = at[j] + step;
                let plus = eval(&probe)?;
                probe[j] = at[j] - step;
                let minus = eval(&probe)?;
                probe[j] = at[j];
                columns.push(
                    plus.iter()
                        .zip(&minus)
                        .map(|(p, q)| (p - q) / (2.0 * step))
                        .collect::<Vec<_>>(),
                );
            }
            let mut out = vec![0.0; m * n];
            for (j, col) in columns.iter().enumerate() {
                for (i, v) in col.iter().enumerate() {
                    out[i * n + j] = *v;
                }
            }
            Tensor::new(m, n, out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_jacobian_is_the_matrix() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let at = a.transpose();
        for point in [[0.0, 0.0], [0.3, -1.2]] {
            let j = jacobian(
                |t, x| {
                    let m = t.leaf(at.clone());
                    t.matmul(x, m)
                },
                &point,
                JacobianMethod::Reverse,
            )
            .unwrap();
            assert_eq!(j, a);
        }
    }

    #[test]
    fn polynomial_jacobian() {
        // f(x) = [x1^2, x1*x2] at (1, 2) -> [[2, 0], [2, 1]]
        let f = |t: &mut Tape, x: Var| {
            let x1 = t.slice_cols(x, 0..1)?;
            let x2 = t.slice_cols(x, 1..2)?;
            let sq = t.square(x1)?;
            let prod = t.mul(x1, x2)?;
            t.concat_cols(&[sq, prod])
        };
        let exact = jacobian(f, &[1.0, 2.0], JacobianMethod::Reverse).unwrap();
        assert_eq!(exact.values(), &[2.0, 0.0, 2.0, 1.0]);
        let fd = jacobian(f, &[1.0, 2.0], JacobianMethod::finite_difference()).unwrap();
        for (a, b) in exact.values().iter().zip(fd.values()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn non_finite_output_is_an_error() {
        let r = jacobian(
            |t, x| t.scale(x, f64::INFINITY),
            &[1.0],
            JacobianMethod::Reverse,
        );
        assert!(matches!(r, Err(AutodiffError::NonFinite { .. })));
    }
}
