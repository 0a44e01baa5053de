//! Differentiable finite-difference estimates of the decoder's mixed
//! partials `d^2 g_j / (dv_k dx_S,l)`.
//!
//! Every estimate is built from forward decoder evaluations on a single
//! stacked batch, so the result stays differentiable in the decoder weights.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cae::Decoder;
use crate::autodiff::{Tape, Tensor, Var};
use crate::{Error, Result};

/// Exact-loop enumeration is only offered up to this many latent/action dims.
pub const MAX_EXACT_DIM: usize = 32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum HessianMode {
    /// Every `(k, l)` pair.
    #[default]
    ExactLoop,
    /// Mean of squared second differences along random sign directions.
    Rademacher { samples: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyForm {
    #[default]
    SumOfSquares,
    /// Signed sum of the entries; can go negative.
    RawSum,
}

fn unit_row(width: usize, index: usize, value: f64) -> Tensor {
    let mut row = Tensor::zeros(1, width);
    row.values_mut()[index] = value;
    row
}

/// Applies four `(v, x_S)` perturbation sets as one decoder call and returns
/// `(pp - pm - mp + mm) / (4 eps^2)` with one row per stacked input row.
fn second_difference(
    tape: &mut Tape,
    decoder: &dyn Decoder,
    v_plus: Vec<Var>,
    v_minus: Vec<Var>,
    s_plus: Vec<Var>,
    s_minus: Vec<Var>,
    eps: f64,
) -> Result<Var> {
    let v_all: Vec<Var> = [&v_plus[..], &v_plus, &v_minus, &v_minus].concat();
    let s_all: Vec<Var> = [&s_plus[..], &s_minus, &s_plus, &s_minus].concat();
    let v_stack = tape.concat_rows(&v_all)?;
    let s_stack = tape.concat_rows(&s_all)?;
    let out = decoder.decode(tape, v_stack, s_stack)?;
    let block = tape.shape(out).0 / 4;
    let pp = tape.slice_rows(out, 0..block)?;
    let pm = tape.slice_rows(out, block..2 * block)?;
    let mp = tape.slice_rows(out, 2 * block..3 * block)?;
    let mm = tape.slice_rows(out, 3 * block..4 * block)?;
    let a = tape.sub(pp, pm)?;
    let b = tape.sub(a, mp)?;
    let c = tape.add(b, mm)?;
    Ok(tape.scale(c, 1.0 / (4.0 * eps * eps))?)
}

fn check_dims(tape: &Tape, decoder: &dyn Decoder, v: Var, x_s: Var, eps: f64) -> Result<(usize, usize, usize)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {eps}")));
    }
    let (b, k) = tape.shape(v);
    let (b2, l) = tape.shape(x_s);
    if b != b2 || k != decoder.latent_dim() || l != decoder.action_dim() {
        return Err(Error::Precondition(format!(
            "decoder expects v:{} and x_S:{} columns, got {:?} and {:?}",
            decoder.latent_dim(),
            decoder.action_dim(),
            (b, k),
            (b2, l)
        )));
    }
    if l == 0 || k == 0 || b == 0 {
        return Err(Error::Precondition("mixed partials need non-empty v, x_S and batch".into()));
    }
    Ok((b, k, l))
}

/// Mixed-partial estimates for all pairs, shaped `(K * L * B) x d`; the block
/// for pair `(k, l)` starts at row `(k * L + l) * B`.
pub fn mixed_partials(tape: &mut Tape, decoder: &dyn Decoder, v: Var, x_s: Var, eps: f64) -> Result<Var> {
    let (_, k_dim, l_dim) = check_dims(tape, decoder, v, x_s, eps)?;
    if k_dim > MAX_EXACT_DIM || l_dim > MAX_EXACT_DIM {
        return Err(Error::Precondition(format!(
            "exact-loop mixed partials limited to {MAX_EXACT_DIM} dims, got |v|={k_dim}, |S|={l_dim}"
        )));
    }
    let mut shifted = |base: Var, width: usize, i: usize, sign: f64| -> Result<Var> {
        let row = tape.leaf(unit_row(width, i, sign * eps));
        Ok(tape.add(base, row)?)
    };
    let v_plus_k: Vec<Var> = (0..k_dim).map(|k| shifted(v, k_dim, k, 1.0)).collect::<Result<_>>()?;
    let v_minus_k: Vec<Var> = (0..k_dim).map(|k| shifted(v, k_dim, k, -1.0)).collect::<Result<_>>()?;
    let s_plus_l: Vec<Var> = (0..l_dim).map(|l| shifted(x_s, l_dim, l, 1.0)).collect::<Result<_>>()?;
    let s_minus_l: Vec<Var> = (0..l_dim).map(|l| shifted(x_s, l_dim, l, -1.0)).collect::<Result<_>>()?;

    let pairs = (0..k_dim).flat_map(|k| (0..l_dim).map(move |l| (k, l)));
    let (mut vp, mut vm, mut sp, mut sm) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, l) in pairs {
        vp.push(v_plus_k[k]);
        vm.push(v_minus_k[k]);
        sp.push(s_plus_l[l]);
        sm.push(s_minus_l[l]);
    }
    second_difference(tape, decoder, vp, vm, sp, sm, eps)
}

/// Hessian penalty over a batch, averaged over rows and summed over outputs
/// and `(k, l)` pairs.
#[allow(clippy::too_many_arguments)]
pub fn hessian_penalty(
    tape: &mut Tape,
    decoder: &dyn Decoder,
    v: Var,
    x_s: Var,
    eps: f64,
    mode: HessianMode,
    form: PenaltyForm,
    rng: &mut ChaCha8Rng,
) -> Result<Var> {
    let (batch, k_dim, l_dim) = check_dims(tape, decoder, v, x_s, eps)?;
    let h = match mode {
        HessianMode::ExactLoop => mixed_partials(tape, decoder, v, x_s, eps)?,
        HessianMode::Rademacher { samples } => {
            if samples == 0 {
                return Err(Error::Config("rademacher mode needs at least one sample".into()));
            }
            if form == PenaltyForm::RawSum {
                return Err(Error::Config("the raw-sum form has no rademacher estimator".into()));
            }
            let mut signs = |cols: usize| {
                let values = (0..batch * cols)
                    .map(|_| if rng.random::<bool>() { eps } else { -eps })
                    .collect();
                Tensor::from_parts(batch, cols, values)
            };
            let (mut vp, mut vm, mut sp, mut sm) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for _ in 0..samples {
                let rv = signs(k_dim);
                let rs = signs(l_dim);
                let rv = tape.leaf(rv);
                let rs = tape.leaf(rs);
                vp.push(tape.add(v, rv)?);
                vm.push(tape.sub(v, rv)?);
                sp.push(tape.add(x_s, rs)?);
                sm.push(tape.sub(x_s, rs)?);
            }
            let d = second_difference(tape, decoder, vp, vm, sp, sm, eps)?;
            let sq = tape.square(d)?;
            let total = tape.sum(sq)?;
            return Ok(tape.scale(total, 1.0 / (samples * batch) as f64)?);
        }
    };
    let terms = match form {
        PenaltyForm::SumOfSquares => tape.square(h)?,
        PenaltyForm::RawSum => h,
    };
    let total = tape.sum(terms)?;
    Ok(tape.scale(total, 1.0 / batch as f64)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::FnDecoder;
    use rand::SeedableRng;

    fn penalty(decoder: &dyn Decoder, v: &[f64], s: &[f64], mode: HessianMode, form: PenaltyForm) -> Result<f64> {
        let mut tape = Tape::new();
        let vv = tape.leaf(Tensor::new(v.len() / decoder.latent_dim(), decoder.latent_dim(), v.to_vec())?);
        let sv = tape.leaf(Tensor::new(s.len() / decoder.action_dim(), decoder.action_dim(), s.to_vec())?);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = hessian_penalty(&mut tape, decoder, vv, sv, 1e-2, mode, form, &mut rng)?;
        Ok(tape.value(p).item().unwrap())
    }

    #[test]
    fn additive_decoder_scores_zero() {
        let dec = FnDecoder::new(1, 1, 1, |t, v, s| t.add(v, s));
        let p = penalty(&dec, &[0.2, 0.7], &[0.4, 0.1], HessianMode::ExactLoop, PenaltyForm::SumOfSquares).unwrap();
        assert!(p.abs() < 1e-8);
    }

    #[test]
    fn bilinear_decoder_scores_one() {
        let dec = FnDecoder::new(1, 1, 1, |t, v, s| t.mul(v, s));
        let p = penalty(&dec, &[0.3], &[0.6], HessianMode::ExactLoop, PenaltyForm::SumOfSquares).unwrap();
        assert!((p - 1.0).abs() < 1e-6, "{p}");
        let r = penalty(&dec, &[0.3], &[0.6], HessianMode::Rademacher { samples: 4 }, PenaltyForm::SumOfSquares).unwrap();
        assert!((r - 1.0).abs() < 1e-6, "{r}");
    }

    #[test]
    fn separable_squares_score_zero() {
        let dec = FnDecoder::new(1, 1, 1, |t, v, s| {
            let a = t.square(v)?;
            let b = t.square(s)?;
            t.add(a, b)
        });
        let p = penalty(&dec, &[0.9], &[0.2], HessianMode::ExactLoop, PenaltyForm::SumOfSquares).unwrap();
        assert!(p.abs() < 1e-8);
    }

    #[test]
    fn raw_sum_can_be_negative() {
        let dec = FnDecoder::new(1, 1, 1, |t, v, s| {
            let m = t.mul(v, s)?;
            t.scale(m, -2.0)
        });
        let p = penalty(&dec, &[0.5], &[0.5], HessianMode::ExactLoop, PenaltyForm::RawSum).unwrap();
        assert!((p + 2.0).abs() < 1e-6);
    }

    #[test]
    fn non_positive_step_is_rejected() {
        let dec = FnDecoder::new(1, 1, 1, |t, v, s| t.add(v, s));
        let mut tape = Tape::new();
        let v = tape.leaf(Tensor::zeros(1, 1));
        let s = tape.leaf(Tensor::zeros(1, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = hessian_penalty(&mut tape, &dec, v, s, 0.0, HessianMode::ExactLoop, PenaltyForm::SumOfSquares, &mut rng);
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
