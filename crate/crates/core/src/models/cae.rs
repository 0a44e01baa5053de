use std::ops::Range;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::CaeArchitecture;
use super::mlp::{BoundMlp, Mlp};
use crate::autodiff::{jacobian, AutodiffError, JacobianMethod, Tape, Tensor, Var};
use crate::{Error, Result};

/// The generative map `g(v, x_S)`.
pub trait Decoder: Send + Sync {
    fn latent_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// `v` is `B x latent_dim`, `x_s` is `B x action_dim`; returns `B x output_dim`.
    fn decode(&self, tape: &mut Tape, v: Var, x_s: Var) -> Result<Var, AutodiffError>;
}

type DecodeFn = dyn Fn(&mut Tape, Var, Var) -> Result<Var, AutodiffError> + Send + Sync;

/// Wraps a closure as a [`Decoder`]; handy for analytic fixtures.
pub struct FnDecoder {
    latent: usize,
    action: usize,
    output: usize,
    f: Box<DecodeFn>,
}

impl FnDecoder {
    pub fn new(
        latent: usize,
        action: usize,
        output: usize,
        f: impl Fn(&mut Tape, Var, Var) -> Result<Var, AutodiffError> + Send + Sync + 'static,
    ) -> Self {
        FnDecoder {
            latent,
            action,
            output,
            f: Box::new(f),
        }
    }
}

impl Decoder for FnDecoder {
    fn latent_dim(&self) -> usize {
        self.latent
    }
    fn action_dim(&self) -> usize {
        self.action
    }
    fn output_dim(&self) -> usize {
        self.output
    }
    fn decode(&self, tape: &mut Tape, v: Var, x_s: Var) -> Result<Var, AutodiffError> {
        (self.f)(tape, v, x_s)
    }
}

/// An encoder/decoder pair with a fixed action set `S`: `x -> (v, x_S) -> x_hat`.
pub trait Generator: Decoder {
    /// Encoded-column indices of `S`, in code order.
    fn action_columns(&self) -> &[usize];

    fn latent_of(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn generate(&self, v: &[f64], x_s: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let vv = tape.leaf(Tensor::new(1, v.len(), v.to_vec())?);
        let sv = tape.leaf(Tensor::new(1, x_s.len(), x_s.to_vec())?);
        let out = self.decode(&mut tape, vv, sv)?;
        Ok(tape.value(out).values().to_vec())
    }
}

/// Full decoder Jacobian `d g / d [v, x_S]` at one point, shaped
/// `output_dim x (latent_dim + action_dim)`; the last `action_dim` columns are
/// `Y = d g / d x_S`.
pub fn decoder_jacobian(decoder: &dyn Decoder, v: &[f64], x_s: &[f64], method: JacobianMethod) -> Result<Tensor> {
    let k = v.len();
    let l = x_s.len();
    let at: Vec<f64> = v.iter().chain(x_s).copied().collect();
    let j = jacobian(
        |tape, z| {
            let vv = tape.slice_cols(z, 0..k)?;
            let sv = tape.slice_cols(z, k..k + l)?;
            decoder.decode(tape, vv, sv)
        },
        &at,
        method,
    )?;
    Ok(j)
}

type EncodeFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A [`Generator`] assembled from closures, for analytic fixtures.
pub struct FnGenerator {
    decoder: FnDecoder,
    columns: Vec<usize>,
    encode: Box<EncodeFn>,
}

impl FnGenerator {
    pub fn new(decoder: FnDecoder, columns: Vec<usize>, encode: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        FnGenerator {
            decoder,
            columns,
            encode: Box::new(encode),
        }
    }
}

impl Decoder for FnGenerator {
    fn latent_dim(&self) -> usize {
        self.decoder.latent_dim()
    }
    fn action_dim(&self) -> usize {
        self.decoder.action_dim()
    }
    fn output_dim(&self) -> usize {
        self.decoder.output_dim()
    }
    fn decode(&self, tape: &mut Tape, v: Var, x_s: Var) -> Result<Var, AutodiffError> {
        self.decoder.decode(tape, v, x_s)
    }
}

impl Generator for FnGenerator {
    fn action_columns(&self) -> &[usize] {
        &self.columns
    }
    fn latent_of(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok((self.encode)(x))
    }
}

/// Conditional autoencoder: `e(x) = v`, `g(v, x_S) = x_hat`.
///
/// With `skip` set, `x_S` is added onto the pre-softmax output columns at `S`,
/// so the decoder only learns a residual there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalAutoencoder {
    encoder: Mlp,
    decoder: Mlp,
    dim: usize,
    s_columns: Vec<usize>,
    skip: bool,
    groups: Vec<Range<usize>>,
}

impl ConditionalAutoencoder {
    /// Fresh network for `dim` encoded columns. `groups` are the categorical
    /// output blocks that receive a softmax. An empty `s_columns` gives a
    /// plain autoencoder whose code is all of `v`.
    pub fn new(
        dim: usize,
        s_columns: Vec<usize>,
        groups: Vec<Range<usize>>,
        arch: &CaeArchitecture,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let latent = if s_columns.is_empty() {
            arch.code_len.max(1)
        } else {
            arch.latent_dim(s_columns.len())
        };
        let mut enc_sizes = vec![dim];
        enc_sizes.extend(&arch.encoder_hidden);
        enc_sizes.push(latent);
        let mut dec_sizes = vec![latent + s_columns.len()];
        dec_sizes.extend(&arch.decoder_hidden);
        dec_sizes.push(dim);
        let encoder = Mlp::new(&enc_sizes, arch.activation, rng)?;
        let decoder = Mlp::new(&dec_sizes, arch.activation, rng)?;
        let skip = !s_columns.is_empty();
        ConditionalAutoencoder::from_parts(encoder, decoder, s_columns, skip, groups)
    }

    pub fn from_parts(
        encoder: Mlp,
        decoder: Mlp,
        s_columns: Vec<usize>,
        skip: bool,
        groups: Vec<Range<usize>>,
    ) -> Result<Self> {
        let dim = encoder.input_dim();
        let latent = encoder.output_dim();
        if decoder.input_dim() != latent + s_columns.len() || decoder.output_dim() != dim {
            return Err(Error::Config(format!(
                "decoder sizes {:?} do not fit encoder {:?} with |S|={}",
                decoder.sizes(),
                encoder.sizes(),
                s_columns.len()
            )));
        }
        let mut sorted = s_columns.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != s_columns.len() || s_columns.iter().any(|&c| c >= dim) {
            return Err(Error::Config(format!("invalid action columns {s_columns:?} for width {dim}")));
        }
        if groups.iter().any(|g| g.start >= g.end || g.end > dim) {
            return Err(Error::Config("categorical group outside the output width".into()));
        }
        Ok(ConditionalAutoencoder {
            encoder,
            decoder,
            dim,
            s_columns,
            skip,
            groups,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Encoded-column indices of `S`.
    pub fn s_columns(&self) -> &[usize] {
        &self.s_columns
    }

    pub fn has_skip(&self) -> bool {
        self.skip
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub(crate) fn networks_mut(&mut self) -> (&mut Mlp, &mut Mlp) {
        (&mut self.encoder, &mut self.decoder)
    }

    pub fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }

    /// Length of the full code `[v, x_S]`.
    pub fn code_len(&self) -> usize {
        self.encoder.output_dim() + self.s_columns.len()
    }

    pub fn select_s(&self, x: &[f64]) -> Vec<f64> {
        self.s_columns.iter().map(|&c| x[c]).collect()
    }

    fn selection_matrix(&self) -> Tensor {
        let mut p = Tensor::zeros(self.s_columns.len(), self.dim);
        let values = p.values_mut();
        for (i, &c) in self.s_columns.iter().enumerate() {
            values[i * self.dim + c] = 1.0;
        }
        p
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundCae<'_> {
        let encoder = self.encoder.bind(tape);
        let decoder = self.decoder.bind(tape);
        BoundCae {
            cae: self,
            encoder,
            decoder,
        }
    }

    pub fn encode(&self, tape: &mut Tape, x: Var) -> Result<Var, AutodiffError> {
        self.encoder.forward(tape, x)
    }

    /// `v = e(x)` for one row.
    pub fn encode_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.encoder.predict(&Tensor::row_vector(x)?)?.into_values())
    }

    pub fn decode_row(&self, v: &[f64], x_s: &[f64]) -> Result<Vec<f64>> {
        self.generate(v, x_s)
    }

    /// `g(e(x), x_S)`.
    pub fn reconstruct_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        let v = self.encode_row(x)?;
        self.decode_row(&v, &self.select_s(x))
    }

    fn finish(&self, tape: &mut Tape, residual: Var, x_s: Var) -> Result<Var, AutodiffError> {
        let mut out = residual;
        if self.skip && !self.s_columns.is_empty() {
            let p = tape.leaf(self.selection_matrix());
            let lifted = tape.matmul(x_s, p)?;
            out = tape.add(out, lifted)?;
        }
        if !self.groups.is_empty() {
            out = tape.softmax_groups(out, &self.groups)?;
        }
        Ok(out)
    }

    fn code(&self, tape: &mut Tape, v: Var, x_s: Var) -> Result<Var, AutodiffError> {
        if self.s_columns.is_empty() {
            Ok(v)
        } else {
            tape.concat_cols(&[v, x_s])
        }
    }
}

impl Decoder for ConditionalAutoencoder {
    fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }
    fn action_dim(&self) -> usize {
        self.s_columns.len()
    }
    fn output_dim(&self) -> usize {
        self.dim
    }
    fn decode(&self, tape: &mut Tape, v: Var, x_s: Var) -> Result<Var, AutodiffError> {
        let z = self.code(tape, v, x_s)?;
        let r = self.decoder.forward(tape, z)?;
        self.finish(tape, r, x_s)
    }
}

impl Generator for ConditionalAutoencoder {
    fn action_columns(&self) -> &[usize] {
        &self.s_columns
    }
    fn latent_of(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.encode_row(x)
    }
}

/// A [`ConditionalAutoencoder`] whose weights are leaves on one tape, for
/// training. Its [`Decoder`] impl must be used with that same tape.
pub struct BoundCae<'a> {
    cae: &'a ConditionalAutoencoder,
    pub encoder: BoundMlp,
    pub decoder: BoundMlp,
}

impl BoundCae<'_> {
    pub fn encode(&self, tape: &mut Tape, x: Var) -> Result<Var, AutodiffError> {
        self.encoder.forward(tape, x)
    }

    /// Parameter handles in encoder-then-decoder order.
    pub fn parameters(&self) -> Vec<Var> {
        self.encoder.parameters().chain(self.decoder.parameters()).collect()
    }
}

impl Decoder for BoundCae<'_> {
    fn latent_dim(&self) -> usize {
        self.cae.latent_dim()
    }
    fn action_dim(&self) -> usize {
        self.cae.action_dim()
    }
    fn output_dim(&self) -> usize {
        self.cae.dim
    }
    fn decode(&self, tape: &mut Tape, v: Var, x_s: Var) -> Result<Var, AutodiffError> {
        let z = self.cae.code(tape, v, x_s)?;
        let r = self.decoder.forward(tape, z)?;
        self.cae.finish(tape, r, x_s)
    }
}
