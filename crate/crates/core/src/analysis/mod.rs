//! Cost decomposition and decoder diagnostics.
//!
//! Reported cost splits are l1 (`direct_l1`, `indirect_l1`); the quadratic
//! forms `d^T J^T J d` are exposed alongside as diagnostics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::autodiff::{JacobianMethod, Tape, Tensor};
use crate::models::{decoder_jacobian, mixed_partials, Decoder, Generator};
use crate::recourse::RecourseOutcome;
use crate::{Error, Result};

/// Finite-difference step for mixed partials.
pub const ENTANGLEMENT_EPS: f64 = 1e-2;

/// `d g / d x_S` at `(v, x_S)`, split by output membership in `S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianBlocks {
    /// `|S| x |S|`, rows in `S` order.
    pub direct: Tensor,
    /// `|S^c| x |S|`, rows in column order.
    pub indirect: Tensor,
    pub s_columns: Vec<usize>,
    pub other_columns: Vec<usize>,
    pub v: Vec<f64>,
    pub x_s: Vec<f64>,
}

impl JacobianBlocks {
    /// Mean of the elasticity block entries.
    pub fn mean_elasticity(&self) -> f64 {
        if self.indirect.is_empty() {
            0.0
        } else {
            self.indirect.sum() / self.indirect.len() as f64
        }
    }
}

/// Squared (quadratic-form) direct and indirect costs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCosts {
    pub direct: f64,
    pub indirect: f64,
}

impl QuadraticCosts {
    pub fn total(&self) -> f64 {
        self.direct + self.indirect
    }
}

pub fn jacobian_blocks_at(generator: &dyn Generator, v: &[f64], x_s: &[f64]) -> Result<JacobianBlocks> {
    let s_columns = generator.action_columns().to_vec();
    let full = decoder_jacobian(generator, v, x_s, JacobianMethod::Reverse)?;
    let k = v.len();
    let y = full.select_columns(&(k..k + x_s.len()).collect::<Vec<_>>());
    let other_columns: Vec<usize> = (0..y.rows()).filter(|c| !s_columns.contains(c)).collect();
    Ok(JacobianBlocks {
        direct: y.select_rows(&s_columns),
        indirect: y.select_rows(&other_columns),
        s_columns,
        other_columns,
        v: v.to_vec(),
        x_s: x_s.to_vec(),
    })
}

/// Blocks at `(e(x), x_S)`.
pub fn jacobian_blocks(generator: &dyn Generator, x: &[f64]) -> Result<JacobianBlocks> {
    let v = generator.latent_of(x)?;
    let x_s: Vec<f64> = generator.action_columns().iter().map(|&c| x[c]).collect();
    jacobian_blocks_at(generator, &v, &x_s)
}

/// `d^T (J^T J) d`, formed through the Gram matrix.
pub fn quadratic_form(j: &Tensor, d: &[f64]) -> Result<f64> {
    if j.cols() != d.len() {
        return Err(Error::Precondition(format!(
            "direction has {} entries, Jacobian has {} columns",
            d.len(),
            j.cols()
        )));
    }
    let gram = j.transpose().matmul(j)?;
    let n = d.len();
    Ok((0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .map(|(a, b)| d[a] * gram.get(a, b) * d[b])
        .sum())
}

pub fn split_quadratic_cost(blocks: &JacobianBlocks, d_s: &[f64]) -> Result<QuadraticCosts> {
    Ok(QuadraticCosts {
        direct: quadratic_form(&blocks.direct, d_s)?,
        indirect: quadratic_form(&blocks.indirect, d_s)?,
    })
}

/// `d_z^T (J_z^T J_z) d_z` over the full code `z = [v, x_S]`.
pub fn latent_quadratic_cost(decoder: &dyn Decoder, v: &[f64], x_s: &[f64], d_z: &[f64]) -> Result<f64> {
    let j = decoder_jacobian(decoder, v, x_s, JacobianMethod::Reverse)?;
    quadratic_form(&j, d_z)
}

/// Mean absolute mixed partial `|d^2 g_j / dv_k dx_S,l|` per instance, over
/// outputs and all `(k, l)` pairs.
pub fn entanglement_cost(generator: &dyn Generator, instances: &[Vec<f64>]) -> Result<Vec<f64>> {
    if instances.is_empty() {
        return Ok(Vec::new());
    }
    let columns = generator.action_columns();
    let mut v_rows = Vec::new();
    let mut s_rows = Vec::new();
    for x in instances {
        v_rows.push(generator.latent_of(x)?);
        s_rows.push(columns.iter().map(|&c| x[c]).collect::<Vec<_>>());
    }
    entanglement_at(generator, &v_rows, &s_rows)
}

/// As [`entanglement_cost`], at explicit code points.
pub fn entanglement_at(decoder: &dyn Decoder, v_rows: &[Vec<f64>], s_rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let b = v_rows.len();
    let mut tape = Tape::new();
    let v = tape.leaf(Tensor::from_rows(v_rows)?);
    let s = tape.leaf(Tensor::from_rows(s_rows)?);
    let h = mixed_partials(&mut tape, decoder, v, s, ENTANGLEMENT_EPS)?;
    let h = tape.value(h);
    let d = h.cols();
    let pairs = h.rows() / b;
    let mut out = vec![0.0; b];
    for p in 0..pairs {
        for (i, acc) in out.iter_mut().enumerate() {
            *acc += h.row(p * b + i).iter().map(|x| x.abs()).sum::<f64>();
        }
    }
    let denom = (pairs * d) as f64;
    Ok(out.into_iter().map(|t| t / denom).collect())
}

/// Cost split of one outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// `|x_check_S - x_S|_1`.
    pub direct_l1: f64,
    /// `|x_check_Sc - x_Sc|_1`.
    pub indirect_l1: f64,
    pub total_l1: f64,
    /// `|d_S|_1`; differs from `direct_l1` when projection or reconstruction moves `S`.
    pub action_l1: f64,
    pub direct_sq: f64,
    pub indirect_sq: f64,
    pub entanglement: f64,
}

pub fn l1_split(outcome: &RecourseOutcome) -> (f64, f64) {
    let mut direct = 0.0;
    let mut indirect = 0.0;
    for (c, d) in outcome.delta.iter().enumerate() {
        if outcome.s_columns.contains(&c) {
            direct += d.abs();
        } else {
            indirect += d.abs();
        }
    }
    (direct, indirect)
}

/// Decomposes a DEAR outcome produced with `generator`.
pub fn cost_breakdown(outcome: &RecourseOutcome, generator: &dyn Generator) -> Result<CostBreakdown> {
    let action = outcome
        .action
        .clone()
        .ok_or_else(|| Error::Precondition("outcome has no direct action".into()))?;
    let (direct_l1, indirect_l1) = l1_split(outcome);
    let blocks = jacobian_blocks(generator, &outcome.factual)?;
    let q = split_quadratic_cost(&blocks, &action)?;
    let entanglement = entanglement_cost(generator, std::slice::from_ref(&outcome.factual))?[0];
    Ok(CostBreakdown {
        direct_l1,
        indirect_l1,
        total_l1: direct_l1 + indirect_l1,
        action_l1: action.iter().map(|a| a.abs()).sum(),
        direct_sq: q.direct,
        indirect_sq: q.indirect,
        entanglement,
    })
}

/// One line of the per-instance cost export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRecord {
    pub instance_id: usize,
    pub direct_l1: f64,
    pub indirect_l1: f64,
    pub entanglement: f64,
    pub total_l1: f64,
}

impl CostRecord {
    pub fn new(instance_id: usize, c: &CostBreakdown) -> Self {
        CostRecord {
            instance_id,
            direct_l1: c.direct_l1,
            indirect_l1: c.indirect_l1,
            entanglement: c.entanglement,
            total_l1: c.total_l1,
        }
    }
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[CostRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Median and quartiles (linear interpolation between order statistics).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Quartiles {
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
    })
}

pub fn median(values: &[f64]) -> Option<f64> {
    quartiles(values).map(|q| q.median)
}

#[cfg(test)]
mod tests;
