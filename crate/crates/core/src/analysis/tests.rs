use proptest::prelude::*;

use super::*;
use crate::autodiff::Var;
use crate::models::{FnDecoder, FnGenerator};

/// `g(v, x_S) = [x_S, a x_S + b v]` over two outputs with `S = {0}`.
fn linear_pair(a: f64, b: f64) -> FnGenerator {
    let dec = FnDecoder::new(1, 1, 2, move |t: &mut Tape, v: Var, s: Var| {
        let sa = t.scale(s, a)?;
        let vb = t.scale(v, b)?;
        let second = t.add(sa, vb)?;
        t.concat_cols(&[s, second])
    });
    FnGenerator::new(dec, vec![0], |x| vec![x[1]])
}

#[test]
fn linear_decoder_blocks_and_costs() {
    let g = linear_pair(2.0, 0.5);
    let blocks = jacobian_blocks(&g, &[0.3, 0.4]).unwrap();
    assert_eq!(blocks.direct.values(), &[1.0]);
    assert_eq!(blocks.indirect.values(), &[2.0]);
    let q = split_quadratic_cost(&blocks, &[0.1]).unwrap();
    assert!((q.direct - 0.01).abs() < 1e-9);
    assert!((q.indirect - 0.04).abs() < 1e-9);
    let l = latent_quadratic_cost(&g, &blocks.v, &blocks.x_s, &[0.0, 0.1]).unwrap();
    assert!((l - q.total()).abs() < 1e-9);
    assert_eq!(latent_quadratic_cost(&g, &blocks.v, &blocks.x_s, &[0.0, 0.0]).unwrap(), 0.0);

    let independent = jacobian_blocks(&linear_pair(0.0, 1.0), &[0.3, 0.4]).unwrap();
    assert_eq!(independent.indirect.values(), &[0.0]);
    assert_eq!(split_quadratic_cost(&independent, &[0.5]).unwrap().indirect, 0.0);
}

#[test]
fn entanglement_of_additive_and_bilinear() {
    let points = vec![vec![0.1, 0.9], vec![0.5, 0.2], vec![0.7, 0.7]];
    let additive = entanglement_cost(&linear_pair(2.0, 1.0), &points).unwrap();
    assert!(additive.iter().all(|e| e.abs() < 1e-8), "{additive:?}");
    let dec = FnDecoder::new(1, 1, 1, |t: &mut Tape, v: Var, s: Var| t.mul(v, s));
    let bilinear = FnGenerator::new(dec, vec![0], |x| vec![x[1]]);
    let e = entanglement_cost(&bilinear, &points).unwrap();
    assert!(e.iter().all(|e| (e - 1.0).abs() < 1e-6), "{e:?}");
}

#[test]
fn quartiles_interpolate() {
    let q = quartiles(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
    assert_eq!((q.q1, q.median, q.q3), (2.0, 3.0, 4.0));
    assert_eq!(median(&[1.0, 2.0]), Some(1.5));
    assert!(quartiles(&[]).is_none());
}

#[test]
fn jsonl_records() {
    let c = CostBreakdown {
        direct_l1: 0.1,
        indirect_l1: 0.2,
        total_l1: 0.30000000000000004,
        action_l1: 0.1,
        direct_sq: 0.01,
        indirect_sq: 0.04,
        entanglement: 0.0,
    };
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &[CostRecord::new(3, &c), CostRecord::new(4, &c)]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 2);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["instance_id"], 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The full-code quadratic cost with `d_z = [0, d_S]` equals the direct +
    /// indirect split, for a random nonlinear decoder.
    #[test]
    fn latent_cost_matches_split(
        w in prop::collection::vec(-2.0..2.0f64, 12),
        v in prop::collection::vec(0.0..1.0f64, 2),
        s in prop::collection::vec(0.0..1.0f64, 2),
        d in prop::collection::vec(-0.3..0.3f64, 2),
    ) {
        let m = Tensor::new(4, 3, w).unwrap();
        let dec = FnDecoder::new(2, 2, 3, move |t: &mut Tape, v: Var, s: Var| {
            let z = t.concat_cols(&[v, s])?;
            let mm = t.leaf(m.clone());
            let h = t.matmul(z, mm)?;
            let sq = t.sigmoid(h);
            t.mul(sq, h)
        });
        let g = FnGenerator::new(dec, vec![0, 2], |_| vec![0.0, 0.0]);
        let blocks = jacobian_blocks_at(&g, &v, &s).unwrap();
        let q = split_quadratic_cost(&blocks, &d).unwrap();
        let l = latent_quadratic_cost(&g, &v, &s, &[0.0, 0.0, d[0], d[1]]).unwrap();
        prop_assert!((l - q.total()).abs() < 1e-9);
        prop_assert!(q.direct >= 0.0 && q.indirect >= 0.0);
    }
}
