use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Uniform draw from the l1 ball of `radius` in `dims` dimensions.
///
/// Exponential spacings: with `E_1..E_{n+1}` i.i.d. Exp(1), the vector
/// `(E_1..E_n) / sum(E)` is uniform on the unit simplex interior; random signs
/// and scaling by `radius` give the ball.
pub fn sample_l1_ball<R: Rng + ?Sized>(rng: &mut R, dims: usize, radius: f64) -> Vec<f64> {
    let e: Vec<f64> = (0..=dims).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = e.iter().sum();
    e[..dims]
        .iter()
        .map(|&ei| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * radius * ei / total
        })
        .collect()
}
