use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    /// Smooth ReLU, `ln(1 + e^x)`; keeps second derivatives non-zero.
    Softplus,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Softplus => crate::autodiff::softplus(v),
            Activation::Identity => v,
        }
    }
}

/// Fully connected layer; `weight` is `inputs x outputs`, `bias` is `1 x outputs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    /// He-uniform weights with a small positive bias for layers feeding a
    /// ReLU; Xavier-uniform with zero bias otherwise.
    fn init(inputs: usize, outputs: usize, rectified: bool, rng: &mut ChaCha8Rng) -> Dense {
        let (bound, bias) = if rectified {
            ((6.0 / inputs as f64).sqrt(), 0.01)
        } else {
            ((6.0 / (inputs + outputs) as f64).sqrt(), 0.0)
        };
        let values = (0..inputs * outputs)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Dense {
            weight: Tensor::from_parts(inputs, outputs, values),
            bias: Tensor::filled(1, outputs, bias),
        }
    }
}

/// Multi-layer perceptron with a linear output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
    #[serde(default)]
    hidden: Activation,
}

/// An [`Mlp`] whose parameters are recorded as leaves on a tape.
#[derive(Clone, Debug)]
pub struct BoundMlp {
    params: Vec<(Var, Var)>,
    hidden: Activation,
}

impl Mlp {
    /// `sizes` lists every layer width including input and output.
    pub fn new(sizes: &[usize], hidden: Activation, rng: &mut ChaCha8Rng) -> Result<Mlp> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::init(w[0], w[1], i < last && hidden != Activation::Identity, rng))
            .collect();
        Ok(Mlp { layers, hidden })
    }

    pub fn from_layers(layers: Vec<Dense>, hidden: Activation) -> Result<Mlp> {
        if layers.is_empty() {
            return Err(Error::Config("an MLP needs at least one layer".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.shape() != (1, layer.weight.cols()) {
                return Err(Error::Config(format!("layer {i}: bias shape does not match weight")));
            }
            if i > 0 && layers[i - 1].weight.cols() != layer.weight.rows() {
                return Err(Error::Config(format!("layer {i}: input width does not match previous layer")));
            }
        }
        Ok(Mlp { layers, hidden })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.weight.cols()));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.cols()
    }

    pub fn parameters(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundMlp {
        let params = self
            .layers
            .iter()
            .map(|l| (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone())))
            .collect();
        BoundMlp {
            params,
            hidden: self.hidden,
        }
    }

    /// Forward pass with the weights as constants on `tape`.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var, AutodiffError> {
        self.bind(tape).forward(tape, x)
    }

    /// Tape-free forward pass over a batch.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor, AutodiffError> {
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.matmul(&layer.weight)?;
            let cols = z.cols();
            let bias = layer.bias.values();
            let act = if i < last { self.hidden } else { Activation::Identity };
            for (j, v) in z.values_mut().iter_mut().enumerate() {
                *v = act.apply(*v + bias[j % cols]);
            }
            h = z;
        }
        Ok(h)
    }
}

impl BoundMlp {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var, AutodiffError> {
        let mut h = x;
        let last = self.params.len() - 1;
        for (i, &(w, b)) in self.params.iter().enumerate() {
            let z = tape.matmul(h, w)?;
            h = tape.add(z, b)?;
            if i < last {
                h = match self.hidden {
                    Activation::Relu => tape.relu(h),
                    Activation::Softplus => tape.softplus(h),
                    Activation::Identity => h,
                };
            }
        }
        Ok(h)
    }

    /// Parameter handles in the order of [`Mlp::parameters`].
    pub fn parameters(&self) -> impl Iterator<Item = Var> + '_ {
        self.params.iter().flat_map(|&(w, b)| [w, b])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn tape_and_plain_forward_agree() {
        let x = Tensor::from_rows(&[vec![0.1, 0.5, 0.9], vec![1.0, 0.0, 0.3]]).unwrap();
        for act in [Activation::Relu, Activation::Softplus, Activation::Identity] {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let mlp = Mlp::new(&[3, 5, 4, 2], act, &mut rng).unwrap();
            let mut tape = Tape::new();
            let xv = tape.leaf(x.clone());
            let y = mlp.forward(&mut tape, xv).unwrap();
            let plain = mlp.predict(&x).unwrap();
            assert_eq!(tape.value(y).shape(), (2, 2));
            for (a, b) in tape.value(y).values().iter().zip(plain.values()) {
                assert!((a - b).abs() < 1e-14, "{act:?}");
            }
            assert_eq!(mlp.sizes(), vec![3, 5, 4, 2]);
        }
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let a = Mlp::new(&[4, 3, 1], Activation::Relu, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = Mlp::new(&[4, 3, 1], Activation::Relu, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(Mlp::new(&[4], Activation::Relu, &mut ChaCha8Rng::seed_from_u64(9)).is_err());
    }
}
