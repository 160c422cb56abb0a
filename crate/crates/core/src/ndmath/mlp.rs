use rand::Rng;
use serde::{Deserialize, Serialize};

use super::optim::ParamSet;
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputActivation {
    Identity,
    Tanh,
}

/// Fully connected network with leaky-ReLU hidden layers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    output: OutputActivation,
    slope: f64,
    params: ParamSet,
}

impl Mlp {
    /// `sizes` lists every layer width including input and output.
    /// Weights and biases are drawn uniformly from `±sqrt(1/fan_in)`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: OutputActivation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output widths");
        let mut params = ParamSet::new();
        for (l, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (1.0 / fan_in.max(1) as f64).sqrt();
            let weights = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            let bias = (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            params.push(format!("w{l}"), Tensor::matrix(fan_in, fan_out, weights).expect("sized"));
            params.push(format!("b{l}"), Tensor::row(bias));
        }
        Mlp {
            sizes: sizes.to_vec(),
            output,
            slope: DEFAULT_LEAKY_SLOPE,
            params,
        }
    }

    /// Rebuilds a network from stored widths and parameter values.
    pub fn from_parts(
        sizes: Vec<usize>,
        output: OutputActivation,
        slope: f64,
        values: Vec<Tensor>,
    ) -> Result<Self> {
        if sizes.len() < 2 || values.len() != 2 * (sizes.len() - 1) {
            return Err(Error::Format(format!(
                "{} parameter tensors for layer widths {sizes:?}",
                values.len()
            )));
        }
        let mut params = ParamSet::new();
        for (l, w) in sizes.windows(2).enumerate() {
            let (wt, bt) = (&values[2 * l], &values[2 * l + 1]);
            if wt.shape() != [w[0], w[1]] || bt.shape() != [1, w[1]] {
                return Err(Error::Format(format!("layer {l} has shapes {:?}/{:?}", wt.shape(), bt.shape())));
            }
            params.push(format!("w{l}"), wt.clone());
            params.push(format!("b{l}"), bt.clone());
        }
        Ok(Mlp { sizes, output, slope, params })
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Forward pass recorded on `tape`; `vars` come from binding `params()`.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        if tape.value(x).cols() != self.input_dim() {
            return Err(Error::dim(format!(
                "network expects {} input columns, got {}",
                self.input_dim(),
                tape.value(x).cols()
            )));
        }
        let mut h = x;
        for l in 0..self.layers() {
            let z = tape.matmul(h, vars[2 * l])?;
            let z = tape.add_row(z, vars[2 * l + 1])?;
            h = if l + 1 < self.layers() {
                tape.leaky_relu(z, self.slope)
            } else {
                match self.output {
                    OutputActivation::Identity => z,
                    OutputActivation::Tanh => tape.tanh(z),
                }
            };
        }
        Ok(h)
    }

    /// Forward pass without recording; bit-identical to [`Mlp::forward`].
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim(format!(
                "network expects {} input columns, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let mut h = x.clone();
        for l in 0..self.layers() {
            let z = h
                .matmul(self.params.value(2 * l))?
                .add_row(self.params.value(2 * l + 1))?;
            h = if l + 1 < self.layers() {
                z.leaky_relu(self.slope)
            } else {
                match self.output {
                    OutputActivation::Identity => z,
                    OutputActivation::Tanh => z.tanh(),
                }
            };
        }
        Ok(h)
    }

    /// Pre-activations of every hidden layer, used to detect kinks during
    /// finite-difference checks.
    pub fn hidden_preactivations(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let mut out = Vec::new();
        let mut h = x.clone();
        for l in 0..self.layers() - 1 {
            let z = h
                .matmul(self.params.value(2 * l))?
                .add_row(self.params.value(2 * l + 1))?;
            h = z.leaky_relu(self.slope);
            out.push(z);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_input(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
        Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect())
            .unwrap()
    }

    #[test]
    fn tape_and_plain_forward_agree_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[5, 16, 16, 16, 1], OutputActivation::Tanh, &mut rng);
        let x = random_input(&mut rng, 9, 5);
        let mut tape = Tape::new();
        let vars = net.params().bind(&mut tape);
        let xv = tape.constant(x.clone());
        let y = net.forward(&mut tape, &vars, xv).unwrap();
        assert_eq!(tape.value(y), &net.infer(&x).unwrap());
        assert!(net.infer(&x).unwrap().values().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let a = Mlp::new(&[3, 8, 1], OutputActivation::Identity, &mut ChaCha8Rng::seed_from_u64(1));
        let b = Mlp::new(&[3, 8, 1], OutputActivation::Identity, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a.params().value(0), b.params().value(0));
        let bound = (1.0f64 / 3.0).sqrt();
        assert!(a.params().value(0).values().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn mlp_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Mlp::new(&[4, 12, 12, 12, 1], OutputActivation::Tanh, &mut rng);
        let x = random_input(&mut rng, 6, 4);
        let loss_of = |net: &Mlp| -> f64 {
            let y = net.infer(&x).unwrap();
            y.values().iter().map(|v| v * v).sum()
        };
        let mut tape = Tape::new();
        let vars = net.params().bind(&mut tape);
        let xv = tape.constant(x.clone());
        let y = net.forward(&mut tape, &vars, xv).unwrap();
        let sq = tape.square(y);
        let loss = tape.sum(sq);
        let grads = tape.backward(loss).unwrap().collect(&vars);

        let mut checked = 0;
        for _ in 0..100 {
            let pi = rng.random_range(0..net.params().len());
            let ei = rng.random_range(0..net.params().value(pi).len());
            let mut hi = net.clone();
            let mut lo = net.clone();
            hi.params_mut().value_mut(pi).values_mut()[ei] += 1e-5;
            lo.params_mut().value_mut(pi).values_mut()[ei] -= 1e-5;
            let numeric = (loss_of(&hi) - loss_of(&lo)) / 2e-5;
            let analytic = grads[pi].values()[ei];
            let err = (numeric - analytic).abs();
            let scale = numeric.abs().max(analytic.abs());
            assert!(err < 1e-7 || err / scale < 1e-4, "param {pi}[{ei}] {analytic} vs {numeric}");
            checked += 1;
        }
        assert_eq!(checked, 100);
    }
}
