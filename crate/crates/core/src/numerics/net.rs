use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::optim::OptimizerState;
use super::rng::RngStream;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Two affine layers with an activation in between:
/// `y = W2 · act(W1 · x + b1) + b2`, applied row-wise to a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct MappingNet {
    w1: Matrix,
    b1: Vec<f64>,
    w2: Matrix,
    b2: Vec<f64>,
    activation: Activation,
}

/// Intermediates of one forward pass, tied to the exact parameters that
/// produced them.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    input: Matrix,
    pre: Matrix,
    hidden: Matrix,
    fingerprint: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetGradients {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub input: Matrix,
}

impl NetGradients {
    pub fn zeros_like(net: &MappingNet, batch: usize) -> Self {
        NetGradients {
            w1: Matrix::zeros(net.w1.rows(), net.w1.cols()),
            b1: vec![0.0; net.b1.len()],
            w2: Matrix::zeros(net.w2.rows(), net.w2.cols()),
            b2: vec![0.0; net.b2.len()],
            input: Matrix::zeros(batch, net.input_dim()),
        }
    }

    /// `self += factor · other` over the parameter gradients. The input
    /// gradient is left alone since batches generally differ.
    pub fn accumulate(&mut self, other: &NetGradients, factor: f64) -> Result<()> {
        self.w1.add_scaled(&other.w1, factor)?;
        self.w2.add_scaled(&other.w2, factor)?;
        for (a, b) in self.b1.iter_mut().zip(&other.b1) {
            *a += factor * b;
        }
        for (a, b) in self.b2.iter_mut().zip(&other.b2) {
            *a += factor * b;
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> NetGradients {
        NetGradients {
            w1: self.w1.scale(factor),
            b1: self.b1.iter().map(|v| v * factor).collect(),
            w2: self.w2.scale(factor),
            b2: self.b2.iter().map(|v| v * factor).collect(),
            input: self.input.scale(factor),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite()
            && self.w2.is_finite()
            && self.b1.iter().chain(&self.b2).all(|v| v.is_finite())
    }
}

impl MappingNet {
    pub fn new(
        w1: Matrix,
        b1: Vec<f64>,
        w2: Matrix,
        b2: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if w1.rows() == 0 {
            return Err(Error::Shape("hidden width must be at least 1".into()));
        }
        if b1.len() != w1.rows() || w2.cols() != w1.rows() || b2.len() != w2.rows() {
            return Err(Error::Shape(format!(
                "inconsistent layer shapes: W1 {}x{}, b1 {}, W2 {}x{}, b2 {}",
                w1.rows(),
                w1.cols(),
                b1.len(),
                w2.rows(),
                w2.cols(),
                b2.len()
            )));
        }
        let net = MappingNet {
            w1,
            b1,
            w2,
            b2,
            activation,
        };
        if !net.is_finite() {
            return Err(Error::Validation("non-finite network parameter".into()));
        }
        Ok(net)
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn init_uniform(
        input: usize,
        hidden: usize,
        output: usize,
        activation: Activation,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if input == 0 || hidden == 0 || output == 0 {
            return Err(Error::Parameter(format!(
                "network dimensions must be positive, got {input}->{hidden}->{output}"
            )));
        }
        let bound1 = 1.0 / (input as f64).sqrt();
        let w1 = Matrix::from_fn(hidden, input, |_, _| rng.uniform_range(-bound1, bound1));
        let bound2 = 1.0 / (hidden as f64).sqrt();
        let w2 = Matrix::from_fn(output, hidden, |_, _| rng.uniform_range(-bound2, bound2));
        MappingNet::new(w1, vec![0.0; hidden], w2, vec![0.0; output], activation)
    }

    /// Identity weights and zero biases on a square network.
    pub fn identity(dim: usize, activation: Activation) -> Self {
        MappingNet {
            w1: Matrix::identity(dim),
            b1: vec![0.0; dim],
            w2: Matrix::identity(dim),
            b2: vec![0.0; dim],
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.rows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn w1(&self) -> &Matrix {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &Matrix {
        &self.w2
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite()
            && self.w2.is_finite()
            && self.b1.iter().chain(&self.b2).all(|v| v.is_finite())
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.as_slice().len() + self.b1.len() + self.w2.as_slice().len() + self.b2.len()
    }

    /// Hash of the exact parameter bits.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let all = self
            .w1
            .as_slice()
            .iter()
            .chain(&self.b1)
            .chain(self.w2.as_slice())
            .chain(&self.b2);
        for v in all {
            h ^= v.to_bits();
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h ^ (self.activation as u64)
    }

    pub fn forward(&self, input: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if input.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects inputs of width {}, got {}",
                self.input_dim(),
                input.cols()
            )));
        }
        let mut pre = input.matmul_t(&self.w1)?;
        for r in 0..pre.rows() {
            for (v, b) in pre.row_mut(r).iter_mut().zip(&self.b1) {
                *v += b;
            }
        }
        let act = self.activation;
        let hidden = pre.map(|v| act.apply(v));
        let mut output = hidden.matmul_t(&self.w2)?;
        for r in 0..output.rows() {
            for (v, b) in output.row_mut(r).iter_mut().zip(&self.b2) {
                *v += b;
            }
        }
        let cache = ForwardCache {
            input: input.clone(),
            pre,
            hidden,
            fingerprint: self.fingerprint(),
        };
        Ok((output, cache))
    }

    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        self.forward(input).map(|(out, _)| out)
    }

    pub fn backward(&self, cache: &ForwardCache, output_grad: &Matrix) -> Result<NetGradients> {
        if cache.fingerprint != self.fingerprint() {
            return Err(Error::Usage(
                "forward cache was produced by different network parameters".into(),
            ));
        }
        if output_grad.shape() != (cache.input.rows(), self.output_dim()) {
            return Err(Error::Shape(format!(
                "output gradient is {}x{}, expected {}x{}",
                output_grad.rows(),
                output_grad.cols(),
                cache.input.rows(),
                self.output_dim()
            )));
        }
        let w2 = output_grad.t_matmul(&cache.hidden)?;
        let b2 = output_grad.column_sums();
        let mut pre_grad = output_grad.matmul(&self.w2)?;
        let act = self.activation;
        for (g, &p) in pre_grad.as_mut_slice().iter_mut().zip(cache.pre.as_slice()) {
            *g *= act.derivative(p);
        }
        let w1 = pre_grad.t_matmul(&cache.input)?;
        let b1 = pre_grad.column_sums();
        let input = pre_grad.matmul(&self.w1)?;
        Ok(NetGradients {
            w1,
            b1,
            w2,
            b2,
            input,
        })
    }

    /// One optimizer update of all four parameter buffers.
    pub fn apply_gradients(
        &mut self,
        optimizer: &mut OptimizerState,
        grads: &NetGradients,
    ) -> Result<()> {
        optimizer.step(
            &mut [
                self.w1.as_mut_slice(),
                &mut self.b1,
                self.w2.as_mut_slice(),
                &mut self.b2,
            ],
            &[grads.w1.as_slice(), &grads.b1, grads.w2.as_slice(), &grads.b2],
        )
    }

    /// Mutable flat views of `[W1, b1, W2, b2]`, in that order.
    pub fn parameters_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }

    /// Rounds every parameter to the nearest `f32`, matching what the binary
    /// file format can hold.
    pub fn round_to_f32(&self) -> MappingNet {
        MappingNet {
            w1: self.w1.round_to_f32(),
            b1: self.b1.iter().map(|&v| v as f32 as f64).collect(),
            w2: self.w2.round_to_f32(),
            b2: self.b2.iter().map(|&v| v as f32 as f64).collect(),
            activation: self.activation,
        }
    }
}
