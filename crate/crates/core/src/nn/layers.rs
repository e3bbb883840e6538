use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::nn::{Module, Parameter, Tape, Tensor, Var};
use crate::rng::Rng;
use crate::Real;

/// Elementwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Elu,
    Softplus,
    Relu,
}

impl Activation {
    pub fn apply<S: Real>(self, x: S) -> S {
        match self {
            Activation::Elu => {
                if x >= S::zero() {
                    x
                } else {
                    x.exp_m1()
                }
            }
            // ln(1 + e^x) without overflow for large x
            Activation::Softplus => {
                if x > S::zero() {
                    x + (-x).exp().ln_1p()
                } else {
                    x.exp().ln_1p()
                }
            }
            Activation::Relu => x.max(S::zero()),
        }
    }

    pub fn derivative<S: Real>(self, x: S) -> S {
        match self {
            Activation::Elu => {
                if x >= S::zero() {
                    S::one()
                } else {
                    x.exp()
                }
            }
            Activation::Softplus => {
                if x >= S::zero() {
                    S::one() / (S::one() + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (S::one() + e)
                }
            }
            Activation::Relu => {
                if x > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
        }
    }
}

/// Fully connected layer `y = x W + b` with `W: [in, out]`.
#[derive(Debug, Clone)]
pub struct Dense<S = f32> {
    pub weight: Parameter<S>,
    pub bias: Parameter<S>,
}

impl<S: Real> Dense<S> {
    /// Weights uniform in `±1/sqrt(fan_in)`, zero bias.
    pub fn new(name: &str, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / libm::sqrt(fan_in as f64);
        let w = Tensor::from_fn(vec![fan_in, fan_out], |_| {
            S::of((2.0 * rng.uniform::<f64>() - 1.0) * bound)
        });
        Self::from_parts(name, w, Tensor::zeros(vec![fan_out]))
    }

    pub fn zeros(name: &str, fan_in: usize, fan_out: usize) -> Self {
        Self::from_parts(
            name,
            Tensor::zeros(vec![fan_in, fan_out]),
            Tensor::zeros(vec![fan_out]),
        )
    }

    pub fn from_parts(name: &str, weight: Tensor<S>, bias: Tensor<S>) -> Self {
        Self {
            weight: Parameter::new(format!("{name}.weight"), weight),
            bias: Parameter::new(format!("{name}.bias"), bias),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.value().shape()[0]
    }

    pub fn fan_out(&self) -> usize {
        self.weight.value().shape()[1]
    }

    pub fn forward(&self, tape: &mut Tape<S>, x: Var) -> Result<Var> {
        let w = tape.param(&self.weight);
        let b = tape.param(&self.bias);
        let h = tape.matmul(x, w)?;
        tape.add_bias(h, b)
    }

    pub fn cast<T: Real>(&self) -> Dense<T> {
        Dense { weight: self.weight.cast(), bias: self.bias.cast() }
    }
}

impl<S: Real> Module<S> for Dense<S> {
    fn parameters(&self) -> Vec<&Parameter<S>> {
        vec![&self.weight, &self.bias]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<S>> {
        vec![&mut self.weight, &mut self.bias]
    }
}
