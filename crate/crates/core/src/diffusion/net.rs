use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::{Activation, Dense, Module, Parameter, Tape, Tensor, Var};
use crate::rng::Rng;
use crate::Real;

/// Anything that maps `(x_t, t, c)` to a noise or velocity prediction.
pub trait Denoiser<S: Real> {
    /// `t` holds one timestep in `1..=T` per batch row.
    fn predict(&self, tape: &mut Tape<S>, x_t: Var, t: &[usize], c: Var) -> Result<Var>;
}

/// Conditional MLP denoiser.
///
/// `x_t` and the condition `c` are concatenated at the input. Each of the two
/// hidden layers is multiplied elementwise by a learned per-timestep
/// embedding row before the Softplus; the output layer is linear.
#[derive(Debug, Clone)]
pub struct DenoiserNet<S = f32> {
    pub input: Dense<S>,
    pub embed1: Parameter<S>,
    pub hidden: Dense<S>,
    pub embed2: Parameter<S>,
    pub output: Dense<S>,
}

impl<S: Real> DenoiserNet<S> {
    /// `n`: sample width (also the condition width); `hidden`: N_hl;
    /// `steps`: T. Embeddings start at one.
    pub fn new(n: usize, hidden: usize, steps: usize, rng: &mut Rng) -> Self {
        Self {
            input: Dense::new("input", 2 * n, hidden, rng),
            embed1: Parameter::new("embed1", Tensor::ones(vec![steps, hidden])),
            hidden: Dense::new("hidden", hidden, hidden, rng),
            embed2: Parameter::new("embed2", Tensor::ones(vec![steps, hidden])),
            output: Dense::new("output", hidden, n, rng),
        }
    }

    /// All weights and biases zero, embeddings one.
    pub fn zeros(n: usize, hidden: usize, steps: usize) -> Self {
        Self {
            input: Dense::zeros("input", 2 * n, hidden),
            embed1: Parameter::new("embed1", Tensor::ones(vec![steps, hidden])),
            hidden: Dense::zeros("hidden", hidden, hidden),
            embed2: Parameter::new("embed2", Tensor::ones(vec![steps, hidden])),
            output: Dense::zeros("output", hidden, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.output.fan_out()
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden.fan_in()
    }

    pub fn steps(&self) -> usize {
        self.embed1.value().rows()
    }

    pub fn cast<T: Real>(&self) -> DenoiserNet<T> {
        DenoiserNet {
            input: self.input.cast(),
            embed1: self.embed1.cast(),
            hidden: self.hidden.cast(),
            embed2: self.embed2.cast(),
            output: self.output.cast(),
        }
    }

    /// Assigns values by parameter name; every parameter must be present.
    pub fn load_named(&mut self, mut lookup: impl FnMut(&str) -> Option<Tensor<S>>) -> Result<()> {
        for p in self.parameters_mut() {
            let v = lookup(p.name()).ok_or_else(|| {
                Error::InvalidArgument(format!("missing parameter {}", p.name()))
            })?;
            p.set_value(v)?;
        }
        Ok(())
    }
}

impl<S: Real> Denoiser<S> for DenoiserNet<S> {
    fn predict(&self, tape: &mut Tape<S>, x_t: Var, t: &[usize], c: Var) -> Result<Var> {
        let steps = self.steps();
        let rows: Vec<usize> = t
            .iter()
            .map(|&ti| {
                if ti == 0 || ti > steps {
                    Err(Error::TimestepOutOfRange { t: ti, steps })
                } else {
                    Ok(ti - 1)
                }
            })
            .collect::<Result<_>>()?;
        if rows.len() != tape.value(x_t).rows() {
            return Err(Error::LengthMismatch(rows.len(), tape.value(x_t).rows()));
        }
        let input = tape.concat_cols(x_t, c)?;

        let e1 = tape.param(&self.embed1);
        let e1 = tape.gather_rows(e1, &rows)?;
        let h = self.input.forward(tape, input)?;
        let h = tape.mul(h, e1)?;
        let h = tape.activation(h, Activation::Softplus);

        let e2 = tape.param(&self.embed2);
        let e2 = tape.gather_rows(e2, &rows)?;
        let h = self.hidden.forward(tape, h)?;
        let h = tape.mul(h, e2)?;
        let h = tape.activation(h, Activation::Softplus);

        self.output.forward(tape, h)
    }
}

impl<S: Real> Module<S> for DenoiserNet<S> {
    fn parameters(&self) -> Vec<&Parameter<S>> {
        vec![
            &self.input.weight,
            &self.input.bias,
            &self.embed1,
            &self.hidden.weight,
            &self.hidden.bias,
            &self.embed2,
            &self.output.weight,
            &self.output.bias,
        ]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<S>> {
        vec![
            &mut self.input.weight,
            &mut self.input.bias,
            &mut self.embed1,
            &mut self.hidden.weight,
            &mut self.hidden.bias,
            &mut self.embed2,
            &mut self.output.weight,
            &mut self.output.bias,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn zero_weights_give_zero_output() {
        let net = DenoiserNet::<f64>::zeros(3, 8, 10);
        let mut rng = Rng::new(0, Stream::Data);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![2, 3], rng.normal_vec(6)).unwrap());
        let c = tape.constant(Tensor::new(vec![2, 3], rng.normal_vec(6)).unwrap());
        let y = net.predict(&mut tape, x, &[1, 10], c).unwrap();
        assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
        assert_eq!(tape.value(y).shape(), &[2, 3]);
    }

    #[test]
    fn timestep_range_checked() {
        let net = DenoiserNet::<f32>::zeros(2, 4, 5);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(vec![1, 2]));
        assert!(matches!(
            net.predict(&mut tape, x, &[0], x),
            Err(Error::TimestepOutOfRange { .. })
        ));
        assert!(net.predict(&mut tape, x, &[6], x).is_err());
        assert!(net.predict(&mut tape, x, &[5], x).is_ok());
    }

    #[test]
    fn batch_rows_are_independent() {
        let mut rng = Rng::new(4, Stream::Init);
        let net = DenoiserNet::<f64>::new(2, 16, 10, &mut rng);
        let xs: Vec<f64> = rng.normal_vec(8);
        let cs: Vec<f64> = rng.normal_vec(8);
        let ts = [3, 7, 1, 10];
        let perm = [2, 0, 3, 1];
        let run = |order: &[usize]| {
            let mut tape = Tape::new();
            let x = Tensor::new(vec![4, 2], xs.clone()).unwrap().gather_rows(order);
            let c = Tensor::new(vec![4, 2], cs.clone()).unwrap().gather_rows(order);
            let t: Vec<usize> = order.iter().map(|&i| ts[i]).collect();
            let (x, c) = (tape.constant(x), tape.constant(c));
            let y = net.predict(&mut tape, x, &t, c).unwrap();
            tape.value(y).clone()
        };
        let base = run(&[0, 1, 2, 3]);
        assert_eq!(run(&perm), base.gather_rows(&perm));
    }
}
