//! End-to-end autoencoder for coded modulation: a one-hot encoder with batch
//! power normalization, a softmax decoder, training against a true or a
//! generated channel, and Monte-Carlo symbol error rates.
//!
//! Messages are 0-based indices in `0..M`.

mod ser;
mod train;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::{Activation, Dense, Module, Parameter, Tape, Tensor, Var};
use crate::rng::Rng;
use crate::Real;

pub use ser::{evaluate_ser, evaluate_ser_point, symbol_errors, wilson_interval, SerPoint};
pub use train::{
    train_ae, train_iterative, train_model_aware, train_pretrained, AeTrainConfig, IterativeConfig,
    IterativeHistory, TrainChannel, UpdateSchedule,
};

/// Relative tolerance on the average codeword power.
const POWER_TOLERANCE: f64 = 1e-4;

/// Encoder `M -> M (ELU) -> n`, then power normalization; decoder
/// `n -> M (ELU) -> M (ELU) -> M`.
#[derive(Debug, Clone)]
pub struct Autoencoder<S = f32> {
    m: usize,
    n: usize,
    pub enc_hidden: Dense<S>,
    pub enc_out: Dense<S>,
    pub dec_in: Dense<S>,
    pub dec_hidden: Dense<S>,
    pub dec_out: Dense<S>,
}

impl<S: Real> Autoencoder<S> {
    pub fn new(m: usize, n: usize, rng: &mut Rng) -> Result<Self> {
        check_sizes(m, n)?;
        Ok(Self {
            m,
            n,
            enc_hidden: Dense::new("enc_hidden", m, m, rng),
            enc_out: Dense::new("enc_out", m, n, rng),
            dec_in: Dense::new("dec_in", n, m, rng),
            dec_hidden: Dense::new("dec_hidden", m, m, rng),
            dec_out: Dense::new("dec_out", m, m, rng),
        })
    }

    /// Builds from explicit layers; shapes must chain.
    pub fn from_layers(
        enc_hidden: Dense<S>,
        enc_out: Dense<S>,
        dec_in: Dense<S>,
        dec_hidden: Dense<S>,
        dec_out: Dense<S>,
    ) -> Result<Self> {
        let m = enc_hidden.fan_in();
        let n = enc_out.fan_out();
        check_sizes(m, n)?;
        let chain = [
            (enc_hidden.fan_out(), m),
            (enc_out.fan_in(), m),
            (dec_in.fan_in(), n),
            (dec_in.fan_out(), m),
            (dec_hidden.fan_in(), m),
            (dec_hidden.fan_out(), m),
            (dec_out.fan_in(), m),
            (dec_out.fan_out(), m),
        ];
        if chain.iter().any(|(a, b)| a != b) {
            return Err(Error::ShapeMismatch {
                op: "Autoencoder::from_layers",
                detail: format!("layer widths do not chain for M = {m}, n = {n}"),
            });
        }
        Ok(Self { m, n, enc_hidden, enc_out, dec_in, dec_hidden, dec_out })
    }

    pub fn messages(&self) -> usize {
        self.m
    }

    pub fn block_length(&self) -> usize {
        self.n
    }

    pub fn cast<T: Real>(&self) -> Autoencoder<T> {
        Autoencoder {
            m: self.m,
            n: self.n,
            enc_hidden: self.enc_hidden.cast(),
            enc_out: self.enc_out.cast(),
            dec_in: self.dec_in.cast(),
            dec_hidden: self.dec_hidden.cast(),
            dec_out: self.dec_out.cast(),
        }
    }

    pub fn one_hot(&self, messages: &[usize]) -> Result<Tensor<S>> {
        let mut data = vec![S::zero(); messages.len() * self.m];
        for (r, &msg) in messages.iter().enumerate() {
            if msg >= self.m {
                return Err(Error::MessageOutOfRange { m: msg, count: self.m });
            }
            data[r * self.m + msg] = S::one();
        }
        Tensor::from_parts(vec![messages.len(), self.m], data)
    }

    /// Codewords for `messages`, scaled so the batch-average power per block
    /// is `n`.
    pub fn encode(&self, tape: &mut Tape<S>, messages: &[usize]) -> Result<Var> {
        if messages.is_empty() {
            return Err(Error::InvalidArgument("empty message batch".into()));
        }
        let x = tape.constant(self.one_hot(messages)?);
        let h = self.enc_hidden.forward(tape, x)?;
        let h = tape.activation(h, Activation::Elu);
        let h = self.enc_out.forward(tape, h)?;
        let target = S::of((self.n * messages.len()) as f64);
        let out = tape.power_normalize(h, target)?;
        check_power(tape.value(out), self.n)?;
        Ok(out)
    }

    /// Encodes without recording gradients.
    pub fn codewords(&self, messages: &[usize]) -> Result<Tensor<S>> {
        let mut tape = Tape::new();
        let x = self.encode(&mut tape, messages)?;
        Ok(tape.value(x).clone())
    }

    /// All `M` codewords normalized together, row `m` for message `m`.
    pub fn codebook(&self) -> Result<Tensor<S>> {
        let all: Vec<usize> = (0..self.m).collect();
        self.codewords(&all)
    }

    /// Raw scores `[batch, M]`; softmax is applied only inside the loss.
    pub fn decode(&self, tape: &mut Tape<S>, y: Var) -> Result<Var> {
        tape.value(y).check_finite("decoder input")?;
        let h = self.dec_in.forward(tape, y)?;
        let h = tape.activation(h, Activation::Elu);
        let h = self.dec_hidden.forward(tape, h)?;
        let h = tape.activation(h, Activation::Elu);
        self.dec_out.forward(tape, h)
    }

    /// Decoded messages for received blocks.
    pub fn decode_messages(&self, y: &Tensor<S>) -> Result<Vec<usize>> {
        let mut tape = Tape::new();
        let yv = tape.constant(y.clone());
        let s = self.decode(&mut tape, yv)?;
        Ok(argmax_rows(tape.value(s)))
    }

    pub fn encoder_parameters(&self) -> Vec<&Parameter<S>> {
        vec![&self.enc_hidden.weight, &self.enc_hidden.bias, &self.enc_out.weight, &self.enc_out.bias]
    }

    pub fn encoder_parameters_mut(&mut self) -> Vec<&mut Parameter<S>> {
        vec![
            &mut self.enc_hidden.weight,
            &mut self.enc_hidden.bias,
            &mut self.enc_out.weight,
            &mut self.enc_out.bias,
        ]
    }

    pub fn decoder_parameters(&self) -> Vec<&Parameter<S>> {
        vec![
            &self.dec_in.weight,
            &self.dec_in.bias,
            &self.dec_hidden.weight,
            &self.dec_hidden.bias,
            &self.dec_out.weight,
            &self.dec_out.bias,
        ]
    }

    pub fn decoder_parameters_mut(&mut self) -> Vec<&mut Parameter<S>> {
        vec![
            &mut self.dec_in.weight,
            &mut self.dec_in.bias,
            &mut self.dec_hidden.weight,
            &mut self.dec_hidden.bias,
            &mut self.dec_out.weight,
            &mut self.dec_out.bias,
        ]
    }

    /// Assigns values by parameter name; every parameter must be present.
    pub fn load_named(&mut self, mut lookup: impl FnMut(&str) -> Option<Tensor<S>>) -> Result<()> {
        for p in self.parameters_mut() {
            let v = lookup(p.name())
                .ok_or_else(|| Error::InvalidArgument(format!("missing parameter {}", p.name())))?;
            p.set_value(v)?;
        }
        Ok(())
    }
}

impl<S: Real> Module<S> for Autoencoder<S> {
    fn parameters(&self) -> Vec<&Parameter<S>> {
        let mut p = self.encoder_parameters();
        p.extend(self.decoder_parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<S>> {
        let Self { enc_hidden, enc_out, dec_in, dec_hidden, dec_out, .. } = self;
        vec![
            &mut enc_hidden.weight,
            &mut enc_hidden.bias,
            &mut enc_out.weight,
            &mut enc_out.bias,
            &mut dec_in.weight,
            &mut dec_in.bias,
            &mut dec_hidden.weight,
            &mut dec_hidden.bias,
            &mut dec_out.weight,
            &mut dec_out.bias,
        ]
    }
}

/// Mean cross entropy of `scores` against the sent messages.
pub fn ae_loss<S: Real>(tape: &mut Tape<S>, scores: Var, messages: &[usize]) -> Result<Var> {
    tape.softmax_cross_entropy(scores, messages)
}

/// Index of the largest entry per row, lowest index on ties.
pub fn argmax_rows<S: Real>(scores: &Tensor<S>) -> Vec<usize> {
    (0..scores.rows())
        .map(|r| {
            let row = scores.row(r);
            let mut best = 0;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Uniform random messages.
pub fn random_messages(count: usize, m: usize, rng: &mut Rng) -> Vec<usize> {
    (0..count).map(|_| rng.below(m)).collect()
}

fn check_sizes(m: usize, n: usize) -> Result<()> {
    if m < 2 || n == 0 {
        return Err(Error::InvalidArgument(format!("autoencoder needs M >= 2 and n >= 1, got M = {m}, n = {n}")));
    }
    Ok(())
}

fn check_power<S: Real>(x: &Tensor<S>, n: usize) -> Result<()> {
    let power = x.sum_squares().as_f64() / x.rows() as f64;
    if (power - n as f64).abs() > POWER_TOLERANCE * n as f64 {
        return Err(Error::InvalidArgument(format!(
            "power constraint violated: average {power}, expected {n}"
        )));
    }
    Ok(())
}
