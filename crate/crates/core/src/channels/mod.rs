//! Ground-truth stochastic channels and signal-level helpers.
//!
//! Complex-valued channels (SSPA, Clarke) carry `n_c` complex symbols packed
//! as `n = 2 n_c` interleaved reals `[Re_1, Im_1, ..., Re_nc, Im_nc]`. Their
//! noise parameter `sigma` is the total standard deviation per complex
//! symbol, so each real component has variance `sigma^2 / 2`.

mod bessel;
mod clarke;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::nn::{Tape, Tensor, Var};
use crate::rng::Rng;
use crate::Real;

pub use bessel::j0;
pub use clarke::{clarke_covariance, CovarianceMatrix};

/// Parameters of a ground-truth channel.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    /// `y = x + z`, `z ~ N(0, sigma^2 I)`.
    Awgn { sigma: f64 },
    /// `y = h * x + z` with i.i.d. Rayleigh(`sigma_r`) gains.
    Rayleigh { sigma_r: f64, sigma: f64 },
    /// Per complex symbol `y = P(|x|) x + z`.
    Sspa { p: f64, a0: f64, v0: f64, sigma: f64, n_c: usize },
    /// `y = h * x + z`, `h ~ CN(0, Sigma)` with Clarke autocorrelation.
    Clarke { n_c: usize, fd_ts: f64, sigma: f64 },
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("channel: {what}")));
        let sigma = self.sigma();
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return bad("sigma must be finite and >= 0");
        }
        match *self {
            ChannelModel::Awgn { .. } => {}
            ChannelModel::Rayleigh { sigma_r, .. } => {
                if !(sigma_r > 0.0) {
                    return bad("sigma_r must be > 0");
                }
            }
            ChannelModel::Sspa { p, a0, v0, n_c, .. } => {
                if !(p > 0.0) || !(a0 >= 0.0) || !(v0 >= 0.0) || n_c == 0 {
                    return bad("SSPA needs p > 0, A0 >= 0, v0 >= 0, n_c >= 1");
                }
            }
            ChannelModel::Clarke { n_c, fd_ts, .. } => {
                if n_c == 0 || !(fd_ts >= 0.0) {
                    return bad("Clarke needs n_c >= 1 and fD_Ts >= 0");
                }
            }
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            ChannelModel::Awgn { sigma }
            | ChannelModel::Rayleigh { sigma, .. }
            | ChannelModel::Sspa { sigma, .. }
            | ChannelModel::Clarke { sigma, .. } => sigma,
        }
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ChannelModel::Awgn { sigma: s }
            | ChannelModel::Rayleigh { sigma: s, .. }
            | ChannelModel::Sspa { sigma: s, .. }
            | ChannelModel::Clarke { sigma: s, .. } => *s = sigma,
        }
        out
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, ChannelModel::Sspa { .. } | ChannelModel::Clarke { .. })
    }

    /// Real block length fixed by the model, if any.
    pub fn block_length(&self) -> Option<usize> {
        match *self {
            ChannelModel::Sspa { n_c, .. } | ChannelModel::Clarke { n_c, .. } => Some(2 * n_c),
            _ => None,
        }
    }

    /// Sets the noise level for `ebn0_db` with `m` messages over `n` real
    /// channel uses. Complex models get `sqrt(2)` times the per-real std.
    pub fn with_ebn0(&self, ebn0_db: f64, m: usize, n: usize) -> Result<Self> {
        let per_real = ebn0_to_sigma(ebn0_db, m, n)?;
        let sigma = if self.is_complex() {
            per_real * core::f64::consts::SQRT_2
        } else {
            per_real
        };
        Ok(self.with_sigma(sigma))
    }

    /// Draws the random coefficients for `rows` blocks of width `n`.
    pub fn draw<S: Real>(&self, rows: usize, n: usize, rng: &mut Rng) -> Result<ChannelDraw<S>> {
        self.validate()?;
        if let Some(expected) = self.block_length() {
            if n != expected {
                return Err(Error::ShapeMismatch {
                    op: "apply_channel",
                    detail: format!("block length {n}, model expects {expected}"),
                });
            }
        }
        let len = rows * n;
        let gain = match *self {
            ChannelModel::Awgn { .. } | ChannelModel::Sspa { .. } => None,
            ChannelModel::Rayleigh { sigma_r, .. } => {
                // inverse CDF of Rayleigh(sigma_r), U in (0, 1]
                let h = (0..len)
                    .map(|_| {
                        let u: f64 = rng.uniform_open0();
                        S::of(sigma_r * libm::sqrt(-2.0 * libm::log(u)))
                    })
                    .collect();
                Some(Tensor::raw(vec![rows, n], h))
            }
            ChannelModel::Clarke { n_c, fd_ts, .. } => {
                let l = clarke_covariance(n_c, fd_ts).cholesky()?;
                let mut h = Vec::with_capacity(len);
                let scale = core::f64::consts::FRAC_1_SQRT_2;
                for _ in 0..rows {
                    let zr: Vec<f64> = rng.normal_vec(n_c);
                    let zi: Vec<f64> = rng.normal_vec(n_c);
                    for i in 0..n_c {
                        let row = &l[i * n_c..=i * n_c + i];
                        let re: f64 = row.iter().zip(&zr).map(|(a, b)| a * b).sum();
                        let im: f64 = row.iter().zip(&zi).map(|(a, b)| a * b).sum();
                        h.push(S::of(re * scale));
                        h.push(S::of(im * scale));
                    }
                }
                Some(Tensor::raw(vec![rows, n], h))
            }
        };
        let noise_std = if self.is_complex() {
            self.sigma() * core::f64::consts::FRAC_1_SQRT_2
        } else {
            self.sigma()
        };
        let noise = (0..len).map(|_| S::of(noise_std * rng.normal::<f64>())).collect();
        Ok(ChannelDraw { gain, noise: Tensor::raw(vec![rows, n], noise) })
    }

    /// Passes a `[batch, n]` block through the channel.
    pub fn apply<S: Real>(&self, x: &Tensor<S>, rng: &mut Rng) -> Result<Tensor<S>> {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let y = self.apply_on_tape(&mut tape, xv, rng)?;
        Ok(tape.value(y).clone())
    }

    /// Differentiable application; the random draws are constants.
    pub fn apply_on_tape<S: Real>(&self, tape: &mut Tape<S>, x: Var, rng: &mut Rng) -> Result<Var> {
        let xv = tape.value(x);
        if xv.shape().len() != 2 {
            return Err(Error::ShapeMismatch {
                op: "apply_channel",
                detail: format!("expected [batch, n], got {:?}", xv.shape()),
            });
        }
        xv.check_finite("channel input")?;
        let (rows, n) = (xv.rows(), xv.cols());
        let draw = self.draw::<S>(rows, n, rng)?;
        draw.apply_on_tape(self, tape, x)
    }
}

/// Random coefficients of one channel use, kept so a pass can be replayed.
#[derive(Debug, Clone)]
pub struct ChannelDraw<S> {
    pub gain: Option<Tensor<S>>,
    pub noise: Tensor<S>,
}

impl<S: Real> ChannelDraw<S> {
    pub fn apply_on_tape(&self, model: &ChannelModel, tape: &mut Tape<S>, x: Var) -> Result<Var> {
        let faded = match (model, &self.gain) {
            (ChannelModel::Rayleigh { .. }, Some(h)) => tape.mul_const(x, h.clone())?,
            (ChannelModel::Clarke { .. }, Some(h)) => tape.complex_mul_const(x, h.clone())?,
            (ChannelModel::Sspa { p, a0, v0, .. }, _) => {
                tape.sspa(x, S::of(*p), S::of(*a0), S::of(*v0))?
            }
            _ => x,
        };
        let z = tape.constant(self.noise.clone());
        tape.add(faded, z)
    }
}

/// Noise std per real dimension for unit signal power per real dimension
/// and rate `log2(m) / n` bits per real channel use.
pub fn ebn0_to_sigma(ebn0_db: f64, m: usize, n: usize) -> Result<f64> {
    if m < 2 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "Eb/N0 conversion needs M >= 2 and n >= 1 (got M = {m}, n = {n})"
        )));
    }
    let rate = libm::log2(m as f64) / n as f64;
    let ebn0 = libm::pow(10.0, ebn0_db / 10.0);
    Ok(libm::sqrt(1.0 / (2.0 * rate * ebn0)))
}

/// SSPA amplitude gain `v0 / (1 + (v0 a / A0)^(2p))^(1/(2p))`.
///
/// With `A0 = 0` the amplifier is fully saturated: the gain is 0 for any
/// `a > 0` and `v0` at `a = 0`.
pub fn sspa_gain<S: Real>(a: S, p: S, a0: S, v0: S) -> S {
    if a <= S::zero() {
        return v0;
    }
    if a0 <= S::zero() {
        return S::zero();
    }
    let two_p = S::of(2.0) * p;
    let u = (v0 * a / a0).powf(two_p);
    if !u.is_finite() {
        // (1 + u)^(1/2p) ~ v0 a / A0
        return a0 / a;
    }
    v0 / (S::one() + u).powf(S::one() / two_p)
}

/// Interleaves `[Re, Im]` pairs.
pub fn pack_complex<S: Real>(z: &[Complex<S>]) -> Vec<S> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn unpack_complex<S: Real>(x: &[S]) -> Result<Vec<Complex<S>>> {
    if x.len() % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot unpack odd length {} into complex pairs",
            x.len()
        )));
    }
    Ok(x.chunks(2).map(|p| Complex::new(p[0], p[1])).collect())
}
