//! Forward diffusion and the DDPM / DDIM reverse steppers.
//!
//! Every stepper is an affine map `x_prev = a x + b pred (+ s eps)` whose
//! coefficients depend only on the schedule, the prediction mode, and the
//! timesteps. The coefficient functions are exposed separately so the
//! algebra can be checked without a network.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::net::Denoiser;
use super::schedule::{NoiseSchedule, PredictionMode};
use crate::error::{Error, Result};
use crate::nn::{Tape, Tensor, Var};
use crate::rng::Rng;
use crate::Real;

/// `x_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) eps`.
pub fn forward_sample<S: Real>(
    sched: &NoiseSchedule,
    x0: &Tensor<S>,
    t: usize,
    eps: &Tensor<S>,
) -> Result<Tensor<S>> {
    sched.check_t(t)?;
    let ab = sched.alpha_bar(t);
    let (a, b) = (S::of(libm::sqrt(ab)), S::of(libm::sqrt(1.0 - ab)));
    x0.zip_map(eps, |x, e| a * x + b * e)
}

/// Per-row forward diffusion with individual timesteps.
pub fn forward_sample_rows<S: Real>(
    sched: &NoiseSchedule,
    x0: &Tensor<S>,
    t: &[usize],
    eps: &Tensor<S>,
) -> Result<Tensor<S>> {
    if x0.shape() != eps.shape() || t.len() != x0.rows() {
        return Err(Error::ShapeMismatch {
            op: "forward_sample",
            detail: format!("x0 {:?}, eps {:?}, {} steps", x0.shape(), eps.shape(), t.len()),
        });
    }
    let n = x0.cols();
    let mut out = Vec::with_capacity(x0.len());
    for (r, &tr) in t.iter().enumerate() {
        sched.check_t(tr)?;
        let ab = sched.alpha_bar(tr);
        let (a, b) = (S::of(libm::sqrt(ab)), S::of(libm::sqrt(1.0 - ab)));
        for j in 0..n {
            out.push(a * x0.row(r)[j] + b * eps.row(r)[j]);
        }
    }
    Tensor::from_parts(x0.shape().to_vec(), out)
}

/// Regression target for the given mode.
pub fn prediction_target<S: Real>(
    sched: &NoiseSchedule,
    mode: PredictionMode,
    x0: &Tensor<S>,
    t: &[usize],
    eps: &Tensor<S>,
) -> Result<Tensor<S>> {
    match mode {
        PredictionMode::Epsilon => Ok(eps.clone()),
        PredictionMode::V => {
            let n = x0.cols();
            let mut out = Vec::with_capacity(x0.len());
            for (r, &tr) in t.iter().enumerate() {
                sched.check_t(tr)?;
                let ab = sched.alpha_bar(tr);
                let (a, b) = (S::of(libm::sqrt(ab)), S::of(libm::sqrt(1.0 - ab)));
                for j in 0..n {
                    out.push(a * eps.row(r)[j] - b * x0.row(r)[j]);
                }
            }
            Tensor::from_parts(x0.shape().to_vec(), out)
        }
    }
}

/// Estimates `(x0_hat, eps_hat)` from `x_t` and a network prediction.
///
/// Epsilon: `x0 = (x_t - sqrt(1 - ab) eps) / sqrt(ab)`.
/// V: `x0 = sqrt(ab) x_t - sqrt(1 - ab) v`, `eps = sqrt(1 - ab) x_t + sqrt(ab) v`.
pub fn estimate_x0_eps<S: Real>(
    sched: &NoiseSchedule,
    mode: PredictionMode,
    x_t: &Tensor<S>,
    t: usize,
    pred: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>)> {
    sched.check_t(t)?;
    let ab = sched.alpha_bar(t);
    let (sa, sb) = (S::of(libm::sqrt(ab)), S::of(libm::sqrt(1.0 - ab)));
    match mode {
        PredictionMode::Epsilon => {
            if ab == 0.0 {
                return Err(Error::ZeroSnrEpsilon(t));
            }
            let x0 = x_t.zip_map(pred, |x, e| (x - sb * e) / sa)?;
            Ok((x0, pred.clone()))
        }
        PredictionMode::V => {
            let x0 = x_t.zip_map(pred, |x, v| sa * x - sb * v)?;
            let eps = x_t.zip_map(pred, |x, v| sb * x + sa * v)?;
            Ok((x0, eps))
        }
    }
}

/// Coefficients of one affine denoising step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients {
    /// Multiplies the current sample.
    pub sample: f64,
    /// Multiplies the network prediction.
    pub prediction: f64,
    /// Std of the injected Gaussian noise.
    pub noise: f64,
}

/// DDPM step `t -> t - 1`. The noise term is dropped at `t = 1`.
pub fn ddpm_coefficients(
    sched: &NoiseSchedule,
    mode: PredictionMode,
    t: usize,
) -> Result<StepCoefficients> {
    sched.check_t(t)?;
    let alpha = sched.alpha(t);
    let beta = sched.beta(t);
    let ab = sched.alpha_bar(t);
    let ab_prev = sched.alpha_bar(t - 1);
    let ratio = if beta == 0.0 { 0.0 } else { beta / libm::sqrt(1.0 - ab) };
    let (sample, prediction) = match mode {
        PredictionMode::Epsilon => {
            if alpha == 0.0 {
                return Err(Error::ZeroSnrEpsilon(t));
            }
            let sa = libm::sqrt(alpha);
            (1.0 / sa, -ratio / sa)
        }
        PredictionMode::V => (libm::sqrt(alpha), -libm::sqrt(ab_prev) * ratio),
    };
    let noise = if t == 1 { 0.0 } else { sched.sigma(t) };
    Ok(StepCoefficients { sample, prediction, noise })
}

/// Deterministic DDIM step `from -> to` with `to < from`.
pub fn ddim_coefficients(
    sched: &NoiseSchedule,
    mode: PredictionMode,
    from: usize,
    to: usize,
) -> Result<StepCoefficients> {
    sched.check_t(from)?;
    if to >= from {
        return Err(Error::InvalidTrajectory(format!("DDIM step {from} -> {to}")));
    }
    let ab = sched.alpha_bar(from);
    let ab_to = sched.alpha_bar(to);
    let (sample, prediction) = match mode {
        PredictionMode::Epsilon => {
            if ab == 0.0 {
                return Err(Error::ZeroSnrEpsilon(from));
            }
            let r = libm::sqrt(ab_to) / libm::sqrt(ab);
            (r, -(r * libm::sqrt(1.0 - ab) - libm::sqrt(1.0 - ab_to)))
        }
        PredictionMode::V => (
            libm::sqrt(ab_to * ab) + libm::sqrt((1.0 - ab_to) * (1.0 - ab)),
            libm::sqrt(ab * (1.0 - ab_to)) - libm::sqrt(ab_to * (1.0 - ab)),
        ),
    };
    Ok(StepCoefficients { sample, prediction, noise: 0.0 })
}

/// Generalized non-Markovian step `from -> to` with noise level
/// `sigma = eta * sqrt((1 - ab_to) / (1 - ab_from)) * sqrt(1 - ab_from / ab_to)`.
///
/// `eta = 0` is the DDIM step; `eta = 1` with `to = from - 1` is the DDPM
/// step.
pub fn generalized_coefficients(
    sched: &NoiseSchedule,
    mode: PredictionMode,
    from: usize,
    to: usize,
    eta: f64,
) -> Result<StepCoefficients> {
    sched.check_t(from)?;
    if to >= from {
        return Err(Error::InvalidTrajectory(format!("step {from} -> {to}")));
    }
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidArgument(format!("eta = {eta}")));
    }
    let ab = sched.alpha_bar(from);
    let ab_to = sched.alpha_bar(to);
    let var = if ab >= 1.0 || ab_to <= 0.0 {
        0.0
    } else {
        eta * eta * (1.0 - ab_to) / (1.0 - ab) * (1.0 - ab / ab_to)
    };
    let k = libm::sqrt((1.0 - ab_to - var).max(0.0));
    let (sample, prediction) = match mode {
        PredictionMode::Epsilon => {
            if ab == 0.0 {
                return Err(Error::ZeroSnrEpsilon(from));
            }
            let r = libm::sqrt(ab_to / ab);
            (r, k - r * libm::sqrt(1.0 - ab))
        }
        PredictionMode::V => (
            libm::sqrt(ab_to * ab) + k * libm::sqrt(1.0 - ab),
            k * libm::sqrt(ab) - libm::sqrt(ab_to * (1.0 - ab)),
        ),
    };
    Ok(StepCoefficients { sample, prediction, noise: libm::sqrt(var) })
}

/// One generalized step on the tape; see [`generalized_coefficients`].
#[allow(clippy::too_many_arguments)]
pub fn generalized_step<S: Real, D: Denoiser<S> + ?Sized>(
    sched: &NoiseSchedule,
    net: &D,
    mode: PredictionMode,
    tape: &mut Tape<S>,
    x: Var,
    from: usize,
    to: usize,
    eta: f64,
    c: Var,
    rng: &mut Rng,
) -> Result<Var> {
    let k = generalized_coefficients(sched, mode, from, to, eta)?;
    let rows = tape.value(x).rows();
    let pred = net.predict(tape, x, &vec![from; rows], c)?;
    let noise = if k.noise > 0.0 {
        let s = k.noise;
        Some(Tensor::from_fn(tape.value(x).shape().to_vec(), |_| S::of(s * rng.normal::<f64>())))
    } else {
        None
    };
    affine_step(tape, x, pred, k, noise)
}

fn affine_step<S: Real>(
    tape: &mut Tape<S>,
    x: Var,
    pred: Var,
    k: StepCoefficients,
    noise: Option<Tensor<S>>,
) -> Result<Var> {
    let out = tape.lin_comb(x, S::of(k.sample), pred, S::of(k.prediction))?;
    match noise {
        Some(z) => {
            let z = tape.constant(z);
            tape.add(out, z)
        }
        None => Ok(out),
    }
}

/// One ancestral DDPM step on the tape. With `stochastic == false` the noise
/// term is suppressed.
#[allow(clippy::too_many_arguments)]
pub fn ddpm_step<S: Real, D: Denoiser<S> + ?Sized>(
    sched: &NoiseSchedule,
    net: &D,
    mode: PredictionMode,
    tape: &mut Tape<S>,
    x_t: Var,
    t: usize,
    c: Var,
    rng: &mut Rng,
    stochastic: bool,
) -> Result<Var> {
    let k = ddpm_coefficients(sched, mode, t)?;
    let rows = tape.value(x_t).rows();
    let pred = net.predict(tape, x_t, &vec![t; rows], c)?;
    let noise = if stochastic && k.noise > 0.0 {
        let shape = tape.value(x_t).shape().to_vec();
        let s = k.noise;
        Some(Tensor::from_fn(shape, |_| S::of(s * rng.normal::<f64>())))
    } else {
        None
    };
    affine_step(tape, x_t, pred, k, noise)
}

/// One DDIM step `from -> to` on the tape.
#[allow(clippy::too_many_arguments)]
pub fn ddim_step<S: Real, D: Denoiser<S> + ?Sized>(
    sched: &NoiseSchedule,
    net: &D,
    mode: PredictionMode,
    tape: &mut Tape<S>,
    x: Var,
    from: usize,
    to: usize,
    c: Var,
) -> Result<Var> {
    let k = ddim_coefficients(sched, mode, from, to)?;
    let rows = tape.value(x).rows();
    let pred = net.predict(tape, x, &vec![from; rows], c)?;
    affine_step(tape, x, pred, k, None)
}

/// Strictly increasing timesteps `tau_1 < ... < tau_S = T` visited by a
/// skipped sampler, with `tau_0 = 0` implied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    steps: Vec<usize>,
}

impl Trajectory {
    /// Uniform spacing `tau_i = round(i T / S)`.
    pub fn uniform(total: usize, len: usize) -> Result<Self> {
        if len == 0 || len > total {
            return Err(Error::InvalidTrajectory(format!("S = {len} with T = {total}")));
        }
        let mut steps: Vec<usize> = (1..=len)
            .map(|i| libm::round(i as f64 * total as f64 / len as f64) as usize)
            .collect();
        steps.dedup();
        *steps.last_mut().expect("len >= 1") = total;
        Self::new(steps, total)
    }

    pub fn full(total: usize) -> Result<Self> {
        Self::uniform(total, total)
    }

    pub fn new(steps: Vec<usize>, total: usize) -> Result<Self> {
        let ok = !steps.is_empty()
            && steps[0] >= 1
            && steps.windows(2).all(|w| w[0] < w[1])
            && steps.last() == Some(&total);
        if !ok {
            return Err(Error::InvalidTrajectory(format!("{steps:?} for T = {total}")));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `(tau_i, tau_{i-1})` pairs from `T` down to `(tau_1, 0)`.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.steps.len()).rev().map(move |i| {
            let to = if i == 0 { 0 } else { self.steps[i - 1] };
            (self.steps[i], to)
        })
    }
}

/// Reverse-process algorithm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sampler {
    /// Ancestral sampling over every step; `stochastic == false` drops the
    /// per-step noise.
    Ddpm { stochastic: bool },
    /// Deterministic sampling along a trajectory.
    Ddim(Trajectory),
}

impl Sampler {
    pub fn ddpm() -> Self {
        Sampler::Ddpm { stochastic: true }
    }

    pub fn ddim(total: usize, len: usize) -> Result<Self> {
        Ok(Sampler::Ddim(Trajectory::uniform(total, len)?))
    }

    /// `DDPM` or `DDIM-S`.
    pub fn label(&self) -> String {
        match self {
            Sampler::Ddpm { .. } => "DDPM".into(),
            Sampler::Ddim(tr) => format!("DDIM-{}", tr.len()),
        }
    }
}

/// Rows per chunk when sampling outside a tape.
const SAMPLE_CHUNK: usize = 4096;

/// Runs the whole reverse chain on `tape`, keeping it differentiable with
/// respect to `c` and the network. Draws `x_T` first, then any step noise.
pub fn sample_on_tape<S: Real, D: Denoiser<S> + ?Sized>(
    sched: &NoiseSchedule,
    net: &D,
    mode: PredictionMode,
    sampler: &Sampler,
    tape: &mut Tape<S>,
    c: Var,
    rng: &mut Rng,
) -> Result<Var> {
    mode.check_schedule(sched)?;
    let shape = tape.value(c).shape().to_vec();
    let x_t = Tensor::from_fn(shape, |_| rng.normal());
    let mut x = tape.constant(x_t);
    match sampler {
        Sampler::Ddpm { stochastic } => {
            for t in (1..=sched.steps()).rev() {
                x = ddpm_step(sched, net, mode, tape, x, t, c, rng, *stochastic)?;
            }
        }
        Sampler::Ddim(traj) => {
            if traj.steps().last() != Some(&sched.steps()) {
                return Err(Error::InvalidTrajectory(format!(
                    "trajectory ends at {:?}, schedule has T = {}",
                    traj.steps().last(),
                    sched.steps()
                )));
            }
            for (from, to) in traj.transitions() {
                x = ddim_step(sched, net, mode, tape, x, from, to, c)?;
            }
        }
    }
    Ok(x)
}

/// Generates one sample per condition row without recording gradients.
///
/// Conditions are processed in chunks of 4096 rows; within a chunk the
/// random draws match [`sample_on_tape`].
pub fn sample<S: Real, D: Denoiser<S> + ?Sized>(
    sched: &NoiseSchedule,
    net: &D,
    mode: PredictionMode,
    sampler: &Sampler,
    c: &Tensor<S>,
    rng: &mut Rng,
) -> Result<Tensor<S>> {
    mode.check_schedule(sched)?;
    let rows = c.rows();
    let n = c.cols();
    let mut out = Vec::with_capacity(c.len());
    let mut start = 0;
    while start < rows {
        let end = (start + SAMPLE_CHUNK).min(rows);
        let idx: Vec<usize> = (start..end).collect();
        let chunk = c.gather_rows(&idx);
        let x = sample_chunk(sched, net, mode, sampler, chunk, rng)?;
        out.extend_from_slice(x.data());
        start = end;
    }
    Tensor::from_parts(vec![rows, n], out)
}

fn sample_chunk<S: Real, D: Denoiser<S> + ?Sized>(
    sched: &NoiseSchedule,
    net: &D,
    mode: PredictionMode,
    sampler: &Sampler,
    c: Tensor<S>,
    rng: &mut Rng,
) -> Result<Tensor<S>> {
    let mut x = Tensor::from_fn(c.shape().to_vec(), |_| rng.normal());
    let step = |x: Tensor<S>, f: &mut dyn FnMut(&mut Tape<S>, Var, Var) -> Result<Var>| {
        let mut tape = Tape::new();
        let xv = tape.constant(x);
        let cv = tape.constant(c.clone());
        let y = f(&mut tape, xv, cv)?;
        Ok::<_, Error>(tape.value(y).clone())
    };
    match sampler {
        Sampler::Ddpm { stochastic } => {
            for t in (1..=sched.steps()).rev() {
                x = step(x, &mut |tape, xv, cv| {
                    ddpm_step(sched, net, mode, tape, xv, t, cv, rng, *stochastic)
                })?;
            }
        }
        Sampler::Ddim(traj) => {
            if traj.steps().last() != Some(&sched.steps()) {
                return Err(Error::InvalidTrajectory(format!(
                    "trajectory ends at {:?}, schedule has T = {}",
                    traj.steps().last(),
                    sched.steps()
                )));
            }
            for (from, to) in traj.transitions() {
                x = step(x, &mut |tape, xv, cv| ddim_step(sched, net, mode, tape, xv, from, to, cv))?;
            }
        }
    }
    Ok(x)
}
