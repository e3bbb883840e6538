use super::net::DenoiserNet;
use super::sampler::{sample, sample_on_tape, Sampler};
use super::schedule::{NoiseSchedule, PredictionMode};
use crate::error::{Error, Result};
use crate::nn::{Tape, Tensor, Var};
use crate::rng::Rng;
use crate::Real;

/// A trained conditional denoiser used as a stand-in for a channel.
#[derive(Debug, Clone)]
pub struct DiffusionChannel<S = f32> {
    pub net: DenoiserNet<S>,
    pub schedule: NoiseSchedule,
    pub mode: PredictionMode,
    pub sampler: Sampler,
}

impl<S: Real> DiffusionChannel<S> {
    pub fn new(net: DenoiserNet<S>, schedule: NoiseSchedule, mode: PredictionMode, sampler: Sampler) -> Result<Self> {
        mode.check_schedule(&schedule)?;
        if net.steps() != schedule.steps() {
            return Err(Error::ShapeMismatch {
                op: "DiffusionChannel",
                detail: alloc::format!("net T = {}, schedule T = {}", net.steps(), schedule.steps()),
            });
        }
        Ok(Self { net, schedule, mode, sampler })
    }

    pub fn dim(&self) -> usize {
        self.net.dim()
    }

    /// One generated channel output per row of `c`.
    pub fn generate(&self, c: &Tensor<S>, rng: &mut Rng) -> Result<Tensor<S>> {
        sample(&self.schedule, &self.net, self.mode, &self.sampler, c, rng)
    }

    /// Differentiable generation with respect to `c`.
    pub fn generate_on_tape(&self, tape: &mut Tape<S>, c: Var, rng: &mut Rng) -> Result<Var> {
        sample_on_tape(&self.schedule, &self.net, self.mode, &self.sampler, tape, c, rng)
    }
}
