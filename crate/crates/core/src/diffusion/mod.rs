//! Conditional DDPM/DDIM machinery: noise schedules, forward diffusion, the
//! denoiser network, training losses for epsilon and v prediction, and the
//! reverse-process samplers.

mod generator;
mod net;
mod sampler;
mod schedule;
mod train;

pub use generator::DiffusionChannel;
pub use net::{Denoiser, DenoiserNet};
pub use sampler::{
    ddim_coefficients, ddim_step, ddpm_coefficients, ddpm_step, estimate_x0_eps, forward_sample,
    forward_sample_rows, generalized_coefficients, generalized_step, prediction_target, sample, sample_on_tape, Sampler, StepCoefficients,
    Trajectory,
};
pub use schedule::{NoiseSchedule, PredictionMode, ScheduleKind};
pub use train::{
    loss_conditional, train_dm, train_dm_with, ChannelDataset, LossHistory, LrStage, TrainConfig,
};
