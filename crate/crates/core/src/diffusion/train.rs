use alloc::vec;
use alloc::vec::Vec;

use super::net::{Denoiser, DenoiserNet};
use super::sampler::{forward_sample_rows, prediction_target};
use super::schedule::{NoiseSchedule, PredictionMode};
use crate::channels::ChannelModel;
use crate::error::{Error, Result};
use crate::nn::{Module, Optimizer, OptimizerConfig, OptimizerKind, Tape, Tensor, Var};
use crate::rng::Rng;
use crate::Real;

/// Paired channel observations: `inputs` are the conditions `c`, `outputs`
/// the channel outputs `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDataset<S = f32> {
    pub inputs: Tensor<S>,
    pub outputs: Tensor<S>,
}

impl<S: Real> ChannelDataset<S> {
    pub fn new(inputs: Tensor<S>, outputs: Tensor<S>) -> Result<Self> {
        if inputs.shape() != outputs.shape() || inputs.shape().len() != 2 {
            return Err(Error::ShapeMismatch {
                op: "ChannelDataset",
                detail: alloc::format!("{:?} vs {:?}", inputs.shape(), outputs.shape()),
            });
        }
        Ok(Self { inputs, outputs })
    }

    /// Inputs drawn from `N(0, I)` and passed through `channel`.
    pub fn gaussian_inputs(channel: &ChannelModel, count: usize, n: usize, rng: &mut Rng) -> Result<Self> {
        let inputs = Tensor::from_fn(vec![count, n], |_| rng.normal());
        let outputs = channel.apply(&inputs, rng)?;
        Self::new(inputs, outputs)
    }

    /// Given inputs passed through `channel`.
    pub fn from_inputs(channel: &ChannelModel, inputs: Tensor<S>, rng: &mut Rng) -> Result<Self> {
        let outputs = channel.apply(&inputs, rng)?;
        Self::new(inputs, outputs)
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn batch(&self, idx: &[usize]) -> (Tensor<S>, Tensor<S>) {
        (self.outputs.gather_rows(idx), self.inputs.gather_rows(idx))
    }
}

/// Simplified diffusion loss on one batch: draws `t ~ U{1..T}` per row, then
/// `eps ~ N(0, I)`, and returns the batch mean of `||pred - target||^2`.
pub fn loss_conditional<S: Real, D: Denoiser<S> + ?Sized>(
    net: &D,
    sched: &NoiseSchedule,
    mode: PredictionMode,
    tape: &mut Tape<S>,
    x0: &Tensor<S>,
    c: &Tensor<S>,
    rng: &mut Rng,
) -> Result<Var> {
    let rows = x0.rows();
    if rows == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let t: Vec<usize> = (0..rows).map(|_| 1 + rng.below(sched.steps())).collect();
    let eps = Tensor::from_fn(x0.shape().to_vec(), |_| rng.normal());
    let x_t = forward_sample_rows(sched, x0, &t, &eps)?;
    let target = prediction_target(sched, mode, x0, &t, &eps)?;

    let xv = tape.constant(x_t);
    let cv = tape.constant(c.clone());
    let pred = net.predict(tape, xv, &t, cv)?;
    let target = tape.constant(target);
    tape.squared_error(pred, target, S::one() / S::of(rows as f64))
}

/// Learning rate that applies from `from_epoch` (0-based) onward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrStage {
    pub from_epoch: usize,
    pub lr: f64,
}

/// Minibatch training options shared by the diffusion and autoencoder loops.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub lr_stages: Vec<LrStage>,
}

impl TrainConfig {
    pub fn new(epochs: usize, batch_size: usize, optimizer: OptimizerKind, lr: f64) -> Self {
        Self {
            epochs,
            batch_size,
            optimizer,
            lr_stages: vec![LrStage { from_epoch: 0, lr }],
        }
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr_stages
            .iter()
            .filter(|s| s.from_epoch <= epoch)
            .max_by_key(|s| s.from_epoch)
            .or(self.lr_stages.first())
            .map_or(1e-3, |s| s.lr)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.lr_stages.is_empty() {
            return Err(Error::InvalidArgument(
                "training needs epochs >= 1, batch_size >= 1 and a learning rate".into(),
            ));
        }
        Ok(())
    }
}

/// Mean training loss per epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossHistory {
    pub epoch_losses: Vec<f64>,
}

/// Trains `net` on `data` by minibatch steps on [`loss_conditional`].
pub fn train_dm<S: Real>(
    net: &mut DenoiserNet<S>,
    sched: &NoiseSchedule,
    mode: PredictionMode,
    data: &ChannelDataset<S>,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<LossHistory> {
    train_dm_with(net, sched, mode, data, cfg, rng, |_, _| {})
}

/// [`train_dm`] with a callback invoked after each epoch.
#[allow(clippy::too_many_arguments)]
pub fn train_dm_with<S: Real>(
    net: &mut DenoiserNet<S>,
    sched: &NoiseSchedule,
    mode: PredictionMode,
    data: &ChannelDataset<S>,
    cfg: &TrainConfig,
    rng: &mut Rng,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<LossHistory> {
    cfg.validate()?;
    mode.check_schedule(sched)?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    if data.dim() != net.dim() || sched.steps() != net.steps() {
        return Err(Error::ShapeMismatch {
            op: "train_dm",
            detail: alloc::format!(
                "data width {} / T {} vs net width {} / T {}",
                data.dim(),
                sched.steps(),
                net.dim(),
                net.steps()
            ),
        });
    }
    let mut shuffle_rng = rng.fork(0);
    let mut noise_rng = rng.fork(1);
    let mut opt = Optimizer::new(OptimizerConfig::with_kind(cfg.optimizer, cfg.lr_at(0)), net.parameters());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = LossHistory::default();

    for epoch in 0..cfg.epochs {
        opt.set_lr(cfg.lr_at(epoch));
        shuffle_rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut batches = 0usize;
        for idx in order.chunks(cfg.batch_size) {
            let (x0, c) = data.batch(idx);
            let mut tape = Tape::new();
            let loss = loss_conditional(&*net, sched, mode, &mut tape, &x0, &c, &mut noise_rng)?;
            let value = tape.value(loss).item().as_f64();
            if !value.is_finite() {
                return Err(Error::NonFinite("diffusion training loss"));
            }
            let grads = tape.backward(loss)?;
            net.zero_grad();
            grads.accumulate_into(net.parameters_mut());
            opt.step(net.parameters_mut())?;
            total += value;
            batches += 1;
        }
        let mean = total / batches as f64;
        history.epoch_losses.push(mean);
        on_epoch(epoch, mean);
    }
    Ok(history)
}
