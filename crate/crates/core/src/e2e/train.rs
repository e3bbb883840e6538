use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{ae_loss, random_messages, Autoencoder};
use crate::channels::ChannelModel;
use crate::diffusion::{train_dm, ChannelDataset, DiffusionChannel, LossHistory, LrStage, TrainConfig};
use crate::error::{Error, Result};
use crate::nn::{Module, Optimizer, OptimizerConfig, OptimizerKind, Tape, Var};
use crate::rng::Rng;
use crate::Real;

/// Which sub-networks are updated and in what order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateSchedule {
    /// Both networks step on every batch.
    Joint,
    /// Each epoch runs a decoder pass, then an encoder pass.
    Successive,
    /// Only the decoder trains; gradients stop at the channel input.
    DecoderOnly,
}

/// Autoencoder training options. Messages are drawn fresh for every batch.
#[derive(Debug, Clone, PartialEq)]
pub struct AeTrainConfig {
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub lr_stages: Vec<LrStage>,
    /// Noise level applied to true-channel passes.
    pub ebn0_db: f64,
    pub updates: UpdateSchedule,
}

impl AeTrainConfig {
    /// Adam, joint updates.
    pub fn new(epochs: usize, batches_per_epoch: usize, batch_size: usize, lr: f64, ebn0_db: f64) -> Self {
        Self {
            epochs,
            batches_per_epoch,
            batch_size,
            optimizer: OptimizerKind::Adam,
            lr_stages: vec![LrStage { from_epoch: 0, lr }],
            ebn0_db,
            updates: UpdateSchedule::Joint,
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
        if self.epochs == 0 || self.batches_per_epoch == 0 || self.batch_size == 0 || self.lr_stages.is_empty() {
            return Err(Error::InvalidArgument(
                "autoencoder training needs epochs, batches_per_epoch, batch_size >= 1 and a learning rate".into(),
            ));
        }
        Ok(())
    }
}

/// The channel an autoencoder is trained through.
#[derive(Debug, Clone, Copy)]
pub enum TrainChannel<'a, S> {
    Model(&'a ChannelModel),
    Diffusion(&'a DiffusionChannel<S>),
}

impl<S: Real> TrainChannel<'_, S> {
    fn pass(&self, tape: &mut Tape<S>, x: Var, rng: &mut Rng) -> Result<Var> {
        match self {
            TrainChannel::Model(model) => model.apply_on_tape(tape, x, rng),
            TrainChannel::Diffusion(dm) => dm.generate_on_tape(tape, x, rng),
        }
    }
}

/// Trains `ae` through `channel` and returns the mean loss per epoch.
pub fn train_ae<S: Real>(
    ae: &mut Autoencoder<S>,
    channel: TrainChannel<'_, S>,
    cfg: &AeTrainConfig,
    rng: &mut Rng,
) -> Result<LossHistory> {
    cfg.validate()?;
    let model;
    let channel = match channel {
        TrainChannel::Model(m) => {
            model = m.with_ebn0(cfg.ebn0_db, ae.messages(), ae.block_length())?;
            TrainChannel::Model(&model)
        }
        TrainChannel::Diffusion(dm) => {
            if dm.dim() != ae.block_length() {
                return Err(Error::ShapeMismatch {
                    op: "train_ae",
                    detail: format!("generator width {}, block length {}", dm.dim(), ae.block_length()),
                });
            }
            channel
        }
    };
    let mut msg_rng = rng.fork(0);
    let mut chan_rng = rng.fork(1);
    let lr0 = cfg.lr_at(0);
    let mut enc_opt = Optimizer::new(OptimizerConfig::with_kind(cfg.optimizer, lr0), ae.encoder_parameters());
    let mut dec_opt = Optimizer::new(OptimizerConfig::with_kind(cfg.optimizer, lr0), ae.decoder_parameters());
    let mut history = LossHistory::default();

    for epoch in 0..cfg.epochs {
        enc_opt.set_lr(cfg.lr_at(epoch));
        dec_opt.set_lr(cfg.lr_at(epoch));
        let passes: &[(bool, bool)] = match cfg.updates {
            UpdateSchedule::Joint => &[(true, true)],
            UpdateSchedule::Successive => &[(false, true), (true, false)],
            UpdateSchedule::DecoderOnly => &[(false, true)],
        };
        let mut total = 0.0;
        let mut count = 0usize;
        for &(update_enc, update_dec) in passes {
            for _ in 0..cfg.batches_per_epoch {
                let msgs = random_messages(cfg.batch_size, ae.messages(), &mut msg_rng);
                let mut tape = Tape::new();
                let x = ae.encode(&mut tape, &msgs)?;
                let x = if update_enc { x } else { tape.detach(x) };
                let y = channel.pass(&mut tape, x, &mut chan_rng)?;
                let scores = ae.decode(&mut tape, y)?;
                let loss = ae_loss(&mut tape, scores, &msgs)?;
                let value = tape.value(loss).item().as_f64();
                if !value.is_finite() {
                    return Err(Error::NonFinite("autoencoder training loss"));
                }
                let grads = tape.backward(loss)?;
                ae.zero_grad();
                grads.accumulate_into(ae.parameters_mut());
                if update_enc {
                    enc_opt.step(ae.encoder_parameters_mut())?;
                }
                if update_dec {
                    dec_opt.step(ae.decoder_parameters_mut())?;
                }
                total += value;
                count += 1;
            }
        }
        history.epoch_losses.push(total / count as f64);
    }
    Ok(history)
}

/// Trains through the true channel at `cfg.ebn0_db`.
pub fn train_model_aware<S: Real>(
    ae: &mut Autoencoder<S>,
    channel: &ChannelModel,
    cfg: &AeTrainConfig,
    rng: &mut Rng,
) -> Result<LossHistory> {
    train_ae(ae, TrainChannel::Model(channel), cfg, rng)
}

/// Trains through a generator that was fitted once on generic inputs.
pub fn train_pretrained<S: Real>(
    ae: &mut Autoencoder<S>,
    dm: &DiffusionChannel<S>,
    cfg: &AeTrainConfig,
    rng: &mut Rng,
) -> Result<LossHistory> {
    train_ae(ae, TrainChannel::Diffusion(dm), cfg, rng)
}

/// Alternation budget and generator fine-tuning recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct IterativeConfig {
    pub alternations: usize,
    /// Codeword/channel-output pairs regenerated per alternation.
    pub dataset_size: usize,
    pub dm: TrainConfig,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterativeHistory {
    pub dm: Vec<LossHistory>,
    pub ae: Vec<LossHistory>,
}

/// Alternates fine-tuning `dm` on the current codewords passed through the
/// true `channel` with training `ae` through `dm`.
///
/// With zero alternations this is [`train_pretrained`].
pub fn train_iterative<S: Real>(
    ae: &mut Autoencoder<S>,
    dm: &mut DiffusionChannel<S>,
    channel: &ChannelModel,
    cfg: &AeTrainConfig,
    iter: &IterativeConfig,
    rng: &mut Rng,
) -> Result<IterativeHistory> {
    let mut history = IterativeHistory::default();
    if iter.alternations == 0 {
        history.ae.push(train_pretrained(ae, dm, cfg, rng)?);
        return Ok(history);
    }
    if iter.dataset_size == 0 {
        return Err(Error::InvalidArgument("iterative training needs dataset_size >= 1".into()));
    }
    let truth = channel.with_ebn0(cfg.ebn0_db, ae.messages(), ae.block_length())?;
    for a in 0..iter.alternations {
        let round = rng.fork(a as u64);
        let msgs = random_messages(iter.dataset_size, ae.messages(), &mut round.fork(0));
        let inputs = ae.codebook()?.gather_rows(&msgs);
        let data = ChannelDataset::from_inputs(&truth, inputs, &mut round.fork(1))?;
        let h = train_dm(&mut dm.net, &dm.schedule, dm.mode, &data, &iter.dm, &mut round.fork(2))?;
        history.dm.push(h);
        history.ae.push(train_pretrained(ae, dm, cfg, &mut round.fork(3))?);
    }
    Ok(history)
}
