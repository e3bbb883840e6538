//! Experiment configuration, read from TOML.
//!
//! Every section except `[channel]` has defaults, so a config can be as small
//! as `[channel] model = "awgn"`.

use std::path::Path;

use diffchan_core::channels::ChannelModel;
use diffchan_core::diffusion::{LrStage, NoiseSchedule, PredictionMode, Sampler, ScheduleKind, TrainConfig};
use diffchan_core::e2e::{AeTrainConfig, IterativeConfig, UpdateSchedule};
use diffchan_core::nn::OptimizerKind;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub channel: ChannelSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub autoencoder: AutoencoderSpec,
    #[serde(default)]
    pub diffusion: DiffusionSpec,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub dm_training: DmTrainingSpec,
    #[serde(default)]
    pub ae_training: AeTrainingSpec,
    #[serde(default)]
    pub eval: EvalSpec,
}

/// Channel law without its noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum ChannelSpec {
    Awgn,
    Rayleigh {
        #[serde(default = "one")]
        sigma_r: f64,
    },
    Sspa {
        p: f64,
        a0: f64,
        v0: f64,
        n_c: usize,
    },
    Clarke {
        n_c: usize,
        fd_ts: f64,
    },
}

/// Noise level as a per-real standard deviation or as Eb/N0 in dB. Exactly
/// one must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma: Option<f64>,
    pub ebn0_db: Option<f64>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { sigma: None, ebn0_db: Some(5.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderSpec {
    pub m: usize,
    pub n: usize,
}

impl Default for AutoencoderSpec {
    fn default() -> Self {
        Self { m: 16, n: 7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleName {
    Constant,
    Sigmoid,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Epsilon,
    V,
}

impl From<ModeName> for PredictionMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Epsilon => PredictionMode::Epsilon,
            ModeName::V => PredictionMode::V,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionSpec {
    pub schedule: ScheduleName,
    /// Constant schedule value.
    pub beta: f64,
    pub sigmoid_start: f64,
    pub sigmoid_scale: f64,
    pub steps: usize,
    pub mode: ModeName,
    pub hidden: usize,
    /// Use `beta_t` as the reverse-step variance.
    pub beta_variance: bool,
}

impl Default for DiffusionSpec {
    fn default() -> Self {
        Self {
            schedule: ScheduleName::Cosine,
            beta: 0.05,
            sigmoid_start: 0.001,
            sigmoid_scale: 0.05,
            steps: 100,
            mode: ModeName::V,
            hidden: 110,
            beta_variance: false,
        }
    }
}

impl DiffusionSpec {
    pub fn schedule_kind(&self) -> ScheduleKind {
        match self.schedule {
            ScheduleName::Constant => ScheduleKind::Constant { beta: self.beta },
            ScheduleName::Sigmoid => ScheduleKind::Sigmoid { start: self.sigmoid_start, scale: self.sigmoid_scale },
            ScheduleName::Cosine => ScheduleKind::Cosine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerName {
    Ddpm,
    Ddim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSpec {
    pub kind: SamplerName,
    /// Trajectory length `S` for DDIM.
    pub trajectory_len: Option<usize>,
    /// `S` values swept by `eval-swd` and `bench-sampling`.
    pub sweep: Vec<usize>,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self { kind: SamplerName::Ddpm, trajectory_len: None, sweep: vec![100, 50, 20, 10, 5, 2] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerName {
    Adam,
    Nadam,
    Rmsprop,
}

impl From<OptimizerName> for OptimizerKind {
    fn from(o: OptimizerName) -> Self {
        match o {
            OptimizerName::Adam => OptimizerKind::Adam,
            OptimizerName::Nadam => OptimizerKind::NAdam,
            OptimizerName::Rmsprop => OptimizerKind::RmsProp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrStageSpec {
    pub from_epoch: usize,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmTrainingSpec {
    pub dataset_size: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerName,
    pub lr: Vec<LrStageSpec>,
}

impl Default for DmTrainingSpec {
    fn default() -> Self {
        Self {
            dataset_size: 1_000_000,
            batch_size: 100,
            epochs: 5,
            optimizer: OptimizerName::Adam,
            lr: vec![LrStageSpec { from_epoch: 0, lr: 1e-3 }],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Pretrain,
    Iterative,
    ModelAware,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdatesName {
    Joint,
    Successive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeTrainingSpec {
    pub algorithm: Algorithm,
    /// Messages per epoch.
    pub dataset_size: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerName,
    pub lr: Vec<LrStageSpec>,
    pub updates: UpdatesName,
    /// Iterative algorithm: generator fine-tuning rounds.
    pub alternations: usize,
    /// Iterative algorithm: codeword/output pairs per fine-tuning round.
    pub finetune_dataset_size: usize,
    pub finetune_epochs: usize,
}

impl Default for AeTrainingSpec {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Pretrain,
            dataset_size: 1_000_000,
            batch_size: 100,
            epochs: 50,
            optimizer: OptimizerName::Nadam,
            lr: vec![LrStageSpec { from_epoch: 0, lr: 1e-3 }],
            updates: UpdatesName::Joint,
            alternations: 1,
            finetune_dataset_size: 100_000,
            finetune_epochs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    pub ebn0_db: Vec<f64>,
    pub trials: u64,
    pub swd_samples: usize,
    pub swd_projections: usize,
    pub cov_samples: usize,
    pub bench_samples: usize,
    pub bench_repeats: usize,
    /// Rows emitted by `sample` when no condition file is given.
    pub sample_count: usize,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self {
            ebn0_db: (2..=8).map(f64::from).collect(),
            trials: 1_000_000,
            swd_samples: 100_000,
            swd_projections: 128,
            cov_samples: 100_000,
            bench_samples: 10_000,
            bench_repeats: 3,
            sample_count: 10_000,
        }
    }
}

fn one() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks ranges and cross-references; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let ae = &self.autoencoder;
        if ae.m < 2 {
            return Err(CliError::config("autoencoder.m", "must be >= 2"));
        }
        if ae.n == 0 {
            return Err(CliError::config("autoencoder.n", "must be >= 1"));
        }
        match self.channel {
            ChannelSpec::Awgn => {}
            ChannelSpec::Rayleigh { sigma_r } => {
                if !(sigma_r > 0.0 && sigma_r.is_finite()) {
                    return Err(CliError::config("channel.sigma_r", "must be positive"));
                }
            }
            ChannelSpec::Sspa { p, a0, v0, n_c } => {
                if !(p > 0.0 && p.is_finite()) {
                    return Err(CliError::config("channel.p", "must be positive"));
                }
                if !(a0 >= 0.0 && a0.is_finite()) {
                    return Err(CliError::config("channel.a0", "must be >= 0"));
                }
                if !(v0 >= 0.0 && v0.is_finite()) {
                    return Err(CliError::config("channel.v0", "must be >= 0"));
                }
                check_complex_width(n_c, ae.n)?;
            }
            ChannelSpec::Clarke { n_c, fd_ts } => {
                if !(fd_ts >= 0.0 && fd_ts.is_finite()) {
                    return Err(CliError::config("channel.fd_ts", "must be >= 0"));
                }
                check_complex_width(n_c, ae.n)?;
            }
        }
        match (self.noise.sigma, self.noise.ebn0_db) {
            (Some(s), None) if s >= 0.0 && s.is_finite() => {}
            (Some(_), None) => return Err(CliError::config("noise.sigma", "must be finite and >= 0")),
            (None, Some(db)) if !db.is_nan() => {}
            (None, Some(_)) => return Err(CliError::config("noise.ebn0_db", "must not be NaN")),
            _ => return Err(CliError::config("noise", "set exactly one of `sigma` and `ebn0_db`")),
        }

        let d = &self.diffusion;
        if d.steps == 0 {
            return Err(CliError::config("diffusion.steps", "must be >= 1"));
        }
        if d.hidden == 0 {
            return Err(CliError::config("diffusion.hidden", "must be >= 1"));
        }
        if d.schedule == ScheduleName::Constant && !(d.beta > 0.0 && d.beta <= 1.0) {
            return Err(CliError::config("diffusion.beta", "must lie in (0, 1]"));
        }
        let sched = self.schedule().map_err(|e| CliError::config("diffusion.schedule", e.to_string()))?;
        PredictionMode::from(d.mode)
            .check_schedule(&sched)
            .map_err(|e| CliError::config("diffusion.mode", e.to_string()))?;

        let s = &self.sampler;
        let in_range = |v: usize| (1..=d.steps).contains(&v);
        match (s.kind, s.trajectory_len) {
            (SamplerName::Ddim, None) => {
                return Err(CliError::config("sampler.trajectory_len", "required for the ddim sampler"));
            }
            (_, Some(len)) if !in_range(len) => {
                return Err(CliError::config("sampler.trajectory_len", format!("must lie in 1..={}", d.steps)));
            }
            _ => {}
        }
        if let Some(bad) = s.sweep.iter().find(|&&v| !in_range(v)) {
            return Err(CliError::config("sampler.sweep", format!("{bad} outside 1..={}", d.steps)));
        }

        let t = &self.dm_training;
        check_counts("dm_training", &[("dataset_size", t.dataset_size), ("batch_size", t.batch_size), ("epochs", t.epochs)])?;
        check_lr("dm_training.lr", &t.lr)?;
        let a = &self.ae_training;
        check_counts(
            "ae_training",
            &[("dataset_size", a.dataset_size), ("batch_size", a.batch_size), ("epochs", a.epochs)],
        )?;
        check_lr("ae_training.lr", &a.lr)?;
        if a.algorithm == Algorithm::Iterative {
            check_counts(
                "ae_training",
                &[("finetune_dataset_size", a.finetune_dataset_size), ("finetune_epochs", a.finetune_epochs)],
            )?;
        }

        let e = &self.eval;
        if e.ebn0_db.is_empty() || e.ebn0_db.iter().any(|v| v.is_nan()) {
            return Err(CliError::config("eval.ebn0_db", "needs at least one value and no NaN"));
        }
        if e.trials == 0 {
            return Err(CliError::config("eval.trials", "must be >= 1"));
        }
        for (name, v) in [("swd_samples", e.swd_samples), ("cov_samples", e.cov_samples), ("bench_samples", e.bench_samples)] {
            if v < 2 {
                return Err(CliError::config(format!("eval.{name}"), "must be >= 2"));
            }
        }
        check_counts(
            "eval",
            &[("swd_projections", e.swd_projections), ("bench_repeats", e.bench_repeats), ("sample_count", e.sample_count)],
        )?;
        Ok(())
    }

    /// Divides every sample count by `divisor`, keeping each usable.
    pub fn scaled(&self, divisor: u64) -> Self {
        let mut c = self.clone();
        if divisor <= 1 {
            return c;
        }
        let div = |v: usize, floor: usize| (v as u64).div_ceil(divisor).max(floor as u64) as usize;
        c.dm_training.dataset_size = div(c.dm_training.dataset_size, c.dm_training.batch_size);
        c.ae_training.dataset_size = div(c.ae_training.dataset_size, c.ae_training.batch_size);
        c.ae_training.finetune_dataset_size = div(c.ae_training.finetune_dataset_size, 1);
        c.eval.trials = c.eval.trials.div_ceil(divisor).max(1);
        c.eval.swd_samples = div(c.eval.swd_samples, 2);
        c.eval.cov_samples = div(c.eval.cov_samples, 2);
        c.eval.bench_samples = div(c.eval.bench_samples, 2);
        c.eval.sample_count = div(c.eval.sample_count, 1);
        c
    }

    /// Channel dimension in real values.
    pub fn dim(&self) -> usize {
        self.autoencoder.n
    }

    /// The channel with its noise level resolved.
    pub fn channel_model(&self) -> Result<ChannelModel> {
        let base = self.noiseless_channel();
        match (self.noise.sigma, self.noise.ebn0_db) {
            (Some(s), _) => Ok(base.with_sigma(s)),
            (None, Some(db)) => Ok(base.with_ebn0(db, self.autoencoder.m, self.autoencoder.n)?),
            (None, None) => Err(CliError::config("noise", "set exactly one of `sigma` and `ebn0_db`")),
        }
    }

    pub fn noiseless_channel(&self) -> ChannelModel {
        match self.channel {
            ChannelSpec::Awgn => ChannelModel::Awgn { sigma: 0.0 },
            ChannelSpec::Rayleigh { sigma_r } => ChannelModel::Rayleigh { sigma_r, sigma: 0.0 },
            ChannelSpec::Sspa { p, a0, v0, n_c } => ChannelModel::Sspa { p, a0, v0, sigma: 0.0, n_c },
            ChannelSpec::Clarke { n_c, fd_ts } => ChannelModel::Clarke { n_c, fd_ts, sigma: 0.0 },
        }
    }

    pub fn channel_name(&self) -> &'static str {
        match self.channel {
            ChannelSpec::Awgn => "awgn",
            ChannelSpec::Rayleigh { .. } => "rayleigh",
            ChannelSpec::Sspa { .. } => "sspa",
            ChannelSpec::Clarke { .. } => "clarke",
        }
    }

    pub fn schedule(&self) -> diffchan_core::Result<NoiseSchedule> {
        let d = &self.diffusion;
        NoiseSchedule::with_variance(d.schedule_kind(), d.steps, d.beta_variance)
    }

    pub fn mode(&self) -> PredictionMode {
        self.diffusion.mode.into()
    }

    /// The sampler used for generation and for training through a generator.
    pub fn sampler(&self) -> Result<Sampler> {
        match self.sampler.kind {
            SamplerName::Ddpm => Ok(Sampler::ddpm()),
            SamplerName::Ddim => {
                let len = self
                    .sampler
                    .trajectory_len
                    .ok_or_else(|| CliError::config("sampler.trajectory_len", "required for the ddim sampler"))?;
                Ok(Sampler::ddim(self.diffusion.steps, len)?)
            }
        }
    }

    pub fn dm_train_config(&self) -> TrainConfig {
        let t = &self.dm_training;
        TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            optimizer: t.optimizer.into(),
            lr_stages: stages(&t.lr),
        }
    }

    /// Autoencoder recipe; training requires the noise as Eb/N0.
    pub fn ae_train_config(&self) -> Result<AeTrainConfig> {
        let a = &self.ae_training;
        let ebn0_db = self
            .noise
            .ebn0_db
            .ok_or_else(|| CliError::config("noise.ebn0_db", "autoencoder training needs the noise as Eb/N0"))?;
        Ok(AeTrainConfig {
            epochs: a.epochs,
            batches_per_epoch: (a.dataset_size / a.batch_size).max(1),
            batch_size: a.batch_size,
            optimizer: a.optimizer.into(),
            lr_stages: stages(&a.lr),
            ebn0_db,
            updates: match a.updates {
                UpdatesName::Joint => UpdateSchedule::Joint,
                UpdatesName::Successive => UpdateSchedule::Successive,
            },
        })
    }

    pub fn iterative_config(&self) -> IterativeConfig {
        let a = &self.ae_training;
        let mut dm = self.dm_train_config();
        dm.epochs = a.finetune_epochs;
        IterativeConfig { alternations: a.alternations, dataset_size: a.finetune_dataset_size, dm }
    }
}

fn stages(lr: &[LrStageSpec]) -> Vec<LrStage> {
    lr.iter().map(|s| LrStage { from_epoch: s.from_epoch, lr: s.lr }).collect()
}

fn check_complex_width(n_c: usize, n: usize) -> Result<()> {
    if n_c == 0 {
        return Err(CliError::config("channel.n_c", "must be >= 1"));
    }
    if n != 2 * n_c {
        return Err(CliError::config(
            "autoencoder.n",
            format!("a complex channel with n_c = {n_c} needs n = {}, got {n}", 2 * n_c),
        ));
    }
    Ok(())
}

fn check_counts(section: &str, fields: &[(&str, usize)]) -> Result<()> {
    for (name, v) in fields {
        if *v == 0 {
            return Err(CliError::config(format!("{section}.{name}"), "must be >= 1"));
        }
    }
    Ok(())
}

fn check_lr(field: &str, lr: &[LrStageSpec]) -> Result<()> {
    if lr.is_empty() {
        return Err(CliError::config(field, "needs at least one stage"));
    }
    if let Some(s) = lr.iter().find(|s| !(s.lr > 0.0 && s.lr.is_finite())) {
        return Err(CliError::config(field, format!("learning rate {} must be positive", s.lr)));
    }
    Ok(())
}
