//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use diffchan_core::channels::{clarke_covariance, j0, ChannelModel};
use diffchan_core::diffusion::{train_dm, ChannelDataset, DenoiserNet, DiffusionChannel, Sampler};
use diffchan_core::e2e::{
    evaluate_ser_point, train_iterative, train_model_aware, train_pretrained, Autoencoder, SerPoint,
};
use diffchan_core::metrics::{all_ones_input, extract_fading_covariance, swd_with, ProjectionSet, Provenance, SampleSet};
use diffchan_core::nn::Tensor;
use diffchan_core::rng::{Rng, Stream};
use rayon::prelude::*;
use serde_json::json;

use crate::checkpoint::{Checkpoint, CreationMeta, ModelInfo};
use crate::config::{Algorithm, ChannelSpec, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::output::{columns, git_describe, CsvOut, Manifest, OutputFile, EBN0_CONVENTION};
use crate::sampling::generate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    GenData,
    TrainDm,
    TrainAe,
    EvalSwd,
    EvalSer,
    EvalCov,
    Sample,
    BenchSampling,
}

impl CommandKind {
    pub const ALL: [CommandKind; 8] = [
        CommandKind::GenData,
        CommandKind::TrainDm,
        CommandKind::TrainAe,
        CommandKind::EvalSwd,
        CommandKind::EvalSer,
        CommandKind::EvalCov,
        CommandKind::Sample,
        CommandKind::BenchSampling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CommandKind::GenData => "gen-data",
            CommandKind::TrainDm => "train-dm",
            CommandKind::TrainAe => "train-ae",
            CommandKind::EvalSwd => "eval-swd",
            CommandKind::EvalSer => "eval-ser",
            CommandKind::EvalCov => "eval-cov",
            CommandKind::Sample => "sample",
            CommandKind::BenchSampling => "bench-sampling",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

/// One command with its resolved inputs.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: CommandKind,
    /// The config as given; `scale` is applied when running.
    pub config: ExperimentConfig,
    pub seed: u64,
    pub scale: u64,
    pub out: PathBuf,
    pub checkpoints: Vec<PathBuf>,
    pub conditions: Option<PathBuf>,
}

impl Invocation {
    /// Rebuilds the invocation recorded in `manifest`, writing to `out`.
    pub fn from_manifest(manifest: &Manifest, out: PathBuf) -> Result<Self> {
        let command = CommandKind::parse(&manifest.command)
            .ok_or_else(|| CliError::Usage(format!("unknown command `{}` in manifest", manifest.command)))?;
        Ok(Self {
            command,
            config: ExperimentConfig::from_toml(&manifest.config)?,
            seed: manifest.seed,
            scale: manifest.scale,
            out,
            checkpoints: manifest.checkpoints.clone(),
            conditions: manifest.conditions.clone(),
        })
    }
}

/// What a command wrote.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

struct Outputs {
    files: Vec<(PathBuf, bool)>,
    summary: serde_json::Value,
}

impl Outputs {
    fn new() -> Self {
        Self { files: Vec::new(), summary: json!({}) }
    }

    fn add(&mut self, path: PathBuf) {
        self.files.push((path, true));
    }

    fn add_timing(&mut self, path: PathBuf) {
        self.files.push((path, false));
    }
}

/// Runs `inv` and writes its manifest next to its outputs.
pub fn run(inv: &Invocation) -> Result<RunReport> {
    inv.config.validate()?;
    if inv.scale == 0 {
        return Err(CliError::Usage("--scale must be >= 1".into()));
    }
    std::fs::create_dir_all(&inv.out).map_err(|e| CliError::io(&inv.out, e))?;
    if !inv.config.autoencoder.m.is_power_of_two() {
        log::warn!("M = {} is not a power of two; rates use log2(M) = {:.3}", inv.config.autoencoder.m, (inv.config.autoencoder.m as f64).log2());
    }
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let mut cfg = inv.config.scaled(inv.scale);
    cfg.seed = inv.seed;
    log::info!("{} (seed {}, scale 1/{})", inv.command.name(), inv.seed, inv.scale);

    let outputs = match inv.command {
        CommandKind::GenData => gen_data(&cfg, inv)?,
        CommandKind::TrainDm => train_dm_cmd(&cfg, inv)?,
        CommandKind::TrainAe => train_ae_cmd(&cfg, inv)?,
        CommandKind::EvalSwd => eval_swd(&cfg, inv)?,
        CommandKind::EvalSer => eval_ser(&cfg, inv)?,
        CommandKind::EvalCov => eval_cov(&cfg, inv)?,
        CommandKind::Sample => sample_cmd(&cfg, inv)?,
        CommandKind::BenchSampling => bench_sampling(&cfg, inv)?,
    };

    let files = outputs
        .files
        .iter()
        .map(|(p, det)| OutputFile::record(p, *det))
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: inv.command.name().into(),
        seed: inv.seed,
        scale: inv.scale,
        config: inv.config.to_toml(),
        checkpoints: inv.checkpoints.clone(),
        conditions: inv.conditions.clone(),
        git_describe: git_describe(),
        started_unix_s: started,
        elapsed_s: clock.elapsed().as_secs_f64(),
        outputs: files,
        summary: outputs.summary,
        ebn0_convention: EBN0_CONVENTION.into(),
    };
    let manifest_path = Manifest::path_for(&inv.out, inv.command.name());
    manifest.save(&manifest_path)?;
    Ok(RunReport { manifest_path, manifest })
}

/// Reruns the command recorded in a manifest into `out` and lists files whose
/// bytes differ from the recorded run. Timing files are skipped.
pub fn replay(manifest_path: &Path, out: PathBuf) -> Result<Vec<String>> {
    let recorded = Manifest::load(manifest_path)?;
    let inv = Invocation::from_manifest(&recorded, out)?;
    let report = run(&inv)?;
    let mut mismatched = Vec::new();
    for old in recorded.outputs.iter().filter(|o| o.deterministic) {
        let new = report.manifest.outputs.iter().find(|n| n.file == old.file);
        if new.map(|n| n.crc32) != Some(old.crc32) {
            mismatched.push(old.file.clone());
        }
    }
    Ok(mismatched)
}

fn rng(cfg: &ExperimentConfig, stream: Stream) -> Rng {
    Rng::new(cfg.seed, stream)
}

fn input_checkpoint<'a>(inv: &'a Invocation, what: &str) -> Result<&'a Path> {
    inv.checkpoints
        .first()
        .map(PathBuf::as_path)
        .ok_or_else(|| CliError::Usage(format!("{} needs --checkpoint <{what} checkpoint>", inv.command.name())))
}

fn load_dm(path: &Path, cfg: &ExperimentConfig) -> Result<DiffusionChannel<f32>> {
    let ckpt = Checkpoint::load(path)?;
    ckpt.check_against(cfg)?;
    ckpt.to_dm(cfg.sampler()?)
}

fn load_ae(path: &Path, cfg: &ExperimentConfig) -> Result<Autoencoder<f32>> {
    let ckpt = Checkpoint::load(path)?;
    ckpt.check_against(cfg)?;
    ckpt.to_ae()
}

fn gaussian(rows: usize, n: usize, rng: &mut Rng) -> Tensor<f32> {
    Tensor::from_fn(vec![rows, n], |_| rng.normal())
}

/// The pre-training dataset: Gaussian inputs through the configured channel.
pub fn pretraining_data(cfg: &ExperimentConfig) -> Result<ChannelDataset<f32>> {
    let ch = cfg.channel_model()?;
    Ok(ChannelDataset::gaussian_inputs(&ch, cfg.dm_training.dataset_size, cfg.dim(), &mut rng(cfg, Stream::Data))?)
}

fn write_pairs(path: &Path, x: &Tensor<f32>, y: &Tensor<f32>, xname: &str, yname: &str, comment: Option<&str>) -> Result<PathBuf> {
    let n = x.cols();
    let header: Vec<String> = columns(xname, n).into_iter().chain(columns(yname, y.cols())).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = CsvOut::create(path, &header, comment)?;
    for r in 0..x.rows() {
        csv.row(x.row(r).iter().chain(y.row(r)).map(|v| v.to_string()))?;
    }
    csv.finish()
}

fn noise_comment(cfg: &ExperimentConfig) -> Result<String> {
    let ch = cfg.channel_model()?;
    Ok(format!("channel {} sigma {}; {EBN0_CONVENTION}", cfg.channel_name(), ch.sigma()))
}

fn gen_data(cfg: &ExperimentConfig, inv: &Invocation) -> Result<Outputs> {
    let data = pretraining_data(cfg)?;
    let mut out = Outputs::new();
    let comment = noise_comment(cfg)?;
    out.add(write_pairs(&inv.out.join("data.csv"), &data.inputs, &data.outputs, "x", "y", Some(&comment))?);
    out.summary = json!({ "rows": data.len(), "sigma": cfg.channel_model()?.sigma() });
    Ok(out)
}

/// Trains a generator on the pre-training dataset.
pub fn train_generator(cfg: &ExperimentConfig) -> Result<(DiffusionChannel<f32>, Vec<f64>)> {
    let data = pretraining_data(cfg)?;
    let sched = cfg.schedule()?;
    let d = &cfg.diffusion;
    let mut net = DenoiserNet::new(cfg.dim(), d.hidden, d.steps, &mut rng(cfg, Stream::Init));
    let history = train_dm(&mut net, &sched, cfg.mode(), &data, &cfg.dm_train_config(), &mut rng(cfg, Stream::Noise))?;
    Ok((DiffusionChannel::new(net, sched, cfg.mode(), cfg.sampler()?)?, history.epoch_losses))
}

fn loss_csv(path: &Path, rows: impl IntoIterator<Item = (String, usize, usize, f64)>) -> Result<PathBuf> {
    let mut csv = CsvOut::create(path, &["phase", "round", "epoch", "loss"], None)?;
    for (phase, round, epoch, loss) in rows {
        csv.row([phase, round.to_string(), epoch.to_string(), loss.to_string()])?;
    }
    csv.finish()
}

fn train_dm_cmd(cfg: &ExperimentConfig, inv: &Invocation) -> Result<Outputs> {
    let (dm, losses) = train_generator(cfg)?;
    let mut out = Outputs::new();
    out.add(loss_csv(
        &inv.out.join("dm_loss.csv"),
        losses.iter().enumerate().map(|(e, &l)| ("dm".to_string(), 0, e, l)),
    )?);
    let path = inv.checkpoints.first().cloned().unwrap_or_else(|| inv.out.join("dm.ckpt"));
    let meta = CreationMeta { seed: cfg.seed, epoch: losses.len(), loss: losses.last().copied() };
    Checkpoint::from_dm(&dm, &inv.config, meta)?.save(&path)?;
    out.add(path);
    out.summary = json!({ "final_loss": losses.last() });
    Ok(out)
}

fn train_ae_cmd(cfg: &ExperimentConfig, inv: &Invocation) -> Result<Outputs> {
    let ae_cfg = cfg.ae_train_config()?;
    let mut ae = Autoencoder::<f32>::new(cfg.autoencoder.m, cfg.autoencoder.n, &mut rng(cfg, Stream::Init))?;
    let mut train_rng = rng(cfg, Stream::Noise);
    let mut out = Outputs::new();
    let mut rows: Vec<(String, usize, usize, f64)> = Vec::new();
    let push = |rows: &mut Vec<_>, phase: &str, round: usize, losses: &[f64]| {
        rows.extend(losses.iter().enumerate().map(|(e, &l)| (phase.to_string(), round, e, l)));
    };
    match cfg.ae_training.algorithm {
        Algorithm::ModelAware => {
            let h = train_model_aware(&mut ae, &cfg.noiseless_channel(), &ae_cfg, &mut train_rng)?;
            push(&mut rows, "ae", 0, &h.epoch_losses);
        }
        Algorithm::Pretrain => {
            let dm = load_dm(input_checkpoint(inv, "dm")?, cfg)?;
            let h = train_pretrained(&mut ae, &dm, &ae_cfg, &mut train_rng)?;
            push(&mut rows, "ae", 0, &h.epoch_losses);
        }
        Algorithm::Iterative => {
            let mut dm = load_dm(input_checkpoint(inv, "dm")?, cfg)?;
            let h = train_iterative(&mut ae, &mut dm, &cfg.noiseless_channel(), &ae_cfg, &cfg.iterative_config(), &mut train_rng)?;
            for (round, l) in h.dm.iter().enumerate() {
                push(&mut rows, "dm", round, &l.epoch_losses);
            }
            for (round, l) in h.ae.iter().enumerate() {
                push(&mut rows, "ae", round, &l.epoch_losses);
            }
            let path = inv.out.join("dm_finetuned.ckpt");
            let last = h.dm.last().and_then(|l| l.epoch_losses.last().copied());
            Checkpoint::from_dm(&dm, &inv.config, CreationMeta { seed: cfg.seed, epoch: h.dm.len(), loss: last })?
                .save(&path)?;
            out.add(path);
        }
    }
    out.add(loss_csv(&inv.out.join("ae_loss.csv"), rows.iter().cloned())?);
    let path = inv.out.join("ae.ckpt");
    let last = rows.iter().rev().find(|r| r.0 == "ae").map(|r| r.3);
    Checkpoint::from_ae(&ae, &inv.config, CreationMeta { seed: cfg.seed, epoch: ae_cfg.epochs, loss: last }).save(&path)?;
    out.add(path);
    out.summary = json!({ "final_loss": last });
    Ok(out)
}

/// Generated-versus-true samples under shared Gaussian conditions.
pub struct SwdSetup {
    pub conditions: Tensor<f32>,
    pub truth: SampleSet<f32>,
    pub theta: ProjectionSet,
    /// SWD between two independent true draws.
    pub noise_floor: f64,
}

impl SwdSetup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let ch = cfg.channel_model()?;
        let base = rng(cfg, Stream::Data);
        let c = gaussian(cfg.eval.swd_samples, cfg.dim(), &mut base.fork(0));
        let truth = SampleSet::new(ch.apply(&c, &mut base.fork(1))?, Provenance::Truth)?;
        let again = SampleSet::new(ch.apply(&c, &mut base.fork(2))?, Provenance::Truth)?;
        let theta = ProjectionSet::random(cfg.eval.swd_projections, cfg.dim(), &mut rng(cfg, Stream::Custom(1)))?;
        let noise_floor = swd_with(&truth, &again, &theta, &mut base.fork(3))?;
        Ok(Self { conditions: c, truth, theta, noise_floor })
    }

    /// SWD of `dm` under `sampler`; generation draws from `rng`.
    pub fn score(&self, dm: &DiffusionChannel<f32>, sampler: Sampler, rng: &Rng) -> Result<f64> {
        let mut dm = dm.clone();
        dm.sampler = sampler;
        let generated = SampleSet::new(generate(&dm, &self.conditions, rng)?, Provenance::Generated)?;
        Ok(swd_with(&generated, &self.truth, &self.theta, &mut rng.fork(u64::MAX))?)
    }
}

/// DDPM followed by DDIM-S for every `S` in the sweep that fits `T`.
pub fn sweep_samplers(cfg: &ExperimentConfig, steps: usize) -> Result<Vec<Sampler>> {
    let mut samplers = vec![Sampler::ddpm()];
    for &s in &cfg.sampler.sweep {
        if s > steps {
            log::warn!("skipping DDIM-{s}: the model has T = {steps}");
            continue;
        }
        samplers.push(Sampler::ddim(steps, s)?);
    }
    Ok(samplers)
}

fn trajectory_len(s: &Sampler, steps: usize) -> usize {
    match s {
        Sampler::Ddpm { .. } => steps,
        Sampler::Ddim(tr) => tr.len(),
    }
}

fn eval_swd(cfg: &ExperimentConfig, inv: &Invocation) -> Result<Outputs> {
    if inv.checkpoints.is_empty() {
        return Err(CliError::Usage("eval-swd needs at least one --checkpoint <dm checkpoint>".into()));
    }
    let setup = SwdSetup::new(cfg)?;
    let header = ["checkpoint", "schedule", "mode", "sampler", "trajectory_len", "samples", "projections", "swd"];
    let mut csv = CsvOut::create(&inv.out.join("swd.csv"), &header, None)?;
    let samples = cfg.eval.swd_samples.to_string();
    let projections = cfg.eval.swd_projections.to_string();
    csv.row(["", "", "", "truth", "0", &samples, &projections, &setup.noise_floor.to_string()])?;
    let mut summary = Vec::new();
    for (i, path) in inv.checkpoints.iter().enumerate() {
        let ckpt = Checkpoint::load(path)?;
        let ModelInfo::Dm { dim, steps, schedule, mode, .. } = &ckpt.model else {
            return Err(CliError::Usage(format!("{} is not a dm checkpoint", path.display())));
        };
        if *dim != cfg.dim() {
            return Err(CliError::Mismatch { field: "autoencoder.n".into(), found: dim.to_string(), expected: cfg.dim().to_string() });
        }
        let dm = ckpt.to_dm(Sampler::ddpm())?;
        let gen_rng = rng(cfg, Stream::Eval).fork(i as u64);
        for (k, sampler) in sweep_samplers(cfg, *steps)?.into_iter().enumerate() {
            let label = sampler.label();
            let len = trajectory_len(&sampler, *steps);
            let d = setup.score(&dm, sampler, &gen_rng.fork(k as u64))?;
            log::info!("{} {label}: SWD {d:.5}", path.display());
            csv.row([
                path.display().to_string(),
                format!("{schedule:?}").to_lowercase(),
                format!("{mode:?}").to_lowercase(),
                label.clone(),
                len.to_string(),
                samples.clone(),
                projections.clone(),
                d.to_string(),
            ])?;
            summary.push(json!({ "checkpoint": path, "sampler": label, "swd": d }));
        }
    }
    let mut out = Outputs::new();
    out.add(csv.finish()?);
    out.summary = json!({ "noise_floor": setup.noise_floor, "results": summary });
    Ok(out)
}

/// SER sweep with one independent stream per point, evaluated in parallel.
pub fn ser_sweep(ae: &Autoencoder<f32>, channel: &ChannelModel, ebn0_db: &[f64], trials: u64, rng: &Rng) -> Result<Vec<SerPoint>> {
    ebn0_db
        .par_iter()
        .enumerate()
        .map(|(i, &db)| evaluate_ser_point(ae, channel, db, trials, &mut rng.fork(i as u64)).map_err(CliError::from))
        .collect()
}

fn eval_ser(cfg: &ExperimentConfig, inv: &Invocation) -> Result<Outputs> {
    let ae = load_ae(input_checkpoint(inv, "ae")?, cfg)?;
    let points = ser_sweep(&ae, &cfg.noiseless_channel(), &cfg.eval.ebn0_db, cfg.eval.trials, &rng(cfg, Stream::Eval))?;
    let header = ["ebn0_db", "errors", "trials", "ser", "ci_low", "ci_high"];
    let comment = format!("channel {}; {EBN0_CONVENTION}", cfg.channel_name());
    let mut csv = CsvOut::create(&inv.out.join("ser.csv"), &header, Some(&comment))?;
    for p in &points {
        csv.row([
            p.ebn0_db.to_string(),
            p.errors.to_string(),
            p.trials.to_string(),
            p.ser.to_string(),
            p.ci_low.to_string(),
            p.ci_high.to_string(),
        ])?;
    }
    let mut out = Outputs::new();
    out.add(csv.finish()?);
    out.summary = json!({ "ser": points.iter().map(|p| p.ser).collect::<Vec<_>>() });
    Ok(out)
}

fn eval_cov(cfg: &ExperimentConfig, inv: &Invocation) -> Result<Outputs> {
    let ChannelSpec::Clarke { n_c, fd_ts } = cfg.channel else {
        return Err(CliError::config("channel.model", "eval-cov needs the clarke channel"));
    };
    let ch = cfg.channel_model()?;
    let x = all_ones_input::<f32>(cfg.eval.cov_samples, n_c);
    let (source, y) = match inv.checkpoints.first() {
        Some(path) => {
            let dm = load_dm(path, cfg)?;
            ("generated", generate(&dm, &x, &rng(cfg, Stream::Eval))?)
        }
        None => ("channel", ch.apply(&x, &mut rng(cfg, Stream::Eval))?),
    };
    let cov = extract_fading_covariance(&y, ch.sigma())?;
    let truth = clarke_covariance(n_c, fd_ts);
    let mad = cov.mean_abs_deviation(&truth)?;

    let mut csv = CsvOut::create(&inv.out.join("cov.csv"), &["i", "j", "truth", "empirical_re", "empirical_im"], None)?;
    for i in 0..n_c {
        for j in 0..n_c {
            let (re, im) = cov.get(i, j);
            csv.row([i.to_string(), j.to_string(), truth.get(i, j).to_string(), re.to_string(), im.to_string()])?;
        }
    }
    let mut out = Outputs::new();
    out.add(csv.finish()?);
    let mut lags = CsvOut::create(&inv.out.join("cov_lags.csv"), &["lag", "j0", "empirical"], None)?;
    for (lag, r) in cov.lag_profile().iter().enumerate() {
        let expected = j0(2.0 * std::f64::consts::PI * fd_ts * lag as f64);
        lags.row([lag.to_string(), expected.to_string(), r.to_string()])?;
    }
    out.add(lags.finish()?);
    out.summary = json!({ "source": source, "mean_abs_deviation": mad });
    Ok(out)
}

fn read_conditions(path: &Path, n: usize) -> Result<Tensor<f32>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        if record.len() != n {
            return Err(CliError::Usage(format!("{}: row {} has {} values, expected {n}", path.display(), rows + 1, record.len())));
        }
        for field in record.iter() {
            let v: f32 = field
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{}: `{field}` is not a number", path.display())))?;
            data.push(v);
        }
        rows += 1;
    }
    Ok(Tensor::new(vec![rows, n], data)?)
}

fn sample_cmd(cfg: &ExperimentConfig, inv: &Invocation) -> Result<Outputs> {
    let dm = load_dm(input_checkpoint(inv, "dm")?, cfg)?;
    let c = match &inv.conditions {
        Some(path) => read_conditions(path, cfg.dim())?,
        None => gaussian(cfg.eval.sample_count, cfg.dim(), &mut rng(cfg, Stream::Data)),
    };
    let y = generate(&dm, &c, &rng(cfg, Stream::Eval))?;
    let mut out = Outputs::new();
    out.add(write_pairs(&inv.out.join("samples.csv"), &c, &y, "c", "y", None)?);
    out.summary = json!({ "rows": c.rows(), "sampler": dm.sampler.label() });
    Ok(out)
}

/// Least-squares line through `(x, y)`: `(slope, intercept, r_squared)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// Wall-clock sampling times.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub label: String,
    pub trajectory_len: usize,
    /// Seconds per repeat.
    pub seconds: Vec<f64>,
}

impl BenchResult {
    pub fn median(&self) -> f64 {
        let mut s = self.seconds.clone();
        s.sort_by(f64::total_cmp);
        let k = s.len();
        if k % 2 == 1 {
            s[k / 2]
        } else {
            0.5 * (s[k / 2 - 1] + s[k / 2])
        }
    }
}

/// Times every sampler on the same conditions, single-threaded, cycling
/// through the samplers once per repeat.
pub fn bench(dm: &DiffusionChannel<f32>, samplers: &[Sampler], c: &Tensor<f32>, repeats: usize, rng: &Rng) -> Result<Vec<BenchResult>> {
    let steps = dm.schedule.steps();
    let mut results: Vec<BenchResult> = samplers
        .iter()
        .map(|s| BenchResult { label: s.label(), trajectory_len: trajectory_len(s, steps), seconds: Vec::new() })
        .collect();
    let mut dm = dm.clone();
    for r in 0..repeats {
        for (k, s) in samplers.iter().enumerate() {
            dm.sampler = s.clone();
            let mut g = rng.fork((r * samplers.len() + k) as u64);
            let clock = Instant::now();
            let y = dm.generate(c, &mut g)?;
            results[k].seconds.push(clock.elapsed().as_secs_f64());
            std::hint::black_box(y);
        }
    }
    Ok(results)
}

/// Linear fit of DDIM time against `S`, and full-length DDIM over DDPM.
pub fn bench_summary(results: &[BenchResult], steps: usize) -> serde_json::Value {
    let ddim: Vec<&BenchResult> = results.iter().filter(|r| r.label.starts_with("DDIM")).collect();
    let x: Vec<f64> = ddim.iter().map(|r| r.trajectory_len as f64).collect();
    let y: Vec<f64> = ddim.iter().map(|r| r.median()).collect();
    let fit = (x.len() >= 2).then(|| linear_fit(&x, &y));
    let ddpm = results.iter().find(|r| r.label == "DDPM").map(BenchResult::median);
    let full = ddim.iter().find(|r| r.trajectory_len == steps).map(|r| r.median());
    json!({
        "ddim_slope_s_per_step": fit.map(|f| f.0),
        "ddim_intercept_s": fit.map(|f| f.1),
        "ddim_r_squared": fit.map(|f| f.2),
        "ddim_full_over_ddpm": full.zip(ddpm).map(|(a, b)| a / b),
    })
}

fn bench_sampling(cfg: &ExperimentConfig, inv: &Invocation) -> Result<Outputs> {
    let dm = load_dm(input_checkpoint(inv, "dm")?, cfg)?;
    let steps = dm.schedule.steps();
    let samplers = sweep_samplers(cfg, steps)?;
    let c = gaussian(cfg.eval.bench_samples, cfg.dim(), &mut rng(cfg, Stream::Data));
    let results = bench(&dm, &samplers, &c, cfg.eval.bench_repeats, &rng(cfg, Stream::Eval))?;
    let mut csv = CsvOut::create(&inv.out.join("bench.csv"), &["sampler", "trajectory_len", "samples", "repeat", "seconds"], None)?;
    for r in &results {
        for (k, s) in r.seconds.iter().enumerate() {
            csv.row([r.label.clone(), r.trajectory_len.to_string(), c.rows().to_string(), k.to_string(), s.to_string()])?;
        }
    }
    let mut out = Outputs::new();
    out.add_timing(csv.finish()?);
    out.summary = bench_summary(&results, steps);
    Ok(out)
}
