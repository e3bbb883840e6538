use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use diffchan::{replay, run, CommandKind, ExperimentConfig, Invocation};

#[derive(Parser)]
#[command(name = "diffchan", version, about = "Diffusion-model channel emulation and end-to-end autoencoder experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write Gaussian channel inputs and their channel outputs.
    GenData(Common),
    /// Train a conditional diffusion model on the pre-training dataset.
    TrainDm(Common),
    /// Train an autoencoder (pretrain, iterative, or model-aware).
    TrainAe(Common),
    /// Sliced Wasserstein distance per sampler and trajectory length.
    EvalSwd(Common),
    /// Symbol error rate sweep over Eb/N0.
    EvalSer(Common),
    /// Fading covariance report for the Clarke channel.
    EvalCov(Common),
    /// Generate channel outputs for given conditions.
    Sample(Common),
    /// Wall-clock time per sampler and trajectory length.
    BenchSampling(Common),
    /// Rerun the command recorded in a manifest and compare its outputs.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Divides every dataset size and trial count.
    #[arg(long, default_value_t = 1)]
    scale: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Model checkpoint; repeat for eval-swd.
    #[arg(long)]
    checkpoint: Vec<PathBuf>,
    /// CSV of conditions for `sample`.
    #[arg(long)]
    conditions: Option<PathBuf>,
}

fn invocation(command: CommandKind, c: Common) -> diffchan::Result<Invocation> {
    let config = ExperimentConfig::load(&c.config)?;
    Ok(Invocation {
        command,
        seed: c.seed.unwrap_or(config.seed),
        config,
        scale: c.scale,
        out: c.out,
        checkpoints: c.checkpoint,
        conditions: c.conditions,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (kind, common) = match cli.command {
        Cmd::GenData(c) => (CommandKind::GenData, c),
        Cmd::TrainDm(c) => (CommandKind::TrainDm, c),
        Cmd::TrainAe(c) => (CommandKind::TrainAe, c),
        Cmd::EvalSwd(c) => (CommandKind::EvalSwd, c),
        Cmd::EvalSer(c) => (CommandKind::EvalSer, c),
        Cmd::EvalCov(c) => (CommandKind::EvalCov, c),
        Cmd::Sample(c) => (CommandKind::Sample, c),
        Cmd::BenchSampling(c) => (CommandKind::BenchSampling, c),
        Cmd::Replay { manifest, out } => {
            return match replay(&manifest, out) {
                Ok(bad) if bad.is_empty() => {
                    println!("all deterministic outputs match");
                    ExitCode::SUCCESS
                }
                Ok(bad) => {
                    for f in bad {
                        println!("differs: {f}");
                    }
                    ExitCode::FAILURE
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            };
        }
    };
    match invocation(kind, common).and_then(|inv| run(&inv)) {
        Ok(report) => {
            println!("{}", report.manifest_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
