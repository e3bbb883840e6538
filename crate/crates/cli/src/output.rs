//! CSV results and run manifests.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// A CSV file with a fixed header and an optional leading `#` comment.
pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str], comment: Option<&str>) -> Result<Self> {
        let mut file = File::create(path).map_err(|e| CliError::io(path, e))?;
        if let Some(c) = comment {
            writeln!(file, "# {c}").map_err(|e| CliError::io(path, e))?;
        }
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header)?;
        Ok(Self { path: path.to_path_buf(), writer })
    }

    pub fn row<I, T>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))?;
        Ok(self.path)
    }
}

/// Column names `prefix0..prefix{n-1}`.
pub fn columns(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// One file written by a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub crc32: u32,
    /// False for files that hold wall-clock measurements.
    pub deterministic: bool,
}

impl OutputFile {
    pub fn record(path: &Path, deterministic: bool) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            file: path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
            crc32: crc32fast::hash(&bytes),
            deterministic,
        })
    }
}

/// Everything needed to rerun a command and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub scale: u64,
    /// The config as given, before scaling.
    pub config: String,
    pub checkpoints: Vec<PathBuf>,
    pub conditions: Option<PathBuf>,
    pub git_describe: String,
    pub started_unix_s: u64,
    pub elapsed_s: f64,
    pub outputs: Vec<OutputFile>,
    /// Command-specific results such as fitted slopes or mean deviations.
    pub summary: serde_json::Value,
    pub ebn0_convention: String,
}

impl Manifest {
    pub fn path_for(out: &Path, command: &str) -> PathBuf {
        out.join(format!("{command}.manifest.json"))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// `git describe --always --dirty` of the working directory, or `unknown`.
pub fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

pub const EBN0_CONVENTION: &str = "sigma = sqrt(1 / (2 R Eb/N0)) per real dimension, R = log2(M) / n bits per real channel use; complex channels use sqrt(2) sigma per complex sample";
