//! Self-describing checkpoint files.
//!
//! Layout: the 8-byte magic `DIFFCHAN`, a little-endian `u32` format version,
//! a little-endian `u64` header length, the JSON header, then every array as
//! raw little-endian `f32` values in header order. The header lists each
//! array's name, shape, payload offset, and CRC-32.

use std::path::Path;

use diffchan_core::diffusion::{DenoiserNet, DiffusionChannel, NoiseSchedule, PredictionMode, Sampler, ScheduleKind};
use diffchan_core::e2e::Autoencoder;
use diffchan_core::nn::{Module, Parameter, Tensor};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ModeName, ScheduleName};
use crate::error::{CheckpointError, CliError, Result};

pub const MAGIC: &[u8; 8] = b"DIFFCHAN";
pub const FORMAT_VERSION: u32 = 1;

const PREAMBLE: usize = 8 + 4 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dm,
    Ae,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dm => "dm",
            ModelKind::Ae => "ae",
        }
    }
}

/// Structural description of the stored model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelInfo {
    Dm {
        dim: usize,
        hidden: usize,
        steps: usize,
        mode: ModeName,
        schedule: ScheduleName,
        /// Constant `beta` or sigmoid `(start, scale)`; empty for cosine.
        schedule_params: Vec<f64>,
        beta_variance: bool,
        betas: Vec<f64>,
    },
    Ae {
        m: usize,
        n: usize,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CreationMeta {
    pub seed: u64,
    pub epoch: usize,
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
    crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    version: u32,
    model: ModelInfo,
    /// The TOML config the model was produced with.
    config: String,
    meta: CreationMeta,
    arrays: Vec<ArrayEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelInfo,
    pub config: String,
    pub meta: CreationMeta,
    pub arrays: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn kind(&self) -> ModelKind {
        match self.model {
            ModelInfo::Dm { .. } => ModelKind::Dm,
            ModelInfo::Ae { .. } => ModelKind::Ae,
        }
    }

    pub fn from_dm(dm: &DiffusionChannel<f32>, config: &ExperimentConfig, meta: CreationMeta) -> Result<Self> {
        let (schedule, schedule_params) = match dm.schedule.kind() {
            ScheduleKind::Constant { beta } => (ScheduleName::Constant, vec![*beta]),
            ScheduleKind::Sigmoid { start, scale } => (ScheduleName::Sigmoid, vec![*start, *scale]),
            ScheduleKind::Cosine => (ScheduleName::Cosine, vec![]),
            ScheduleKind::Custom(_) => {
                return Err(CliError::Usage("custom beta schedules have no config form to checkpoint".into()))
            }
        };
        let model = ModelInfo::Dm {
            dim: dm.net.dim(),
            hidden: dm.net.hidden_width(),
            steps: dm.net.steps(),
            mode: match dm.mode {
                PredictionMode::Epsilon => ModeName::Epsilon,
                PredictionMode::V => ModeName::V,
            },
            schedule,
            schedule_params,
            beta_variance: dm.schedule.beta_variance(),
            betas: dm.schedule.betas().to_vec(),
        };
        Ok(Self { model, config: config.to_toml(), meta, arrays: arrays_of(dm.net.parameters()) })
    }

    pub fn from_ae(ae: &Autoencoder<f32>, config: &ExperimentConfig, meta: CreationMeta) -> Self {
        let model = ModelInfo::Ae { m: ae.messages(), n: ae.block_length() };
        Self { model, config: config.to_toml(), meta, arrays: arrays_of(ae.parameters()) }
    }

    /// Rebuilds the generator; the sampler is not stored and comes from the
    /// caller.
    pub fn to_dm(&self, sampler: Sampler) -> Result<DiffusionChannel<f32>> {
        let ModelInfo::Dm { dim, hidden, steps, mode, schedule, schedule_params, beta_variance, betas } = &self.model
        else {
            return Err(CheckpointError::Kind { expected: "dm".into(), found: self.kind().name().into() }.into());
        };
        let kind = match (schedule, schedule_params.as_slice()) {
            (ScheduleName::Constant, [beta]) => ScheduleKind::Constant { beta: *beta },
            (ScheduleName::Sigmoid, [start, scale]) => ScheduleKind::Sigmoid { start: *start, scale: *scale },
            (ScheduleName::Cosine, []) => ScheduleKind::Cosine,
            _ => return Err(CheckpointError::Header("schedule parameters do not fit the schedule".into()).into()),
        };
        if betas.len() != *steps {
            return Err(CheckpointError::Header(format!("{} betas for T = {steps}", betas.len())).into());
        }
        let sched = NoiseSchedule::from_betas(kind, betas, *beta_variance)?;
        let mut net = DenoiserNet::zeros(*dim, *hidden, *steps);
        self.load_into(net.parameters_mut())?;
        Ok(DiffusionChannel::new(net, sched, (*mode).into(), sampler)?)
    }

    pub fn to_ae(&self) -> Result<Autoencoder<f32>> {
        let ModelInfo::Ae { m, n } = self.model else {
            return Err(CheckpointError::Kind { expected: "ae".into(), found: self.kind().name().into() }.into());
        };
        let mut ae = Autoencoder::new(m, n, &mut diffchan_core::rng::Rng::new(0, diffchan_core::rng::Stream::Init))?;
        self.load_into(ae.parameters_mut())?;
        Ok(ae)
    }

    fn load_into(&self, params: Vec<&mut Parameter<f32>>) -> Result<()> {
        if let Some(extra) = self.arrays.iter().find(|a| !params.iter().any(|p| p.name() == a.name)) {
            return Err(CheckpointError::Unexpected(extra.name.clone()).into());
        }
        for p in params {
            let a = self
                .arrays
                .iter()
                .find(|a| a.name == p.name())
                .ok_or_else(|| CheckpointError::Missing(p.name().to_string()))?;
            if a.shape != p.value().shape() {
                return Err(CheckpointError::Shape {
                    name: a.name.clone(),
                    found: a.shape.clone(),
                    expected: p.value().shape().to_vec(),
                }
                .into());
            }
            p.set_value(Tensor::new(a.shape.clone(), a.data.clone())?)?;
        }
        Ok(())
    }

    /// Fails unless the stored model fits the structure `config` describes.
    pub fn check_against(&self, config: &ExperimentConfig) -> Result<()> {
        let mismatch = |field: &str, found: String, expected: String| -> Result<()> {
            if found == expected {
                Ok(())
            } else {
                Err(CliError::Mismatch { field: field.into(), found, expected })
            }
        };
        match &self.model {
            ModelInfo::Dm { dim, hidden, steps, mode, schedule, beta_variance, .. } => {
                let d = &config.diffusion;
                mismatch("autoencoder.n", dim.to_string(), config.dim().to_string())?;
                mismatch("diffusion.hidden", hidden.to_string(), d.hidden.to_string())?;
                mismatch("diffusion.steps", steps.to_string(), d.steps.to_string())?;
                mismatch("diffusion.mode", format!("{mode:?}"), format!("{:?}", d.mode))?;
                mismatch("diffusion.schedule", format!("{schedule:?}"), format!("{:?}", d.schedule))?;
                mismatch("diffusion.beta_variance", beta_variance.to_string(), d.beta_variance.to_string())
            }
            ModelInfo::Ae { m, n } => {
                mismatch("autoencoder.m", m.to_string(), config.autoencoder.m.to_string())?;
                mismatch("autoencoder.n", n.to_string(), config.autoencoder.n.to_string())
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        let mut entries = Vec::with_capacity(self.arrays.len());
        for a in &self.arrays {
            let offset = payload.len() as u64;
            let start = payload.len();
            for v in &a.data {
                payload.extend_from_slice(&v.to_le_bytes());
            }
            entries.push(ArrayEntry {
                name: a.name.clone(),
                shape: a.shape.clone(),
                offset,
                crc32: crc32fast::hash(&payload[start..]),
            });
        }
        let header = Header {
            version: FORMAT_VERSION,
            model: self.model.clone(),
            config: self.config.clone(),
            meta: self.meta.clone(),
            arrays: entries,
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(PREAMBLE + header.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let available = bytes.len() as u64;
        if bytes.len() < PREAMBLE {
            if !MAGIC.starts_with(&bytes[..bytes.len().min(8)]) {
                return Err(CheckpointError::BadMagic);
            }
            return Err(CheckpointError::Truncated { needed: PREAMBLE as u64, available });
        }
        if &bytes[..8] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version { found: version, expected: FORMAT_VERSION });
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
        let header_end = (PREAMBLE as u64).saturating_add(header_len);
        if header_end > available {
            return Err(CheckpointError::Truncated { needed: header_end, available });
        }
        let header: Header = serde_json::from_slice(&bytes[PREAMBLE..header_end as usize])
            .map_err(|e| CheckpointError::Header(e.to_string()))?;
        let payload = &bytes[header_end as usize..];

        let mut arrays = Vec::with_capacity(header.arrays.len());
        let mut expected_offset = 0u64;
        for e in header.arrays {
            if e.offset != expected_offset {
                return Err(CheckpointError::Header(format!("array `{}` at offset {}, expected {expected_offset}", e.name, e.offset)));
            }
            let count = e.shape.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d as u64));
            let bytes_len = count
                .and_then(|c| c.checked_mul(4))
                .ok_or_else(|| CheckpointError::Header(format!("array `{}` is too large", e.name)))?;
            let end = e.offset + bytes_len;
            if end > payload.len() as u64 {
                return Err(CheckpointError::Truncated { needed: header_end + end, available });
            }
            let raw = &payload[e.offset as usize..end as usize];
            if crc32fast::hash(raw) != e.crc32 {
                return Err(CheckpointError::Checksum(e.name));
            }
            let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
            arrays.push(NamedArray { name: e.name, shape: e.shape, data });
            expected_offset = end;
        }
        if expected_offset != payload.len() as u64 {
            return Err(CheckpointError::TrailingBytes(payload.len() as u64 - expected_offset));
        }
        Ok(Self { model: header.model, config: header.config, meta: header.meta, arrays })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self::from_bytes(&bytes)?)
    }
}

fn arrays_of(params: Vec<&Parameter<f32>>) -> Vec<NamedArray> {
    params
        .into_iter()
        .map(|p| NamedArray { name: p.name().to_string(), shape: p.value().shape().to_vec(), data: p.value().data().to_vec() })
        .collect()
}
