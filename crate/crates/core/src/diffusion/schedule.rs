use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// How `beta_t` evolves over the diffusion steps.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    /// `beta_t = beta` for every step.
    Constant { beta: f64 },
    /// `beta_t = start + scale * sigmoid(1 + 12 (t - 1) / T)`.
    Sigmoid { start: f64, scale: f64 },
    /// `alpha_bar_t = cos(t / T * pi / 2)^2`, zero SNR at `t = T`.
    Cosine,
    /// Explicit `beta_1..beta_T`.
    Custom(Vec<f64>),
}

impl ScheduleKind {
    pub const SIGMOID_DEFAULT: ScheduleKind = ScheduleKind::Sigmoid { start: 0.001, scale: 0.05 };

    pub fn name(&self) -> &'static str {
        match self {
            ScheduleKind::Constant { .. } => "constant",
            ScheduleKind::Sigmoid { .. } => "sigmoid",
            ScheduleKind::Cosine => "cosine",
            ScheduleKind::Custom(_) => "custom",
        }
    }
}

/// Clamp for intermediate cosine betas; the final beta is exactly 1.
const COSINE_BETA_MAX: f64 = 0.999;

/// Per-step diffusion coefficients, indexed by `t` in `0..=T`.
///
/// Index 0 holds the conventions `beta_0 = 0`, `alpha_bar_0 = 1`,
/// `sigma_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    kind: ScheduleKind,
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
    sigmas: Vec<f64>,
    beta_variance: bool,
}

impl NoiseSchedule {
    pub fn new(kind: ScheduleKind, steps: usize) -> Result<Self> {
        Self::with_variance(kind, steps, false)
    }

    /// With `beta_variance` the reverse-step std is `sqrt(beta_t)` instead of
    /// the posterior std.
    pub fn with_variance(kind: ScheduleKind, steps: usize, beta_variance: bool) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidSchedule("T must be >= 1".into()));
        }
        let t_max = steps as f64;
        let mut betas = vec![0.0; steps + 1];
        match &kind {
            ScheduleKind::Constant { beta } => {
                for b in &mut betas[1..] {
                    *b = *beta;
                }
            }
            ScheduleKind::Sigmoid { start, scale } => {
                for t in 1..=steps {
                    let z = 1.0 + 12.0 * (t as f64 - 1.0) / t_max;
                    betas[t] = start + scale / (1.0 + libm::exp(-z));
                }
            }
            ScheduleKind::Cosine => {
                let f = |t: usize| {
                    let c = libm::cos(t as f64 / t_max * core::f64::consts::FRAC_PI_2);
                    c * c
                };
                for t in 1..steps {
                    betas[t] = (1.0 - f(t) / f(t - 1)).min(COSINE_BETA_MAX);
                }
                betas[steps] = 1.0;
            }
            ScheduleKind::Custom(b) => {
                if b.len() != steps {
                    return Err(Error::InvalidSchedule(format!(
                        "{} betas for T = {steps}",
                        b.len()
                    )));
                }
                betas[1..].copy_from_slice(b);
            }
        }
        for (t, &b) in betas.iter().enumerate().skip(1) {
            let ok = if matches!(kind, ScheduleKind::Custom(_)) {
                (0.0..=1.0).contains(&b)
            } else {
                b > 0.0 && b <= 1.0
            };
            if !ok {
                return Err(Error::InvalidSchedule(format!("beta_{t} = {b} outside (0, 1]")));
            }
        }

        let mut alpha_bars = vec![1.0; steps + 1];
        for t in 1..=steps {
            alpha_bars[t] = alpha_bars[t - 1] * (1.0 - betas[t]);
        }
        let mut sigmas = vec![0.0; steps + 1];
        for t in 1..=steps {
            let var = if beta_variance {
                betas[t]
            } else {
                let denom = 1.0 - alpha_bars[t];
                if denom > 0.0 {
                    betas[t] * (1.0 - alpha_bars[t - 1]) / denom
                } else {
                    0.0
                }
            };
            sigmas[t] = libm::sqrt(var);
        }
        Ok(Self { kind, betas, alpha_bars, sigmas, beta_variance })
    }

    /// Rebuilds a schedule from its stored betas, e.g. from a checkpoint.
    pub fn from_betas(kind: ScheduleKind, betas: &[f64], beta_variance: bool) -> Result<Self> {
        let rebuilt = Self::with_variance(kind.clone(), betas.len(), beta_variance)?;
        if rebuilt.betas[1..] == *betas {
            return Ok(rebuilt);
        }
        let custom = Self::with_variance(ScheduleKind::Custom(betas.to_vec()), betas.len(), beta_variance)?;
        Ok(Self { kind, ..custom })
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn steps(&self) -> usize {
        self.betas.len() - 1
    }

    pub fn beta_variance(&self) -> bool {
        self.beta_variance
    }

    /// `beta_1..beta_T`.
    pub fn betas(&self) -> &[f64] {
        &self.betas[1..]
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.betas[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }

    /// Reverse-step noise std.
    pub fn sigma(&self, t: usize) -> f64 {
        self.sigmas[t]
    }

    /// `alpha_bar_t / (1 - alpha_bar_t)`.
    pub fn snr(&self, t: usize) -> f64 {
        let ab = self.alpha_bars[t];
        ab / (1.0 - ab)
    }

    pub fn is_zero_snr(&self) -> bool {
        self.alpha_bars[self.steps()] == 0.0
    }

    pub(crate) fn check_t(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::TimestepOutOfRange { t, steps: self.steps() });
        }
        Ok(())
    }
}

/// What the denoiser network predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionMode {
    /// The injected noise `eps`.
    Epsilon,
    /// The velocity `sqrt(ab) eps - sqrt(1 - ab) x0`.
    V,
}

impl PredictionMode {
    pub fn name(self) -> &'static str {
        match self {
            PredictionMode::Epsilon => "epsilon",
            PredictionMode::V => "v",
        }
    }

    /// Epsilon prediction cannot recover `x0` on a zero-SNR schedule.
    pub fn check_schedule(self, sched: &NoiseSchedule) -> Result<()> {
        if self == PredictionMode::Epsilon && sched.is_zero_snr() {
            return Err(Error::ZeroSnrEpsilon(sched.steps()));
        }
        Ok(())
    }
}
