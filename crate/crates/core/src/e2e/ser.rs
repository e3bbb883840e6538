use alloc::vec::Vec;

use super::{random_messages, Autoencoder};
use crate::channels::ChannelModel;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::Real;

/// Trials per channel pass.
const CHUNK: usize = 10_000;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Symbol error rate at one Eb/N0 point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerPoint {
    pub ebn0_db: f64,
    pub errors: u64,
    pub trials: u64,
    pub ser: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SerPoint {
    pub fn new(ebn0_db: f64, errors: u64, trials: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, trials, Z95);
        let ser = if trials == 0 { 0.0 } else { errors as f64 / trials as f64 };
        Self { ebn0_db, errors, trials, ser, ci_low, ci_high }
    }

    /// Pools trial shards of the same point.
    pub fn merge(&self, other: &SerPoint) -> SerPoint {
        SerPoint::new(self.ebn0_db, self.errors + other.errors, self.trials + other.trials)
    }
}

/// Wilson score interval for `errors` successes in `trials`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * libm::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    let lo = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if errors >= trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Counts decoding errors over `trials` uniform messages sent through
/// `channel` as given (its noise level is not changed).
pub fn symbol_errors<S: Real>(ae: &Autoencoder<S>, channel: &ChannelModel, trials: u64, rng: &mut Rng) -> Result<u64> {
    let codebook = ae.codebook()?;
    let mut errors = 0;
    let mut left = trials;
    while left > 0 {
        let batch = left.min(CHUNK as u64) as usize;
        let msgs = random_messages(batch, ae.messages(), rng);
        let x = codebook.gather_rows(&msgs);
        let y = channel.apply(&x, rng)?;
        let decoded = ae.decode_messages(&y)?;
        errors += msgs.iter().zip(&decoded).filter(|(a, b)| a != b).count() as u64;
        left -= batch as u64;
    }
    Ok(errors)
}

/// SER through the true `channel` with its noise set from `ebn0_db`.
///
/// Codewords come from normalizing all `M` messages together, i.e. average
/// power `n` under uniform messages.
pub fn evaluate_ser_point<S: Real>(
    ae: &Autoencoder<S>,
    channel: &ChannelModel,
    ebn0_db: f64,
    trials: u64,
    rng: &mut Rng,
) -> Result<SerPoint> {
    if trials == 0 {
        return Err(Error::InvalidArgument("SER needs trials >= 1".into()));
    }
    let ch = channel.with_ebn0(ebn0_db, ae.messages(), ae.block_length())?;
    let errors = symbol_errors(ae, &ch, trials, rng)?;
    Ok(SerPoint::new(ebn0_db, errors, trials))
}

/// SER sweep; point `i` uses the stream `rng.fork(i)`.
pub fn evaluate_ser<S: Real>(
    ae: &Autoencoder<S>,
    channel: &ChannelModel,
    ebn0_db: &[f64],
    trials: u64,
    rng: &Rng,
) -> Result<Vec<SerPoint>> {
    ebn0_db
        .iter()
        .enumerate()
        .map(|(i, &db)| evaluate_ser_point(ae, channel, db, trials, &mut rng.fork(i as u64)))
        .collect()
}
