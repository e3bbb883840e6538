use diffchan_core::diffusion::DiffusionChannel;
use diffchan_core::nn::Tensor;
use diffchan_core::rng::Rng;
use rayon::prelude::*;

use crate::error::Result;

/// Rows per sampling shard.
pub const SHARD_ROWS: usize = 4096;

/// Generates one output per row of `c`, sharded across threads. Shard `k`
/// draws from `rng.fork(k)`, so the result does not depend on the thread
/// count.
pub fn generate(dm: &DiffusionChannel<f32>, c: &Tensor<f32>, rng: &Rng) -> Result<Tensor<f32>> {
    let rows = c.rows();
    let shards: Vec<(usize, usize)> = (0..rows).step_by(SHARD_ROWS).map(|s| (s, (s + SHARD_ROWS).min(rows))).collect();
    let parts = shards
        .par_iter()
        .enumerate()
        .map(|(k, &(start, end))| {
            let idx: Vec<usize> = (start..end).collect();
            dm.generate(&c.gather_rows(&idx), &mut rng.fork(k as u64))
        })
        .collect::<diffchan_core::Result<Vec<_>>>()?;
    let mut data = Vec::with_capacity(c.len());
    for p in parts {
        data.extend_from_slice(p.data());
    }
    Ok(Tensor::from_parts(vec![rows, c.cols()], data)?)
}
