//! Seeded random streams.
//!
//! Every stochastic component draws from an [`Rng`] built from a 64-bit seed
//! and a [`Stream`] tag, so data generation, diffusion noise, and weight
//! initialization never share a sequence.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::Real;

/// Independent sub-streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Data,
    Noise,
    Eval,
    Custom(u64),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Data => 2,
            Stream::Noise => 3,
            Stream::Eval => 4,
            Stream::Custom(k) => 0x100 + k,
        }
    }
}

/// ChaCha8 generator with its seed and stream recorded.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64, stream: Stream) -> Self {
        Self::with_stream_id(seed, stream.id())
    }

    fn with_stream_id(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    /// Derives a child generator, e.g. one per evaluation shard.
    pub fn fork(&self, index: u64) -> Self {
        let stream = self
            .stream
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(index.wrapping_add(1));
        Self::with_stream_id(self.seed, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform on [0, 1).
    pub fn uniform<S: Real>(&mut self) -> S {
        S::of(self.inner.random::<f64>())
    }

    /// Uniform on (0, 1].
    pub fn uniform_open0<S: Real>(&mut self) -> S {
        S::of(1.0 - self.inner.random::<f64>())
    }

    pub fn normal<S: Real>(&mut self) -> S {
        let z: f64 = StandardNormal.sample(&mut self.inner);
        S::of(z)
    }

    pub fn normal_vec<S: Real>(&mut self, len: usize) -> alloc::vec::Vec<S> {
        (0..len).map(|_| self.normal()).collect()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}
