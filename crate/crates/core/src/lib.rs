//! Numerical core for learning conditional channel distributions with
//! denoising diffusion models and training end-to-end autoencoders through
//! them.
//!
//! The crate is `no_std` with `alloc`. File formats, configuration, and the
//! command line live in the companion `diffchan` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channels;
pub mod diffusion;
pub mod e2e;
mod error;
pub mod metrics;
pub mod nn;
mod real;
pub mod rng;

pub use error::{Error, Result};
pub use real::Real;
