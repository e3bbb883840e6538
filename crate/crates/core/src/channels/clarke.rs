use alloc::vec;
use alloc::vec::Vec;

use super::bessel::j0;
use crate::error::{Error, Result};

/// Symmetric Toeplitz autocorrelation matrix of Clarke fading,
/// entry `(i, j) = J0(2 pi fD Ts |i - j|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CovarianceMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Lower-triangular factor `L` with `L L^T = Sigma + jitter I`.
    ///
    /// The jitter escalates from 0 through 1e-12 to 1e-9 until the
    /// factorization succeeds.
    pub fn cholesky(&self) -> Result<Vec<f64>> {
        for jitter in [0.0, 1e-12, 1e-11, 1e-10, 1e-9] {
            if let Some(l) = cholesky(&self.data, self.n, jitter) {
                return Ok(l);
            }
        }
        Err(Error::InvalidArgument("covariance is not positive semi-definite".into()))
    }
}

pub fn clarke_covariance(n_c: usize, fd_ts: f64) -> CovarianceMatrix {
    let lags: Vec<f64> = (0..n_c)
        .map(|l| j0(2.0 * core::f64::consts::PI * fd_ts * l as f64))
        .collect();
    let mut data = vec![0.0; n_c * n_c];
    for i in 0..n_c {
        for j in 0..n_c {
            data[i * n_c + j] = lags[i.abs_diff(j)];
        }
    }
    CovarianceMatrix { n: n_c, data }
}

fn cholesky(a: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            if i == j {
                s += jitter;
            }
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = libm::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}
