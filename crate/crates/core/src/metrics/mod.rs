//! Distribution-level comparisons between generated and true channel
//! outputs: sliced Wasserstein distance, empirical CDFs and histograms, and
//! fading covariance extraction.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::channels::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::Rng;
use crate::Real;

/// Where a sample set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Truth,
    Generated,
}

/// `N` finite samples of dimension `d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<S = f32> {
    data: Tensor<S>,
    provenance: Provenance,
}

impl<S: Real> SampleSet<S> {
    pub fn new(data: Tensor<S>, provenance: Provenance) -> Result<Self> {
        if data.shape().len() != 2 || data.rows() < 2 || data.cols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "sample set needs shape [N >= 2, d >= 1], got {:?}",
                data.shape()
            )));
        }
        data.check_finite("sample set")?;
        Ok(Self { data, provenance })
    }

    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn data(&self) -> &Tensor<S> {
        &self.data
    }

    /// Inner products of every sample with `theta`.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.data.row(i).iter().zip(theta).map(|(&x, &t)| x.as_f64() * t).sum())
            .collect()
    }

    /// A random subset of `count` rows, without replacement.
    pub fn subsample(&self, count: usize, rng: &mut Rng) -> Result<Self> {
        if count > self.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot draw {count} of {} samples",
                self.len()
            )));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        for i in 0..count {
            let j = i + rng.below(idx.len() - i);
            idx.swap(i, j);
        }
        idx.truncate(count);
        Self::new(self.data.gather_rows(&idx), self.provenance)
    }
}

/// `K` unit vectors in `d` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    dim: usize,
    vectors: Vec<f64>,
}

impl ProjectionSet {
    /// Normalized isotropic Gaussians, i.e. uniform on the sphere.
    pub fn random(count: usize, dim: usize, rng: &mut Rng) -> Result<Self> {
        if count == 0 || dim == 0 {
            return Err(Error::InvalidArgument("projections need K >= 1 and d >= 1".into()));
        }
        let mut vectors = Vec::with_capacity(count * dim);
        for _ in 0..count {
            loop {
                let v: Vec<f64> = rng.normal_vec(dim);
                let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
                if norm > 1e-12 {
                    vectors.extend(v.iter().map(|x| x / norm));
                    break;
                }
            }
        }
        Ok(Self { dim, vectors })
    }

    /// Normalizes the given rows.
    pub fn from_vectors(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument("projections must share a nonzero width".into()));
        }
        let mut vectors = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let norm = libm::sqrt(r.iter().map(|x| x * x).sum());
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::InvalidArgument("projection with zero or non-finite norm".into()));
            }
            vectors.extend(r.iter().map(|x| x / norm));
        }
        Ok(Self { dim, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }
}

/// Exact 1-D Wasserstein-1 distance between equal-size empirical measures:
/// the mean absolute difference of the sorted values.
pub fn wasserstein1_1d(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    ys.sort_unstable_by(f64::total_cmp);
    let total: f64 = xs.iter().zip(&ys).map(|(a, b)| libm::fabs(a - b)).sum();
    Ok(total / x.len() as f64)
}

/// Sliced Wasserstein-1 distance over `projections` random directions.
///
/// The larger set is subsampled to the size of the smaller one first.
pub fn swd<S: Real>(a: &SampleSet<S>, b: &SampleSet<S>, projections: usize, rng: &mut Rng) -> Result<f64> {
    check_dims(a, b)?;
    let theta = ProjectionSet::random(projections, a.dim(), rng)?;
    swd_with(a, b, &theta, rng)
}

/// [`swd`] with a fixed projection set.
pub fn swd_with<S: Real>(a: &SampleSet<S>, b: &SampleSet<S>, theta: &ProjectionSet, rng: &mut Rng) -> Result<f64> {
    check_dims(a, b)?;
    if theta.dim() != a.dim() {
        return Err(Error::ShapeMismatch {
            op: "swd",
            detail: format!("projections in {} dims, samples in {}", theta.dim(), a.dim()),
        });
    }
    let n = a.len().min(b.len());
    let sub_a;
    let sub_b;
    let (a, b) = if a.len() > n {
        sub_a = a.subsample(n, rng)?;
        (&sub_a, b)
    } else if b.len() > n {
        sub_b = b.subsample(n, rng)?;
        (a, &sub_b)
    } else {
        (a, b)
    };
    let mut total = 0.0;
    for k in 0..theta.len() {
        let t = theta.get(k);
        total += wasserstein1_1d(&a.project(t), &b.project(t))?;
    }
    Ok(total / theta.len() as f64)
}

fn check_dims<S: Real>(a: &SampleSet<S>, b: &SampleSet<S>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            op: "swd",
            detail: format!("dimension {} vs {}", a.dim(), b.dim()),
        });
    }
    Ok(())
}

/// Right-continuous empirical CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empirical CDF of no values".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("empirical CDF input"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    /// Fraction of values `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Step points `(x_(i), i / N)`, with tied values merged.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in self.sorted.iter().enumerate() {
            let level = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 = level,
                _ => out.push((v, level)),
            }
        }
        out
    }

    /// Kolmogorov distance `sup |F_N(x) - F(x)|` to a continuous CDF.
    pub fn ks_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let n = self.sorted.len() as f64;
        let mut worst: f64 = 0.0;
        for (i, &v) in self.sorted.iter().enumerate() {
            let f = cdf(v);
            worst = worst.max(libm::fabs((i + 1) as f64 / n - f)).max(libm::fabs(f - i as f64 / n));
        }
        worst
    }
}

/// Equal-width histogram over `[min, max]`; the last bin is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() || bins == 0 {
            return Err(Error::InvalidArgument("histogram needs values and bins >= 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("histogram input"));
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = vec![0; bins];
        let width = (max - min) / bins as f64;
        for &v in values {
            let b = if width > 0.0 { ((v - min) / width) as usize } else { 0 };
            counts[b.min(bins - 1)] += 1;
        }
        Ok(Self { min, max, counts })
    }

    pub fn bin_width(&self) -> f64 {
        (self.max - self.min) / self.counts.len() as f64
    }

    /// Lower edge of bin `i`.
    pub fn edge(&self, i: usize) -> f64 {
        self.min + i as f64 * self.bin_width()
    }
}

pub fn empirical_cdf_and_hist(values: &[f64], bins: usize) -> Result<(EmpiricalCdf, Histogram)> {
    Ok((EmpiricalCdf::new(values)?, Histogram::new(values, bins)?))
}

/// Euclidean norm of every row, e.g. for output-norm distributions.
pub fn row_norms<S: Real>(x: &Tensor<S>) -> Vec<f64> {
    (0..x.rows())
        .map(|i| libm::sqrt(x.row(i).iter().map(|&v| v.as_f64() * v.as_f64()).sum()))
        .collect()
}

/// Empirical complex covariance of fading taps, noise variance removed.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingCovariance {
    n_c: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl FadingCovariance {
    pub fn dim(&self) -> usize {
        self.n_c
    }

    /// Entry `(i, j)` as `(re, im)`.
    pub fn get(&self, i: usize, j: usize) -> (f64, f64) {
        let k = i * self.n_c + j;
        (self.re[k], self.im[k])
    }

    /// Mean over all entries of the complex modulus of the difference to a
    /// real reference matrix.
    pub fn mean_abs_deviation(&self, reference: &CovarianceMatrix) -> Result<f64> {
        if reference.dim() != self.n_c {
            return Err(Error::ShapeMismatch {
                op: "mean_abs_deviation",
                detail: format!("{} vs {}", self.n_c, reference.dim()),
            });
        }
        let total: f64 = reference
            .data()
            .iter()
            .enumerate()
            .map(|(k, &r)| libm::hypot(self.re[k] - r, self.im[k]))
            .sum();
        Ok(total / (self.n_c * self.n_c) as f64)
    }

    /// Mean of entry `(i, i + lag)` over `i`, real part.
    pub fn lag_profile(&self) -> Vec<f64> {
        (0..self.n_c)
            .map(|lag| {
                let m = self.n_c - lag;
                (0..m).map(|i| self.get(i, i + lag).0).sum::<f64>() / m as f64
            })
            .collect()
    }
}

/// Input block `X = (1, ..., 1)` in packed complex form, one row per sample.
pub fn all_ones_input<S: Real>(rows: usize, n_c: usize) -> Tensor<S> {
    let mut data = Vec::with_capacity(rows * 2 * n_c);
    for _ in 0..rows * n_c {
        data.push(S::one());
        data.push(S::zero());
    }
    Tensor::from_parts(vec![rows, 2 * n_c], data).expect("shape matches")
}

/// `Cov(Y) - sigma^2 I` from packed complex outputs `Y` of shape
/// `[N, 2 n_c]` obtained for the all-ones input. `sigma^2` is the total noise
/// variance per complex symbol.
pub fn extract_fading_covariance<S: Real>(outputs: &Tensor<S>, sigma: f64) -> Result<FadingCovariance> {
    let rows = outputs.rows();
    if outputs.shape().len() != 2 || outputs.cols() % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "expected packed complex outputs, got {:?}",
            outputs.shape()
        )));
    }
    if rows < 2 {
        return Err(Error::InvalidArgument("covariance needs N >= 2 samples".into()));
    }
    outputs.check_finite("fading outputs")?;
    let n_c = outputs.cols() / 2;
    let mut mean_re = vec![0.0; n_c];
    let mut mean_im = vec![0.0; n_c];
    for r in 0..rows {
        let row = outputs.row(r);
        for i in 0..n_c {
            mean_re[i] += row[2 * i].as_f64();
            mean_im[i] += row[2 * i + 1].as_f64();
        }
    }
    for i in 0..n_c {
        mean_re[i] /= rows as f64;
        mean_im[i] /= rows as f64;
    }
    let mut re = vec![0.0; n_c * n_c];
    let mut im = vec![0.0; n_c * n_c];
    let mut zr = vec![0.0; n_c];
    let mut zi = vec![0.0; n_c];
    for r in 0..rows {
        let row = outputs.row(r);
        for i in 0..n_c {
            zr[i] = row[2 * i].as_f64() - mean_re[i];
            zi[i] = row[2 * i + 1].as_f64() - mean_im[i];
        }
        // E[z_i conj(z_j)]
        for i in 0..n_c {
            for j in 0..n_c {
                re[i * n_c + j] += zr[i] * zr[j] + zi[i] * zi[j];
                im[i * n_c + j] += zi[i] * zr[j] - zr[i] * zi[j];
            }
        }
    }
    let norm = (rows - 1) as f64;
    for k in 0..n_c * n_c {
        re[k] /= norm;
        im[k] /= norm;
    }
    for i in 0..n_c {
        re[i * n_c + i] -= sigma * sigma;
    }
    Ok(FadingCovariance { n_c, re, im })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn w1_shift_and_identity() {
        let x = [0.3, -1.0, 2.5, 0.0];
        let y: Vec<f64> = x.iter().map(|v| v + 0.7).collect();
        assert_eq!(wasserstein1_1d(&x, &x).unwrap(), 0.0);
        assert!((wasserstein1_1d(&x, &y).unwrap() - 0.7).abs() < 1e-12);
        assert!(wasserstein1_1d(&x, &y[..3]).is_err());
    }

    #[test]
    fn projections_are_unit() {
        let mut rng = Rng::new(1, Stream::Eval);
        let p = ProjectionSet::random(64, 5, &mut rng).unwrap();
        for k in 0..p.len() {
            let n: f64 = p.get(k).iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cdf_and_hist_basics() {
        let (cdf, hist) = empirical_cdf_and_hist(&[2.0; 5], 8).unwrap();
        assert_eq!(cdf.eval(1.999), 0.0);
        assert_eq!(cdf.eval(2.0), 1.0);
        assert_eq!(hist.counts.iter().filter(|&&c| c > 0).count(), 1);
        let (cdf, hist) = empirical_cdf_and_hist(&[3.0, 1.0, 2.0, 2.0], 2).unwrap();
        assert_eq!(cdf.steps(), vec![(1.0, 0.25), (2.0, 0.75), (3.0, 1.0)]);
        assert_eq!(hist.counts, vec![1, 3]);
    }

    #[test]
    fn deterministic_gain_has_zero_covariance() {
        let y = all_ones_input::<f64>(10, 3).scale(0.5);
        let cov = extract_fading_covariance(&y, 0.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(cov.get(i, j), (0.0, 0.0));
            }
        }
        assert!(extract_fading_covariance(&all_ones_input::<f64>(1, 3), 0.0).is_err());
    }
}
