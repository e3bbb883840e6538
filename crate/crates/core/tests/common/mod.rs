#![allow(dead_code)]

use diffchan_core::diffusion::{Denoiser, NoiseSchedule, PredictionMode};
use diffchan_core::nn::{Tape, Tensor, Var};
use diffchan_core::{Real, Result};

/// Returns the same prediction for every call.
pub struct Fixed<S>(pub Tensor<S>);

impl<S: Real> Denoiser<S> for Fixed<S> {
    fn predict(&self, tape: &mut Tape<S>, _x: Var, _t: &[usize], _c: Var) -> Result<Var> {
        Ok(tape.constant(self.0.clone()))
    }
}

/// Treats the condition as the clean sample and returns the exact target
/// that links it to `x_t`.
pub struct Oracle<'a> {
    pub sched: &'a NoiseSchedule,
    pub mode: PredictionMode,
}

impl Denoiser<f64> for Oracle<'_> {
    fn predict(&self, tape: &mut Tape<f64>, x: Var, t: &[usize], c: Var) -> Result<Var> {
        let xv = tape.value(x).clone();
        let x0 = tape.value(c).clone();
        let mut out = Vec::with_capacity(xv.len());
        for r in 0..xv.rows() {
            let ab = self.sched.alpha_bar(t[r]);
            for j in 0..xv.cols() {
                let eps = (xv.row(r)[j] - ab.sqrt() * x0.row(r)[j]) / (1.0 - ab).sqrt();
                out.push(match self.mode {
                    PredictionMode::Epsilon => eps,
                    PredictionMode::V => ab.sqrt() * eps - (1.0 - ab).sqrt() * x0.row(r)[j],
                });
            }
        }
        Ok(tape.constant(Tensor::new(xv.shape().to_vec(), out)?))
    }
}

pub fn max_abs_diff<S: Real>(a: &Tensor<S>, b: &Tensor<S>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x.as_f64() - y.as_f64()).abs())
        .fold(0.0, f64::max)
}

pub fn mean_var(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var)
}
