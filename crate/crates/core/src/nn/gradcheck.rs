//! Central finite differences, used as an independent oracle for the tape.

use alloc::vec::Vec;

use crate::Real;

/// Numerical gradient of `f` at `x` with step `h`.
pub fn central_difference<S: Real>(mut f: impl FnMut(&[S]) -> S, x: &[S], h: S) -> Vec<S> {
    let mut probe = x.to_vec();
    let two_h = h + h;
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / two_h
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`, with a small floor on the denominator.
pub fn relative_error<S: Real>(a: &[S], b: &[S]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.as_f64() - y.as_f64();
            d * d
        })
        .sum();
    let na: f64 = a.iter().map(|&x| x.as_f64() * x.as_f64()).sum();
    let nb: f64 = b.iter().map(|&x| x.as_f64() * x.as_f64()).sum();
    libm::sqrt(diff) / libm::sqrt(na.max(nb)).max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_derivative() {
        let g = central_difference(|x: &[f64]| x[0].powi(3) + 2.0 * x[1], &[2.0, 5.0], 1e-4);
        assert!((g[0] - 12.0).abs() < 1e-6);
        assert!((g[1] - 2.0).abs() < 1e-9);
    }
}
