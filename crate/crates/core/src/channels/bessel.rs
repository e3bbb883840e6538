//! Zeroth-order Bessel function of the first kind.

/// Switch point between the power series and the asymptotic expansion.
const SERIES_LIMIT: f64 = 12.0;

/// `J0(x)`, accurate to about 1e-12 absolute.
pub fn j0(x: f64) -> f64 {
    let x = libm::fabs(x);
    if x <= SERIES_LIMIT {
        j0_series(x)
    } else {
        j0_asymptotic(x)
    }
}

/// `sum_m (-1)^m / (m!)^2 (x/2)^(2m)`.
fn j0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 0.0;
    loop {
        m += 1.0;
        term *= -q / (m * m);
        sum += term;
        if libm::fabs(term) < 1e-17 * libm::fabs(sum).max(1e-300) && m > q {
            break;
        }
        if m > 200.0 {
            break;
        }
    }
    sum
}

/// Hankel expansion `sqrt(2/(pi x)) (P cos(x - pi/4) - Q sin(x - pi/4))`,
/// truncated at its smallest term.
fn j0_asymptotic(x: f64) -> f64 {
    let eight_x = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term: f64 = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        // term_k = prod_j (0 - (2j-1)^2) / (k! (8x)^k)
        let next = term * (-(odd * odd)) / (k as f64 * eight_x);
        if libm::fabs(next) >= last {
            break;
        }
        last = libm::fabs(next);
        term = next;
        // P gets even k with sign (-1)^(k/2); Q gets odd k with sign (-1)^((k-1)/2)
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        if last < 1e-18 {
            break;
        }
    }
    let chi = x - core::f64::consts::FRAC_PI_4;
    libm::sqrt(2.0 / (core::f64::consts::PI * x)) * (p * libm::cos(chi) - q * libm::sin(chi))
}
