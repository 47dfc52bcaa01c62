//! Scalar numerics: Gaussian tails, the Kolmogorov distribution, Irwin-Hall
//! sums and bisection on monotone functions.

use std::f64::consts::{PI, SQRT_2};

/// Upper tail `P(Z >= x)` of a standard normal.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form converges fast for small arguments.
        let mut cdf = 0.0;
        let c = -PI * PI / (8.0 * lambda * lambda);
        for j in 1..=64 {
            let m = (2 * j - 1) as f64;
            let term = (c * m * m).exp();
            cdf += term;
            if term < 1e-17 {
                break;
            }
        }
        (1.0 - (2.0 * PI).sqrt() / lambda * cdf).clamp(0.0, 1.0)
    } else {
        let mut sf = 0.0;
        let mut sign = 1.0;
        for j in 1..=100 {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            sf += sign * term;
            sign = -sign;
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

/// Largest summand count for which [`irwin_hall_cdf`] stays accurate.
pub const IRWIN_HALL_MAX_TERMS: u32 = 16;

/// CDF of the sum of `n` independent Uniform(0,1) variables at `x`.
///
/// Evaluated with the alternating sum on whichever side of `n / 2` keeps
/// cancellation small. Panics in debug builds for `n > IRWIN_HALL_MAX_TERMS`.
pub fn irwin_hall_cdf(n: u32, x: f64) -> f64 {
    debug_assert!(n <= IRWIN_HALL_MAX_TERMS);
    let nf = n as f64;
    if n == 0 {
        return if x >= 0.0 { 1.0 } else { 0.0 };
    }
    if x <= 0.0 {
        return 0.0;
    }
    if x >= nf {
        return 1.0;
    }
    if x > nf / 2.0 {
        return 1.0 - irwin_hall_cdf(n, nf - x);
    }
    let mut factorial = 1.0;
    for i in 2..=n {
        factorial *= i as f64;
    }
    let mut acc = 0.0;
    let mut binom = 1.0;
    let upper = x.floor() as u32;
    for k in 0..=upper.min(n) {
        let term = binom * (x - k as f64).powi(n as i32);
        if k % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
        binom = binom * (n - k) as f64 / (k + 1) as f64;
    }
    (acc / factorial).clamp(0.0, 1.0)
}

/// Bisection on a non-increasing function.
///
/// Requires `f(lo) >= target > f(hi)` and returns the final `lo`, i.e. a point
/// that still satisfies `f(lo) >= target`, after the bracket shrinks below
/// `xtol` (absolute) or stops shrinking in floating point.
pub fn bisect_decreasing<F: Fn(f64) -> f64>(
    f: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
) -> f64 {
    debug_assert!(lo < hi);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= xtol {
            break;
        }
        if f(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
