//! Gaussian tail helpers shared by the PDF algebra and the BER engine.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Upper tail of the standard normal, `P(Z > z)`.
pub fn q_function(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_density(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Antiderivative of the Q function: `d/dz H(z) = Q(z)`.
///
/// `H(z) = z Q(z) - phi(z)`; tends to zero as `z -> +inf`.
pub fn q_integral(z: f64) -> f64 {
    z * q_function(z) - normal_density(z)
}

/// Mean of `Q((t - x) / sigma)` for `x` uniform over `[lo, hi]`, i.e. the
/// probability that a uniform bin smeared by `N(0, sigma^2)` lands above `t`.
pub fn uniform_gaussian_above(lo: f64, hi: f64, t: f64, sigma: f64) -> f64 {
    let width = hi - lo;
    if width <= 0.0 {
        return q_function((t - lo) / sigma);
    }
    let u_hi = (t - lo) / sigma;
    let u_lo = (t - hi) / sigma;
    let value = sigma / width * (q_integral(u_hi) - q_integral(u_lo));
    // Guards against the sign of rounding residue deep in either tail.
    value.clamp(0.0, 1.0)
}
