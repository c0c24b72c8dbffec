//! Scalar helpers over `libm` so the crate stays `no_std`.

pub use core::f64::consts::PI;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    let mut base = if n < 0 { 1.0 / x } else { x };
    let mut e = n.unsigned_abs();
    let mut acc = 1.0;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn lgamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn tan(x: f64) -> f64 {
    libm::tan(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Area of the unit sphere in R^N: 2 pi^{N/2} / Gamma(N/2).
pub fn sphere_area(dim: u32) -> f64 {
    let half = f64::from(dim) / 2.0;
    2.0 * exp(half * ln(PI) - lgamma(half))
}

/// Generalized binomial coefficient binom(a, m) for real `a` and integer `m`.
pub fn binom_real(a: f64, m: usize) -> f64 {
    let mut acc = 1.0;
    for j in 0..m {
        acc *= (a - j as f64) / (j as f64 + 1.0);
    }
    acc
}
