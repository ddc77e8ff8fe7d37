//! `libm` shims. Used everywhere instead of inherent `f64` methods so that the
//! crate builds without `std` and results do not depend on the platform libm.

pub use core::f64::consts::{FRAC_PI_2, PI, TAU};

#[inline(always)]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
#[inline(always)]
pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}
#[inline(always)]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}
#[inline(always)]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}
#[inline(always)]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}
#[inline(always)]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}
#[inline(always)]
pub fn tan(x: f64) -> f64 {
    libm::tan(x)
}
#[inline(always)]
pub fn asin(x: f64) -> f64 {
    libm::asin(x)
}
#[inline(always)]
pub fn atan(x: f64) -> f64 {
    libm::atan(x)
}
#[inline(always)]
pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}
#[inline(always)]
pub fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}
#[inline(always)]
pub fn fma(a: f64, b: f64, c: f64) -> f64 {
    libm::fma(a, b, c)
}
#[inline(always)]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}
#[inline(always)]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

/// `x` reduced to `[0, 2π)`.
#[inline]
pub fn wrap_tau(x: f64) -> f64 {
    let y = x - TAU * floor(x / TAU);
    if y >= TAU {
        0.0
    } else {
        y
    }
}

#[inline(always)]
pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline(always)]
pub fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline(always)]
pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    hypot(a[0] - b[0], a[1] - b[1])
}
