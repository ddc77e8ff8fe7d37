//! Double-double arithmetic (about 31 significant digits) and the [`Real`]
//! abstraction that lets the reduced cusp recursion run in either `f64` or
//! [`Dd`].
//!
//! The algorithms are the classical error-free transformations (Dekker,
//! Knuth) with Taylor kernels for the elementary functions.

use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};

use crate::math;

/// Scalar type used by precision-generic code.
pub trait Real:
    Copy + PartialOrd + fmt::Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn atan(self) -> Self;
    fn pi() -> Self;
    /// Relative rounding unit.
    fn epsilon() -> f64;

    fn tan(self) -> Self {
        self.sin() / self.cos()
    }
    /// `self^y` for `self ≥ 0`.
    fn powf(self, y: Self) -> Self {
        if self.to_f64() == 0.0 {
            Self::from_f64(0.0)
        } else {
            (y * self.ln()).exp()
        }
    }
    fn half_pi() -> Self {
        Self::pi() * Self::from_f64(0.5)
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn abs(self) -> Self {
        libm::fabs(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        math::sqrt(self)
    }
    #[inline]
    fn ln(self) -> Self {
        math::ln(self)
    }
    #[inline]
    fn exp(self) -> Self {
        math::exp(self)
    }
    #[inline]
    fn sin(self) -> Self {
        math::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        math::cos(self)
    }
    #[inline]
    fn atan(self) -> Self {
        math::atan(self)
    }
    #[inline]
    fn tan(self) -> Self {
        math::tan(self)
    }
    #[inline]
    fn powf(self, y: Self) -> Self {
        math::pow(self, y)
    }
    #[inline]
    fn pi() -> Self {
        math::PI
    }
    fn epsilon() -> f64 {
        f64::EPSILON
    }
}

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, math::fma(a, b, -p))
}

#[allow(clippy::excessive_precision)]
const DD_PI: Dd = Dd { hi: core::f64::consts::PI, lo: 1.224646799147353207e-16 };
#[allow(clippy::excessive_precision)]
const DD_HALF_PI: Dd = Dd { hi: core::f64::consts::FRAC_PI_2, lo: 6.123233995736766036e-17 };
#[allow(clippy::excessive_precision)]
const DD_LN2: Dd = Dd { hi: core::f64::consts::LN_2, lo: 2.319046813846299558e-17 };

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub const fn new(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn renorm(hi: f64, lo: f64) -> Dd {
        let (h, l) = quick_two_sum(hi, lo);
        Dd { hi: h, lo: l }
    }

    fn mul_f64(self, b: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, b);
        Dd::renorm(p1, p2 + self.lo * b)
    }

    fn ldexp(self, k: i32) -> Dd {
        Dd { hi: libm::scalbn(self.hi, k), lo: libm::scalbn(self.lo, k) }
    }

    fn sqr(self) -> Dd {
        self * self
    }

    /// sin and cos of `|x| ≤ π/4` by Taylor series.
    fn sin_cos_kernel(x: Dd) -> (Dd, Dd) {
        let x2 = x.sqr();
        let mut term = x;
        let mut s = x;
        let mut k = 1.0;
        loop {
            term = -(term * x2) / Dd::new((k + 1.0) * (k + 2.0));
            k += 2.0;
            s = s + term;
            if libm::fabs(term.hi) < 1e-34 * libm::fabs(s.hi) || k > 60.0 {
                break;
            }
        }
        let mut term = Dd::ONE;
        let mut c = Dd::ONE;
        let mut k = 0.0;
        loop {
            term = -(term * x2) / Dd::new((k + 1.0) * (k + 2.0));
            k += 2.0;
            c = c + term;
            if libm::fabs(term.hi) < 1e-34 || k > 60.0 {
                break;
            }
        }
        (s, c)
    }

    fn sin_cos(self) -> (Dd, Dd) {
        let k = math::round(self.hi / DD_HALF_PI.hi);
        let r = self - DD_HALF_PI.mul_f64(k);
        let (s, c) = Dd::sin_cos_kernel(r);
        match (k as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }
}

impl fmt::Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dd({:e} + {:e})", self.hi, self.lo)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        Dd::renorm(s1, s2 + t2)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, b.hi);
        Dd::renorm(p1, p2 + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Dd { hi: q1, lo: q2 } + Dd::new(q3)
    }
}

impl Real for Dd {
    fn from_f64(x: f64) -> Self {
        Dd::new(x)
    }
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
    fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }
    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let q = math::sqrt(self.hi);
        let qd = Dd::new(q);
        qd + (self - qd.sqr()) / Dd::new(2.0 * q)
    }
    fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Dd::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let k = math::round(self.hi / DD_LN2.hi);
        // r = (x − k ln2) / 2^10, then square ten times.
        let r = (self - DD_LN2.mul_f64(k)).ldexp(-10);
        let mut term = Dd::ONE;
        let mut sum = Dd::ZERO;
        let mut n = 1.0;
        // Sum of r^n/n! for n ≥ 1; `expm1` form keeps precision under squaring.
        loop {
            term = term * r / Dd::new(n);
            sum = sum + term;
            n += 1.0;
            if libm::fabs(term.hi) < 1e-36 || n > 40.0 {
                break;
            }
        }
        for _ in 0..10 {
            // (1+s)² − 1 = s(2 + s)
            sum = sum * (sum + Dd::new(2.0));
        }
        (sum + Dd::ONE).ldexp(k as i32)
    }
    fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::new(f64::NAN);
        }
        let mut y = Dd::new(math::ln(self.hi));
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }
    fn sin(self) -> Self {
        self.sin_cos().0
    }
    fn cos(self) -> Self {
        self.sin_cos().1
    }
    fn tan(self) -> Self {
        let (s, c) = self.sin_cos();
        s / c
    }
    fn atan(self) -> Self {
        let mut y = Dd::new(math::atan(self.to_f64()));
        for _ in 0..2 {
            let (s, c) = y.sin_cos();
            // Newton on tan y = x:  y ← y − (s − x c) c
            y = y - (s - self * c) * c;
        }
        y
    }
    fn pi() -> Self {
        DD_PI
    }
    fn epsilon() -> f64 {
        4.93e-32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Dd, hi: f64, lo: f64, tol: f64) -> bool {
        let d = (a - Dd { hi, lo }).to_f64();
        libm::fabs(d) <= tol * libm::fabs(hi)
    }

    // Reference digits from a 50-digit evaluation.
    #[test]
    #[allow(clippy::excessive_precision, clippy::approx_constant)]
    fn elementary_functions_reach_double_double_accuracy() {
        let x = Dd::new(0.3);
        assert!(close(x.sin(), 2.95520206661339546e-01, 1.83153572767925360e-17, 1e-30));
        assert!(close(x.cos(), 9.55336489125605981e-01, 4.19356002979074665e-17, 1e-30));
        assert!(close(x.exp(), 1.34985880757600318e+00, -9.44731467343238746e-17, 1e-30));
        assert!(close(x.ln(), -1.20397280432593612e+00, 8.93552158340377591e-17, 1e-30));
        assert!(close(x.atan(), 2.91456794477867098e-01, -1.64485554350750340e-17, 1e-30));
        assert!(close(Dd::new(2.0).sqrt(), 1.4142135623730951e+00, -9.667293313452913e-17, 1e-30));
    }

    #[test]
    fn division_round_trips() {
        let a = Dd::new(1.0) / Dd::new(3.0);
        let b = a * Dd::new(3.0);
        assert!(libm::fabs((b - Dd::ONE).to_f64()) < 1e-31);
    }

    #[test]
    fn large_argument_trig() {
        let x = Dd::new(5.0);
        let (s, c) = x.sin_cos();
        let one = s * s + c * c;
        assert!(libm::fabs((one - Dd::ONE).to_f64()) < 1e-30);
        assert!(libm::fabs(s.to_f64() - libm::sin(5.0)) < 1e-15);
    }
}
