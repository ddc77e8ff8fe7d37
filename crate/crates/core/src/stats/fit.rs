//! Power-law fits: log-log least squares and the Hill tail estimator.

use alloc::string::String;
use alloc::vec::Vec;

use crate::math::{ln, sqrt};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FitMethod {
    LeastSquares,
    /// Fixed-effects least squares over several series sharing a slope.
    PooledLeastSquares,
    Hill,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitResult {
    pub exponent: f64,
    /// Natural log of the prefactor.
    pub intercept: f64,
    pub stderr: f64,
    pub window: [f64; 2],
    pub points: usize,
    pub method: FitMethod,
    pub warning: Option<String>,
}

impl FitResult {
    pub fn prefactor(&self) -> f64 {
        libm::exp(self.intercept)
    }

    /// `|exponent − target| ≤ tol`.
    pub fn within(&self, target: f64, tol: f64) -> bool {
        libm::fabs(self.exponent - target) <= tol
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least {needed} points in the fit window, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("nonpositive value at x = {x}: y = {y}")]
    Nonpositive { x: f64, y: f64 },
    #[error("input lengths differ")]
    LengthMismatch,
    #[error("all abscissae coincide")]
    Degenerate,
}

pub const MIN_FIT_POINTS: usize = 8;

fn stderr_floor(slope: f64) -> f64 {
    f64::EPSILON * (1.0 + libm::fabs(slope))
}

/// Weighted straight-line fit `y = a + b x`, returning `(b, a, stderr(b))`.
/// The slope error is scaled by the reduced χ², so weights only need to be
/// correct up to a common factor.
pub fn line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<(f64, f64, f64), FitError> {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - mx;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * (y[i] - my);
    }
    if !(sxx > 0.0) {
        return Err(FitError::Degenerate);
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = (0..x.len()).map(|i| w[i] * (y[i] - a - b * x[i]) * (y[i] - a - b * x[i])).sum();
    let dof = (x.len() as f64 - 2.0).max(1.0);
    let se = sqrt(rss / dof / sxx).max(stderr_floor(b));
    Ok((b, a, se))
}

/// Log-log least squares fit of `y ∝ x^exponent`.
///
/// Points outside `window` (inclusive) are ignored. With `sigma`, each point
/// is weighted by `(y/σ)²`, the inverse variance of `ln y`.
pub fn power_law_fit(xs: &[f64], ys: &[f64], sigma: Option<&[f64]>, window: Option<[f64; 2]>) -> Result<FitResult, FitError> {
    if xs.len() != ys.len() || sigma.is_some_and(|s| s.len() != xs.len()) {
        return Err(FitError::LengthMismatch);
    }
    let (mut lx, mut ly, mut w) = (Vec::new(), Vec::new(), Vec::new());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..xs.len() {
        let (x, y) = (xs[i], ys[i]);
        if let Some([a, b]) = window {
            if x < a || x > b {
                continue;
            }
        }
        if !(x > 0.0) || !(y > 0.0) {
            return Err(FitError::Nonpositive { x, y });
        }
        lx.push(ln(x));
        ly.push(ln(y));
        w.push(match sigma {
            Some(s) if s[i] > 0.0 => (y / s[i]) * (y / s[i]),
            _ => 1.0,
        });
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if lx.len() < MIN_FIT_POINTS {
        return Err(FitError::TooFewPoints { needed: MIN_FIT_POINTS, got: lx.len() });
    }
    let (b, a, se) = line_fit(&lx, &ly, &w)?;
    Ok(FitResult {
        exponent: b,
        intercept: a,
        stderr: se,
        window: [lo, hi],
        points: lx.len(),
        method: FitMethod::LeastSquares,
        warning: None,
    })
}

/// Unweighted fit over all points.
pub fn power_law_fit_unweighted(xs: &[f64], ys: &[f64]) -> Result<FitResult, FitError> {
    power_law_fit(xs, ys, None, None)
}

/// Common slope of several `(ln x, ln y)` groups, each with its own
/// intercept. The reported intercept is the weighted mean of the group
/// intercepts.
pub fn pooled_slope(groups: &[(Vec<f64>, Vec<f64>)], window: [f64; 2]) -> FitResult {
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut n = 0usize;
    let mut used = 0usize;
    let mut centred: Vec<(f64, f64, &[f64], &[f64])> = Vec::new();
    for (x, y) in groups {
        if x.len() < 3 {
            continue;
        }
        let mx = x.iter().sum::<f64>() / x.len() as f64;
        let my = y.iter().sum::<f64>() / y.len() as f64;
        for i in 0..x.len() {
            sxx += (x[i] - mx) * (x[i] - mx);
            sxy += (x[i] - mx) * (y[i] - my);
        }
        n += x.len();
        used += 1;
        centred.push((mx, my, x, y));
    }
    let b = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    let mut rss = 0.0;
    let mut a_sum = 0.0;
    for (mx, my, x, y) in &centred {
        a_sum += (my - b * mx) * x.len() as f64;
        for i in 0..x.len() {
            let r = (y[i] - my) - b * (x[i] - mx);
            rss += r * r;
        }
    }
    let dof = (n as f64 - used as f64 - 1.0).max(1.0);
    FitResult {
        exponent: b,
        intercept: if n > 0 { a_sum / n as f64 } else { f64::NAN },
        stderr: sqrt(rss / dof / sxx).max(stderr_floor(b)),
        window,
        points: n,
        method: FitMethod::PooledLeastSquares,
        warning: if used < 2 { Some("fewer than two series in the pooled fit".into()) } else { None },
    }
}

/// Hill estimator for `P(X ≥ x) ∝ x^(−a)` from the `k` largest samples;
/// reports `exponent = −a`.
pub fn hill_tail(samples: &[f64], k: usize) -> Result<FitResult, FitError> {
    let mut v: Vec<f64> = samples.iter().cloned().filter(|x| *x > 0.0).collect();
    if k < MIN_FIT_POINTS || v.len() <= k {
        return Err(FitError::TooFewPoints { needed: k.max(MIN_FIT_POINTS) + 1, got: v.len() });
    }
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let xk = v[k];
    let s: f64 = v[..k].iter().map(|x| ln(x / xk)).sum();
    if !(s > 0.0) {
        return Err(FitError::Degenerate);
    }
    let a = k as f64 / s;
    let tail = k as f64 / v.len() as f64;
    Ok(FitResult {
        exponent: -a,
        intercept: ln(tail) + a * ln(xk),
        stderr: (a / sqrt(k as f64)).max(stderr_floor(a)),
        window: [xk, v[0]],
        points: k,
        method: FitMethod::Hill,
        warning: None,
    })
}

/// Median (mean of the two central values for even lengths); NaN if empty.
pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut w: Vec<f64> = v.to_vec();
    w.sort_by(|a, b| a.total_cmp(b));
    let m = w.len() / 2;
    if w.len() % 2 == 1 {
        w[m]
    } else {
        0.5 * (w[m - 1] + w[m])
    }
}

/// Mean and standard error of the mean.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, sqrt(var / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| libm::pow(10.0, 1.0 + 3.0 * i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn exact_power_law() {
        let xs = grid(20);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * libm::pow(*x, -1.5)).collect();
        let f = power_law_fit(&xs, &ys, None, None).unwrap();
        assert!(libm::fabs(f.exponent + 1.5) < 1e-12, "{f:?}");
        assert!(libm::fabs(f.prefactor() - 3.0) < 1e-10);
        assert!(f.stderr > 0.0);
    }

    #[test]
    fn log_periodic_modulation() {
        let xs = grid(60);
        let ys: Vec<f64> = xs.iter().map(|x| (1.0 + 0.1 * libm::sin(libm::log(*x))) / x).collect();
        let f = power_law_fit(&xs, &ys, None, None).unwrap();
        assert!(libm::fabs(f.exponent + 1.0) < 0.05, "{f:?}");
    }

    #[test]
    fn five_points_rejected() {
        let xs = grid(5);
        let ys = xs.clone();
        assert!(matches!(power_law_fit(&xs, &ys, None, None), Err(FitError::TooFewPoints { got: 5, .. })));
        let xs = grid(20);
        assert!(matches!(power_law_fit(&xs, &xs, None, Some([10.0, 30.0])), Err(FitError::TooFewPoints { .. })));
    }

    #[test]
    fn nonpositive_rejected() {
        let xs = grid(10);
        let mut ys = xs.clone();
        ys[3] = 0.0;
        assert!(matches!(power_law_fit(&xs, &ys, None, None), Err(FitError::Nonpositive { .. })));
    }

    #[test]
    fn pooled_slope_ignores_offsets() {
        let mut groups = Vec::new();
        for g in 0..4 {
            let x: Vec<f64> = (1..30).map(|i| libm::log(i as f64)).collect();
            let y: Vec<f64> = x.iter().map(|x| g as f64 - 0.7 * x).collect();
            groups.push((x, y));
        }
        let f = pooled_slope(&groups, [1.0, 29.0]);
        assert!(libm::fabs(f.exponent + 0.7) < 1e-12);
    }

    #[test]
    fn hill_on_pareto_quantiles() {
        // Deterministic Pareto(a = 1.5) quantiles.
        let n = 20000;
        let v: Vec<f64> = (0..n).map(|i| libm::pow(1.0 - (i as f64 + 0.5) / n as f64, -1.0 / 1.5)).collect();
        let f = hill_tail(&v, 2000).unwrap();
        assert!(libm::fabs(f.exponent + 1.5) < 0.05, "{f:?}");
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
