//! Adaptive Gauss–Kronrod (7/15) quadrature.

use alloc::vec::Vec;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One GK15 panel: (Kronrod estimate, |Kronrod − Gauss|).
fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, libm::fabs((rk - rg) * h))
}

/// ∫ₐᵇ f to absolute tolerance `tol` (best effort after `max_panels`).
///
/// Returns the estimate and the summed error indicator.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let max_panels = 2000;
    let mut done_val = 0.0;
    let mut done_err = 0.0;
    let mut stack: Vec<(f64, f64, usize)> = Vec::with_capacity(64);
    stack.push((a, b, 0));
    let mut panels = 0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = panel(&f, lo, hi);
        panels += 1;
        // Local budget proportional to panel width.
        let budget = tol * libm::fabs(hi - lo) / libm::fabs(b - a);
        if e <= budget || depth > 40 || panels > max_panels {
            done_val += v;
            done_err += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    (done_val, done_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let k: f64 = WGK[7] + 2.0 * WGK[..7].iter().sum::<f64>();
        let g: f64 = WG[3] + 2.0 * WG[..3].iter().sum::<f64>();
        assert!(libm::fabs(k - 2.0) < 1e-15);
        assert!(libm::fabs(g - 2.0) < 1e-15);
    }

    #[test]
    fn polynomials_and_smooth_functions() {
        let (v, _) = integrate(|x| x * x * x * x, 0.0, 1.0, 1e-14);
        assert!(libm::fabs(v - 0.2) < 1e-15);
        let (v, _) = integrate(libm::exp, 0.0, 2.0, 1e-13);
        assert!(libm::fabs(v - (libm::exp(2.0) - 1.0)) < 1e-13);
        let (v, _) = integrate(libm::sqrt, 0.0, 1.0, 1e-12);
        assert!(libm::fabs(v - 2.0 / 3.0) < 1e-12);
    }
}
