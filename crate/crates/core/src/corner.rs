//! Corner series: maximal runs of collisions on the two cusp walls.
//!
//! Inside the chart every collision is described by `(sₙ, θₙ)` where `θₙ`
//! is the angle between the outgoing velocity and the wall tangent pointing
//! towards `P`. Then `αₙ = arctan(sₙ^(β−1))`, `γₙ = min(θₙ, π−θₙ)`,
//! `vₙ = θₙ + αₙ`, and the identities
//!
//! ```text
//! θₙ₊₁ = θₙ + αₙ + αₙ₊₁,      τₙ = (sₙᵝ + sₙ₊₁ᵝ) / (β sin vₙ)
//! ```
//!
//! hold exactly. The reduced recursion [`reduced_step`] iterates the same
//! geometry directly in `(s, v)`.

use alloc::vec::Vec;

use crate::dynamics::{collide, inverse_map, wavefront_step, DynamicsError, EventFlags, PhasePoint};
use crate::geometry::{chart_arclength, Side, Table, ARC_CUSP_LOWER, ARC_CUSP_UPPER};
use crate::math::{atan, pow, sin, FRAC_PI_2, PI};
use crate::stats::fit::{median, pooled_slope, power_law_fit_unweighted, FitResult};
use crate::xprec::{Dd, Real};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CornerError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("reduced step did not converge from s = {s}, v = {v}")]
    NoConvergence { s: f64, v: f64 },
    #[error("invalid reduced state s = {s}, v = {v} (need s > 0, 0 < v < π)")]
    InvalidState { s: f64, v: f64 },
    #[error("the trajectory does not enter the cusp")]
    NoSeries,
    #[error("series longer than the cap of {0} collisions")]
    TooLong(usize),
    #[error("need at least {needed} valid records spanning N in [1e2, 1e4], got {got}")]
    InsufficientRecords { needed: usize, got: usize },
}

/// Defaults for corner-series analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct CornerConfig {
    /// Threshold `γ̄` for the entering/turning/exiting segmentation (rad).
    pub gamma_bar: f64,
    /// Hard cap on the number of collisions followed.
    pub max_len: usize,
}

impl Default for CornerConfig {
    fn default() -> Self {
        CornerConfig { gamma_bar: 0.1, max_len: 10_000_000 }
    }
}

/// Full history of one visit to the cusp. Arrays are indexed by
/// `k = n − 1` for the cusp collisions `n = 1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerSeriesRecord {
    pub beta: f64,
    pub len: usize,
    pub s: Vec<f64>,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
    /// Flight after collision `n`; the last entry is the exit flight
    /// (NaN for reduced-recursion records).
    pub tau: Vec<f64>,
    /// `λₙ = τₙ B(xₙ)`; empty for reduced-recursion records.
    pub lambda: Vec<f64>,
    /// `Hₙ = |rₙ − r_f|ᵝ cos φₙ`.
    pub h: Vec<f64>,
    /// Wall hit by collision `n`.
    pub side: Vec<Side>,
    pub tau_entry: f64,
    pub lambda_entry: f64,
    /// `Λ = ∏ (1 + λₙ)` from the entry through the exit flight.
    pub expansion: f64,
    pub n_bar: usize,
    pub n1: usize,
    pub n3: usize,
    pub gamma_bar: f64,
    pub valid: bool,
    pub flags: EventFlags,
    pub entry: Option<PhasePoint>,
    pub exit: Option<PhasePoint>,
}

impl CornerSeriesRecord {
    fn empty(beta: f64, gamma_bar: f64) -> Self {
        CornerSeriesRecord {
            beta,
            len: 0,
            s: Vec::new(),
            alpha: Vec::new(),
            gamma: Vec::new(),
            theta: Vec::new(),
            v: Vec::new(),
            tau: Vec::new(),
            lambda: Vec::new(),
            h: Vec::new(),
            side: Vec::new(),
            tau_entry: f64::NAN,
            lambda_entry: f64::NAN,
            expansion: f64::NAN,
            n_bar: 0,
            n1: 0,
            n3: 0,
            gamma_bar,
            valid: false,
            flags: EventFlags::default(),
            entry: None,
            exit: None,
        }
    }

    fn push(&mut self, s: f64, theta: f64, side: Side) {
        let a = atan(pow(s, self.beta - 1.0));
        self.s.push(s);
        self.alpha.push(a);
        self.theta.push(theta);
        self.gamma.push(theta.min(PI - theta));
        self.v.push(theta + a);
        self.h.push(pow(chart_arclength(self.beta, s), self.beta) * sin(theta));
        self.side.push(side);
        self.len += 1;
    }

    /// `uₙ = αₙ/αₙ₊₁` for `n = 1..N−1`.
    pub fn u(&self) -> Vec<f64> {
        self.alpha.windows(2).map(|w| w[0] / w[1]).collect()
    }

    /// `wₙ = vₙ/αₙ`.
    pub fn w(&self) -> Vec<f64> {
        self.v.iter().zip(&self.alpha).map(|(v, a)| v / a).collect()
    }

    /// `Aₙ = sₙᵝ sin vₙ`, the chart form of the adiabatic invariant.
    pub fn a_invariant(&self) -> Vec<f64> {
        self.s.iter().zip(&self.v).map(|(s, v)| pow(*s, self.beta) * sin(*v)).collect()
    }

    fn segment(&mut self) {
        let n = self.len;
        if n == 0 {
            return;
        }
        let mut kbar = 0;
        for k in 1..n {
            if self.alpha[k] < self.alpha[kbar] {
                kbar = k;
            }
        }
        self.n_bar = kbar + 1;
        self.n1 = (0..=kbar).filter(|&k| self.gamma[k] < self.gamma_bar).map(|k| k + 1).max().unwrap_or(0);
        self.n3 = (kbar..n).filter(|&k| self.gamma[k] > self.gamma_bar).map(|k| k + 1).max().unwrap_or(self.n_bar);
    }

    /// Largest `|γₙ₊₁ − γₙ − αₙ − αₙ₊₁|` using the directed angle (exact
    /// identity in the chart).
    pub fn gamma_residual(&self) -> f64 {
        (0..self.len.saturating_sub(1))
            .map(|k| libm::fabs(self.theta[k + 1] - self.theta[k] - self.alpha[k] - self.alpha[k + 1]))
            .fold(0.0, f64::max)
    }

    /// Largest relative deviation of the computed flights from
    /// `(sₙᵝ + sₙ₊₁ᵝ)/(β sin vₙ)`.
    pub fn tau_residual(&self) -> f64 {
        let b = self.beta;
        (0..self.len.saturating_sub(1))
            .map(|k| {
                let f = (pow(self.s[k], b) + pow(self.s[k + 1], b)) / (b * sin(self.v[k]));
                libm::fabs(self.tau[k] - f) / f
            })
            .fold(0.0, f64::max)
    }
}

/// Follows the exact billiard map from `entry` through the next maximal run
/// of cusp collisions.
///
/// The wavefront curvature is seeded at `entry` with
/// `B₀ = 2K/cos φ + 1/τ_max + b_extra`.
pub fn run_corner_series_seeded(
    table: &Table,
    entry: &PhasePoint,
    cfg: &CornerConfig,
    b_extra: f64,
) -> Result<CornerSeriesRecord, CornerError> {
    let mut rec = CornerSeriesRecord::empty(table.beta, cfg.gamma_bar);
    rec.entry = Some(*entry);
    let mut x = *entry;
    let mut b = 2.0 * x.curvature / x.cos_phi() + 1.0 / table.tau_max + b_extra;
    let mut log_lambda = 0.0;
    let mut first = true;
    loop {
        let ev = collide(table, &x)?;
        let lam = ev.tau * b;
        log_lambda += libm::log1p(lam);
        if first {
            rec.tau_entry = ev.tau;
            rec.lambda_entry = lam;
            first = false;
        } else {
            rec.tau.push(ev.tau);
            rec.lambda.push(lam);
        }
        if !ev.flags.is_empty() {
            rec.flags = ev.flags;
            rec.segment();
            return Ok(rec);
        }
        let y = ev.end;
        if !y.is_cusp() {
            if rec.len == 0 {
                return Err(CornerError::NoSeries);
            }
            rec.exit = Some(y);
            break;
        }
        if rec.len >= cfg.max_len {
            rec.flags.insert(EventFlags::CUSP_CAPTURE);
            rec.segment();
            return Err(CornerError::TooLong(cfg.max_len));
        }
        let side = if y.arc == ARC_CUSP_LOWER { Side::Lower } else { Side::Upper };
        rec.push(y.param, table.cusp_theta(y.arc, y.phi), side);
        let (_, bn) = wavefront_step(b, ev.tau, y.curvature, y.phi)?;
        b = bn;
        x = y;
    }
    rec.expansion = libm::exp(log_lambda);
    rec.valid = true;
    rec.segment();
    Ok(rec)
}

/// [`run_corner_series_seeded`] with the default seed.
pub fn run_corner_series(table: &Table, entry: &PhasePoint, cfg: &CornerConfig) -> Result<CornerSeriesRecord, CornerError> {
    run_corner_series_seeded(table, entry, cfg, 0.0)
}

/// Phase point on a cusp wall at chart coordinate `s` whose outgoing velocity
/// makes the directed angle `θ` with the tangent pointing towards `P`.
pub fn cusp_state(table: &Table, side: Side, s: f64, theta: f64) -> PhasePoint {
    let arc = match side {
        Side::Lower => ARC_CUSP_LOWER,
        Side::Upper => ARC_CUSP_UPPER,
    };
    table.phase_point_on_arc(arc, s, table.cusp_phi(arc, theta))
}

/// Steps backwards from a cusp state to the last collision outside the
/// cusp, i.e. the entry point of the series containing `x`.
pub fn entry_before(table: &Table, x: &PhasePoint, max_back: usize) -> Result<PhasePoint, CornerError> {
    let mut y = *x;
    for _ in 0..max_back {
        let (p, _) = inverse_map(table, &y)?;
        if !p.is_cusp() {
            return Ok(p);
        }
        y = p;
    }
    Err(CornerError::TooLong(max_back))
}

/// Entry point of a series whose first cusp collision is at `(s₁, θ₁ = κα₁)`
/// on the upper wall.
pub fn entry_for(table: &Table, s1: f64, kappa: f64) -> Result<PhasePoint, CornerError> {
    let a1 = atan(pow(s1, table.beta - 1.0));
    let x1 = cusp_state(table, Side::Upper, s1, kappa * a1);
    entry_before(table, &x1, 1_000_000)
}

/// `(s, v)` state of the reduced recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReducedState {
    pub s: f64,
    pub v: f64,
}

/// Safeguarded Newton for an increasing function with `f(lo) < 0 ≤ f(hi)`.
fn solve_increasing_generic<T: Real, F: Fn(T) -> (T, T)>(f: F, lo0: T, hi0: T) -> Option<T> {
    let zero = T::from_f64(0.0);
    let half = T::from_f64(0.5);
    let tol = 4.0 * T::epsilon();
    let (mut lo, mut hi) = (lo0, hi0);
    let mut t = lo;
    let (mut g, mut gp) = f(t);
    let mut dx_old = hi - lo;
    let mut dx = dx_old;
    for _ in 0..200 {
        let bad = ((t - hi) * gp - g) * ((t - lo) * gp - g) > zero || (T::from_f64(2.0) * g).abs() > (dx_old * gp).abs() || !(gp > zero);
        dx_old = dx;
        if bad {
            dx = half * (hi - lo);
            t = lo + dx;
        } else {
            dx = g / gp;
            t = t - dx;
        }
        let scale = t.abs().to_f64();
        if libm::fabs(dx.to_f64()) <= tol * scale || (hi - lo).to_f64() <= tol * scale {
            return Some(t);
        }
        let e = f(t);
        g = e.0;
        gp = e.1;
        if g.to_f64() == 0.0 {
            return Some(t);
        }
        if g < zero {
            lo = t;
        } else {
            hi = t;
        }
    }
    None
}

/// Outcome of one reduced step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReducedStep<T> {
    Next {
        s: T,
        v: T,
    },
    /// The ray leaves the chart `s ≤ ε₀` before reaching the opposite wall.
    Exit,
}

/// Reduced step in arbitrary precision.
///
/// Solves `sₙ₊₁ = sₙ − (sₙ₊₁ᵝ + sₙᵝ)/(β tan vₙ)` as the first crossing of the
/// flight `t ↦ (sₙ − t cos vₙ, zₙ − t sin vₙ)` with the opposite wall, then
/// `vₙ₊₁ = vₙ + 2αₙ₊₁`.
pub fn reduced_step_generic<T: Real>(s: T, v: T, beta: T, eps0: T) -> Result<ReducedStep<T>, CornerError> {
    let zero = T::from_f64(0.0);
    let one = T::from_f64(1.0);
    let bad = || CornerError::InvalidState { s: s.to_f64(), v: v.to_f64() };
    if !(s > zero) || !(v > zero) {
        return Err(bad());
    }
    if !(v < T::pi()) {
        return Ok(ReducedStep::Exit);
    }
    let bm1 = beta - one;
    let z = s.powf(beta) / beta;
    let (sv, cv) = (v.sin(), v.cos());
    let s1 = if cv.abs().to_f64() <= 4.0 * T::epsilon() {
        s
    } else {
        // f(t) = z − t sin v + x(t)^β/β with x = s − t cos v; convex, f(0) = 2z.
        // Work with g = −f, which is concave and increasing up to its maximiser.
        let g = |t: T| {
            let x = s - t * cv;
            let x = if x > zero { x } else { zero };
            let xb1 = x.powf(bm1);
            (t * sv - z - xb1 * x / beta, sv + cv * xb1)
        };
        let t_hi = if cv > zero {
            s / cv
        } else {
            let t_lim = (eps0 - s) / (-cv);
            let xs = (sv / (-cv)).powf(one / bm1);
            if !(xs > s) {
                return Ok(ReducedStep::Exit);
            }
            let t_star = (xs - s) / (-cv);
            if t_star < t_lim {
                t_star
            } else {
                t_lim
            }
        };
        if g(t_hi).0 < zero {
            if cv > zero {
                return Err(CornerError::NoConvergence { s: s.to_f64(), v: v.to_f64() });
            }
            return Ok(ReducedStep::Exit);
        }
        let t = solve_increasing_generic(g, zero, t_hi).ok_or(CornerError::NoConvergence { s: s.to_f64(), v: v.to_f64() })?;
        s - t * cv
    };
    let a1 = s1.powf(bm1).atan();
    Ok(ReducedStep::Next { s: s1, v: v + T::from_f64(2.0) * a1 })
}

/// One step of the reduced recursion in double precision; `None` when the
/// series leaves the chart.
pub fn reduced_step(state: ReducedState, beta: f64, eps0: f64) -> Result<Option<ReducedState>, CornerError> {
    match reduced_step_generic(state.s, state.v, beta, eps0)? {
        ReducedStep::Next { s, v } => Ok(Some(ReducedState { s, v })),
        ReducedStep::Exit => Ok(None),
    }
}

/// Same as [`reduced_step`] in double-double arithmetic.
pub fn reduced_step_extended(state: ReducedState, beta: f64, eps0: f64) -> Result<Option<ReducedState>, CornerError> {
    match reduced_step_generic(Dd::new(state.s), Dd::new(state.v), Dd::new(beta), Dd::new(eps0))? {
        ReducedStep::Next { s, v } => Ok(Some(ReducedState { s: s.to_f64(), v: v.to_f64() })),
        ReducedStep::Exit => Ok(None),
    }
}

fn run_reduced_generic<T: Real>(s1: f64, v1: f64, beta: f64, eps0: f64, cfg: &CornerConfig) -> Result<CornerSeriesRecord, CornerError> {
    let mut rec = CornerSeriesRecord::empty(beta, cfg.gamma_bar);
    let (bt, et) = (T::from_f64(beta), T::from_f64(eps0));
    let (mut s, mut v) = (T::from_f64(s1), T::from_f64(v1));
    loop {
        let sf = s.to_f64();
        let a = s.powf(bt - T::from_f64(1.0)).atan();
        let theta = (v - a).to_f64();
        let side = if rec.len % 2 == 0 { Side::Upper } else { Side::Lower };
        rec.push(sf, theta, side);
        if rec.len >= cfg.max_len {
            return Err(CornerError::TooLong(cfg.max_len));
        }
        match reduced_step_generic(s, v, bt, et)? {
            ReducedStep::Next { s: s2, v: v2 } => {
                let tau = (s.powf(bt) + s2.powf(bt)) / (bt * v.sin());
                rec.tau.push(tau.to_f64());
                s = s2;
                v = v2;
            }
            ReducedStep::Exit => {
                rec.tau.push(f64::NAN);
                break;
            }
        }
    }
    rec.valid = true;
    rec.segment();
    Ok(rec)
}

/// Corner series generated by the reduced recursion from `(s₁, v₁)`.
/// `extended` switches to double-double arithmetic.
pub fn run_reduced_series(
    s1: f64,
    v1: f64,
    beta: f64,
    eps0: f64,
    cfg: &CornerConfig,
    extended: bool,
) -> Result<CornerSeriesRecord, CornerError> {
    if extended {
        run_reduced_generic::<Dd>(s1, v1, beta, eps0, cfg)
    } else {
        run_reduced_generic::<f64>(s1, v1, beta, eps0, cfg)
    }
}

/// Drift of the adiabatic invariant along one record.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DriftReport {
    pub len: usize,
    /// Median of `Hₙ` over `[N₁, N̄]`.
    pub c_n: f64,
    /// `max |Hₙ − C_N| / C_N` over `[N₁, N̄]`.
    pub max_drift: f64,
    /// Log-log slope of `|Hₙ − C_N|` against `n` on the entering period.
    pub entering_h_slope: f64,
    /// Same for the chart invariant `Aₙ = sₙᵝ sin vₙ` against its median.
    pub entering_a_slope: f64,
}

fn drift_slope(vals: &[f64], c: f64, lo: usize, hi: usize) -> f64 {
    if hi <= lo + 8 {
        return f64::NAN;
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for n in lo..=hi.min(vals.len()) {
        let d = libm::fabs(vals[n - 1] - c);
        if d > 0.0 {
            xs.push(n as f64);
            ys.push(d);
        }
    }
    power_law_fit_unweighted(&xs, &ys).map(|f| f.exponent).unwrap_or(f64::NAN)
}

/// `Hₙ` drift over `[N₁, N̄]` and entering-period decay rates on
/// `[11, N̄/2]` measured against the plateau medians.
pub fn adiabatic_invariant(rec: &CornerSeriesRecord) -> DriftReport {
    let lo = rec.n1.max(1);
    let hi = rec.n_bar.max(lo);
    let window = &rec.h[lo - 1..hi];
    let c_n = median(window);
    let max_drift = window.iter().map(|h| libm::fabs(h - c_n) / c_n).fold(0.0, f64::max);
    let a = rec.a_invariant();
    let c_a = median(&a[lo - 1..hi]);
    let elo = 11usize;
    let ehi = rec.n_bar / 2;
    DriftReport {
        len: rec.len,
        c_n,
        max_drift,
        entering_h_slope: drift_slope(&rec.h, c_n, elo, ehi),
        entering_a_slope: drift_slope(&a, c_a, elo, ehi),
    }
}

/// Fitted exponents of one ensemble of records.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AsymptoticsReport {
    pub records: usize,
    pub gamma_bar: f64,
    pub n_range: [usize; 2],
    pub alpha1_vs_n: FitResult,
    pub alpha_n: FitResult,
    pub gamma_n: FitResult,
    pub tau_n: FitResult,
    /// Mean `N₁/N` in each decade of `N` as `(decade_lo, mean, count)`.
    pub n1_over_n: Vec<(f64, f64, usize)>,
    /// `(max − min)/mean` of the per-decade means.
    pub n1_over_n_variation: f64,
    pub median_h_vs_n: FitResult,
    pub drift_vs_n: FitResult,
}

/// Window `[N^0.2, N^0.8]` with the first and last ten collisions excluded.
pub fn fit_window(n: usize) -> (usize, usize) {
    let nf = n as f64;
    let lo = (libm::ceil(pow(nf, 0.2)) as usize).max(11);
    let hi = (pow(nf, 0.8) as usize).min(n.saturating_sub(10));
    (lo, hi)
}

/// Pooled log-log slope of `series(rec)[n]` against `n` over
/// [`fit_window`], centring each record separately.
pub fn pooled_series_fit<F: Fn(&CornerSeriesRecord) -> &[f64]>(records: &[&CornerSeriesRecord], series: F) -> FitResult {
    let mut groups: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let (mut wlo, mut whi) = (usize::MAX, 0);
    for r in records {
        let (lo, hi) = fit_window(r.len);
        if hi <= lo + 2 {
            continue;
        }
        let vals = series(r);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for n in lo..=hi {
            let y = vals[n - 1];
            if y > 0.0 && y.is_finite() {
                xs.push(libm::log(n as f64));
                ys.push(libm::log(y));
            }
        }
        wlo = wlo.min(lo);
        whi = whi.max(hi);
        groups.push((xs, ys));
    }
    pooled_slope(&groups, [wlo as f64, whi as f64])
}

pub fn asymptotics_report(records: &[CornerSeriesRecord]) -> Result<AsymptoticsReport, CornerError> {
    let ok: Vec<&CornerSeriesRecord> = records.iter().filter(|r| r.valid && r.len >= 100 && r.len <= 10_000).collect();
    if ok.len() < 30 {
        return Err(CornerError::InsufficientRecords { needed: 30, got: ok.len() });
    }
    let ns: Vec<f64> = ok.iter().map(|r| r.len as f64).collect();
    let a1: Vec<f64> = ok.iter().map(|r| r.alpha[0]).collect();
    let alpha1_vs_n = power_law_fit_unweighted(&ns, &a1).expect("positive data");
    let alpha_n = pooled_series_fit(&ok, |r| &r.alpha);
    let gamma_n = pooled_series_fit(&ok, |r| &r.gamma);
    let tau_n = pooled_series_fit(&ok, |r| &r.tau);

    let mut n1_over_n = Vec::new();
    let mut lo = 100.0;
    while lo < 10_000.0 {
        let hi = lo * 10.0;
        let sel: Vec<f64> = ok
            .iter()
            .filter(|r| (r.len as f64) >= lo && ((r.len as f64) < hi || (hi >= 10_000.0 && r.len as f64 <= hi)))
            .map(|r| r.n1 as f64 / r.len as f64)
            .collect();
        if !sel.is_empty() {
            n1_over_n.push((lo, sel.iter().sum::<f64>() / sel.len() as f64, sel.len()));
        }
        lo = hi;
    }
    let means: Vec<f64> = n1_over_n.iter().map(|d| d.1).collect();
    let mx = means.iter().cloned().fold(f64::MIN, f64::max);
    let mn = means.iter().cloned().fold(f64::MAX, f64::min);
    let avg = means.iter().sum::<f64>() / means.len() as f64;
    let n1_over_n_variation = (mx - mn) / avg;

    let drifts: Vec<DriftReport> = ok.iter().map(|r| adiabatic_invariant(r)).collect();
    let (mut hn, mut hc, mut dn, mut dd) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (r, d) in ok.iter().zip(&drifts) {
        if d.c_n > 0.0 && d.c_n.is_finite() {
            hn.push(r.len as f64);
            hc.push(d.c_n);
        }
        if d.max_drift > 0.0 && d.max_drift.is_finite() {
            dn.push(r.len as f64);
            dd.push(d.max_drift);
        }
    }
    Ok(AsymptoticsReport {
        records: ok.len(),
        gamma_bar: ok[0].gamma_bar,
        n_range: [ok.iter().map(|r| r.len).min().unwrap_or(0), ok.iter().map(|r| r.len).max().unwrap_or(0)],
        alpha1_vs_n,
        alpha_n,
        gamma_n,
        tau_n,
        n1_over_n,
        n1_over_n_variation,
        median_h_vs_n: power_law_fit_unweighted(&hn, &hc).expect("positive data"),
        drift_vs_n: power_law_fit_unweighted(&dn, &dd).expect("positive data"),
    })
}

/// How a series record is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum SeriesMode {
    /// Exact billiard map.
    #[default]
    Exact,
    /// Reduced `(s, v)` recursion in f64.
    Reduced,
    /// Reduced recursion in double-double.
    Extended,
}

/// Distribution of series starts: `s₁` and `κ = θ₁/α₁` log-uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct EnsembleConfig {
    pub s1: [f64; 2],
    pub kappa: [f64; 2],
    /// Records outside `[n_min, n_max]` are dropped.
    pub n_range: [usize; 2],
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { s1: [0.065, 0.28], kappa: [0.5, 2.0], n_range: [100, 10_000] }
    }
}

/// One record from `(s₁, κ)` in the given mode.
pub fn build_record(table: &Table, s1: f64, kappa: f64, mode: SeriesMode, cfg: &CornerConfig) -> Result<CornerSeriesRecord, CornerError> {
    match mode {
        SeriesMode::Exact => run_corner_series(table, &entry_for(table, s1, kappa)?, cfg),
        SeriesMode::Reduced | SeriesMode::Extended => {
            let a1 = atan(pow(s1, table.beta - 1.0));
            run_reduced_series(s1, (1.0 + kappa) * a1, table.beta, table.eps0, cfg, mode == SeriesMode::Extended)
        }
    }
}

/// Draws `count` starts from stream `(seed, stream)` and keeps the valid
/// records whose length lies in the configured range. Also returns the
/// number of rejected draws.
pub fn corner_ensemble(
    table: &Table,
    cfg: &CornerConfig,
    ens: &EnsembleConfig,
    mode: SeriesMode,
    count: usize,
    seed: u64,
    stream: u64,
) -> (Vec<CornerSeriesRecord>, usize) {
    let mut rng = crate::stats::rng::Stream::new(seed, stream);
    let mut out = Vec::new();
    let mut rejected = 0;
    for _ in 0..count {
        let s1 = rng.log_uniform(ens.s1[0], ens.s1[1]);
        let kappa = rng.log_uniform(ens.kappa[0], ens.kappa[1]);
        match build_record(table, s1, kappa, mode, cfg) {
            Ok(r) if r.valid && r.len >= ens.n_range[0] && r.len <= ens.n_range[1] => out.push(r),
            _ => rejected += 1,
        }
    }
    (out, rejected)
}

/// Exact map against the reduced recursion seeded with the same `(s₁, v₁)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeriesComparison {
    pub s1: f64,
    pub v1: f64,
    pub len_exact: usize,
    pub len_reduced: usize,
    /// Entering period compared: `n ≤ min(N̄_exact, N_reduced)`.
    pub compared: usize,
    pub max_rel_s: f64,
    pub max_abs_v: f64,
}

pub fn compare_series(exact: &CornerSeriesRecord, cfg: &CornerConfig, eps0: f64, extended: bool) -> Result<SeriesComparison, CornerError> {
    if exact.len == 0 {
        return Err(CornerError::NoSeries);
    }
    let red = run_reduced_series(exact.s[0], exact.v[0], exact.beta, eps0, cfg, extended)?;
    let m = exact.n_bar.min(red.len);
    let mut ds: f64 = 0.0;
    let mut dv: f64 = 0.0;
    for k in 0..m {
        ds = ds.max(libm::fabs(exact.s[k] - red.s[k]) / exact.s[k]);
        dv = dv.max(libm::fabs(exact.v[k] - red.v[k]));
    }
    Ok(SeriesComparison {
        s1: exact.s[0],
        v1: exact.v[0],
        len_exact: exact.len,
        len_reduced: red.len,
        compared: m,
        max_rel_s: ds,
        max_abs_v: dv,
    })
}

/// `π/2` as used for γ: exported for callers checking the segment logic.
pub const HALF_PI: f64 = FRAC_PI_2;
