//! The induced map `F` on the set `M` of collisions that do not belong to a
//! long cusp run, its return times and cells, and expansion factors.
//!
//! A *run* is a maximal block of consecutive collisions on the cusp walls.
//! `x ∈ M` unless `x` belongs to a run of more than `K₀` collisions. For
//! `x ∈ M` the return time is `R(x) = 1` unless the next collision starts a
//! long run of length `L`, in which case `R(x) = L + 1`, `F(x)` is the first
//! collision after the run and `x` belongs to the cell `M_L`.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::corner::{run_corner_series_seeded, CornerConfig, CornerError, CornerSeriesRecord};
use crate::dynamics::{collide, inverse_map, map_differential, mat_vec, wavefront_step, DynamicsError, EventFlags, PhasePoint};
use crate::geometry::Table;
use crate::math::{floor, sqrt, FRAC_PI_2};
use crate::stats::fit::{line_fit, median, power_law_fit, FitResult};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InducedError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Corner(#[from] CornerError),
    #[error("singular collision ({}) after {step} steps", .flags.names())]
    Discard { flags: EventFlags, step: usize },
    #[error("cusp run longer than the cap of {0} collisions")]
    Capped(usize),
    #[error("invalid induced configuration: {0}")]
    Config(&'static str),
}

impl InducedError {
    /// Whether the error came from a singular orbit (to be resampled) rather
    /// than a bug or a misconfiguration.
    pub fn is_discard(&self) -> bool {
        matches!(
            self,
            InducedError::Discard { .. }
                | InducedError::Capped(_)
                | InducedError::Dynamics(DynamicsError::Singular { .. })
                | InducedError::Dynamics(DynamicsError::SingularInput { .. })
                | InducedError::Corner(CornerError::Dynamics(DynamicsError::Singular { .. }))
                | InducedError::Corner(CornerError::TooLong(_))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct InducedConfig {
    /// `K₀`: runs longer than this are excursions of `F`.
    pub series_cutoff: usize,
    /// `k₀`: first non-central homogeneity strip.
    pub strip_k0: usize,
    /// Measured bound `φ_K₀` on `|φ|` over `M`, if known.
    pub phi_k0: Option<f64>,
    /// Longest run followed before giving up.
    pub run_cap: usize,
}

impl Default for InducedConfig {
    fn default() -> Self {
        InducedConfig { series_cutoff: 10, strip_k0: 5, phi_k0: None, run_cap: 1_000_000 }
    }
}

impl InducedConfig {
    pub fn validate(&self) -> Result<(), InducedError> {
        if self.series_cutoff < 2 {
            return Err(InducedError::Config("series_cutoff (K0) must be at least 2"));
        }
        if self.strip_k0 < 1 {
            return Err(InducedError::Config("strip_k0 must be at least 1"));
        }
        if self.run_cap <= self.series_cutoff {
            return Err(InducedError::Config("run_cap must exceed series_cutoff"));
        }
        if let Some(p) = self.phi_k0 {
            if !(p > 0.0 && p <= FRAC_PI_2) {
                return Err(InducedError::Config("phi_k0 must lie in (0, pi/2]"));
            }
        }
        Ok(())
    }
}

/// One application of `F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnSample {
    pub x: PhasePoint,
    /// Return time `R(x)` in collisions.
    pub r: usize,
    /// Length of the long run in the excursion, 1 when there is none.
    pub cell: usize,
    /// `Λ(x) = ∏ (1 + τB)` over the `R` flights of the excursion.
    pub expansion: f64,
    pub exit: PhasePoint,
    /// `φ` at the first and last collision of the long run.
    pub run_phi: Option<(f64, f64)>,
    /// Outgoing wavefront curvature `B` at the exit.
    pub exit_b: f64,
}

impl ReturnSample {
    /// Euclidean stretch `|dFx|/|dx|` in `(r, φ)` of the tangent vector with
    /// seed `b0` at `x`.
    pub fn euclidean_stretch(&self, b0: f64) -> f64 {
        let c0 = self.x.cos_phi();
        let ce = self.exit.cos_phi();
        let v0 = b0 * c0 - self.x.curvature;
        let ve = self.exit_b * ce - self.exit.curvature;
        self.expansion * (c0 / ce) * sqrt((1.0 + ve * ve) / (1.0 + v0 * v0))
    }
}

/// Default wavefront seed `B₀ = 2K/cos φ + 1/τ_max`.
pub fn default_seed(table: &Table, x: &PhasePoint) -> f64 {
    2.0 * x.curvature / x.cos_phi() + 1.0 / table.tau_max
}

fn step(table: &Table, x: &PhasePoint, count: usize) -> Result<(f64, PhasePoint), InducedError> {
    let ev = collide(table, x)?;
    if !ev.flags.is_empty() {
        return Err(InducedError::Discard { flags: ev.flags, step: count });
    }
    Ok((ev.tau, ev.end))
}

/// Number of consecutive cusp collisions among `x, 𝓕x, 𝓕²x, …`, stopping
/// after `cap`.
pub fn run_forward(table: &Table, x: &PhasePoint, cap: usize) -> Result<usize, InducedError> {
    let mut y = *x;
    let mut n = 0;
    while y.is_cusp() {
        n += 1;
        if n >= cap {
            return Ok(n);
        }
        y = step(table, &y, n)?.1;
    }
    Ok(n)
}

/// Number of consecutive cusp collisions among `𝓕⁻¹x, 𝓕⁻²x, …` when `x` is a
/// cusp collision (0 otherwise), stopping after `cap`.
pub fn run_backward(table: &Table, x: &PhasePoint, cap: usize) -> Result<usize, InducedError> {
    if !x.is_cusp() {
        return Ok(0);
    }
    let mut y = *x;
    let mut n = 0;
    while n < cap {
        let (p, _) = inverse_map(table, &y).map_err(|e| match e {
            DynamicsError::Singular { flags, .. } => InducedError::Discard { flags, step: n },
            e => e.into(),
        })?;
        if !p.is_cusp() {
            break;
        }
        n += 1;
        y = p;
    }
    Ok(n)
}

/// Membership in `M`. Errors when a singular collision is met before the
/// run containing `x` is resolved.
pub fn in_m(table: &Table, x: &PhasePoint, cfg: &InducedConfig) -> Result<bool, InducedError> {
    if !x.is_cusp() {
        return Ok(true);
    }
    let k0 = cfg.series_cutoff;
    let back = run_backward(table, x, k0 + 1)?;
    if back >= k0 {
        return Ok(false);
    }
    let fwd = run_forward(table, x, k0 + 1 - back)?;
    Ok(back + fwd <= k0)
}

/// Iterates `F` along an orbit, reusing collisions already computed while
/// looking ahead to classify runs.
#[derive(Debug, Clone)]
pub struct InducedOrbit<'a> {
    table: &'a Table,
    cfg: InducedConfig,
    current: PhasePoint,
    ahead: VecDeque<(f64, PhasePoint)>,
    collisions: usize,
}

impl<'a> InducedOrbit<'a> {
    /// `start` must lie in `M` (not rechecked).
    pub fn new(table: &'a Table, start: PhasePoint, cfg: InducedConfig) -> Self {
        InducedOrbit { table, cfg, current: start, ahead: VecDeque::new(), collisions: 0 }
    }

    pub fn current(&self) -> &PhasePoint {
        &self.current
    }

    /// Billiard collisions consumed so far.
    pub fn collisions(&self) -> usize {
        self.collisions
    }

    fn pull(&mut self, i: usize) -> Result<(), InducedError> {
        while self.ahead.len() <= i {
            let last = self.ahead.back().map_or(self.current, |a| a.1);
            let s = step(self.table, &last, self.collisions + self.ahead.len())?;
            self.ahead.push_back(s);
        }
        Ok(())
    }

    /// Length of the run starting at `ahead[0]`. Short runs stop the
    /// lookahead at the first non-cusp collision.
    fn classify(&mut self) -> Result<usize, InducedError> {
        let k0 = self.cfg.series_cutoff;
        let mut j = 0;
        loop {
            self.pull(j)?;
            if !self.ahead[j].1.is_cusp() {
                return Ok(j);
            }
            j += 1;
            if j > k0 {
                break;
            }
        }
        loop {
            if j >= self.cfg.run_cap {
                return Err(InducedError::Capped(self.cfg.run_cap));
            }
            self.pull(j)?;
            if !self.ahead[j].1.is_cusp() {
                return Ok(j);
            }
            j += 1;
        }
    }

    /// Applies `F` once, seeding the wavefront at the current point with `b0`.
    pub fn next_with_seed(&mut self, b0: f64) -> Result<ReturnSample, InducedError> {
        let run = self.classify()?;
        let long = run > self.cfg.series_cutoff;
        let r = if long { run + 1 } else { 1 };
        let x = self.current;
        let mut b = b0;
        let mut log_expansion = 0.0;
        let mut last = x;
        let mut first_phi = 0.0;
        let mut last_phi = 0.0;
        for i in 0..r {
            let (tau, y) = self.ahead.pop_front().expect("classified collisions are buffered");
            log_expansion += libm::log1p(tau * b);
            b = wavefront_step(b, tau, y.curvature, y.phi)?.1;
            if i == 0 {
                first_phi = y.phi;
            }
            if i + 2 == r {
                last_phi = y.phi;
            }
            last = y;
        }
        let run_phi = if long { Some((first_phi, last_phi)) } else { None };
        self.current = last;
        self.collisions += r;
        Ok(ReturnSample { x, r, cell: if long { run } else { 1 }, expansion: libm::exp(log_expansion), exit: last, run_phi, exit_b: b })
    }

    pub fn next_return(&mut self) -> Result<ReturnSample, InducedError> {
        let b0 = default_seed(self.table, &self.current);
        self.next_with_seed(b0)
    }
}

/// `F(x)` with its return time, cell and expansion. `x` must lie in `M`.
pub fn return_map(table: &Table, x: &PhasePoint, cfg: &InducedConfig) -> Result<ReturnSample, InducedError> {
    InducedOrbit::new(table, *x, *cfg).next_return()
}

/// [`return_map`] with an explicit wavefront seed at `x`.
pub fn return_map_seeded(table: &Table, x: &PhasePoint, cfg: &InducedConfig, b0: f64) -> Result<ReturnSample, InducedError> {
    InducedOrbit::new(table, *x, *cfg).next_with_seed(b0)
}

/// Return time to `M` for an arbitrary collision: `min{n ≥ 1 : 𝓕ⁿx ∈ M}`.
/// Runs longer than `cap` give `Err(Capped)`.
pub fn hitting_time(table: &Table, x: &PhasePoint, cfg: &InducedConfig, cap: usize) -> Result<usize, InducedError> {
    let k0 = cfg.series_cutoff;
    if x.is_cusp() {
        let back = run_backward(table, x, k0 + 1)?;
        let fwd = run_forward(table, x, cap)?;
        if fwd >= cap {
            return Err(InducedError::Capped(cap));
        }
        if back + fwd > k0 {
            return Ok(fwd);
        }
        if fwd >= 2 {
            return Ok(1);
        }
    }
    let cfg = InducedConfig { run_cap: cap, ..*cfg };
    Ok(return_map(table, x, &cfg)?.r)
}

/// Expansion factor along the corner series entered from `x`: the product
/// `Λ` and the per-flight `λₙ = τₙB(xₙ)`, the first being the entry flight.
pub fn expansion_factor(table: &Table, x: &PhasePoint, b_extra: f64) -> Result<(f64, Vec<f64>), InducedError> {
    let cfg = CornerConfig::default();
    let rec = run_corner_series_seeded(table, x, &cfg, b_extra)?;
    if !rec.valid {
        return Err(InducedError::Discard { flags: rec.flags, step: rec.len });
    }
    let mut lam = Vec::with_capacity(rec.len + 1);
    lam.push(rec.lambda_entry);
    lam.extend_from_slice(&rec.lambda);
    Ok((rec.expansion, lam))
}

/// The same stretch from the product of differentials: the p-norm growth of
/// the tangent vector with `B = b0` at `x` over `steps` collisions.
pub fn stretch_matrix_product(table: &Table, x: &PhasePoint, b0: f64, steps: usize) -> Result<f64, InducedError> {
    let mut y = *x;
    let mut v = [1.0, b0 * y.cos_phi() - y.curvature];
    let mut log_stretch = 0.0;
    for _ in 0..steps {
        let (m, ev) = map_differential(table, &y)?;
        let w = mat_vec(&m, v);
        let before = y.cos_phi() * libm::fabs(v[0]);
        let after = ev.end.cos_phi() * libm::fabs(w[0]);
        log_stretch += libm::log(after / before);
        // Renormalise to keep the components representable.
        v = [w[0] / libm::fabs(w[0]), w[1] / libm::fabs(w[0])];
        y = ev.end;
    }
    Ok(libm::exp(log_stretch))
}

/// Homogeneity strip of `φ`: 0 in the central strip `|φ| < π/2 − k₀⁻²`,
/// otherwise the `k ≥ k₀` with `π/2 − k⁻² ≤ |φ| < π/2 − (k+1)⁻²`.
/// `|φ| = π/2` maps to `usize::MAX`.
pub fn homogeneity_index(phi: f64, k0: usize) -> usize {
    let d = FRAC_PI_2 - libm::fabs(phi);
    if !(d > 0.0) {
        return usize::MAX;
    }
    let lower = |k: usize| 1.0 / ((k as f64) * (k as f64));
    if d > lower(k0) {
        return 0;
    }
    let mut k = floor(1.0 / sqrt(d)) as usize;
    k = k.max(k0);
    while d > lower(k) {
        k -= 1;
    }
    while d <= lower(k + 1) {
        k += 1;
    }
    k
}

/// Largest `|φ|` over a sample of `M`; an empirical `φ_K₀`.
pub fn measure_phi_k0(samples: &[PhasePoint]) -> f64 {
    samples.iter().map(|x| libm::fabs(x.phi)).fold(0.0, f64::max)
}

/// Result of following the forward runs of near-grazing collisions.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GrazingCheck {
    pub samples: usize,
    /// Samples whose next run exceeds `K₀`.
    pub long: usize,
    pub discarded: usize,
    /// Largest `|φ|` among samples whose next run is not long.
    pub worst_phi: f64,
}

impl GrazingCheck {
    pub fn passed(&self) -> bool {
        self.long + self.discarded == self.samples
    }
}

/// Checks whether near-grazing outgoing states `x` lead into runs longer than
/// `K₀`.
pub fn grazing_check(table: &Table, points: &[PhasePoint], cfg: &InducedConfig) -> GrazingCheck {
    let mut out = GrazingCheck { samples: points.len(), long: 0, discarded: 0, worst_phi: 0.0 };
    for x in points {
        let next = match step(table, x, 0) {
            Ok((_, y)) => y,
            Err(_) => {
                out.discarded += 1;
                continue;
            }
        };
        match run_forward(table, &next, cfg.series_cutoff + 1) {
            Ok(n) if n > cfg.series_cutoff => out.long += 1,
            Ok(_) => out.worst_phi = out.worst_phi.max(libm::fabs(x.phi)),
            Err(_) => out.discarded += 1,
        }
    }
    out
}

/// Expansion statistics over an ensemble of exact corner-series records.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExpansionReport {
    pub records: usize,
    /// `Λ` against `N` with the default seed.
    pub lambda_vs_n: FitResult,
    /// Same with the seed raised by `alt_seed_extra`.
    pub lambda_vs_n_alt: FitResult,
    pub alt_seed_extra: f64,
    /// `|Δ exponent| < max stderr` between the two seeds.
    pub seed_insensitive: bool,
    /// Median over records of the median `n λₙ` on `[N^0.3, N^0.7]`.
    pub entering_a: f64,
    /// Median over records of the median `(N − n + 1) λₙ` on
    /// `[N − N^0.7, N − N^0.3]`.
    pub exiting_b: f64,
    /// Largest relative gap between `∏(1 + λₙ)` and the p-norm stretch of
    /// the matrix product of `D𝓕`, over the checked records.
    pub matrix_product_max_rel: f64,
    pub matrix_product_checked: usize,
    /// `λ₁` and `λ_N` (first cusp flight and exit flight) against `N`.
    pub first_correction: Option<FitResult>,
    pub last_correction: Option<FitResult>,
    /// `C₃` from a pooled fit of `A/λₘ − m` against `ln m` on `m ∈ [1, N₁)`;
    /// `C₄` the smallest constant for which `λₘ ≥ A/(m + C₃ ln m + C₄)`
    /// holds there on every record.
    pub c3: f64,
    pub c4: f64,
    /// The same `C₄` over `N ∈ [10², 10³)` and `[10³, 10⁴]`.
    pub c4_by_decade: [f64; 2],
    /// Exponents in `N` of the factors of `Λ`: entry flight, entering half
    /// `n ≤ N̄`, exiting half `N̄ < n < N`, exit flight.
    pub segment_exponents: [f64; 4],
}

fn window_median(vals: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = vals.filter(|x| x.is_finite()).collect();
    median(&v)
}

/// `A = (β − 1)/(2β − 1)`.
pub fn entering_constant(beta: f64) -> f64 {
    (beta - 1.0) / (2.0 * beta - 1.0)
}

/// `B = β/(2β − 1)`.
pub fn exiting_constant(beta: f64) -> f64 {
    beta / (2.0 * beta - 1.0)
}

/// Builds an [`ExpansionReport`] from exact records. The first
/// `matrix_checks` records are also pushed through [`stretch_matrix_product`].
pub fn expansion_report(
    table: &Table,
    records: &[CornerSeriesRecord],
    alt_seed_extra: f64,
    matrix_checks: usize,
) -> Result<ExpansionReport, InducedError> {
    let recs: Vec<&CornerSeriesRecord> = records.iter().filter(|r| r.valid && r.entry.is_some() && !r.lambda.is_empty()).collect();
    let ccfg = CornerConfig::default();
    let ns: Vec<f64> = recs.iter().map(|r| r.len as f64).collect();
    let lam: Vec<f64> = recs.iter().map(|r| r.expansion).collect();
    let mut ns_alt = Vec::new();
    let mut lam_alt = Vec::new();
    for r in &recs {
        let alt = run_corner_series_seeded(table, r.entry.as_ref().expect("filtered"), &ccfg, alt_seed_extra)?;
        if alt.valid {
            ns_alt.push(alt.len as f64);
            lam_alt.push(alt.expansion);
        }
    }
    let fit =
        |x: &[f64], y: &[f64]| power_law_fit(x, y, None, None).map_err(|_| InducedError::Config("too few records for the expansion fit"));
    let lambda_vs_n = fit(&ns, &lam)?;
    let lambda_vs_n_alt = fit(&ns_alt, &lam_alt)?;
    let seed_insensitive = libm::fabs(lambda_vs_n.exponent - lambda_vs_n_alt.exponent) < lambda_vs_n.stderr.max(lambda_vs_n_alt.stderr);

    let beta = table.beta;
    let a_const = entering_constant(beta);
    let mut ent = Vec::new();
    let mut ext = Vec::new();
    for r in &recs {
        let n = r.len;
        let nf = n as f64;
        let (lo, hi) = (libm::ceil(libm::pow(nf, 0.3)) as usize, libm::pow(nf, 0.7) as usize);
        ent.push(window_median((lo.max(1)..=hi.min(n)).map(|k| k as f64 * r.lambda[k - 1])));
        // k = N − n + 1 runs over [N^0.3, N^0.7].
        ext.push(window_median((lo.max(1)..=hi.min(n)).map(|k| k as f64 * r.lambda[n - k])));
    }

    let mut max_rel: f64 = 0.0;
    let checked = matrix_checks.min(recs.len());
    for r in recs.iter().take(checked) {
        let x = r.entry.expect("filtered");
        let b0 = default_seed(table, &x);
        let direct = stretch_matrix_product(table, &x, b0, r.len + 1)?;
        max_rel = max_rel.max(libm::fabs(direct - r.expansion) / r.expansion);
    }

    let l1: Vec<f64> = recs.iter().map(|r| r.lambda[0]).collect();
    let ln_: Vec<f64> = recs.iter().map(|r| r.lambda[r.len - 1]).collect();

    // C₃ from a pooled fit of A/λₘ − m ≈ C₃ ln m + c over m ∈ [1, N₁);
    // C₄ is the smallest constant making the bound hold, overall and per
    // decade of N.
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for r in &recs {
        for m in 1..r.n1.min(r.len) {
            xs.push(libm::log(m as f64));
            ys.push(a_const / r.lambda[m - 1] - m as f64);
        }
    }
    let c3 = if xs.len() >= 2 {
        let ones = alloc::vec![1.0; xs.len()];
        line_fit(&xs, &ys, &ones).map(|(b, _, _)| b).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    let need = |r: &CornerSeriesRecord| {
        (1..r.n1.min(r.len))
            .map(|m| {
                let mf = m as f64;
                a_const / r.lambda[m - 1] - mf - c3 * libm::log(mf)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let envelope =
        |lo: usize, hi: usize| recs.iter().filter(|r| r.len >= lo && r.len < hi).map(|r| need(r)).fold(f64::NEG_INFINITY, f64::max);
    let c4 = envelope(0, usize::MAX);
    let c4_by_decade = [envelope(100, 1000), envelope(1000, 10_001)];

    let seg = |f: &dyn Fn(&CornerSeriesRecord) -> f64| {
        let ys: Vec<f64> = recs.iter().map(|r| f(r)).collect();
        power_law_fit(&ns, &ys, None, None).map_or(f64::NAN, |f| f.exponent)
    };
    let prod = |l: &[f64]| libm::exp(l.iter().map(|x| libm::log1p(*x)).sum::<f64>());
    let segment_exponents = [
        seg(&|r| 1.0 + r.lambda_entry),
        seg(&|r| prod(&r.lambda[..r.n_bar])),
        seg(&|r| prod(&r.lambda[r.n_bar..r.len - 1])),
        seg(&|r| 1.0 + r.lambda[r.len - 1]),
    ];

    Ok(ExpansionReport {
        segment_exponents,
        records: recs.len(),
        lambda_vs_n,
        lambda_vs_n_alt,
        alt_seed_extra,
        seed_insensitive,
        entering_a: median(&ent),
        exiting_b: median(&ext),
        matrix_product_max_rel: max_rel,
        matrix_product_checked: checked,
        first_correction: power_law_fit(&ns, &l1, None, None).ok(),
        last_correction: power_law_fit(&ns, &ln_, None, None).ok(),
        c3,
        c4,
        c4_by_decade,
    })
}

/// Straight segment `t ↦ (r₀ + t, φ₀ + V t)` in phase space, with the
/// wavefront seed matching its slope.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseCurve {
    pub r0: f64,
    pub phi0: f64,
    pub slope: f64,
}

impl PhaseCurve {
    pub fn point(&self, table: &Table, t: f64) -> PhasePoint {
        table.phase_point(self.r0 + t, self.phi0 + self.slope * t)
    }

    /// `B = (V + K)/cos φ` for the curve's tangent at `x`.
    pub fn seed(&self, x: &PhasePoint) -> f64 {
        (self.slope + x.curvature) / x.cos_phi()
    }
}

/// Unstable curve through `x_D` (the wall point on the cusp axis, `φ = 0`)
/// with slope `V = K + 1/τ_max` inside the unstable cone.
pub fn singular_fan_curve(table: &Table) -> PhaseCurve {
    let x = table.phase_point(table.r_d, 0.0);
    PhaseCurve { r0: table.r_d, phi0: 0.0, slope: x.curvature + 1.0 / table.tau_max }
}

/// Cell index and homogeneity strips of the first and last run collisions.
pub type PieceKey = (usize, usize, usize);

/// A maximal sub-interval of a curve on which [`PieceKey`] is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvePiece {
    pub cell: usize,
    pub strips: (usize, usize),
    /// Bracket `[t_lo, t_hi]` resolved to the partition tolerance.
    pub t: [f64; 2],
    /// Smallest `Λ` among the interior sample points.
    pub lambda_min: f64,
}

fn piece_key(table: &Table, curve: &PhaseCurve, t: f64, cfg: &InducedConfig) -> Option<(PieceKey, f64)> {
    let x = curve.point(table, t);
    let b0 = curve.seed(&x);
    let s = return_map_seeded(table, &x, cfg, b0).ok()?;
    let strips = match s.run_phi {
        Some((a, b)) => (homogeneity_index(a, cfg.strip_k0), homogeneity_index(b, cfg.strip_k0)),
        None => (0, 0),
    };
    Some(((s.cell, strips.0, strips.1), s.euclidean_stretch(b0)))
}

/// Relative bracket width at which a piece boundary counts as located.
pub const PARTITION_RTOL: f64 = 1e-7;

/// Splits `curve` over `[t0, t1]` (same sign) into pieces of constant
/// [`PieceKey`], keeping pieces whose cell lies in `[cell_min, cell_max)`.
/// Boundaries are found by recursive bisection from a geometric grid of
/// `grid` points; `Λ = |FW|/|W|` is sampled at 5%, 50% and 95% of each
/// piece. Returns the pieces and the number of unresolved brackets.
#[allow(clippy::too_many_arguments)]
pub fn partition_curve(
    table: &Table,
    curve: &PhaseCurve,
    t0: f64,
    t1: f64,
    cell_min: usize,
    cell_max: usize,
    grid: usize,
    cfg: &InducedConfig,
) -> (Vec<CurvePiece>, usize) {
    type K = Option<PieceKey>;
    let key = |t: f64| piece_key(table, curve, t, cfg).map(|k| k.0);
    let mut segs: Vec<(f64, f64, K)> = Vec::new();
    let mut unresolved = 0;
    fn rec(a: f64, ka: K, b: f64, kb: K, key: &dyn Fn(f64) -> K, segs: &mut Vec<(f64, f64, K)>, unresolved: &mut usize) {
        if ka == kb {
            segs.push((a, b, ka));
            return;
        }
        if libm::fabs(b - a) <= PARTITION_RTOL * libm::fabs(a).max(libm::fabs(b)) {
            if ka.is_none() || kb.is_none() {
                *unresolved += 1;
            }
            return;
        }
        let m = if a * b > 0.0 { a.signum() * sqrt(a * b) } else { 0.5 * (a + b) };
        let km = key(m);
        rec(a, ka, m, km, key, segs, unresolved);
        rec(m, km, b, kb, key, segs, unresolved);
    }
    let n = grid.max(2);
    let ts: Vec<f64> = (0..n).map(|i| t0 * libm::pow(t1 / t0, i as f64 / (n - 1) as f64)).collect();
    let ks: Vec<K> = ts.iter().map(|&t| key(t)).collect();
    for i in 0..n - 1 {
        rec(ts[i], ks[i], ts[i + 1], ks[i + 1], &key, &mut segs, &mut unresolved);
    }
    let mut merged: Vec<(f64, f64, PieceKey)> = Vec::new();
    for (a, b, k) in segs {
        let Some(k) = k else { continue };
        match merged.last_mut() {
            Some(last) if last.2 == k && last.1 == a => last.1 = b,
            _ => merged.push((a, b, k)),
        }
    }
    let mut pieces = Vec::new();
    for (a, b, k) in merged {
        if k.0 < cell_min || k.0 >= cell_max {
            continue;
        }
        let mut lam = f64::INFINITY;
        for f in [0.05, 0.5, 0.95] {
            if let Some((kk, l)) = piece_key(table, curve, a + f * (b - a), cfg) {
                if kk == k {
                    lam = lam.min(l);
                }
            }
        }
        if lam.is_finite() {
            pieces.push(CurvePiece { cell: k.0, strips: (k.1, k.2), t: [a.min(b), a.max(b)], lambda_min: lam });
        } else {
            unresolved += 1;
        }
    }
    (pieces, unresolved)
}

/// Largest `|t|` in `[|lo|, |hi|]` (same sign) at which the cell index is
/// still `≥ n`, by bisection on the monotone part of the fan.
pub fn fan_parameter_for_cell(table: &Table, curve: &PhaseCurve, n: usize, lo: f64, hi: f64, cfg: &InducedConfig) -> f64 {
    let cell = |t: f64| piece_key(table, curve, t, cfg).map_or(usize::MAX, |k| k.0 .0);
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = a.signum() * sqrt(a * b);
        if cell(m) >= n {
            a = m;
        } else {
            b = m;
        }
        if libm::fabs(b - a) <= 1e-13 * libm::fabs(b) {
            break;
        }
    }
    a
}

/// Pieces of cell `n` alone on one side of the fan.
pub fn cell_pieces(table: &Table, curve: &PhaseCurve, n: usize, sign: f64, cfg: &InducedConfig) -> (Vec<CurvePiece>, usize) {
    let lo = fan_parameter_for_cell(table, curve, n + 1, sign * 1e-10, sign * 0.1, cfg);
    let hi = fan_parameter_for_cell(table, curve, n, sign * 1e-10, sign * 0.1, cfg);
    partition_curve(table, curve, lo, hi, n, n + 1, 4, cfg)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OneStepSum {
    pub n0: usize,
    /// `Σ 1/Λᵢ` over resolved pieces with cell in `[n0, n_cap)`.
    pub resolved: f64,
    /// Fitted contribution of cells `≥ n_cap`.
    pub tail: f64,
    pub total: f64,
    pub pieces: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OneStepReport {
    pub curve: PhaseCurve,
    pub n_cap: usize,
    pub pieces: Vec<CurvePiece>,
    pub sums: Vec<OneStepSum>,
    /// `(N, Σ over both sides of 1/Λᵢ in cell N)` for the sparse cells beyond
    /// `n_cap` used for the tail.
    pub tail_cells: Vec<(usize, f64)>,
    /// Exponent `p` of the fit `c N^(−p)` to `tail_cells`.
    pub tail_exponent: f64,
    pub tail_exponent_stderr: f64,
    pub unresolved: usize,
    pub inconclusive: bool,
    /// Whether the totals decrease strictly as `n0` increases.
    pub monotone: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct OneStepConfig {
    /// Cells below this are partitioned in full.
    pub n_cap: usize,
    /// Sparse tail cells span `[n_cap, tail_factor·n_cap]`.
    pub tail_factor: usize,
    pub tail_cells: usize,
}

impl Default for OneStepConfig {
    fn default() -> Self {
        OneStepConfig { n_cap: 500, tail_factor: 16, tail_cells: 9 }
    }
}

/// `Σᵢ 1/Λᵢ` over the pieces of `curve` (both sides of `t = 0`) lying in
/// cells `N ≥ n0`, for each `n0` in `n0s`. Cells `< n_cap` are partitioned
/// completely; beyond, a power law fitted to sparse fully partitioned cells
/// is summed.
pub fn one_step_expansion_sum(table: &Table, curve: &PhaseCurve, n0s: &[usize], os: &OneStepConfig, cfg: &InducedConfig) -> OneStepReport {
    let n_cap = os.n_cap;
    let n_min = n0s.iter().copied().min().unwrap_or(n_cap).min(n_cap);
    let mut pieces = Vec::new();
    let mut unresolved = 0;
    for sign in [1.0, -1.0] {
        let lo = fan_parameter_for_cell(table, curve, n_cap, sign * 1e-10, sign * 0.1, cfg);
        let hi = fan_parameter_for_cell(table, curve, n_min, sign * 1e-10, sign * 0.1, cfg);
        let grid = 16 * (1 + libm::log10(libm::fabs(hi / lo)).max(0.0) as usize);
        let (p, u) = partition_curve(table, curve, lo, hi, n_min, n_cap, grid, cfg);
        pieces.extend(p);
        unresolved += u;
    }
    pieces.sort_by(|a, b| a.t[0].total_cmp(&b.t[0]));

    let mut tail_cells = Vec::new();
    let k = os.tail_cells.max(2);
    let mut last = 0;
    for j in 0..k {
        let n = libm::round(n_cap as f64 * libm::pow(os.tail_factor as f64, j as f64 / (k - 1) as f64)) as usize;
        if n == last {
            continue;
        }
        last = n;
        let mut sum = 0.0;
        for sign in [1.0, -1.0] {
            let (p, u) = cell_pieces(table, curve, n, sign, cfg);
            sum += p.iter().map(|p| 1.0 / p.lambda_min).sum::<f64>();
            unresolved += u;
        }
        tail_cells.push((n, sum));
    }
    let lx: Vec<f64> = tail_cells.iter().map(|c| libm::log(c.0 as f64)).collect();
    let ly: Vec<f64> = tail_cells.iter().map(|c| libm::log(c.1)).collect();
    let ones = alloc::vec![1.0; lx.len()];
    let (tail, p, p_err) = match crate::stats::fit::line_fit(&lx, &ly, &ones) {
        Ok((b, a, se)) if b < -1.0 && ly.iter().all(|y| y.is_finite()) => {
            let p = -b;
            // Σ_{N ≥ n_cap} c N^(−p) ≈ ∫_{n_cap − ½}^∞ c N^(−p) dN
            (libm::exp(a) * libm::pow(n_cap as f64 - 0.5, 1.0 - p) / (p - 1.0), p, se)
        }
        Ok((b, _, se)) => (f64::INFINITY, -b, se),
        Err(_) => (f64::INFINITY, f64::NAN, f64::NAN),
    };
    let sums: Vec<OneStepSum> = n0s
        .iter()
        .map(|&n0| {
            let sel: Vec<&CurvePiece> = pieces.iter().filter(|p| p.cell >= n0).collect();
            let resolved: f64 = sel.iter().map(|p| 1.0 / p.lambda_min).sum();
            OneStepSum { n0, resolved, tail, total: resolved + tail, pieces: sel.len() }
        })
        .collect();
    let monotone = sums.windows(2).all(|w| (w[1].n0 > w[0].n0) == (w[1].total < w[0].total));
    OneStepReport {
        curve: *curve,
        n_cap,
        inconclusive: pieces.len() < 3 || !tail.is_finite(),
        pieces,
        sums,
        tail_cells,
        tail_exponent: p,
        tail_exponent_stderr: p_err,
        unresolved,
        monotone,
    }
}
