//! Transitions between cells along orbits of the induced map.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::cells::sample_m_point;
use super::fit::{power_law_fit, FitResult};
use super::rng::Stream;
use crate::geometry::Table;
use crate::induced::{InducedConfig, InducedOrbit};
use crate::math::{ln, pow};

/// Cell indices of consecutive returns along `F`-orbits, one vector per
/// unbroken orbit segment.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellSequences {
    pub segments: Vec<Vec<u32>>,
    pub returns: u64,
    pub collisions: u64,
    pub restarts: u64,
}

impl CellSequences {
    pub fn merge(&mut self, o: &CellSequences) {
        self.segments.extend(o.segments.iter().cloned());
        self.returns += o.returns;
        self.collisions += o.collisions;
        self.restarts += o.restarts;
    }
}

/// Follows `F` for `returns` steps from a `μ_M` draw, restarting from a new
/// draw after singular collisions. `burn_in` returns are dropped after
/// every (re)start.
pub fn collect_cell_sequences(table: &Table, cfg: &InducedConfig, returns: u64, burn_in: u64, seed: u64, stream: u64) -> CellSequences {
    let mut rng = Stream::new(seed, stream);
    let mut out = CellSequences::default();
    'outer: while out.returns < returns {
        let (x, _) = sample_m_point(table, cfg, &mut rng);
        let mut orbit = InducedOrbit::new(table, x, *cfg);
        for _ in 0..burn_in {
            if orbit.next_return().is_err() {
                out.restarts += 1;
                continue 'outer;
            }
        }
        let start = orbit.collisions();
        let mut seg = Vec::new();
        while out.returns < returns {
            match orbit.next_return() {
                Ok(s) => {
                    seg.push(s.cell as u32);
                    out.returns += 1;
                }
                Err(_) => {
                    out.restarts += 1;
                    break;
                }
            }
        }
        out.collisions += (orbit.collisions() - start) as u64;
        if !seg.is_empty() {
            out.segments.push(seg);
        }
    }
    out
}

/// Statistics for sources in one band `lo ≤ n < hi`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BandReport {
    pub lo: usize,
    pub hi: usize,
    pub sources: u64,
    /// Sources followed by a long run.
    pub long_targets: u64,
    /// `min m / n^((β−1)/β)` over long targets.
    pub c1: f64,
    /// `max m / n^(β/(β−1))` over long targets.
    pub c2: f64,
    /// Fraction of sources landing in `m ≥ n^((β−1)/β + e)`.
    pub escape_fraction: f64,
    /// Mean return time `E(R∘F | M_n)`.
    pub mean_next_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransitionReport {
    pub beta: f64,
    pub pairs: u64,
    pub bands: Vec<BandReport>,
    /// Band used for the conditional exponent.
    pub target_band: [usize; 2],
    /// Exponent of `μ̂(M_m | F M_n)` in `m` for sources in `target_band`.
    pub m_exponent: Option<FitResult>,
    /// `max c₂ / min c₂` over bands with at least `min_band` sources.
    pub c2_spread: f64,
    /// Largest `m / n^(β/(β−1))` over all pairs with a long source and
    /// target: the support bound then holds for every observed pair.
    pub c2_global: f64,
    /// Per dense band `(lo, c₂)` computed on the first `c2_subsample`
    /// sources only, so that every band has the same chance of catching a
    /// rare far target.
    pub c2_equal: Vec<(usize, f64)>,
    pub c2_subsample: u64,
    /// Log-log trend of `c2_equal` against the band centre.
    pub c2_trend: Option<FitResult>,
    /// No upward trend: slope ≤ 2 stderr.
    pub c2_stable: bool,
    pub escape_e: f64,
    pub escape_fit: Option<FitResult>,
    pub escape_target: f64,
    pub next_return_fit: Option<FitResult>,
    /// Among sources `n ≥ chain_min`, the fraction followed within
    /// `⌈ln n⌉` returns by a cell `≥ n`.
    pub chain_fraction: f64,
    pub chain_min: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TransitionConfig {
    /// Source band edges (consecutive pairs form the bands).
    pub band_edges: Vec<usize>,
    pub target_band: [usize; 2],
    /// Bands with fewer sources are flagged as sparse and left out of fits.
    pub min_band: u64,
    /// Target bins per decade for the conditional histogram.
    pub bins_per_decade: usize,
    /// Minimum count per target bin entering the fit.
    pub min_bin: u64,
    pub chain_min: usize,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig {
            band_edges: alloc::vec![25, 50, 100, 200, 400, 800, 1600],
            target_band: [100, 300],
            min_band: 30,
            bins_per_decade: 5,
            min_bin: 5,
            chain_min: 100,
        }
    }
}

/// Support bounds, conditional exponents and escape statistics from cell
/// sequences.
pub fn transition_stats(seqs: &CellSequences, beta: f64, cfg: &InducedConfig, tc: &TransitionConfig) -> TransitionReport {
    let k0 = cfg.series_cutoff as u32;
    let lower_pow = (beta - 1.0) / beta;
    let upper_pow = beta / (beta - 1.0);
    let e = 1.0 / (2.0 * beta);
    let mut warnings = Vec::new();

    let mut pairs = 0u64;
    let mut bands: Vec<BandReport> = tc
        .band_edges
        .windows(2)
        .map(|w| BandReport {
            lo: w[0],
            hi: w[1],
            sources: 0,
            long_targets: 0,
            c1: f64::INFINITY,
            c2: 0.0,
            escape_fraction: 0.0,
            mean_next_return: 0.0,
        })
        .collect();
    let mut escapes = alloc::vec![0u64; bands.len()];
    let mut ratios: Vec<Vec<f64>> = alloc::vec![Vec::new(); bands.len()];
    let mut c2_global: f64 = 0.0;
    let mut next_r = alloc::vec![0.0f64; bands.len()];
    let mut targets: Vec<u32> = Vec::new();
    let mut target_sources = 0u64;
    let mut chain_sources = 0u64;
    let mut chain_hits = 0u64;

    for seg in &seqs.segments {
        for i in 0..seg.len().saturating_sub(1) {
            let (n, m) = (seg[i], seg[i + 1]);
            if n <= k0 {
                continue;
            }
            pairs += 1;
            let nf = n as f64;
            if m > k0 {
                c2_global = c2_global.max(m as f64 / pow(nf, upper_pow));
            }
            if (n as usize) >= tc.target_band[0] && (n as usize) < tc.target_band[1] {
                target_sources += 1;
                if m > k0 {
                    targets.push(m);
                }
            }
            if let Some(b) = bands.iter().position(|b| (n as usize) >= b.lo && (n as usize) < b.hi) {
                let band = &mut bands[b];
                band.sources += 1;
                ratios[b].push(if m > k0 { m as f64 / pow(nf, upper_pow) } else { 0.0 });
                next_r[b] += if m > k0 { m as f64 + 1.0 } else { 1.0 };
                if m > k0 {
                    band.long_targets += 1;
                    band.c1 = band.c1.min(m as f64 / pow(nf, lower_pow));
                    band.c2 = band.c2.max(m as f64 / pow(nf, upper_pow));
                    if m as f64 >= pow(nf, lower_pow + e) {
                        escapes[b] += 1;
                    }
                }
            }
            if (n as usize) >= tc.chain_min {
                let horizon = libm::ceil(ln(nf)) as usize;
                if i + 1 + horizon <= seg.len() {
                    chain_sources += 1;
                    if seg[i + 1..i + 1 + horizon].iter().any(|&c| c >= n) {
                        chain_hits += 1;
                    }
                }
            }
        }
    }
    for (b, band) in bands.iter_mut().enumerate() {
        if band.sources > 0 {
            band.escape_fraction = escapes[b] as f64 / band.sources as f64;
            band.mean_next_return = next_r[b] / band.sources as f64;
        }
        if band.sources < tc.min_band {
            warnings.push(format!("sparse band [{}, {}): {} sources", band.lo, band.hi, band.sources));
        }
    }

    // Conditional histogram of targets on log bins, as a density in m.
    let m_exponent = {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut sig = Vec::new();
        let lo = (k0 + 1) as f64;
        let maxm = targets.iter().copied().max().unwrap_or(0) as f64;
        let mut k = 0;
        loop {
            let a = libm::ceil(lo * pow(10.0, k as f64 / tc.bins_per_decade as f64));
            let b = libm::ceil(lo * pow(10.0, (k + 1) as f64 / tc.bins_per_decade as f64));
            if a > maxm {
                break;
            }
            k += 1;
            if b <= a {
                continue;
            }
            let c = targets.iter().filter(|&&m| (m as f64) >= a && (m as f64) < b).count() as u64;
            if c < tc.min_bin {
                continue;
            }
            let p = c as f64 / target_sources as f64 / (b - a);
            xs.push(libm::sqrt(a * (b - 1.0)));
            ys.push(p);
            sig.push(p / libm::sqrt(c as f64));
        }
        power_law_fit(&xs, &ys, Some(&sig), None).ok()
    };

    let dense: Vec<&BandReport> = bands.iter().filter(|b| b.sources >= tc.min_band && b.long_targets > 0).collect();
    let c2s: Vec<f64> = dense.iter().map(|b| b.c2).collect();
    let c2_spread =
        if c2s.is_empty() { f64::NAN } else { c2s.iter().cloned().fold(f64::MIN, f64::max) / c2s.iter().cloned().fold(f64::MAX, f64::min) };
    let centre = |b: &BandReport| libm::sqrt(b.lo as f64 * b.hi as f64);
    let c2_subsample = dense.iter().map(|b| b.sources).min().unwrap_or(0);
    let mut c2_equal = Vec::new();
    for (b, band) in bands.iter().enumerate() {
        if band.sources >= tc.min_band && band.long_targets > 0 {
            let c = ratios[b].iter().take(c2_subsample as usize).cloned().fold(0.0, f64::max);
            c2_equal.push((band.lo, c));
        }
    }
    let (cx, cy): (Vec<f64>, Vec<f64>) =
        bands.iter().filter_map(|b| c2_equal.iter().find(|c| c.0 == b.lo && c.1 > 0.0).map(|c| (centre(b), c.1))).unzip();
    let c2_trend = power_law_fit(&cx, &cy, None, None).ok().or_else(|| few_point_fit(&cx, &cy));
    let c2_stable = c2_trend.as_ref().is_some_and(|f| f.exponent <= 2.0 * f.stderr);
    let fit_bands = |f: &dyn Fn(&BandReport) -> f64| {
        let xs: Vec<f64> = dense.iter().filter(|b| f(b) > 0.0).map(|b| centre(b)).collect();
        let ys: Vec<f64> = dense.iter().filter(|b| f(b) > 0.0).map(|b| f(b)).collect();
        // Band fits have few points; fall back to a plain slope with a warning.
        power_law_fit(&xs, &ys, None, None).ok().or_else(|| few_point_fit(&xs, &ys))
    };
    let escape_fit = fit_bands(&|b| b.escape_fraction);
    let next_return_fit = fit_bands(&|b| b.mean_next_return);

    TransitionReport {
        beta,
        pairs,
        bands,
        target_band: tc.target_band,
        m_exponent,
        c2_spread,
        c2_global,
        c2_equal,
        c2_subsample,
        c2_trend,
        c2_stable,
        escape_e: e,
        escape_fit,
        escape_target: -e * beta * beta / ((2.0 * beta - 1.0) * (beta - 1.0)),
        next_return_fit,
        chain_fraction: if chain_sources > 0 { chain_hits as f64 / chain_sources as f64 } else { f64::NAN },
        chain_min: tc.chain_min,
        warnings,
    }
}

/// Least-squares slope for fewer points than a regular fit accepts.
fn few_point_fit(xs: &[f64], ys: &[f64]) -> Option<FitResult> {
    if xs.len() < 3 {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| ln(*x)).collect();
    let ly: Vec<f64> = ys.iter().map(|y| ln(*y)).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - my - b * (x - mx)) * (y - my - b * (x - mx))).sum();
    Some(FitResult {
        exponent: b,
        intercept: my - b * mx,
        stderr: libm::sqrt(rss / (n - 2.0).max(1.0) / sxx).max(f64::EPSILON),
        window: [xs.iter().cloned().fold(f64::MAX, f64::min), xs.iter().cloned().fold(f64::MIN, f64::max)],
        points: xs.len(),
        method: super::fit::FitMethod::LeastSquares,
        warning: Some(format!("only {} points", xs.len())),
    })
}
