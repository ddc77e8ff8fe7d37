//! Sampling of the invariant measure, cell measures and return-time tails.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use super::fit::{hill_tail, power_law_fit, FitResult};
use super::rng::Stream;
use crate::dynamics::PhasePoint;
use crate::geometry::Table;
use crate::induced::{hitting_time, in_m, return_map, InducedConfig, InducedError};
use crate::math::{asin, ln, pow, sqrt};

/// One draw from `dμ = (2|∂Q|)⁻¹ cos φ dr dφ`: uniform `r` and
/// `φ = arcsin(2u − 1)`.
pub fn sample_mu_point(table: &Table, rng: &mut Stream) -> PhasePoint {
    loop {
        let r = table.total_length * rng.uniform();
        let phi = asin(2.0 * rng.uniform_open() - 1.0);
        let x = table.phase_point(r, phi);
        if !x.is_grazing() {
            return x;
        }
    }
}

/// `count` i.i.d. draws from `μ` on stream `(seed, stream)`.
pub fn sample_mu(table: &Table, count: usize, seed: u64, stream: u64) -> Vec<PhasePoint> {
    let mut rng = Stream::new(seed, stream);
    (0..count).map(|_| sample_mu_point(table, &mut rng)).collect()
}

/// One draw from `μ` conditioned on `M`, rejecting undecidable points.
/// Returns the point and the number of rejected draws.
pub fn sample_m_point(table: &Table, cfg: &InducedConfig, rng: &mut Stream) -> (PhasePoint, u64) {
    let mut rejected = 0;
    loop {
        let x = sample_mu_point(table, rng);
        match in_m(table, &x, cfg) {
            Ok(true) => return (x, rejected),
            _ => rejected += 1,
        }
    }
}

/// Counts behind the cell and tail estimates. All maps are histograms keyed
/// by the integer value.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellStatistics {
    /// Returns sampled from `μ_M`.
    pub ensemble: u64,
    /// Cell index of each return (1 = no long run).
    pub cells: BTreeMap<usize, u64>,
    /// Return time of each return.
    pub returns: BTreeMap<usize, u64>,
    /// `μ` draws rejected from `M` or discarded as singular.
    pub rejected: u64,
    pub discarded: u64,
    /// Draws from `μ` on the whole phase space.
    pub full_ensemble: u64,
    /// Hitting time of `M` for each full-space draw.
    pub full_returns: BTreeMap<usize, u64>,
    /// Full-space draws whose run exceeded the cap (counted as `R ≥ cap`).
    pub full_censored: u64,
    pub full_cap: usize,
    pub full_discarded: u64,
}

fn bump(map: &mut BTreeMap<usize, u64>, k: usize, by: u64) {
    *map.entry(k).or_insert(0) += by;
}

impl CellStatistics {
    pub fn add_return(&mut self, r: usize, cell: usize) {
        self.ensemble += 1;
        bump(&mut self.cells, cell, 1);
        bump(&mut self.returns, r, 1);
    }

    /// Adds a full-space hitting time; `None` marks a censored draw.
    pub fn add_full(&mut self, r: Option<usize>) {
        self.full_ensemble += 1;
        match r {
            Some(r) => bump(&mut self.full_returns, r, 1),
            None => self.full_censored += 1,
        }
    }

    /// Combines partial statistics; the result does not depend on the
    /// merge order.
    pub fn merge(&mut self, o: &CellStatistics) {
        self.ensemble += o.ensemble;
        self.rejected += o.rejected;
        self.discarded += o.discarded;
        self.full_ensemble += o.full_ensemble;
        self.full_censored += o.full_censored;
        self.full_discarded += o.full_discarded;
        self.full_cap = self.full_cap.max(o.full_cap);
        for (k, v) in &o.cells {
            bump(&mut self.cells, *k, *v);
        }
        for (k, v) in &o.returns {
            bump(&mut self.returns, *k, *v);
        }
        for (k, v) in &o.full_returns {
            bump(&mut self.full_returns, *k, *v);
        }
    }

    fn frac(count: u64, n: u64) -> (f64, f64) {
        if n == 0 {
            return (f64::NAN, f64::NAN);
        }
        let p = count as f64 / n as f64;
        (p, sqrt(p * (1.0 - p) / n as f64))
    }

    /// `μ̂_M(M_N)` with its binomial standard error.
    pub fn mu_cell(&self, n: usize) -> (f64, f64) {
        Self::frac(self.cells.get(&n).copied().unwrap_or(0), self.ensemble)
    }

    pub fn cell_count_range(&self, lo: usize, hi: usize) -> u64 {
        self.cells.range(lo..hi).map(|(_, v)| v).sum()
    }

    /// Count of returns with `R ≥ n`.
    pub fn tail_m_count(&self, n: usize) -> u64 {
        self.returns.range(n..).map(|(_, v)| v).sum()
    }

    /// `μ̂_M(R ≥ N)`.
    pub fn tail_m(&self, n: usize) -> (f64, f64) {
        Self::frac(self.tail_m_count(n), self.ensemble)
    }

    pub fn tail_full_count(&self, n: usize) -> u64 {
        let censored = if n <= self.full_cap { self.full_censored } else { 0 };
        self.full_returns.range(n..).map(|(_, v)| v).sum::<u64>() + censored
    }

    /// `μ̂(R ≥ N)` on the full phase space.
    pub fn tail_full(&self, n: usize) -> (f64, f64) {
        Self::frac(self.tail_full_count(n), self.full_ensemble)
    }

    pub fn max_cell(&self) -> usize {
        self.cells.keys().next_back().copied().unwrap_or(0)
    }
}

/// Samples `count` returns from `μ_M` and `full_count` hitting times from
/// `μ` on one stream.
pub fn cell_chunk(
    table: &Table,
    cfg: &InducedConfig,
    count: usize,
    full_count: usize,
    full_cap: usize,
    seed: u64,
    stream: u64,
) -> CellStatistics {
    let mut rng = Stream::new(seed, stream);
    let mut st = CellStatistics { full_cap, ..Default::default() };
    let mut done = 0;
    while done < count {
        let (x, rej) = sample_m_point(table, cfg, &mut rng);
        st.rejected += rej;
        match return_map(table, &x, cfg) {
            Ok(s) => {
                st.add_return(s.r, s.cell);
                done += 1;
            }
            Err(_) => st.discarded += 1,
        }
    }
    for _ in 0..full_count {
        let x = sample_mu_point(table, &mut rng);
        match hitting_time(table, &x, cfg, full_cap) {
            Ok(r) => st.add_full(Some(r)),
            Err(InducedError::Capped(_)) => st.add_full(None),
            Err(_) => st.full_discarded += 1,
        }
    }
    st
}

/// One point of a binned or cumulative curve.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvePoint {
    pub n: f64,
    pub value: f64,
    pub stderr: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TailReport {
    pub ensemble: u64,
    pub full_ensemble: u64,
    /// `μ̂_M(M_N)` per integer, averaged over log bins.
    pub cell_curve: Vec<CurvePoint>,
    pub m_tail_curve: Vec<CurvePoint>,
    pub full_tail_curve: Vec<CurvePoint>,
    pub cell_fit: Option<FitResult>,
    pub m_tail_fit: Option<FitResult>,
    pub full_tail_fit: Option<FitResult>,
    /// Advisory Hill estimate of the `μ_M` return-time tail.
    pub m_tail_hill: Option<FitResult>,
    /// `(m − c − 1)/σ` and `(f − m − 1)/σ` for the cell, `M`-tail and
    /// full-tail exponents `c, m, f`, each over its joint standard error.
    pub spacing_z: Option<[f64; 2]>,
}

/// Minimum count per bin for a bin to enter a fit window.
pub const MIN_BIN_COUNT: u64 = 50;
pub const BINS_PER_DECADE: usize = 8;

/// Geometric bin edges starting at `lo` up to at least `hi`.
fn log_edges(lo: usize, hi: usize) -> Vec<usize> {
    let mut e = alloc::vec![lo];
    let mut k = 1;
    while *e.last().unwrap() <= hi {
        let next = (lo as f64 * pow(10.0, k as f64 / BINS_PER_DECADE as f64)) as usize;
        if next > *e.last().unwrap() {
            e.push(next);
        }
        k += 1;
    }
    e
}

/// Longest leading run of points with `count ≥ MIN_BIN_COUNT`, fitted.
fn fit_leading(curve: &[CurvePoint], weighted: bool) -> Option<FitResult> {
    let good: Vec<&CurvePoint> = curve.iter().take_while(|p| p.count >= MIN_BIN_COUNT && p.value > 0.0).collect();
    let xs: Vec<f64> = good.iter().map(|p| p.n).collect();
    let ys: Vec<f64> = good.iter().map(|p| p.value).collect();
    let sig: Vec<f64> = good.iter().map(|p| p.stderr).collect();
    let mut f = power_law_fit(&xs, &ys, if weighted { Some(&sig) } else { None }, None).ok()?;
    let decades = libm::log10(f.window[1] / f.window[0]);
    if decades < 5.0 {
        f.warning = Some(format!("fit window spans {decades:.2} decades (< 5)"));
    }
    Some(f)
}

/// Cell-measure and tail curves with their power-law fits.
///
/// Cells are binned geometrically from `K₀ + 1`; the tail curves are
/// evaluated at the bin edges. Each fit uses the leading bins holding at
/// least [`MIN_BIN_COUNT`] samples.
pub fn tail_and_cells(st: &CellStatistics, cfg: &InducedConfig) -> TailReport {
    let lo = cfg.series_cutoff + 1;
    let edges = log_edges(lo, st.max_cell().max(lo + 1));
    let mut cell_curve = Vec::new();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let c = st.cell_count_range(a, b);
        let width = (b - a) as f64;
        let (p, se) = CellStatistics::frac(c, st.ensemble);
        // Geometric centre of the integers a..b.
        let centre = libm::exp(0.5 * (ln(a as f64) + ln((b - 1) as f64)));
        cell_curve.push(CurvePoint { n: centre, value: p / width, stderr: se / width, count: c });
    }
    let m_tail_curve: Vec<CurvePoint> = edges
        .iter()
        .map(|&n| {
            let (p, se) = st.tail_m(n + 1);
            CurvePoint { n: (n + 1) as f64, value: p, stderr: se, count: st.tail_m_count(n + 1) }
        })
        .collect();
    let full_edges = log_edges(2, st.full_returns.keys().next_back().copied().unwrap_or(2).max(st.full_cap).max(3));
    let full_tail_curve: Vec<CurvePoint> = full_edges
        .iter()
        .filter(|&&n| n >= lo)
        .map(|&n| {
            let (p, se) = st.tail_full(n);
            CurvePoint { n: n as f64, value: p, stderr: se, count: st.tail_full_count(n) }
        })
        .collect();

    let cell_fit = fit_leading(&cell_curve, true);
    let m_tail_fit = fit_leading(&m_tail_curve, false);
    let full_tail_fit = fit_leading(&full_tail_curve, false);

    let mut long_r: Vec<f64> = Vec::new();
    for (r, c) in st.returns.range(lo + 1..) {
        for _ in 0..*c {
            long_r.push(*r as f64);
        }
    }
    let k = long_r.len() / 4;
    let m_tail_hill = hill_tail(&long_r, k).ok();

    let spacing_z = match (&cell_fit, &m_tail_fit, &full_tail_fit) {
        (Some(c), Some(m), Some(f)) => {
            let z1 = (m.exponent - c.exponent - 1.0) / sqrt(m.stderr * m.stderr + c.stderr * c.stderr);
            let z2 = (f.exponent - m.exponent - 1.0) / sqrt(f.stderr * f.stderr + m.stderr * m.stderr);
            Some([z1, z2])
        }
        _ => None,
    };
    TailReport {
        ensemble: st.ensemble,
        full_ensemble: st.full_ensemble,
        cell_curve,
        m_tail_curve,
        full_tail_curve,
        cell_fit,
        m_tail_fit,
        full_tail_fit,
        m_tail_hill,
        spacing_z,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_edges_increase() {
        let e = log_edges(11, 5000);
        assert_eq!(e[0], 11);
        assert!(e.windows(2).all(|w| w[1] > w[0]));
        assert!(*e.last().unwrap() > 5000);
    }

    #[test]
    fn tails_are_sums_of_counts() {
        let mut st = CellStatistics::default();
        for (r, cell) in [(1, 1), (1, 1), (13, 12), (21, 20), (21, 20), (101, 100)] {
            st.add_return(r, cell);
        }
        assert_eq!(st.tail_m_count(1), 6);
        assert_eq!(st.tail_m_count(13), 4);
        assert_eq!(st.tail_m_count(22), 1);
        let (p, _) = st.mu_cell(20);
        assert!(libm::fabs(p - 2.0 / 6.0) < 1e-15);
        let mut a = st.clone();
        a.merge(&st);
        assert_eq!(a.tail_m_count(13), 8);
        assert_eq!(a.ensemble, 12);
    }
}
