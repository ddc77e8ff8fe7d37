//! Time-averaged correlation functions along long billiard orbits.

use alloc::vec;
use alloc::vec::Vec;

use super::cells::sample_mu_point;
use super::fit::{power_law_fit, FitResult};
use super::rng::Stream;
use crate::dynamics::{collide, PhasePoint};
use crate::geometry::Table;
use crate::math::{cos, sin, sqrt, TAU};

/// `a cos θ + b sin θ` with `θ = 2π m r/|∂Q| + n φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrigTerm {
    pub a: f64,
    pub b: f64,
    pub m: i32,
    pub n: i32,
}

/// A real trigonometric polynomial in `r/|∂Q|` and `φ`.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Observable {
    pub constant: f64,
    pub terms: Vec<TrigTerm>,
}

impl Observable {
    pub fn constant(c: f64) -> Self {
        Observable { constant: c, terms: Vec::new() }
    }

    /// `cos(2π m r/|∂Q|)`.
    pub fn cos_r(m: i32) -> Self {
        Observable { constant: 0.0, terms: vec![TrigTerm { a: 1.0, b: 0.0, m, n: 0 }] }
    }

    /// `cos(n φ)`.
    pub fn cos_phi(n: i32) -> Self {
        Observable { constant: 0.0, terms: vec![TrigTerm { a: 1.0, b: 0.0, m: 0, n }] }
    }

    pub fn eval(&self, total_length: f64, r: f64, phi: f64) -> f64 {
        let u = TAU * r / total_length;
        self.constant
            + self
                .terms
                .iter()
                .map(|t| {
                    let th = t.m as f64 * u + t.n as f64 * phi;
                    t.a * cos(th) + t.b * sin(th)
                })
                .sum::<f64>()
    }

    /// `sup |f|` bound from the coefficients.
    pub fn bound(&self) -> f64 {
        libm::fabs(self.constant) + self.terms.iter().map(|t| sqrt(t.a * t.a + t.b * t.b)).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObservablePair {
    pub f: Observable,
    pub g: Observable,
}

/// Streaming estimator of `C_n = E[f·g∘𝓕ⁿ] − E f E g` over orbit segments,
/// with per-block sums for the block bootstrap.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrelationAccumulator {
    n_max: usize,
    block_len: usize,
    /// Last `n_max + 1` values of `f` in the current segment (ring buffer).
    ring: Vec<f64>,
    seg_len: usize,
    segments: usize,
    sum_f: f64,
    sum_g: f64,
    count: u64,
    blocks: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
struct Block {
    sum_f: f64,
    sum_g: f64,
    count: u64,
    /// `Σ f(t−n) g(t)` over `t` in the block.
    pair: Vec<f64>,
    pair_count: Vec<u64>,
}

impl Block {
    fn new(n_max: usize) -> Block {
        Block { sum_f: 0.0, sum_g: 0.0, count: 0, pair: vec![0.0; n_max + 1], pair_count: vec![0; n_max + 1] }
    }
}

impl CorrelationAccumulator {
    pub fn new(n_max: usize, block_len: usize) -> Self {
        CorrelationAccumulator {
            n_max,
            block_len: block_len.max(1),
            ring: vec![0.0; n_max + 1],
            seg_len: 0,
            segments: 0,
            sum_f: 0.0,
            sum_g: 0.0,
            count: 0,
            blocks: Vec::new(),
        }
    }

    pub fn samples(&self) -> u64 {
        self.count
    }

    /// Marks a break in the orbit; no pairs are formed across it.
    pub fn end_segment(&mut self) {
        if self.seg_len > 0 {
            self.segments += 1;
        }
        self.seg_len = 0;
    }

    pub fn push(&mut self, f: f64, g: f64) {
        let w = self.n_max + 1;
        if self.seg_len % self.block_len == 0 {
            self.blocks.push(Block::new(self.n_max));
        }
        let t = self.seg_len;
        self.ring[t % w] = f;
        let b = self.blocks.last_mut().unwrap();
        b.sum_f += f;
        b.sum_g += g;
        b.count += 1;
        let lags = self.n_max.min(t);
        for n in 0..=lags {
            b.pair[n] += self.ring[(t - n) % w] * g;
            b.pair_count[n] += 1;
        }
        self.sum_f += f;
        self.sum_g += g;
        self.count += 1;
        self.seg_len += 1;
    }

    /// Appends the blocks of `o` (whose segments are independent of ours).
    pub fn merge(&mut self, o: &CorrelationAccumulator) {
        assert_eq!(self.n_max, o.n_max);
        self.end_segment();
        self.segments += o.segments + usize::from(o.seg_len > 0);
        self.sum_f += o.sum_f;
        self.sum_g += o.sum_g;
        self.count += o.count;
        self.blocks.extend(o.blocks.iter().cloned());
    }

    fn estimate(blocks: &[&Block], n_max: usize) -> Vec<f64> {
        let mut sf = 0.0;
        let mut sg = 0.0;
        let mut c = 0u64;
        let mut pair = vec![0.0; n_max + 1];
        let mut pc = vec![0u64; n_max + 1];
        for b in blocks {
            sf += b.sum_f;
            sg += b.sum_g;
            c += b.count;
            for n in 0..=n_max {
                pair[n] += b.pair[n];
                pc[n] += b.pair_count[n];
            }
        }
        let mf = sf / c as f64;
        let mg = sg / c as f64;
        (0..=n_max).map(|n| if pc[n] > 0 { pair[n] / pc[n] as f64 - mf * mg } else { f64::NAN }).collect()
    }

    /// Point estimates with block-bootstrap standard errors from `reps`
    /// resamples drawn on `rng`.
    pub fn finish(&self, reps: usize, rng: &mut Stream) -> CorrelationCurve {
        let all: Vec<&Block> = self.blocks.iter().collect();
        let c = Self::estimate(&all, self.n_max);
        let nb = all.len();
        let mut s1 = vec![0.0; self.n_max + 1];
        let mut s2 = vec![0.0; self.n_max + 1];
        if nb > 1 {
            let mut pick: Vec<&Block> = Vec::with_capacity(nb);
            for _ in 0..reps {
                pick.clear();
                for _ in 0..nb {
                    pick.push(all[rng.below(nb as u64) as usize]);
                }
                let e = Self::estimate(&pick, self.n_max);
                for n in 0..=self.n_max {
                    s1[n] += e[n];
                    s2[n] += e[n] * e[n];
                }
            }
        }
        let stderr = (0..=self.n_max)
            .map(|n| {
                if nb > 1 && reps > 1 {
                    let m = s1[n] / reps as f64;
                    sqrt(((s2[n] / reps as f64 - m * m) * reps as f64 / (reps - 1) as f64).max(0.0))
                } else {
                    f64::NAN
                }
            })
            .collect();
        CorrelationCurve {
            c,
            stderr,
            mean_f: self.sum_f / self.count as f64,
            mean_g: self.sum_g / self.count as f64,
            samples: self.count,
            segments: self.segments + usize::from(self.seg_len > 0),
            blocks: nb,
            restarts: 0,
            envelope_fit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrelationCurve {
    /// `C_n` for `n = 0..=n_max`.
    pub c: Vec<f64>,
    pub stderr: Vec<f64>,
    pub mean_f: f64,
    pub mean_g: f64,
    pub samples: u64,
    pub segments: usize,
    pub blocks: usize,
    /// Orbit restarts after singular collisions.
    pub restarts: u64,
    pub envelope_fit: Option<FitResult>,
}

impl CorrelationCurve {
    /// `E(n) = max_{n ≤ m ≤ n_max} |C_m|`.
    pub fn envelope(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.c.len()];
        let mut run = 0.0f64;
        for n in (0..self.c.len()).rev() {
            run = run.max(libm::fabs(self.c[n]));
            e[n] = run;
        }
        e
    }

    /// Power-law fit of the envelope over `lo ≤ n ≤ hi`.
    pub fn fit_envelope(&self, lo: usize, hi: usize) -> Option<FitResult> {
        let e = self.envelope();
        let hi = hi.min(self.c.len() - 1);
        let xs: Vec<f64> = (lo..=hi).map(|n| n as f64).collect();
        let ys: Vec<f64> = (lo..=hi).map(|n| e[n]).collect();
        power_law_fit(&xs, &ys, None, None).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CorrelationConfig {
    pub n_max: usize,
    pub orbit_length: u64,
    pub burn_in: u64,
    /// Block length in units of `n_max`.
    pub block_factor: usize,
    pub bootstrap_reps: usize,
    pub fit_lo: usize,
    pub fit_hi: usize,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        CorrelationConfig {
            n_max: 200,
            orbit_length: 10_000_000,
            burn_in: 10_000,
            block_factor: 10,
            bootstrap_reps: 200,
            fit_lo: 10,
            fit_hi: 100,
        }
    }
}

/// Feeds `length` post-burn-in collisions of an orbit started from `μ` into
/// `acc`, restarting from a fresh draw after any singular collision. Returns
/// the number of restarts.
pub fn accumulate_orbit(
    table: &Table,
    pair: &ObservablePair,
    length: u64,
    burn_in: u64,
    rng: &mut Stream,
    acc: &mut CorrelationAccumulator,
) -> u64 {
    let l = table.total_length;
    let mut restarts = 0;
    let mut done = 0u64;
    'outer: while done < length {
        let mut x: PhasePoint = sample_mu_point(table, rng);
        for _ in 0..burn_in {
            match collide(table, &x) {
                Ok(ev) if ev.flags.is_empty() => x = ev.end,
                _ => {
                    restarts += 1;
                    continue 'outer;
                }
            }
        }
        while done < length {
            acc.push(pair.f.eval(l, x.r, x.phi), pair.g.eval(l, x.r, x.phi));
            done += 1;
            match collide(table, &x) {
                Ok(ev) if ev.flags.is_empty() => x = ev.end,
                _ => {
                    restarts += 1;
                    acc.end_segment();
                    continue 'outer;
                }
            }
        }
    }
    acc.end_segment();
    restarts
}

/// Single-orbit Birkhoff estimate of `C_n`, `n = 0..=n_max`, with
/// block-bootstrap errors and the envelope fit.
pub fn correlation_curve(table: &Table, pair: &ObservablePair, cfg: &CorrelationConfig, seed: u64, stream: u64) -> CorrelationCurve {
    let mut rng = Stream::new(seed, stream);
    let mut acc = CorrelationAccumulator::new(cfg.n_max, cfg.block_factor * cfg.n_max);
    let restarts = accumulate_orbit(table, pair, cfg.orbit_length, cfg.burn_in, &mut rng, &mut acc);
    let mut curve = acc.finish(cfg.bootstrap_reps, &mut rng);
    curve.restarts = restarts;
    curve.envelope_fit = curve.fit_envelope(cfg.fit_lo, cfg.fit_hi);
    curve
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iid_sequence_is_uncorrelated() {
        let n = 200_000;
        let mut rng = Stream::new(3, 0);
        let mut acc = CorrelationAccumulator::new(20, 200);
        for _ in 0..n {
            let u = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            acc.push(u, u);
        }
        let c = acc.finish(50, &mut Stream::new(3, 1));
        assert!(libm::fabs(c.c[0] - 1.0) < 1e-2);
        for k in 1..=20 {
            assert!(libm::fabs(c.c[k]) < 4.0 / libm::sqrt(n as f64), "C_{k} = {}", c.c[k]);
        }
    }

    #[test]
    fn ar1_correlations() {
        // x_{t+1} = ρ x_t + noise has C_n = ρⁿ Var x.
        let rho: f64 = 0.6;
        let mut rng = Stream::new(5, 0);
        let mut acc = CorrelationAccumulator::new(5, 50);
        let mut x = 0.0;
        for _ in 0..400_000 {
            x = rho * x + (rng.uniform() - 0.5);
            acc.push(x, x);
        }
        let c = acc.finish(20, &mut Stream::new(5, 1));
        let var = (1.0 / 12.0) / (1.0 - rho * rho);
        for k in 0..=5 {
            assert!(libm::fabs(c.c[k] - libm::pow(rho, k as f64) * var) < 0.01, "{k}: {}", c.c[k]);
            assert!(c.stderr[k] > 0.0 && c.stderr[k] < 0.01);
        }
    }

    #[test]
    fn merge_equals_single_pass_over_segments() {
        let mut rng = Stream::new(9, 0);
        let vals: Vec<f64> = (0..3000).map(|_| rng.uniform()).collect();
        let mut one = CorrelationAccumulator::new(4, 40);
        for v in &vals[..1500] {
            one.push(*v, *v);
        }
        one.end_segment();
        for v in &vals[1500..] {
            one.push(*v, *v);
        }
        let mut a = CorrelationAccumulator::new(4, 40);
        for v in &vals[..1500] {
            a.push(*v, *v);
        }
        let mut b = CorrelationAccumulator::new(4, 40);
        for v in &vals[1500..] {
            b.push(*v, *v);
        }
        a.merge(&b);
        let ca = a.finish(0, &mut Stream::new(0, 0));
        let c1 = one.finish(0, &mut Stream::new(0, 0));
        for k in 0..=4 {
            assert!(libm::fabs(ca.c[k] - c1.c[k]) < 1e-14);
        }
        assert_eq!(ca.segments, 2);
    }

    #[test]
    fn observables() {
        let f = Observable::cos_r(1);
        assert!(libm::fabs(f.eval(4.0, 1.0, 0.3)) < 1e-15);
        assert_eq!(Observable::constant(2.5).eval(4.0, 1.0, 0.3), 2.5);
        assert_eq!(f.bound(), 1.0);
    }
}
