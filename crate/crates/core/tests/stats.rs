use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::sync::OnceLock;

use flatcusp_core::geometry::*;
use flatcusp_core::induced::InducedConfig;
use flatcusp_core::stats::cells::{cell_chunk, CellStatistics};
use flatcusp_core::stats::correlation::*;
use flatcusp_core::stats::fit::{hill_tail, FitError};
use flatcusp_core::stats::transitions::*;
use flatcusp_core::stats::*;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn table() -> &'static Table {
    static T: OnceLock<Table> = OnceLock::new();
    T.get_or_init(|| build_table(&TableConfig::default()).unwrap())
}

#[test]
fn mu_sampler_has_cosine_angle_density() {
    let t = table();
    let pts = sample_mu(t, 1_000_000, 5, 0);
    const BINS: usize = 50;
    let mut h = [0u64; BINS];
    let mut hr = [0u64; BINS];
    for x in &pts {
        let u = (x.phi + FRAC_PI_2) / std::f64::consts::PI;
        h[((u * BINS as f64) as usize).min(BINS - 1)] += 1;
        hr[((x.r / t.total_length * BINS as f64) as usize).min(BINS - 1)] += 1;
    }
    let n = pts.len() as f64;
    let mut chi = 0.0;
    let mut chi_r = 0.0;
    for i in 0..BINS {
        let a = -FRAC_PI_2 + std::f64::consts::PI * i as f64 / BINS as f64;
        let b = -FRAC_PI_2 + std::f64::consts::PI * (i + 1) as f64 / BINS as f64;
        let e = n * (b.sin() - a.sin()) / 2.0;
        chi += (h[i] as f64 - e).powi(2) / e;
        let er = n / BINS as f64;
        chi_r += (hr[i] as f64 - er).powi(2) / er;
    }
    let d = ChiSquared::new((BINS - 1) as f64).unwrap();
    let (p, pr) = (1.0 - d.cdf(chi), 1.0 - d.cdf(chi_r));
    assert!(p > 0.01, "φ: χ² = {chi}, p = {p}");
    assert!(pr > 0.01, "r: χ² = {chi_r}, p = {pr}");
}

#[test]
fn mean_cosine_is_quarter_pi() {
    let v: Vec<f64> = sample_mu(table(), 200_000, 6, 0).iter().map(|x| x.phi.cos()).collect();
    let (m, se) = fit::mean_stderr(&v);
    assert!((m - FRAC_PI_4).abs() < 3.0 * se, "{m} ± {se}");
}

#[test]
fn sampling_is_deterministic_per_stream() {
    let t = table();
    let a = sample_mu(t, 1000, 9, 4);
    let b = sample_mu(t, 1000, 9, 4);
    assert!(a.iter().zip(&b).all(|(x, y)| x.r.to_bits() == y.r.to_bits() && x.phi.to_bits() == y.phi.to_bits()));
    let c = sample_mu(t, 1000, 9, 5);
    assert!(a.iter().zip(&c).any(|(x, y)| x.r != y.r));
}

#[test]
fn exact_power_law_is_recovered() {
    let xs: Vec<f64> = (1..=20).map(|i| i as f64 * 3.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-1.5)).collect();
    let f = power_law_fit(&xs, &ys, None, None).unwrap();
    assert!((f.exponent + 1.5).abs() < 1e-12);
    assert!((f.prefactor() - 3.0).abs() < 1e-10);
    assert!(f.stderr > 0.0);
    assert!(f.window[0] < f.window[1]);
}

#[test]
fn log_periodic_modulation_keeps_the_exponent() {
    let xs: Vec<f64> = (0..200).map(|i| 10f64.powf(i as f64 / 40.0)).collect();
    let ys: Vec<f64> = xs.iter().map(|x| (1.0 + 0.1 * x.ln().sin()) / x).collect();
    let f = power_law_fit(&xs, &ys, None, None).unwrap();
    assert!((f.exponent + 1.0).abs() < 0.05, "{}", f.exponent);
}

#[test]
fn fit_preconditions() {
    let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
    let ys: Vec<f64> = xs.iter().map(|x| 1.0 / x).collect();
    assert!(matches!(power_law_fit(&xs, &ys, None, Some([1.0, 5.0])), Err(FitError::TooFewPoints { got: 5, .. })));
    let mut bad = ys.clone();
    bad[3] = 0.0;
    assert!(matches!(power_law_fit(&xs, &bad, None, None), Err(FitError::Nonpositive { .. })));
    // Outside the window a nonpositive value is ignored.
    let mut xs2 = xs.to_vec();
    xs2.push(100.0);
    let mut ys2 = ys.clone();
    ys2.push(-1.0);
    assert!(power_law_fit(&xs2, &ys2, None, Some([1.0, 10.0])).is_ok());
}

#[test]
fn hill_estimator_on_pareto_samples() {
    let mut rng = Stream::new(11, 0);
    let v: Vec<f64> = (0..100_000).map(|_| rng.uniform_open().powf(-1.0 / 1.5)).collect();
    let f = hill_tail(&v, 5000).unwrap();
    assert!((f.exponent + 1.5).abs() < 4.0 * f.stderr, "{} ± {}", f.exponent, f.stderr);
}

#[test]
fn constant_observables_do_not_correlate() {
    let pair = ObservablePair { f: Observable::constant(0.7), g: Observable::constant(0.7) };
    let cfg = CorrelationConfig {
        n_max: 20,
        orbit_length: 100_000,
        burn_in: 100,
        bootstrap_reps: 20,
        fit_lo: 2,
        fit_hi: 20,
        ..Default::default()
    };
    let c = correlation_curve(table(), &pair, &cfg, 1, 0);
    let noise = 1.0 / (cfg.orbit_length as f64).sqrt();
    assert!(c.c.iter().all(|v| v.abs() < noise), "{:?}", c.c);
}

#[test]
fn lag_zero_is_the_variance() {
    let t = table();
    let f = Observable::cos_r(1);
    let mut rng = Stream::new(2, 0);
    let mut x = flatcusp_core::stats::cells::sample_mu_point(t, &mut rng);
    let mut vals = Vec::new();
    while vals.len() < 50_000 {
        vals.push(f.eval(t.total_length, x.r, x.phi));
        x = flatcusp_core::collide(t, &x).unwrap().end;
    }
    let mut acc = CorrelationAccumulator::new(10, 100);
    for &v in &vals {
        acc.push(v, v);
    }
    acc.end_segment();
    let c = acc.finish(10, &mut rng);
    let n = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    assert!((c.c[0] - var).abs() < 1e-12, "{} vs {var}", c.c[0]);
}

#[test]
fn iid_sequence_has_no_correlation() {
    let n = 1_000_000u64;
    let mut rng = Stream::new(13, 0);
    let mut acc = CorrelationAccumulator::new(50, 500);
    for _ in 0..n {
        let u = rng.uniform();
        acc.push(u, u);
    }
    acc.end_segment();
    let c = acc.finish(10, &mut rng);
    let bound = 4.0 / (n as f64).sqrt();
    for k in 1..=50 {
        assert!(c.c[k].abs() < bound, "C_{k} = {}", c.c[k]);
    }
    assert!((c.c[0] - 1.0 / 12.0).abs() < 1e-3);
}

fn tail_stats() -> &'static CellStatistics {
    static S: OnceLock<CellStatistics> = OnceLock::new();
    S.get_or_init(|| cell_chunk(table(), &InducedConfig::default(), 2_000_000, 0, 0, 31, 0))
}

#[test]
fn tail_counts_are_consistent() {
    let st = tail_stats();
    let k0 = InducedConfig::default().series_cutoff;
    assert_eq!(st.cells.values().sum::<u64>(), st.ensemble);
    assert_eq!(st.returns.values().sum::<u64>(), st.ensemble);
    // R = cell + 1 on long runs, so R ≥ N + 1 exactly when the cell is ≥ N.
    for n in [k0 + 1, 20, 50, 200, 1000] {
        assert_eq!(st.tail_m_count(n + 1), st.cell_count_range(n, usize::MAX), "N = {n}");
    }
    let mut prev = 1.0;
    for n in 1..2000 {
        let (p, _) = st.tail_m(n);
        assert!(p <= prev);
        prev = p;
    }
    let total: f64 = st.cells.keys().map(|&n| st.mu_cell(n).0).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn tail_fits_carry_window_warnings() {
    let r = tail_and_cells(tail_stats(), &InducedConfig::default());
    let f = r.m_tail_fit.as_ref().unwrap();
    assert!(f.warning.as_deref().is_some_and(|w| w.contains("decades")));
    assert!(f.exponent < -1.0 && f.stderr > 0.0);
    assert!(r.full_tail_fit.is_none());
}

#[test]
fn tail_exponents_are_spaced_by_one() {
    let t = table();
    let cfg = InducedConfig::default();
    let st = cell_chunk(t, &cfg, 10_000_000, 20_000, 100_000, 32, 0);
    let r = tail_and_cells(&st, &cfg);
    let z = r.spacing_z.unwrap();
    println!(
        "cell {:.3}, M-tail {:.3}, full tail {:.3}; z = {z:?}",
        r.cell_fit.as_ref().unwrap().exponent,
        r.m_tail_fit.as_ref().unwrap().exponent,
        r.full_tail_fit.as_ref().unwrap().exponent
    );
    assert!(z.iter().all(|z| z.abs() <= 3.0), "{z:?}");
}

#[test]
fn transition_support_and_exponent() {
    let t = table();
    let cfg = InducedConfig::default();
    let s = collect_cell_sequences(t, &cfg, 10_000_000, 100, 7, 0);
    assert_eq!(s.returns, 10_000_000);
    assert_eq!(s.segments.iter().map(|v| v.len() as u64).sum::<u64>(), s.returns);
    let r = transition_stats(&s, 3.0, &cfg, &TransitionConfig::default());
    assert!(r.c2_global.is_finite() && r.c2_global > 0.0);
    for b in &r.bands {
        assert!(b.c2 <= r.c2_global);
        assert!(b.c1 > 0.0);
    }
    let f = r.m_exponent.as_ref().unwrap();
    assert!(f.within(-1.9, 0.2), "{} ± {}", f.exponent, f.stderr);
    assert!(r.c2_stable, "{:?}", r.c2_equal);
    assert!(r.escape_fit.as_ref().unwrap().exponent < 0.0);
}

#[test]
fn sparse_transition_bands_are_flagged() {
    let t = table();
    let cfg = InducedConfig::default();
    let s = collect_cell_sequences(t, &cfg, 20_000, 10, 8, 0);
    let r = transition_stats(&s, 3.0, &cfg, &TransitionConfig::default());
    assert!(!r.warnings.is_empty());
}

fn arb_stats() -> impl Strategy<Value = CellStatistics> {
    proptest::collection::vec((1usize..500, 1usize..400), 0..60).prop_map(|v| {
        let mut st = CellStatistics::default();
        for (r, c) in v {
            st.add_return(r, c);
            st.add_full(if r % 7 == 0 { None } else { Some(r) });
        }
        st
    })
}

proptest! {
    #[test]
    fn merge_is_order_independent(a in arb_stats(), b in arb_stats(), c in arb_stats()) {
        let mut x = a.clone();
        x.merge(&b);
        x.merge(&c);
        let mut y = c.clone();
        y.merge(&a);
        y.merge(&b);
        prop_assert_eq!(x, y);
    }

    #[test]
    fn tails_are_nonincreasing(a in arb_stats()) {
        let mut prev = u64::MAX;
        for n in 1..510 {
            let c = a.tail_m_count(n);
            prop_assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn stream_range_stays_in_bounds(seed in any::<u64>(), lo in -10.0f64..10.0, w in 1e-6f64..10.0) {
        let mut rng = Stream::new(seed, 0);
        for _ in 0..50 {
            let x = rng.range(lo, lo + w);
            prop_assert!(x >= lo && x < lo + w);
            let u = rng.uniform_open();
            prop_assert!(u > 0.0 && u < 1.0);
        }
    }
}
