use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use flatcusp_core::corner::*;
use flatcusp_core::geometry::*;
use flatcusp_core::induced::*;
use flatcusp_core::stats::cells::sample_m_point;
use flatcusp_core::stats::Stream;

fn table() -> &'static Table {
    static T: OnceLock<Table> = OnceLock::new();
    T.get_or_init(|| build_table(&TableConfig::default()).unwrap())
}

fn report() -> &'static ExpansionReport {
    static R: OnceLock<ExpansionReport> = OnceLock::new();
    R.get_or_init(|| {
        let t = table();
        let (recs, _) = corner_ensemble(t, &CornerConfig::default(), &EnsembleConfig::default(), SeriesMode::Exact, 400, 3, 0);
        expansion_report(t, &recs, 5.0, 40).unwrap()
    })
}

/// Entry point and record of a series with `γ₁ = α₁ = N^(−0.6)`.
fn long_series(n: f64) -> (flatcusp_core::PhasePoint, CornerSeriesRecord) {
    let t = table();
    let a = n.powf(-0.6);
    let s1 = a.tan().sqrt();
    let x1 = cusp_state(t, Side::Upper, s1, a);
    let e = entry_before(t, &x1, 1_000_000).unwrap();
    let r = run_corner_series(t, &e, &CornerConfig::default()).unwrap();
    (e, r)
}

#[test]
fn far_from_the_cusp_is_in_m() {
    let t = table();
    let cfg = InducedConfig::default();
    let x = t.phase_point(t.r_d, 0.3);
    assert!(!x.is_cusp());
    assert!(in_m(t, &x, &cfg).unwrap());
    let s = return_map(t, &x, &cfg).unwrap();
    assert_eq!((s.r, s.cell), (1, 1));
    assert!(in_m(t, &s.exit, &cfg).unwrap());
}

#[test]
fn collisions_inside_a_long_run_are_not_in_m() {
    let t = table();
    let cfg = InducedConfig::default();
    let (e, r) = long_series(200.0);
    let k0 = cfg.series_cutoff;
    // Walk to the collision whose forward run has K₀ + 5 collisions left.
    let mut x = e;
    for _ in 0..(r.len - (k0 + 5) + 1) {
        x = flatcusp_core::billiard_map(t, &x).unwrap().0;
    }
    assert_eq!(run_forward(t, &x, 10 * k0).unwrap(), k0 + 5);
    assert!(!in_m(t, &x, &cfg).unwrap());
    assert!(in_m(t, &e, &cfg).unwrap());
}

#[test]
fn return_over_a_long_series() {
    let t = table();
    let cfg = InducedConfig::default();
    for n in [50.0, 500.0] {
        let (e, rec) = long_series(n);
        let s = return_map(t, &e, &cfg).unwrap();
        assert_eq!(s.cell, rec.len);
        assert_eq!(s.r, rec.len + 1);
        assert!(s.r >= s.cell);
        assert!(!s.exit.is_cusp());
        assert!(in_m(t, &s.exit, &cfg).unwrap());
        assert!((s.expansion / rec.expansion - 1.0).abs() < 1e-12);
    }
}

#[test]
fn returns_have_consistent_cells_and_expansion() {
    let t = table();
    let cfg = InducedConfig::default();
    let mut rng = Stream::new(21, 0);
    let mut long = 0;
    for _ in 0..20_000 {
        let (x, _) = sample_m_point(t, &cfg, &mut rng);
        let Ok(s) = return_map(t, &x, &cfg) else { continue };
        assert!(s.r >= 1 && s.expansion >= 1.0);
        if s.cell > 1 {
            long += 1;
            assert!(s.cell > cfg.series_cutoff);
            assert_eq!(s.r, s.cell + 1);
        } else {
            assert_eq!(s.r, 1);
        }
    }
    assert!(long > 0);
}

#[test]
fn single_flight_expansion_floor() {
    // K vanishes at the flat point, so the floor over all of ∂Q is Λ ≥ 1; with
    // the curvature floor of the other arcs it is 1 + τ K_min for a flight of
    // length τ ≥ τ_min leaving them.
    let t = table();
    let cfg = InducedConfig::default();
    let floor = 1.0 + t.tau_min * t.k_min;
    let mut rng = Stream::new(22, 0);
    let mut checked = 0;
    for _ in 0..50_000 {
        let (x, _) = sample_m_point(t, &cfg, &mut rng);
        let Ok(s) = return_map(t, &x, &cfg) else { continue };
        assert!(s.expansion >= 1.0);
        let d = (s.exit.pos[0] - x.pos[0]).hypot(s.exit.pos[1] - x.pos[1]);
        if s.r == 1 && !x.is_cusp() && d >= t.tau_min {
            assert!(s.expansion >= floor, "{} < {floor}", s.expansion);
            checked += 1;
        }
    }
    assert!(checked > 10_000);
}

#[test]
fn every_return_clears_the_one_collision_floor() {
    let t = table();
    let cfg = InducedConfig::default();
    let floor = 1.0 + t.tau_min * t.k_min;
    let mut rng = Stream::new(23, 0);
    let mut below = 0;
    let mut n = 0;
    for _ in 0..50_000 {
        let (x, _) = sample_m_point(t, &cfg, &mut rng);
        let Ok(s) = return_map(t, &x, &cfg) else { continue };
        n += 1;
        if s.expansion < floor {
            below += 1;
        }
    }
    println!("{below} of {n} returns below 1 + τ_min K_min = {floor}");
    assert_eq!(below, 0);
}

#[test]
fn f_preserves_mu_on_m() {
    let t = table();
    let cfg = InducedConfig::default();
    const NR: usize = 5;
    const NS: usize = 4;
    let bin = |x: &flatcusp_core::PhasePoint| {
        let i = ((x.r / t.total_length * NR as f64) as usize).min(NR - 1);
        let j = (((x.phi.sin() + 1.0) / 2.0 * NS as f64) as usize).min(NS - 1);
        (i, j)
    };
    let mut init = [[0u64; NS]; NR];
    let mut img = [[0u64; NS]; NR];
    let mut rng = Stream::new(24, 0);
    for _ in 0..1_000_000 {
        let (x, _) = sample_m_point(t, &cfg, &mut rng);
        let Ok(s) = return_map(t, &x, &cfg) else { continue };
        let (i, j) = bin(&x);
        init[i][j] += 1;
        let (i, j) = bin(&s.exit);
        img[i][j] += 1;
    }
    for i in 0..NR {
        for j in 0..NS {
            let (a, b) = (img[i][j] as f64, init[i][j] as f64);
            assert!((a - b).abs() < 3.0 * (a + b).sqrt(), "bin ({i}, {j}): {a} vs {b}");
        }
    }
}

#[test]
fn m_stays_away_from_grazing() {
    let t = table();
    let cfg = InducedConfig::default();
    let mut rng = Stream::new(25, 0);
    let pts: Vec<_> = (0..100_000).map(|_| sample_m_point(t, &cfg, &mut rng).0).collect();
    let phi_k0 = measure_phi_k0(&pts);
    println!("phi_K0 = pi/2 - {:.3e}", FRAC_PI_2 - phi_k0);
    assert!(phi_k0 < FRAC_PI_2);
    assert!(pts.iter().all(|x| x.phi.abs() <= phi_k0));
    let cfg2 = InducedConfig { phi_k0: Some(phi_k0), ..cfg };
    assert!(cfg2.validate().is_ok());
}

#[test]
fn grazing_collisions_enter_long_series() {
    let t = table();
    let cfg = InducedConfig::default();
    let mut rng = Stream::new(26, 0);
    let pts: Vec<_> = (0..2000)
        .map(|_| {
            let r = rng.uniform() * t.total_length;
            let sign = if rng.uniform() < 0.5 { 1.0 } else { -1.0 };
            t.phase_point(r, sign * (FRAC_PI_2 - 1e-6))
        })
        .collect();
    let g = grazing_check(t, &pts, &cfg);
    println!("{g:?}");
    assert!(g.passed(), "{} of {} near-grazing states have a short next run", g.samples - g.long - g.discarded, g.samples);
}

#[test]
fn strips() {
    assert_eq!(homogeneity_index(0.0, 5), 0);
    assert_eq!(homogeneity_index(FRAC_PI_2 - 1.0 / 36.5, 5), 6);
    // The boundary π/2 − 1/36 between strips 5 and 6 belongs to strip 6.
    assert_eq!(homogeneity_index(FRAC_PI_2 - 1.0 / 36.0, 5), 6);
    let mut prev = 0;
    for i in 0..=10_000 {
        let phi = FRAC_PI_2 * i as f64 / 10_000.0 * (1.0 - 1e-9);
        let k = homogeneity_index(phi, 5);
        assert_eq!(k, homogeneity_index(-phi, 5));
        assert!(k == 0 || k >= 5);
        assert!(k >= prev);
        prev = k;
    }
}

#[test]
fn expansion_law() {
    let r = report();
    println!(
        "Lambda ~ N^{:.3} ± {:.3} (alt seed {:.3}); segments {:?}",
        r.lambda_vs_n.exponent, r.lambda_vs_n.stderr, r.lambda_vs_n_alt.exponent, r.segment_exponents
    );
    assert!(r.lambda_vs_n.within(1.3, 0.1), "{}", r.lambda_vs_n.exponent);
}

#[test]
fn expansion_is_seed_insensitive() {
    let r = report();
    assert!(r.seed_insensitive, "{} vs {}", r.lambda_vs_n.exponent, r.lambda_vs_n_alt.exponent);
}

#[test]
fn entering_and_exiting_lambda_constants() {
    let r = report();
    let beta = table().beta;
    let a = entering_constant(beta);
    let b = exiting_constant(beta);
    assert!((a - 0.4).abs() < 1e-15 && (b - 0.6).abs() < 1e-15);
    assert!(((r.entering_a - a) / a).abs() <= 0.15, "{}", r.entering_a);
    assert!(((r.exiting_b - b) / b).abs() <= 0.15, "{}", r.exiting_b);
}

#[test]
fn lambda_recursion_matches_matrix_product() {
    let r = report();
    assert_eq!(r.matrix_product_checked, 40);
    assert!(r.matrix_product_max_rel < 1e-6, "{:e}", r.matrix_product_max_rel);
}

#[test]
fn entering_lambda_lower_bound_has_uniform_constants() {
    let r = report();
    println!("C3 = {:.4}, C4 = {:.4}, by decade {:?}", r.c3, r.c4, r.c4_by_decade);
    assert!(r.c3.is_finite() && r.c4.is_finite());
    assert!((r.c4_by_decade[1] - r.c4_by_decade[0]).abs() <= 1.0, "{:?}", r.c4_by_decade);
}

#[test]
fn expansion_factor_agrees_with_record() {
    let t = table();
    let (e, rec) = long_series(300.0);
    let (lam, steps) = expansion_factor(t, &e, 0.0).unwrap();
    assert_eq!(steps.len(), rec.len + 1);
    assert!((lam / rec.expansion - 1.0).abs() < 1e-12);
    let direct = stretch_matrix_product(t, &e, default_seed(t, &e), rec.len + 1).unwrap();
    assert!((direct / lam - 1.0).abs() < 1e-6);
}

#[test]
fn single_cell_curve_sums_to_its_inverse_expansion() {
    let t = table();
    let cfg = InducedConfig::default();
    let curve = singular_fan_curve(t);
    let (pieces, _) = cell_pieces(t, &curve, 60, 1.0, &cfg);
    let p = pieces.iter().max_by(|a, b| (a.t[1] - a.t[0]).total_cmp(&(b.t[1] - b.t[0]))).unwrap();
    let w = p.t[1] - p.t[0];
    let (a, b) = (p.t[0] + 0.45 * w, p.t[0] + 0.55 * w);
    let (sub, unresolved) = partition_curve(t, &curve, a, b, 1, usize::MAX, 2, &cfg);
    assert_eq!(unresolved, 0);
    assert_eq!(sub.len(), 1);
    assert_eq!(sub[0].cell, 60);
    let mut lam = f64::INFINITY;
    for f in [0.05, 0.5, 0.95] {
        let x = curve.point(t, a + f * (b - a));
        let b0 = curve.seed(&x);
        lam = lam.min(return_map_seeded(t, &x, &cfg, b0).unwrap().euclidean_stretch(b0));
    }
    assert!((1.0 / sub[0].lambda_min - 1.0 / lam).abs() < 1e-15);
}

#[test]
fn config_is_validated() {
    assert!(InducedConfig::default().validate().is_ok());
    assert!(InducedConfig { series_cutoff: 1, ..Default::default() }.validate().is_err());
    assert!(InducedConfig { run_cap: 5, ..Default::default() }.validate().is_err());
}
