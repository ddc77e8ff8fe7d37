use flatcusp_core::geometry::*;
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn profile_at_flat_point_vanishes() {
    let p = CuspProfile::new(3.0, 0.5, Side::Upper).unwrap();
    assert_eq!(cusp_profile_eval(0.0, &p).unwrap(), (0.0, 0.0, 0.0));
}

#[test]
fn profile_at_half() {
    let p = CuspProfile::new(3.0, 0.5, Side::Upper).unwrap();
    let (z, dz, d2z) = cusp_profile_eval(0.5, &p).unwrap();
    assert!(close(z, 0.125 / 3.0, 1e-16));
    assert!(close(dz, 0.25, 1e-16));
    assert!(close(d2z, 1.0, 1e-15));
    let q = CuspProfile::new(3.0, 0.5, Side::Lower).unwrap();
    let (zl, dzl, d2zl) = cusp_profile_eval(0.5, &q).unwrap();
    assert_eq!((zl, dzl, d2zl), (-z, -dz, -d2z));
}

#[test]
fn profile_outside_chart_is_a_domain_error() {
    let p = CuspProfile { beta: 3.0, eps0: 1.0, side: Side::Upper };
    assert!(matches!(cusp_profile_eval(1.2, &p), Err(GeometryError::Domain { .. })));
    assert!(matches!(cusp_profile_eval(-0.1, &p), Err(GeometryError::Domain { .. })));
}

#[test]
fn curvature_examples() {
    let t = build_table(&TableConfig::default()).unwrap();
    assert_eq!(t.boundary_curvature(t.r_f), 0.0);
    assert!(close(cusp_curvature(3.0, 1.0), 2.0 / 2f64.powf(1.5), 1e-15));
    let k = cusp_curvature(3.0, 0.1);
    assert!(close(k, 0.2 * (1.0 + 1e-4f64).powf(-1.5), 1e-15));
    assert!(close(k, 0.2, 1e-4));
    // The table reports the same curvature along the chart.
    let bp = t.point_on_arc(ARC_CUSP_UPPER, 0.1);
    assert!(close(t.boundary_curvature(bp.r), k, 1e-12));
}

#[test]
fn arclength_examples() {
    let p = CuspProfile::new(3.0, 0.5, Side::Upper).unwrap();
    assert_eq!(arclength_from_s(0.0, &p).unwrap(), 0.0);
    let d = arclength_from_s(0.1, &p).unwrap() - 0.1;
    assert!(d > 0.0 && d < 1e-5, "{d}");
}

#[test]
fn default_table_invariants() {
    let t = build_table(&TableConfig::default()).unwrap();
    let r = &t.report;
    assert!(r.passed(), "{:?}", r.failures);
    assert!(r.perpendicularity_residual < 1e-10);
    assert!(r.c1_max_mismatch < 1e-10);
    assert!(r.k_min > 0.0);
    assert!(close(t.point_d[0], 0.8, 1e-15) && t.point_d[1].abs() < 1e-15);
}

#[test]
fn off_axis_wall_fails_perpendicularity() {
    let cfg = TableConfig { wall_center_y: 0.05, ..TableConfig::default() };
    match build_table(&cfg) {
        Err(GeometryError::Invariant(rep)) => {
            assert!(rep.perpendicularity_residual > 1e-3);
            assert!(rep.failures.iter().any(|f| f.contains("axis condition")), "{:?}", rep.failures);
        }
        other => panic!("expected an invariant failure, got {other:?}"),
    }
}

#[test]
fn beta_two_is_rejected() {
    assert!(matches!(build_table(&TableConfig::with_beta(2.0)), Err(GeometryError::BetaOutOfScope(_))));
    assert!(CuspProfile::new(2.0, 0.5, Side::Upper).is_err());
}

#[test]
fn curvature_vanishes_at_rate_beta_minus_two() {
    for beta in [2.5, 3.0, 4.0] {
        let xs: Vec<f64> = (0..=40).map(|i| 1e-3 * 100f64.powf(i as f64 / 40.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|&s| cusp_curvature(beta, s)).collect();
        let f = flatcusp_core::stats::power_law_fit(&xs, &ys, None, None).unwrap();
        assert!(((f.exponent - (beta - 2.0)) / (beta - 2.0)).abs() < 0.01, "β = {beta}: {}", f.exponent);
    }
}

#[test]
fn tangent_continuous_at_joins() {
    for beta in [2.5, 3.0, 4.0] {
        let t = build_table(&TableConfig::with_beta(beta)).unwrap();
        assert!(t.report.c1_max_mismatch < 1e-10, "β = {beta}");
        for j in &t.report.junctions {
            assert!(j.position_gap < 1e-10, "{j:?}");
            if matches!(j.kind, JunctionKind::C1) {
                assert!(j.tangent_turn < 1e-10, "{j:?}");
            }
        }
    }
}

proptest! {
    #[test]
    fn arclength_increasing_and_lipschitz(a in 0.0f64..0.5, b in 0.0f64..0.5) {
        let p = CuspProfile::new(3.0, 0.5, Side::Lower).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let la = arclength_from_s(lo, &p).unwrap();
        let lb = arclength_from_s(hi, &p).unwrap();
        prop_assert!(lb >= la);
        prop_assert!(lb - la >= hi - lo - 1e-15);
        prop_assert!(lb - la <= 2f64.sqrt() * (hi - lo) + 1e-15);
    }

    #[test]
    fn curvature_positive_inside_chart(s in 1e-6f64..0.5) {
        prop_assert!(cusp_curvature(3.0, s) > 0.0);
    }
}
