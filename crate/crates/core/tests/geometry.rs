use neckharm::geometry::*;
use neckharm::Error;
use proptest::prelude::*;

fn default_geometry() -> ModelGeometry {
    build_geometry(&GeometryConfig::default()).unwrap()
}

#[test]
fn profile_zones() {
    let p = NeckProfile::new(1.0, 4.0, 0.5).unwrap();
    assert_eq!(p.eval(0.5).unwrap(), [0.5, 1.0, 0.0]);
    assert_eq!(p.eval(7.0).unwrap(), [2.0, 0.0, 0.0]);
    let [v, d, _] = p.eval(3.0).unwrap();
    assert_eq!((v, d), (2.0, 0.0));
    assert!(matches!(p.eval(-0.1), Err(Error::Domain(_))));
}

#[test]
fn profile_midpoint_of_window() {
    let p = NeckProfile::new(1.0, 4.0, 0.5).unwrap();
    let mid = 0.5 * (p.r_a + p.blend_end());
    let [v, d, _] = p.eval(mid).unwrap();
    assert!(v > 1.0 && v < 2.0, "{v}");
    assert!(d > 0.0 && d <= 1.0 + 1e-12, "{d}");
}

#[test]
fn profile_invariants_dense() {
    let p = NeckProfile::new(1.0, 4.0, 0.5).unwrap();
    let n = 20_000;
    let mut prev = 0.0;
    for k in 0..=n {
        let r = 5.0 * k as f64 / n as f64;
        let [v, d, _] = p.value(r);
        assert!(v >= prev - 1e-15, "not monotone at {r}");
        assert!(r == 0.0 || (v > 0.0 && v <= 2.0));
        assert!(d >= -1e-15);
        prev = v;
    }
}

#[test]
fn profile_derivatives_match_differences() {
    let p = NeckProfile::new(1.0, 4.0, 0.5).unwrap();
    let h = 1e-5;
    for k in 1..200 {
        let r = 0.9 + 1.2 * k as f64 / 200.0;
        let [_, d, dd] = p.value(r);
        let fd1 = (p.value(r + h)[0] - p.value(r - h)[0]) / (2.0 * h);
        let fd2 = (p.value(r + h)[1] - p.value(r - h)[1]) / (2.0 * h);
        assert!((d - fd1).abs() < 1e-7, "r = {r}");
        assert!((dd - fd2).abs() < 1e-5 * (1.0 + dd.abs()), "r = {r}");
    }
}

#[test]
fn profile_second_derivative_continuous() {
    let p = NeckProfile::new(1.0, 4.0, 0.5).unwrap();
    let n = 40_000;
    let mut prev = p.value(0.0)[2];
    for k in 1..=n {
        let cur = p.value(4.0 * k as f64 / n as f64)[2];
        assert!((cur - prev).abs() < 0.01, "jump in second derivative near {}", 4.0 * k as f64 / n as f64);
        prev = cur;
    }
}

#[test]
fn window_must_fit_before_r0() {
    let p = NeckProfile::new(1.0, 4.0, 0.5).unwrap();
    assert_eq!(p.blend_end(), 3.0);
    assert!(matches!(NeckProfile::new(0.2, 4.0, 0.5), Err(Error::Geometry(_))));
    assert!(NeckProfile::new(0.2, 4.5, 0.5).is_ok());
}

#[test]
fn profile_values_match_high_precision_reference() {
    // r~(r) for r_a = 1, computed with 30-digit quadrature of 1 - sigma
    let p = NeckProfile::new(1.0, 4.0, 0.5).unwrap();
    for (r, want) in [(1.5, 1.494_479_629_577_813_1), (2.0, 1.862_225_051_731_072_8), (2.9, 1.999_999_999_973_115_8)] {
        assert!((p.value(r)[0] - want).abs() < 1e-13, "r = {r}: {}", p.value(r)[0]);
    }
}

#[test]
fn metric_examples() {
    let g = default_geometry();
    let neck = g.metric_coeffs(g.r0() + 3.0).unwrap();
    assert_eq!(neck, NECK_METRIC);
    let edge = g.metric_coeffs(0.25).unwrap();
    assert_eq!((edge.rr, edge.tt), (1.0, 1.0));
    assert!((edge.pp - 0.25).abs() < 1e-15);
    let j = g.r0() + g.s;
    let a = g.metric_coeffs(j - 1e-10).unwrap();
    let b = g.metric_coeffs(j + 1e-10).unwrap();
    assert!((a.pp - b.pp).abs() < 1e-9 && (a.tt - b.tt).abs() < 1e-9);
    assert!(g.metric_coeffs(-1.0).is_err());
    assert!(g.metric_coeffs(g.r_total() + 1.0).is_err());
}

#[test]
fn volume_density_examples() {
    let g = default_geometry();
    assert!((g.volume_density(0.5).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(g.volume_density(g.r0() + 1.0).unwrap(), 4.0);
    assert!((g.volume_density(g.r0() + g.s).unwrap() - 4.0).abs() < 1e-12);
    let flat = g.with_interior(InteriorProfiles::flat(8.0));
    assert_eq!(flat.volume_density(g.r0() + g.s + 4.0).unwrap(), 4.0);
}

#[test]
fn build_defaults_and_errors() {
    let g = default_geometry();
    assert_eq!((g.r0(), g.s, g.closure), (4.0, 10.0, Closure::CappedEnd));
    let bad_s = GeometryConfig { s: 0.0, ..Default::default() };
    assert!(matches!(build_geometry(&bad_s), Err(Error::Geometry(_))));
    let bad_p = GeometryConfig { p: 3, ..Default::default() };
    assert!(matches!(build_geometry(&bad_p), Err(Error::UnsupportedClosure(3))));
    let bad_amp = GeometryConfig { profile_amplitude: 0.5, ..Default::default() };
    assert!(build_geometry(&bad_amp).is_err());
}

#[test]
fn seeded_interior_is_deterministic() {
    let a = InteriorProfiles::seeded(8.0, 0.3, 11).unwrap();
    let b = InteriorProfiles::seeded(8.0, 0.3, 11).unwrap();
    let c = InteriorProfiles::seeded(8.0, 0.3, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    let ([rp, rt], _) = a.eval(0.0);
    assert_eq!((rp, rt), (2.0, 1.0));
    let ([rp, rt], _) = a.eval(8.0);
    assert_eq!((rp, rt), (2.0, 1.0));
}

#[test]
fn regions_partition_span() {
    for p in [1, 2] {
        let g = build_geometry(&GeometryConfig { p, ..Default::default() }).unwrap();
        let regs = g.regions();
        assert_eq!(regs[0].lo, 0.0);
        for w in regs.windows(2) {
            assert_eq!(w[0].hi, w[1].lo);
        }
        assert!((regs.last().unwrap().hi - g.r_total()).abs() < 1e-12);
        assert_eq!(g.region_of(1.0).unwrap(), RegionKind::Boundary);
        assert_eq!(g.region_of(g.r0() + 1.0).unwrap(), RegionKind::Neck);
    }
}

#[test]
fn two_end_geometry_is_mirrored() {
    let g = build_geometry(&GeometryConfig { p: 2, ..Default::default() }).unwrap();
    let t = g.r_total();
    for r in [0.3, 1.5, 3.0, 6.0] {
        let a = g.metric_coeffs(r).unwrap();
        let b = g.metric_coeffs(t - r).unwrap();
        assert!((a.pp - b.pp).abs() < 1e-12);
        let da = g.coeffs_deriv(r).pp;
        let db = g.coeffs_deriv(t - r).pp;
        assert!((da + db).abs() < 1e-12);
    }
}

#[test]
fn node_grid_hits_breaks_and_edges() {
    let g = build_geometry(&GeometryConfig { p: 2, ..Default::default() }).unwrap();
    let nodes = node_grid(&g, 0.01, &[7.123]);
    assert!((nodes[0] - R_MIN).abs() < 1e-18);
    assert!((nodes[nodes.len() - 1] - (g.r_total() - R_MIN)).abs() < 1e-12);
    assert!(nodes.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 0.01 + 1e-12));
    for x in [4.0, 7.123, 14.0, 22.0, 32.0] {
        assert!(nodes.iter().any(|&n| (n - x).abs() < 1e-12), "missing {x}");
    }
}

#[test]
fn bump_integral_value() {
    // int_{-1}^{1} exp(1 - 1/(1-t^2)) dt
    assert!((bump_integral() - 1.206_900_322_437_876_2).abs() < 1e-12);
}

proptest! {
    #[test]
    fn stretch_consistency(s1 in 1.0f64..30.0, ds in 0.1f64..30.0, x in 0.0f64..1.0) {
        let g1 = build_geometry(&GeometryConfig { s: s1, ..Default::default() }).unwrap();
        let g2 = g1.with_s(s1 + ds).unwrap();
        let r = 4.0 * x;
        prop_assert_eq!(g1.metric_coeffs(r).unwrap(), g2.metric_coeffs(r).unwrap());
        let y = g1.r0() + s1 + 8.0 * x;
        let (a, b) = (g1.metric_coeffs(y).unwrap(), g2.metric_coeffs(y + ds).unwrap());
        // the two interior coordinates differ only by rounding of the translation
        prop_assert!((a.pp - b.pp).abs() < 1e-12 && (a.tt - b.tt).abs() < 1e-12);
    }

    #[test]
    fn profile_bounds_hold(r_a in 0.2f64..1.8, extra in 0.0f64..4.0, mu in 0.0f64..0.5, r in 0.0f64..10.0) {
        let r0 = 4.0 - r_a + mu + extra;
        let p = NeckProfile::new(r_a, r0, mu).unwrap();
        let [v, d, _] = p.value(r);
        prop_assert!(v <= 2.0 && d >= -1e-14);
        prop_assert!(r == 0.0 || v > 0.0);
        if r <= r_a { prop_assert_eq!(v, r); }
        if r >= r0 { prop_assert_eq!(v, 2.0); }
    }

    #[test]
    fn conformal_coefficients_bounded(r in 0.0f64..14.0) {
        let g = default_geometry();
        let p = g.profile.value(r.max(1e-9))[0];
        let inv = 1.0 / (p * p);
        prop_assert!(inv >= 0.25 - 1e-15);
        if r >= 1.0 { prop_assert!(inv <= 1.0 + 1e-12); }
    }

    #[test]
    fn interior_profiles_positive(seed in 0u64..1000, x in 0.0f64..8.0) {
        let p = InteriorProfiles::seeded(8.0, 0.3, seed).unwrap();
        let ([a, b], _) = p.eval(x);
        prop_assert!(a > 0.0 && b > 0.0);
    }
}
