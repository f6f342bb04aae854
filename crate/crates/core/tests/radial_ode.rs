use neckharm::geometry::*;
use neckharm::radial_ode::*;
use neckharm::sweep::SweepOptions;
use neckharm::Error;

fn geometry(s: f64) -> ModelGeometry {
    build_geometry(&GeometryConfig { s, ..Default::default() }).unwrap()
}

/// `r^nu * sum_k (m r / 2)^{2k} / (k! (nu+1)_k)`: the modified Bessel function of order `nu`
/// scaled to leading coefficient 1.
fn bessel_normalized(nu: f64, m: f64, r: f64) -> f64 {
    let x = 0.25 * m * m * r * r;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..60 {
        term *= x / (k as f64 * (nu + k as f64));
        sum += term;
    }
    r.powf(nu) * sum
}

#[test]
fn identity_zone_values() {
    let g = geometry(10.0);
    for (n, m, r, want) in [(1, 0, 0.25, 0.5), (3, 0, 0.25, 0.125)] {
        let mode = ModeIndex::new(n, m).unwrap();
        let op = RadialOperator::new(&g, mode);
        let sol = integrate_inm(&op, 1.0).unwrap();
        let v = sol.eval(r).unwrap().re;
        assert!((v / want - 1.0).abs() < 1e-8, "({n},{m}) {v}");
    }
}

#[test]
fn bessel_closed_forms() {
    let g = geometry(10.0);
    let cases: [(i32, i32, fn(f64) -> f64); 3] = [
        (1, 1, |r: f64| r.sinh() / r.sqrt()),
        (3, 1, |r: f64| 3.0 * (r.cosh() - r.sinh() / r) / r.sqrt()),
        (1, 2, |r: f64| (2.0 * r).sinh() / (2.0 * r.sqrt())),
    ];
    for (n, m, exact) in cases {
        let op = RadialOperator::new(&g, ModeIndex::new(n, m).unwrap());
        let sol = integrate_inm(&op, 1.0).unwrap();
        for r in [0.01, 0.1, 0.5, 0.9, 1.0] {
            let v = sol.eval(r).unwrap().re;
            let series = bessel_normalized(0.5 * n as f64, m as f64, r);
            // closed forms lose digits to cancellation at small r
            assert!((exact(r) / series - 1.0).abs() < 1e-9);
            assert!((v / series - 1.0).abs() < 1e-8, "({n},{m}) r={r}: {v} vs {series}");
        }
    }
    let op = RadialOperator::new(&g, ModeIndex::new(1, 1).unwrap());
    let v = integrate_inm(&op, 1.0).unwrap().eval(0.5).unwrap().re;
    // six-digit value, truncated
    assert!((v - 0.736_939).abs() < 2e-6);
}

#[test]
fn closed_form_in0_agrees_with_integration() {
    let g = geometry(10.0);
    assert!((closed_form_in0(&g, 1, 0.25).unwrap() - 0.5).abs() < 1e-14);
    assert_eq!(closed_form_in0(&g, 1, 0.0).unwrap(), 0.0);
    let ratio = closed_form_in0(&g, 1, g.r0() + 4.0).unwrap() / closed_form_in0(&g, 1, g.r0()).unwrap();
    assert!((ratio - 1f64.exp()).abs() < 1e-12);
    for n in [1, 3, 5] {
        let op = RadialOperator::new(&g, ModeIndex::new(n, 0).unwrap());
        let sol = integrate_inm(&op, g.r0() + g.s).unwrap();
        for r in [0.5, 1.5, 2.0, 4.0, 9.0, 14.0] {
            let v = sol.eval(r).unwrap().re;
            let cf = closed_form_in0(&g, n, r).unwrap();
            assert!((v / cf - 1.0).abs() < 1e-8, "n={n} r={r}");
        }
    }
    assert!(matches!(closed_form_in0(&g, 1, 20.0), Err(Error::Domain(_))));
    assert!(closed_form_in0(&g, 2, 1.0).is_err());
}

#[test]
fn positive_and_increasing() {
    let g = geometry(20.0);
    for (n, m) in [(1, 0), (1, 3), (3, 2), (5, 8)] {
        let op = RadialOperator::new(&g, ModeIndex::new(n, m).unwrap());
        let sol = integrate_inm(&op, g.r0() + g.s).unwrap();
        for i in 0..sol.len() {
            assert!(sol.values[i].re > 0.0 && sol.derivs[i].re > 0.0);
            if i > 0 {
                assert!(sol.ln_abs(i) > sol.ln_abs(i - 1));
            }
            assert!(sol.values[i].re.is_finite());
        }
    }
}

#[test]
fn log_representation_past_overflow() {
    let g = geometry(100.0);
    let op = RadialOperator::new(&g, ModeIndex::new(5, 8).unwrap());
    let sol = integrate_inm(&op, g.r0() + g.s).unwrap();
    let last = sol.len() - 1;
    assert!(sol.ln_abs(last) > 750.0);
    assert!(sol.value(last).re.is_infinite());
    assert!(sol.values[last].re.is_finite() && sol.log_scale[last] > 0.0);
}

#[test]
fn neck_coefficient_examples() {
    let g = geometry(10.0);
    let neck = (g.r0(), g.r0() + g.s);
    let fit = |n, m| {
        let op = RadialOperator::new(&g, ModeIndex::new(n, m).unwrap());
        neck_coefficients(&integrate_inm(&op, neck.1).unwrap(), neck).unwrap()
    };
    let f10 = fit(1, 0);
    assert!(f10.c_prime.abs() < 1e-8 && f10.c > 0.0);
    let f12 = fit(1, 2);
    assert!(f12.c > 0.0 && f12.c_prime > -1.0 && f12.c_prime <= 1.0);
    assert!(f12.residual < 1e-8);
}

#[test]
fn ratio_bound_examples() {
    let g = geometry(10.0);
    for s in [1.0, 5.0, 40.0] {
        assert!((ratio_bound(&g, 1, 0, s).unwrap() - 1.0).abs() < 1e-8);
    }
    let v = ratio_bound(&g, 1, 1, 20.0).unwrap();
    assert!(v > 0.0 && v <= 2.0);
    assert!((ratio_bound(&g, 3, 2, 1e-9).unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn ratio_bound_matches_direct_quotient() {
    let g = geometry(12.0);
    for (n, m) in [(1, 1), (3, 2), (5, 4)] {
        let mode = ModeIndex::new(n, m).unwrap();
        let op = RadialOperator::new(&g, mode);
        let sol = integrate_inm(&op, g.r0() + g.s).unwrap();
        let (a, b) = (sol.node(g.r0()).unwrap(), sol.node(g.r0() + g.s).unwrap());
        let direct = (sol.ln_abs(a) - sol.ln_abs(b) + mode.alpha() * g.s).exp();
        let formula = ratio_bound(&g, n, m, g.s).unwrap();
        assert!((direct / formula - 1.0).abs() < 1e-8, "({n},{m}) {direct} {formula}");
    }
}

#[test]
fn refinement_order_at_least_two() {
    let g = geometry(4.0);
    let op = RadialOperator::new(&g, ModeIndex::new(1, 2).unwrap());
    let reference = integrate_inm(&op, 6.0).unwrap();
    let probe = |h: f64| {
        let opts = SweepOptions { h, adaptive: false, ..Default::default() };
        let sol = integrate_inm_with(&op, 6.0, &opts).unwrap();
        [4.0, 6.0]
            .iter()
            .map(|&r| (sol.ln_abs(sol.node(r).unwrap()) - reference.ln_abs(reference.node(r).unwrap())).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (probe(0.1), probe(0.05));
    let order = (e1 / e2).log2();
    assert!(order >= 2.0, "errors {e1:e} {e2:e}, order {order}");
}

#[test]
fn even_modes_rejected() {
    assert!(matches!(ModeIndex::new(2, 0), Err(Error::Mode(_))));
    let (c, conj) = ModeIndex::new(-3, 2).unwrap().canonical();
    assert_eq!((c.n, c.m, conj), (3, -2, true));
}
