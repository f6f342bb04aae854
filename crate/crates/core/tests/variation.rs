use neckharm::fit::decay_check;
use neckharm::geometry::*;
use neckharm::green_maps::*;
use neckharm::mode_solver::*;
use neckharm::radial_ode::ModeIndex;
use neckharm::sweep::{self, Source, SweepOptions};
use neckharm::variation::*;
use neckharm::Error;
use num_complex::Complex64;

fn geometry(s: f64, p: u32) -> ModelGeometry {
    build_geometry(&GeometryConfig { s, p, ..Default::default() }).unwrap()
}

fn mode(n: i32, m: i32) -> ModeIndex {
    ModeIndex::new(n, m).unwrap()
}

fn neck(g: &ModelGeometry) -> (f64, f64) {
    (g.r0(), g.r0() + g.s)
}

fn tensors(eta: Eta, g: &ModelGeometry) -> Vec<VariationTensor> {
    vec![
        stretch_tensor(eta, neck(g)).unwrap(),
        VariationTensor::new(eta, Diag { rr: 0.3, pp: 1.0, tt: 0.0 }),
        VariationTensor::new(eta, Diag { rr: 0.5, pp: -2.0, tt: 0.7 }),
        VariationTensor::new(eta, Diag { rr: 0.0, pp: 0.0, tt: 1.5 }),
    ]
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(a.norm())
}

#[test]
fn stretch_profile_is_checked() {
    let g = geometry(10.0, 1);
    let eta = Eta::normalized(g.r0() + 3.0, 1.0);
    assert!((eta.integral() - 1.0).abs() < 1e-14);
    assert!(stretch_tensor(eta, neck(&g)).is_ok());
    let off = Eta { scale: eta.scale * (1.0 + 1e-8), ..eta };
    assert!(matches!(stretch_tensor(off, neck(&g)), Err(Error::Precondition(_))));
    let outside = Eta::normalized(g.r0() + 0.5, 1.0);
    assert!(matches!(stretch_tensor(outside, neck(&g)), Err(Error::Precondition(_))));
}

#[test]
fn stretched_metric_is_a_longer_neck() {
    let g = geometry(10.0, 1);
    let eta = Eta::normalized(g.r0() + 3.0, 1.5);
    let tensor = stretch_tensor(eta, neck(&g)).unwrap();
    for md in [mode(1, 0), mode(1, 2), mode(3, 1)] {
        let spec = SourceSpec::seeded("stretch", 11, &[md], 8.0).unwrap();
        let f = spec.profile(md, g.interior_origin());
        for t in [0.3, -0.2] {
            let stretched = perturbed_coefficient(&g, md, &f, &tensor, t).unwrap();
            let longer = g.with_s(stretched_length(g.s, eta, t)).unwrap();
            let direct = mode_coefficients(&longer, &spec, &[md]).unwrap().get(0, md).unwrap();
            assert!(rel(stretched, direct) < 1e-7, "{md:?}, t = {t}: {stretched} vs {direct}");
        }
    }
}

#[test]
fn first_order_response_ignores_the_stretch_profile() {
    let g = geometry(10.0, 1);
    let md = mode(1, 1);
    let spec = SourceSpec::seeded("profile", 5, &[md], 8.0).unwrap();
    let f = spec.profile(md, g.interior_origin());
    let dt = 1e-4;
    let response = |eta: Eta| {
        let t = stretch_tensor(eta, neck(&g)).unwrap();
        (perturbed_coefficient(&g, md, &f, &t, dt).unwrap() - perturbed_coefficient(&g, md, &f, &t, -dt).unwrap())
            / (2.0 * dt)
    };
    let a = response(Eta::normalized(g.r0() + 2.0, 1.0));
    let b = response(Eta::normalized(g.r0() + 6.0, 2.0));
    assert!(rel(a, b) < 1e-5, "{a} vs {b}");
}

#[test]
fn length_derivative_matches_poisson_map_side() {
    for s in [12.0, 20.0] {
        let g = geometry(s, 1);
        for n in [1, 3] {
            let md = mode(n, 0);
            let spec = SourceSpec::seeded("dun0", 21, &[md], 8.0).unwrap();
            let f = spec.profile(md, g.interior_origin());
            let eta = Eta::normalized(g.r0() + 2.0, 1.0);
            let (fa, fb) = f.support();
            let gm = build_gn(&g, n, ChiParams::near_junction(&g), &[fa, fb, g.r0() + 1.0, g.r0() + 3.0]).unwrap();
            let id = dun0_identity_residual(&g, n, &spec, eta, &gm, 1e-3).unwrap();
            assert!(id.residual < 1e-4, "s = {s}, n = {n}: {id:?}");
        }
    }
}

#[test]
fn scaled_coefficient_derivative_decays() {
    for n in [1, 3] {
        let md = mode(n, 0);
        let spec = SourceSpec::seeded("dv", 2, &[md], 8.0).unwrap();
        let kappa = n as f64 / 4.0;
        let mut samples = Vec::new();
        let mut scales = Vec::new();
        for k in 0..5 {
            let s = 10.0 + 5.0 * k as f64;
            let v = |s: f64| {
                let g = geometry(s, 1);
                mode_coefficients(&g, &spec, &[md]).unwrap().get(0, md).unwrap() * (kappa * s).exp()
            };
            let h = 1e-3;
            let dv = (v(s + h) - v(s - h)) / (2.0 * h);
            samples.push((s, dv.norm()));
            scales.push(v(s).norm());
        }
        let verdict = decay_check(&samples, &scales, 1e-6).unwrap();
        assert!(verdict.holds(0.24), "n = {n}: {verdict:?}");
    }
}

struct FiniteCase {
    g: ModelGeometry,
    f: ModeSource,
    gm: GreenMap,
    u: neckharm::radial_ode::RadialSolution,
}

fn finite_case(n: i32, eta: Eta) -> FiniteCase {
    let g = geometry(10.0, 1);
    let md = mode(n, 0);
    let spec = SourceSpec::seeded("trace", 13, &[md], 8.0).unwrap();
    let f = spec.profile(md, g.interior_origin());
    let (fa, fb) = f.support();
    let (ea, eb) = eta.support();
    let gm = build_gn(&g, n, ChiParams::near_junction(&g), &[fa, fb, ea, eb]).unwrap();
    let u = sweep::solve_on(&g, md, Some(&f), gm.grid(), &SweepOptions::default()).unwrap();
    FiniteCase { g, f, gm, u }
}

#[test]
fn trace_formula_matches_finite_differences_at_finite_length() {
    for n in [1, 3] {
        let g0 = geometry(10.0, 1);
        let eta = Eta::normalized(g0.r0() + 3.5, 1.5);
        let case = finite_case(n, eta);
        let md = mode(n, 0);
        for tensor in tensors(eta, &case.g) {
            let pred = trace_variation(&case.gm, &case.g, &case.u, case.f.support(), &tensor).unwrap();
            let dt = 1e-4;
            let fd = (perturbed_coefficient(&case.g, md, &case.f, &tensor, dt).unwrap()
                - perturbed_coefficient(&case.g, md, &case.f, &tensor, -dt).unwrap())
                / (2.0 * dt);
            assert!(rel(pred, fd) < 1e-3, "n = {n}, {tensor:?}: {pred} vs {fd}");
        }
    }
}

#[test]
fn linearization_error_is_second_order() {
    let g0 = geometry(10.0, 1);
    let eta = Eta::normalized(g0.r0() + 3.5, 1.5);
    let case = finite_case(1, eta);
    let tensor = VariationTensor::new(eta, Diag { rr: 0.5, pp: -2.0, tt: 0.7 });
    let pred = trace_variation(&case.gm, &case.g, &case.u, case.f.support(), &tensor).unwrap();
    // a vanishing but nonzero t keeps the node grid of the perturbed solves
    let base = perturbed_coefficient(&case.g, mode(1, 0), &case.f, &tensor, 1e-300).unwrap();
    let remainder =
        |t: f64| (perturbed_coefficient(&case.g, mode(1, 0), &case.f, &tensor, t).unwrap() - base - pred * t).norm();
    let ratio = remainder(0.01) / remainder(0.005);
    assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
}

#[test]
fn stretch_prediction_splits_into_decay_and_correction() {
    let g = geometry(12.0, 1);
    for n in [1, 3] {
        let eta = Eta::normalized(g.r0() + 2.0, 1.0);
        let md = mode(n, 0);
        let spec = SourceSpec::seeded("dun0", 21, &[md], 8.0).unwrap();
        let f = spec.profile(md, g.interior_origin());
        let (fa, fb) = f.support();
        let (ea, eb) = eta.support();
        let gm = build_gn(&g, n, ChiParams::near_junction(&g), &[fa, fb, ea, eb]).unwrap();
        let u = sweep::solve_on(&g, md, Some(&f), gm.grid(), &SweepOptions::default()).unwrap();
        let pred = trace_variation(&gm, &g, &u, f.support(), &stretch_tensor(eta, neck(&g)).unwrap()).unwrap();
        let id = dun0_identity_residual(&g, n, &spec, eta, &gm, 1e-3).unwrap();
        let split = id.rhs - id.u_n0 * (n as f64 / 4.0);
        assert!(rel(pred, split) < 1e-3, "n = {n}: {pred} vs {split}");
    }
}

#[test]
fn trace_formula_matches_finite_differences_on_the_cylinder() {
    let g = geometry(10.0, 1);
    let model = CylinderModel::of(&g, 10.0);
    let eta = Eta::normalized(-5.5, 2.5);
    for n in [1, 3] {
        let md = mode(n, 0);
        let spec = SourceSpec::seeded("cyltrace", 17, &[md], 8.0).unwrap();
        let f = spec.profile(md, 0.0);
        let (fa, fb) = f.support();
        let gm = build_gn_cyl(&model, n, ChiParams::near_junction_cyl(), &[fa, fb, -8.0, -3.0]).unwrap();
        let u = sweep::solve_on(&model, md, Some(&f), gm.grid(), &SweepOptions::default()).unwrap();
        for tensor in [
            stretch_tensor(eta, (-10.0, 0.0)).unwrap(),
            VariationTensor::new(eta, Diag { rr: 0.3, pp: 1.0, tt: 0.0 }),
            VariationTensor::new(eta, Diag { rr: 0.5, pp: -2.0, tt: 0.7 }),
        ] {
            let pred = trace_variation(&gm, &model, &u, f.support(), &tensor).unwrap();
            let dt = 1e-4;
            let fd = (perturbed_readout(&model, md, &f, &tensor, dt).unwrap()
                - perturbed_readout(&model, md, &f, &tensor, -dt).unwrap())
                / (2.0 * dt);
            assert!(rel(pred, fd) < 1e-3, "n = {n}, {tensor:?}: {pred} vs {fd}");
        }
    }
}

#[test]
fn trace_formula_rejects_overlapping_supports() {
    let g0 = geometry(10.0, 1);
    let eta = Eta::normalized(g0.r0() + 3.5, 1.5);
    let case = finite_case(1, eta);
    let tensor = VariationTensor::new(eta, Diag { rr: 1.0, pp: 0.0, tt: 0.0 });
    let (ea, eb) = eta.support();
    assert!(matches!(trace_variation(&case.gm, &case.g, &case.u, (ea, eb), &tensor), Err(Error::Precondition(_))));
    let at_cutoff = VariationTensor::new(Eta::normalized(case.gm.chi.start + 0.5, 1.0), tensor.weights);
    assert!(matches!(
        trace_variation(&case.gm, &case.g, &case.u, case.f.support(), &at_cutoff),
        Err(Error::Precondition(_))
    ));
    let zero = VariationTensor::zero(eta);
    assert_eq!(trace_variation(&case.gm, &case.g, &case.u, case.f.support(), &zero).unwrap(), Complex64::new(0.0, 0.0));
}

#[test]
fn probe_vanishes_in_degenerate_cases_only() {
    let g = geometry(10.0, 1);
    let model = CylinderModel::of(&g, 10.0);
    let gm = build_gn_cyl(&model, 1, ChiParams::near_junction_cyl(), &[]).unwrap();
    let window = (-8.0, -4.0);
    let spec = SourceSpec::seeded("probe", 3, &[mode(1, 0), mode(1, 1)], 8.0).unwrap();
    let sols: Vec<_> = [mode(1, 0), mode(1, 1)]
        .iter()
        .map(|&md| {
            (
                md,
                sweep::solve_on(&model, md, Some(&spec.profile(md, 0.0)), gm.grid(), &SweepOptions::default()).unwrap(),
            )
        })
        .collect();
    let g_field = |r: f64| green_components(&gm, &model, r).unwrap();
    let v_field = |r: f64| {
        sols.iter()
            .map(|(md, sol)| {
                let i = sol.node(r).unwrap();
                Component { n: md.n, m: md.m, value: sol.value(i), deriv: sol.deriv(i) }
            })
            .collect::<Vec<_>>()
    };
    let nodes: Vec<f64> = gm.grid().iter().copied().filter(|&r| r >= window.0 && r <= window.1).collect();
    let generic = vanishing_probe(&model, &g_field, &v_field, &nodes, 16);
    assert!(generic.mass > 0.0 && generic.max_density > 0.0, "{generic:?}");

    let zero = vanishing_probe(&model, &g_field, &|_| Vec::new(), &nodes, 16);
    assert_eq!(zero.mass, 0.0);
    let constant =
        |_: f64| vec![Component { n: 0, m: 0, value: Complex64::new(2.0, 0.0), deriv: Complex64::new(0.0, 0.0) }];
    let flat = vanishing_probe(&model, &constant, &v_field, &nodes, 16);
    assert_eq!(flat.mass, 0.0);
}
