//! Radial metric variations: the neck stretch `g + 2 t eta dr^2`, the transport identity
//! for `u_n0` in the neck length, the trace formula for the first variation of a mode
//! coefficient, and the Hilbert-Schmidt probe behind the genericity argument.
//!
//! For `g_t = g + t T` with diagonal radial `T`, differentiating `P` and `Q` gives
//! `d/dt u_n0 = 4 pi^2 int [T_rr g'U'/A^2 + n^2 T_pp g U / B^2
//!                          - Tr(T)/2 (g'U'/A + n^2 g U / B)] rho dr`
//! for a Poisson map with radial part `g` and the `(n, 0)` solution `U`, which is the
//! mode-reduced `int Tr(T S) - Tr(T) Tr(S) / 2` with `S` the symmetrized `dG (x) dU`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{
    bump, bump_integral, CylinderModel, Diag, FluxCoeffs, MetricPerturbation, ModelGeometry, Perturbed, RadialMetric,
};
use crate::green_maps::{GreenMap, TORUS_AREA};
use crate::mode_solver::{self, extract_coefficient, ModeSource};
use crate::quadrature::simpson_complex;
use crate::radial_ode::{inm_on, ModeIndex, RadialSolution};
use crate::sweep::{self, Source, SweepOptions};

/// Largest deviation of `int eta` from 1 accepted for a stretch profile.
pub const ETA_TOLERANCE: f64 = 1e-10;

/// `scale * bump((r - center) / width)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eta {
    pub center: f64,
    pub width: f64,
    pub scale: f64,
}

impl Eta {
    /// Unit integral.
    pub fn normalized(center: f64, width: f64) -> Self {
        Eta { center, width, scale: 1.0 / (width * bump_integral()) }
    }

    pub fn integral(&self) -> f64 {
        self.scale * self.width * bump_integral()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.width, self.center + self.width)
    }

    /// `[eta, eta', eta'']`.
    pub fn eval(&self, r: f64) -> [f64; 3] {
        let [b, b1, b2] = bump((r - self.center) / self.width);
        [self.scale * b, self.scale * b1 / self.width, self.scale * b2 / (self.width * self.width)]
    }
}

/// Separable radial tensor `T = profile(r) * weights`, `profile` an `Eta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VariationTensor {
    pub profile: Eta,
    pub weights: Diag,
}

impl VariationTensor {
    pub fn new(profile: Eta, weights: Diag) -> Self {
        VariationTensor { profile, weights }
    }

    pub fn zero(profile: Eta) -> Self {
        VariationTensor { profile, weights: Diag::ZERO }
    }
}

impl MetricPerturbation for VariationTensor {
    fn delta(&self, r: f64) -> Diag {
        Diag::ZERO.add_scaled(self.weights, self.profile.eval(r)[0])
    }

    fn delta_deriv(&self, r: f64) -> Diag {
        Diag::ZERO.add_scaled(self.weights, self.profile.eval(r)[1])
    }

    fn support(&self) -> (f64, f64) {
        self.profile.support()
    }
}

fn inside(support: (f64, f64), range: (f64, f64)) -> bool {
    support.0 >= range.0 - 1e-12 && support.1 <= range.1 + 1e-12
}

fn disjoint(a: (f64, f64), b: (f64, f64)) -> bool {
    a.1 <= b.0 || b.1 <= a.0
}

/// `T = 2 eta dr^2` for `eta` with unit integral supported in `neck`.
pub fn stretch_tensor(eta: Eta, neck: (f64, f64)) -> Result<VariationTensor> {
    if (eta.integral() - 1.0).abs() > ETA_TOLERANCE {
        return Err(Error::Precondition(format!("stretch profile must integrate to 1, got {}", eta.integral())));
    }
    if !inside(eta.support(), neck) {
        return Err(Error::Precondition(format!(
            "stretch profile on [{}, {}] leaves the neck [{}, {}]",
            eta.support().0,
            eta.support().1,
            neck.0,
            neck.1
        )));
    }
    Ok(VariationTensor::new(eta, Diag { rr: 2.0, pp: 0.0, tt: 0.0 }))
}

/// Neck length of `g + 2 t eta dr^2`: `s + int (sqrt(1 + 2 t eta) - 1) dr`.
pub fn stretched_length(s: f64, eta: Eta, t: f64) -> f64 {
    let (a, b) = eta.support();
    s + crate::geometry::gauss_legendre(|r| (1.0 + 2.0 * t * eta.eval(r)[0]).sqrt() - 1.0, a, b, 64)
}

/// `u_nm` at the first link component of `g + t T`, on nodes that include the supports.
pub fn perturbed_coefficient(
    g: &ModelGeometry,
    mode: ModeIndex,
    f: &ModeSource,
    tensor: &VariationTensor,
    t: f64,
) -> Result<Complex64> {
    let metric = Perturbed { base: g, t, tensor };
    let (a, b) = mode_solver::extraction_window(g.r0());
    let (sa, sb) = tensor.support();
    let (fa, fb) = f.support();
    let opts = SweepOptions::default();
    let nodes = sweep::default_nodes(&metric, &[a, b, sa, sb, fa, fb], &opts);
    let sol = sweep::solve_on(&metric, mode, Some(f), &nodes, &opts)?;
    let inm = inm_on(g, mode, &nodes, &opts)?;
    Ok(extract_coefficient(&sol, &inm, g.r0())?.0)
}

/// Cylinder readout at the first end of `model + t T`.
pub fn perturbed_readout(
    model: &CylinderModel,
    mode: ModeIndex,
    f: &ModeSource,
    tensor: &VariationTensor,
    t: f64,
) -> Result<Complex64> {
    let metric = Perturbed { base: model, t, tensor };
    let (sa, sb) = tensor.support();
    let (fa, fb) = f.support();
    let opts = SweepOptions::default();
    let nodes = sweep::default_nodes(&metric, &[0.0, sa, sb, fa, fb], &opts);
    let sol = sweep::solve_on(&metric, mode, Some(f), &nodes, &opts)?;
    Ok(mode_solver::cylinder_readouts(model, &sol)?[0])
}

/// Residual of `d u_n0 / d s + (n/4) u_n0 = -4 pi^2 int h (2 eta U'' + eta' U') rho dr`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StretchIdentity {
    pub du_ds: Complex64,
    pub u_n0: Complex64,
    pub rhs: Complex64,
    /// `|lhs - rhs| / (|du/ds| + (n/4)|u_n0| + |rhs|)`, 0 when all three vanish.
    pub residual: f64,
}

/// `U''` from the equation `-(P U')' + Q U = rho f` at node `i`.
fn second_derivative(metric: &dyn RadialMetric, sol: &RadialSolution, f: Option<&dyn Source>, i: usize) -> Complex64 {
    let r = sol.grid[i];
    let (g, dg) = (metric.coeffs(r), metric.coeffs_deriv(r));
    let co = FluxCoeffs::from_metric(g, sol.mode.n, sol.mode.m);
    let drho = 0.5 * co.rho * (dg.rr / g.rr + dg.pp / g.pp + dg.tt / g.tt);
    let dp = drho / g.rr - co.rho * dg.rr / (g.rr * g.rr);
    let load = f.map_or(Complex64::new(0.0, 0.0), |s| s.eval(r)) * co.rho;
    (sol.value(i) * co.q - load - sol.deriv(i) * dp) / co.p
}

/// Centered difference in `s` with step `ds` against the Poisson-map side.
pub fn dun0_identity_residual(
    g: &ModelGeometry,
    n: i32,
    spec: &mode_solver::SourceSpec,
    eta: Eta,
    gm: &GreenMap,
    ds: f64,
) -> Result<StretchIdentity> {
    let mode = ModeIndex::new(n, 0)?;
    if gm.n != n || gm.kind != crate::green_maps::GreenKind::Finite {
        return Err(Error::Precondition("stretch identity needs the finite-neck Poisson map of the same n".into()));
    }
    stretch_tensor(eta, (g.r0(), g.r0() + g.s))?;
    if !(eta.support().1 <= gm.chi.start) {
        return Err(Error::Precondition("the cutoff must equal 1 on the stretch support".into()));
    }
    let coeff = |s: f64| -> Result<Complex64> {
        let gs = g.with_s(s)?;
        Ok(mode_solver::mode_coefficients(&gs, spec, &[mode])?.get(0, mode).expect("requested mode"))
    };
    let u0 = coeff(g.s)?;
    let du = (coeff(g.s + ds)? - coeff(g.s - ds)?) / (2.0 * ds);

    let f = spec.profile(mode, g.interior_origin());
    let opts = SweepOptions::default();
    let sol = sweep::solve_on(g, mode, Some(&f), &gm.h.grid, &opts)?;
    let (a, b) = eta.support();
    let vals: Vec<Complex64> = (0..sol.len())
        .map(|i| {
            let r = sol.grid[i];
            if r < a || r > b {
                return Complex64::new(0.0, 0.0);
            }
            let [e, e1, _] = eta.eval(r);
            let u2 = second_derivative(g, &sol, Some(&f), i);
            let rho = g.coeffs(r).volume();
            gm.h.value(i) * (u2 * (2.0 * e) + sol.deriv(i) * e1) * rho
        })
        .collect();
    let rhs = -simpson_complex(&sol.grid, &vals) * TORUS_AREA;
    let lhs = du + u0 * (0.25 * n as f64);
    let denom = du.norm() + 0.25 * n as f64 * u0.norm() + rhs.norm();
    let residual = if denom > 0.0 { (lhs - rhs).norm() / denom } else { 0.0 };
    Ok(StretchIdentity { du_ds: du, u_n0: u0, rhs, residual })
}

/// Predicted `d/dt` of the `(n, 0)` coefficient read by `gm` under `g + t T`.
/// `u` is the `(n, 0)` solution on `metric` on the grid of `gm`; `source` its support.
pub fn trace_variation(
    gm: &GreenMap,
    metric: &dyn RadialMetric,
    u: &RadialSolution,
    source: (f64, f64),
    tensor: &VariationTensor,
) -> Result<Complex64> {
    if u.grid != gm.h.grid {
        return Err(Error::Precondition("solution and Poisson map must share a grid".into()));
    }
    if u.mode != gm.mode() {
        return Err(Error::Precondition(format!("solution mode {:?} is not the (n, 0) mode of the map", u.mode)));
    }
    let supp = tensor.support();
    if !disjoint(supp, source) {
        return Err(Error::Precondition("variation support meets the source support".into()));
    }
    if !disjoint(supp, (gm.chi.start, gm.chi.end())) {
        return Err(Error::Precondition("variation support meets the cutoff transition".into()));
    }
    let n2 = (gm.n * gm.n) as f64;
    let vals: Vec<Complex64> = (0..u.len())
        .map(|i| {
            let r = u.grid[i];
            if r < supp.0 || r > supp.1 {
                return Complex64::new(0.0, 0.0);
            }
            let g = metric.coeffs(r);
            let tt = tensor.delta(r);
            let co = FluxCoeffs::from_metric(g, gm.n, 0);
            let gv = gm.value(i);
            let gd = gm.flux(metric, i) / co.p;
            let (uv, ud) = (u.value(i), u.deriv(i));
            let grad = gd * ud;
            let ang = gv * uv * n2;
            let tr = g.trace_of(tt);
            (grad * (tt.rr / (g.rr * g.rr)) + ang * (tt.pp / (g.pp * g.pp)) - (grad / g.rr + ang / g.pp) * (0.5 * tr))
                * co.rho
        })
        .collect();
    Ok(simpson_complex(&u.grid, &vals) * TORUS_AREA)
}

/// One Fourier component `Re(c(r) e^{i(n phi + m theta)})` of a real field, at a radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Component {
    pub n: i32,
    pub m: i32,
    pub value: Complex64,
    pub deriv: Complex64,
}

/// `int chi^2 Tr(S_hat^2) Vol` over a radial window, `S = (dG (x) dv + dv (x) dG) / 2`,
/// `S_hat = S - Tr(S) Id / 2`, for real fields given by their components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeReport {
    pub mass: f64,
    pub max_density: f64,
}

/// `(d_r, d_phi, d_theta)` of the real field at one angle pair.
fn gradient(components: &[Component], phi: f64, theta: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    for c in components {
        let e = Complex64::from_polar(1.0, c.n as f64 * phi + c.m as f64 * theta);
        let i = Complex64::new(0.0, 1.0);
        out[0] += (c.deriv * e).re;
        out[1] += (c.value * e * i * c.n as f64).re;
        out[2] += (c.value * e * i * c.m as f64).re;
    }
    out
}

pub fn vanishing_probe(
    metric: &dyn RadialMetric,
    g_field: &dyn Fn(f64) -> Vec<Component>,
    v_field: &dyn Fn(f64) -> Vec<Component>,
    radii: &[f64],
    angular_points: usize,
) -> ProbeReport {
    if radii.len() < 3 {
        return ProbeReport { mass: 0.0, max_density: 0.0 };
    }
    let (lo, hi) = (radii[0], radii[radii.len() - 1]);
    let eta = Eta { center: 0.5 * (lo + hi), width: 0.5 * (hi - lo), scale: 1.0 };
    let rs = radii;
    let da = 2.0 * PI / angular_points as f64;
    let mut max_density: f64 = 0.0;
    let dens: Vec<Complex64> = rs
        .iter()
        .map(|&r| {
            let g = metric.coeffs(r);
            let inv = [1.0 / g.rr, 1.0 / g.pp, 1.0 / g.tt];
            let (gc, vc) = (g_field(r), v_field(r));
            let chi = eta.eval(r)[0];
            let mut sum = 0.0;
            for p in 0..angular_points {
                for q in 0..angular_points {
                    let (phi, theta) = (p as f64 * da, q as f64 * da);
                    let (a, b) = (gradient(&gc, phi, theta), gradient(&vc, phi, theta));
                    let aa: f64 = (0..3).map(|j| a[j] * a[j] * inv[j]).sum();
                    let bb: f64 = (0..3).map(|j| b[j] * b[j] * inv[j]).sum();
                    let ab: f64 = (0..3).map(|j| a[j] * b[j] * inv[j]).sum();
                    let d = 0.5 * aa * bb + 0.25 * ab * ab;
                    max_density = max_density.max(d);
                    sum += d;
                }
            }
            Complex64::new(chi * chi * sum * da * da * g.volume(), 0.0)
        })
        .collect();
    ProbeReport { mass: simpson_complex(rs, &dens).re, max_density }
}

/// Components of `Re(G_n)` (in the `e^{-i n phi}` channel) at radius `r`.
pub fn green_components(gm: &GreenMap, metric: &dyn RadialMetric, r: f64) -> Result<Vec<Component>> {
    let i =
        gm.h.node(r).ok_or_else(|| Error::Precondition(format!("radius {r} is not a node of the Poisson map grid")))?;
    let p = FluxCoeffs::from_metric(metric.coeffs(r), gm.n, 0).p;
    Ok(vec![Component { n: -gm.n, m: 0, value: gm.value(i), deriv: gm.flux(metric, i) / p }])
}
