//! Poisson maps `G_n` extracting the `(n, 0)` boundary coefficient from `Delta f`,
//! on the finite-neck model and in the cylinder limit.
//!
//! Per mode, `G_n = c chi / W + h` with `c = 1 / (8 n pi^2)`, where the carrier `W` is the
//! harmonic `(n, 0)` solution growing along the neck (`I_n0` on the finite model,
//! `e^{n r' / 4}` on the cylinder) and `h` cancels `Delta` of the cut-off singular part.
//! Pairings with test functions are formed as `(c chi + h W) (K f / W)` so the singular
//! product never appears. Both angular periods are `2 pi`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{smooth_step, CylinderModel, FluxCoeffs, ModelGeometry, RadialMetric};
use crate::mode_solver::{self, ModeSource};
use crate::quadrature::simpson_complex;
use crate::radial_ode::{closed_form_in0, inm_on, ModeIndex, RadialSolution};
use crate::sweep::{self, homogeneous_on, Source, SweepOptions};

/// `4 pi^2`, the `(phi, theta)` measure of a mode pairing.
pub const TORUS_AREA: f64 = 4.0 * PI * PI;

/// The singular part behaves like `d^{-n/2}` at an edge, where a 5-point stencil errs
/// by `(dx / d)^4`; harmonicity is checked from unit distance on.
const EDGE_SKIP: f64 = 1.0;

pub fn normalization(n: i32) -> f64 {
    1.0 / (8.0 * n as f64 * PI * PI)
}

/// `e^{-(n/2) int_1^{R0} dr / r~}`.
pub fn cn_constant(g: &ModelGeometry, n: i32) -> Result<f64> {
    Ok(1.0 / closed_form_in0(g, n, g.r0())?)
}

/// Decreasing step `1 - sigma((r - start) / width)`: 1 before `start`, 0 after `start + width`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiParams {
    pub start: f64,
    pub width: f64,
}

impl ChiParams {
    /// Width 1, ending one unit before the interior junction.
    pub fn near_junction(g: &ModelGeometry) -> Self {
        ChiParams { start: g.r0() + g.s - 2.0, width: 1.0 }
    }

    /// Same placement in cylinder coordinates.
    pub fn near_junction_cyl() -> Self {
        ChiParams { start: -2.0, width: 1.0 }
    }

    pub fn end(&self) -> f64 {
        self.start + self.width
    }

    pub fn eval(&self, r: f64) -> [f64; 3] {
        let [s, s1, s2] = smooth_step((r - self.start) / self.width);
        [1.0 - s, -s1 / self.width, -s2 / (self.width * self.width)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GreenKind {
    Finite,
    Cylinder,
}

/// `Delta (c chi W^{-1})` moved to the right-hand side: `c W^{-1} (chi'' - 2 kappa chi')`
/// on a flat neck where `W^{-1} = w0 e^{-kappa (r - r_ref)}`.
struct CorrectionSource {
    c: f64,
    kappa: f64,
    w0: f64,
    r_ref: f64,
    chi: ChiParams,
}

impl Source for CorrectionSource {
    fn eval(&self, r: f64) -> Complex64 {
        let [_, d1, d2] = self.chi.eval(r);
        let w = self.w0 * (-self.kappa * (r - self.r_ref)).exp();
        Complex64::new(self.c * w * (d2 - 2.0 * self.kappa * d1), 0.0)
    }

    fn support(&self) -> (f64, f64) {
        (self.chi.start, self.chi.end())
    }
}

/// Radial data of `G_n` on a node grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GreenMap {
    pub n: i32,
    pub kind: GreenKind,
    pub chi: ChiParams,
    pub normalization: f64,
    /// Harmonic carrier `W` on the grid of `h`, unit leading coefficient at the end.
    pub carrier: RadialSolution,
    /// Bounded correction `H_n` (radial profile in the `e^{-i n phi}` channel).
    pub h: RadialSolution,
}

fn check_chi_on_flat(metric: &dyn RadialMetric, chi: ChiParams, neck: (f64, f64)) -> Result<()> {
    if !(chi.width > 0.0) {
        return Err(Error::Precondition(format!("cutoff width must be positive, got {}", chi.width)));
    }
    if chi.start < neck.0 || chi.end() > neck.1 {
        return Err(Error::Precondition(format!(
            "cutoff transition [{}, {}] must lie inside the neck [{}, {}]; chi is 1 on the boundary region and 0 on the interior",
            chi.start,
            chi.end(),
            neck.0,
            neck.1
        )));
    }
    let flat = metric.pieces().iter().any(|p| p.flat && p.lo <= chi.start && p.hi >= chi.end());
    if !flat {
        return Err(Error::Precondition("cutoff transition must sit on a flat neck piece".into()));
    }
    Ok(())
}

fn grid_for(metric: &dyn RadialMetric, chi: ChiParams, extra: &[f64], opts: &SweepOptions) -> Vec<f64> {
    let mut breaks = vec![chi.start, chi.end()];
    breaks.extend_from_slice(extra);
    sweep::default_nodes(metric, &breaks, opts)
}

/// `G_n` on the finite model; `breaks` are extra grid nodes (e.g. test-function supports).
pub fn build_gn(g: &ModelGeometry, n: i32, chi: ChiParams, breaks: &[f64]) -> Result<GreenMap> {
    build_gn_with(g, n, chi, breaks, &SweepOptions::default())
}

pub fn build_gn_with(
    g: &ModelGeometry,
    n: i32,
    chi: ChiParams,
    breaks: &[f64],
    opts: &SweepOptions,
) -> Result<GreenMap> {
    let mode = ModeIndex::new(n, 0)?;
    if n <= 0 {
        return Err(Error::Mode(format!("Poisson maps are built for positive n, got {n}")));
    }
    check_chi_on_flat(g, chi, (g.r0(), g.r0() + g.s))?;
    let (a, b) = mode_solver::extraction_window(g.r0());
    let mut extra = vec![a, b];
    extra.extend_from_slice(breaks);
    let nodes = grid_for(g, chi, &extra, opts);
    let c = normalization(n);
    let kappa = mode.alpha();
    let src = CorrectionSource { c, kappa, w0: cn_constant(g, n)?, r_ref: g.r0(), chi };
    let h = sweep::solve_on(g, mode, Some(&src), &nodes, opts)?;
    let carrier = inm_on(g, mode, &nodes, opts)?;
    Ok(GreenMap { n, kind: GreenKind::Finite, chi, normalization: c, carrier, h })
}

/// `G^cyl_n` on a cylinder model whose stub contains the cutoff transition.
pub fn build_gn_cyl(model: &CylinderModel, n: i32, chi: ChiParams, breaks: &[f64]) -> Result<GreenMap> {
    let mode = ModeIndex::new(n, 0)?;
    if n <= 0 {
        return Err(Error::Mode(format!("Poisson maps are built for positive n, got {n}")));
    }
    check_chi_on_flat(model, chi, (-model.neck, 0.0))?;
    let opts = SweepOptions::default();
    let mut extra = vec![0.0];
    extra.extend_from_slice(breaks);
    let nodes = grid_for(model, chi, &extra, &opts);
    let c = normalization(n);
    let kappa = mode.alpha();
    let src = CorrectionSource { c, kappa, w0: 1.0, r_ref: 0.0, chi };
    let h = sweep::solve_on(model, mode, Some(&src), &nodes, &opts)?;
    let (y, lnu) = homogeneous_on(model, mode, &nodes, &opts)?;
    let i0 = nodes.iter().position(|&r| r.abs() < 1e-12).expect("junction is a node");
    let shift = lnu[i0];
    let values: Vec<Complex64> = lnu.iter().map(|l| Complex64::new((l - shift).exp(), 0.0)).collect();
    let derivs = values
        .iter()
        .zip(&nodes)
        .zip(&y)
        .map(|((v, &r), y)| v * (y / FluxCoeffs::from_metric(model.coeffs(r), n, 0).p))
        .collect();
    let carrier = RadialSolution {
        mode,
        alpha: kappa,
        grid: nodes.clone(),
        values,
        derivs,
        log_scale: vec![0.0; nodes.len()],
        edges: vec![],
    };
    Ok(GreenMap { n, kind: GreenKind::Cylinder, chi, normalization: c, carrier, h })
}

impl GreenMap {
    pub fn mode(&self) -> ModeIndex {
        ModeIndex { n: self.n, m: 0 }
    }

    pub fn grid(&self) -> &[f64] {
        &self.h.grid
    }

    /// `W g = c chi + h W` at node `i`.
    pub fn paired(&self, i: usize) -> Complex64 {
        let chi = self.chi.eval(self.h.grid[i])[0];
        self.h.value(i) * self.carrier.value(i).re + self.normalization * chi
    }

    /// `g` at node `i`; large near an edge of the finite model.
    pub fn value(&self, i: usize) -> Complex64 {
        let chi = self.chi.eval(self.h.grid[i])[0];
        self.h.value(i) + self.normalization * chi / self.carrier.value(i).re
    }

    /// `P g'` at node `i`.
    pub fn flux(&self, metric: &dyn RadialMetric, i: usize) -> Complex64 {
        let r = self.h.grid[i];
        let p = FluxCoeffs::from_metric(metric.coeffs(r), self.n, 0).p;
        let [chi, chi1, _] = self.chi.eval(r);
        let w = self.carrier.value(i).re;
        let dlog = self.carrier.deriv(i).re / w;
        let sing = self.normalization * (chi1 - chi * dlog) / w;
        (self.h.deriv(i) + sing) * p
    }

    /// `4 pi^2 int g k dr` for a radial density `k = rho Delta f`.
    pub fn apply(&self, k: impl Fn(f64) -> Complex64) -> Complex64 {
        let vals: Vec<Complex64> = (0..self.h.len()).map(|i| self.value(i) * k(self.h.grid[i])).collect();
        simpson_complex(&self.h.grid, &vals) * TORUS_AREA
    }

    /// `4 pi^2 int (W g) k dr` for `k = rho Delta f / W`.
    pub fn apply_paired(&self, k_over_w: impl Fn(usize) -> Complex64) -> Complex64 {
        let vals: Vec<Complex64> = (0..self.h.len()).map(|i| self.paired(i) * k_over_w(i)).collect();
        simpson_complex(&self.h.grid, &vals) * TORUS_AREA
    }

    /// `max |h|` over nodes in `window`.
    pub fn h_sup(&self, window: (f64, f64)) -> f64 {
        (0..self.h.len())
            .filter(|&i| self.h.grid[i] >= window.0 && self.h.grid[i] <= window.1)
            .map(|i| self.h.value(i).norm())
            .fold(0.0, f64::max)
    }

    /// Largest pointwise relative residual `|(P g')' - Q g| / (|(P g')'| + |Q g|)`. The flux
    /// `P g'` is exact at nodes; its derivative is the Richardson combination of 5-point
    /// differences at spacings `dx` and `2 dx` (sixth order), on uniform stencils away from
    /// the cutoff transition and from edges.
    pub fn harmonic_residual(&self, metric: &dyn RadialMetric) -> f64 {
        let x = &self.h.grid;
        let edges = &self.h.edges;
        let mut worst: f64 = 0.0;
        for i in 4..x.len().saturating_sub(4) {
            let dx = x[i + 1] - x[i];
            if (0..8).any(|k| ((x[i - 3 + k] - x[i - 4 + k]) - dx).abs() > 1e-9 * dx) {
                continue;
            }
            let (lo, hi) = (x[i - 4], x[i + 4]);
            if hi > self.chi.start && lo < self.chi.end() {
                continue;
            }
            if edges.iter().any(|e| (x[i] - e).abs() < EDGE_SKIP) {
                continue;
            }
            let f = |k: usize| self.flux(metric, k);
            let d = |st: usize| {
                (f(i - 2 * st) - f(i - st) * 8.0 + f(i + st) * 8.0 - f(i + 2 * st)) / (12.0 * dx * st as f64)
            };
            let df = (d(1) * 16.0 - d(2)) / 15.0;
            let q = FluxCoeffs::from_metric(metric.coeffs(x[i]), self.n, 0).q;
            let qg = self.value(i) * q;
            let denom = df.norm() + qg.norm();
            if denom > 0.0 {
                worst = worst.max((df - qg).norm() / denom);
            }
        }
        worst
    }
}

/// Test functions with compactly supported Laplacian and known `(n, 0)` coefficient.
#[derive(Clone, Debug, PartialEq)]
pub enum TestFunction {
    Zero,
    /// `amp W psi` for the decreasing step `psi`, plus an optional interior bump
    /// `(center, width, amp)`; coefficient `amp`.
    Cutoff {
        amp: Complex64,
        psi: ChiParams,
        bump: Option<(f64, f64, Complex64)>,
    },
    /// The solution of `Delta u = F` for a radial source; its coefficient is extracted separately.
    Solution(ModeSource),
}

impl TestFunction {
    /// The known coefficient, where it is known in closed form.
    pub fn known_coefficient(&self) -> Option<Complex64> {
        match self {
            TestFunction::Zero => Some(Complex64::new(0.0, 0.0)),
            TestFunction::Cutoff { amp, .. } => Some(*amp),
            TestFunction::Solution(_) => None,
        }
    }

    /// Radii that should be grid nodes.
    pub fn breaks(&self) -> Vec<f64> {
        match self {
            TestFunction::Zero => vec![],
            TestFunction::Cutoff { psi, bump, .. } => {
                let mut b = vec![psi.start, psi.end()];
                if let Some((c, w, _)) = bump {
                    b.extend([c - w, c + w]);
                }
                b
            }
            TestFunction::Solution(f) => {
                let (a, b) = f.support();
                vec![a, b]
            }
        }
    }
}

/// `int G_n Delta f Vol`, reduced to the mode pairing.
pub fn poisson_identity_check(gm: &GreenMap, metric: &dyn RadialMetric, f: &TestFunction) -> Result<Complex64> {
    let n = gm.n;
    let flux = |r: f64| FluxCoeffs::from_metric(metric.coeffs(r), n, 0);
    let dp = |r: f64| {
        let (g, dg) = (metric.coeffs(r), metric.coeffs_deriv(r));
        let rho = g.volume();
        let drho = 0.5 * rho * (dg.rr / g.rr + dg.pp / g.pp + dg.tt / g.tt);
        drho / g.rr - rho * dg.rr / (g.rr * g.rr)
    };
    match f {
        TestFunction::Zero => Ok(Complex64::new(0.0, 0.0)),
        TestFunction::Cutoff { amp, psi, bump } => {
            // K (W psi) / W = -(2 y psi' + P' psi' + P psi'') since K W = 0
            let main = gm.apply_paired(|i| {
                let r = gm.h.grid[i];
                let [_, s1, s2] = psi.eval(r);
                let (p1, p2) = (-s1, -s2);
                let co = flux(r);
                let y = co.p * gm.carrier.deriv(i).re / gm.carrier.value(i).re;
                *amp * (2.0 * y * p1 + dp(r) * p1 + co.p * p2)
            });
            let extra = match bump {
                None => Complex64::new(0.0, 0.0),
                Some((center, width, a)) => gm.apply(|r| {
                    let t = (r - center) / width;
                    if t.abs() >= 1.0 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let [b, b1, b2] = crate::geometry::bump(t);
                    let (b1, b2) = (b1 / width, b2 / (width * width));
                    let co = flux(r);
                    *a * (-dp(r) * b1 - co.p * b2 + co.q * b)
                }),
            };
            Ok(main + extra)
        }
        TestFunction::Solution(src) => {
            let (lo, _) = src.support();
            if lo < metric.interior_origin() - 1e-12 {
                return Err(Error::Precondition(format!("test source starts at {lo}, before the interior")));
            }
            Ok(gm.apply(|r| src.eval(r) * flux(r).rho))
        }
    }
}

/// `sup` over the neck of `|C_n h^cyl(r') - e^{n s / 4} h(r)|`, `r' = r - R0 - s`,
/// with the scale `sup |C_n h^cyl|` over the same range.
pub fn cylinder_difference(fin: &GreenMap, cyl: &GreenMap, g: &ModelGeometry) -> Result<(f64, f64)> {
    let cn = cn_constant(g, fin.n)?;
    let grow = (0.25 * fin.n as f64 * g.s).exp();
    let (a, b) = (g.r0(), g.r0() + g.s);
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for i in 0..fin.h.len() {
        let r = fin.h.grid[i];
        if r < a || r > b {
            continue;
        }
        let hc = cyl.h.eval(r - b)? * cn;
        diff = diff.max((hc - fin.h.value(i) * grow).norm());
        scale = scale.max(hc.norm());
    }
    Ok((diff, scale))
}
