//! Radial model of the doubled manifold near a link: edge zone, flat neck,
//! interior segment, and the closure at the far end.
//!
//! Every metric handled here is diagonal in `(r, phi, theta)` with
//! coefficients depending on `r` only, so Fourier modes in `phi` and `theta`
//! decouple exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Innermost radius used in place of the singular edge `r = 0`.
pub const R_MIN: f64 = 1e-6;

/// Neck metric coefficients `(g_rr, g_phiphi, g_thetatheta)`.
pub const NECK_METRIC: Diag = Diag { rr: 1.0, pp: 16.0, tt: 1.0 };

/// `C^inf` step, 0 for `t <= 0` and 1 for `t >= 1`. Returns value and two derivatives.
pub fn smooth_step(t: f64) -> [f64; 3] {
    if t <= 0.0 {
        return [0.0, 0.0, 0.0];
    }
    if t >= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    // sigma = 1 / (1 + e^g), g = 1/t - 1/(1-t)
    let u = 1.0 - t;
    let g = 1.0 / t - 1.0 / u;
    let g1 = -1.0 / (t * t) - 1.0 / (u * u);
    let g2 = 2.0 / (t * t * t) - 2.0 / (u * u * u);
    let s = 1.0 / (1.0 + g.exp());
    let sc = 1.0 / (1.0 + (-g).exp());
    let p = s * sc;
    let s1 = -p * g1;
    let s2 = -(s1 * (sc - s) * g1 + p * g2);
    [s, s1, s2]
}

/// Compact bump `exp(1 - 1/(1 - t^2))` on `(-1, 1)` with peak 1 at `t = 0`.
pub fn bump(t: f64) -> [f64; 3] {
    if t <= -1.0 || t >= 1.0 {
        return [0.0, 0.0, 0.0];
    }
    let s = 1.0 - t * t;
    let b = (1.0 - 1.0 / s).exp();
    let d = -2.0 * t / (s * s);
    let dd = -2.0 / (s * s) - 8.0 * t * t / (s * s * s);
    [b, b * d, b * (d * d + dd)]
}

/// `int_{-1}^{1} bump`.
pub fn bump_integral() -> f64 {
    gauss_legendre(|t| bump(t)[0], -1.0, 1.0, 64)
}

const GL_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Composite 8-point Gauss-Legendre on `pieces` equal panels.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize) -> f64 {
    let h = (b - a) / pieces as f64;
    let mut acc = 0.0;
    for k in 0..pieces {
        let c = a + (k as f64 + 0.5) * h;
        let mut s = 0.0;
        for (x, w) in GL_X.iter().zip(GL_W.iter()) {
            s += w * f(c + 0.5 * h * x);
        }
        acc += 0.5 * h * s;
    }
    acc
}

/// `int_0^t smooth_step` for `t` in `[0, 1]`, using `sigma(1 - t) = 1 - sigma(t)`.
fn step_integral(t: f64) -> f64 {
    if t <= 0.5 {
        gauss_legendre(|u| smooth_step(u)[0], 0.0, t, 8)
    } else {
        t - 0.5 + gauss_legendre(|u| smooth_step(u)[0], 0.0, 1.0 - t, 8)
    }
}

/// Edge profile `r~`: identity on `[0, r_a]`, then slope `1 - sigma((r - r_a) / D)` with
/// `D = 2 (2 - r_a)`, which reaches exactly 2 at `r_a + D` and stays there.
/// Monotone, concave past `r_a`, slope in `[0, 1]`, `C^inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeckProfile {
    pub r_a: f64,
    pub r0: f64,
    pub margin: f64,
    phi_end: f64,
}

impl NeckProfile {
    pub fn new(r_a: f64, r0: f64, margin: f64) -> Result<Self> {
        if !(r_a > 0.0 && r_a < 2.0) {
            return Err(Error::Geometry(format!("need 0 < r_a < 2, got r_a = {r_a}")));
        }
        if !(margin >= 0.0) {
            return Err(Error::Geometry(format!("margin must be >= 0, got {margin}")));
        }
        let mut p = NeckProfile { r_a, r0, margin, phi_end: 0.0 };
        let e = p.blend_end();
        if !(e <= r0 - margin) {
            return Err(Error::Geometry(format!(
                "blend window [r_a, 4 - r_a] = [{r_a}, {e}] must end by R0 - margin = {}",
                r0 - margin
            )));
        }
        p.phi_end = gauss_legendre(|t| 1.0 / p.value(t)[0], r_a, e, 400);
        Ok(p)
    }

    fn width(&self) -> f64 {
        2.0 * (2.0 - self.r_a)
    }

    /// First radius from which `r~ = 2`.
    pub fn blend_end(&self) -> f64 {
        self.r_a + self.width()
    }

    pub fn eval(&self, r: f64) -> Result<[f64; 3]> {
        if !(r >= 0.0) {
            return Err(Error::Domain(r));
        }
        Ok(self.value(r))
    }

    /// Value, first and second derivative; no domain check.
    pub fn value(&self, r: f64) -> [f64; 3] {
        if r <= self.r_a {
            return [r, 1.0, 0.0];
        }
        if r >= self.blend_end() {
            return [2.0, 0.0, 0.0];
        }
        let d = self.width();
        let t = (r - self.r_a) / d;
        let [s, s1, _] = smooth_step(t);
        [self.r_a + d * (t - step_integral(t)), 1.0 - s, -s1 / d]
    }

    /// `int_{r_a}^{r} dt / r~(t)`.
    fn phi(&self, r: f64) -> f64 {
        if r <= self.r_a {
            return (r / self.r_a).ln();
        }
        let e = self.blend_end();
        if r >= e {
            return self.phi_end + 0.5 * (r - e);
        }
        let pieces = (((r - self.r_a) / 0.005).ceil() as usize).max(1);
        gauss_legendre(|t| 1.0 / self.value(t)[0], self.r_a, r, pieces)
    }

    /// `int_1^r dt / r~(t)`.
    pub fn log_integral(&self, r: f64) -> f64 {
        self.phi(r) - self.phi(1.0)
    }
}

/// Diagonal metric `(g_rr, g_phiphi, g_thetatheta)` at a radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diag {
    pub rr: f64,
    pub pp: f64,
    pub tt: f64,
}

impl Diag {
    pub const ZERO: Diag = Diag { rr: 0.0, pp: 0.0, tt: 0.0 };

    pub fn add_scaled(self, other: Diag, t: f64) -> Diag {
        Diag { rr: self.rr + t * other.rr, pp: self.pp + t * other.pp, tt: self.tt + t * other.tt }
    }

    pub fn volume(self) -> f64 {
        (self.rr * self.pp * self.tt).sqrt()
    }

    pub fn trace_of(self, t: Diag) -> f64 {
        t.rr / self.rr + t.pp / self.pp + t.tt / self.tt
    }
}

/// Radial coefficients of the mode operator in flux form `-(P u')' + Q u = rho f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxCoeffs {
    pub p: f64,
    pub q: f64,
    pub rho: f64,
}

impl FluxCoeffs {
    pub fn from_metric(g: Diag, n: i32, m: i32) -> Self {
        let rho = g.volume();
        let (n2, m2) = ((n * n) as f64, (m * m) as f64);
        FluxCoeffs { p: rho / g.rr, q: rho * (n2 / g.pp + m2 / g.tt), rho }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteriorBump {
    pub center: f64,
    pub width: f64,
    pub amp_phi: f64,
    pub amp_theta: f64,
}

/// Interior profiles `rho_phi = 2 (1 + sum a b)`, `rho_theta = 1 + sum a' b` on `[0, length]`.
#[derive(Clone, Debug, PartialEq)]
pub struct InteriorProfiles {
    pub length: f64,
    pub seed: u64,
    pub bumps: Vec<InteriorBump>,
}

impl InteriorProfiles {
    pub fn flat(length: f64) -> Self {
        InteriorProfiles { length, seed: 0, bumps: Vec::new() }
    }

    pub fn seeded(length: f64, amplitude: f64, seed: u64) -> Result<Self> {
        if !(length >= 4.0) {
            return Err(Error::Geometry(format!("interior length must be >= 4, got {length}")));
        }
        if !(0.0..1.0 / 3.0).contains(&amplitude) {
            return Err(Error::Geometry(format!(
                "profile amplitude must lie in [0, 1/3) to keep profiles positive, got {amplitude}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bumps = (0..3)
            .map(|_| {
                let center = rng.random_range(1.5..length - 1.5);
                let room = (center - 0.25).min(length - 0.25 - center);
                let width = rng.random_range(1.0..1.5f64).min(room);
                InteriorBump {
                    center,
                    width,
                    amp_phi: rng.random_range(-amplitude..=amplitude),
                    amp_theta: rng.random_range(-amplitude..=amplitude),
                }
            })
            .collect();
        Ok(InteriorProfiles { length, seed, bumps })
    }

    /// `[rho_phi, rho_theta]` and their derivatives at interior coordinate `x`.
    pub fn eval(&self, x: f64) -> ([f64; 2], [f64; 2]) {
        let (mut a, mut b, mut da, mut db) = (1.0, 1.0, 0.0, 0.0);
        for k in &self.bumps {
            let [v, d, _] = bump((x - k.center) / k.width);
            a += k.amp_phi * v;
            b += k.amp_theta * v;
            da += k.amp_phi * d / k.width;
            db += k.amp_theta * d / k.width;
        }
        ([2.0 * a, b], [2.0 * da, db])
    }

    pub fn metric(&self, x: f64) -> (Diag, Diag) {
        let ([a, b], [da, db]) = self.eval(x);
        (Diag { rr: 1.0, pp: 4.0 * a * a, tt: b * b }, Diag { rr: 0.0, pp: 8.0 * a * da, tt: 2.0 * b * db })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Closure {
    /// One link component; reflective condition at the far end.
    CappedEnd,
    /// Two link components joined through the interior.
    TwoEnds,
}

impl Closure {
    pub fn from_p(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Closure::CappedEnd),
            2 => Ok(Closure::TwoEnds),
            other => Err(Error::UnsupportedClosure(other)),
        }
    }

    pub fn p(self) -> usize {
        match self {
            Closure::CappedEnd => 1,
            Closure::TwoEnds => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionKind {
    Boundary,
    Neck,
    Interior,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub kind: RegionKind,
    pub lo: f64,
    pub hi: f64,
}

/// Condition closing the radial problem at one end of its span.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndCondition {
    /// A link component: solutions bounded like `r^{|n|/2}`.
    Edge,
    /// Zero derivative.
    Reflect,
    /// A semi-infinite flat cylinder continues past the end; only the decaying branch survives.
    Decay,
    /// `u = 0`.
    Dirichlet,
}

/// A sub-interval of the span on which the metric is either exactly the neck metric or smooth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub flat: bool,
}

/// A diagonal, `r`-dependent metric on an interval with closing conditions.
pub trait RadialMetric: Sync {
    fn span(&self) -> (f64, f64);
    fn coeffs(&self, r: f64) -> Diag;
    fn coeffs_deriv(&self, r: f64) -> Diag;
    fn pieces(&self) -> Vec<Piece>;
    fn ends(&self) -> [EndCondition; 2];
    /// Global radius of interior coordinate 0.
    fn interior_origin(&self) -> f64;
}

/// Plain-text geometry configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub r_a: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub margin: f64,
    pub s: f64,
    pub p: u32,
    pub interior_seed: u64,
    pub interior_length: f64,
    pub profile_amplitude: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            r_a: 1.0,
            r0: 4.0,
            margin: 0.5,
            s: 10.0,
            p: 1,
            interior_seed: 7,
            interior_length: 8.0,
            profile_amplitude: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelGeometry {
    pub profile: NeckProfile,
    pub s: f64,
    pub interior: InteriorProfiles,
    pub closure: Closure,
}

pub fn build_geometry(config: &GeometryConfig) -> Result<ModelGeometry> {
    let closure = Closure::from_p(config.p)?;
    let profile = NeckProfile::new(config.r_a, config.r0, config.margin)?;
    if !(config.s > 0.0) {
        return Err(Error::Geometry(format!("neck length must be positive, got s = {}", config.s)));
    }
    let interior = InteriorProfiles::seeded(config.interior_length, config.profile_amplitude, config.interior_seed)?;
    let g = ModelGeometry { profile, s: config.s, interior, closure };
    g.check_junctions()?;
    Ok(g)
}

impl ModelGeometry {
    pub fn r0(&self) -> f64 {
        self.profile.r0
    }

    pub fn r_total(&self) -> f64 {
        let end = self.r0() + self.s;
        match self.closure {
            Closure::CappedEnd => end + self.interior.length,
            Closure::TwoEnds => 2.0 * end + self.interior.length,
        }
    }

    /// Same profile and interior with a different neck length.
    pub fn with_s(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::Geometry(format!("neck length must be positive, got s = {s}")));
        }
        Ok(ModelGeometry { s, ..self.clone() })
    }

    pub fn with_interior(&self, interior: InteriorProfiles) -> Self {
        ModelGeometry { interior, ..self.clone() }
    }

    pub fn regions(&self) -> Vec<Region> {
        let (r0, s, l) = (self.r0(), self.s, self.interior.length);
        let mut out = vec![
            Region { kind: RegionKind::Boundary, lo: 0.0, hi: r0 },
            Region { kind: RegionKind::Neck, lo: r0, hi: r0 + s },
            Region { kind: RegionKind::Interior, lo: r0 + s, hi: r0 + s + l },
        ];
        if self.closure == Closure::TwoEnds {
            let a = r0 + s + l;
            out.push(Region { kind: RegionKind::Neck, lo: a, hi: a + s });
            out.push(Region { kind: RegionKind::Boundary, lo: a + s, hi: a + s + r0 });
        }
        out
    }

    pub fn region_of(&self, r: f64) -> Result<RegionKind> {
        let total = self.r_total();
        if !(0.0..=total).contains(&r) {
            return Err(Error::Domain(r));
        }
        let regions = self.regions();
        Ok(regions.iter().find(|g| r >= g.lo && r < g.hi).unwrap_or_else(|| regions.last().expect("nonempty")).kind)
    }

    pub fn metric_coeffs(&self, r: f64) -> Result<Diag> {
        if !(0.0..=self.r_total()).contains(&r) {
            return Err(Error::Domain(r));
        }
        Ok(self.coeffs(r))
    }

    pub fn volume_density(&self, r: f64) -> Result<f64> {
        Ok(self.metric_coeffs(r)?.volume())
    }

    /// Distance to the nearest link component along the radial coordinate, and the side it lies on.
    fn edge_distance(&self, r: f64) -> (f64, f64) {
        match self.closure {
            Closure::TwoEnds if r > 0.5 * self.r_total() => (self.r_total() - r, -1.0),
            _ => (r, 1.0),
        }
    }

    fn check_junctions(&self) -> Result<()> {
        let (a, b) = (self.r0() + self.s, self.r0() + self.s + self.interior.length);
        for x in [a, b] {
            let left = self.coeffs(x - 1e-12);
            let right = self.coeffs(x + 1e-12);
            let jump = (left.pp - right.pp).abs() + (left.tt - right.tt).abs();
            if jump > 1e-9 {
                return Err(Error::Geometry(format!(
                    "metric coefficients discontinuous at junction r = {x} (jump {jump:.2e})"
                )));
            }
        }
        Ok(())
    }
}

impl RadialMetric for ModelGeometry {
    fn span(&self) -> (f64, f64) {
        (0.0, self.r_total())
    }

    fn coeffs(&self, r: f64) -> Diag {
        let x = r - self.r0() - self.s;
        if (0.0..=self.interior.length).contains(&x) {
            return self.interior.metric(x).0;
        }
        let (d, _) = self.edge_distance(r);
        let rt = self.profile.value(d.max(0.0))[0];
        Diag { rr: 1.0, pp: 4.0 * rt * rt, tt: 1.0 }
    }

    fn coeffs_deriv(&self, r: f64) -> Diag {
        let x = r - self.r0() - self.s;
        if (0.0..=self.interior.length).contains(&x) {
            return self.interior.metric(x).1;
        }
        let (d, side) = self.edge_distance(r);
        let [rt, rt1, _] = self.profile.value(d.max(0.0));
        Diag { rr: 0.0, pp: side * 8.0 * rt * rt1, tt: 0.0 }
    }

    fn pieces(&self) -> Vec<Piece> {
        self.regions().into_iter().map(|g| Piece { lo: g.lo, hi: g.hi, flat: g.kind == RegionKind::Neck }).collect()
    }

    fn ends(&self) -> [EndCondition; 2] {
        match self.closure {
            Closure::CappedEnd => [EndCondition::Edge, EndCondition::Reflect],
            Closure::TwoEnds => [EndCondition::Edge, EndCondition::Edge],
        }
    }

    fn interior_origin(&self) -> f64 {
        self.r0() + self.s
    }
}

/// Interior segment continued by flat cylinder stubs of length `neck` towards each link component.
///
/// Coordinate `r'` vanishes at the first junction; the stub occupies `[-neck, 0]`.
/// Past a `Decay` end the cylinder continues to infinity.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderModel {
    pub interior: InteriorProfiles,
    pub closure: Closure,
    pub neck: f64,
    pub end: EndCondition,
    /// When false the stubs are integrated numerically instead of in closed form.
    pub flat_stubs: bool,
}

impl CylinderModel {
    pub fn new(interior: InteriorProfiles, closure: Closure, neck: f64) -> Self {
        CylinderModel { interior, closure, neck, end: EndCondition::Decay, flat_stubs: true }
    }

    pub fn of(g: &ModelGeometry, neck: f64) -> Self {
        Self::new(g.interior.clone(), g.closure, neck)
    }

    /// Cylinder cut off at distance `length` with `u = 0` there, integrated numerically.
    pub fn truncated(interior: InteriorProfiles, closure: Closure, length: f64) -> Self {
        CylinderModel { interior, closure, neck: length, end: EndCondition::Dirichlet, flat_stubs: false }
    }

    /// Radius of each junction between a stub and the interior.
    pub fn junctions(&self) -> Vec<f64> {
        match self.closure {
            Closure::CappedEnd => vec![0.0],
            Closure::TwoEnds => vec![0.0, self.interior.length],
        }
    }
}

impl RadialMetric for CylinderModel {
    fn span(&self) -> (f64, f64) {
        match self.closure {
            Closure::CappedEnd => (-self.neck, self.interior.length),
            Closure::TwoEnds => (-self.neck, self.interior.length + self.neck),
        }
    }

    fn coeffs(&self, r: f64) -> Diag {
        if (0.0..=self.interior.length).contains(&r) {
            self.interior.metric(r).0
        } else {
            NECK_METRIC
        }
    }

    fn coeffs_deriv(&self, r: f64) -> Diag {
        if (0.0..=self.interior.length).contains(&r) {
            self.interior.metric(r).1
        } else {
            Diag::ZERO
        }
    }

    fn pieces(&self) -> Vec<Piece> {
        let l = self.interior.length;
        let mut out = Vec::new();
        if self.neck > 0.0 {
            out.push(Piece { lo: -self.neck, hi: 0.0, flat: self.flat_stubs });
        }
        out.push(Piece { lo: 0.0, hi: l, flat: false });
        if self.closure == Closure::TwoEnds && self.neck > 0.0 {
            out.push(Piece { lo: l, hi: l + self.neck, flat: self.flat_stubs });
        }
        out
    }

    fn ends(&self) -> [EndCondition; 2] {
        match self.closure {
            Closure::CappedEnd => [self.end, EndCondition::Reflect],
            Closure::TwoEnds => [self.end, self.end],
        }
    }

    fn interior_origin(&self) -> f64 {
        0.0
    }
}

/// An additive, `r`-dependent, compactly supported change of a diagonal metric.
pub trait MetricPerturbation: Sync {
    fn delta(&self, r: f64) -> Diag;
    fn delta_deriv(&self, r: f64) -> Diag;
    fn support(&self) -> (f64, f64);
}

/// `base + t * T`.
pub struct Perturbed<'a> {
    pub base: &'a dyn RadialMetric,
    pub t: f64,
    pub tensor: &'a dyn MetricPerturbation,
}

impl RadialMetric for Perturbed<'_> {
    fn span(&self) -> (f64, f64) {
        self.base.span()
    }

    fn coeffs(&self, r: f64) -> Diag {
        self.base.coeffs(r).add_scaled(self.tensor.delta(r), self.t)
    }

    fn coeffs_deriv(&self, r: f64) -> Diag {
        self.base.coeffs_deriv(r).add_scaled(self.tensor.delta_deriv(r), self.t)
    }

    fn pieces(&self) -> Vec<Piece> {
        let (a, b) = self.tensor.support();
        let mut out = Vec::new();
        for p in self.base.pieces() {
            if !p.flat || b <= p.lo || a >= p.hi || self.t == 0.0 {
                out.push(p);
                continue;
            }
            let (lo, hi) = (a.max(p.lo), b.min(p.hi));
            if lo > p.lo {
                out.push(Piece { lo: p.lo, hi: lo, flat: true });
            }
            out.push(Piece { lo, hi, flat: false });
            if hi < p.hi {
                out.push(Piece { lo: hi, hi: p.hi, flat: true });
            }
        }
        out
    }

    fn ends(&self) -> [EndCondition; 2] {
        self.base.ends()
    }

    fn interior_origin(&self) -> f64 {
        self.base.interior_origin()
    }
}

/// Distances from an edge: geometric with ratio `1 + 5 h` up to 0.05, then uniform with
/// spacing at most `h`. Refining `h` refines both parts.
fn graded(len: f64, h: f64) -> Vec<f64> {
    let q = 1.0 + 5.0 * h;
    let mut out = vec![R_MIN];
    let mut d = R_MIN;
    while d * q < 0.05_f64.min(len) {
        d *= q;
        out.push(d);
    }
    let rest = len - d;
    let k = ((rest / h).ceil() as usize).max(1);
    out.extend((1..=k).map(|j| d + rest * j as f64 / k as f64));
    out
}

/// Node grid over the span of `metric`: graded at edges, spacing at most `h` elsewhere,
/// hitting every piece boundary and every entry of `breaks` inside the span.
pub fn node_grid(metric: &dyn RadialMetric, h: f64, breaks: &[f64]) -> Vec<f64> {
    let (lo, hi) = metric.span();
    let ends = metric.ends();
    let mut cuts: Vec<f64> = metric.pieces().iter().flat_map(|p| [p.lo, p.hi]).collect();
    cuts.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cut"));
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut nodes = Vec::new();
    let last = cuts.len() - 2;
    for (i, w) in cuts.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let left_edge = i == 0 && ends[0] == EndCondition::Edge;
        let right_edge = i == last && ends[1] == EndCondition::Edge;
        let seg: Vec<f64> = if left_edge {
            graded(b - a, h).into_iter().map(|d| a + d).collect()
        } else if right_edge {
            let mut v: Vec<f64> = graded(b - a, h).into_iter().map(|d| b - d).collect();
            v.reverse();
            v.insert(0, a);
            v
        } else {
            let k = (((b - a) / h).ceil() as usize).max(1);
            (0..=k).map(|j| a + (b - a) * j as f64 / k as f64).collect()
        };
        for x in seg {
            if nodes.last().is_none_or(|&y: &f64| x - y > 1e-12) {
                nodes.push(x);
            }
        }
    }
    nodes
}
