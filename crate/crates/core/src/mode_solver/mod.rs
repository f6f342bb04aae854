//! Mode-by-mode solves of `Delta u = F` on the radial models, extraction of the
//! boundary coefficients `u_nm`, and assembly of `A(theta)`, `B(theta)`.

pub mod fd;
pub mod oracle;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{bump, Closure, CylinderModel, EndCondition, InteriorProfiles, ModelGeometry, RadialMetric};
use crate::radial_ode::{integrate_inm, ModeIndex, RadialOperator, RadialSolution};
use crate::sweep::{self, Source};

/// Largest admissible relative spread of `u / I_nm` over the extraction window.
pub const EXTRACTION_TOLERANCE: f64 = 1e-6;

/// `amp * bump((x - center) / width)` in interior coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceBump {
    pub center: f64,
    pub width: f64,
    pub amp: Complex64,
}

/// Per-mode radial sources supported in the interior segment. Only `n > 0` is stored;
/// `f_{-n,-m}` is read as the conjugate of `f_{n,m}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceSpec {
    pub label: String,
    pub terms: BTreeMap<ModeIndex, Vec<SourceBump>>,
}

impl SourceSpec {
    pub fn new(label: impl Into<String>) -> Self {
        SourceSpec { label: label.into(), terms: BTreeMap::new() }
    }

    pub fn with_bump(mut self, mode: ModeIndex, bump: SourceBump) -> Self {
        let (key, conj) = mode.canonical();
        let amp = if conj { bump.amp.conj() } else { bump.amp };
        self.terms.entry(key).or_default().push(SourceBump { amp, ..bump });
        self
    }

    /// Two random bumps per listed mode, reproducible from `seed`.
    pub fn seeded(label: impl Into<String>, seed: u64, modes: &[ModeIndex], length: f64) -> Result<Self> {
        if !(length >= 4.0) {
            return Err(Error::Precondition(format!("interior length {length} too short for seeded sources")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spec = SourceSpec::new(label);
        for &mode in modes {
            for _ in 0..2 {
                let center = rng.random_range(1.5..length - 1.5);
                let width = rng.random_range(0.6..1.2);
                let amp = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                spec = spec.with_bump(mode, SourceBump { center, width, amp });
            }
        }
        Ok(spec)
    }

    /// `sum_k c_k * spec_k`, keeping every bump.
    pub fn combine(label: impl Into<String>, parts: &[(f64, &SourceSpec)]) -> Self {
        let mut out = SourceSpec::new(label);
        for (c, spec) in parts {
            for (mode, bumps) in &spec.terms {
                let dst = out.terms.entry(*mode).or_default();
                dst.extend(bumps.iter().map(|b| SourceBump { amp: b.amp * *c, ..*b }));
            }
        }
        out
    }

    pub fn modes(&self) -> Vec<ModeIndex> {
        self.terms.keys().copied().collect()
    }

    /// Radial source of `mode` placed with interior coordinate 0 at global radius `origin`.
    pub fn profile(&self, mode: ModeIndex, origin: f64) -> ModeSource {
        let (key, conj) = mode.canonical();
        let bumps = self
            .terms
            .get(&key)
            .map(|b| b.iter().map(|x| SourceBump { amp: if conj { x.amp.conj() } else { x.amp }, ..*x }).collect())
            .unwrap_or_default();
        ModeSource { origin, bumps }
    }

    /// Interior-coordinate hull of all bumps.
    pub fn support(&self) -> Option<(f64, f64)> {
        let all = self.terms.values().flatten();
        let lo = all.clone().map(|b| b.center - b.width).fold(f64::INFINITY, f64::min);
        let hi = all.map(|b| b.center + b.width).fold(f64::NEG_INFINITY, f64::max);
        (lo <= hi).then_some((lo, hi))
    }

    /// Upper bound of `sup |f_nm|` over modes.
    pub fn sup_norm(&self) -> f64 {
        self.terms.values().map(|b| b.iter().map(|x| x.amp.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn validate(&self, length: f64) -> Result<()> {
        for (mode, bumps) in &self.terms {
            ModeIndex::new(mode.n, mode.m)?;
            for b in bumps {
                if !(b.width > 0.0 && b.center - b.width >= 0.0 && b.center + b.width <= length) {
                    return Err(Error::Precondition(format!(
                        "source '{}' bump at {} (width {}) leaves the interior [0, {length}]",
                        self.label, b.center, b.width
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One mode of a `SourceSpec`, in global radius.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSource {
    pub origin: f64,
    pub bumps: Vec<SourceBump>,
}

impl ModeSource {
    pub fn is_zero(&self) -> bool {
        self.bumps.iter().all(|b| b.amp == Complex64::new(0.0, 0.0))
    }

    /// Value and first two derivatives.
    pub fn eval_derivs(&self, r: f64) -> [Complex64; 3] {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for b in &self.bumps {
            let [v, d, dd] = bump((r - self.origin - b.center) / b.width);
            out[0] += b.amp * v;
            out[1] += b.amp * (d / b.width);
            out[2] += b.amp * (dd / (b.width * b.width));
        }
        out
    }
}

impl Source for ModeSource {
    fn eval(&self, r: f64) -> Complex64 {
        self.bumps.iter().map(|b| b.amp * bump((r - self.origin - b.center) / b.width)[0]).sum()
    }

    fn support(&self) -> (f64, f64) {
        let lo = self.bumps.iter().map(|b| b.center - b.width).fold(f64::INFINITY, f64::min);
        let hi = self.bumps.iter().map(|b| b.center + b.width).fold(f64::NEG_INFINITY, f64::max);
        if lo > hi {
            (self.origin, self.origin)
        } else {
            (self.origin + lo, self.origin + hi)
        }
    }
}

fn check_in_interior(f: &ModeSource, origin: f64, length: f64) -> Result<()> {
    let (lo, hi) = f.support();
    if f.bumps.is_empty() {
        return Ok(());
    }
    if lo < origin - 1e-12 || hi > origin + length + 1e-12 {
        return Err(Error::Precondition(format!(
            "source support [{lo}, {hi}] leaves the interior [{origin}, {}]",
            origin + length
        )));
    }
    Ok(())
}

/// Extraction window `[R0/4, 3 R0/4]` measured from a link component.
pub fn extraction_window(r0: f64) -> (f64, f64) {
    (0.25 * r0, 0.75 * r0)
}

/// Radial solve of one mode on the finite model with edge regularity at every link component.
pub fn solve_mode_finite(g: &ModelGeometry, mode: ModeIndex, f: &ModeSource) -> Result<RadialSolution> {
    solve_mode_finite_with(g, mode, f, &[])
}

/// As `solve_mode_finite` with extra node positions; sources sharing `extra` and support
/// hull share a grid, so their solutions combine linearly to rounding.
pub fn solve_mode_finite_with(
    g: &ModelGeometry,
    mode: ModeIndex,
    f: &ModeSource,
    extra: &[f64],
) -> Result<RadialSolution> {
    check_in_interior(f, g.interior_origin(), g.interior.length)?;
    let (a, b) = extraction_window(g.r0());
    let t = g.r_total();
    let mut breaks = vec![a, b, t - b, t - a];
    breaks.extend_from_slice(extra);
    if f.is_zero() {
        return sweep::solve(g, mode, None, &breaks);
    }
    sweep::solve(g, mode, Some(f), &breaks)
}

/// Least-squares `u_nm` with `sol = u_nm I_nm` over the window, where `to_r` maps the
/// distance from the link component to the radius of `sol`.
fn extract_with(
    sol: &RadialSolution,
    inm: &RadialSolution,
    window: (f64, f64),
    to_r: impl Fn(f64) -> f64,
) -> Result<(Complex64, f64)> {
    let mut pairs = Vec::new();
    for i in 0..inm.len() {
        let d = inm.grid[i];
        if d >= window.0 - 1e-12 && d <= window.1 + 1e-12 {
            pairs.push((inm.value(i).re, sol.eval(to_r(d))?));
        }
    }
    if pairs.len() < 3 {
        return Err(Error::Precondition("extraction window holds fewer than 3 nodes".into()));
    }
    let num: Complex64 = pairs.iter().map(|(i, u)| u * *i).sum();
    let den: f64 = pairs.iter().map(|(i, _)| i * i).sum();
    let c = num / den;
    let scale = pairs.iter().map(|(i, u)| (u / *i).norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok((c, 0.0));
    }
    let residual = pairs.iter().map(|(i, u)| (u / *i - c).norm()).fold(0.0, f64::max) / c.norm().max(1e-300);
    if !(residual <= EXTRACTION_TOLERANCE) {
        return Err(Error::Extraction { residual, tolerance: EXTRACTION_TOLERANCE });
    }
    Ok((c, residual))
}

/// `u_nm` at the link component at `r = 0`.
pub fn extract_coefficient(sol: &RadialSolution, inm: &RadialSolution, r0: f64) -> Result<(Complex64, f64)> {
    extract_with(sol, inm, extraction_window(r0), |d| d)
}

/// `u_nm` at the link component at `r = r_total`.
pub fn extract_coefficient_far(
    sol: &RadialSolution,
    inm: &RadialSolution,
    r0: f64,
    r_total: f64,
) -> Result<(Complex64, f64)> {
    extract_with(sol, inm, extraction_window(r0), |d| r_total - d)
}

/// `I_nm` on the boundary region, for extraction.
pub fn boundary_inm(g: &ModelGeometry, mode: ModeIndex) -> Result<RadialSolution> {
    let (canon, _) = mode.canonical();
    integrate_inm(&RadialOperator::new(g, canon), g.r0())
}

/// `u_nm(s, omega, Sigma_i)` for every end and mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeCoefficients {
    pub s: f64,
    /// `ends[i][mode]`, stored for `n > 0`.
    pub ends: Vec<BTreeMap<ModeIndex, Complex64>>,
    pub residuals: BTreeMap<ModeIndex, f64>,
}

impl ModeCoefficients {
    pub fn get(&self, end: usize, mode: ModeIndex) -> Option<Complex64> {
        let (key, conj) = mode.canonical();
        self.ends.get(end)?.get(&key).map(|c| if conj { c.conj() } else { *c })
    }
}

/// Solves every requested mode and extracts its coefficient at each end.
/// Modes absent from the source have coefficient exactly 0.
pub fn mode_coefficients(g: &ModelGeometry, src: &SourceSpec, modes: &[ModeIndex]) -> Result<ModeCoefficients> {
    mode_coefficients_with(g, src, modes, &[])
}

/// `mode_coefficients` with extra node positions, in interior coordinates.
pub fn mode_coefficients_with(
    g: &ModelGeometry,
    src: &SourceSpec,
    modes: &[ModeIndex],
    extra: &[f64],
) -> Result<ModeCoefficients> {
    let extra: Vec<f64> = extra.iter().map(|x| x + g.interior_origin()).collect();
    src.validate(g.interior.length)?;
    let mut keys: Vec<ModeIndex> = modes.iter().map(|m| m.canonical().0).collect();
    keys.sort();
    keys.dedup();
    let p = g.closure.p();
    let per_mode: Vec<(ModeIndex, Vec<Complex64>, f64)> = keys
        .par_iter()
        .map(|&mode| -> Result<_> {
            let f = src.profile(mode, g.interior_origin());
            if f.is_zero() {
                return Ok((mode, vec![Complex64::new(0.0, 0.0); p], 0.0));
            }
            let sol = solve_mode_finite_with(g, mode, &f, &extra)?;
            let inm = boundary_inm(g, mode)?;
            let (c0, r0) = extract_coefficient(&sol, &inm, g.r0())?;
            let mut vals = vec![c0];
            let mut res = r0;
            if p == 2 {
                let (c1, r1) = extract_coefficient_far(&sol, &inm, g.r0(), g.r_total())?;
                vals.push(c1);
                res = res.max(r1);
            }
            Ok((mode, vals, res))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ends = vec![BTreeMap::new(); p];
    let mut residuals = BTreeMap::new();
    for (mode, vals, res) in per_mode {
        for (e, v) in vals.into_iter().enumerate() {
            ends[e].insert(mode, v);
        }
        residuals.insert(mode, res);
    }
    Ok(ModeCoefficients { s: g.s, ends, residuals })
}

/// Solution on a cylinder model and the coefficient of `e^{alpha r'}` at each end.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderSolve {
    pub solution: RadialSolution,
    pub readouts: Vec<Complex64>,
}

/// Readout at each end of a cylinder model: past a `Decay` end the solution is exactly
/// `u(end) e^{alpha |r' - end|}`-continued, so the junction coefficient is `u(end) e^{alpha neck}`.
pub fn cylinder_readouts(model: &CylinderModel, sol: &RadialSolution) -> Result<Vec<Complex64>> {
    let alpha = sol.alpha;
    let (lo, hi) = model.span();
    let junctions = model.junctions();
    let ends = model.ends();
    let mut out = Vec::new();
    for (k, &j) in junctions.iter().enumerate() {
        let end_r = if k == 0 { lo } else { hi };
        let v = match ends[k] {
            EndCondition::Decay => sol.eval(end_r)? * (alpha * (j - end_r).abs()).exp(),
            _ => sol.eval(j)?,
        };
        out.push(v);
    }
    Ok(out)
}

/// Solve on the cylinder-limit model, Robin decay closure at each cylindrical end.
pub fn solve_mode_cylinder(
    model: &CylinderModel,
    mode: ModeIndex,
    f: &ModeSource,
    breaks: &[f64],
) -> Result<CylinderSolve> {
    check_in_interior(f, 0.0, model.interior.length)?;
    let solution = if f.is_zero() {
        sweep::solve(model, mode, None, breaks)?
    } else {
        sweep::solve(model, mode, Some(f), breaks)?
    };
    let readouts = cylinder_readouts(model, &solution)?;
    Ok(CylinderSolve { solution, readouts })
}

/// `v^cyl_nm(omega, Sigma_i)` for each end.
pub fn vcyl(
    interior: &InteriorProfiles,
    closure: Closure,
    src: &SourceSpec,
    mode: ModeIndex,
) -> Result<Vec<Complex64>> {
    src.validate(interior.length)?;
    let model = CylinderModel::new(interior.clone(), closure, 0.0);
    let f = src.profile(mode, 0.0);
    Ok(solve_mode_cylinder(&model, mode, &f, &[])?.readouts)
}

/// `theta` samples of `A = sum_m u_1m e^{i m theta}` and `B = sum_m u_3m e^{i m theta}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AbSamples {
    pub theta: Vec<f64>,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
}

pub fn assemble_ab(coeffs: &ModeCoefficients, end: usize, m_max: i32, n_theta: usize) -> Result<AbSamples> {
    let mut missing = Vec::new();
    let mut pick = |n: i32| -> Vec<(i32, Complex64)> {
        (-m_max..=m_max)
            .filter_map(|m| {
                let mode = ModeIndex { n, m };
                match coeffs.get(end, mode) {
                    Some(c) => Some((m, c)),
                    None => {
                        missing.push(format!("({n},{m})"));
                        None
                    }
                }
            })
            .collect()
    };
    let (ua, ub) = (pick(1), pick(3));
    if !missing.is_empty() {
        return Err(Error::MissingModes(missing.join(", ")));
    }
    let theta: Vec<f64> = (0..n_theta).map(|k| 2.0 * PI * k as f64 / n_theta as f64).collect();
    let sum = |terms: &[(i32, Complex64)], t: f64| -> Complex64 {
        terms.iter().map(|(m, c)| c * Complex64::from_polar(1.0, *m as f64 * t)).sum()
    };
    let a = theta.iter().map(|&t| sum(&ua, t)).collect();
    let b = theta.iter().map(|&t| sum(&ub, t)).collect();
    Ok(AbSamples { theta, a, b })
}

/// Default truncation: `n in {1, 3, 5}`, `|m| <= 8`.
pub fn default_modes() -> Vec<ModeIndex> {
    let mut out = Vec::new();
    for n in [1, 3, 5] {
        for m in -8..=8 {
            out.push(ModeIndex { n, m });
        }
    }
    out
}
