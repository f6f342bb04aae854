//! Response matrices of source families and the corrected family `omega_s`.
//!
//! A source stands in for a cohomology class; everything here touches it only through
//! the `(1, 0)` and `(3, 0)` responses at each link component. Responses of one family
//! are computed on a shared node grid, so they combine linearly to rounding.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Closure, CylinderModel, InteriorProfiles, ModelGeometry};
use crate::green_maps::cn_constant;
use crate::mode_solver::{
    assemble_ab, mode_coefficients_with, solve_mode_cylinder, ModeCoefficients, SourceBump, SourceSpec,
};
use crate::radial_ode::ModeIndex;

/// Smallest `|det|` of the row-scaled matrix treated as invertible.
pub const DET_THRESHOLD: f64 = 1e-8;
/// Relative accuracy of `e^{3s/4} u_30` against its cylinder limit; `B - B_inf` below
/// `B_FLOOR |B_inf|` is rounding.
pub const B_FLOOR: f64 = 1e-8;
/// Smallest `|e^{3s/4} u_30|` accepted for the lower bound on `B`.
pub const A3_THRESHOLD: f64 = 1e-6;

pub const A_MODE: ModeIndex = ModeIndex { n: 1, m: 0 };
pub const B_MODE: ModeIndex = ModeIndex { n: 3, m: 0 };

/// Columns are sources; rows are `Re, Im` of `v_10` per end, then optionally `Re v_30`
/// at one end.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseMatrix {
    pub matrix: DMatrix<f64>,
    pub p: usize,
    /// End whose `Re v_30` forms the last row.
    pub extra_end: Option<usize>,
}

impl ResponseMatrix {
    pub fn det(&self) -> f64 {
        self.matrix.determinant()
    }

    /// Determinant after dividing each row by its largest entry.
    pub fn scaled_det(&self) -> f64 {
        let mut m = self.matrix.clone();
        for mut row in m.row_iter_mut() {
            let s = row.amax();
            if s > 0.0 {
                row /= s;
            }
        }
        m.determinant()
    }

    /// Ratio of extreme singular values; infinite when singular.
    pub fn condition(&self) -> f64 {
        let sv = self.matrix.clone().svd(false, false).singular_values;
        let (hi, lo) = (sv.max(), sv.min());
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    }

    fn check_invertible(&self, what: &str) -> Result<()> {
        let d = self.scaled_det();
        if !(d.abs() > DET_THRESHOLD) {
            return Err(Error::Singular(format!(
                "{what} is singular: scaled det {d:e}, condition {:e}; reseed the interior profiles or the sources",
                self.condition()
            )));
        }
        Ok(())
    }
}

/// Edges of every bump in a family, in interior coordinates.
pub fn family_breaks(sources: &[&SourceSpec]) -> Vec<f64> {
    let mut out: Vec<f64> = sources
        .iter()
        .flat_map(|s| s.terms.values().flatten().flat_map(|b| [b.center - b.width, b.center + b.width]))
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite break"));
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    out
}

/// `v^cyl_nm` at every end, on nodes through `breaks`.
pub fn cylinder_response(
    interior: &InteriorProfiles,
    closure: Closure,
    src: &SourceSpec,
    mode: ModeIndex,
    breaks: &[f64],
) -> Result<Vec<Complex64>> {
    src.validate(interior.length)?;
    let model = CylinderModel::new(interior.clone(), closure, 0.0);
    let f = src.profile(mode, 0.0);
    Ok(solve_mode_cylinder(&model, mode, &f, breaks)?.readouts)
}

/// `e^{n s / 4} u_n0 / C_n` at every end, the finite-length counterpart of `v^cyl_n0`.
pub fn finite_response(g: &ModelGeometry, src: &SourceSpec, n: i32, breaks: &[f64]) -> Result<Vec<Complex64>> {
    let mode = ModeIndex::new(n, 0)?;
    let coeffs = mode_coefficients_with(g, src, &[mode], breaks)?;
    let scale = (0.25 * n as f64 * g.s).exp() / cn_constant(g, n)?;
    Ok(coeffs.ends.iter().map(|e| e[&mode] * scale).collect())
}

fn re_im_rows(v: &[Complex64]) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn check_family(p: usize, sources: &[SourceSpec]) -> Result<()> {
    if sources.len() != 2 * p {
        return Err(Error::Precondition(format!(
            "{} sources given, {} link components need {}",
            sources.len(),
            p,
            2 * p
        )));
    }
    Ok(())
}

fn from_columns(cols: Vec<Vec<f64>>, p: usize, extra_end: Option<usize>) -> ResponseMatrix {
    let k = cols.len();
    let rows = cols.first().map_or(0, |c| c.len());
    ResponseMatrix { matrix: DMatrix::from_fn(rows, k, |i, j| cols[j][i]), p, extra_end }
}

/// `V`: columns are the `v^cyl_10` responses of the sources.
pub fn assemble_v(interior: &InteriorProfiles, closure: Closure, sources: &[SourceSpec]) -> Result<ResponseMatrix> {
    let p = closure.p();
    check_family(p, sources)?;
    let breaks = family_breaks(&sources.iter().collect::<Vec<_>>());
    let cols = sources
        .par_iter()
        .map(|s| cylinder_response(interior, closure, s, A_MODE, &breaks).map(|v| re_im_rows(&v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(from_columns(cols, p, None))
}

/// `V` with the finite-length responses `e^{s/4} u_10 / C_1` of `g`.
pub fn assemble_v_finite(g: &ModelGeometry, sources: &[SourceSpec], breaks: &[f64]) -> Result<ResponseMatrix> {
    let p = g.closure.p();
    check_family(p, sources)?;
    let cols = sources
        .par_iter()
        .map(|s| finite_response(g, s, 1, breaks).map(|v| re_im_rows(&v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(from_columns(cols, p, None))
}

/// `V~`: `V` bordered by the column of `extra` and the row `Re v^cyl_30` at end `k`.
pub fn assemble_v_tilde(
    interior: &InteriorProfiles,
    closure: Closure,
    sources: &[SourceSpec],
    extra: &SourceSpec,
    k: usize,
) -> Result<ResponseMatrix> {
    let p = closure.p();
    check_family(p, sources)?;
    if k >= p {
        return Err(Error::Precondition(format!("end {k} does not exist for {p} link components")));
    }
    let all: Vec<&SourceSpec> = sources.iter().chain(std::iter::once(extra)).collect();
    let breaks = family_breaks(&all);
    let cols = all
        .par_iter()
        .map(|s| -> Result<Vec<f64>> {
            let mut col = re_im_rows(&cylinder_response(interior, closure, s, A_MODE, &breaks)?);
            col.push(cylinder_response(interior, closure, s, B_MODE, &breaks)?[k].re);
            Ok(col)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(from_columns(cols, p, Some(k)))
}

/// New sources `omega_j = sum_i coeffs[(i, j)] sources_i` with identity response.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedBasis {
    pub coeffs: DMatrix<f64>,
    pub sources: Vec<SourceSpec>,
}

fn combine_columns(label: &str, coeffs: &DMatrix<f64>, sources: &[SourceSpec]) -> Vec<SourceSpec> {
    (0..coeffs.ncols())
        .map(|j| {
            let parts: Vec<(f64, &SourceSpec)> = sources.iter().enumerate().map(|(i, s)| (coeffs[(i, j)], s)).collect();
            SourceSpec::combine(format!("{label}{j}"), &parts)
        })
        .collect()
}

pub fn normalize_basis(v: &ResponseMatrix, sources: &[SourceSpec]) -> Result<NormalizedBasis> {
    if v.matrix.nrows() != v.matrix.ncols() || v.matrix.ncols() != sources.len() {
        return Err(Error::Precondition(format!(
            "response matrix {}x{} does not match {} sources",
            v.matrix.nrows(),
            v.matrix.ncols(),
            sources.len()
        )));
    }
    v.check_invertible("V")?;
    let coeffs = v.matrix.clone().lu().try_inverse().ok_or_else(|| Error::Singular("V has no inverse".into()))?;
    Ok(NormalizedBasis { sources: combine_columns("basis", &coeffs, sources), coeffs })
}

/// Solution of `V~ x = (0, ..., 0, 1)` and its residual.
pub fn solve_v_tilde(vt: &ResponseMatrix) -> Result<(DVector<f64>, f64)> {
    vt.check_invertible("V~")?;
    let k = vt.matrix.nrows();
    let mut rhs = DVector::zeros(k);
    rhs[k - 1] = 1.0;
    let x = vt.matrix.clone().lu().solve(&rhs).ok_or_else(|| Error::Singular("V~ has no inverse".into()))?;
    let res = (&vt.matrix * &x - rhs).amax();
    Ok((x, res))
}

/// The source combining `sources` and `extra` with weights `x`.
pub fn apply_weights(label: &str, x: &DVector<f64>, sources: &[SourceSpec], extra: &SourceSpec) -> SourceSpec {
    let parts: Vec<(f64, &SourceSpec)> =
        sources.iter().chain(std::iter::once(extra)).zip(x.iter()).map(|(s, &c)| (c, s)).collect();
    SourceSpec::combine(label, &parts)
}

/// Bumps with equal placement merged; amplitudes below `tol * sup_norm` dropped.
pub fn merged(spec: &SourceSpec, tol: f64) -> SourceSpec {
    let scale = spec.sup_norm();
    let mut out = SourceSpec::new(spec.label.clone());
    for (mode, bumps) in &spec.terms {
        let mut acc: Vec<SourceBump> = Vec::new();
        for b in bumps {
            match acc.iter_mut().find(|a| a.center == b.center && a.width == b.width) {
                Some(a) => a.amp += b.amp,
                None => acc.push(*b),
            }
        }
        acc.retain(|b| b.amp.norm() > tol * scale);
        if !acc.is_empty() {
            out.terms.insert(*mode, acc);
        }
    }
    out
}

/// One row of the assumptions report, for the rescaled class `e^{3s/4} omega_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionRow {
    pub s: f64,
    /// Weights of the family subtracted from `sigma`.
    pub weights: Vec<f64>,
    /// `sup |f|` bound of the corrected source.
    pub source_norm: f64,
    /// `max_i |u_10(omega_s, Sigma_i)| / |u_10(sigma, Sigma_i)|`, from a fresh solve.
    pub a2_residual: f64,
    /// `min_i |e^{3s/4} u_30(omega_s, Sigma_i)|`.
    pub a3_min: f64,
    /// `max_i sup_theta |A|`, with the `(1, 0)` term at its exact value 0.
    pub sup_a: f64,
    /// `max_i |e^{3s/4} u_10(omega_s, Sigma_i)|` left by rounding in the correction.
    pub a_m0_leftover: f64,
    /// `max_i sup_theta |B - B_inf|`.
    pub sup_b_minus_binf: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionsReport {
    pub rows: Vec<AssumptionRow>,
    /// `C_3 v^cyl_30` of the cylinder-corrected source, per end.
    pub b_inf: Vec<Complex64>,
    /// Corrected source vanishes: `sigma` lies in the span of the family.
    pub degenerate: bool,
    pub a1_bound: f64,
    pub a2_max: f64,
    pub a3_min: f64,
    pub a3_ok: bool,
}

/// Modes carrying `A` and `B`: `n in {1, 3}`, `|m| <= m_max`.
pub fn ab_modes(m_max: i32) -> Vec<ModeIndex> {
    [1, 3].iter().flat_map(|&n| (-m_max..=m_max).map(move |m| ModeIndex { n, m })).collect()
}

/// Corrects `sigma` at each `s` by the finite-length response of `family` so that
/// `u_10 = 0` at every end, then measures the assumptions on the rescaled class.
pub fn construct_omega_s(
    g: &ModelGeometry,
    sigma: &SourceSpec,
    family: &[SourceSpec],
    s_grid: &[f64],
    m_max: i32,
    n_theta: usize,
) -> Result<AssumptionsReport> {
    let p = g.closure.p();
    check_family(p, family)?;
    let all: Vec<&SourceSpec> = family.iter().chain(std::iter::once(sigma)).collect();
    let breaks = family_breaks(&all);
    let modes = ab_modes(m_max);

    // limit of B: C_3 v^cyl_30 of sigma corrected on the cylinder
    let v_cyl = assemble_v(&g.interior, g.closure, family)?;
    v_cyl.check_invertible("V")?;
    let r_cyl = DVector::from_vec(re_im_rows(&cylinder_response(&g.interior, g.closure, sigma, A_MODE, &breaks)?));
    let w_cyl = v_cyl.matrix.clone().lu().solve(&r_cyl).ok_or_else(|| Error::Singular("V has no inverse".into()))?;
    let omega_cyl = corrected(sigma, family, w_cyl.as_slice());
    let c3 = cn_constant(g, 3)?;
    let b_inf: Vec<Complex64> =
        cylinder_response(&g.interior, g.closure, &omega_cyl, B_MODE, &breaks)?.into_iter().map(|v| v * c3).collect();

    let mut rows = Vec::with_capacity(s_grid.len());
    let mut degenerate = false;
    for &s in s_grid {
        let gs = g.with_s(s)?;
        let v_s = assemble_v_finite(&gs, family, &breaks)?;
        v_s.check_invertible(&format!("finite-length V at s = {s}"))?;
        let r_s = DVector::from_vec(re_im_rows(&finite_response(&gs, sigma, 1, &breaks)?));
        let w = v_s.matrix.clone().lu().solve(&r_s).ok_or_else(|| Error::Singular("V has no inverse".into()))?;
        let omega = corrected(sigma, family, w.as_slice());
        degenerate |= merged(&omega, 1e-12).terms.is_empty();

        let before = mode_coefficients_with(&gs, sigma, &[A_MODE], &breaks)?;
        let after = mode_coefficients_with(&gs, &omega, &modes, &breaks)?;
        let scale = (0.75 * s).exp();
        let a2_residual = (0..p)
            .map(|e| {
                let num = after.ends[e][&A_MODE].norm();
                let den = before.ends[e][&A_MODE].norm();
                if den > 0.0 {
                    num / den
                } else {
                    num
                }
            })
            .fold(0.0, f64::max);
        let a3_min = (0..p).map(|e| after.ends[e][&B_MODE].norm() * scale).fold(f64::INFINITY, f64::min);
        let a_m0_leftover = (0..p).map(|e| after.ends[e][&A_MODE].norm() * scale).fold(0.0, f64::max);
        let (sup_a, sup_b) = ab_sups(&after, p, m_max, n_theta, scale, &b_inf)?;
        rows.push(AssumptionRow {
            s,
            weights: w.iter().copied().collect(),
            source_norm: omega.sup_norm(),
            a2_residual,
            a3_min,
            sup_a,
            a_m0_leftover,
            sup_b_minus_binf: sup_b,
        });
    }
    let a1_bound = rows.iter().map(|r| r.source_norm).fold(0.0, f64::max);
    let a2_max = rows.iter().map(|r| r.a2_residual).fold(0.0, f64::max);
    let a3_min = rows.iter().map(|r| r.a3_min).fold(f64::INFINITY, f64::min);
    Ok(AssumptionsReport {
        rows,
        b_inf,
        degenerate,
        a1_bound,
        a2_max,
        a3_min,
        a3_ok: !degenerate && a3_min > A3_THRESHOLD,
    })
}

fn corrected(sigma: &SourceSpec, family: &[SourceSpec], w: &[f64]) -> SourceSpec {
    let mut parts: Vec<(f64, &SourceSpec)> = vec![(1.0, sigma)];
    parts.extend(family.iter().zip(w).map(|(f, &c)| (-c, f)));
    SourceSpec::combine(format!("{}-corrected", sigma.label), &parts)
}

fn ab_sups(
    coeffs: &ModeCoefficients,
    p: usize,
    m_max: i32,
    n_theta: usize,
    scale: f64,
    b_inf: &[Complex64],
) -> Result<(f64, f64)> {
    let mut sup_a: f64 = 0.0;
    let mut sup_b: f64 = 0.0;
    // u_10 = 0 holds by construction; its rounding leftover grows like e^{s/2} and is
    // reported separately
    let mut exact = coeffs.clone();
    for e in exact.ends.iter_mut() {
        e.insert(A_MODE, Complex64::new(0.0, 0.0));
    }
    for (e, binf) in b_inf.iter().enumerate().take(p) {
        let ab = assemble_ab(&exact, e, m_max, n_theta)?;
        sup_a = ab.a.iter().map(|a| a.norm() * scale).fold(sup_a, f64::max);
        sup_b = ab.b.iter().map(|b| (b * scale - binf).norm()).fold(sup_b, f64::max);
    }
    Ok((sup_a, sup_b))
}
