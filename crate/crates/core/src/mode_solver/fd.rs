//! Conservative second-order finite differences for `-(P u')' + Q u = rho f`,
//! flux taken at half-points, solved by the Thomas algorithm.
//! Kept as an independent discretization of the same problem the sweep solves.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{EndCondition, FluxCoeffs, RadialMetric, NECK_METRIC};
use crate::radial_ode::{ModeIndex, RadialSolution};
use crate::sweep::{edge_positions, Source};

fn flux(metric: &dyn RadialMetric, mode: ModeIndex, r: f64) -> FluxCoeffs {
    FluxCoeffs::from_metric(metric.coeffs(r), mode.n, mode.m)
}

/// `u(d0) / u(d1)` for the edge-regular solution `d^nu (1 + a1 d^2 + ...)`,
/// with `a1` from the flat-disc metric that every edge neighbourhood carries.
fn edge_ratio(mode: ModeIndex, r_edge: f64, x0: f64, x1: f64) -> f64 {
    let nu = 0.5 * mode.n.abs() as f64;
    let (d0, d1) = ((x0 - r_edge).abs(), (x1 - r_edge).abs());
    // Near an edge the metric is (1, 4 r^2, 1): u'' + u'/r - n^2/(4 r^2) u - m^2 u = 0,
    // whose regular solution is I_nu(|m| r) = r^nu (1 + m^2 r^2 / (4 (nu + 1)) + ...).
    let m = mode.m as f64;
    let a1 = m * m / (4.0 * (nu + 1.0));
    (d0 / d1).powf(nu) * (1.0 + a1 * d0 * d0) / (1.0 + a1 * d1 * d1)
}

/// Boundary row `(diag, off, rhs)` for the end at `nodes[0]` (`left`) or `nodes[N]`.
fn end_row(
    metric: &dyn RadialMetric,
    mode: ModeIndex,
    source: Option<&dyn Source>,
    nodes: &[f64],
    left: bool,
) -> (f64, f64, Complex64) {
    let n = nodes.len();
    let (i0, i1) = if left { (0, 1) } else { (n - 1, n - 2) };
    let (x0, x1) = (nodes[i0], nodes[i1]);
    let h = (x1 - x0).abs();
    let (lo, hi) = metric.span();
    let end = metric.ends()[if left { 0 } else { 1 }];
    let at = flux(metric, mode, x0);
    let ph = flux(metric, mode, 0.5 * (x0 + x1)).p / h;
    let f = source.map_or(Complex64::new(0.0, 0.0), |s| s.eval(x0));
    let cell = at.q * 0.5 * h;
    let load = f * at.rho * 0.5 * h;
    match end {
        EndCondition::Edge => {
            let k = edge_ratio(mode, if left { lo } else { hi }, x0, x1);
            (1.0, -k, Complex64::new(0.0, 0.0))
        }
        EndCondition::Reflect => (ph + cell, -ph, load),
        EndCondition::Decay => {
            let neck = FluxCoeffs::from_metric(NECK_METRIC, mode.n, mode.m);
            (ph + (neck.p * neck.q).sqrt() + cell, -ph, load)
        }
        EndCondition::Dirichlet => (1.0, 0.0, Complex64::new(0.0, 0.0)),
    }
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    let mut piv = diag[0];
    for i in 0..n {
        if i > 0 {
            piv = diag[i] - sub[i] * c[i - 1];
        }
        if !(piv.abs() > 1e-300) {
            return Err(Error::Singular(format!("zero pivot in tridiagonal row {i}")));
        }
        c[i] = if i + 1 < n { sup[i] / piv } else { 0.0 };
        d[i] = if i > 0 { (rhs[i] - d[i - 1] * sub[i]) / piv } else { rhs[0] / piv };
    }
    for i in (0..n - 1).rev() {
        let next = d[i + 1];
        d[i] -= next * c[i];
    }
    Ok(d)
}

/// Finite-difference solve on `nodes` (which must span the metric's span up to edge offsets).
pub fn solve_fd(
    metric: &dyn RadialMetric,
    mode: ModeIndex,
    source: Option<&dyn Source>,
    nodes: &[f64],
) -> Result<RadialSolution> {
    let n = nodes.len();
    if n < 3 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("finite-difference nodes must be increasing, at least 3".into()));
    }
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    let (d, o, b) = end_row(metric, mode, source, nodes, true);
    (diag[0], sup[0], rhs[0]) = (d, o, b);
    let (d, o, b) = end_row(metric, mode, source, nodes, false);
    (diag[n - 1], sub[n - 1], rhs[n - 1]) = (d, o, b);
    for i in 1..n - 1 {
        let (hm, hp) = (nodes[i] - nodes[i - 1], nodes[i + 1] - nodes[i]);
        let pm = flux(metric, mode, 0.5 * (nodes[i] + nodes[i - 1])).p / hm;
        let pp = flux(metric, mode, 0.5 * (nodes[i] + nodes[i + 1])).p / hp;
        let at = flux(metric, mode, nodes[i]);
        let w = 0.5 * (hm + hp);
        sub[i] = -pm;
        sup[i] = -pp;
        diag[i] = pm + pp + at.q * w;
        rhs[i] = source.map_or(Complex64::new(0.0, 0.0), |s| s.eval(nodes[i])) * at.rho * w;
    }
    let values = thomas(&sub, &diag, &sup, &rhs)?;
    let mut derivs = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        derivs[i] = if i == 0 {
            (values[1] - values[0]) / (nodes[1] - nodes[0])
        } else if i == n - 1 {
            (values[i] - values[i - 1]) / (nodes[i] - nodes[i - 1])
        } else {
            let (hm, hp) = (nodes[i] - nodes[i - 1], nodes[i + 1] - nodes[i]);
            (values[i + 1] * (hm * hm) - values[i - 1] * (hp * hp) + values[i] * (hp * hp - hm * hm))
                / (hm * hp * (hm + hp))
        };
    }
    Ok(RadialSolution {
        mode,
        alpha: mode.alpha(),
        grid: nodes.to_vec(),
        values,
        derivs,
        log_scale: vec![0.0; n],
        edges: edge_positions(metric),
    })
}
