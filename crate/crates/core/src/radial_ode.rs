//! Per-mode radial operator, the normalized edge-regular solutions `I_nm`,
//! and their exponential form on the neck.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{node_grid, EndCondition, FluxCoeffs, ModelGeometry, RadialMetric, R_MIN};
use crate::sweep::{homogeneous_on, SweepOptions};

/// Magnitudes above `e^LOG_THRESHOLD` are stored as mantissa and log scale.
pub const LOG_THRESHOLD: f64 = 30.0;

/// Fourier mode `e^{i n phi} e^{i m theta}`; `n` odd.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    pub n: i32,
    pub m: i32,
}

impl ModeIndex {
    pub fn new(n: i32, m: i32) -> Result<Self> {
        if n % 2 == 0 {
            return Err(Error::Mode(format!("n = {n} is even; antisymmetric modes have odd n")));
        }
        Ok(ModeIndex { n, m })
    }

    /// Neck exponent `sqrt(n^2/16 + m^2)`.
    pub fn alpha(self) -> f64 {
        let (n, m) = (self.n as f64, self.m as f64);
        (n * n / 16.0 + m * m).sqrt()
    }

    /// Stored representative with `n > 0`, and whether reading it needs a conjugate.
    pub fn canonical(self) -> (ModeIndex, bool) {
        if self.n > 0 {
            (self, false)
        } else {
            (ModeIndex { n: -self.n, m: -self.m }, true)
        }
    }
}

/// `L u = rho^{-1} (rho u')' - V_nm u` for one mode on a radial metric.
pub struct RadialOperator<'a> {
    pub mode: ModeIndex,
    pub metric: &'a dyn RadialMetric,
}

impl<'a> RadialOperator<'a> {
    pub fn new(metric: &'a dyn RadialMetric, mode: ModeIndex) -> Self {
        RadialOperator { mode, metric }
    }

    /// `V_nm = n^2 / g_phiphi + m^2 / g_thetatheta`.
    pub fn potential(&self, r: f64) -> f64 {
        let g = self.metric.coeffs(r);
        let (n, m) = (self.mode.n as f64, self.mode.m as f64);
        n * n / g.pp + m * m / g.tt
    }

    pub fn flux(&self, r: f64) -> FluxCoeffs {
        FluxCoeffs::from_metric(self.metric.coeffs(r), self.mode.n, self.mode.m)
    }
}

/// Per-mode radial function on a node grid. The value at node `i` is
/// `values[i] * exp(log_scale[i])`, and likewise for `derivs`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialSolution {
    pub mode: ModeIndex,
    pub alpha: f64,
    pub grid: Vec<f64>,
    pub values: Vec<Complex64>,
    pub derivs: Vec<Complex64>,
    pub log_scale: Vec<f64>,
    /// Radii of link components, where the solution behaves like `d^{|n|/2}`.
    pub edges: Vec<f64>,
}

impl RadialSolution {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn value(&self, i: usize) -> Complex64 {
        self.values[i] * self.log_scale[i].exp()
    }

    pub fn deriv(&self, i: usize) -> Complex64 {
        self.derivs[i] * self.log_scale[i].exp()
    }

    pub fn ln_abs(&self, i: usize) -> f64 {
        self.values[i].norm().ln() + self.log_scale[i]
    }

    /// Index of the node equal to `r` (to 1e-9).
    pub fn node(&self, r: f64) -> Option<usize> {
        let i = self.grid.partition_point(|&x| x < r - 1e-9);
        (i < self.grid.len() && (self.grid[i] - r).abs() <= 1e-9).then_some(i)
    }

    /// Cubic Hermite interpolation from nodal values and derivatives. Within unit distance
    /// of a link component the smooth factor `u d^{-|n|/2}` is interpolated instead.
    pub fn eval(&self, r: f64) -> Result<Complex64> {
        let n = self.grid.len();
        if n == 0 || r < self.grid[0] - 1e-12 || r > self.grid[n - 1] + 1e-12 {
            return Err(Error::Domain(r));
        }
        let k = self.grid.partition_point(|&x| x <= r).clamp(1, n - 1) - 1;
        let (a, b) = (self.grid[k], self.grid[k + 1]);
        let shift = (self.log_scale[k + 1] - self.log_scale[k]).exp();
        let mut ends =
            [(a, self.values[k], self.derivs[k]), (b, self.values[k + 1] * shift, self.derivs[k + 1] * shift)];
        let nu = 0.5 * self.mode.n.abs() as f64;
        let edge = self.edges.iter().copied().find(|&e| (a - e).abs() < 1.0 && (b - e).abs() < 1.0);
        let weight = |x: f64, e: f64| -> (f64, f64) {
            let d = (x - e).abs();
            (d.powf(-nu), -nu * (x - e).signum() / d)
        };
        if let Some(e) = edge {
            for (x, u, du) in ends.iter_mut() {
                let (w, dlog) = weight(*x, e);
                *du = (*du + *u * dlog) * w;
                *u *= w;
            }
        }
        let h = b - a;
        let t = ((r - a) / h).clamp(0.0, 1.0);
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let mut v = ends[0].1 * h00 + ends[0].2 * (h10 * h) + ends[1].1 * h01 + ends[1].2 * (h11 * h);
        if let Some(e) = edge {
            v /= weight(r, e).0;
        }
        Ok(v * self.log_scale[k].exp())
    }
}

/// `I_nm` on nodes from a left sweep; requires an `Edge` left end.
pub fn inm_on(
    metric: &dyn RadialMetric,
    mode: ModeIndex,
    nodes: &[f64],
    opts: &SweepOptions,
) -> Result<RadialSolution> {
    if metric.ends()[0] != EndCondition::Edge {
        return Err(Error::Precondition("I_nm is defined from a link component at the left end".into()));
    }
    let (y, lnu) = homogeneous_on(metric, mode, nodes, opts)?;
    let nu = 0.5 * mode.n.abs() as f64;
    let a1 = (mode.m * mode.m) as f64 / (4.0 * (nu + 1.0));
    let d0 = nodes[0] - metric.span().0;
    let ln0 = nu * d0.ln() + (a1 * d0 * d0).ln_1p();
    let mut values = Vec::with_capacity(nodes.len());
    let mut derivs = Vec::with_capacity(nodes.len());
    let mut log_scale = Vec::with_capacity(nodes.len());
    for (i, &r) in nodes.iter().enumerate() {
        let ln_i = ln0 + lnu[i];
        let (mant, scale) = if ln_i > LOG_THRESHOLD { (1.0, ln_i) } else { (ln_i.exp(), 0.0) };
        let p = FluxCoeffs::from_metric(metric.coeffs(r), mode.n, mode.m).p;
        values.push(Complex64::new(mant, 0.0));
        derivs.push(Complex64::new(mant * y[i] / p, 0.0));
        log_scale.push(scale);
    }
    Ok(RadialSolution {
        mode,
        alpha: mode.alpha(),
        grid: nodes.to_vec(),
        values,
        derivs,
        log_scale,
        edges: vec![metric.span().0],
    })
}

/// Nodes of the default grid up to `r_end`, ending exactly there.
pub fn nodes_until(metric: &dyn RadialMetric, r_end: f64, h: f64) -> Vec<f64> {
    let mut nodes: Vec<f64> = node_grid(metric, h, &[r_end]).into_iter().filter(|&r| r <= r_end + 1e-12).collect();
    if nodes.last().is_none_or(|&x| (x - r_end).abs() > 1e-12) {
        nodes.push(r_end);
    }
    nodes
}

/// Normalized edge-regular solution `I_nm = r^{|n|/2}(1 + a_1 r^2 + ...)` on `(0, r_end]`.
pub fn integrate_inm(op: &RadialOperator, r_end: f64) -> Result<RadialSolution> {
    integrate_inm_with(op, r_end, &SweepOptions::default())
}

pub fn integrate_inm_with(op: &RadialOperator, r_end: f64, opts: &SweepOptions) -> Result<RadialSolution> {
    let (lo, hi) = op.metric.span();
    if !(r_end > lo + R_MIN && r_end <= hi + 1e-12) {
        return Err(Error::Domain(r_end));
    }
    let nodes = nodes_until(op.metric, r_end.min(hi), opts.h);
    inm_on(op.metric, op.mode, &nodes, opts)
}

/// `I_n0(r) = exp((|n|/2) int_1^r dt / r~)` on the boundary and neck.
pub fn closed_form_in0(g: &ModelGeometry, n: i32, r: f64) -> Result<f64> {
    ModeIndex::new(n, 0)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    if !(r > 0.0 && r <= g.r0() + g.s + 1e-12) {
        return Err(Error::Domain(r));
    }
    Ok((0.5 * n.abs() as f64 * g.profile.log_integral(r)).exp())
}

/// `I_nm = c (e^{alpha x} + c' e^{-alpha x})` on the neck, `x = r - R0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeckFit {
    pub c: f64,
    pub c_prime: f64,
    /// Largest relative deviation of the two-exponential form from the solution on the neck.
    pub residual: f64,
}

pub const MATCH_TOLERANCE: f64 = 1e-8;

/// Matches value and derivative of `I_nm` at the neck start `neck.0`, then re-evaluates on the neck.
pub fn neck_coefficients(sol: &RadialSolution, neck: (f64, f64)) -> Result<NeckFit> {
    let i0 = sol.node(neck.0).ok_or_else(|| Error::Match(format!("no grid node at neck start r = {}", neck.0)))?;
    let alpha = sol.alpha;
    let (u, du) = (sol.values[i0].re, sol.derivs[i0].re);
    let ln_scale = sol.log_scale[i0];
    let c_mant = 0.5 * (u + du / alpha);
    let c_prime = (alpha * u - du) / (alpha * u + du);
    if !(c_mant > 0.0) {
        return Err(Error::Match(format!("growing coefficient c = {c_mant:e} is not positive")));
    }
    if !(c_prime > -1.0 && c_prime <= 1.0) {
        return Err(Error::Match(format!("c' = {c_prime} outside (-1, 1]")));
    }
    let ln_c = c_mant.ln() + ln_scale;
    let mut residual: f64 = 0.0;
    for i in i0..sol.len() {
        let r = sol.grid[i];
        if r > neck.1 + 1e-12 {
            break;
        }
        let x = r - neck.0;
        let model = ln_c + alpha * x + (c_prime * (-2.0 * alpha * x).exp()).ln_1p();
        residual = residual.max(((sol.ln_abs(i) - model).exp() - 1.0).abs());
    }
    if !(residual <= MATCH_TOLERANCE) {
        return Err(Error::Match(format!("two-exponential form off by {residual:.3e} on the neck")));
    }
    Ok(NeckFit { c: ln_c.exp(), c_prime, residual })
}

/// `I_nm(R0) e^{alpha s} / I_nm(R0 + s) = (1 + c') / (1 + c' e^{-2 alpha s})`, in log space.
pub fn ratio_bound(g: &ModelGeometry, n: i32, m: i32, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Precondition(format!("ratio bound needs s > 0, got {s}")));
    }
    let mode = ModeIndex::new(n, m)?;
    let gs = g.with_s(s)?;
    let op = RadialOperator::new(&gs, mode);
    let r0 = gs.r0();
    let sol = integrate_inm(&op, r0 + s.min(1.0))?;
    let fit = neck_coefficients(&sol, (r0, r0 + s.min(1.0)))?;
    let cp = fit.c_prime;
    let ln = cp.ln_1p() - (cp * (-2.0 * mode.alpha() * s).exp()).ln_1p();
    Ok(ln.exp())
}
