//! Two-sided Riccati sweep for the per-mode boundary value problem
//! `-(P u')' + Q u = rho f`.
//!
//! A left sweep carries the relation `P u' = y u + z` satisfied by every solution
//! obeying the left end condition; a right sweep does the same from the other end
//! in the reflected coordinate `x = -r`. Equating the two fluxes at a node gives `u`.
//! `y` is the logarithmic flux of the dominant homogeneous solution, so the sweep is
//! stable in both directions and never forms exponentially large intermediates.
//! On pieces where the metric is exactly the flat neck the recursions are solved
//! in closed form.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{EndCondition, FluxCoeffs, RadialMetric, NECK_METRIC};
use crate::radial_ode::{ModeIndex, RadialSolution};

/// Offset of the virtual wall behind a `Dirichlet` end.
const DIRICHLET_OFFSET: f64 = 1e-6;

/// Radial right-hand side `f` of one mode (the sweep multiplies by `rho`).
pub trait Source: Sync {
    fn eval(&self, r: f64) -> Complex64;
    /// Closed interval outside of which `eval` vanishes.
    fn support(&self) -> (f64, f64);
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    /// Target node spacing away from edges.
    pub h: f64,
    pub rtol: f64,
    pub atol: f64,
    /// When false every node interval is a single Dormand-Prince step.
    pub adaptive: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { h: 0.01, rtol: 1e-10, atol: 1e-12, adaptive: true }
    }
}

/// Sweep state at each node, in sweep order.
pub(crate) struct Half {
    pub y: Vec<f64>,
    pub z: Vec<Complex64>,
    /// `ln u_h` of the dominant homogeneous solution relative to the first node.
    pub lnu: Vec<f64>,
}

#[derive(Clone, Copy)]
struct State {
    y: f64,
    lnu: f64,
    z: Complex64,
}

impl State {
    fn axpy(self, h: f64, k: &[State], c: &[f64]) -> State {
        let mut out = self;
        for (ki, ci) in k.iter().zip(c) {
            out.y += h * ci * ki.y;
            out.lnu += h * ci * ki.lnu;
            out.z += ki.z * (h * ci);
        }
        out
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 7] = [
    &[],
    &[0.2],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// Coefficients in the sweep coordinate.
pub(crate) trait Coefficients {
    fn flux(&self, x: f64) -> FluxCoeffs;
    fn source(&self, x: f64) -> Complex64;
}

struct Oriented<'a> {
    metric: &'a dyn RadialMetric,
    mode: ModeIndex,
    source: Option<&'a dyn Source>,
    sign: f64,
}

impl Coefficients for Oriented<'_> {
    fn flux(&self, x: f64) -> FluxCoeffs {
        FluxCoeffs::from_metric(self.metric.coeffs(self.sign * x), self.mode.n, self.mode.m)
    }

    fn source(&self, x: f64) -> Complex64 {
        match self.source {
            Some(s) => s.eval(self.sign * x),
            None => Complex64::new(0.0, 0.0),
        }
    }
}

fn rhs<Co: Coefficients>(co: &Co, x: f64, s: &State) -> State {
    let f = co.flux(x);
    let src = co.source(x);
    let r = s.y / f.p;
    State { y: f.q - s.y * r, lnu: r, z: -(src * f.rho) - s.z * r }
}

/// Integrates the sweep from node to node. `flat[k]` marks intervals `[x_k, x_{k+1}]`
/// where `P`, `Q` are constant and the source vanishes.
pub(crate) fn run<Co: Coefficients>(co: &Co, xs: &[f64], flat: &[bool], y0: f64, opts: &SweepOptions) -> Result<Half> {
    let n = xs.len();
    let mut out = Half { y: Vec::with_capacity(n), z: Vec::with_capacity(n), lnu: Vec::with_capacity(n) };
    let mut st = State { y: y0, lnu: 0.0, z: Complex64::new(0.0, 0.0) };
    out.y.push(st.y);
    out.z.push(st.z);
    out.lnu.push(st.lnu);
    let mut h_try = f64::INFINITY;
    for k in 0..n - 1 {
        let (a, b) = (xs[k], xs[k + 1]);
        if flat[k] {
            st = flat_step(co.flux(0.5 * (a + b)), st, b - a);
        } else if opts.adaptive {
            st = adaptive(co, st, a, b, &mut h_try, opts)?;
        } else {
            st = dp_step(co, &st, a, b - a).0;
        }
        if !(st.y.is_finite() && st.lnu.is_finite() && st.z.re.is_finite() && st.z.im.is_finite()) {
            return Err(Error::Singular(format!("sweep state not finite near x = {b}")));
        }
        out.y.push(st.y);
        out.z.push(st.z);
        out.lnu.push(st.lnu);
    }
    Ok(out)
}

fn flat_step(f: FluxCoeffs, st: State, d: f64) -> State {
    let pk = (f.p * f.q).sqrt();
    let k = pk / f.p;
    let t = (k * d).tanh();
    let y = pk * (st.y + pk * t) / (pk + st.y * t);
    let eta = st.y / pk;
    let growth = k * d + (0.5 * (1.0 + eta) + 0.5 * (1.0 - eta) * (-2.0 * k * d).exp()).ln();
    State { y, lnu: st.lnu + growth, z: st.z * (-growth).exp() }
}

fn dp_step<Co: Coefficients>(co: &Co, s: &State, x: f64, h: f64) -> (State, f64, f64) {
    let mut k = [State { y: 0.0, lnu: 0.0, z: Complex64::new(0.0, 0.0) }; 7];
    k[0] = rhs(co, x, s);
    for i in 1..7 {
        let si = s.axpy(h, &k[..i], A[i]);
        k[i] = rhs(co, x + C[i] * h, &si);
    }
    let new = s.axpy(h, &k[..6], A[6]);
    let err = State { y: 0.0, lnu: 0.0, z: Complex64::new(0.0, 0.0) }.axpy(h, &k, &E);
    (new, err.y, err.lnu)
}

/// Error control uses only `y` and `ln u`, so the result is exactly linear in the source.
fn adaptive<Co: Coefficients>(
    co: &Co,
    mut st: State,
    a: f64,
    b: f64,
    h_try: &mut f64,
    opts: &SweepOptions,
) -> Result<State> {
    let mut x = a;
    let mut h = h_try.min(b - a);
    let mut rejects = 0usize;
    while x < b {
        let last = b - x <= h * (1.0 + 1e-12);
        let step = if last { b - x } else { h };
        let (new, ey, el) = dp_step(co, &st, x, step);
        let sy = opts.atol + opts.rtol * st.y.abs().max(new.y.abs());
        let sl = opts.atol + opts.rtol * st.lnu.abs().max(new.lnu.abs()).max(1.0);
        let err = (ey / sy).abs().max((el / sl).abs());
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if err <= 1.0 && new.y.is_finite() {
            st = new;
            x = if last { b } else { x + step };
            let grown = step * fac;
            // a clipped final step says nothing about the next interval's scale
            *h_try = if last { grown.max(h) } else { grown };
            h = grown;
        } else {
            rejects += 1;
            if rejects > 10_000 || step < 1e-14 {
                return Err(Error::Singular(format!("step size underflow near x = {x}")));
            }
            h = step * fac.min(0.5);
        }
    }
    Ok(st)
}

/// Starting flux ratio `y` at distance `d` from an end.
fn start_y(end: EndCondition, mode: ModeIndex, at: FluxCoeffs, d: f64) -> f64 {
    match end {
        EndCondition::Edge => {
            let nu = 0.5 * mode.n.abs() as f64;
            let a1 = (mode.m * mode.m) as f64 / (4.0 * (nu + 1.0));
            let r2 = d * d;
            2.0 * (nu + (nu + 2.0) * a1 * r2) / (1.0 + a1 * r2)
        }
        EndCondition::Reflect => 0.0,
        EndCondition::Decay => {
            let f = FluxCoeffs::from_metric(NECK_METRIC, mode.n, mode.m);
            (f.p * f.q).sqrt()
        }
        EndCondition::Dirichlet => {
            let pk = (at.p * at.q).sqrt();
            let k = pk / at.p;
            pk / (k * DIRICHLET_OFFSET).tanh()
        }
    }
}

/// Per-interval flags: inside a flat piece and clear of the source support.
pub fn flat_flags(metric: &dyn RadialMetric, nodes: &[f64], support: Option<(f64, f64)>) -> Vec<bool> {
    let pieces = metric.pieces();
    nodes
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let in_flat = pieces.iter().any(|p| p.flat && a >= p.lo - 1e-12 && b <= p.hi + 1e-12);
            let hits = support.is_some_and(|(lo, hi)| b > lo && a < hi);
            in_flat && !hits
        })
        .collect()
}

fn check_nodes(metric: &dyn RadialMetric, nodes: &[f64]) -> Result<()> {
    if nodes.len() < 2 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("sweep nodes must be strictly increasing, at least 2".into()));
    }
    let (lo, hi) = metric.span();
    if nodes[0] < lo - 1e-12 || nodes[nodes.len() - 1] > hi + 1e-12 {
        return Err(Error::Domain(if nodes[0] < lo { nodes[0] } else { nodes[nodes.len() - 1] }));
    }
    Ok(())
}

/// Left sweep only, no source: `(y, ln u_h)` of the solution selected by the left end condition.
pub fn homogeneous_on(
    metric: &dyn RadialMetric,
    mode: ModeIndex,
    nodes: &[f64],
    opts: &SweepOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_nodes(metric, nodes)?;
    let co = Oriented { metric, mode, source: None, sign: 1.0 };
    let (lo, _) = metric.span();
    let end = metric.ends()[0];
    let y0 = start_y(end, mode, co.flux(nodes[0]), nodes[0] - lo);
    let flat = flat_flags(metric, nodes, None);
    let half = run(&co, nodes, &flat, y0, opts)?;
    Ok((half.y, half.lnu))
}

/// Full two-sided solve on the given nodes.
pub fn solve_on(
    metric: &dyn RadialMetric,
    mode: ModeIndex,
    source: Option<&dyn Source>,
    nodes: &[f64],
    opts: &SweepOptions,
) -> Result<RadialSolution> {
    check_nodes(metric, nodes)?;
    let (lo, hi) = metric.span();
    let ends = metric.ends();
    let support = source.map(|s| s.support());
    let flat = flat_flags(metric, nodes, support);

    let left = Oriented { metric, mode, source, sign: 1.0 };
    let y0 = start_y(ends[0], mode, left.flux(nodes[0]), nodes[0] - lo);
    let l = run(&left, nodes, &flat, y0, opts)?;

    let xs: Vec<f64> = nodes.iter().rev().map(|r| -r).collect();
    let flat_r: Vec<bool> = flat.iter().rev().copied().collect();
    let right = Oriented { metric, mode, source, sign: -1.0 };
    let y0 = start_y(ends[1], mode, right.flux(xs[0]), hi - nodes[nodes.len() - 1]);
    let r = run(&right, &xs, &flat_r, y0, opts)?;

    let n = nodes.len();
    let mut values = Vec::with_capacity(n);
    let mut derivs = Vec::with_capacity(n);
    for i in 0..n {
        let j = n - 1 - i;
        let denom = l.y[i] + r.y[j];
        if !(denom.abs() > 1e-300) || !denom.is_finite() {
            return Err(Error::Singular(format!(
                "left and right sweeps agree at r = {} (homogeneous solution exists)",
                nodes[i]
            )));
        }
        let u = -(r.z[j] + l.z[i]) / denom;
        let p = left.flux(nodes[i]).p;
        values.push(u);
        derivs.push((u * l.y[i] + l.z[i]) / p);
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

pub fn edge_positions(metric: &dyn RadialMetric) -> Vec<f64> {
    let (lo, hi) = metric.span();
    let ends = metric.ends();
    [(ends[0], lo), (ends[1], hi)].iter().filter(|(e, _)| *e == EndCondition::Edge).map(|&(_, x)| x).collect()
}

/// Nodes at spacing `opts.h` covering the metric span and the listed breakpoints.
pub fn default_nodes(metric: &dyn RadialMetric, breaks: &[f64], opts: &SweepOptions) -> Vec<f64> {
    crate::geometry::node_grid(metric, opts.h, breaks)
}

/// Solve with nodes that resolve the source support.
pub fn solve(
    metric: &dyn RadialMetric,
    mode: ModeIndex,
    source: Option<&dyn Source>,
    breaks: &[f64],
) -> Result<RadialSolution> {
    let opts = SweepOptions::default();
    let mut b = breaks.to_vec();
    if let Some(s) = source {
        let (a, c) = s.support();
        b.extend([a, c]);
    }
    let nodes = default_nodes(metric, &b, &opts);
    solve_on(metric, mode, source, &nodes, &opts)
}
