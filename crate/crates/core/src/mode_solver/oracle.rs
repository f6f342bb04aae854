//! Independent check of the mode solver: second-order finite differences of the
//! `(r, phi)` problem with only `theta` Fourier-reduced, on a capped-end model.
//!
//! With `u = q w`, `q^2 = r~` on the boundary region and neck and `q^2 = 2` on the
//! interior, the operator becomes
//! `-(a w_r)_r - c w - e w_phiphi + d w = q rho F` with `a = rho q^2`, `c = q (rho q')'`,
//! `e = rho q^2 / g_phiphi`, `d = m^2 rho q^2 / g_thetatheta`. All coefficients are
//! bounded at `r = 0`, where `w` is smooth, so a vertex grid with a half cell at the edge
//! is second order. Periodic differences in `phi`; block-tridiagonal elimination in `r`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{Closure, ModelGeometry, RadialMetric};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleGrid {
    /// Radial intervals.
    pub nr: usize,
    /// Points in `phi`.
    pub nphi: usize,
}

pub const MAX_GRID: OracleGrid = OracleGrid { nr: 512, nphi: 64 };

/// Grid solution `u(r_i, phi_j) = q(r_i) w[i][j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub r: Vec<f64>,
    pub phi: Vec<f64>,
    pub u: Vec<Vec<Complex64>>,
}

impl OracleSolution {
    /// `(1 / N) sum_j u(r_i, phi_j) e^{-i n phi_j}` at every radius.
    pub fn mode_profile(&self, n: i32) -> Vec<Complex64> {
        let k = self.phi.len() as f64;
        self.u
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.phi)
                    .map(|(u, &p)| u * Complex64::from_polar(1.0, -(n as f64) * p))
                    .sum::<Complex64>()
                    / k
            })
            .collect()
    }
}

/// `[a, c, e, d, q, rho]` at radius `r`.
fn coefficients(g: &ModelGeometry, m: i32, r: f64) -> [f64; 6] {
    let origin = g.interior_origin();
    let co = g.coeffs(r);
    let rho = co.volume();
    let m2 = (m * m) as f64;
    if r <= origin {
        let [t, t1, t2] = g.profile.value(r);
        // rho = 2 r~ here, so rho q^2 = 2 r~^2 and q (rho q')' = r~'^2 / 2 + r~ r~''.
        let a = 2.0 * t * t;
        [a, 0.5 * t1 * t1 + t * t2, 0.5, a * m2 / co.tt, t.sqrt(), rho]
    } else {
        let a = 2.0 * rho;
        [a, 0.0, a / co.pp, a * m2 / co.tt, 2f64.sqrt(), rho]
    }
}

/// Solve `-Delta u = F` for the `e^{i m theta}` component on a capped-end geometry.
pub fn solve_fd_oracle(
    g: &ModelGeometry,
    m: i32,
    source: &dyn Fn(f64, f64) -> Complex64,
    grid: OracleGrid,
) -> Result<OracleSolution> {
    if g.closure != Closure::CappedEnd {
        return Err(Error::Precondition("the 2D oracle models the capped-end closure only".into()));
    }
    if grid.nr < 4 || grid.nphi < 4 || grid.nr > MAX_GRID.nr || grid.nphi > MAX_GRID.nphi {
        return Err(Error::Precondition(format!(
            "oracle grid {}x{} outside [4, {}]x[4, {}]",
            grid.nr, grid.nphi, MAX_GRID.nr, MAX_GRID.nphi
        )));
    }
    let (nr, np) = (grid.nr, grid.nphi);
    let h = g.r_total() / nr as f64;
    let hp = 2.0 * PI / np as f64;
    let r: Vec<f64> = (0..=nr).map(|i| i as f64 * h).collect();
    let phi: Vec<f64> = (0..np).map(|j| j as f64 * hp).collect();
    let half: Vec<f64> = (0..nr).map(|i| coefficients(g, m, (i as f64 + 0.5) * h)[0] / h).collect();

    let mut inverses: Vec<DMatrix<f64>> = Vec::with_capacity(nr + 1);
    let mut ys: Vec<DMatrix<f64>> = Vec::with_capacity(nr + 1);
    for i in 0..=nr {
        let [_, c, e, d, q, rho] = coefficients(g, m, r[i]);
        let w = if i == 0 || i == nr { 0.5 * h } else { h };
        let flux = if i > 0 { half[i - 1] } else { 0.0 } + if i < nr { half[i] } else { 0.0 };
        let ephi = w * e / (hp * hp);
        let mut block = DMatrix::<f64>::zeros(np, np);
        let mut rhs = DMatrix::<f64>::zeros(np, 2);
        for j in 0..np {
            block[(j, j)] = flux + w * (d - c) + 2.0 * ephi;
            block[(j, (j + 1) % np)] -= ephi;
            block[(j, (j + np - 1) % np)] -= ephi;
            let f = source(r[i], phi[j]) * (q * rho * w);
            rhs[(j, 0)] = f.re;
            rhs[(j, 1)] = f.im;
        }
        if i > 0 {
            let l = -half[i - 1];
            block -= &inverses[i - 1] * (l * l);
            rhs -= &ys[i - 1] * l;
        }
        let inv = block
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Singular(format!("oracle block at r = {} is singular", r[i])))?;
        ys.push(&inv * rhs);
        inverses.push(inv);
    }
    let mut w = vec![DMatrix::<f64>::zeros(np, 2); nr + 1];
    w[nr] = ys[nr].clone();
    for i in (0..nr).rev() {
        let u = -half[i];
        w[i] = &ys[i] - (&inverses[i] * &w[i + 1]) * u;
    }
    let u = (0..=nr)
        .map(|i| {
            let q = coefficients(g, m, r[i])[4];
            (0..np).map(|j| Complex64::new(w[i][(j, 0)], w[i][(j, 1)]) * q).collect()
        })
        .collect();
    if w.iter().any(|b| b.iter().any(|x| !x.is_finite())) {
        return Err(Error::Singular("oracle produced non-finite values".into()));
    }
    Ok(OracleSolution { r, phi, u })
}
