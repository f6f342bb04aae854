//! Composite Simpson rule on nonuniform nodes.

use num_complex::Complex64;

/// Weights `w` with `sum w_i f(x_i) ~ int f` over `[x_0, x_last]`, exact for quadratics.
/// Pairs of intervals use the nonuniform Simpson rule; an odd final interval is closed
/// with the quadratic through its last three nodes.
pub fn simpson_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    if n < 2 {
        return w;
    }
    if n == 2 {
        let h = x[1] - x[0];
        return vec![0.5 * h, 0.5 * h];
    }
    let intervals = n - 1;
    let paired = intervals - intervals % 2;
    let mut i = 0;
    while i < paired {
        let (h0, h1) = (x[i + 1] - x[i], x[i + 2] - x[i + 1]);
        let s = (h0 + h1) / 6.0;
        w[i] += s * (2.0 - h1 / h0);
        w[i + 1] += s * (h0 + h1) * (h0 + h1) / (h0 * h1);
        w[i + 2] += s * (2.0 - h0 / h1);
        i += 2;
    }
    if intervals % 2 == 1 {
        let (h0, h1) = (x[n - 2] - x[n - 3], x[n - 1] - x[n - 2]);
        w[n - 1] += (2.0 * h1 * h1 + 3.0 * h0 * h1) * h1 / (6.0 * (h0 + h1) * h1);
        w[n - 2] += (h1 * h1 + 3.0 * h0 * h1) * h1 / (6.0 * h0 * h1);
        w[n - 3] -= h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
    }
    w
}

pub fn simpson(x: &[f64], f: &[f64]) -> f64 {
    simpson_weights(x).iter().zip(f).map(|(w, v)| w * v).sum()
}

pub fn simpson_complex(x: &[f64], f: &[Complex64]) -> Complex64 {
    simpson_weights(x).iter().zip(f).map(|(w, v)| v * *w).sum()
}

/// Simpson over the nodes lying in `[lo, hi]` (endpoints are expected to be nodes).
pub fn simpson_on(x: &[f64], f: &[Complex64], lo: f64, hi: f64) -> Complex64 {
    let a = x.partition_point(|&v| v < lo - 1e-12);
    let b = x.partition_point(|&v| v <= hi + 1e-12);
    if b <= a + 1 {
        return Complex64::new(0.0, 0.0);
    }
    simpson_complex(&x[a..b], &f[a..b])
}
