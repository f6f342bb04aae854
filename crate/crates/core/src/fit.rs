//! Log-linear least-squares rate fits.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub samples: Vec<(f64, f64)>,
    /// Slope of `ln |value|` against `s`.
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square deviation of `ln |value|` from the line.
    pub residual: f64,
    /// Set when the samples change sign; the fit then uses magnitudes.
    pub sign_change: bool,
}

pub const MIN_SAMPLES: usize = 5;

pub fn fit_rate(samples: &[(f64, f64)]) -> Result<RateFit> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples(samples.len()));
    }
    if let Some(&(s, _)) = samples.iter().find(|(_, v)| !(v.abs() > 0.0) || !v.is_finite()) {
        return Err(Error::Precondition(format!("rate fit needs finite nonzero values (s = {s})")));
    }
    let sign_change = samples.windows(2).any(|w| w[0].1.signum() != w[1].1.signum());
    let k = samples.len() as f64;
    let xm = samples.iter().map(|p| p.0).sum::<f64>() / k;
    let ym = samples.iter().map(|p| p.1.abs().ln()).sum::<f64>() / k;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, v) in samples {
        let (dx, dy) = (x - xm, v.abs().ln() - ym);
        sxx += dx * dx;
        sxy += dx * dy;
    }
    if !(sxx > 0.0) {
        return Err(Error::Precondition("rate fit needs at least two distinct s values".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let residual =
        (samples.iter().map(|&(x, v)| (v.abs().ln() - intercept - slope * x).powi(2)).sum::<f64>() / k).sqrt();
    Ok(RateFit { samples: samples.to_vec(), slope, intercept, residual, sign_change })
}

impl RateFit {
    /// `|slope - target| / |target| <= tol`.
    pub fn matches(&self, target: f64, tol: f64) -> bool {
        (self.slope - target).abs() <= tol * target.abs()
    }
}

/// Outcome of checking that a quantity decays at least at a given rate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum DecayVerdict {
    Fitted {
        rate: f64,
        fit: RateFit,
    },
    /// Every sample sits below the numerical floor relative to `scale`; the quantity is zero
    /// to working precision and any rate bound holds trivially.
    AtFloor {
        max_relative: f64,
    },
}

impl DecayVerdict {
    pub fn holds(&self, min_rate: f64) -> bool {
        match self {
            DecayVerdict::Fitted { rate, .. } => *rate >= min_rate,
            DecayVerdict::AtFloor { .. } => true,
        }
    }

    pub fn rate(&self) -> Option<f64> {
        match self {
            DecayVerdict::Fitted { rate, .. } => Some(*rate),
            DecayVerdict::AtFloor { .. } => None,
        }
    }
}

/// Fits `-slope` on the samples with `|value| / scale` at or above `floor`, or reports
/// `AtFloor` when none are. Samples below the floor carry no rate information.
/// `samples` and `scales` are paired by index.
pub fn decay_check(samples: &[(f64, f64)], scales: &[f64], floor: f64) -> Result<DecayVerdict> {
    let rel: Vec<f64> =
        samples.iter().zip(scales).map(|(&(_, v), &sc)| v.abs() / sc.abs().max(f64::MIN_POSITIVE)).collect();
    let max_relative = rel.iter().copied().fold(0.0, f64::max);
    if max_relative < floor {
        return Ok(DecayVerdict::AtFloor { max_relative });
    }
    let kept: Vec<(f64, f64)> = samples.iter().zip(&rel).filter(|(_, &r)| r >= floor).map(|(&x, _)| x).collect();
    let fit = fit_rate(&kept)?;
    Ok(DecayVerdict::Fitted { rate: -fit.slope, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..7).map(|k| 10.0 + 5.0 * k as f64).collect()
    }

    #[test]
    fn pure_exponential() {
        let s: Vec<_> = grid().into_iter().map(|s| (s, 3.0 * (-0.25 * s).exp())).collect();
        let f = fit_rate(&s).unwrap();
        assert!((f.slope + 0.25).abs() < 1e-12);
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn subleading_correction() {
        let s: Vec<_> = grid().into_iter().map(|s| (s, (-0.25 * s).exp() * (1.0 + (-s).exp()))).collect();
        assert!((fit_rate(&s).unwrap().slope + 0.25).abs() < 1e-3);
    }

    #[test]
    fn constant_and_sign_change() {
        let s: Vec<_> = grid().into_iter().map(|s| (s, 2.0)).collect();
        assert_eq!(fit_rate(&s).unwrap().slope, 0.0);
        let t: Vec<_> = grid().into_iter().enumerate().map(|(k, s)| (s, if k % 2 == 0 { 1.0 } else { -1.0 })).collect();
        assert!(fit_rate(&t).unwrap().sign_change);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(fit_rate(&[(1.0, 1.0); 4]), Err(Error::TooFewSamples(4))));
    }

    #[test]
    fn floor_short_circuits() {
        let s: Vec<_> = grid().into_iter().map(|s| (s, 1e-15 * s)).collect();
        let v = decay_check(&s, &vec![1.0; s.len()], 1e-8).unwrap();
        assert!(matches!(v, DecayVerdict::AtFloor { .. }) && v.holds(10.0));
    }

    #[test]
    fn floor_drops_noise_samples() {
        let mut s: Vec<_> = grid().into_iter().map(|s| (s, (-0.5 * s).exp())).collect();
        s.push((45.0, 1e-12));
        s.push((50.0, 3e-12));
        let v = decay_check(&s, &vec![1.0; s.len()], 1e-10).unwrap();
        assert!((v.rate().unwrap() - 0.5).abs() < 1e-12);
    }
}
