//! Named experiments: each produces CSV tables and a JSON summary with one entry per
//! checked criterion. Outputs depend only on the configuration, so reruns are
//! byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentName};
use crate::error::{Error, Result};
use crate::fit::{decay_check, fit_rate, DecayVerdict, RateFit};
use crate::geometry::{build_geometry, CylinderModel, Diag, GeometryConfig, ModelGeometry, RadialMetric};
use crate::green_maps::{build_gn, build_gn_cyl, cn_constant, poisson_identity_check, ChiParams, TestFunction};
use crate::mode_matrix::{
    ab_modes, apply_weights, assemble_v, assemble_v_tilde, construct_omega_s, cylinder_response, family_breaks,
    normalize_basis, solve_v_tilde, AssumptionsReport, A3_THRESHOLD, A_MODE, B_FLOOR, B_MODE, DET_THRESHOLD,
};
use crate::mode_solver::oracle::{solve_fd_oracle, OracleGrid};
use crate::mode_solver::{mode_coefficients, solve_mode_finite, vcyl, SourceBump, SourceSpec};
use crate::radial_ode::{ratio_bound, ModeIndex};
use crate::sweep::{self, Source, SweepOptions};
use crate::variation::{
    dun0_identity_residual, perturbed_coefficient, perturbed_readout, stretch_tensor, trace_variation, Eta,
    VariationTensor,
};

/// One checked statement: `value` compared with `target` under `comparison`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    /// The mathematical statement being checked, in words.
    pub claim: String,
    pub comparison: String,
    pub target: f64,
    pub tolerance: f64,
    pub value: f64,
    pub pass: bool,
}

impl Criterion {
    /// `value <= target + tolerance`.
    fn at_most(name: &str, claim: &str, value: f64, target: f64, tolerance: f64) -> Self {
        Self::make(name, claim, "at_most", value, target, tolerance, value <= target + tolerance)
    }

    /// `value >= target - tolerance`.
    fn at_least(name: &str, claim: &str, value: f64, target: f64, tolerance: f64) -> Self {
        Self::make(name, claim, "at_least", value, target, tolerance, value >= target - tolerance)
    }

    /// `|value - target| <= tolerance * |target|`.
    fn relative(name: &str, claim: &str, value: f64, target: f64, tolerance: f64) -> Self {
        let pass = (value - target).abs() <= tolerance * target.abs();
        Self::make(name, claim, "relative", value, target, tolerance, pass)
    }

    /// `|value - target| <= tolerance`.
    fn absolute(name: &str, claim: &str, value: f64, target: f64, tolerance: f64) -> Self {
        let pass = (value - target).abs() <= tolerance;
        Self::make(name, claim, "absolute", value, target, tolerance, pass)
    }

    /// Rate at least `min_rate`, or every sample below `floor` relative to its scale.
    fn decay(name: &str, claim: &str, verdict: &DecayVerdict, min_rate: f64, floor: f64) -> Self {
        match verdict {
            DecayVerdict::Fitted { rate, .. } => Self::at_least(name, claim, *rate, min_rate, 0.0),
            DecayVerdict::AtFloor { max_relative } => {
                Self::make(name, claim, "below_floor", *max_relative, floor, 0.0, *max_relative < floor)
            }
        }
    }

    fn make(name: &str, claim: &str, cmp: &str, value: f64, target: f64, tolerance: f64, pass: bool) -> Self {
        Criterion {
            name: name.into(),
            claim: claim.into(),
            comparison: cmp.into(),
            target,
            tolerance,
            value,
            pass: pass && value.is_finite(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitSummary {
    pub name: String,
    pub samples: Vec<(f64, f64)>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub residual: Option<f64>,
    /// All samples sit below the numerical floor; the quantity vanishes to working precision.
    pub at_floor: bool,
}

impl FitSummary {
    fn from_fit(name: &str, fit: &RateFit) -> Self {
        FitSummary {
            name: name.into(),
            samples: fit.samples.clone(),
            slope: Some(fit.slope),
            intercept: Some(fit.intercept),
            residual: Some(fit.residual),
            at_floor: false,
        }
    }

    fn from_verdict(name: &str, samples: &[(f64, f64)], v: &DecayVerdict) -> Self {
        match v {
            DecayVerdict::Fitted { fit, .. } => Self::from_fit(name, fit),
            DecayVerdict::AtFloor { .. } => FitSummary {
                name: name.into(),
                samples: samples.to_vec(),
                slope: None,
                intercept: None,
                residual: None,
                at_floor: true,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: ExperimentName,
    pub description: String,
    pub config: ExperimentConfig,
    pub criteria: Vec<Criterion>,
    pub fits: Vec<FitSummary>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    /// File stem.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub summary: Summary,
}

/// Shortest round-trip scientific notation; locale independent.
fn num(x: f64) -> String {
    format!("{x:e}")
}

fn int(x: impl std::fmt::Display) -> String {
    x.to_string()
}

fn default_grid() -> Vec<f64> {
    (0..7).map(|k| 10.0 + 5.0 * k as f64).collect()
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
}

impl Ctx<'_> {
    fn geometry(&self, s: f64) -> Result<ModelGeometry> {
        build_geometry(&GeometryConfig { s, ..self.cfg.geometry.clone() })
    }

    fn geometry_p(&self, s: f64, p: u32) -> Result<ModelGeometry> {
        build_geometry(&GeometryConfig { s, p, ..self.cfg.geometry.clone() })
    }

    fn s_grid(&self, default: Vec<f64>) -> Vec<f64> {
        self.cfg.s_grid.clone().unwrap_or(default)
    }

    fn modes(&self, default: &[(i32, i32)]) -> Vec<ModeIndex> {
        self.cfg.mode_indices().unwrap_or_else(|| default.iter().map(|&(n, m)| ModeIndex { n, m }).collect())
    }

    fn seed(&self, default: u64) -> u64 {
        self.cfg.seeds.as_ref().and_then(|s| s.first().copied()).unwrap_or(default)
    }

    fn n_values(&self, default: &[i32]) -> Vec<i32> {
        match self.cfg.mode_indices() {
            Some(m) => {
                let mut n: Vec<i32> = m.iter().map(|x| x.n.abs()).collect();
                n.sort();
                n.dedup();
                n
            }
            None => default.to_vec(),
        }
    }
}

/// Runs the configured experiment without touching the file system.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let ctx = Ctx { cfg };
    let (tables, criteria, fits) = match cfg.experiment {
        ExperimentName::DecayScan => decay_scan(&ctx)?,
        ExperimentName::RatioBound => ratio_bound_scan(&ctx)?,
        ExperimentName::VcylConvergence => vcyl_convergence(&ctx)?,
        ExperimentName::GreenIdentity => green_identity(&ctx)?,
        ExperimentName::HnDecay => hn_decay(&ctx)?,
        ExperimentName::StretchIdentity => stretch_identity(&ctx)?,
        ExperimentName::TraceVariation => trace_experiment(&ctx)?,
        ExperimentName::AbRates => ab_rates(&ctx)?,
        ExperimentName::VMatrix => v_matrix(&ctx)?,
        ExperimentName::Assumptions => assumptions(&ctx)?,
        ExperimentName::OracleConvergence => oracle_convergence(&ctx)?,
    };
    let pass = !criteria.is_empty() && criteria.iter().all(|c| c.pass);
    let summary = Summary {
        experiment: cfg.experiment,
        description: cfg.experiment.describe().into(),
        config: cfg.clone(),
        criteria,
        fits,
        pass,
    };
    Ok(Outcome { tables, summary })
}

/// Writes `<stem>.csv` per table and `<experiment>.json` into `dir`.
pub fn write(outcome: &Outcome, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for t in &outcome.tables {
        let path = dir.join(format!("{}.csv", t.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&t.header)?;
        for r in &t.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        out.push(path);
    }
    let path = dir.join(format!("{}.json", outcome.summary.experiment));
    let mut text = serde_json::to_string_pretty(&outcome.summary)?;
    text.push('\n');
    fs::write(&path, text)?;
    out.push(path);
    Ok(out)
}

/// `execute` then `write` into the configured output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<(Outcome, Vec<PathBuf>)> {
    let outcome = execute(cfg)?;
    let files = write(&outcome, &cfg.output_dir)?;
    Ok((outcome, files))
}

type Parts = (Vec<Table>, Vec<Criterion>, Vec<FitSummary>);

fn decay_scan(ctx: &Ctx) -> Result<Parts> {
    let modes = ctx.modes(&[(1, 0), (3, 0), (1, 1)]);
    let grid = ctx.s_grid(default_grid());
    let spec = SourceSpec::seeded("decay", ctx.seed(1), &modes, ctx.cfg.geometry.interior_length)?;
    let jobs: Vec<(ModeIndex, f64)> = modes.iter().flat_map(|&m| grid.iter().map(move |&s| (m, s))).collect();
    let values = jobs
        .par_iter()
        .map(|&(mode, s)| -> Result<Complex64> {
            let g = ctx.geometry(s)?;
            Ok(mode_coefficients(&g, &spec, &[mode])?.get(0, mode).expect("requested mode"))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new("decay_scan", &["s", "n", "m", "re_u", "im_u", "abs_u", "bound"]);
    let mut criteria = Vec::new();
    let mut fits = Vec::new();
    for (k, &mode) in modes.iter().enumerate() {
        let vals = &values[k * grid.len()..(k + 1) * grid.len()];
        let alpha = mode.alpha();
        // tightest envelope K e^{-alpha s} over the grid
        let envelope = grid.iter().zip(vals).map(|(&s, u)| u.norm() * (alpha * s).exp()).fold(0.0, f64::max);
        for (&s, u) in grid.iter().zip(vals) {
            table.push(vec![
                num(s),
                int(mode.n),
                int(mode.m),
                num(u.re),
                num(u.im),
                num(u.norm()),
                num(envelope * (-alpha * s).exp()),
            ]);
        }
        let samples: Vec<(f64, f64)> = grid.iter().zip(vals).map(|(&s, u)| (s, u.norm())).collect();
        let fit = fit_rate(&samples)?;
        let name = format!("slope_{}_{}", mode.n, mode.m);
        criteria.push(Criterion::relative(
            &name,
            "log|u_nm| falls linearly in the neck length with slope -sqrt(n^2/16 + m^2)",
            fit.slope,
            -alpha,
            0.03,
        ));
        fits.push(FitSummary::from_fit(&name, &fit));
    }
    Ok((vec![table], criteria, fits))
}

fn ratio_bound_scan(ctx: &Ctx) -> Result<Parts> {
    let modes = ctx.modes(&[]);
    let modes = if modes.is_empty() {
        [1, 3, 5].iter().flat_map(|&n| (-4..=4).map(move |m| ModeIndex { n, m })).collect()
    } else {
        modes
    };
    let grid = ctx.s_grid(vec![5.0, 10.0, 20.0, 40.0]);
    let g = ctx.geometry(grid[0])?;
    let jobs: Vec<(f64, ModeIndex)> = grid.iter().flat_map(|&s| modes.iter().map(move |&m| (s, m))).collect();
    let vals = jobs.par_iter().map(|&(s, m)| ratio_bound(&g, m.n, m.m, s)).collect::<Result<Vec<_>>>()?;
    let mut table = Table::new("ratio_bound", &["s", "n", "m", "ratio"]);
    for (&(s, m), &v) in jobs.iter().zip(&vals) {
        table.push(vec![num(s), int(m.n), int(m.m), num(v)]);
    }
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let m0 = jobs.iter().zip(&vals).filter(|((_, m), _)| m.m == 0).map(|(_, v)| (v - 1.0).abs()).fold(0.0, f64::max);
    let criteria = vec![
        Criterion::at_most("max_ratio", "I_nm(R0) e^{alpha s} / I_nm(R0 + s) is at most 2", max, 2.0, 1e-9),
        Criterion::at_least("min_ratio", "the ratio is positive", min, 0.0, 0.0),
        Criterion::at_most("m0_deviation", "for m = 0 the ratio equals 1", m0, 0.0, 1e-8),
    ];
    Ok((vec![table], criteria, Vec::new()))
}

fn vcyl_convergence(ctx: &Ctx) -> Result<Parts> {
    let ns = ctx.n_values(&[1, 3]);
    let grid = ctx.s_grid(default_grid());
    let modes: Vec<ModeIndex> = ns.iter().map(|&n| ModeIndex::new(n, 0)).collect::<Result<_>>()?;
    let spec = SourceSpec::seeded("vcyl", ctx.seed(3), &modes, ctx.cfg.geometry.interior_length)?;
    let g0 = ctx.geometry(grid[0])?;
    let mut table = Table::new("vcyl_convergence", &["s", "n", "re_v", "im_v", "re_vcyl", "im_vcyl", "abs_err"]);
    let mut criteria = Vec::new();
    let mut fits = Vec::new();
    for &mode in &modes {
        let n = mode.n;
        let limit = vcyl(&g0.interior, g0.closure, &spec, mode)?[0] * cn_constant(&g0, n)?;
        let vals = grid
            .par_iter()
            .map(|&s| -> Result<Complex64> {
                let g = ctx.geometry(s)?;
                let u = mode_coefficients(&g, &spec, &[mode])?.get(0, mode).expect("requested mode");
                Ok(u * (0.25 * n as f64 * s).exp())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut samples = Vec::new();
        for (&s, v) in grid.iter().zip(&vals) {
            let err = (v - limit).norm();
            table.push(vec![num(s), int(n), num(v.re), num(v.im), num(limit.re), num(limit.im), num(err)]);
            samples.push((s, err));
        }
        let verdict = decay_check(&samples, &vec![limit.norm(); samples.len()], 1e-8)?;
        let name = format!("rate_n{n}");
        criteria.push(Criterion::decay(
            &name,
            "e^{ns/4} u_n0 converges to C_n v^cyl_n0 at rate at least 1/4, or agrees to rounding",
            &verdict,
            0.24,
            1e-8,
        ));
        fits.push(FitSummary::from_verdict(&name, &samples, &verdict));
    }
    let (c1, c3) = (cn_constant(&g0, 1)?, cn_constant(&g0, 3)?);
    criteria.push(Criterion::relative("c3_over_c1_cubed", "C_3 = C_1^3", c3 / c1.powi(3), 1.0, 1e-10));
    Ok((vec![table], criteria, fits))
}

/// Cutoff-based test functions with known `(n, 0)` coefficient.
pub fn manufactured_tests(g: &ModelGeometry) -> Vec<(String, TestFunction)> {
    let o = g.interior_origin();
    let step = |start: f64| ChiParams { start, width: 1.0 };
    let c = Complex64::new;
    vec![
        ("boundary_step".into(), TestFunction::Cutoff { amp: c(1.0, 0.0), psi: step(1.5), bump: None }),
        ("neck_step".into(), TestFunction::Cutoff { amp: c(0.3, -2.0), psi: step(g.r0() + 1.0), bump: None }),
        ("interior_step".into(), TestFunction::Cutoff { amp: c(-1.2, 0.4), psi: step(o + 2.0), bump: None }),
        (
            "step_and_bump".into(),
            TestFunction::Cutoff { amp: c(0.5, 0.5), psi: step(g.r0() + 3.0), bump: Some((o + 5.0, 1.5, c(2.0, 1.0))) },
        ),
        (
            "wide_step_and_bump".into(),
            TestFunction::Cutoff {
                amp: c(2.0, 0.0),
                psi: ChiParams { start: 0.5, width: 2.5 },
                bump: Some((o + 4.0, 2.0, c(0.0, -3.0))),
            },
        ),
    ]
}

fn green_identity(ctx: &Ctx) -> Result<Parts> {
    let ns = ctx.n_values(&[1, 3]);
    let g = ctx.geometry(ctx.s_grid(vec![10.0])[0])?;
    let tests = manufactured_tests(&g);
    let breaks: Vec<f64> = tests.iter().flat_map(|(_, t)| t.breaks()).collect();
    let mut table = Table::new("green_identity", &["n", "test", "re_got", "im_got", "re_want", "im_want", "rel_err"]);
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    for &n in &ns {
        let gm = build_gn(&g, n, ChiParams::near_junction(&g), &breaks)?;
        for (name, t) in &tests {
            let got = poisson_identity_check(&gm, &g, t)?;
            let want = t.known_coefficient().expect("cutoff tests carry their coefficient");
            let rel = (got - want).norm() / want.norm();
            worst = worst.max(rel);
            count += 1;
            table.push(vec![int(n), name.clone(), num(got.re), num(got.im), num(want.re), num(want.im), num(rel)]);
        }
    }
    let criteria = vec![
        Criterion::at_most(
            "max_rel_err",
            "4 pi^2 times the pairing of G_n with the Laplacian of f returns f_n0",
            worst,
            0.0,
            1e-6,
        ),
        Criterion::at_least(
            "test_count",
            "at least five test functions per n",
            (count / ns.len().max(1)) as f64,
            5.0,
            0.0,
        ),
    ];
    Ok((vec![table], criteria, Vec::new()))
}

fn hn_decay(ctx: &Ctx) -> Result<Parts> {
    let ns = ctx.n_values(&[1, 3]);
    let grid = ctx.s_grid(default_grid());
    let mut table = Table::new("hn_decay", &["s", "n", "h_sup"]);
    let mut criteria = Vec::new();
    let mut fits = Vec::new();
    for &n in &ns {
        let vals = grid
            .par_iter()
            .map(|&s| -> Result<f64> {
                let g = ctx.geometry(s)?;
                let gm = build_gn(&g, n, ChiParams::near_junction(&g), &[])?;
                Ok(gm.h_sup((g.r0() + 1.0, g.r0() + 3.0)))
            })
            .collect::<Result<Vec<_>>>()?;
        let samples: Vec<(f64, f64)> = grid.iter().copied().zip(vals.iter().copied()).collect();
        for &(s, v) in &samples {
            table.push(vec![num(s), int(n), num(v)]);
        }
        let fit = fit_rate(&samples)?;
        let name = format!("rate_n{n}");
        let target = (n as f64 + 1.0) / 4.0;
        criteria.push(Criterion::at_least(
            &name,
            "the Poisson-map correction decays near the start of the neck at rate at least (n+1)/4",
            -fit.slope,
            target * 0.97,
            0.0,
        ));
        fits.push(FitSummary::from_fit(&name, &fit));
    }
    Ok((vec![table], criteria, fits))
}

fn stretch_identity(ctx: &Ctx) -> Result<Parts> {
    let ns = ctx.n_values(&[1, 3]);
    let grid = ctx.s_grid(vec![12.0, 20.0]);
    let seed = ctx.seed(21);
    let mut table = Table::new(
        "stretch_identity",
        &["s", "n", "re_du_ds", "im_du_ds", "re_u", "im_u", "re_rhs", "im_rhs", "residual"],
    );
    let mut worst: f64 = 0.0;
    for &s in &grid {
        let g = ctx.geometry(s)?;
        for &n in &ns {
            let mode = ModeIndex::new(n, 0)?;
            let spec = SourceSpec::seeded("stretch", seed, &[mode], g.interior.length)?;
            let f = spec.profile(mode, g.interior_origin());
            let eta = Eta::normalized(g.r0() + 2.0, 1.0);
            let (fa, fb) = f.support();
            let (ea, eb) = eta.support();
            let gm = build_gn(&g, n, ChiParams::near_junction(&g), &[fa, fb, ea, eb])?;
            let id = dun0_identity_residual(&g, n, &spec, eta, &gm, 1e-3)?;
            worst = worst.max(id.residual);
            table.push(vec![
                num(s),
                int(n),
                num(id.du_ds.re),
                num(id.du_ds.im),
                num(id.u_n0.re),
                num(id.u_n0.im),
                num(id.rhs.re),
                num(id.rhs.im),
                num(id.residual),
            ]);
        }
    }
    let mut criteria = vec![Criterion::at_most(
        "max_residual",
        "d u_n0 / ds + (n/4) u_n0 equals the Poisson-map integral against the stretch profile",
        worst,
        0.0,
        1e-4,
    )];
    let mut fits = Vec::new();
    let mut dv = Table::new("stretch_identity_dv", &["s", "n", "abs_dv_ds", "abs_v"]);
    let dv_grid: Vec<f64> = (0..5).map(|k| 10.0 + 5.0 * k as f64).collect();
    for &n in &ns {
        let mode = ModeIndex::new(n, 0)?;
        let spec = SourceSpec::seeded("stretch", seed, &[mode], ctx.cfg.geometry.interior_length)?;
        let v = |s: f64| -> Result<Complex64> {
            let g = ctx.geometry(s)?;
            Ok(mode_coefficients(&g, &spec, &[mode])?.get(0, mode).expect("requested mode")
                * (0.25 * n as f64 * s).exp())
        };
        let rows = dv_grid
            .par_iter()
            .map(|&s| -> Result<(f64, f64, f64)> {
                let h = 1e-3;
                Ok((s, ((v(s + h)? - v(s - h)?) / (2.0 * h)).norm(), v(s)?.norm()))
            })
            .collect::<Result<Vec<_>>>()?;
        for &(s, d, a) in &rows {
            dv.push(vec![num(s), int(n), num(d), num(a)]);
        }
        let samples: Vec<(f64, f64)> = rows.iter().map(|&(s, d, _)| (s, d)).collect();
        let scales: Vec<f64> = rows.iter().map(|&(_, _, a)| a).collect();
        let verdict = decay_check(&samples, &scales, 1e-6)?;
        let name = format!("dv_rate_n{n}");
        criteria.push(Criterion::decay(
            &name,
            "the length derivative of e^{ns/4} u_n0 decays at rate at least 1/4, or vanishes to rounding",
            &verdict,
            0.24,
            1e-6,
        ));
        fits.push(FitSummary::from_verdict(&name, &samples, &verdict));
    }
    Ok((vec![table, dv], criteria, fits))
}

fn trace_experiment(ctx: &Ctx) -> Result<Parts> {
    let ns = ctx.n_values(&[1, 3]);
    let seed = ctx.seed(13);
    let g = ctx.geometry(ctx.s_grid(vec![10.0])[0])?;
    let eta = Eta::normalized(g.r0() + 3.5, 1.5);
    let neck = (g.r0(), g.r0() + g.s);
    let named = |eta: Eta, neck: (f64, f64)| -> Result<Vec<(&'static str, VariationTensor)>> {
        Ok(vec![
            ("stretch", stretch_tensor(eta, neck)?),
            ("rr_pp", VariationTensor::new(eta, Diag { rr: 0.3, pp: 1.0, tt: 0.0 })),
            ("mixed", VariationTensor::new(eta, Diag { rr: 0.5, pp: -2.0, tt: 0.7 })),
            ("tt_only", VariationTensor::new(eta, Diag { rr: 0.0, pp: 0.0, tt: 1.5 })),
        ])
    };
    let dt = 1e-4;
    let mut table =
        Table::new("trace_variation", &["model", "n", "tensor", "re_pred", "im_pred", "re_fd", "im_fd", "rel_err"]);
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    let mut ratio = f64::NAN;
    for &n in &ns {
        let mode = ModeIndex::new(n, 0)?;
        let spec = SourceSpec::seeded("trace", seed, &[mode], g.interior.length)?;

        let f = spec.profile(mode, g.interior_origin());
        let (fa, fb) = f.support();
        let (ea, eb) = eta.support();
        let gm = build_gn(&g, n, ChiParams::near_junction(&g), &[fa, fb, ea, eb])?;
        let u = sweep::solve_on(&g, mode, Some(&f), gm.grid(), &SweepOptions::default())?;
        for (name, tensor) in named(eta, neck)? {
            let pred = trace_variation(&gm, &g, &u, f.support(), &tensor)?;
            let fd = (perturbed_coefficient(&g, mode, &f, &tensor, dt)?
                - perturbed_coefficient(&g, mode, &f, &tensor, -dt)?)
                / (2.0 * dt);
            let rel = (pred - fd).norm() / fd.norm().max(pred.norm());
            worst = worst.max(rel);
            count += 1;
            table.push(vec![
                "finite".into(),
                int(n),
                name.into(),
                num(pred.re),
                num(pred.im),
                num(fd.re),
                num(fd.im),
                num(rel),
            ]);
            if n == ns[0] && name == "mixed" {
                // a vanishing nonzero t keeps the node grid of the perturbed solves
                let base = perturbed_coefficient(&g, mode, &f, &tensor, 1e-300)?;
                let rem = |t: f64| -> Result<f64> {
                    Ok((perturbed_coefficient(&g, mode, &f, &tensor, t)? - base - pred * t).norm())
                };
                ratio = rem(0.01)? / rem(0.005)?;
            }
        }

        let model = CylinderModel::of(&g, 10.0);
        let eta_c = Eta::normalized(-5.5, 2.5);
        let fc = spec.profile(mode, 0.0);
        let (fa, fb) = fc.support();
        let gmc = build_gn_cyl(&model, n, ChiParams::near_junction_cyl(), &[fa, fb, -8.0, -3.0])?;
        let uc = sweep::solve_on(&model, mode, Some(&fc), gmc.grid(), &SweepOptions::default())?;
        for (name, tensor) in named(eta_c, (-10.0, 0.0))?.into_iter().take(3) {
            let pred = trace_variation(&gmc, &model, &uc, fc.support(), &tensor)?;
            let fd = (perturbed_readout(&model, mode, &fc, &tensor, dt)?
                - perturbed_readout(&model, mode, &fc, &tensor, -dt)?)
                / (2.0 * dt);
            let rel = (pred - fd).norm() / fd.norm().max(pred.norm());
            worst = worst.max(rel);
            count += 1;
            table.push(vec![
                "cylinder".into(),
                int(n),
                name.into(),
                num(pred.re),
                num(pred.im),
                num(fd.re),
                num(fd.im),
                num(rel),
            ]);
        }
    }
    let criteria = vec![
        Criterion::at_most(
            "max_rel_err",
            "the trace formula with the Poisson map gives the first variation of u_n0",
            worst,
            0.0,
            1e-3,
        ),
        Criterion::at_least(
            "tensor_count",
            "at least three separable tensors including the stretch",
            count as f64,
            3.0,
            0.0,
        ),
        Criterion::absolute(
            "remainder_halving_ratio",
            "the linearization error is quadratic in t: halving t divides it by 4",
            ratio,
            4.0,
            0.5,
        ),
    ];
    Ok((vec![table], criteria, Vec::new()))
}

fn family(seed: u64, p: usize, m_max: i32, length: f64) -> Result<Vec<SourceSpec>> {
    (0..2 * p as u64).map(|k| SourceSpec::seeded(format!("w{k}"), seed + k, &ab_modes(m_max), length)).collect()
}

fn ab_report(ctx: &Ctx, p: u32) -> Result<(AssumptionsReport, SourceSpec)> {
    let grid = ctx.s_grid(default_grid());
    let m_max = ctx.cfg.m_max.unwrap_or(3);
    let seed = ctx.seed(21);
    let g = ctx.geometry_p(grid[0], p)?;
    let fam = family(seed, p as usize, m_max, g.interior.length)?;
    let sigma = SourceSpec::seeded("sigma", seed + 56, &ab_modes(m_max), g.interior.length)?;
    Ok((construct_omega_s(&g, &sigma, &fam, &grid, m_max, 64)?, sigma))
}

fn ab_rates(ctx: &Ctx) -> Result<Parts> {
    let (report, _) = ab_report(ctx, ctx.cfg.geometry.p)?;
    let mut table = Table::new("ab_rates", &["s", "sup_A", "sup_B_minus_Binf"]);
    for r in &report.rows {
        table.push(vec![num(r.s), num(r.sup_a), num(r.sup_b_minus_binf)]);
    }
    let a: Vec<(f64, f64)> = report.rows.iter().map(|r| (r.s, r.sup_a)).collect();
    let b: Vec<(f64, f64)> = report.rows.iter().map(|r| (r.s, r.sup_b_minus_binf)).collect();
    let binf = report.b_inf.iter().map(|b| b.norm()).fold(f64::INFINITY, f64::min);
    let fa = fit_rate(&a)?;
    let vb = decay_check(&b, &vec![binf; b.len()], B_FLOOR)?;
    let criteria = vec![
        Criterion::at_least(
            "a_rate",
            "sup|A| decays at rate sqrt(17)/4 - 3/4 once u_10 vanishes and the class is rescaled by e^{3s/4}",
            -fa.slope,
            0.27,
            0.0,
        ),
        Criterion::at_least(
            "b_rate",
            "sup|B - B_inf| decays at rate 1/2, fitted above the rounding floor",
            vb.rate().unwrap_or(f64::NAN),
            0.48,
            0.0,
        ),
        Criterion::at_least("b_inf_abs", "the limit B_inf is non-zero", binf, A3_THRESHOLD, 0.0),
    ];
    let fits = vec![FitSummary::from_fit("sup_A", &fa), FitSummary::from_verdict("sup_B_minus_Binf", &b, &vb)];
    Ok((vec![table], criteria, fits))
}

fn v_matrix(ctx: &Ctx) -> Result<Parts> {
    let seed = ctx.seed(7);
    let m_max = ctx.cfg.m_max.unwrap_or(3);
    let mut table = Table::new("v_matrix", &["p", "seed", "det", "cond"]);
    let mut det_ok = true;
    let mut round: f64 = 0.0;
    let mut tilde_v10: f64 = 0.0;
    let mut tilde_v30: f64 = 0.0;
    for p in [1u32, 2] {
        // reseed the interior profiles until V is invertible, keeping every attempt
        let mut chosen = None;
        for k in 0..8u64 {
            let interior_seed = ctx.cfg.geometry.interior_seed + k;
            let g = build_geometry(&GeometryConfig { p, interior_seed, ..ctx.cfg.geometry.clone() })?;
            let fam = family(seed, p as usize, m_max, g.interior.length)?;
            let v = assemble_v(&g.interior, g.closure, &fam)?;
            table.push(vec![int(p), int(interior_seed), num(v.det()), num(v.condition())]);
            if v.scaled_det().abs() > DET_THRESHOLD {
                chosen = Some((g, fam, v));
                break;
            }
        }
        let Some((g, fam, v)) = chosen else {
            det_ok = false;
            continue;
        };
        let basis = normalize_basis(&v, &fam)?;
        let again = assemble_v(&g.interior, g.closure, &basis.sources)?;
        let id = nalgebra::DMatrix::<f64>::identity(2 * p as usize, 2 * p as usize);
        round = round.max((again.matrix - id).amax());
        let extra = SourceSpec::seeded("extra", seed + 99, &ab_modes(m_max), g.interior.length)?;
        let all: Vec<&SourceSpec> = fam.iter().chain([&extra]).collect();
        let breaks = family_breaks(&all);
        for k in 0..p as usize {
            let vt = assemble_v_tilde(&g.interior, g.closure, &fam, &extra, k)?;
            let (x, _) = solve_v_tilde(&vt)?;
            let omega = apply_weights("omega", &x, &fam, &extra);
            let v10 = cylinder_response(&g.interior, g.closure, &omega, A_MODE, &breaks)?;
            tilde_v10 = v10.iter().map(|z| z.norm()).fold(tilde_v10, f64::max);
            let v30 = cylinder_response(&g.interior, g.closure, &omega, B_MODE, &breaks)?;
            tilde_v30 = tilde_v30.max((v30[k].re - 1.0).abs());
        }
    }
    let criteria = vec![
        Criterion::at_least(
            "det_nonzero",
            "V is invertible for p = 1 and p = 2",
            if det_ok { 1.0 } else { 0.0 },
            1.0,
            0.0,
        ),
        Criterion::at_most("basis_round_trip", "the normalized basis has identity response", round, 0.0, 1e-10),
        Criterion::at_most("tilde_v10", "the bordered solve kills v^cyl_10 at every end", tilde_v10, 0.0, 1e-8),
        Criterion::at_most(
            "tilde_v30",
            "the bordered solve gives unit Re v^cyl_30 at the chosen end",
            tilde_v30,
            0.0,
            1e-8,
        ),
    ];
    Ok((vec![table], criteria, Vec::new()))
}

fn assumptions(ctx: &Ctx) -> Result<Parts> {
    let (report, sigma) = ab_report(ctx, ctx.cfg.geometry.p)?;
    let mut table = Table::new(
        "assumptions",
        &["s", "source_norm", "a2_residual", "a3_min", "sup_A", "a_m0_leftover", "sup_B_minus_Binf"],
    );
    for r in &report.rows {
        table.push(vec![
            num(r.s),
            num(r.source_norm),
            num(r.a2_residual),
            num(r.a3_min),
            num(r.sup_a),
            num(r.a_m0_leftover),
            num(r.sup_b_minus_binf),
        ]);
    }
    let criteria = vec![
        Criterion::at_most(
            "a1_bound",
            "the corrected sources stay bounded in s",
            report.a1_bound / sigma.sup_norm(),
            0.0,
            1e3,
        ),
        Criterion::at_most("a2_max", "u_10 of the corrected source vanishes at every end", report.a2_max, 0.0, 1e-10),
        Criterion::at_least(
            "a3_min",
            "e^{3s/4} |u_30| stays away from zero uniformly in s",
            if report.degenerate { 0.0 } else { report.a3_min },
            A3_THRESHOLD,
            0.0,
        ),
    ];
    Ok((vec![table], criteria, Vec::new()))
}

fn oracle_convergence(ctx: &Ctx) -> Result<Parts> {
    let g = ctx.geometry(ctx.s_grid(vec![4.0])[0])?;
    let grids = [(128usize, 16usize), (256, 32), (512, 64)];
    let mut table = Table::new("oracle_convergence", &["nr", "nphi", "m", "rel_err"]);
    let mut criteria = Vec::new();
    for m in [0, 1] {
        let mode = ModeIndex::new(1, m)?;
        let spec = SourceSpec::new("oracle")
            .with_bump(mode, SourceBump { center: 4.0, width: 2.0, amp: Complex64::new(1.0, 0.5) });
        let f = spec.profile(mode, g.interior_origin());
        let sol = solve_mode_finite(&g, mode, &f)?;
        let src = |r: f64, p: f64| f.eval(r) * Complex64::from_polar(1.0, p);
        let errs = grids
            .par_iter()
            .map(|&(nr, nphi)| -> Result<f64> {
                let prof = solve_fd_oracle(&g, m, &src, OracleGrid { nr, nphi })?.mode_profile(1);
                let (mut e, mut scale) = (0.0f64, 0.0f64);
                for k in 1..16 {
                    let r = g.r_total() * k as f64 / 16.0;
                    let u = sol.eval(r)?;
                    e = e.max((prof[k * nr / 16] - u).norm());
                    scale = scale.max(u.norm());
                }
                Ok(e / scale)
            })
            .collect::<Result<Vec<_>>>()?;
        for (&(nr, nphi), &e) in grids.iter().zip(&errs) {
            table.push(vec![int(nr), int(nphi), int(m), num(e)]);
        }
        for (k, w) in errs.windows(2).enumerate() {
            criteria.push(Criterion::absolute(
                &format!("order_m{m}_doubling{}", k + 1),
                "the discrepancy to the 2D oracle shrinks at second order under grid doubling",
                (w[0] / w[1]).log2(),
                2.0,
                0.4,
            ));
        }
    }
    Ok((vec![table], criteria, Vec::new()))
}
