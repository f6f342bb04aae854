//! Acceptance suite: one PASS/FAIL line per headline criterion, exit status 1 if any fails.

use std::process::ExitCode;
use std::time::Instant;

use neckharm::config::{ExperimentConfig, ExperimentName};
use neckharm::experiments::{execute, Criterion};
use neckharm::geometry::{build_geometry, GeometryConfig};
use neckharm::radial_ode::{integrate_inm, ModeIndex, RadialOperator};

/// Modified Bessel function of order `nu` at `m r`, scaled to leading coefficient `r^nu`.
fn bessel_series(nu: f64, m: f64, r: f64) -> f64 {
    let x = 0.25 * m * m * r * r;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..60 {
        term *= x / (k as f64 * (nu + k as f64));
        sum += term;
    }
    r.powf(nu) * sum
}

struct Check {
    pass: bool,
    detail: String,
}

fn bessel() -> Check {
    let g = build_geometry(&GeometryConfig::default()).expect("default geometry");
    let mut worst: f64 = 0.0;
    for (n, m) in [(1, 1), (3, 1), (1, 2)] {
        let op = RadialOperator::new(&g, ModeIndex::new(n, m).expect("odd n"));
        let sol = integrate_inm(&op, 1.0).expect("integration");
        for r in [0.05, 0.25, 0.5, 0.75, 1.0] {
            let want = bessel_series(0.5 * n as f64, m as f64, r);
            worst = worst.max((sol.eval(r).expect("in range").re / want - 1.0).abs());
        }
    }
    let i11 = integrate_inm(&RadialOperator::new(&g, ModeIndex { n: 1, m: 1 }), 1.0)
        .and_then(|s| s.eval(0.5))
        .map(|v| v.re)
        .unwrap_or(f64::NAN);
    let closed = 0.5f64.sinh() / 0.5f64.sqrt();
    let rel = (i11 / closed - 1.0).abs();
    Check { pass: worst < 1e-6 && rel < 1e-6, detail: format!("max rel {worst:.2e}, I_11(0.5) = {i11:.6}") }
}

fn experiments(runs: &[(ExperimentName, u32)]) -> Check {
    let mut criteria: Vec<(String, Criterion)> = Vec::new();
    for &(name, p) in runs {
        let mut cfg = ExperimentConfig::new(name);
        cfg.geometry.p = p;
        match execute(&cfg) {
            Ok(o) => criteria.extend(o.summary.criteria.into_iter().map(|c| (format!("{name}[p={p}]"), c))),
            Err(e) => return Check { pass: false, detail: format!("{name}: {e}") },
        }
    }
    let failed: Vec<String> =
        criteria.iter().filter(|(_, c)| !c.pass).map(|(r, c)| format!("{r}.{} = {:.4e}", c.name, c.value)).collect();
    let detail = if failed.is_empty() {
        criteria.iter().map(|(_, c)| format!("{} {:.4e}", c.name, c.value)).collect::<Vec<_>>().join(", ")
    } else {
        failed.join(", ")
    };
    Check { pass: failed.is_empty() && !criteria.is_empty(), detail }
}

fn main() -> ExitCode {
    use ExperimentName::*;
    type Suite = Vec<(&'static str, Box<dyn Fn() -> Check>)>;
    let suite: Suite = vec![
        ("bessel_oracle", Box::new(bessel)),
        ("ratio_bound", Box::new(|| experiments(&[(RatioBound, 1)]))),
        ("mode_decay", Box::new(|| experiments(&[(DecayScan, 1)]))),
        ("cylinder_convergence", Box::new(|| experiments(&[(VcylConvergence, 1)]))),
        ("green_identity", Box::new(|| experiments(&[(GreenIdentity, 1), (HnDecay, 1)]))),
        ("stretch_identity", Box::new(|| experiments(&[(StretchIdentity, 1)]))),
        ("trace_formula", Box::new(|| experiments(&[(TraceVariation, 1)]))),
        ("ab_rates", Box::new(|| experiments(&[(AbRates, 1), (AbRates, 2)]))),
        ("v_matrix_pipeline", Box::new(|| experiments(&[(VMatrix, 1), (Assumptions, 1), (Assumptions, 2)]))),
        ("oracle_equivalence", Box::new(|| experiments(&[(OracleConvergence, 1)]))),
    ];
    let mut all = true;
    for (name, check) in suite {
        let t = Instant::now();
        let c = check();
        all &= c.pass;
        println!("{} {name} ({:.1}s): {}", if c.pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64(), c.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
