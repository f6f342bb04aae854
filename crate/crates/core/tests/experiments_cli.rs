use std::fs;
use std::path::Path;
use std::process::Command;

use neckharm::config::{ExperimentConfig, ExperimentName};
use neckharm::experiments::{execute, write};
use neckharm::Error;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_neckharm"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("cfg.toml");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn every_name_round_trips() {
    for e in ExperimentName::ALL {
        assert_eq!(e.as_str().parse::<ExperimentName>().unwrap(), e);
        let cfg = ExperimentConfig::parse(&format!("experiment = \"{e}\"")).unwrap();
        assert_eq!(cfg.experiment, e);
    }
    assert!(matches!("nope".parse::<ExperimentName>(), Err(Error::Config(_))));
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        "experiment = \"decay_scan\"\ns_grid = [10.0, 5.0]",
        "experiment = \"decay_scan\"\ns_grid = []",
        "experiment = \"decay_scan\"\ns_grid = [-1.0, 2.0]",
        "experiment = \"decay_scan\"\nmodes = [[2, 0]]",
        "experiment = \"decay_scan\"\nseeds = []",
        "experiment = \"ab_rates\"\nm_max = 40",
        "experiment = \"decay_scan\"\nunknown = 1",
        "experiment = \"not_an_experiment\"",
        "experiment = \"decay_scan\"\n[geometry]\nR0 = 0.5",
    ];
    for text in bad {
        assert!(matches!(ExperimentConfig::parse(text), Err(Error::Config(_))), "accepted: {text}");
    }
}

#[test]
fn fixed_csv_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (ExperimentName::DecayScan, "decay_scan", "s,n,m,re_u,im_u,abs_u,bound"),
        (ExperimentName::VcylConvergence, "vcyl_convergence", "s,n,re_v,im_v,re_vcyl,im_vcyl,abs_err"),
        (ExperimentName::AbRates, "ab_rates", "s,sup_A,sup_B_minus_Binf"),
        (ExperimentName::VMatrix, "v_matrix", "p,seed,det,cond"),
    ];
    for (e, stem, header) in cases {
        let mut cfg = ExperimentConfig::new(e);
        if e == ExperimentName::DecayScan {
            cfg.s_grid = Some(vec![10.0, 15.0, 20.0, 25.0, 30.0]);
        }
        let out = execute(&cfg).unwrap();
        write(&out, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join(format!("{stem}.csv"))).unwrap();
        assert_eq!(text.lines().next().unwrap(), header);
        assert!(text.lines().count() > 1);
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(format!("{e}.json"))).unwrap()).unwrap();
        assert_eq!(json["experiment"], e.as_str());
        assert!(json["criteria"].as_array().unwrap().iter().all(|c| c["claim"].is_string()));
    }
}

#[test]
fn runs_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = \"decay_scan\"\ns_grid = [10.0, 15.0, 20.0, 25.0, 30.0]\n");
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let status =
            bin().env("NECKHARM_THREADS", threads).arg("run").arg(&cfg).arg("--out").arg(&out).status().unwrap();
        assert!(status.success());
        outputs.push((fs::read(out.join("decay_scan.csv")).unwrap(), fs::read(out.join("decay_scan.json")).unwrap()));
    }
    assert_eq!(outputs[0].0, outputs[1].0);
    // the JSON echoes only the config, never the output path override
    assert_eq!(outputs[0].1, outputs[1].1);
}

#[test]
fn exit_status_tracks_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write_config(dir.path(), "experiment = \"ratio_bound\"\n");
    assert!(bin().arg("run").arg(&ok).arg("--out").arg(dir.path().join("a")).status().unwrap().success());
    // two samples cannot support a slope fit
    let short = write_config(dir.path(), "experiment = \"decay_scan\"\ns_grid = [10.0, 20.0]\n");
    let status = bin().arg("run").arg(&short).arg("--out").arg(dir.path().join("b")).status().unwrap();
    assert!(!status.success());
    let bad = write_config(dir.path(), "experiment = \"decay_scan\"\nmodes = [[2, 0]]\n");
    assert_eq!(bin().arg("validate").arg(&bad).status().unwrap().code(), Some(2));
    let status = bin().env("NECKHARM_THREADS", "zero").arg("list").status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn list_names_every_experiment() {
    let out = bin().arg("list").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    for e in ExperimentName::ALL {
        assert!(text.lines().any(|l| l.starts_with(e.as_str())), "{e}");
    }
}
