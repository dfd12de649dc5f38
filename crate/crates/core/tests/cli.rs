//! End-to-end runs of the command-line front end on temporary files.

use std::fs;
use std::path::Path;

use adadetect::cli::main_with_args;
use adadetect::simlab::{gen_dataset, GeneratorConfig, Setting};
use serde_json::Value;

fn write_csv(path: &Path, rows: impl Iterator<Item = Vec<f64>>) {
    let text: String = rows
        .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(path, text).unwrap();
}

/// Nulls and test points from the gaussian setting; the first 20 test rows are novelties.
fn inputs(dir: &Path) {
    let gen = GeneratorConfig {
        setting: Setting::GaussianSparse { d: 3, signal_coords: 3, amplitude: Some(3.0) },
        n: 400,
        m: 100,
        m1: 20,
        seed: 4,
    };
    let data = gen_dataset(&gen).unwrap();
    write_csv(&dir.join("nts.csv"), data.nulls.rows().map(<[f64]>::to_vec));
    write_csv(&dir.join("test.csv"), data.test.rows().map(<[f64]>::to_vec));
}

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("adadetect").chain(args.iter().copied()))
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn detect_writes_report_and_rejections() {
    let dir = tempfile::tempdir().unwrap();
    inputs(dir.path());
    let d = dir.path().to_str().unwrap();
    let out = dir.path().join("out");
    let code = run(&[
        "detect", "--nts", &format!("{d}/nts.csv"), "--test", &format!("{d}/test.csv"), "--alpha", "0.1",
        "--scorer", "logistic", "--k", "300", "--seed", "3", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report = json(&out.join("report.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["report"]["split"]["k"], 300);
    assert_eq!(report["report"]["split"]["ell"], 100);
    let rejected: Vec<usize> = fs::read_to_string(out.join("rejections.csv"))
        .unwrap()
        .lines()
        .map(|l| l.trim().parse().unwrap())
        .collect();
    assert_eq!(rejected.len(), report["report"]["rejections"]["indices"].as_array().unwrap().len());
    // 1-based on disk; strong signal, so most are novelties
    assert!(rejected.iter().all(|&i| (1..=100).contains(&i)));
    assert!(rejected.iter().filter(|&&i| i <= 20).count() >= 15);

    // the same invocation reproduces the report exactly
    let again = dir.path().join("again");
    run(&[
        "detect", "--nts", &format!("{d}/nts.csv"), "--test", &format!("{d}/test.csv"), "--alpha", "0.1",
        "--scorer", "logistic", "--k", "300", "--seed", "3", "--out", again.to_str().unwrap(),
    ]);
    assert_eq!(json(&again.join("report.json")), report);
}

#[test]
fn detect_storey_and_quantile_variants() {
    let dir = tempfile::tempdir().unwrap();
    inputs(dir.path());
    let d = dir.path().to_str().unwrap();
    for (flag, value, name) in [("--storey-K", "50", "storey"), ("--quantile-k0", "10", "quantile")] {
        let out = dir.path().join(name);
        let code = run(&[
            "detect", "--nts", &format!("{d}/nts.csv"), "--test", &format!("{d}/test.csv"), "--scorer",
            "chi-square", flag, value, "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{name}");
        let report = json(&out.join("report.json"));
        assert_eq!(report["report"]["procedure"]["procedure"], name);
        assert!(report["report"]["pi0_estimate"]["value"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    inputs(dir.path());
    let d = dir.path().to_str().unwrap();
    fs::write(dir.path().join("bad.csv"), "1,2,3\n4,oops,6\n").unwrap();
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let nts = format!("{d}/nts.csv");
    for test in ["bad.csv", "empty.csv"] {
        let test = format!("{d}/{test}");
        assert_eq!(run(&["detect", "--nts", &nts, "--test", &test, "--out", out]), 2, "{test}");
    }
    let test = format!("{d}/test.csv");
    // α outside (0,1), k larger than n, unknown scorer
    assert_eq!(run(&["detect", "--nts", &nts, "--test", &test, "--alpha", "1.5", "--out", out]), 2);
    assert_eq!(run(&["detect", "--nts", &nts, "--test", &test, "--k", "401", "--out", out]), 2);
    assert_eq!(run(&["detect", "--nts", &nts, "--test", &test, "--scorer", "nope", "--out", out]), 2);
    // inadmissible Storey K for the bound check
    assert_eq!(run(&["verify", "--m", "20", "--ell", "30", "--m0", "10", "--storey-K", "1", "--out", out]), 2);
    // clap usage errors
    assert_eq!(run(&["detect", "--out", out]), 2);
}

#[test]
fn cv_picks_from_a_grid() {
    let dir = tempfile::tempdir().unwrap();
    inputs(dir.path());
    let d = dir.path().to_str().unwrap();
    fs::write(dir.path().join("grid.json"), r#"[{"kind":"chi-square"},{"kind":"logistic"},{"kind":"logistic","l2":1.0}]"#)
        .unwrap();
    let out = dir.path().join("out");
    let code = run(&[
        "cv", "--nts", &format!("{d}/nts.csv"), "--test", &format!("{d}/test.csv"), "--cv-grid",
        &format!("{d}/grid.json"), "--k", "300", "--workers", "1", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report = json(&out.join("report.json"));
    assert_eq!(report["surrogate_rejections"].as_array().unwrap().len(), 3);
    assert!(report["chosen_index"].as_u64().unwrap() < 3);
    assert!(out.join("rejections.csv").exists());
}

#[test]
fn simulate_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "generator": { "setting": "equicorrelated", "d": 1, "mu": [2.5], "rho": 0.0, "n": 200, "m": 50, "m1": 5, "seed": 0 },
        "sweep": { "variable": "rho", "values": [0.0, 0.5] },
        "split": { "policy": "explicit", "k": 0 },
        "alpha": 0.2,
        "methods": [
            { "method": "adadetect", "scorer": { "source": "mean-direction" } },
            { "label": "storey-bh", "method": "marginal-storey-bh", "lambda": 0.5 }
        ],
        "replicates": 100
    }"#;
    fs::write(dir.path().join("sim.json"), config).unwrap();
    let out = dir.path().join("out");
    let code = run(&[
        "simulate", "--config", dir.path().join("sim.json").to_str().unwrap(), "--replicates", "40", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let curves = fs::read_to_string(out.join("curves.csv")).unwrap();
    let mut lines = curves.lines();
    assert_eq!(lines.next().unwrap(), "rho,method,fdr,fdr_se,tdr,tdr_se");
    assert_eq!(lines.count(), 4);
    let report = json(&out.join("mc_report.json"));
    assert_eq!(report["config"]["replicates"], 40);
}

#[test]
fn verify_reports_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let code = run(&[
        "verify", "--m", "10", "--ell", "15", "--m0", "5", "--quantile-k0", "3", "--replicates", "2000", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report = json(&out.join("bound_report.json"));
    assert_eq!(report["report"]["within_bound"], true);
    assert_eq!(report["report"]["estimator"]["estimator"], "quantile");
}
