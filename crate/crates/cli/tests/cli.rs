use std::path::PathBuf;

use multimatrix_cli::{dispatch, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK};
use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["multimatrix".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = dispatch(&argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mm-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn config(dir: &PathBuf, body: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const QUARTIC: &str = r#"
d = 1
N = 6
potential = "0.5*X1^2 + 0.05*X1^4"
h = 0.02
T_burn = 4.0
thin = 0.5
M = 12
seed = 3
observables = ["X1^2", "X1^4"]
"#;

#[test]
fn oracle_outputs() {
    assert_eq!(run(&["oracle", "--word", "X1*X1*X1*X1"]).1.trim(), r#"{"coeffs":[2,1]}"#);
    assert_eq!(run(&["oracle", "--word", "X1*X2*X1*X2"]).1.trim(), r#"{"coeffs":[0,1]}"#);
    let (code, out, _) = run(&["oracle", "--poly", "tr(X1^2)*X1^2"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["coeffs"][0], 1.0);
    let (code, _, err) = run(&["oracle", "--word", "X1", "--poly", "X1"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("exactly one"));
}

#[test]
fn free_side_commands() {
    assert_eq!(run(&["tau", "--poly", "tr(X1*X1)"]).1.trim(), "1");
    assert_eq!(run(&["tau", "--poly", "X1*X2*X1*X2", "--cov", "1,0.5;0.5,1"]).1.trim(), "0.5");
    let (code, out, _) = run(&["regularity", "--W", "0.001*X1^4", "--R", "4", "--k", "0"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!((v["kappa_r"].as_f64().unwrap() - 0.192).abs() < 1e-12);
    assert_eq!(v["passes"], true);
    let (_, out, _) = run(&["sd-check", "--poly", "X1^3*X2 + tr(X1*X2)*X2^2"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    for r in v["residuals"].as_array().unwrap() {
        assert_eq!(r["residual"], 0.0);
        assert_eq!(r["exact"], true);
    }
    assert_eq!(run(&["cond-exp", "--poly", "X2*X1*X2", "--y", "2"]).1.trim(), "tr(X1)");
}

#[test]
fn usage_and_config_errors() {
    let (code, _, err) = run(&["frobnicate"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("Usage"));
    assert_eq!(run(&[]).0, EXIT_CONFIG);
    assert_eq!(run(&["--help"]).0, EXIT_OK);
    assert_eq!(run(&["tau", "--poly", "X1*("]).0, EXIT_CONFIG);
    assert_eq!(run(&["estimate"]).0, EXIT_CONFIG);
    let dir = scratch("bad");
    let cfg = config(&dir, "d = 1\nN = 4\n");
    assert_eq!(run(&["estimate", "--config", &cfg]).0, EXIT_CONFIG);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn numerical_aborts_exit_with_three() {
    let dir = scratch("num");
    let diverge = QUARTIC.replace("h = 0.02", "h = 1.9").replace("0.05*X1^4", "2*X1^4");
    let cfg = config(&dir, &diverge);
    let (code, _, err) = run(&["estimate", "--config", &cfg]);
    assert_eq!(code, EXIT_NUMERICAL, "{err}");
    let concave = QUARTIC.replace("+ 0.05*X1^4", "- 0.5*X1^4");
    let cfg = config(&dir, &concave);
    assert_eq!(run(&["estimate", "--config", &cfg]).0, EXIT_NUMERICAL);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn estimate_writes_results_and_reproduces() {
    let dir = scratch("est");
    let cfg = config(&dir, QUARTIC);
    let out_dir = dir.join("out");
    let od = out_dir.to_string_lossy().into_owned();
    let (code, first, _) = run(&["estimate", "--config", &cfg, "--out", &od]);
    assert_eq!(code, EXIT_OK);
    assert!(first.starts_with("observable,N,mean,stderr,M\n"));
    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["N"], 6);
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(run(&["estimate", "--config", &cfg, "--threads", "1"]).1, first);
    let (_, other, _) = run(&["estimate", "--config", &cfg, "--seed", "4"]);
    assert_ne!(other, first);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn sample_and_fit_expansion() {
    let dir = scratch("fit");
    let gue = "d = 1\nN = 8\nn_grid = [8, 12, 16, 24]\npotential = \"0.5*X1^2\"\nh = 0.01\nT_burn = 1.0\nthin = 1.0\nM = 400\nseed = 1\nobservables = [\"X1^4\"]\n";
    let cfg = config(&dir, gue);
    let out_dir = dir.join("out");
    let od = out_dir.to_string_lossy().into_owned();
    let (code, out, _) = run(&["fit-expansion", "--config", &cfg, "--out", &od]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    let fit = &v["fits"][0]["fit"];
    let (a0, s0) = (fit["coeffs"][0].as_f64().unwrap(), fit["coeff_stderr"][0].as_f64().unwrap());
    assert!((a0 - 2.0).abs() < 4.0 * s0, "{fit}");
    let csv = out_dir.join("results.csv").to_string_lossy().into_owned();
    let (code, again, _) = run(&["fit-expansion", "--input", &csv]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(serde_json::from_str::<Value>(&again).unwrap()["fits"], v["fits"]);

    let (code, out, _) = run(&["fit-expansion", "--oracle-word", "X1*X2*X1*X2*X1^2*X2^2", "--order", "2"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    for r in v["fits"][0]["fit"]["residuals"].as_array().unwrap() {
        assert!(r.as_f64().unwrap().abs() < 1e-9);
    }

    let cfg = config(&dir, QUARTIC);
    let (code, out, _) = run(&["sample", "--config", &cfg, "--out", &od]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 1 + 2 * 12);
    assert!(out_dir.join("samples.csv").exists());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn transport_commands() {
    let dir = scratch("tr");
    let body = format!(
        "{}\n[transport]\ns_steps = 2\nM_psi = 4\nT_max = 4.0\ndt = 0.1\n",
        QUARTIC.replace("M = 12", "M = 4")
    );
    let cfg = config(&dir, &body);
    let (code, out, err) = run(&["transport", "--config", &cfg]);
    assert_eq!(code, EXIT_OK, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["pushforward"].as_array().unwrap().len(), 2);
    assert!(v["max_accumulated_tail"].as_f64().unwrap() > 0.0);
    assert_eq!(v["first_sample_stages"].as_array().unwrap().len(), 4);

    let (code, out, _) = run(&["pushforward-check", "--config", &cfg]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["comparisons"].as_array().unwrap().len(), 2);
    assert!(v["comparisons"][0]["z"].is_number());

    let (code, out, _) = run(&["strong-conv", "--config", &cfg, "--poly", "X1"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["rows"][0]["N"], 6);
    std::fs::remove_dir_all(dir).unwrap();
}
