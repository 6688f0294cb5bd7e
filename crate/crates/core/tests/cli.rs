use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use dldr::damage::{dldr_knee, dldr_remaining, DldrParams};

fn manifest(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn dldr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dldr")).args(args).output().unwrap()
}

fn with_config(dir: &TempDir, name: &str, body: &Value) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_vec_pretty(body).unwrap()).unwrap();
    p.display().to_string()
}

fn ok_json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn user_error(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(2), "stdout: {}", String::from_utf8_lossy(&out.stdout));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"]["code"], 2);
    assert!(v["error"]["message"].as_str().is_some_and(|m| !m.is_empty()));
    v
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|s| s.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn point(v: f64) -> Value {
    serde_json::json!({"kind": "point-mass", "value": v})
}

#[test]
fn uniform_maxent_has_zero_multipliers() {
    let v = ok_json(&dldr(&["fit-maxent", "--config", manifest("configs/maxent_uniform.json").to_str().unwrap()]));
    for l in v["lambdas"].as_array().unwrap() {
        assert!(l.as_f64().unwrap().abs() < 1e-12);
    }
    assert!((v["fitted_mean"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn infeasible_moments_exit_2() {
    let v = user_error(&dldr(&["fit-maxent", "--config", manifest("configs/maxent_infeasible.json").to_str().unwrap()]));
    assert_eq!(v["error"]["kind"], "infeasible");
}

#[test]
fn maxent_grid_carries_requested_moments() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(
        &dir,
        "b.json",
        &serde_json::json!({"support": [0, 1], "mean": 0.8, "cov": 0.1, "grid_points": 4001}),
    );
    let out = dir.path().join("out");
    ok_json(&dldr(&["fit-maxent", "--config", &cfg, "--out", out.to_str().unwrap()]));
    let (_, rows) = csv_rows(&std::fs::read_to_string(out.join("pdf_grid.csv")).unwrap());
    // composite Simpson on the written grid, independent of the fitter's quadrature
    let n = rows.len();
    assert_eq!(n % 2, 1);
    let h = rows[1][0] - rows[0][0];
    let simpson = |f: &dyn Fn(f64, f64) -> f64| {
        let mut s = 0.0;
        for (i, r) in rows.iter().enumerate() {
            let w = if i == 0 || i == n - 1 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(r[0], r[1]);
        }
        s * h / 3.0
    };
    let mass = simpson(&|_, p| p);
    let mean = simpson(&|x, p| x * p);
    let var = simpson(&|x, p| (x - 0.8).powi(2) * p);
    assert!((mass - 1.0).abs() < 1e-8, "{mass}");
    assert!((mean - 0.8).abs() < 1e-8, "{mean}");
    assert!((var.sqrt() - 0.08).abs() < 1e-8, "{}", var.sqrt());
}

#[test]
fn converge_reports_and_rejects_empty_data() {
    let v = ok_json(&dldr(&["converge", "--config", manifest("configs/converge_tanaka_high.json").to_str().unwrap()]));
    assert_eq!(v["n"], 200);
    assert_eq!(v["converged"], true);
    assert_eq!(v["trajectories"].as_array().unwrap().len(), 3);

    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "lifetime\n").unwrap();
    let cfg = with_config(&dir, "c.json", &serde_json::json!({"data": "empty.csv"}));
    user_error(&dldr(&["converge", "--config", &cfg]));
}

fn exact_two_load(dir: &TempDir, alpha: f64, b: f64, l1: f64, l2: f64) -> String {
    let k = dldr_knee(DldrParams::new(alpha, b).unwrap(), l1, l2).unwrap();
    let mut text = String::from("n1,n2\n");
    for frac in [0.1, 0.25, 0.4, 0.6, 0.8] {
        let n1 = frac * l1;
        text.push_str(&format!("{n1},{}\n", dldr_remaining(n1, l1, l2, k).unwrap()));
    }
    std::fs::write(dir.path().join("two.csv"), text).unwrap();
    "two.csv".into()
}

#[test]
fn fit_params_recovers_generating_values() {
    let dir = TempDir::new().unwrap();
    let two = exact_two_load(&dir, 0.4, 0.6, 1e5, 2e5);
    let cfg = with_config(
        &dir,
        "f.json",
        &serde_json::json!({"model": "dldr", "two_load": two, "life_high": 1e5, "life_low": 2e5}),
    );
    let v = ok_json(&dldr(&["fit-params", "--config", &cfg]));
    assert!((v["alpha"].as_f64().unwrap() - 0.4).abs() < 1e-3, "{v}");
    assert!((v["b"].as_f64().unwrap() - 0.6).abs() < 1e-3, "{v}");
    assert!(v["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn equal_lives_flag_parameters_as_unidentified() {
    let dir = TempDir::new().unwrap();
    let two = exact_two_load(&dir, 0.0, 0.7, 1e5, 1e5);
    let cfg = with_config(
        &dir,
        "f.json",
        &serde_json::json!({"model": "dldr", "two_load": two, "life_high": 1e5, "life_low": 1e5}),
    );
    let v = ok_json(&dldr(&["fit-params", "--config", &cfg]));
    // with R = 1 every knee lies on the linear line, so neither parameter is identified
    assert_eq!(v["flat_alpha"], true);
    assert_eq!(v["flat_b"], true);
    assert_eq!(v["warnings"].as_array().unwrap().len(), 2);
    assert!(v["sse"].as_f64().unwrap() < 1e-20);
}

#[test]
fn malformed_dataset_exit_2() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "n1,n2\n100,abc\n").unwrap();
    let cfg = with_config(
        &dir,
        "f.json",
        &serde_json::json!({"model": "dldr", "two_load": "bad.csv", "life_high": 1e3, "life_low": 2e3}),
    );
    let v = user_error(&dldr(&["fit-params", "--config", &cfg]));
    assert_eq!(v["error"]["kind"], "parse");
    assert!(v["error"]["message"].as_str().unwrap().contains("bad.csv:2"));
}

fn point_mass_run(dir: &TempDir) -> String {
    with_config(
        dir,
        "p.json",
        &serde_json::json!({
            "model": "dldr",
            "params": {"N1": point(1e5), "N2": point(2e5), "alpha": point(0.4), "B": point(0.6)},
            "n1_values": [2e4, 6e4],
            "n_samples": 50,
        }),
    )
}

#[test]
fn point_masses_give_constant_draws() {
    let dir = TempDir::new().unwrap();
    let cfg = point_mass_run(&dir);
    let out = dir.path().join("o");
    ok_json(&dldr(&["propagate", "--config", &cfg, "--out", out.to_str().unwrap()]));
    let (header, rows) = csv_rows(&std::fs::read_to_string(out.join("draws.csv")).unwrap());
    assert_eq!(rows.len(), 50);
    let k = dldr_knee(DldrParams::new(0.4, 0.6).unwrap(), 1e5, 2e5).unwrap();
    for n1 in [2e4, 6e4] {
        let col = header.iter().position(|h| h == &format!("n2@{n1}")).unwrap();
        let expected = dldr_remaining(n1, 1e5, 2e5, k).unwrap();
        assert!(rows.iter().all(|r| r[col] == expected), "column {n1}");
    }
}

#[test]
fn same_seed_same_bytes() {
    let cfg = manifest("configs/propagate_tanaka.json");
    let args = ["propagate", "--config", cfg.to_str().unwrap(), "--samples", "2000", "--seed", "5"];
    let dir = TempDir::new().unwrap();
    let mut bodies = Vec::new();
    for (k, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(k.to_string());
        let mut a = args.to_vec();
        a.extend(["--threads", threads, "--out", out.to_str().unwrap(), "--svg"]);
        ok_json(&dldr(&a));
        let files = ["summary.json", "draws.csv", "n2_density.svg", "knee_density.svg"];
        bodies.push(files.map(|f| std::fs::read(out.join(f)).unwrap()));
    }
    assert!(bodies[0] == bodies[1]);
    let other = dldr(&["propagate", "--config", cfg.to_str().unwrap(), "--samples", "2000", "--seed", "6"]);
    assert_ne!(other.stdout, bodies[0][0]);
}

#[test]
fn ldr_band_is_straight() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(
        &dir,
        "b.json",
        &serde_json::json!({
            "model": "ldr",
            "params": {"N1": point(1e5), "N2": point(3e5)},
            "n1_grid": {"from": 0, "to": 1e5, "points": 11},
            "n_samples": 20,
        }),
    );
    let out = dldr(&["band", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(header, ["n1", "q0.01", "q0.5", "q0.99", "omitted_fraction"]);
    for r in &rows {
        let line = 3e5 * (1.0 - r[0] / 1e5);
        for q in &r[1..4] {
            assert!((q - line).abs() <= 1e-9 * 3e5, "{r:?}");
        }
    }
}

#[test]
fn unknown_model_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(
        &dir,
        "b.json",
        &serde_json::json!({"model": "miner", "params": {}, "n1_grid": [0, 1]}),
    );
    user_error(&dldr(&["band", "--config", &cfg]));
}

#[test]
fn usage_errors_exit_2() {
    user_error(&dldr(&["datasets", "--svg"]));
    user_error(&dldr(&["datasets", "nosuch"]));
    user_error(&dldr(&["band"]));
    user_error(&dldr(&["frobnicate"]));
    user_error(&dldr(&["band", "--config", "/nonexistent/config.json"]));
}

#[test]
fn datasets_lists_builtin_tables() {
    let all = ok_json(&dldr(&["datasets"]));
    let ids: Vec<&str> = all.as_array().unwrap().iter().map(|t| t["dataset_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["tanaka", "xie045", "xie16mn"]);
    let one = ok_json(&dldr(&["datasets", "xie045"]));
    assert_eq!(one, all[1]);
}

#[test]
fn help_shows_defaults() {
    let out = dldr(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[default: 20190601]"));
    assert!(text.contains("[default: 10000]"));
    for cmd in ["fit-maxent", "converge", "fit-params", "propagate", "knee-prob", "band", "datasets"] {
        assert!(text.contains(cmd), "{cmd}");
    }
}
