//! End-to-end checks of the `ppredict` binary: exit codes, machine-readable
//! errors, artifact reproducibility, and a small full pipeline.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ppredict"))
}

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).unwrap();
}

fn hawkes_config(amplitude: f64) -> String {
    format!(
        r#"{{
  "schema_version": 1,
  "model": {{
    "type": "hawkes",
    "baseline": [0.5],
    "kernel": {{
      "d": 1,
      "entries": [{{ "type": "exponential", "amplitude": {amplitude}, "decay": 1.0, "support": 4.0 }}]
    }}
  }},
  "grid": {{ "delta": 0.25, "p": 16 }},
  "solver": "whittle",
  "replicates": 3,
  "horizon": 60.0,
  "seed": 11,
  "eval_delta": 0.5
}}"#
    )
}

fn poisson_config() -> String {
    r#"{
  "schema_version": 1,
  "model": { "type": "poisson", "rates": [2.0] },
  "grid": { "delta": 0.25, "p": 16 },
  "solver": "whittle",
  "replicates": 20,
  "horizon": 200.0,
  "seed": 5,
  "eval_delta": 0.5
}"#
    .to_string()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or("");
    serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr not JSON: {text}"))
}

#[test]
fn pipeline_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    write(&cfg, &hawkes_config(0.5));
    for sub in ["a", "b"] {
        let out = bin()
            .args(["pipeline", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(sub))
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["manifest.json", "kernel.json", "covariance.json", "score.json"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "artifact {name} differs between identical runs");
    }
}

#[test]
fn pipeline_on_poisson_recovers_near_zero_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    write(&cfg, &poisson_config());
    let out_dir = dir.path().join("run");
    let out = bin()
        .args(["pipeline", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let kernel = ppredict_core::KernelGrid::read_json(out_dir.join("kernel.json")).unwrap();
    let streams = ppredict_cli::pipeline::read_streams(&out_dir.join("streams")).unwrap();
    let grid = kernel.grid;
    let se =
        ppredict_core::moments::bootstrap_covariance_se(&streams, &grid, 200, 99).unwrap();
    let max_se = se.iter().flat_map(|m| m.iter().copied()).fold(0.0f64, f64::max);
    let rate = ppredict_core::moments::estimate_mean_rates(&streams).unwrap()[0];
    let bound = 4.0 * max_se / rate;
    assert!(
        kernel.sup_norm() < bound,
        "kernel sup {} vs bound {bound}",
        kernel.sup_norm()
    );
}

#[test]
fn unstable_config_fails_with_numeric_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    write(&cfg, &hawkes_config(1.1)); // branching ratio 1.1: unstable
    let out = bin()
        .args(["pipeline", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["name"], "UnstableKernel");
    assert!(err["error"]["stage"].is_string());
}

#[test]
fn malformed_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    write(&cfg, "{ not json ");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_config_exits_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(dir.path().join("nope.json"))
        .arg("--out")
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn staged_subcommands_compose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    write(&cfg, &hawkes_config(0.5));
    let work = dir.path().join("work");

    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&work)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = bin()
        .args(["estimate-cov", "--config"])
        .arg(&cfg)
        .arg("--streams")
        .arg(&work)
        .arg("--out")
        .arg(&work)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--cov")
        .arg(work.join("covariance.json"))
        .arg("--solver")
        .arg("direct")
        .arg("--out")
        .arg(&work)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(work.join("diagnostics.json").exists());

    let out = bin()
        .args(["innovations", "--config"])
        .arg(&cfg)
        .arg("--cov")
        .arg(work.join("covariance.json"))
        .arg("--out")
        .arg(work.join("innov"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = bin()
        .args(["predict", "--config"])
        .arg(&cfg)
        .arg("--kernel")
        .arg(work.join("kernel.json"))
        .arg("--streams")
        .arg(&work)
        .arg("--out")
        .arg(&work)
        .arg("--format")
        .arg("csv")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(work.join("score.json").exists());
    assert!(work.join("intensity.csv").exists());
}

#[test]
fn bench_subcommand_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "bench",
            "--sizes",
            "8,12,16,24",
            "--dim",
            "1",
            "--solvers",
            "dense,whittle",
            "--runs",
            "5",
            "--seed",
            "1",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("bench.json")).unwrap()).unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 2);
    assert!(report["max_relative_disagreement"].as_f64().unwrap() <= 1e-6);
}
