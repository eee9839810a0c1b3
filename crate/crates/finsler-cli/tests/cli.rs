//! End-to-end tests of the `finsler` binary: exit codes, report shapes and
//! the JSON/CSV numeric parity contract.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_finsler")
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

#[test]
fn validate_euclidean_exits_zero() {
    let out = run(&["validate", "--config", config("euclidean.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["report"]["passed"], serde_json::Value::Bool(true));
}

#[test]
fn validate_wide_randers_exits_one() {
    let dir = std::env::temp_dir().join("finsler_cli_wide_randers");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("wide.json");
    std::fs::write(
        &cfg,
        r#"{
            "metric": {
                "kind": "randers", "dim": 2,
                "a": [["1", "0"], ["0", "1"]],
                "b": ["1.5", "0"]
            },
            "sampler": {"count": 20, "seed": 1}
        }"#,
    )
    .unwrap();
    let out = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["report"]["passed"], serde_json::Value::Bool(false));
}

#[test]
fn malformed_config_exits_two() {
    let dir = std::env::temp_dir().join("finsler_cli_bad_json");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.json");
    std::fs::write(&cfg, "{ not json").unwrap();
    let out = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_subcommand_exits_two() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tensors_on_sphere_point_reports_known_spray() {
    let out = run(&[
        "tensors",
        "--config",
        config("sphere.json").to_str().unwrap(),
        "--x",
        "0.7853981633974483,0",
        "--y",
        "1,1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let spray = v["report"]["spray"]["data"].as_array().unwrap();
    assert!((spray[0].as_f64().unwrap() - (-0.25)).abs() < 1e-9);
    assert!((spray[1].as_f64().unwrap() - 1.0).abs() < 1e-9);
    // Euclidean metric: every connection/curvature array vanishes.
    let out = run(&[
        "tensors",
        "--config",
        config("euclidean.json").to_str().unwrap(),
        "--x",
        "0.2,0.4,0.1",
        "--y",
        "0.3,-1.0,0.5",
    ]);
    let v = stdout_json(&out);
    for field in ["berwald_connection", "berwald_curvature", "landsberg", "cartan_horizontal"] {
        let data = v["report"][field]["data"].as_array().unwrap();
        assert!(
            data.iter().all(|x| x.as_f64().unwrap().abs() < 1e-12),
            "{field} should vanish"
        );
    }
}

#[test]
fn tensors_rejects_vanishing_factor_with_exit_one() {
    let out = run(&[
        "tensors",
        "--config",
        config("product_eps_sqrt.json").to_str().unwrap(),
        "--x",
        "0.7,0.2,0.5,0.5",
        "--y",
        "0,0,1,1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("factor norm vanishes"), "stderr: {err}");
}

#[test]
fn classify_riemannian_is_berwald_and_exits_zero() {
    let out = run(&[
        "classify",
        "--config",
        config("sphere.json").to_str().unwrap(),
        "--samples",
        "20",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["report"]["verdicts"]["berwald"]["holds"], serde_json::Value::Bool(true));
}

#[test]
fn classify_non_berwald_randers_still_exits_zero() {
    // Verdicts are data, not process failures.
    let out = run(&[
        "classify",
        "--config",
        config("randers_sin.json").to_str().unwrap(),
        "--samples",
        "20",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["report"]["verdicts"]["berwald"]["holds"], serde_json::Value::Bool(false));
    assert_eq!(
        v["report"]["verdicts"]["weakly_berwald"]["holds"],
        serde_json::Value::Bool(false)
    );
}

#[test]
fn classify_mroot_holds_everything() {
    let out = run(&[
        "classify",
        "--config",
        config("mroot4.json").to_str().unwrap(),
        "--samples",
        "20",
    ]);
    let v = stdout_json(&out);
    for prop in ["berwald", "weakly_berwald", "landsberg", "weakly_landsberg"] {
        assert_eq!(v["report"]["verdicts"][prop]["holds"], serde_json::Value::Bool(true));
    }
}

#[test]
fn verify_product_requires_a_product_metric() {
    let out = run(&[
        "verify-product",
        "--config",
        config("sphere.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_product_passes_on_sum_of_euclidean_like_factors() {
    let out = run(&[
        "verify-product",
        "--config",
        config("product_sum.json").to_str().unwrap(),
        "--samples",
        "20",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["report"]["passed"], serde_json::Value::Bool(true));
    let checks = v["report"]["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 11);
}

#[test]
fn csv_and_json_reports_carry_identical_numbers() {
    let cfg_path = config("randers_sin.json");
    let args_base = [
        "classify",
        "--config",
        cfg_path.to_str().unwrap(),
        "--samples",
        "12",
        "--seed",
        "77",
    ];
    let json_out = run(&[&args_base[..], &["--format", "json"]].concat());
    let csv_out = run(&[&args_base[..], &["--format", "csv"]].concat());
    let v = stdout_json(&json_out);
    let csv = String::from_utf8(csv_out.stdout).unwrap();

    let mut csv_rows: Vec<(String, usize, f64)> = Vec::new();
    for line in csv.lines().skip(1) {
        let mut parts = line.split(',');
        let id = parts.next().unwrap().to_string();
        let idx: usize = parts.next().unwrap().parse().unwrap();
        let res: f64 = parts.next().unwrap().parse().unwrap();
        csv_rows.push((id, idx, res));
    }
    assert!(!csv_rows.is_empty());
    for (id, idx, res) in csv_rows {
        let json_res = v["report"]["verdicts"][&id]["per_sample"][idx].as_f64().unwrap();
        assert_eq!(res, json_res, "{id}[{idx}]");
    }
}

#[test]
fn out_flag_writes_report_atomically() {
    let dir = std::env::temp_dir().join("finsler_cli_out");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let out = run(&[
        "classify",
        "--config",
        config("euclidean.json").to_str().unwrap(),
        "--samples",
        "5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["report"]["verdicts"]["berwald"]["holds"].as_bool().unwrap());
    assert!(!dir.join("report.tmp").exists(), "temp file must be renamed away");
}

#[test]
fn tensors_rejects_csv_format() {
    let out = run(&[
        "tensors",
        "--config",
        config("euclidean.json").to_str().unwrap(),
        "--x",
        "0,0,0",
        "--y",
        "1,0,0",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tensors_rejects_non_finite_coordinates() {
    let out = run(&[
        "tensors",
        "--config",
        config("euclidean.json").to_str().unwrap(),
        "--x",
        "0,NaN,0",
        "--y",
        "1,0,0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn catalog_flag_lists_builtins() {
    let out = run(&["--catalog"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for needle in ["euclidean", "sphere", "randers", "mroot4", "eps_sqrt", "sqrt(s*t)"] {
        assert!(text.contains(needle), "catalog missing {needle}");
    }
}

#[test]
fn seed_override_changes_the_sample_set() {
    let a = run(&[
        "classify",
        "--config",
        config("randers_sin.json").to_str().unwrap(),
        "--samples",
        "8",
        "--seed",
        "1",
    ]);
    let b = run(&[
        "classify",
        "--config",
        config("randers_sin.json").to_str().unwrap(),
        "--samples",
        "8",
        "--seed",
        "2",
    ]);
    let va = stdout_json(&a);
    let vb = stdout_json(&b);
    assert_ne!(
        va["report"]["verdicts"]["berwald"]["max_residual"],
        vb["report"]["verdicts"]["berwald"]["max_residual"]
    );
}
