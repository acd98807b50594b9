use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shallow-bs")).args(args).env_remove("SHALLOW_BS_THREADS").output().unwrap()
}

fn stderr_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(o.stderr.trim_ascii()).expect("machine-readable error")
}

#[test]
fn density_fbs_writes_twenty_rows_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("density.csv");
    let o = run(&[
        "density-fbs", "--ensemble", "nlhs", "--modes", "32", "--rounds", "2", "--photons", "6", "--samples", "1000",
        "--seed", "7", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 21);
    assert!(text.starts_with("source,bucket,x,density,count,lo,hi,degenerate,ensemble,M,N,samples,seed\n"));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("density.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "density-fbs");
    assert_eq!(manifest["config"]["modes"], 32);
    assert_eq!(manifest["config"]["seed"], 7);
    assert_eq!(manifest["config"]["buckets"], 20);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["wall_time_seconds"].is_number());
}

#[test]
fn manifest_config_reproduces_the_result() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.csv");
    let o = run(&[
        "page-curve", "--ensemble", "nlhs", "--modes", "8", "--samples", "20", "--seed", "2", "--out",
        first.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap()).unwrap();
    let mut config = manifest["config"].clone();
    let second = dir.path().join("b.csv");
    config["out"] = serde_json::Value::String(second.to_str().unwrap().into());
    let toml_text = toml::to_string(&config).unwrap();
    let cfg_path = dir.path().join("resolved.toml");
    std::fs::write(&cfg_path, toml_text).unwrap();
    let o = run(&["page-curve", "--config", cfg_path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(first).unwrap(), std::fs::read(second).unwrap());
}

#[test]
fn thresholds_json_to_stdout() {
    let o = run(&["thresholds", "--gamma", "2", "--c-const", "1", "--dim", "1", "--lambda", "0.1", "--beta", "0.5", "--photons", "16", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let alpha0 = v["alpha0"].as_f64().unwrap();
    assert!((alpha0 - std::f64::consts::E.powi(2) / 4.0).abs() < 1e-12);
    assert!((v["fock"]["threshold_local_random"].as_f64().unwrap() - alpha0 * 16f64.powf(1.9)).abs() < 1e-9);
    assert!(v["kappa0"].is_number() && v["kappa1"].is_number() && v["alpha1"].is_number());
}

#[test]
fn guard_violation_exits_three_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("count.csv");
    let o = run(&["permitted-count", "--ensemble", "nlhs", "--modes", "64", "--photons", "8", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "resource-guard");
    assert!(!out.exists());
    assert!(!Path::new(&format!("{}.manifest.json", out.display())).exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn invalid_config_exits_two_with_diagnostics() {
    let o = run(&["density-fbs", "--ensemble", "nlhs", "--modes", "48", "--photons", "3", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let v = stderr_json(&o);
    assert_eq!(v["error"], "invalid-config");
    let diags = v["diagnostics"].as_array().unwrap();
    assert_eq!(diags.len(), 1);
    assert!(diags[0].as_str().unwrap().contains("power-of-two"));

    let o = run(&["thresholds", "--photons", "16", "--beta", "1.5"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["density-gbs", "--ensemble", "haar", "--modes", "8", "--photons", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["diagnostics"][0].as_str().unwrap().contains("seed"));
}

#[test]
fn bad_config_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "modes = \"many\"\n").unwrap();
    let o = run(&["hiding", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "invalid-config");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "modes = 8\nphotons = 2\nsamples = 40\nbuckets = 4\nseed = 1\n").unwrap();
    let a = run(&["hiding", "--config", cfg.to_str().unwrap(), "--seed", "2"]);
    let b = run(&["hiding", "--modes", "8", "--photons", "2", "--samples", "40", "--buckets", "4", "--seed", "2"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["hiding", "--config", cfg.to_str().unwrap()]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn threads_from_environment_do_not_change_output() {
    let args = ["frame-potential", "--ensemble", "haar", "--modes", "4", "--samples", "300", "--resamples", "100", "--seed", "8"];
    let one = Command::new(env!("CARGO_BIN_EXE_shallow-bs")).args(args).env("SHALLOW_BS_THREADS", "1").output().unwrap();
    let three = Command::new(env!("CARGO_BIN_EXE_shallow-bs")).args(args).env("SHALLOW_BS_THREADS", "3").output().unwrap();
    assert!(one.status.success());
    assert_eq!(one.stdout, three.stdout);
}

#[test]
fn permitted_count_csv_reports_effective_cones() {
    let o = run(&[
        "permitted-count", "--ensemble", "local-parallel", "--modes", "16", "--depth", "4", "--input", "3,12",
        "--lambda", "0.5", "--beta", "0.5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("lightcone,"));
    assert!(rows[2].starts_with("effective,"));
}
