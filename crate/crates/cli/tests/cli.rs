use std::path::Path;
use std::process::Command;

fn varband(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_varband")).args(args).arg("--out").arg(dir).output().expect("binary runs")
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("varband-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn selftest_invariants_on_free_model_exit_zero() {
    let dir = scratch("selftest");
    let out = varband(&dir, &["selftest", "--case", "invariants", "--case", "c1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["ok"], true);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    let csv = std::fs::read_to_string(dir.join("selftest.csv")).unwrap();
    assert!(csv.starts_with("case,check,kind,value,limit,pass\n") && !csv.contains('\r'));
}

#[test]
fn shannon_reports_orthonormal_gram() {
    let dir = scratch("shannon");
    let out = varband(&dir, &["shannon"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap();
    assert!(report["summary"]["max_offdiagonal"].as_f64().unwrap() < 1e-8);
}

#[test]
fn landau_free_brackets_nyquist() {
    let dir = scratch("landau");
    let out = varband(&dir, &["landau"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap();
    let b = &report["summary"]["bracket"];
    let (lo, hi) = (b[0].as_f64().unwrap(), b[1].as_f64().unwrap());
    let nyquist = 1.0 / std::f64::consts::PI;
    assert!(lo < nyquist && nyquist < hi);
}

#[test]
fn identical_seed_gives_identical_csv() {
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    for dir in [&a, &b] {
        assert!(varband(dir, &["density", "--seed", "7"]).status.success());
        assert!(varband(dir, &["reconstruct", "--seed", "7"]).status.success());
    }
    for name in ["density.csv", "reconstruct.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn bad_config_is_rejected_with_field_name() {
    let dir = scratch("badcfg");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, r#"{"reconstruct": {"theta": 2.0}}"#).unwrap();
    let out = varband(&dir, &["reconstruct", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reconstruct.theta"));
}

#[test]
fn scatter_and_kernel_write_tables() {
    let dir = scratch("tables");
    assert!(varband(&dir, &["scatter"]).status.success());
    let csv = std::fs::read_to_string(dir.join("scattering.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201);
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, r#"{"window": [-5, 5], "kernel": {"points": 11}}"#).unwrap();
    assert!(varband(&dir, &["kernel", "--config", cfg.to_str().unwrap()]).status.success());
    let csv = std::fs::read_to_string(dir.join("kernel.csv")).unwrap();
    assert_eq!(csv.lines().count(), 122);
}
