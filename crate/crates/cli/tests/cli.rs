use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lcl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcl"))
        .args(args)
        .current_dir(dir)
        .env_remove("LCL_JOBS")
        .output()
        .expect("run lcl")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn same_tree(a: &Path, b: &Path) {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        assert_eq!(
            fs::read(a.join(&n)).unwrap(),
            fs::read(b.join(&n)).unwrap(),
            "{n:?} differs"
        );
    }
}

const SMALL: &str = r#"{
  "model": {"kind": "isotropic-long-range", "rho": 0.5},
  "B": 1.0,
  "q_list": [2, 4, 8],
  "phi": {"center": 0.5, "half_width": 0.3},
  "delta": 0.18,
  "seed": 42,
  "mc_samples": 20000
}"#;

#[test]
fn selfcheck_on_defaults_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lcl(&["selfcheck", "--output", "sc"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("sc/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["passed"], true);
    assert!(m["results"]["passed"].as_array().unwrap().len() >= 10);
    assert!(m["results"]["failed"].as_array().unwrap().is_empty());
}

#[test]
fn spectrum_without_q_list_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"model": {"kind": "isotropic-long-range", "rho": 0.5}}"#,
    );
    let out = lcl(&["spectrum", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("q_list"));
}

#[test]
fn schema_violations_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    for (text, field) in [
        (r#"{"model": {"kind": "isotropic-long-range", "rho": 1.5}}"#, "model"),
        (r#"{"phi": {"center": 0.5, "width": 0.3}}"#, "phi"),
        (r#"{"q_list": [8, 4]}"#, "q_list"),
        (r#"{"B": -1.0}"#, "B"),
        (r#"{"seed": "x"}"#, "seed"),
    ] {
        let cfg = write(tmp.path(), "c.json", text);
        let out = lcl(&["trace-sweep", "--config", &cfg], tmp.path());
        assert_eq!(out.status.code(), Some(2), "{text}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(field), "{text}");
    }
}

#[test]
fn trace_sweep_rows_and_constant_rhs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL);
    let out = lcl(&["trace-sweep", "--config", &cfg, "--output", "ts"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("ts/trace_sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "q,lambda_q,k_max,lhs,rhs,rel_gap");
    assert_eq!(lines.len(), 4);
    let rhs: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(4).unwrap()).collect();
    assert!(rhs.iter().all(|r| *r == rhs[0]));
    // 17 significant digits round-trip exactly.
    let v: f64 = rhs[0].parse().unwrap();
    assert_eq!(lcl_core::report::fmt_f64(v), rhs[0]);
}

#[test]
fn reruns_are_byte_identical_and_independent_of_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL);
    for (dir, jobs) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let out = lcl(
            &["measure", "--config", &cfg, "--output", dir, "--jobs", jobs],
            tmp.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    same_tree(&tmp.path().join("a"), &tmp.path().join("b"));
    same_tree(&tmp.path().join("a"), &tmp.path().join("c"));
    let out = lcl(
        &["measure", "--config", &cfg, "--output", "d", "--seed", "7"],
        tmp.path(),
    );
    assert!(out.status.success());
    assert_ne!(
        fs::read(tmp.path().join("a/measure.csv")).unwrap(),
        fs::read(tmp.path().join("d/measure.csv")).unwrap()
    );
}

#[test]
fn manifest_relaunch_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL);
    for sub in ["spectrum", "measure"] {
        let first = format!("{sub}-1");
        let second = format!("{sub}-2");
        assert!(lcl(&[sub, "--config", &cfg, "--output", &first], tmp.path())
            .status
            .success());
        let manifest = tmp.path().join(&first).join("manifest.json");
        let out = lcl(
            &[sub, "--config", manifest.to_str().unwrap(), "--output", &second],
            tmp.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        same_tree(&tmp.path().join(&first), &tmp.path().join(&second));
    }
}

#[test]
fn jobs_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lcl"))
        .args(["selfcheck", "--output", "sc"])
        .current_dir(tmp.path())
        .env("LCL_JOBS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
