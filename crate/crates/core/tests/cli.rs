use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn frontlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frontlab"))
        .args(args)
        .arg("-o")
        .arg(out)
        .env_remove("FRONTLAB_OUT_DIR")
        .output()
        .expect("spawn frontlab")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Every file except the manifest, which records the output path.
fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

const COMMANDS: &[&[&str]] = &[
    &["bbm", "--dim", "2", "--t", "5", "--replicas", "2", "--seed", "3"],
    &["front", "--dim", "3", "--t", "6", "--replicas", "2", "--s-steps", "5", "--theta-steps", "4", "--seed", "3"],
    &["landscape", "--dim", "2", "--t", "6", "--clusters", "2", "--seed", "3"],
    &["cluster", "--dim", "2", "--t", "4", "--replicas", "2", "--seed", "3"],
    &["rho", "--replicas", "3", "--surface", "--seed", "3"],
    &["verify", "--suite", "rho-exponent", "--replicas", "50", "--seed", "3"],
];

#[test]
fn every_command_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    for (k, args) in COMMANDS.iter().enumerate() {
        let (a, b) = (tmp.path().join(format!("{k}a")), tmp.path().join(format!("{k}b")));
        for dir in [&a, &b] {
            let out = frontlab(args, dir);
            assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        }
        let (fa, fb) = (artifacts(&a), artifacts(&b));
        assert!(!fa.is_empty(), "{args:?} wrote nothing");
        assert_eq!(fa, fb, "{args:?}");
        let (ma, mb) = (manifest(&a), manifest(&b));
        assert_eq!(ma["status"], "ok");
        assert_eq!(ma["artifacts"], mb["artifacts"]);
        assert_eq!(ma["artifacts"].as_array().unwrap().len(), fa.len());
    }
}

#[test]
fn seeds_change_the_output() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(frontlab(&["bbm", "--dim", "2", "--t", "4", "--seed", "1"], &a).status.success());
    assert!(frontlab(&["bbm", "--dim", "2", "--t", "4", "--seed", "2"], &b).status.success());
    assert_ne!(artifacts(&a), artifacts(&b));
}

#[test]
fn zero_horizon_tree_is_the_root() {
    let tmp = tempfile::tempdir().unwrap();
    let out = frontlab(&["bbm", "--dim", "2", "--t", "0", "--seed", "1"], tmp.path());
    assert!(out.status.success());
    let tree = fs::read_to_string(tmp.path().join("bbm_tree.csv")).unwrap();
    let rows: Vec<&str> = tree.lines().collect();
    assert_eq!(rows.len(), 2, "{tree}");
    assert_eq!(rows[1], "0,0,,0,0,0,0");
}

#[test]
fn invalid_parameters_exit_2_with_error_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    for (k, args) in [
        &["front", "--dim", "1"][..],
        &["front", "--dim", "2", "--epsilon", "1.5"],
        &["rho", "--replicas", "0"],
    ]
    .iter()
    .enumerate()
    {
        let dir = tmp.path().join(k.to_string());
        let out = frontlab(args, &dir);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(err["error"], "usage");
        assert_eq!(manifest(&dir)["status"], "error");
    }
    let out = frontlab(&["frobnicate"], &tmp.path().join("x"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn particle_cap_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = frontlab(&["bbm", "--dim", "2", "--t", "12", "--particle-cap", "1000", "--seed", "1"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    let m = manifest(tmp.path());
    assert_eq!(m["status"], "error");
    assert_eq!(m["error"]["kind"], "capacity");
    assert_eq!(m["error"]["exit_code"], 3);
}

#[test]
fn json_format() {
    let tmp = tempfile::tempdir().unwrap();
    let out = frontlab(&["rho", "--replicas", "2", "--format", "json", "--seed", "5"], tmp.path());
    assert!(out.status.success());
    let t: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("rho.json")).unwrap()).unwrap();
    assert!(t["columns"].is_array());
    assert!(!t["rows"].as_array().unwrap().is_empty());
}

#[test]
fn rho_scaling_suite_passes_at_s2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = frontlab(&["verify", "--suite", "rho-scaling", "--replicas", "2000", "--seed", "7"], tmp.path());
    assert!(out.status.success());
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("verify.json")).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    let s2 = checks.iter().find(|c| c["check_id"] == "rho_scaling_s2").expect("rho_scaling_s2 present");
    assert_eq!(s2["pass"], true, "{s2}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS rho_scaling_s2"));
}
