use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

const SIMULATE: &str = include_str!("../configs/simulate.toml");
const GHEAT: &str = include_str!("../configs/gheat_convex.toml");

fn gavg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gavg")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_a_complete_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.toml", SIMULATE);
    let out = dir.path().join("run");
    let o = gavg(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("kind = simulate"));
    assert!(manifest.contains("seed = 9"));
    assert!(manifest.contains("verdict = pass"));
    let mut listed = 0;
    for line in manifest.lines().filter(|l| l.starts_with("file ")) {
        let parts: Vec<&str> = line.split(' ').collect();
        assert_eq!(parts.len(), 4, "{line}");
        let bytes = fs::read(out.join(parts[1])).unwrap();
        assert_eq!(format!("{:x}", Sha256::digest(&bytes)), parts[3], "{}", parts[1]);
        listed += 1;
    }
    let on_disk = fs::read_dir(&out).unwrap().count();
    assert_eq!(listed + 1, on_disk);

    let paths = fs::read_to_string(out.join("paths.csv")).unwrap();
    assert!(paths.starts_with("# seed=9 "), "{paths}");
}

#[test]
fn seed_flag_changes_paths_and_reruns_match() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.toml", SIMULATE);
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = gavg(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", seed, "--quiet"]);
        assert!(o.status.success());
        fs::read(out.join("paths.csv")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "2");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn invalid_config_exits_1_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let text = SIMULATE.replace("epsilon = 0.1", "epsilon = 1.5");
    let cfg = write_config(dir.path(), "bad.toml", &text);
    let out = dir.path().join("run");
    let o = gavg(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());

    let empty = write_config(dir.path(), "empty.toml", &format!("{}\n[ladder]\nepsilons = []\n", SIMULATE.replace("[experiment]", "[experiment_]")));
    let o = gavg(&["khasminskii", "--config", &empty, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn kind_must_match_the_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.toml", SIMULATE);
    let out = dir.path().join("run");
    let o = gavg(&["converge", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot run under"));
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(gavg(&["bogus"]).status.code(), Some(1));
    assert_eq!(gavg(&["simulate"]).status.code(), Some(1));
    assert!(gavg(&["--version"]).status.success());
}

#[test]
fn missing_config_file_exits_3() {
    let o = gavg(&["simulate", "--config", "/nonexistent/gavg.toml", "--out", "/tmp/unused"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn failed_verdict_exits_2_after_writing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "g.toml", &GHEAT.replace("oracle = \"x1^2 + 4*x2\"", "oracle = \"x1^2 + 3*x2\""));
    let out = dir.path().join("run");
    let o = gavg(&["converge", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(2));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("verdict = oracle error exceeds the tolerance"), "{manifest}");
    assert!(out.join("errors.csv").exists());
}

#[test]
fn check_reports_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.toml", SIMULATE);
    let o = gavg(&["check", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("G axioms       0 violations in 1000 trials"), "{stdout}");
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn overclaimed_constants_fail_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.toml", &SIMULATE.replace("lip = 2.0", "lip = 0.01"));
    let o = gavg(&["check", "--config", &cfg, "--quiet"]);
    assert_eq!(o.status.code(), Some(1));
}
