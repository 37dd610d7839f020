//! End-to-end checks of the `polylike` binary: exit codes, artifact
//! presence, deterministic output, and cache behaviour.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn family(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../families")
        .join(name)
}

fn run_in(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polylike"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("POLYLIKE_CACHE")
        .output()
        .expect("spawn polylike")
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().expect("tempdir")
}

#[test]
fn lyapunov_succeeds_and_writes_artifacts() {
    let dir = tmp();
    let fam = family("quadratic.fam");
    let out = run_in(
        dir.path(),
        &[
            "lyapunov",
            "--family",
            fam.to_str().unwrap(),
            "--param",
            "0,0",
            "--depth",
            "12",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("lyapunov.txt")).unwrap();
    assert!(text.starts_with("L_1 = "));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("lyapunov.txt"));
    assert!(manifest.contains("config_hash"));
}

#[test]
fn unknown_flag_is_a_validation_error() {
    let dir = tmp();
    let out = run_in(dir.path(), &["lyapunov", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_grid_is_a_validation_error() {
    let dir = tmp();
    let fam = family("quadratic.fam");
    let out = run_in(
        dir.path(),
        &["scan", "--family", fam.to_str().unwrap(), "--grid", "1,2,3"],
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_family_file_is_a_validation_error() {
    let dir = tmp();
    let out = run_in(
        dir.path(),
        &[
            "lyapunov",
            "--family",
            "/nonexistent/nowhere.fam",
            "--param",
            "0,0",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn parameter_outside_domain_is_a_validation_error() {
    let dir = tmp();
    let fam = family("quadratic.fam");
    let out = run_in(
        dir.path(),
        &[
            "lyapunov",
            "--family",
            fam.to_str().unwrap(),
            "--param",
            "50,0",
        ],
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn walkers_without_seed_is_rejected() {
    let dir = tmp();
    let fam = family("quadratic.fam");
    let out = run_in(
        dir.path(),
        &[
            "julia",
            "--family",
            fam.to_str().unwrap(),
            "--param",
            "-1,0",
            "--walkers",
            "500",
        ],
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn julia_walk_is_deterministic_for_a_fixed_seed() {
    let fam = family("quadratic.fam");
    let args = [
        "julia",
        "--family",
        fam.to_str().unwrap(),
        "--param",
        "-1,0",
        "--depth",
        "10",
        "--walkers",
        "300",
        "--seed",
        "42",
    ];
    let (a, b) = (tmp(), tmp());
    for dir in [&a, &b] {
        let out = run_in(dir.path(), &args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let bytes_a = std::fs::read(a.path().join("julia.csv")).unwrap();
    let bytes_b = std::fs::read(b.path().join("julia.csv")).unwrap();
    assert!(!bytes_a.is_empty());
    assert_eq!(bytes_a, bytes_b, "same config and seed must give identical CSV");
}

#[test]
fn scan_writes_field_artifacts() {
    let dir = tmp();
    let fam = family("quadratic.fam");
    let out = run_in(
        dir.path(),
        &[
            "scan",
            "--family",
            fam.to_str().unwrap(),
            "--grid",
            "-1,0,-0.5,0.5,11",
            "--depth",
            "8",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["scan.csv", "scan.pgm", "manifest.txt"] {
        assert!(dir.path().join(name).is_file(), "missing {name}");
    }
    let csv = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert!(csv.starts_with("s_re,s_im,value,status"));
    assert_eq!(csv.lines().count(), 1 + 11 * 11);
}

#[test]
fn bifurcation_writes_current_and_support() {
    let dir = tmp();
    let fam = family("quadratic.fam");
    let out = run_in(
        dir.path(),
        &[
            "bifurcation",
            "--family",
            fam.to_str().unwrap(),
            "--grid",
            "-1,0,-0.5,0.5,21",
            "--depth",
            "8",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["field.csv", "field.pgm", "current.csv", "current.pgm", "support.csv"] {
        assert!(dir.path().join(name).is_file(), "missing {name}");
    }
}

#[test]
fn cache_round_trip_hit_and_corruption_recovery() {
    let fam = family("quadratic.fam");
    let cache = tmp();
    let args = |dir: &Path| {
        vec![
            "scan".to_string(),
            "--family".into(),
            fam.to_str().unwrap().into(),
            "--grid".into(),
            "-1,0,-0.5,0.5,11".into(),
            "--depth".into(),
            "8".into(),
            "--cache-dir".into(),
            cache.path().to_str().unwrap().into(),
            "--out".into(),
            dir.to_str().unwrap().into(),
        ]
    };
    let run = |dir: &Path| {
        Command::new(env!("CARGO_BIN_EXE_polylike"))
            .args(args(dir))
            .env_remove("POLYLIKE_CACHE")
            .output()
            .expect("spawn polylike")
    };

    // Miss: computes and populates exactly one cache entry.
    let a = tmp();
    assert_eq!(run(a.path()).status.code(), Some(0));
    let entries: Vec<_> = std::fs::read_dir(cache.path()).unwrap().collect();
    assert_eq!(entries.len(), 1, "one content-addressed entry expected");
    let entry = entries[0].as_ref().unwrap().path();

    // Hit: artifacts are byte-identical and the manifest records the hit.
    let b = tmp();
    assert_eq!(run(b.path()).status.code(), Some(0));
    assert_eq!(
        std::fs::read(a.path().join("scan.csv")).unwrap(),
        std::fs::read(b.path().join("scan.csv")).unwrap()
    );
    let manifest = std::fs::read_to_string(b.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("(cached)"), "manifest should mark cached artifacts");

    // Corrupt entry (missing artifact): recomputes instead of failing.
    std::fs::remove_file(entry.join("scan.csv")).unwrap();
    let c = tmp();
    let out = run(c.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt cache entry"));
    assert_eq!(
        std::fs::read(a.path().join("scan.csv")).unwrap(),
        std::fs::read(c.path().join("scan.csv")).unwrap()
    );
}

#[test]
fn no_cache_flag_bypasses_the_cache() {
    let fam = family("quadratic.fam");
    let cache = tmp();
    let dir = tmp();
    let out = Command::new(env!("CARGO_BIN_EXE_polylike"))
        .args([
            "scan",
            "--family",
            fam.to_str().unwrap(),
            "--grid",
            "-1,0,-0.5,0.5,11",
            "--depth",
            "8",
            "--cache-dir",
            cache.path().to_str().unwrap(),
            "--no-cache",
        ])
        .arg("--out")
        .arg(dir.path())
        .env_remove("POLYLIKE_CACHE")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_dir(cache.path()).unwrap().count(), 0);
}

#[test]
fn cache_env_variable_is_honoured() {
    let fam = family("quadratic.fam");
    let cache = tmp();
    let dir = tmp();
    let out = Command::new(env!("CARGO_BIN_EXE_polylike"))
        .args([
            "scan",
            "--family",
            fam.to_str().unwrap(),
            "--grid",
            "-1,0,-0.5,0.5,11",
            "--depth",
            "8",
        ])
        .arg("--out")
        .arg(dir.path())
        .env("POLYLIKE_CACHE", cache.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_dir(cache.path()).unwrap().count(), 1);
}

#[test]
fn periodic_and_stability_and_slice_check_run() {
    let fam = family("quadratic.fam");
    let dir = tmp();
    let out = run_in(
        dir.path(),
        &[
            "periodic",
            "--family",
            fam.to_str().unwrap(),
            "--param",
            "-1,0",
            "--period",
            "2",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("orbits.csv")).unwrap();
    assert!(csv.starts_with("period,point_re,point_im,multiplier_abs,class,residual"));

    let dir = tmp();
    let out = run_in(
        dir.path(),
        &[
            "stability",
            "--family",
            fam.to_str().unwrap(),
            "--grid",
            "-0.2,0.2,-0.2,0.2,5",
            "--depth",
            "8",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("stability.csv").is_file());

    let skew = family("skew.fam");
    let dir = tmp();
    let out = run_in(
        dir.path(),
        &[
            "slice-check",
            "--family",
            skew.to_str().unwrap(),
            "--grid",
            "-0.3,0.3,-0.3,0.3,5",
            "--depth",
            "6",
            "--base",
            "0.5,0.1",
            "--base",
            "0.2,-0.3",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("slice-check.txt").is_file());
}

#[test]
fn selftest_passes() {
    let dir = tmp();
    let out = run_in(dir.path(), &["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}
