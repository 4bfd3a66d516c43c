//! End-to-end runs of the `spemm` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn shipped(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect()
}

fn spemm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spemm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const DIFFUSION: &str = r#"{
    "model": {"variant": "custom_lc", "drift": 0.05, "diffusion": 0.04},
    "measure": {"variant": "explicit_beta"},
    "grid": {"T": 1.0, "n_steps": 10},
    "mc": {"n_paths": 2000, "seed": 1}
}"#;

#[test]
fn check_passes_on_the_factor_diffusion_config() {
    let cfg = shipped("bs_factor.json");
    let o = spemm(&["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn check_fails_for_identity_on_a_non_risk_neutral_model() {
    let cfg = shipped("identity_not_risk_neutral.json");
    let o = spemm(&["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let r = v["samples"][0]["admissibility"]["mpre_max_residual"].as_f64().unwrap();
    // |b + c/2| = 0.05 + 0.02.
    assert!((r - 0.07).abs() < 1e-15);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let malformed = write(dir.path(), "bad.json", "{ \"model\": ");
    assert_eq!(code(&spemm(&["check", "--config", malformed.to_str().unwrap()])), 2);
    let unknown = write(
        dir.path(),
        "unknown.json",
        &DIFFUSION.replace("\"seed\": 1", "\"seed\": 1, \"threads\": 4"),
    );
    assert_eq!(code(&spemm(&["check", "--config", unknown.to_str().unwrap()])), 2);
    let missing = dir.path().join("absent.json");
    assert_eq!(code(&spemm(&["verify", "--config", missing.to_str().unwrap()])), 2);
    let wrong_model = write(
        dir.path(),
        "case.json",
        &DIFFUSION.replace("explicit_beta", "cgmy_ou_1"),
    );
    assert_eq!(code(&spemm(&["check", "--config", wrong_model.to_str().unwrap()])), 2);
}

#[test]
fn verify_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.json", DIFFUSION);
    let run = || spemm(&["verify", "--config", cfg.to_str().unwrap(), "--paths", "3000"]);
    let a = run();
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, run().stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["reports"].as_array().unwrap().len(), 3);
    assert_eq!(v["n_paths"], 3000);
    let other = spemm(&["verify", "--config", cfg.to_str().unwrap(), "--paths", "3000", "--seed", "9"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn broken_beta_trips_the_drift_assertion() {
    let cfg = shipped("broken_beta.json");
    let o = spemm(&["verify", "--config", cfg.to_str().unwrap(), "--paths", "2000"]);
    assert_eq!(code(&o), 3);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["reports"][2]["error"].as_str().unwrap().contains("MPRE"));
}

#[test]
fn too_few_paths_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.json", DIFFUSION);
    let o = spemm(&["verify", "--config", cfg.to_str().unwrap(), "--paths", "1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("two paths"));
}

#[test]
fn simulate_writes_one_row_per_grid_point_and_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = shipped("cgmy_ou_case1.json");
    let cfg = std::fs::read_to_string(cfg)
        .unwrap()
        .replace("\"n_steps\": 50", "\"n_steps\": 10");
    let cfg = write(dir.path(), "c.json", &cfg);
    let out = |name: &str| {
        let p = dir.path().join(name);
        let o = spemm(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--paths",
            "3",
            "--seed",
            "5",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(p).unwrap()
    };
    let a = out("a.csv");
    let text = String::from_utf8(a.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,path_id,x,y,z"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 33);
    for r in rows.iter().step_by(11) {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!((f[0], f[2], f[4]), ("0.0", "0.0", "1.0"));
    }
    assert_eq!(a, out("b.csv"));
}

#[test]
fn simulate_into_a_missing_directory_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.json", DIFFUSION);
    let target = dir.path().join("nope").join("paths.csv");
    let o = spemm(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--paths",
        "3",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn exponent_of_a_diffusion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.json", DIFFUSION);
    let o = spemm(&["exponent", "--config", cfg.to_str().unwrap(), "--u", "-2,0,2"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    // ψ(u) = iub − u²c/2.
    for r in rows {
        let u = r[0];
        assert!((r[1] + u * u * 0.02).abs() < 1e-15);
        assert!((r[2] - u * 0.05).abs() < 1e-15);
    }
    let bs = shipped("bs_factor.json");
    assert_eq!(code(&spemm(&["exponent", "--config", bs.to_str().unwrap()])), 2);
}
