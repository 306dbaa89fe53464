use homog::cli::{run, EXIT_PASS, EXIT_USAGE};
use std::path::Path;

fn homog(args: &[&str]) -> i32 {
    let mut full = vec!["homog"];
    full.extend_from_slice(args);
    run(full)
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn germ_sweep_is_deterministic_for_a_seed() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = |dir: &Path, seed: &'static str| -> i32 {
        homog(&["germ-sweep", "random", "--seed", seed, "--cutoff", "6", "--directions", "4", "--out", dir.to_str().unwrap()])
    };
    assert_eq!(args(a.path(), "11"), EXIT_PASS);
    assert_eq!(args(b.path(), "11"), EXIT_PASS);
    assert_eq!(args(c.path(), "12"), EXIT_PASS);
    assert_eq!(read(a.path(), "germ_sweep.csv"), read(b.path(), "germ_sweep.csv"));
    assert_ne!(read(a.path(), "germ_sweep.csv"), read(c.path(), "germ_sweep.csv"));
}

#[test]
fn effmat_writes_nine_digit_json() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(homog(&["effmat", "layered-scalar", "--out", dir.path().to_str().unwrap()]), EXIT_PASS);
    let v: serde_json::Value = serde_json::from_str(&read(dir.path(), "effmat.json")).unwrap();
    let g0 = v["g0"][0][0][0].as_f64().unwrap();
    assert_eq!(g0, 1.73205081);
}

#[test]
fn config_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"cutoff": 5, "command": "effmat"}"#).unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(homog(&["effmat", "layered-scalar", "--cutoff", "40", "--config", cfg.to_str().unwrap(), "--out", out]), EXIT_PASS);
    let v: serde_json::Value = serde_json::from_str(&read(dir.path(), "effmat.json")).unwrap();
    assert_eq!(v["cutoff"].as_u64(), Some(5));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(homog(&["effmat", "no-such-example", "--out", out]), EXIT_USAGE);
    assert_eq!(homog(&["effmat", "layered-scalar", "--cutoff", "0", "--out", out]), EXIT_USAGE);
    assert_eq!(homog(&["effmat", "layered-scalar", "--bogus"]), EXIT_USAGE);
    assert_eq!(homog(&["rate", "layered-scalar", "--eps", "0.5,2", "--out", out]), EXIT_USAGE);
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"cutof": 5}"#).unwrap();
    assert_eq!(homog(&["effmat", "layered-scalar", "--config", cfg.to_str().unwrap(), "--out", out]), EXIT_USAGE);
    std::fs::write(&cfg, r#"{"command": "rate"}"#).unwrap();
    assert_eq!(homog(&["effmat", "layered-scalar", "--config", cfg.to_str().unwrap(), "--out", out]), EXIT_USAGE);
}

#[test]
fn reproduce_passes_on_closed_form_example() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(homog(&["reproduce", "layered-elasticity", "--out", dir.path().to_str().unwrap()]), EXIT_PASS);
    let table = read(dir.path(), "reproduce_layered-elasticity.csv");
    assert!(table.starts_with("quantity,measured,expected,provenance,status"));
    assert!(table.lines().skip(1).all(|l| l.ends_with("PASS")));
}
