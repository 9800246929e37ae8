use std::path::Path;
use std::process::{Command, Output};

fn edgehall(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgehall")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
[geometry]
l1 = 12
l2 = 10
flux = "1/5"

[disorder]
lambda = 0.1
n_realizations = 2
master_seed = 3

[run]
experiments = ["no_current"]
"#;

#[test]
fn run_writes_results_scalars_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let res = edgehall(&["run", &cfg, "--workers", "2"], &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["results.json", "scalars.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"].as_array().unwrap().len(), 2);
}

#[test]
fn seed_flag_overrides_master_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let seeds = |seed: &str| {
        let out = dir.path().join(format!("out{seed}"));
        assert_eq!(edgehall(&["run", &cfg, "--seed", seed], &out).status.code(), Some(0));
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        (m["master_seed"].as_u64().unwrap(), m["seeds"].clone())
    };
    let (a, sa) = seeds("11");
    let (b, sb) = seeds("12");
    assert_eq!((a, b), (11, 12));
    assert_ne!(sa, sb);
}

#[test]
fn negative_spacing_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("flux", "a = -0.5\nflux"));
    let res = edgehall(&["run", &cfg], &dir.path().join("out"));
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("geometry.a"));
}

#[test]
fn failed_assertion_exits_with_tolerance_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace(
        "experiments = [\"no_current\"]",
        "experiments = [\"no_current\"]\nassert = true\ntolerances = { no_current = 1e-30 }",
    );
    let cfg = write_config(dir.path(), &text);
    let res = edgehall(&["run", &cfg], &dir.path().join("out"));
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn scan_lists_four_gaps_at_flux_one_fifth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("lambda = 0.1", "lambda = 0.0"));
    let out = dir.path().join("out");
    let res = edgehall(&["scan", &cfg], &out);
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&res.stdout).lines().filter(|l| l.starts_with("gap ")).count(), 4);
    assert!(out.join("gaps.json").exists());
}

#[test]
fn converge_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("l1 = 12\nl2 = 10", "l1 = 8\nl2 = 10\ntorus = [5, 5]"));
    let out = dir.path().join("out");
    let res = edgehall(&["converge", &cfg, "--axis", "n_t", "--values", "256,512"], &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let table = std::fs::read_to_string(out.join("convergence_n_t.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    let bad = edgehall(&["converge", &cfg, "--axis", "n_t", "--values", "512,256"], &out);
    assert_eq!(bad.status.code(), Some(2));
}
