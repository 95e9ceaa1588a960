use std::fs;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_metastab"));
    c.env_remove("METASTAB_OUT");
    c
}

fn write_config(dir: &std::path::Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("s.conf");
    fs::write(&p, text).unwrap();
    p
}

const MANIFOLD: &str = "[scenario]\nname = m\nmodule = manifold\n[domain]\nepsilon = 0.2\n[initial]\nxi0 = 0.1\n";

#[test]
fn manifold_run_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MANIFOLD);
    let out = dir.path().join("out");
    let st = bin()
        .args(["manifold", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("key,metric,value\n"));
    assert!(summary.contains("burgers/eps=0.2/xi=0.1,kappa_gap,"));
}

#[test]
fn env_var_overrides_out_and_reruns_match() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MANIFOLD);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ignored = dir.path().join("ignored");
    let st = bin()
        .env("METASTAB_OUT", &a)
        .args(["sweep", "--jobs", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&ignored)
        .status()
        .unwrap();
    assert!(st.success());
    assert!(!ignored.exists());
    let st = bin()
        .args(["sweep", "--jobs", "3", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&b)
        .status()
        .unwrap();
    assert!(st.success());
    assert_eq!(
        fs::read(a.join("summary.csv")).unwrap(),
        fs::read(b.join("summary.csv")).unwrap()
    );
}

#[test]
fn validation_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[domain]\nepsilon = 0.9\n");
    let st = bin().args(["spectrum", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let st = bin()
        .args(["spectrum", "--config"])
        .arg(dir.path().join("missing.conf"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn numerical_failure_exits_three() {
    // The layer excess underflows double precision at this viscosity.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[domain]\nepsilon = 0.001\n[initial]\nxi0 = 0.5\n");
    let st = bin()
        .args(["manifold", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(3));
}

#[test]
fn hyperbolic_emits_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[scenario]\nname = h\n[initial]\npreset = linear, tanh\n[numerics]\ncells = 100\n",
    );
    let out = dir.path().join("h");
    let st = bin()
        .args(["hyperbolic", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let s = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(s.contains("burgers/preset=linear,within_bound,1.0000000000000000e0"));
    assert!(out.join("tables").join("fronts_burgers_preset_tanh.csv").exists());
}
