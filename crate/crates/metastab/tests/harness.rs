use metastab::harness::{run_scenario, write_outputs, Module, ScenarioConfig};

const SWEEP: &str = "
[scenario]
name = sweep
module = manifold

[flux]
kind = burgers
u_minus = 1

[domain]
ell = 1
epsilon = 0.25, 0.2, 0.15, 0.1

[initial]
xi0 = 0, 0.3
";

#[test]
fn thread_count_does_not_change_results() {
    let cfg = ScenarioConfig::parse(SWEEP).unwrap();
    let a = run_scenario(&cfg, 1).unwrap();
    let b = run_scenario(&cfg, 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.module, Module::Manifold);
    assert_eq!(a.records.len(), 8);
    assert!(a.fits.contains_key("kappa_gap/burgers/xi=0.3"));
}

#[test]
fn outputs_are_written() {
    let cfg = ScenarioConfig::parse(SWEEP).unwrap();
    let r = run_scenario(&cfg, 2).unwrap();
    let dir = std::env::temp_dir().join(format!("metastab-harness-{}", std::process::id()));
    write_outputs(&r, &dir).unwrap();
    let summary = std::fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("key,metric,value"));
    assert!(summary.contains("burgers/eps=0.1/xi=0.3,kappa_gap,"));
    let fits = std::fs::read_to_string(dir.join("fits.csv")).unwrap();
    assert_eq!(fits.lines().count(), 2, "{fits}");
    assert!(fits.contains("kappa_gap/burgers/xi=0.3"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn invalid_scenarios_are_rejected() {
    for text in [
        "[scenario]\nname = x\nmodule = manifold\n[domain]\nepsilon = 0.9\n",
        "[scenario]\nname = x\nmodule = manifold\n[domain]\nepsilon = 0.1\n[initial]\nxi0 = 1.5\n",
        "[scenario]\nname = x\nmodule = manifold\n[bogus]\n",
        "[scenario]\nname = x\nmodule = spectrum\n",
    ] {
        let bad = ScenarioConfig::parse(text).and_then(|c| c.validate());
        assert!(bad.is_err(), "{text}");
    }
}
