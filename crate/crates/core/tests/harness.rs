use mvlab_core::harness::{list_presets, run_in, ExperimentConfig, ExperimentReport};
use mvlab_core::Error;
use std::collections::HashSet;
use std::path::Path;

fn run(text: &str, dir: &Path) -> ExperimentReport {
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    let report = run_in(&cfg, dir).unwrap();
    let echoed: ExperimentReport =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(echoed.config, cfg);
    for name in &report.artifacts {
        assert!(dir.join(name).exists(), "{name}");
    }
    report
}

#[test]
fn presets_are_unique_and_include_the_required_families() {
    let names: Vec<&str> = list_presets().iter().map(|p| p.name).collect();
    let unique: HashSet<&str> = names.iter().copied().collect();
    assert_eq!(unique.len(), names.len());
    for required in [
        "brownian",
        "constant_drift",
        "bump_drift_mu_dependent",
        "singular_envelope_1d",
        "sigma_mu_dependent",
    ] {
        assert!(unique.contains(required), "{required}");
    }
}

#[test]
fn measure_free_contraction_takes_two_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let rep = run(
        "experiment = \"contraction\"\npreset = \"brownian\"\n[plan]\nparticles = 500\nsteps = 20\n",
        dir.path(),
    );
    assert!(rep.pass(), "{:?}", rep.checks);
    for r in rep.metrics["runs"].as_array().unwrap() {
        assert!(r["iterations_per_segment"].as_array().unwrap().iter().all(|n| n == 2));
    }
    let csv = std::fs::read_to_string(dir.path().join("contraction.csv")).unwrap();
    assert!(csv.starts_with("t0,iteration,distance\n"));
}

#[test]
fn constant_drift_density_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let rep = run(
        "experiment = \"density_compare\"\npreset = \"constant_drift\"\n[density]\npoints = 6\nt = 0.3\n",
        dir.path(),
    );
    assert!(rep.pass(), "{:?}", rep.checks);
    assert!(rep.metrics["max_relative_error"].as_f64().unwrap() < 1e-3);
}

#[test]
fn remaining_experiments_run_and_report() {
    let cases = [
        "experiment = \"bounds\"\npreset = \"bump_drift_mu_dependent\"\n[plan]\nparticles = 500\nsteps = 20\n\
         [bounds]\nprobes = 4\n",
        "experiment = \"moments\"\npreset = \"constant_drift\"\n[plan]\nparticles = 2000\nsteps = 20\n",
        "experiment = \"zvonkin_gate\"\npreset = \"singular_envelope_1d\"\n[plan]\nparticles = 500\n\
         [zvonkin.grid]\nspace_points = 161\ntime_steps = 200\n",
        "experiment = \"assumptions\"\npreset = \"sigma_mu_dependent\"\n[assumptions]\nn_probes = 30\n",
    ];
    for text in cases {
        let dir = tempfile::tempdir().unwrap();
        let rep = run(text, dir.path());
        assert!(!rep.checks.is_empty());
        assert!(rep.pass(), "{text}: {:?}", rep.checks);
        assert_eq!(rep.provenance.seed, 42);
    }
}

#[test]
fn failing_gate_is_reported_not_raised() {
    let dir = tempfile::tempdir().unwrap();
    let rep = run(
        "experiment = \"zvonkin_gate\"\npreset = \"constant_drift\"\n[coefficients]\ndrift_scale = 1.0\n\
         [plan]\nparticles = 100\n[zvonkin]\nlambda = 0.0\n[zvonkin.grid]\nspace_points = 101\ntime_steps = 100\n",
        dir.path(),
    );
    assert!(!rep.pass());
}

#[test]
fn invalid_configs_name_the_key() {
    let err = ExperimentConfig::from_toml("experiment = \"bounds\"\n[bounds]\nradius = -1.0\n").unwrap_err();
    assert!(matches!(&err, Error::InvalidConfig { key, .. } if key == "bounds.radius"));
    let err = ExperimentConfig::from_toml("experiment = \"bounds\"\npreset = \"nope\"\n").unwrap_err();
    assert!(matches!(err, Error::UnknownPreset(_)));
    let err = ExperimentConfig::from_toml("experiment = \"teleport\"\n").unwrap_err();
    assert!(matches!(err, Error::Parse(_)));
}

#[test]
fn reruns_produce_identical_csv() {
    let text = "experiment = \"moments\"\npreset = \"bump_drift_mu_dependent\"\n[plan]\nparticles = 1000\nsteps = 20\n";
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(text, a.path());
    run(text, b.path());
    let read = |d: &Path| std::fs::read(d.join("moments.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}
