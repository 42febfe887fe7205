use std::path::Path;
use std::process::{Command, Output};

fn mvlab(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvlab"))
        .args(args)
        .env("MVLAB_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL_GRID: &str = "[zvonkin.grid]\nspace_points = 101\ntime_steps = 200\nrecord_slices = 10\n";

#[test]
fn presets_lists_required_names() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvlab(&["presets"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "brownian",
        "constant_drift",
        "bump_drift_mu_dependent",
        "singular_envelope_1d",
        "sigma_mu_dependent",
    ] {
        assert!(text.contains(name), "{name} missing");
    }
    let out = mvlab(&["presets", "--json"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 5);
}

#[test]
fn negative_particles_exit_one_with_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "experiment = \"moments\"\n[plan]\nparticles = -3\n");
    let out = mvlab(&["validate", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("particles"));

    let cfg = write(dir.path(), "ok.toml", "experiment = \"moments\"\n");
    let out = mvlab(&["run", &cfg, "--set", "plan.particles=0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("plan.particles"));
}

#[test]
fn validate_applies_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.toml", "experiment = \"moments\"\n");
    let out = mvlab(
        &["validate", &cfg, "--seed", "7", "--particles", "50", "--set", "moments.stderr_band=5"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("seed = 7"));
    assert!(text.contains("particles = 50"));
    assert!(text.contains("stderr_band = 5"));
}

#[test]
fn passing_run_writes_under_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "z.toml",
        &format!("experiment = \"zvonkin_gate\"\npreset = \"brownian\"\n[plan]\nparticles = 100\n{SMALL_GRID}"),
    );
    let out = mvlab(&["run", &cfg, "--output", "gate", "--workers", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let base = dir.path().join("gate");
    assert!(base.join("report.json").exists());
    assert!(base.join("zvonkin.csv").exists());
}

#[test]
fn failed_check_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "z.toml",
        &format!(
            "experiment = \"zvonkin_gate\"\npreset = \"constant_drift\"\n[coefficients]\ndrift_scale = 1.0\n\
             [plan]\nparticles = 100\n[zvonkin]\nlambda = 0.0\n{SMALL_GRID}"
        ),
    );
    let out = mvlab(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL regularity_gate"));
    assert!(dir.path().join("mvlab-out/zvonkin_gate/report.json").exists());
}
