//! Experiment configuration, orchestration and report emission.
//!
//! An experiment reads one TOML file, runs inside a rayon pool of the
//! configured size, and writes CSV payloads plus `report.json` to its output
//! directory. Numeric CSV cells use 17 significant digits, and every random
//! draw is keyed by seed and particle index, so payloads do not depend on the
//! worker count.

mod config;

pub use config::{
    BoundsConfig, ContractionConfig, DensityConfig, ExperimentConfig, ExperimentKind, InitialConfig, MomentsConfig,
    PlanConfig, ZvonkinConfig,
};
pub use crate::coefficients::presets::{list_presets, PresetInfo};

use crate::coefficients::presets::{build_preset, preset_info};
use crate::coefficients::{verify_a1, verify_a2, CoefficientSet};
use crate::error::{invalid, Error, Result};
use crate::measures::io::fmt_num;
use crate::measures::{kde_gaussian, EmpiricalMeasure, MeasureFlow};
use crate::parametrix::{
    fit_series_constants, parametrix_density, verify_bounds, BoundProbe, KernelContext,
};
use crate::quadrature::gauss_hermite_normal;
use crate::rng::{SeqRng, Stream};
use crate::simulator::{
    moment_report, phi_map_on_lattice, picard_solve, simulate_frozen, simulate_mckean_vlasov, PicardOptions,
    SimulationPlan,
};
use crate::zvonkin::{lambda_search, regularity_gate, solve_backward_pde};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Environment variable naming the root of relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "MVLAB_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// The effective configuration, after overrides.
    pub config: ExperimentConfig,
    pub metrics: Map<String, Value>,
    pub checks: Vec<CheckOutcome>,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Output directory of `cfg`: an absolute `output` as is, a relative one under
/// `$MVLAB_OUTPUT_ROOT` (or the working directory), and `mvlab-out/<experiment>`
/// when absent.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    let root = std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    match &cfg.output {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => root.join(p),
        None => root.join("mvlab-out").join(cfg.experiment.name()),
    }
}

/// Runs `cfg` and writes its artifacts to [`output_dir`].
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_in(cfg, &output_dir(cfg))
}

/// Runs `cfg` and writes its artifacts to `dir`.
pub fn run_in(cfg: &ExperimentConfig, dir: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.plan.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let mut out = Outputs::new(dir);
    let (metrics, checks) = pool.install(|| dispatch(cfg, &mut out))?;
    let report = ExperimentReport {
        config: cfg.clone(),
        metrics,
        checks,
        artifacts: out.written,
        provenance: Provenance {
            seed: cfg.plan.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: start.elapsed().as_secs_f64(),
            workers: pool.current_num_threads(),
        },
    };
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

struct Outputs<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Self {
        Self {
            dir,
            written: Vec::new(),
        }
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        fs::write(self.dir.join(name), body)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let mut body = header.join(",");
        body.push('\n');
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_num(*v)).collect();
            body.push_str(&cells.join(","));
            body.push('\n');
        }
        self.text(name, &body)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.text(name, &serde_json::to_string_pretty(value)?)
    }
}

type Outcome = (Map<String, Value>, Vec<CheckOutcome>);

fn check(name: &str, pass: bool, detail: impl Into<String>) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        pass,
        detail: detail.into(),
    }
}

/// Shared setup of every experiment.
struct Setup {
    coeffs: CoefficientSet,
    gamma: EmpiricalMeasure,
    horizon: f64,
    drift_cap: Option<f64>,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let coeffs = build_preset(&cfg.preset, &cfg.coefficients)?;
        let d = coeffs.dim();
        let point = cfg.initial.point.clone().unwrap_or_else(|| vec![0.0; d]);
        if point.len() != d {
            return Err(Error::InvalidConfig {
                key: "initial.point".into(),
                reason: format!("expected {d} coordinates, got {}", point.len()),
            });
        }
        let gamma = if cfg.initial.spread == 0.0 {
            EmpiricalMeasure::dirac(&point)
        } else {
            let mut rng = SeqRng::new(cfg.plan.seed, Stream::Aux, 0);
            let atoms = (0..cfg.initial.atoms * d)
                .map(|k| point[k % d] + cfg.initial.spread * rng.normal())
                .collect();
            EmpiricalMeasure::uniform(d, atoms)?
        };
        let horizon = cfg.plan.horizon.unwrap_or(coeffs.constants().horizon);
        let drift_cap = (cfg.plan.drift_cap > 0.0).then_some(cfg.plan.drift_cap);
        Ok(Self {
            coeffs,
            gamma,
            horizon,
            drift_cap,
        })
    }

    fn plan(&self, cfg: &ExperimentConfig, particles: usize, s: f64, t: f64) -> Result<SimulationPlan> {
        Ok(SimulationPlan::uniform(particles, s, t, cfg.plan.steps, cfg.plan.seed)?.with_drift_cap(self.drift_cap))
    }
}

fn lattice(h: f64) -> Option<f64> {
    (h > 0.0).then_some(h)
}

fn dispatch(cfg: &ExperimentConfig, out: &mut Outputs<'_>) -> Result<Outcome> {
    let setup = Setup::new(cfg)?;
    match cfg.experiment {
        ExperimentKind::Contraction => contraction(cfg, &setup, out),
        ExperimentKind::DensityCompare => density_compare(cfg, &setup, out),
        ExperimentKind::Bounds => bounds(cfg, &setup, out),
        ExperimentKind::Moments => moments(cfg, &setup, out),
        ExperimentKind::ZvonkinGate => zvonkin_gate(cfg, &setup, out),
        ExperimentKind::Assumptions => assumptions(cfg, &setup, out),
    }
}

fn contraction(cfg: &ExperimentConfig, setup: &Setup, out: &mut Outputs<'_>) -> Result<Outcome> {
    let c = &cfg.contraction;
    let measure_free = preset_info(&cfg.preset)?.measure_free;
    let plan = setup.plan(cfg, cfg.plan.particles, 0.0, setup.horizon)?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut ratios = Vec::new();
    let mut checks = Vec::new();
    for &t0 in &c.t0_values {
        let opts = PicardOptions {
            tol: c.tol,
            max_iter: c.max_iter,
            t0,
            lattice: lattice(c.lattice),
        };
        let res = picard_solve(&setup.coeffs, &setup.gamma, &plan, &opts)?;
        for (k, dist) in res.iterates.iter().enumerate() {
            rows.push(vec![t0, (k + 1) as f64, *dist]);
        }
        let iterations: Vec<usize> = res.segment_reports.iter().map(|s| s.iterates.len()).collect();
        runs.push(json!({
            "t0": t0,
            "first_ratio": res.first_ratio(),
            "iterates": res.iterates,
            "segments": res.segments,
            "iterations_per_segment": iterations,
            "converged": res.converged,
            "cap_activations": res.cap_activations,
        }));
        if measure_free {
            let two = res.converged && iterations.iter().all(|&n| n == 2);
            checks.push(check(
                &format!("two_iterations_t0_{t0}"),
                two,
                format!("iterations per segment {iterations:?}"),
            ));
        } else {
            let r = res.first_ratio();
            checks.push(check(
                &format!("first_ratio_below_one_t0_{t0}"),
                r.is_some_and(|r| r < 1.0),
                format!("first ratio {r:?}"),
            ));
            ratios.push((t0, r.unwrap_or(f64::INFINITY)));
        }
    }
    if !measure_free {
        ratios.sort_by(|a, b| b.0.total_cmp(&a.0));
        let monotone = ratios.windows(2).all(|w| w[1].1 <= w[0].1);
        checks.push(check(
            "ratio_non_increasing_in_t0",
            monotone,
            format!("(t0, ratio) {ratios:?}"),
        ));
    }
    out.csv("contraction.csv", &["t0", "iteration", "distance"], &rows)?;
    let mut m = Map::new();
    m.insert("measure_free".into(), json!(measure_free));
    m.insert("runs".into(), Value::Array(runs));
    Ok((m, checks))
}

/// Tensor Gauss–Hermite average `E[g(z + h ξ)]`, `ξ ~ N(0, I)`.
fn smoothing_nodes(d: usize, n: usize) -> Vec<(Vec<f64>, f64)> {
    let gh = gauss_hermite_normal(n);
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            let mut xi = vec![0.0; d];
            let mut w = 1.0;
            for slot in xi.iter_mut() {
                let i = idx % n;
                idx /= n;
                *slot = gh.nodes[i];
                w *= gh.weights[i];
            }
            (xi, w)
        })
        .collect()
}

fn density_compare(cfg: &ExperimentConfig, setup: &Setup, out: &mut Outputs<'_>) -> Result<Outcome> {
    let dc = &cfg.density;
    let coeffs = &setup.coeffs;
    let d = coeffs.dim();
    let x = dc.x.clone().unwrap_or_else(|| vec![0.0; d]);
    if x.len() != d {
        return Err(Error::InvalidConfig {
            key: "density.x".into(),
            reason: format!("expected {d} coordinates"),
        });
    }
    let (s, t) = (dc.s, dc.t);
    let tau = t - s;
    let start = EmpiricalMeasure::dirac(&x);
    let plan = setup.plan(cfg, cfg.plan.particles, s, t)?;
    let mu_flow = MeasureFlow::constant(plan.time_grid.clone(), &start)?;
    let exact_drift = match cfg.preset.as_str() {
        "brownian" => Some(0.0),
        "constant_drift" => Some(cfg.coefficients.drift_scale.unwrap_or(0.2)),
        _ => None,
    };

    let mut b0 = vec![0.0; d];
    coeffs.drift(s, &x, &coeffs.law_view(&start), &mut b0);
    let points: Vec<Vec<f64>> = (0..dc.points)
        .map(|j| {
            let u = if dc.points == 1 {
                0.0
            } else {
                2.0 * j as f64 / (dc.points - 1) as f64 - 1.0
            };
            let mut z = x.clone();
            z[0] += b0[0] * tau + dc.window * tau.sqrt() * u;
            z
        })
        .collect();

    let ensemble = match exact_drift {
        Some(_) => None,
        None => {
            let stride = (cfg.plan.steps / 10).max(1);
            Some(simulate_frozen(coeffs, &mu_flow, &start, &plan.clone().with_record_stride(stride))?)
        }
    };
    let phi_flow = match &ensemble {
        Some(ens) => ens.law_flow(Some(0.05))?,
        None => mu_flow.clone(),
    };
    let ctx = KernelContext::new(coeffs, &mu_flow, &phi_flow)?.with_covariance_panels(dc.quadrature.covariance_panels);
    let constants = fit_series_constants(&ctx, &x, s, t, &dc.quadrature)?;
    let series = |z: &[f64]| parametrix_density(&ctx, &x, z, s, t, dc.order, &dc.quadrature, Some(&constants));

    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut m = Map::new();
    let mut untrusted = 0usize;
    match exact_drift {
        Some(c) => {
            let mut worst: f64 = 0.0;
            for z in &points {
                let res = series(z)?;
                untrusted += usize::from(res.untrusted);
                let r2: f64 = (0..d)
                    .map(|i| {
                        let mean = x[i] + if i == 0 { c * tau } else { 0.0 };
                        (z[i] - mean).powi(2)
                    })
                    .sum();
                let exact = (-r2 / (2.0 * tau)).exp() / (2.0 * std::f64::consts::PI * tau).powf(0.5 * d as f64);
                let rel = (res.value - exact).abs() / exact;
                worst = worst.max(rel);
                let mut row = z.clone();
                row.extend([res.value, exact, 0.0, res.tail_estimate]);
                rows.push(row);
            }
            m.insert("reference".into(), json!("closed_form"));
            m.insert("max_relative_error".into(), json!(worst));
            checks.push(check(
                "relative_error_vs_closed_form",
                worst < dc.exact_tolerance,
                format!("max relative error {worst:e} (tolerance {:e})", dc.exact_tolerance),
            ));
        }
        None => {
            let ens = ensemble.as_ref().expect("simulated");
            let terminal = EmpiricalMeasure::uniform(d, ens.terminal_positions())?;
            let kde = kde_gaussian(&terminal, &points, dc.bandwidth)?;
            let nodes = smoothing_nodes(d, dc.smoothing_nodes);
            let mut inside = 0usize;
            for (z, est) in points.iter().zip(&kde) {
                let mut smoothed = 0.0;
                let mut tail = 0.0;
                for (xi, w) in &nodes {
                    let zz: Vec<f64> = z.iter().zip(xi).map(|(a, b)| a + dc.bandwidth * b).collect();
                    let res = series(&zz)?;
                    untrusted += usize::from(res.untrusted);
                    smoothed += w * res.value;
                    tail += w * res.tail_estimate;
                }
                let ok = (smoothed - est.value).abs() <= dc.sigma_band * est.std_error;
                inside += usize::from(ok);
                let mut row = z.clone();
                row.extend([smoothed, est.value, est.std_error, tail]);
                rows.push(row);
            }
            let frac = inside as f64 / points.len() as f64;
            m.insert("reference".into(), json!("monte_carlo_kde"));
            m.insert("fraction_within_band".into(), json!(frac));
            m.insert("cap_activations".into(), json!(ens.cap_activations));
            checks.push(check(
                "kde_agreement",
                frac >= dc.min_fraction,
                format!(
                    "{inside}/{} points within {} standard errors (need {})",
                    points.len(),
                    dc.sigma_band,
                    dc.min_fraction
                ),
            ));
        }
    }
    m.insert("untrusted_evaluations".into(), json!(untrusted));
    m.insert("series_constants".into(), serde_json::to_value(&constants)?);
    let mut header: Vec<String> = (1..=d).map(|k| format!("z{k}")).collect();
    header.extend(["parametrix", "reference", "std_error", "tail_estimate"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("density.csv", &header, &rows)?;
    Ok((m, checks))
}

fn bounds(cfg: &ExperimentConfig, setup: &Setup, out: &mut Outputs<'_>) -> Result<Outcome> {
    let bc = &cfg.bounds;
    let coeffs = &setup.coeffs;
    let plan = setup.plan(cfg, cfg.plan.particles, 0.0, setup.horizon)?;
    let lat = lattice(bc.lattice);
    let mu0 = MeasureFlow::constant(plan.time_grid.clone(), &setup.gamma)?;
    let phi0 = phi_map_on_lattice(coeffs, &setup.gamma, &mu0, &plan, lat)?;
    let phi1 = phi_map_on_lattice(coeffs, &setup.gamma, &phi0, &plan, lat)?;
    let ctx_mu = KernelContext::new(coeffs, &mu0, &phi0)?.with_covariance_panels(bc.quadrature.covariance_panels);
    let ctx_nu = KernelContext::new(coeffs, &phi0, &phi1)?.with_covariance_panels(bc.quadrature.covariance_panels);
    let probes = BoundProbe::sample(coeffs.dim(), bc.probes, 0.0, setup.horizon, bc.radius, bc.probe_seed);
    let report = verify_bounds(&ctx_mu, &ctx_nu, &probes, None, &bc.budget, &bc.quadrature)?;
    out.json("bounds.json", &report)?;
    let rows: Vec<Vec<f64>> = report
        .checks
        .iter()
        .map(|c| vec![c.worst_constant, c.budget, f64::from(u8::from(c.pass))])
        .collect();
    let mut body = String::from("name,worst_constant,budget,pass\n");
    for (c, row) in report.checks.iter().zip(&rows) {
        body.push_str(&format!("{},{},{},{}\n", c.name, fmt_num(row[0]), fmt_num(row[1]), row[2]));
    }
    out.text("bounds.csv", &body)?;
    let checks = report
        .checks
        .iter()
        .map(|c| {
            check(
                &c.name,
                c.pass,
                format!("worst constant {:e} vs budget {:e}", c.worst_constant, c.budget),
            )
        })
        .collect();
    let mut m = Map::new();
    m.insert("probes".into(), json!(probes.len()));
    m.insert("bounds".into(), serde_json::to_value(&report)?);
    Ok((m, checks))
}

fn moments(cfg: &ExperimentConfig, setup: &Setup, out: &mut Outputs<'_>) -> Result<Outcome> {
    let mc = &cfg.moments;
    let coeffs = &setup.coeffs;
    let horizon = mc.horizons.iter().copied().fold(0.0, f64::max);
    let base = simulate_mckean_vlasov(coeffs, &setup.gamma, &setup.plan(cfg, cfg.plan.particles, 0.0, horizon)?)?;
    let doubled = simulate_mckean_vlasov(coeffs, &setup.gamma, &setup.plan(cfg, 2 * cfg.plan.particles, 0.0, horizon)?)?;
    let theta = coeffs.theta();
    let r1 = moment_report(&base, theta);
    let r2 = moment_report(&doubled, theta);
    let rows: Vec<Vec<f64>> = (0..r1.times.len())
        .map(|k| vec![r1.times[k], r1.per_time_moments[k], r1.running_sup_moments[k]])
        .collect();
    out.csv("moments.csv", &["t", "moment", "running_sup_moment"], &rows)?;

    let nested: Vec<Value> = mc
        .horizons
        .iter()
        .map(|&h| {
            let k = r1.times.partition_point(|&t| t <= h * (1.0 + 1e-12)).max(1) - 1;
            let xs: Vec<f64> = r1.times[..=k].iter().map(|t| t - r1.times[0]).collect();
            let ys: Vec<f64> = r1.running_sup_moments[..=k].iter().map(|v| v.ln()).collect();
            json!({
                "horizon": h,
                "sup_moment": r1.running_sup_moments[k],
                "growth_rate": growth_slope(&xs, &ys),
            })
        })
        .collect();
    let gap = (r1.sup_moment_theta - r2.sup_moment_theta).abs();
    let band = mc.stderr_band * r1.sup_moment_stderr.hypot(r2.sup_moment_stderr);
    let checks = vec![
        check(
            "sup_moment_finite",
            r1.sup_moment_theta.is_finite() && r2.sup_moment_theta.is_finite(),
            format!("{} and {}", r1.sup_moment_theta, r2.sup_moment_theta),
        ),
        check(
            "stable_under_doubling",
            gap <= band,
            format!("gap {gap:e} vs {} combined standard errors = {band:e}", mc.stderr_band),
        ),
    ];
    let mut m = Map::new();
    m.insert("sup_moment".into(), json!(r1.sup_moment_theta));
    m.insert("sup_moment_stderr".into(), json!(r1.sup_moment_stderr));
    m.insert("sup_moment_doubled".into(), json!(r2.sup_moment_theta));
    m.insert("sup_moment_doubled_stderr".into(), json!(r2.sup_moment_stderr));
    m.insert("fitted_growth_rate".into(), json!(r1.fitted_growth_rate));
    m.insert("nested_horizons".into(), Value::Array(nested));
    Ok((m, checks))
}

fn growth_slope(xs: &[f64], ys: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

fn zvonkin_gate(cfg: &ExperimentConfig, setup: &Setup, out: &mut Outputs<'_>) -> Result<Outcome> {
    let zc = &cfg.zvonkin;
    let coeffs = &setup.coeffs;
    if coeffs.dim() != 1 {
        return Err(Error::InvalidConfig {
            key: "coefficients.dim".into(),
            reason: "zvonkin_gate is one-dimensional".into(),
        });
    }
    let flow_plan = SimulationPlan::uniform(cfg.plan.particles, 0.0, setup.horizon, zc.flow_steps, cfg.plan.seed)?
        .with_drift_cap(setup.drift_cap);
    let mu = MeasureFlow::constant(flow_plan.time_grid.clone(), &setup.gamma)?;
    let phi = phi_map_on_lattice(coeffs, &setup.gamma, &mu, &flow_plan, Some(0.05))?;
    let (lambda, trail) = match zc.lambda {
        Some(l) => (l, Vec::new()),
        None => {
            let found = lambda_search(coeffs, &mu, &phi, &zc.grid, zc.lambda_max)?;
            (found.lambda, found.trail)
        }
    };
    let sol = solve_backward_pde(coeffs, &mu, &phi, lambda, &zc.grid)?;
    let gate = regularity_gate(&sol);
    out.text("zvonkin.csv", &sol.to_csv())?;
    out.json("gate.json", &gate)?;
    let dx = sol.x[1] - sol.x[0];
    let min_slope = sol
        .u
        .iter()
        .flat_map(|row| row.windows(2).map(move |w| 1.0 + (w[1] - w[0]) / dx))
        .fold(f64::INFINITY, f64::min);
    let mut checks = vec![check(
        "regularity_gate",
        gate.pass,
        format!("sup_u + sup_du = {:e} at lambda {lambda}", gate.sup_u + gate.sup_du),
    )];
    if gate.pass {
        checks.push(check(
            "transform_monotone",
            min_slope >= 1.0 - gate.sup_du - 1e-12,
            format!("minimal difference quotient of the transform {min_slope}"),
        ));
    }
    let mut m = Map::new();
    m.insert("lambda".into(), json!(lambda));
    m.insert("gate".into(), serde_json::to_value(&gate)?);
    m.insert("search_trail".into(), serde_json::to_value(&trail)?);
    m.insert("min_transform_slope".into(), json!(min_slope));
    Ok((m, checks))
}

fn assumptions(cfg: &ExperimentConfig, setup: &Setup, out: &mut Outputs<'_>) -> Result<Outcome> {
    let a1 = verify_a1(&setup.coeffs, &cfg.assumptions)?;
    let a2 = verify_a2(&setup.coeffs, &cfg.assumptions)?;
    out.json("assumptions.json", &json!({ "a1": a1, "a2": a2 }))?;
    let mut body = String::from("assumption,clause,ratio,bound,pass\n");
    for (tag, rep) in [("A1", &a1), ("A2", &a2)] {
        for c in &rep.clauses {
            body.push_str(&format!(
                "{tag},{},{},{},{}\n",
                c.name,
                fmt_num(c.ratio),
                fmt_num(c.bound),
                u8::from(c.pass)
            ));
        }
    }
    out.text("assumptions.csv", &body)?;
    let checks = [("A1", &a1), ("A2", &a2)]
        .iter()
        .flat_map(|(tag, rep)| {
            rep.clauses
                .iter()
                .map(move |c| check(&format!("{tag}.{}", c.name), c.pass, format!("ratio {:e} vs {:e}", c.ratio, c.bound)))
        })
        .collect();
    let mut m = Map::new();
    m.insert("a1".into(), serde_json::to_value(&a1)?);
    m.insert("a2".into(), serde_json::to_value(&a2)?);
    Ok((m, checks))
}
