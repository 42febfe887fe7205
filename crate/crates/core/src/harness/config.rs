use crate::coefficients::presets::PresetOverrides;
use crate::coefficients::SamplePlan;
use crate::error::{Error, Result};
use crate::parametrix::{BoundBudget, KernelQuadrature};
use crate::zvonkin::GridSpec;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Contraction,
    DensityCompare,
    Bounds,
    Moments,
    ZvonkinGate,
    Assumptions,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Contraction => "contraction",
            Self::DensityCompare => "density_compare",
            Self::Bounds => "bounds",
            Self::Moments => "moments",
            Self::ZvonkinGate => "zvonkin_gate",
            Self::Assumptions => "assumptions",
        }
    }
}

/// One experiment, read from a TOML file. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default)]
    pub coefficients: PresetOverrides,
    /// Output directory; relative paths resolve against `MVLAB_OUTPUT_ROOT` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub plan: PlanConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub contraction: ContractionConfig,
    #[serde(default)]
    pub density: DensityConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub moments: MomentsConfig,
    #[serde(default)]
    pub zvonkin: ZvonkinConfig,
    #[serde(default)]
    pub assumptions: SamplePlan,
}

fn default_preset() -> String {
    "brownian".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanConfig {
    pub particles: usize,
    pub steps: usize,
    pub seed: u64,
    /// End time; the preset horizon when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Worker threads; the rayon default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Drift cap multiplier; 0 disables the cap.
    pub drift_cap: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            particles: 10_000,
            steps: 100,
            seed: 42,
            horizon: None,
            workers: None,
            drift_cap: crate::simulator::DEFAULT_DRIFT_CAP,
        }
    }
}

/// Initial law: `atoms` seeded Gaussian points of standard deviation `spread`
/// around `point`, or the Dirac mass at `point` when `spread = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    pub spread: f64,
    pub atoms: usize,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            point: None,
            spread: 0.0,
            atoms: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContractionConfig {
    pub t0_values: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    /// Lattice spacing for the iterate laws; 0 keeps raw atoms.
    pub lattice: f64,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self {
            t0_values: vec![0.2, 0.1, 0.05],
            tol: 1e-10,
            max_iter: 40,
            lattice: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    pub s: f64,
    pub t: f64,
    pub order: usize,
    /// Number of evaluation points along the first axis.
    pub points: usize,
    /// Half width of the evaluation window in units of `√(t − s)`.
    pub window: f64,
    /// KDE bandwidth for the Monte Carlo reference.
    pub bandwidth: f64,
    /// Gauss–Hermite nodes for smoothing the series by the KDE kernel.
    pub smoothing_nodes: usize,
    /// Fraction of points that must agree within `sigma_band` standard errors.
    pub min_fraction: f64,
    pub sigma_band: f64,
    /// Relative tolerance against a closed-form reference.
    pub exact_tolerance: f64,
    pub quadrature: KernelQuadrature,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            x: None,
            s: 0.0,
            t: 0.5,
            order: 3,
            points: 20,
            window: 2.5,
            bandwidth: 0.05,
            smoothing_nodes: 3,
            min_fraction: 0.9,
            sigma_band: 3.0,
            exact_tolerance: 1e-3,
            quadrature: KernelQuadrature::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub probes: usize,
    pub radius: f64,
    pub probe_seed: u64,
    pub budget: BoundBudget,
    pub quadrature: KernelQuadrature,
    pub lattice: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            probes: 40,
            radius: 2.0,
            probe_seed: 11,
            budget: BoundBudget::default(),
            quadrature: KernelQuadrature::default(),
            lattice: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentsConfig {
    /// Nested horizons at which the running sup-moment is reported.
    pub horizons: Vec<f64>,
    /// Allowed gap between the base and doubled runs, in combined standard errors.
    pub stderr_band: f64,
}

impl Default for MomentsConfig {
    fn default() -> Self {
        Self {
            horizons: vec![0.25, 0.5, 1.0],
            stderr_band: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZvonkinConfig {
    pub grid: GridSpec,
    pub lambda_max: f64,
    /// Fixed λ; the search runs when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Grid times of the measure flows fed to the solver.
    pub flow_steps: usize,
}

impl Default for ZvonkinConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            lambda_max: 1024.0,
            lambda: None,
            flow_steps: 10,
        }
    }
}

fn config_error(key: &str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Parses a `--set` value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut cur = table;
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(config_error(key, "empty key segment"));
        }
        if parts.peek().is_none() {
            cur.insert(part.to_string(), value);
            return Ok(());
        }
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_error(key, format!("`{part}` is not a table")))?;
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    /// Parses `text`, applies `key=value` overrides (dotted keys), and validates.
    pub fn from_toml_with(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        for (k, v) in overrides {
            set_dotted(&mut table, k, parse_value(v))?;
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_error(key, format!("must be positive and finite, got {v}")))
            }
        };
        crate::coefficients::presets::preset_info(&self.preset)?;
        if self.plan.particles == 0 {
            return Err(config_error("plan.particles", "must be positive"));
        }
        if self.plan.steps == 0 {
            return Err(config_error("plan.steps", "must be positive"));
        }
        if let Some(h) = self.plan.horizon {
            positive("plan.horizon", h)?;
        }
        if self.plan.workers == Some(0) {
            return Err(config_error("plan.workers", "must be positive"));
        }
        if !(self.plan.drift_cap >= 0.0) {
            return Err(config_error("plan.drift_cap", "must be nonnegative"));
        }
        if !(self.initial.spread >= 0.0 && self.initial.spread.is_finite()) {
            return Err(config_error("initial.spread", "must be nonnegative"));
        }
        if self.initial.atoms == 0 {
            return Err(config_error("initial.atoms", "must be positive"));
        }
        let c = &self.contraction;
        if c.t0_values.is_empty() {
            return Err(config_error("contraction.t0_values", "must not be empty"));
        }
        for &t0 in &c.t0_values {
            positive("contraction.t0_values", t0)?;
        }
        positive("contraction.tol", c.tol)?;
        if c.max_iter < 2 {
            return Err(config_error("contraction.max_iter", "must be at least 2"));
        }
        if !(c.lattice >= 0.0) {
            return Err(config_error("contraction.lattice", "must be nonnegative"));
        }
        let d = &self.density;
        if !(d.s >= 0.0 && d.t > d.s && d.t.is_finite()) {
            return Err(config_error("density.t", "need 0 ≤ s < t"));
        }
        if d.points == 0 {
            return Err(config_error("density.points", "must be positive"));
        }
        positive("density.window", d.window)?;
        positive("density.bandwidth", d.bandwidth)?;
        positive("density.sigma_band", d.sigma_band)?;
        positive("density.exact_tolerance", d.exact_tolerance)?;
        if d.smoothing_nodes == 0 {
            return Err(config_error("density.smoothing_nodes", "must be positive"));
        }
        if !(0.0..=1.0).contains(&d.min_fraction) {
            return Err(config_error("density.min_fraction", "must lie in [0, 1]"));
        }
        if d.quadrature.time_nodes == 0 {
            return Err(config_error("density.quadrature.time_nodes", "must be positive"));
        }
        if self.bounds.probes == 0 {
            return Err(config_error("bounds.probes", "must be positive"));
        }
        positive("bounds.radius", self.bounds.radius)?;
        if !(self.bounds.lattice >= 0.0) {
            return Err(config_error("bounds.lattice", "must be nonnegative"));
        }
        if self.moments.horizons.is_empty() {
            return Err(config_error("moments.horizons", "must not be empty"));
        }
        for &h in &self.moments.horizons {
            positive("moments.horizons", h)?;
        }
        positive("moments.stderr_band", self.moments.stderr_band)?;
        let z = &self.zvonkin;
        if !(z.lambda_max >= 0.0 && z.lambda_max.is_finite()) {
            return Err(config_error("zvonkin.lambda_max", "must be finite and nonnegative"));
        }
        if let Some(l) = z.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(config_error("zvonkin.lambda", "must be finite and nonnegative"));
            }
        }
        if z.flow_steps == 0 {
            return Err(config_error("zvonkin.flow_steps", "must be positive"));
        }
        if z.grid.space_points < 3 || z.grid.time_steps == 0 || z.grid.record_slices == 0 {
            return Err(config_error("zvonkin.grid", "needs ≥ 3 space points and positive step counts"));
        }
        if self.assumptions.n_probes == 0 {
            return Err(config_error("assumptions.n_probes", "must be positive"));
        }
        Ok(())
    }
}
