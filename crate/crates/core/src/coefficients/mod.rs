//! Problem data for the McKean–Vlasov equation: drift, diffusion, the singular
//! envelope `f`, and the constants `(θ, K, p, q, T)`.
//!
//! Coefficients see the measure argument through a [`LawView`], a borrowed view
//! of weighted atoms that caches the θ-moment and any preset-declared features
//! (such as `μ(tanh x₁)`), so particle systems avoid O(N²) work per step.

mod assumptions;
mod lpq;
pub mod presets;

pub use assumptions::{
    verify_a1, verify_a1_probes, verify_a2, verify_a2_probes, AssumptionReport, ClauseCheck, Probe,
    SamplePlan, CLAUSE_SLACK,
};
pub use lpq::{kato_class_check, tilde_lpq_norm, BallQuadrature, LpqNorm};
pub(crate) use lpq::push_off;

use crate::error::{invalid, Result};
use crate::measures::{raw_theta_moment, EmpiricalMeasure};
use serde::{Deserialize, Serialize};
use std::sync::{Arc, OnceLock};

pub type DriftFn = dyn Fn(f64, &[f64], &LawView<'_>, &mut [f64]) + Send + Sync;
/// Writes the `d × m` diffusion matrix row-major.
pub type DiffusionFn = dyn Fn(f64, &[f64], &LawView<'_>, &mut [f64]) + Send + Sync;
pub type EnvelopeFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;
pub type FeatureFn = dyn Fn(&LawView<'_>) -> Vec<f64> + Send + Sync;

/// Borrowed view of a discrete law with lazily cached summaries.
pub struct LawView<'a> {
    dim: usize,
    atoms: &'a [f64],
    weights: Option<&'a [f64]>,
    theta: f64,
    features_fn: Option<&'a FeatureFn>,
    moment: OnceLock<f64>,
    features: OnceLock<Vec<f64>>,
}

impl<'a> LawView<'a> {
    /// `weights = None` means uniform weights.
    pub fn new(
        dim: usize,
        atoms: &'a [f64],
        weights: Option<&'a [f64]>,
        theta: f64,
        features_fn: Option<&'a FeatureFn>,
    ) -> Self {
        debug_assert!(dim > 0 && atoms.len().is_multiple_of(dim));
        Self {
            dim,
            atoms,
            weights,
            theta,
            features_fn,
            moment: OnceLock::new(),
            features: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        let n = self.len();
        let uniform = 1.0 / n as f64;
        self.atoms
            .chunks_exact(self.dim)
            .enumerate()
            .map(move |(i, x)| (x, self.weights.map_or(uniform, |w| w[i])))
    }

    pub fn expect(&self, mut g: impl FnMut(&[f64]) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * g(x)).sum()
    }

    /// `‖μ‖_θ`, computed once.
    pub fn theta_moment(&self) -> f64 {
        *self
            .moment
            .get_or_init(|| raw_theta_moment(self.iter(), self.theta))
    }

    /// Preset-declared linear statistics of the law, computed once.
    pub fn features(&self) -> &[f64] {
        self.features
            .get_or_init(|| self.features_fn.map_or_else(Vec::new, |f| f(self)))
    }

    pub fn to_measure(&self) -> Result<EmpiricalMeasure> {
        match self.weights {
            Some(w) => EmpiricalMeasure::new(self.dim, self.atoms.to_vec(), w.to_vec()),
            None => EmpiricalMeasure::uniform(self.dim, self.atoms.to_vec()),
        }
    }
}

/// Scalar constants of a coefficient family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    pub dim: usize,
    pub brownian_dim: usize,
    pub theta: f64,
    pub k: f64,
    pub p: f64,
    pub q: f64,
    pub horizon: f64,
}

impl Constants {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.brownian_dim == 0 {
            return Err(invalid("dim and brownian_dim must be positive"));
        }
        if !(self.theta >= 1.0) || !self.theta.is_finite() {
            return Err(invalid(format!("theta must be >= 1, got {}", self.theta)));
        }
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(invalid(format!("K must be positive, got {}", self.k)));
        }
        if !kato_class_check(self.p, self.q, self.dim) {
            return Err(invalid(format!(
                "(p, q) = ({}, {}) violates d/p + 2/q < 1 for d = {}",
                self.p, self.q, self.dim
            )));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        Ok(())
    }

    /// `δ = ½(1 − d/p − 2/q)`.
    pub fn delta(&self) -> f64 {
        0.5 * (1.0 - self.dim as f64 / self.p - 2.0 / self.q)
    }
}

/// A drift/diffusion/envelope triple with its constants.
///
/// Callables must be safe to invoke concurrently.
#[derive(Clone)]
pub struct CoefficientSet {
    pub name: String,
    constants: Constants,
    drift: Arc<DriftFn>,
    diffusion: Arc<DiffusionFn>,
    envelope: Arc<EnvelopeFn>,
    features: Option<Arc<FeatureFn>>,
    singular_points: Vec<Vec<f64>>,
    state_independent_diffusion: bool,
}

impl std::fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("name", &self.name)
            .field("constants", &self.constants)
            .field("singular_points", &self.singular_points)
            .finish_non_exhaustive()
    }
}

impl CoefficientSet {
    /// Zero drift, zero envelope, and `σ = [I_d | 0]` until replaced.
    pub fn new(name: impl Into<String>, constants: Constants) -> Result<Self> {
        constants.validate()?;
        let (d, m) = (constants.dim, constants.brownian_dim);
        Ok(Self {
            name: name.into(),
            constants,
            drift: Arc::new(|_, _, _, out: &mut [f64]| out.fill(0.0)),
            diffusion: Arc::new(move |_, _, _, out: &mut [f64]| {
                out.fill(0.0);
                for i in 0..d.min(m) {
                    out[i * m + i] = 1.0;
                }
            }),
            envelope: Arc::new(|_, _| 0.0),
            features: None,
            singular_points: Vec::new(),
            state_independent_diffusion: true,
        })
    }

    pub fn with_drift(
        mut self,
        f: impl Fn(f64, &[f64], &LawView<'_>, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.drift = Arc::new(f);
        self
    }

    /// Replaces σ. Marks σ as possibly state-dependent unless
    /// [`Self::with_state_independent_diffusion`] is called afterwards.
    pub fn with_diffusion(
        mut self,
        f: impl Fn(f64, &[f64], &LawView<'_>, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.diffusion = Arc::new(f);
        self.state_independent_diffusion = false;
        self
    }

    pub fn with_envelope(mut self, f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.envelope = Arc::new(f);
        self
    }

    pub fn with_features(mut self, f: impl Fn(&LawView<'_>) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.features = Some(Arc::new(f));
        self
    }

    pub fn with_singular_points(mut self, points: Vec<Vec<f64>>) -> Self {
        self.singular_points = points;
        self
    }

    /// Declares that `σ_t(x, μ)` does not depend on `x`.
    pub fn with_state_independent_diffusion(mut self, flag: bool) -> Self {
        self.state_independent_diffusion = flag;
        self
    }

    pub fn constants(&self) -> &Constants {
        &self.constants
    }

    pub fn dim(&self) -> usize {
        self.constants.dim
    }

    pub fn brownian_dim(&self) -> usize {
        self.constants.brownian_dim
    }

    pub fn theta(&self) -> f64 {
        self.constants.theta
    }

    pub fn k(&self) -> f64 {
        self.constants.k
    }

    pub fn singular_points(&self) -> &[Vec<f64>] {
        &self.singular_points
    }

    pub fn state_independent_diffusion(&self) -> bool {
        self.state_independent_diffusion
    }

    pub fn view<'a>(&'a self, atoms: &'a [f64], weights: Option<&'a [f64]>) -> LawView<'a> {
        LawView::new(
            self.dim(),
            atoms,
            weights,
            self.theta(),
            self.features.as_deref(),
        )
    }

    pub fn law_view<'a>(&'a self, mu: &'a EmpiricalMeasure) -> LawView<'a> {
        self.view(mu.atoms(), Some(mu.weights()))
    }

    #[inline]
    pub fn drift(&self, t: f64, x: &[f64], law: &LawView<'_>, out: &mut [f64]) {
        (self.drift)(t, x, law, out)
    }

    #[inline]
    pub fn diffusion(&self, t: f64, x: &[f64], law: &LawView<'_>, out: &mut [f64]) {
        (self.diffusion)(t, x, law, out)
    }

    #[inline]
    pub fn envelope(&self, t: f64, x: &[f64]) -> f64 {
        (self.envelope)(t, x)
    }

    pub fn envelope_fn(&self) -> &EnvelopeFn {
        &*self.envelope
    }

    /// `σσ*` at `(t, x)` as a row-major `d × d` buffer.
    pub fn covariance(&self, t: f64, x: &[f64], law: &LawView<'_>, sigma: &mut [f64], out: &mut [f64]) {
        self.diffusion(t, x, law, sigma);
        crate::linalg::outer_self(sigma, self.dim(), self.brownian_dim(), out);
    }
}
