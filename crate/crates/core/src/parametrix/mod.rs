//! Frozen-Gaussian parametrix for the transition density of the frozen SDE.
//!
//! The correction kernel is
//! `H_{r,t}(y, z) = ⟨b_r(y, μ_r), ∇p⟩ + ½ tr[(a_r(y) − a_r(z)) ∇²p]`, where
//! `p = p^z_{r,t}(·, z)` is differentiated in its backward variable and
//! `a_r(·) = σσ*_r(·, Φ_{s,r}(μ))`. This is `(L_r − L^z_r) p^z` for the backward
//! generators, so the series reproduces the true density.
//!
//! Space integrals use tensor Gauss–Hermite nodes of the Gaussian bridge between
//! the two kernel factors of each convolution; time integrals use the `sin²`
//! substitution, which absorbs inverse-square-root endpoint singularities.

mod bounds;
mod kernel;

pub use bounds::{verify_bounds, BoundBudget, BoundCheck, BoundProbe, BoundReport, TestFunction};
pub use kernel::{
    frozen_density, frozen_density_grad, frozen_density_grid, frozen_density_hess, reference_kernel, FrozenKernel,
    KernelGrid,
};

use crate::coefficients::{push_off, CoefficientSet, LawView};
use crate::error::{invalid, Error, Result};
use crate::linalg::{outer_self, SmallMat, MAX_SMALL_DIM};
use crate::measures::MeasureFlow;
use crate::quadrature::{gauss_hermite_normal, sin2_rule, Rule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Node counts for the series quadrature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelQuadrature {
    pub time_nodes: usize,
    /// Gauss–Hermite nodes per axis; 0 selects 12, 8, 5 for d = 1, 2, 3.
    pub space_nodes: usize,
    /// Panels of the two-point Gauss–Legendre rule for time integrals of σσ*.
    pub covariance_panels: usize,
}

impl Default for KernelQuadrature {
    fn default() -> Self {
        Self {
            time_nodes: 16,
            space_nodes: 0,
            covariance_panels: 8,
        }
    }
}

impl KernelQuadrature {
    pub fn nodes_per_axis(&self, d: usize) -> usize {
        if self.space_nodes > 0 {
            self.space_nodes
        } else {
            [12, 8, 5][d.clamp(1, 3) - 1]
        }
    }

    /// One refinement step: 1.5× time nodes and four more space nodes per axis.
    pub fn refined(&self, d: usize) -> Self {
        Self {
            time_nodes: self.time_nodes * 3 / 2,
            space_nodes: self.nodes_per_axis(d) + 4,
            covariance_panels: self.covariance_panels,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.time_nodes == 0 || self.covariance_panels == 0 {
            return Err(invalid("quadrature needs time_nodes and covariance_panels ≥ 1"));
        }
        Ok(())
    }
}

/// Standardized rules reused across a series evaluation.
struct Prepared {
    /// `sin²` rule on `[0, 1]`.
    time: Rule,
    /// Tensor nodes `ξ` with weights `Π w_j · exp(|ξ|²/2)`.
    bridge: Vec<([f64; MAX_SMALL_DIM], f64)>,
}

impl Prepared {
    fn new(quad: &KernelQuadrature, d: usize) -> Self {
        let gh = gauss_hermite_normal(quad.nodes_per_axis(d));
        let n = gh.len();
        let total = n.pow(d as u32);
        let bridge = (0..total)
            .map(|mut idx| {
                let mut xi = [0.0; MAX_SMALL_DIM];
                let mut w = 1.0;
                for slot in xi.iter_mut().take(d) {
                    let i = idx % n;
                    idx /= n;
                    *slot = gh.nodes[i];
                    w *= gh.weights[i];
                }
                let r2: f64 = xi.iter().map(|v| v * v).sum();
                (xi, w * (0.5 * r2).exp())
            })
            .collect();
        Self {
            time: sin2_rule(0.0, 1.0, quad.time_nodes),
            bridge,
        }
    }

    fn times(&self, r: f64, t: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let len = t - r;
        self.time
            .nodes
            .iter()
            .zip(&self.time.weights)
            .map(move |(u, w)| (r + len * u, len * w))
    }
}

/// Coefficients together with the drift flow `μ` and the flow `Φ_{s,·}(μ)`
/// seen by the diffusion. Both flows are indexed by absolute time and read
/// left-nearest.
pub struct KernelContext<'a> {
    coeffs: &'a CoefficientSet,
    mu_flow: &'a MeasureFlow,
    phi_flow: &'a MeasureFlow,
    mu_views: Vec<LawView<'a>>,
    phi_views: Vec<LawView<'a>>,
    covariance_panels: usize,
    /// `∫_{t_0}^{knot} σσ*` at the knots, for state-independent σ.
    cumulative: Option<(Vec<f64>, Vec<SmallMat>)>,
}

impl<'a> KernelContext<'a> {
    pub fn new(coeffs: &'a CoefficientSet, mu_flow: &'a MeasureFlow, phi_flow: &'a MeasureFlow) -> Result<Self> {
        let d = coeffs.dim();
        if d > MAX_SMALL_DIM {
            return Err(Error::DimensionUnsupported {
                dim: d,
                max: MAX_SMALL_DIM,
            });
        }
        if mu_flow.dim() != d || phi_flow.dim() != d {
            return Err(Error::IncompatibleFlows("flow dimension differs from coefficients".into()));
        }
        let mut ctx = Self {
            coeffs,
            mu_flow,
            phi_flow,
            mu_views: mu_flow.measures().iter().map(|m| coeffs.law_view(m)).collect(),
            phi_views: phi_flow.measures().iter().map(|m| coeffs.law_view(m)).collect(),
            covariance_panels: KernelQuadrature::default().covariance_panels,
            cumulative: None,
        };
        ctx.build_cumulative();
        Ok(ctx)
    }

    pub fn with_covariance_panels(mut self, panels: usize) -> Self {
        self.covariance_panels = panels.max(1);
        self.build_cumulative();
        self
    }

    /// Knots split every flow interval into `covariance_panels` equal panels.
    fn build_cumulative(&mut self) {
        if !self.coeffs.state_independent_diffusion() {
            self.cumulative = None;
            return;
        }
        let times = self.phi_flow.times();
        let n = self.covariance_panels;
        let mut knots = vec![times[0]];
        for w in times.windows(2) {
            for k in 1..=n {
                knots.push(w[0] + (w[1] - w[0]) * k as f64 / n as f64);
            }
        }
        let origin = vec![0.0; self.coeffs.dim()];
        let mut values = vec![SmallMat::zeros(self.coeffs.dim())];
        for w in knots.windows(2) {
            let next = values[values.len() - 1].add(&self.gauss2(&origin, w[0], w[1]));
            values.push(next);
        }
        self.cumulative = Some((knots, values));
    }

    /// Two-point Gauss–Legendre rule for `∫_lo^hi σσ*_v(z) dv`.
    fn gauss2(&self, z: &[f64], lo: f64, hi: f64) -> SmallMat {
        let len = hi - lo;
        let mid = 0.5 * (lo + hi);
        let off = 0.5 / 3f64.sqrt();
        self.local_covariance(mid - off * len, z)
            .add(&self.local_covariance(mid + off * len, z))
            .scaled(0.5 * len)
    }

    /// `∫_{t_0}^v σσ*` from the knot table.
    fn cumulative_at(&self, knots: &[f64], values: &[SmallMat], v: f64) -> SmallMat {
        let origin = vec![0.0; self.coeffs.dim()];
        if v <= knots[0] {
            return self.gauss2(&origin, v, knots[0]).scaled(-1.0);
        }
        let k = knots.partition_point(|&c| c <= v) - 1;
        values[k].add(&self.gauss2(&origin, knots[k], v))
    }

    pub fn coeffs(&self) -> &CoefficientSet {
        self.coeffs
    }

    pub fn mu_flow(&self) -> &MeasureFlow {
        self.mu_flow
    }

    pub fn phi_flow(&self) -> &MeasureFlow {
        self.phi_flow
    }

    /// The start `s` of `Φ_{s,·}`.
    pub fn start(&self) -> f64 {
        self.phi_flow.times()[0]
    }

    fn check_window(&self, s: f64, t: f64) -> Result<()> {
        let s0 = self.start();
        if !(s < t) || s < s0 - 1e-12 * s0.abs().max(1.0) {
            return Err(invalid(format!("window [{s}, {t}] must satisfy {s0} ≤ s < t")));
        }
        Ok(())
    }

    /// `1 + ‖μ_r‖_θ`.
    pub fn growth(&self, r: f64) -> f64 {
        1.0 + self.mu_views[self.mu_flow.index_at(r)].theta_moment()
    }

    /// `S = sup_{r ∈ [s,t]} (1 + ‖μ_r‖_θ)` over the flow grid.
    pub fn sup_growth(&self, s: f64, t: f64) -> f64 {
        let first = self.mu_flow.index_at(s);
        let mut out = self.growth(s);
        for (k, &r) in self.mu_flow.times().iter().enumerate().skip(first + 1) {
            if r > t {
                break;
            }
            out = out.max(1.0 + self.mu_views[k].theta_moment());
        }
        out
    }

    /// `a_r(y) = σσ*_r(y, Φ_{s,r}(μ))`.
    pub fn local_covariance(&self, r: f64, y: &[f64]) -> SmallMat {
        let (d, m) = (self.coeffs.dim(), self.coeffs.brownian_dim());
        let mut sig = [0.0; MAX_SMALL_DIM * MAX_SMALL_DIM];
        let mut sig_vec;
        let sigma: &mut [f64] = if d * m <= sig.len() {
            &mut sig[..d * m]
        } else {
            sig_vec = vec![0.0; d * m];
            &mut sig_vec
        };
        let view = &self.phi_views[self.phi_flow.index_at(r)];
        self.coeffs.diffusion(r, y, view, sigma);
        let mut cov = [0.0; MAX_SMALL_DIM * MAX_SMALL_DIM];
        outer_self(sigma, d, m, &mut cov[..d * d]);
        SmallMat::from_rows(d, &cov[..d * d])
    }

    /// `∫_r^u σσ*_v(z, Φ_{s,v}(μ)) dv` by two-point Gauss–Legendre on equal
    /// panels, each split at the flow grid times. For state-independent σ the
    /// panels are those of a cumulative table built once per context.
    pub fn covariance(&self, z: &[f64], r: f64, u: f64) -> SmallMat {
        if let Some((knots, values)) = &self.cumulative {
            return self
                .cumulative_at(knots, values, u)
                .sub(&self.cumulative_at(knots, values, r))
                .symmetrized();
        }
        let d = self.coeffs.dim();
        let n = self.covariance_panels;
        let mut cuts: Vec<f64> = (0..=n).map(|k| r + (u - r) * k as f64 / n as f64).collect();
        cuts.extend(self.phi_flow.times().iter().copied().filter(|&v| v > r && v < u));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut acc = SmallMat::zeros(d);
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let len = hi - lo;
            if len <= 0.0 {
                continue;
            }
            acc = acc.add(&self.gauss2(z, lo, hi));
        }
        acc.symmetrized()
    }

    fn check_band(&self, a: &SmallMat, len: f64) -> Result<()> {
        let k = self.coeffs.k();
        let (lower, upper) = (len / k, k * len);
        for ev in a.sym_eigenvalues() {
            if ev < lower * (1.0 - 1e-9) || ev > upper * (1.0 + 1e-9) {
                return Err(Error::DiffusionBandViolation {
                    eigenvalue: ev,
                    lower,
                    upper,
                });
            }
        }
        Ok(())
    }

    fn kernel_from(&self, a: SmallMat, z: &[f64], r: f64, u: f64) -> Result<FrozenKernel> {
        self.check_band(&a, u - r)?;
        FrozenKernel::new(a, r, u, z.to_vec())
    }

    /// `p^z_{r,u}` with covariance frozen at `z`.
    pub fn kernel(&self, z: &[f64], r: f64, u: f64) -> Result<FrozenKernel> {
        if !(r < u) {
            return Err(invalid(format!("kernel needs r < u, got [{r}, {u}]")));
        }
        self.kernel_from(self.covariance(z, r, u), z, r, u)
    }

    /// `H_{r,t}(y, z)` with `k = p^z_{r,t}` already built.
    fn h_with(&self, k: &FrozenKernel, r: f64, y: &[f64], z: &[f64]) -> f64 {
        let d = self.coeffs.dim();
        let (_, grad, hess) = k.eval(y, z);
        let mut b = [0.0; MAX_SMALL_DIM];
        let view = &self.mu_views[self.mu_flow.index_at(r)];
        self.coeffs.drift(r, y, view, &mut b[..d]);
        let mut h: f64 = (0..d).map(|i| b[i] * grad[i]).sum();
        if !self.coeffs.state_independent_diffusion() {
            let diff = self.local_covariance(r, y).sub(&self.local_covariance(r, z));
            h += 0.5 * diff.trace_product(&hess);
        }
        h
    }

    /// `H_{r,t}(y, z)`.
    pub fn h_kernel(&self, r: f64, t: f64, y: &[f64], z: &[f64]) -> Result<f64> {
        self.check_window(r, t)?;
        let k = self.kernel(z, r, t)?;
        Ok(self.h_with(&k, r, y, z))
    }

    /// Bridge nodes for `∫ g(z') dz'` where `g` carries Gaussian factors centred
    /// at `y` (variance `v1`) and at `z` (variance `v2`).
    fn bridge<'p>(
        &self,
        prep: &'p Prepared,
        y: &'p [f64],
        z: &'p [f64],
        v1: f64,
        v2: f64,
    ) -> impl Iterator<Item = ([f64; MAX_SMALL_DIM], f64)> + 'p
    where
        'a: 'p,
    {
        let d = y.len();
        let lam = v1 / (v1 + v2);
        let vb = v1 * v2 / (v1 + v2);
        let sd = vb.sqrt();
        let scale = (2.0 * PI * vb).powf(0.5 * d as f64);
        let singular = self.coeffs.singular_points();
        prep.bridge.iter().map(move |(xi, w)| {
            let mut p = [0.0; MAX_SMALL_DIM];
            for i in 0..d {
                p[i] = y[i] + lam * (z[i] - y[i]) + sd * xi[i];
            }
            push_off(&mut p[..d], singular);
            (p, w * scale)
        })
    }

    /// `out[k] = H^{k+1}_{r,t}(y, z)` for `k = 0..=depth`; `k_rt = p^z_{r,t}`.
    #[allow(clippy::too_many_arguments)]
    fn chain(
        &self,
        depth: usize,
        r: f64,
        y: &[f64],
        t: f64,
        z: &[f64],
        k_rt: &FrozenKernel,
        prep: &Prepared,
        out: &mut [f64],
    ) -> Result<()> {
        let d = y.len();
        out[0] = self.h_with(k_rt, r, y, z);
        if depth == 0 {
            return Ok(());
        }
        out[1..=depth].fill(0.0);
        let shared = self.coeffs.state_independent_diffusion();
        let mut inner = vec![0.0; depth];
        for (u, wu) in prep.times(r, t) {
            let a1 = self.covariance(z, r, u);
            let k_ut = self.kernel(z, u, t)?;
            let v1 = a1.trace_product(&SmallMat::identity(d)) / d as f64;
            let v2 = k_ut.a.trace_product(&SmallMat::identity(d)) / d as f64;
            let k_shared = if shared {
                Some(self.kernel_from(a1, z, r, u)?)
            } else {
                None
            };
            for (zp, wz) in self.bridge(prep, y, z, v1, v2) {
                let zp = &zp[..d];
                let h = match &k_shared {
                    Some(k) => self.h_with(k, r, y, zp),
                    None => {
                        let k = self.kernel(zp, r, u)?;
                        self.h_with(&k, r, y, zp)
                    }
                };
                if h == 0.0 {
                    continue;
                }
                self.chain(depth - 1, u, zp, t, z, &k_ut, prep, &mut inner)?;
                let c = wu * wz * h;
                for k in 0..depth {
                    out[k + 1] += c * inner[k];
                }
            }
        }
        Ok(())
    }

    /// `H^m_{r,t}(y, z)` at the given quadrature.
    pub fn h_kernel_iterated_at(
        &self,
        m: usize,
        r: f64,
        t: f64,
        y: &[f64],
        z: &[f64],
        quad: &KernelQuadrature,
    ) -> Result<f64> {
        if m == 0 {
            return Err(invalid("iterated kernel order must be ≥ 1"));
        }
        quad.validate()?;
        self.check_window(r, t)?;
        let prep = Prepared::new(quad, self.coeffs.dim());
        let k_rt = self.kernel(z, r, t)?;
        let mut out = vec![0.0; m];
        self.chain(m - 1, r, y, t, z, &k_rt, &prep, &mut out)?;
        Ok(out[m - 1])
    }

    /// `H^m_{r,t}(y, z)`; for `m ≥ 2` the value is recomputed on a refined
    /// quadrature and a relative change above 10% is an error.
    pub fn h_kernel_iterated(
        &self,
        m: usize,
        r: f64,
        t: f64,
        y: &[f64],
        z: &[f64],
        quad: &KernelQuadrature,
    ) -> Result<f64> {
        let coarse = self.h_kernel_iterated_at(m, r, t, y, z, quad)?;
        if m == 1 {
            return Ok(coarse);
        }
        let fine = self.h_kernel_iterated_at(m, r, t, y, z, &quad.refined(self.coeffs.dim()))?;
        let scale = coarse.abs().max(fine.abs());
        if scale > 1e-300 && (coarse - fine).abs() > 0.1 * scale {
            return Err(Error::QuadratureUnresolved { coarse, fine });
        }
        Ok(fine)
    }
}

/// Fitted constants of the geometric tail majorant
/// `|H^m_{r,t}(y,z)| ≤ f_r(y) (C S)^m (t − r)^{−1/2 + δ(m−1)} p̃^{2K}_{r,t}(y,z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesConstants {
    /// `max(c_first, c_second)`.
    pub c: f64,
    /// Smallest `C` satisfying the majorant with `m = 1` on the probes.
    pub c_first: f64,
    /// Smallest `C` satisfying the majorant with `m = 2` on the probes.
    pub c_second: f64,
    /// `S = sup_r (1 + ‖μ_r‖_θ)` on the window.
    pub s_mu: f64,
    /// `½(1 − d/p − 2/q)`.
    pub delta: f64,
    /// `C S (t − s)^δ` on the fitted window.
    pub ratio: f64,
}

impl SeriesConstants {
    /// Ratio of successive majorant terms on a window of length `tau`.
    pub fn ratio_for(&self, tau: f64) -> f64 {
        self.c * self.s_mu * tau.powf(self.delta)
    }
}

/// Fits [`SeriesConstants`] on the first- and second-order kernels at the
/// quadrature nodes `(r, y)` of the series for `x` and five targets
/// `z = x + j √(K(t − s)) e₁`, `j = −2..2`.
pub fn fit_series_constants(
    ctx: &KernelContext<'_>,
    x: &[f64],
    s: f64,
    t: f64,
    quad: &KernelQuadrature,
) -> Result<SeriesConstants> {
    ctx.check_window(s, t)?;
    quad.validate()?;
    let coeffs = ctx.coeffs();
    let d = coeffs.dim();
    let kc = coeffs.k();
    let delta = coeffs.constants().delta();
    let prep = Prepared::new(quad, d);
    let tau = t - s;
    let s_mu = ctx.sup_growth(s, t);
    let mut nodes = Vec::new();
    for j in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let mut z = x.to_vec();
        z[0] += j * (kc * tau).sqrt();
        for (r, _) in prep.times(s, t) {
            let (v1, v2) = (ctx.covariance(&z, s, r).get(0, 0), ctx.covariance(&z, r, t).get(0, 0));
            for (y, _) in ctx.bridge(&prep, x, &z, v1, v2) {
                nodes.push((r, y, z.clone()));
            }
        }
    }
    let worst = |num: f64, den: f64| -> f64 {
        if den > 0.0 {
            num / den
        } else if num != 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };
    let fitted: Vec<Result<(f64, f64)>> = nodes
        .par_iter()
        .map(|(r, y, z)| {
            let y = &y[..d];
            let k_rt = ctx.kernel(z, *r, t)?;
            let mut h = [0.0; 2];
            ctx.chain(1, *r, y, t, z, &k_rt, &prep, &mut h)?;
            let base = coeffs.envelope(*r, y) * reference_kernel(2.0 * kc, *r, t, y, z) * (t - r).powf(-0.5);
            let first = worst(h[0].abs(), base * s_mu);
            let second = worst(h[1].abs(), base * s_mu * s_mu * (t - r).powf(delta)).sqrt();
            Ok((first, second))
        })
        .collect();
    let (mut c_first, mut c_second) = (0.0f64, 0.0f64);
    for res in fitted {
        let (a, b) = res?;
        c_first = c_first.max(a);
        c_second = c_second.max(b);
    }
    let c = c_first.max(c_second);
    Ok(SeriesConstants {
        c,
        c_first,
        c_second,
        s_mu,
        delta,
        ratio: c * s_mu * tau.powf(delta),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParametrixResult {
    /// Sum of `terms`.
    pub value: f64,
    /// `terms[0]` is the frozen kernel, `terms[m]` the `m`-th convolution.
    pub terms: Vec<f64>,
    /// Geometric majorant of the omitted terms.
    pub tail_estimate: f64,
    pub order: usize,
    pub constants: SeriesConstants,
    /// `tail_estimate > |value|`.
    pub untrusted: bool,
}

/// Truncated parametrix series for `p_{s,t}(x, z)` up to order `order`.
///
/// The zeroth term is `p^z_{s,t}(x, z)`. The inner kernel of each convolution
/// is frozen at its own endpoint. When `constants` is `None` they are fitted
/// around `x`.
#[allow(clippy::too_many_arguments)]
pub fn parametrix_density(
    ctx: &KernelContext<'_>,
    x: &[f64],
    z: &[f64],
    s: f64,
    t: f64,
    order: usize,
    quad: &KernelQuadrature,
    constants: Option<&SeriesConstants>,
) -> Result<ParametrixResult> {
    ctx.check_window(s, t)?;
    quad.validate()?;
    let d = ctx.coeffs().dim();
    if x.len() != d || z.len() != d {
        return Err(invalid("point dimension differs from coefficients"));
    }
    let constants = match constants {
        Some(c) => c.clone(),
        None => fit_series_constants(ctx, x, s, t, quad)?,
    };
    let prep = Prepared::new(quad, d);
    let mut terms = vec![0.0; order + 1];
    terms[0] = ctx.kernel(z, s, t)?.density(x, z);
    let kc = ctx.coeffs().k();

    // Outer nodes (r, y) with their weights, then the chain at each in parallel.
    let mut nodes = Vec::new();
    for (r, wr) in prep.times(s, t) {
        let a1 = ctx.covariance(z, s, r);
        let k_rt = ctx.kernel(z, r, t)?;
        let v1 = a1.trace_product(&SmallMat::identity(d)) / d as f64;
        let v2 = k_rt.a.trace_product(&SmallMat::identity(d)) / d as f64;
        for (y, wy) in ctx.bridge(&prep, x, z, v1, v2) {
            nodes.push((r, wr * wy, y));
        }
    }
    let f_env = ctx.coeffs().envelope_fn();
    let per_node: Vec<Result<(Vec<f64>, f64)>> = nodes
        .par_iter()
        .map(|(r, w, y)| {
            let y = &y[..d];
            let k_sr = ctx.kernel(y, s, *r)?;
            let p = k_sr.density(x, y);
            let k_rt = ctx.kernel(z, *r, t)?;
            let mut g = vec![0.0; order];
            if order > 0 {
                ctx.chain(order - 1, *r, y, t, z, &k_rt, &prep, &mut g)?;
            }
            let j = w * p * f_env(*r, y) * (t - r).powf(-0.5) * reference_kernel(2.0 * kc, *r, t, y, z);
            Ok((g.into_iter().map(|v| w * p * v).collect(), j))
        })
        .collect();
    let mut j_total = 0.0;
    for res in per_node {
        let (g, j) = res?;
        for (m, v) in g.iter().enumerate() {
            terms[m + 1] += v;
        }
        j_total += j;
    }
    let value: f64 = terms.iter().sum();
    let tail_estimate = tail(&constants, j_total, t - s, order);
    Ok(ParametrixResult {
        value,
        terms,
        tail_estimate,
        order,
        untrusted: tail_estimate > value.abs(),
        constants,
    })
}

/// `Σ_{m > order} J (C S)^m τ^{δ(m−1)}`, where `J` is the series integral of
/// `f_r(y) (t − r)^{−1/2} p̃^{2K}_{r,t}(y, z)` against `p_{s,r}(x, y)`.
fn tail(c: &SeriesConstants, j: f64, tau: f64, order: usize) -> f64 {
    let cs = c.c * c.s_mu;
    if cs.is_infinite() {
        return f64::INFINITY;
    }
    if cs == 0.0 || j == 0.0 {
        return 0.0;
    }
    let rho = c.ratio_for(tau);
    if rho >= 1.0 {
        return f64::INFINITY;
    }
    j * cs * rho.powi(order as i32) / (1.0 - rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::presets::{build_preset, PresetOverrides};
    use crate::coefficients::Constants;
    use crate::measures::EmpiricalMeasure;

    fn dirac_flow(d: usize, t: f64, n: usize) -> MeasureFlow {
        let times = (0..=n).map(|k| t * k as f64 / n as f64).collect();
        MeasureFlow::constant(times, &EmpiricalMeasure::dirac(&vec![0.0; d])).unwrap()
    }

    fn normal(mean: f64, var: f64, z: f64) -> f64 {
        (-(z - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }

    #[test]
    fn time_dependent_covariance_integral() {
        let base = build_preset("brownian", &PresetOverrides::default()).unwrap();
        let c = CoefficientSet::new(
            "ramp",
            Constants {
                k: 5.0,
                ..base.constants().clone()
            },
        )
        .unwrap()
        .with_diffusion(|t, _, _, out| out[0] = 1.0 + t)
        .with_state_independent_diffusion(true);
        let flow = dirac_flow(1, 1.0, 4);
        let ctx = KernelContext::new(&c, &flow, &flow).unwrap().with_covariance_panels(64);
        let a = ctx.covariance(&[0.0], 0.0, 1.0);
        assert!((a.get(0, 0) - 7.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn band_violation_detected() {
        let c = build_preset("brownian", &PresetOverrides::default())
            .unwrap()
            .with_diffusion(|_, _, _, out| out[0] = 3.0);
        let flow = dirac_flow(1, 1.0, 2);
        let ctx = KernelContext::new(&c, &flow, &flow).unwrap();
        assert!(matches!(
            ctx.kernel(&[0.0], 0.0, 1.0),
            Err(Error::DiffusionBandViolation { .. })
        ));
    }

    #[test]
    fn unit_drift_h_closed_form() {
        let c = build_preset(
            "constant_drift",
            &PresetOverrides {
                drift_scale: Some(1.0),
                ..Default::default()
            },
        )
        .unwrap();
        let flow = dirac_flow(1, 1.0, 2);
        let ctx = KernelContext::new(&c, &flow, &flow).unwrap();
        let (r, t, y, z) = (0.2, 0.7, 0.1, 0.6);
        let h = ctx.h_kernel(r, t, &[y], &[z]).unwrap();
        let expect = (z - y) / (t - r) * normal(y, t - r, z);
        assert!((h - expect).abs() < 1e-14 * expect.abs().max(1.0));
    }

    #[test]
    fn zero_drift_series_is_frozen_kernel() {
        let c = build_preset("brownian", &PresetOverrides { dim: Some(2), ..Default::default() }).unwrap();
        let flow = dirac_flow(2, 1.0, 4);
        let ctx = KernelContext::new(&c, &flow, &flow).unwrap();
        let quad = KernelQuadrature {
            time_nodes: 6,
            ..Default::default()
        };
        for order in 0..=2 {
            let res = parametrix_density(&ctx, &[0.1, -0.2], &[0.5, 0.3], 0.0, 0.6, order, &quad, None).unwrap();
            let exact = ctx.kernel(&[0.5, 0.3], 0.0, 0.6).unwrap().density(&[0.1, -0.2], &[0.5, 0.3]);
            assert_eq!(res.value, exact);
            assert!(res.terms[1..].iter().all(|&v| v == 0.0));
            assert_eq!(res.tail_estimate, 0.0);
        }
    }

    #[test]
    fn constant_drift_third_order_matches_shifted_gaussian() {
        let c = build_preset("constant_drift", &PresetOverrides::default()).unwrap();
        let flow = dirac_flow(1, 1.0, 2);
        let ctx = KernelContext::new(&c, &flow, &flow).unwrap();
        let quad = KernelQuadrature::default();
        for tau in [0.1, 0.5] {
            let mean = 0.2 * tau;
            for j in [-2.0, 0.0, 2.0] {
                let z = mean + j * f64::sqrt(tau);
                let res = parametrix_density(&ctx, &[0.0], &[z], 0.0, tau, 3, &quad, None).unwrap();
                let exact = normal(mean, tau, z);
                assert!(
                    (res.value - exact).abs() < 1e-3 * exact,
                    "tau {tau} z {z}: {} vs {exact}",
                    res.value
                );
                assert!((res.value - res.terms.iter().sum::<f64>()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn second_iterate_constant_drift_closed_form() {
        // H_{r,t}(y, ·) = −b ∂_w p_{t−r}(w) with w = z − y, so H² = b² (t − r) ∂²_w p_{t−r}.
        let c = build_preset("constant_drift", &PresetOverrides::default()).unwrap();
        let flow = dirac_flow(1, 1.0, 2);
        let ctx = KernelContext::new(&c, &flow, &flow).unwrap();
        let (r, t, y, z) = (0.0, 0.5, 0.0, 0.3);
        let got = ctx.h_kernel_iterated(2, r, t, &[y], &[z], &KernelQuadrature::default()).unwrap();
        let (tau, w) = (t - r, z - y);
        let exact = 0.04 * tau * normal(0.0, tau, w) * (w * w / (tau * tau) - 1.0 / tau);
        assert!((got - exact).abs() < 1e-6 * exact.abs(), "{got} vs {exact}");
    }

    #[test]
    fn bounds_on_identical_flows() {
        let c = build_preset("bump_drift_mu_dependent", &PresetOverrides::default()).unwrap();
        let flow = dirac_flow(1, 1.0, 4);
        let ctx = KernelContext::new(&c, &flow, &flow).unwrap();
        let probes = BoundProbe::sample(1, 6, 0.0, 1.0, 1.5, 3);
        let rep = verify_bounds(&ctx, &ctx, &probes, None, &BoundBudget::default(), &KernelQuadrature::default()).unwrap();
        assert_eq!(rep.get("kernel_difference").unwrap().worst_constant, 0.0);
        assert_eq!(rep.get("kernel_derivative_difference").unwrap().worst_constant, 0.0);
        assert!(rep.pass(), "{rep:?}");
    }
}
