use super::{reference_kernel, KernelContext, KernelQuadrature, Prepared};
use crate::coefficients::{tilde_lpq_norm, BallQuadrature};
use crate::error::{invalid, Result};
use crate::linalg::spectral_norm;
use crate::measures::{flow_distances, FlowMetric, MeasureFlow};
use crate::rng::{SeqRng, Stream};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A `(x, y, z, s, t)` tuple at which the kernel inequalities are evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundProbe {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub s: f64,
    pub t: f64,
}

impl BoundProbe {
    /// `n` seeded probes with `s0 ≤ s < t ≤ t_max` and points in `[-radius, radius]^d`.
    pub fn sample(dim: usize, n: usize, s0: f64, t_max: f64, radius: f64, seed: u64) -> Vec<Self> {
        (0..n)
            .map(|i| {
                let mut rng = SeqRng::new(seed, Stream::Probe, i as u64);
                let a = rng.uniform_in(s0, t_max);
                let b = rng.uniform_in(s0, t_max);
                let (s, t) = if a < b { (a, b) } else { (b, a) };
                let t = t.max(s + 1e-3 * (t_max - s0));
                let mut pt = || (0..dim).map(|_| rng.uniform_in(-radius, radius)).collect::<Vec<_>>();
                let (x, y, z) = (pt(), pt(), pt());
                Self { x, y, z, s, t }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    /// Smallest constant making the inequality hold on every probe.
    pub worst_constant: f64,
    pub budget: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub checks: Vec<BoundCheck>,
}

impl BoundReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Budgets for the fitted constants, by check name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundBudget {
    pub default: f64,
    pub per_check: BTreeMap<String, f64>,
}

impl Default for BoundBudget {
    fn default() -> Self {
        Self {
            default: 100.0,
            per_check: BTreeMap::new(),
        }
    }
}

impl BoundBudget {
    fn of(&self, name: &str) -> f64 {
        self.per_check.get(name).copied().unwrap_or(self.default)
    }
}

pub const CHECK_NAMES: [&str; 8] = [
    "gaussian_domination",
    "kernel_derivatives",
    "kernel_difference",
    "kernel_derivative_difference",
    "convolution",
    "iterated_kernel_m1",
    "iterated_kernel_m2",
    "iterated_kernel_difference_m1",
];

#[derive(Default)]
struct Worst(f64);

impl Worst {
    fn push(&mut self, num: f64, den: f64) {
        if den > 0.0 {
            self.0 = self.0.max(num / den);
        } else if num > 1e-300 {
            self.0 = f64::INFINITY;
        }
    }
}

/// Test function `g(t, x)` of the convolution inequality.
pub type TestFunction<'a> = &'a (dyn Fn(f64, &[f64]) -> f64 + Sync);

/// `sup` of per-time distances over grid times in `[s, t]` (left-nearest at `s`).
fn window_sup(flow: &MeasureFlow, per_time: &[f64], s: f64, t: f64) -> f64 {
    let first = flow.index_at(s);
    let last = flow.index_at(t);
    per_time[first..=last].iter().copied().fold(0.0, f64::max)
}

/// Worst constants of the Gaussian-kernel and iterated-kernel inequalities on
/// `probes`, for the flow pair carried by `ctx_mu` and `ctx_nu`.
///
/// `g` is the test function of the convolution inequality; `None` uses the
/// envelope `f`.
pub fn verify_bounds(
    ctx_mu: &KernelContext<'_>,
    ctx_nu: &KernelContext<'_>,
    probes: &[BoundProbe],
    g: Option<TestFunction<'_>>,
    budget: &BoundBudget,
    quad: &KernelQuadrature,
) -> Result<BoundReport> {
    let coeffs = ctx_mu.coeffs();
    let d = coeffs.dim();
    if ctx_nu.coeffs().dim() != d {
        return Err(invalid("contexts disagree on dimension"));
    }
    let theta = coeffs.theta();
    let kc = coeffs.k();
    let delta = coeffs.constants().delta();
    let (p_exp, q_exp) = (coeffs.constants().p, coeffs.constants().q);
    let same = std::ptr::eq(ctx_mu.phi_flow(), ctx_nu.phi_flow()) && std::ptr::eq(ctx_mu.mu_flow(), ctx_nu.mu_flow());
    let (w_phi, tv_mu) = if same {
        let n = ctx_mu.phi_flow().len();
        (vec![0.0; n], vec![0.0; ctx_mu.mu_flow().len()])
    } else {
        (
            flow_distances(ctx_mu.phi_flow(), ctx_nu.phi_flow(), theta, FlowMetric::Wasserstein)?,
            flow_distances(ctx_mu.mu_flow(), ctx_nu.mu_flow(), theta, FlowMetric::WeightedTv)?,
        )
    };
    let envelope = coeffs.envelope_fn();
    let g: TestFunction<'_> = match g {
        Some(g) => g,
        None => envelope,
    };
    let prep = Prepared::new(quad, d);
    let mut worst: Vec<Worst> = CHECK_NAMES.iter().map(|_| Worst::default()).collect();

    for pr in probes {
        let (s, t) = (pr.s, pr.t);
        let tau = t - s;
        let km = ctx_mu.kernel(&pr.z, s, t)?;
        let kn = ctx_nu.kernel(&pr.z, s, t)?;
        let dist2: f64 = pr.x.iter().zip(&pr.y).map(|(a, b)| (a - b) * (a - b)).sum();
        let ref_k = reference_kernel(kc, s, t, &pr.x, &pr.y);
        let (pm, gm, hm) = km.eval(&pr.x, &pr.y);
        let (pn, gn, hn) = kn.eval(&pr.x, &pr.y);
        worst[0].push(pm * (1.0 + dist2 * dist2 / (tau * tau)), ref_k);
        let gnorm = |g: &[f64]| g[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
        let lhs1 = tau.sqrt() * gnorm(&gm) + tau * spectral_norm(&hm.to_rows(), d, d);
        worst[1].push(lhs1, ref_k);

        let w = window_sup(ctx_mu.phi_flow(), &w_phi, s, t);
        worst[2].push((1.0 + dist2 / tau) * (pm - pn).abs(), ref_k * w);
        let dg: Vec<f64> = (0..d).map(|i| gm[i] - gn[i]).collect();
        let lhs2 = tau.sqrt() * gnorm(&dg) + tau * spectral_norm(&hm.sub(&hn).to_rows(), d, d);
        worst[3].push(lhs2, ref_k * w);

        let mut conv = 0.0;
        for (r, wr) in prep.times(s, t) {
            let (v1, v2) = (2.0 * kc * (r - s), 4.0 * kc * (t - r));
            for (yp, wy) in ctx_mu.bridge(&prep, &pr.x, &pr.y, v1, v2) {
                let yp = &yp[..d];
                conv += wr
                    * wy
                    * reference_kernel(kc, s, r, &pr.x, yp)
                    * (r - s).powf(-0.5)
                    * g(r, yp)
                    * (t - r).powf(-0.5)
                    * reference_kernel(2.0 * kc, r, t, yp, &pr.y);
            }
        }
        let mid: Vec<f64> = pr.x.iter().zip(&pr.y).map(|(a, b)| 0.5 * (a + b)).collect();
        let mut centers = vec![pr.x.clone(), pr.y.clone(), mid];
        centers.extend(coeffs.singular_points().iter().cloned());
        let g_norm = tilde_lpq_norm(
            &g,
            d,
            p_exp,
            q_exp,
            s,
            t,
            &centers,
            &BallQuadrature::default(),
            coeffs.singular_points(),
        )?
        .value;
        worst[4].push(
            conv,
            tau.powf(-0.5 + delta) * reference_kernel(2.0 * kc, s, t, &pr.x, &pr.y) * g_norm,
        );

        let s_mu = ctx_mu.sup_growth(s, t);
        let s_munu = s_mu.max(ctx_nu.sup_growth(s, t));
        let f_y = envelope(s, &pr.y);
        let ref2 = reference_kernel(2.0 * kc, s, t, &pr.y, &pr.z);
        for m in 1..=2usize {
            let h = ctx_mu.h_kernel_iterated_at(m, s, t, &pr.y, &pr.z, quad)?;
            let den = f_y * s_mu.powi(m as i32) * tau.powf(-0.5 + delta * (m - 1) as f64) * ref2;
            let mut wm = Worst::default();
            wm.push(h.abs(), den);
            let c = wm.0.powf(1.0 / m as f64);
            worst[4 + m].0 = worst[4 + m].0.max(c);
        }
        let h_mu = ctx_mu.h_kernel(s, t, &pr.y, &pr.z)?;
        let h_nu = ctx_nu.h_kernel(s, t, &pr.y, &pr.z)?;
        let big_l = w + window_sup(ctx_mu.mu_flow(), &tv_mu, s, t);
        worst[7].push((h_mu - h_nu).abs(), f_y * s_munu * tau.powf(-0.5) * ref2 * big_l);
    }

    let checks = CHECK_NAMES
        .iter()
        .zip(worst)
        .map(|(name, w)| {
            let b = budget.of(name);
            BoundCheck {
                name: name.to_string(),
                worst_constant: w.0,
                budget: b,
                pass: w.0 <= b,
            }
        })
        .collect();
    Ok(BoundReport { checks })
}
