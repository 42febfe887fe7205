use super::CoefficientSet;
use crate::error::{Error, Result};
use crate::linalg::{outer_self, spectral_norm, sym_eigen_range};
use crate::measures::{norm, wasserstein, weighted_tv, EmpiricalMeasure};
use crate::rng::{SeqRng, Stream};
use serde::{Deserialize, Serialize};

/// Absolute slack allowed on every clause.
pub const CLAUSE_SLACK: f64 = 1e-9;

/// Seeded recipe for probe tuples `(t, x, y, μ, ν)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplePlan {
    pub seed: u64,
    pub n_probes: usize,
    /// Points are drawn from `[-radius, radius]^d`.
    pub radius: f64,
    /// Atoms per probe measure.
    pub atoms: usize,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        Self {
            seed: 1,
            n_probes: 200,
            radius: 3.0,
            atoms: 8,
            t_min: 0.0,
            t_max: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub mu: EmpiricalMeasure,
    pub nu: EmpiricalMeasure,
}

impl SamplePlan {
    pub fn probes(&self, dim: usize) -> Vec<Probe> {
        (0..self.n_probes)
            .map(|i| {
                let mut rng = SeqRng::new(self.seed, Stream::Probe, i as u64);
                let r = self.radius;
                let t = rng.uniform_in(self.t_min, self.t_max);
                let x: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-r, r)).collect();
                let y: Vec<f64> = if rng.uniform() < 0.5 {
                    let h = 10f64.powf(rng.uniform_in(-4.0, 0.0));
                    x.iter().map(|v| v + h * rng.normal()).collect()
                } else {
                    (0..dim).map(|_| rng.uniform_in(-r, r)).collect()
                };
                let n = self.atoms.max(1);
                let cloud = |rng: &mut SeqRng| -> Vec<f64> {
                    let c: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-0.5 * r, 0.5 * r)).collect();
                    let s = rng.uniform_in(0.2, 2.0);
                    (0..n * dim).map(|k| c[k % dim] + s * rng.normal()).collect()
                };
                let mu_atoms = cloud(&mut rng);
                let mu = EmpiricalMeasure::uniform(dim, mu_atoms.clone()).expect("valid cloud");
                let nu = if rng.uniform() < 0.5 {
                    let raw: Vec<f64> = (0..n).map(|_| 1.0 + 0.5 * rng.uniform()).collect();
                    let total: f64 = raw.iter().sum();
                    let mut w: Vec<f64> = raw.iter().map(|v| v / total).collect();
                    let head: f64 = w[..n - 1].iter().sum();
                    w[n - 1] = 1.0 - head;
                    EmpiricalMeasure::new(dim, mu_atoms, w).expect("valid reweighting")
                } else {
                    EmpiricalMeasure::uniform(dim, cloud(&mut rng)).expect("valid cloud")
                };
                Probe { t, x, y, mu, nu }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClauseCheck {
    pub name: String,
    pub ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

impl ClauseCheck {
    fn new(name: &str, ratio: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            ratio,
            bound,
            pass: ratio <= bound + CLAUSE_SLACK,
        }
    }
}

/// Worst probe ratios of the (A1)/(A2) clauses. Fields not covered by the
/// producing check are zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub probes: usize,
    pub max_sigma_norm_sq: f64,
    pub max_inv_norm: f64,
    pub lipschitz_x_ratio: f64,
    pub lipschitz_measure_ratio: f64,
    pub joint_lipschitz_ratio: f64,
    pub mixed_ratio: f64,
    pub drift_envelope_ratio: f64,
    pub drift_tv_lipschitz_ratio: f64,
    /// `|b| / ((1 + ‖μ‖_θ)(K|x| + f))`, the relaxed growth form; reported only.
    pub relaxed_growth_ratio: f64,
    pub clauses: Vec<ClauseCheck>,
}

impl AssumptionReport {
    pub fn pass(&self) -> bool {
        self.clauses.iter().all(|c| c.pass)
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den > 0.0 {
        Some(num / den)
    } else if num > 1e-14 {
        Some(f64::INFINITY)
    } else {
        None
    }
}

fn diff_norm(a: &[f64], b: &[f64], rows: usize, cols: usize) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    spectral_norm(&d, rows, cols)
}

/// Probe-based check of (A1) on plan-generated probes.
pub fn verify_a1(coeffs: &CoefficientSet, plan: &SamplePlan) -> Result<AssumptionReport> {
    verify_a1_probes(coeffs, &plan.probes(coeffs.dim()))
}

pub fn verify_a1_probes(coeffs: &CoefficientSet, probes: &[Probe]) -> Result<AssumptionReport> {
    let (d, m) = (coeffs.dim(), coeffs.brownian_dim());
    let theta = coeffs.theta();
    let mut rep = AssumptionReport {
        probes: probes.len(),
        ..Default::default()
    };
    let mut s_xm = vec![0.0; d * m];
    let mut s_yn = vec![0.0; d * m];
    let mut s_ym = vec![0.0; d * m];
    let mut s_xn = vec![0.0; d * m];
    let mut cov = vec![0.0; d * d];
    for (idx, pr) in probes.iter().enumerate() {
        let (lm, ln) = (coeffs.law_view(&pr.mu), coeffs.law_view(&pr.nu));
        coeffs.diffusion(pr.t, &pr.x, &lm, &mut s_xm);
        coeffs.diffusion(pr.t, &pr.y, &ln, &mut s_yn);
        coeffs.diffusion(pr.t, &pr.y, &lm, &mut s_ym);
        coeffs.diffusion(pr.t, &pr.x, &ln, &mut s_xn);
        for s in [&s_xm, &s_yn] {
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::DegenerateDiffusion { probe: idx });
            }
            let n = spectral_norm(s, d, m);
            rep.max_sigma_norm_sq = rep.max_sigma_norm_sq.max(n * n);
            outer_self(s, d, m, &mut cov);
            let (lo, hi) = sym_eigen_range(&cov, d);
            if !(lo > 1e-14 * hi.max(1e-300)) {
                return Err(Error::DegenerateDiffusion { probe: idx });
            }
            rep.max_inv_norm = rep.max_inv_norm.max(1.0 / lo);
        }
        let dx: Vec<f64> = pr.x.iter().zip(&pr.y).map(|(a, b)| a - b).collect();
        let dist = norm(&dx);
        let w = wasserstein(&pr.mu, &pr.nu, theta)?;
        if let Some(r) = ratio(diff_norm(&s_xm, &s_ym, d, m), dist) {
            rep.lipschitz_x_ratio = rep.lipschitz_x_ratio.max(r);
        }
        if let Some(r) = ratio(diff_norm(&s_xm, &s_xn, d, m), w) {
            rep.lipschitz_measure_ratio = rep.lipschitz_measure_ratio.max(r);
        }
        if let Some(r) = ratio(diff_norm(&s_xm, &s_yn, d, m), dist + w) {
            rep.joint_lipschitz_ratio = rep.joint_lipschitz_ratio.max(r);
        }
        let mixed: Vec<f64> = (0..d * m)
            .map(|k| (s_xm[k] - s_ym[k]) - (s_xn[k] - s_yn[k]))
            .collect();
        if let Some(r) = ratio(spectral_norm(&mixed, d, m), dist * w) {
            rep.mixed_ratio = rep.mixed_ratio.max(r);
        }
    }
    let k = coeffs.k();
    rep.clauses = vec![
        ClauseCheck::new("sigma_norm_sq", rep.max_sigma_norm_sq, k),
        ClauseCheck::new("inverse_covariance_norm", rep.max_inv_norm, k),
        ClauseCheck::new("joint_lipschitz", rep.joint_lipschitz_ratio, k),
        ClauseCheck::new("lipschitz_x", rep.lipschitz_x_ratio, k),
        ClauseCheck::new("lipschitz_measure", rep.lipschitz_measure_ratio, k),
        ClauseCheck::new("mixed_difference", rep.mixed_ratio, k),
    ];
    Ok(rep)
}

/// Probe-based check of (A2) on plan-generated probes.
pub fn verify_a2(coeffs: &CoefficientSet, plan: &SamplePlan) -> Result<AssumptionReport> {
    verify_a2_probes(coeffs, &plan.probes(coeffs.dim()))
}

pub fn verify_a2_probes(coeffs: &CoefficientSet, probes: &[Probe]) -> Result<AssumptionReport> {
    let d = coeffs.dim();
    let theta = coeffs.theta();
    let k = coeffs.k();
    let mut rep = AssumptionReport {
        probes: probes.len(),
        ..Default::default()
    };
    let mut b_mu = vec![0.0; d];
    let mut b_nu = vec![0.0; d];
    for (idx, pr) in probes.iter().enumerate() {
        let (lm, ln) = (coeffs.law_view(&pr.mu), coeffs.law_view(&pr.nu));
        for (pt, law, other) in [(&pr.x, &lm, &ln), (&pr.y, &ln, &lm)] {
            coeffs.drift(pr.t, pt, law, &mut b_mu);
            coeffs.drift(pr.t, pt, other, &mut b_nu);
            let f = coeffs.envelope(pr.t, pt);
            let bn = norm(&b_mu);
            if !bn.is_finite() {
                return Err(Error::EnvelopeViolation { probe: idx, drift_norm: bn });
            }
            if f == 0.0 && bn > 0.0 {
                return Err(Error::EnvelopeViolation { probe: idx, drift_norm: bn });
            }
            let growth = 1.0 + law.theta_moment();
            if let Some(r) = ratio(bn, growth * f) {
                rep.drift_envelope_ratio = rep.drift_envelope_ratio.max(r);
            }
            if let Some(r) = ratio(bn, growth * (k * norm(pt) + f)) {
                rep.relaxed_growth_ratio = rep.relaxed_growth_ratio.max(r);
            }
            let diff: Vec<f64> = b_mu.iter().zip(&b_nu).map(|(a, b)| a - b).collect();
            let dn = norm(&diff);
            if f == 0.0 && dn > 0.0 {
                return Err(Error::EnvelopeViolation { probe: idx, drift_norm: dn });
            }
            let wtv = weighted_tv(&pr.mu, &pr.nu, theta)?;
            if let Some(r) = ratio(dn, f * wtv) {
                rep.drift_tv_lipschitz_ratio = rep.drift_tv_lipschitz_ratio.max(r);
            }
        }
    }
    rep.clauses = vec![
        ClauseCheck::new("drift_growth", rep.drift_envelope_ratio, 1.0),
        ClauseCheck::new("drift_tv_lipschitz", rep.drift_tv_lipschitz_ratio, 1.0),
    ];
    Ok(rep)
}
