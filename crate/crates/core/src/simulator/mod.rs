//! Euler–Maruyama particle schemes for the frozen SDE and the mean-field
//! system, the map Φ on measure flows, the segmented Picard driver, and moment
//! diagnostics.
//!
//! All Brownian increments come from [`CounterRng`] keyed by
//! `(seed, particle, global step)`, so ensembles are bitwise reproducible for
//! any worker count and Picard iterates share their noise.

mod diagnostics;
pub mod io;
mod picard;

pub use diagnostics::{
    estimate_invariance_n, invariant_class_check, minimal_invariant_n, moment_report, MomentReport,
};
pub use picard::{picard_solve, PicardOptions, PicardResult, SegmentReport};

use crate::coefficients::{CoefficientSet, LawView};
use crate::error::{invalid, Error, Result};
use crate::measures::{deposit_cic, EmpiricalMeasure, MeasureFlow};
use crate::rng::{CounterRng, Stream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    EulerMaruyama,
}

/// Default multiplier `c` in the drift cap `|b|Δt ≤ c √(KΔt)`.
pub const DEFAULT_DRIFT_CAP: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationPlan {
    pub n_particles: usize,
    pub time_grid: Vec<f64>,
    pub seed: u64,
    pub scheme: Scheme,
    /// Keep every `record_stride`-th grid time; the first and last are always kept.
    pub record_stride: usize,
    /// Multiplier of the drift cap; `None` disables capping.
    pub drift_cap: Option<f64>,
}

impl SimulationPlan {
    pub fn new(n_particles: usize, time_grid: Vec<f64>, seed: u64) -> Result<Self> {
        let plan = Self {
            n_particles,
            time_grid,
            seed,
            scheme: Scheme::EulerMaruyama,
            record_stride: 1,
            drift_cap: Some(DEFAULT_DRIFT_CAP),
        };
        plan.validate()?;
        Ok(plan)
    }

    /// `steps` equal steps on `[s, t]`.
    pub fn uniform(n_particles: usize, s: f64, t: f64, steps: usize, seed: u64) -> Result<Self> {
        if steps == 0 || !(t > s) {
            return Err(invalid("need at least one step on a non-empty interval"));
        }
        let h = (t - s) / steps as f64;
        let mut grid: Vec<f64> = (0..=steps).map(|k| s + h * k as f64).collect();
        grid[steps] = t;
        Self::new(n_particles, grid, seed)
    }

    pub fn with_record_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride.max(1);
        self
    }

    pub fn with_drift_cap(mut self, cap: Option<f64>) -> Self {
        self.drift_cap = cap;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(invalid("n_particles must be positive"));
        }
        if self.time_grid.len() < 2 {
            return Err(invalid("time grid needs at least two points"));
        }
        if self.time_grid.iter().any(|t| !t.is_finite())
            || self.time_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(invalid("time grid must be finite and strictly increasing"));
        }
        if self.time_grid.len() - 1 > u32::MAX as usize {
            return Err(invalid("too many steps for the counter layout"));
        }
        if let Some(c) = self.drift_cap {
            if !(c > 0.0) {
                return Err(invalid("drift cap must be positive"));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.time_grid.len() - 1
    }

    pub fn recorded_indices(&self) -> Vec<usize> {
        let last = self.steps();
        let mut idx: Vec<usize> = (0..=last).step_by(self.record_stride.max(1)).collect();
        if *idx.last().unwrap() != last {
            idx.push(last);
        }
        idx
    }
}

/// Particle paths at the recorded grid times, stored particle × time × dim.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    pub dim: usize,
    pub n_particles: usize,
    pub times: Vec<f64>,
    pub paths: Vec<f64>,
    pub plan: SimulationPlan,
    /// Number of particle-steps at which the drift cap was active.
    pub cap_activations: u64,
}

impl ParticleEnsemble {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn position(&self, particle: usize, k: usize) -> &[f64] {
        let o = (particle * self.times.len() + k) * self.dim;
        &self.paths[o..o + self.dim]
    }

    /// Positions of all particles at recorded time `k`, particle-major.
    pub fn positions_at(&self, k: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_particles * self.dim);
        for p in 0..self.n_particles {
            out.extend_from_slice(self.position(p, k));
        }
        out
    }

    pub fn terminal_positions(&self) -> Vec<f64> {
        self.positions_at(self.times.len() - 1)
    }

    pub fn law_at(&self, k: usize) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(self.dim, self.positions_at(k)).expect("finite ensemble")
    }

    /// Empirical laws at the recorded times, optionally projected onto `h·Z^d`.
    pub fn law_flow(&self, lattice: Option<f64>) -> Result<MeasureFlow> {
        let measures = (0..self.times.len())
            .map(|k| {
                let law = self.law_at(k);
                match lattice {
                    Some(h) => deposit_cic(&law, h),
                    None => Ok(law),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        MeasureFlow::new(self.times.clone(), measures)
    }
}

/// Draws `n` i.i.d. initial points from `gamma` on the `Initial` stream.
pub fn sample_initial(gamma: &EmpiricalMeasure, n: usize, seed: u64) -> Vec<f64> {
    let d = gamma.dim();
    if gamma.len() == 1 {
        return gamma.atom(0).repeat(n);
    }
    let mut cdf = Vec::with_capacity(gamma.len());
    let mut acc = 0.0;
    for &w in gamma.weights() {
        acc += w;
        cdf.push(acc);
    }
    let rng = CounterRng::new(seed);
    let mut out = Vec::with_capacity(n * d);
    for i in 0..n {
        let u = rng.uniforms(Stream::Initial, i as u64, 0, 0)[0] * acc;
        let k = cdf.partition_point(|&c| c <= u).min(gamma.len() - 1);
        out.extend_from_slice(gamma.atom(k));
    }
    out
}

pub(crate) enum DriftLaw<'a> {
    Flow(&'a MeasureFlow),
    Ensemble,
}

/// Core Euler–Maruyama loop. `step_offset` shifts the RNG step counter so a
/// segment of a longer grid reuses that grid's increments.
pub(crate) fn run_scheme(
    coeffs: &CoefficientSet,
    plan: &SimulationPlan,
    initial: Vec<f64>,
    drift_law: DriftLaw<'_>,
    step_offset: usize,
) -> Result<ParticleEnsemble> {
    plan.validate()?;
    let (d, m) = (coeffs.dim(), coeffs.brownian_dim());
    let n = plan.n_particles;
    if initial.len() != n * d {
        return Err(invalid("initial positions do not match n_particles × dim"));
    }
    let flow_views: Vec<LawView<'_>> = match &drift_law {
        DriftLaw::Flow(f) => {
            if f.dim() != d {
                return Err(Error::IncompatibleFlows("flow dimension differs from coefficients".into()));
            }
            if f.times()[0] > plan.time_grid[0] + 1e-12 * plan.time_grid[0].abs().max(1.0) {
                return Err(Error::IncompatibleFlows(format!(
                    "flow starts at {} after the plan start {}",
                    f.times()[0],
                    plan.time_grid[0]
                )));
            }
            f.measures().iter().map(|mu| coeffs.law_view(mu)).collect()
        }
        DriftLaw::Ensemble => Vec::new(),
    };

    let recorded = plan.recorded_indices();
    let n_rec = recorded.len();
    let mut paths = vec![0.0; n * n_rec * d];
    let record = |paths: &mut [f64], pos: &[f64], slot: usize| {
        for p in 0..n {
            let o = (p * n_rec + slot) * d;
            paths[o..o + d].copy_from_slice(&pos[p * d..(p + 1) * d]);
        }
    };
    let mut cur = initial;
    let mut next = vec![0.0; n * d];
    record(&mut paths, &cur, 0);
    let mut slot = 1;

    let rng = CounterRng::new(plan.seed);
    let k_const = coeffs.k();
    let mut cap_total = 0u64;
    for step in 0..plan.steps() {
        let t = plan.time_grid[step];
        let dt = plan.time_grid[step + 1] - t;
        let sqdt = dt.sqrt();
        let cap = plan.drift_cap.map(|c| c * (k_const * dt).sqrt());
        let ens_view = coeffs.view(&cur, None);
        let drift_view = match &drift_law {
            DriftLaw::Flow(f) => &flow_views[f.index_at(t)],
            DriftLaw::Ensemble => &ens_view,
        };
        let bad = AtomicUsize::new(usize::MAX);
        let capped = AtomicU64::new(0);
        let global_step = (step_offset + step) as u32;
        let cur_ref = &cur;
        next.par_chunks_mut(d).enumerate().for_each_init(
            || (vec![0.0; d], vec![0.0; d * m], vec![0.0; m]),
            |(b, sig, z), (i, out)| {
                let x = &cur_ref[i * d..(i + 1) * d];
                coeffs.drift(t, x, drift_view, b);
                coeffs.diffusion(t, x, &ens_view, sig);
                if b.iter().chain(sig.iter()).any(|v| !v.is_finite()) {
                    bad.fetch_min(i, Ordering::Relaxed);
                    out.fill(f64::NAN);
                    return;
                }
                if let Some(c) = cap {
                    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if bn * dt > c {
                        let s = c / (bn * dt);
                        b.iter_mut().for_each(|v| *v *= s);
                        capped.fetch_add(1, Ordering::Relaxed);
                    }
                }
                rng.normals(Stream::Brownian, i as u64, global_step, z);
                for j in 0..d {
                    let mut noise = 0.0;
                    for k in 0..m {
                        noise += sig[j * m + k] * z[k];
                    }
                    out[j] = x[j] + b[j] * dt + sqdt * noise;
                }
                if out.iter().any(|v| !v.is_finite()) {
                    bad.fetch_min(i, Ordering::Relaxed);
                }
            },
        );
        let first_bad = bad.into_inner();
        if first_bad != usize::MAX {
            return Err(Error::SimulationDiverged {
                step: step_offset + step,
                particle: first_bad,
            });
        }
        cap_total += capped.into_inner();
        std::mem::swap(&mut cur, &mut next);
        if slot < n_rec && recorded[slot] == step + 1 {
            record(&mut paths, &cur, slot);
            slot += 1;
        }
    }
    Ok(ParticleEnsemble {
        dim: d,
        n_particles: n,
        times: recorded.iter().map(|&k| plan.time_grid[k]).collect(),
        paths,
        plan: plan.clone(),
        cap_activations: cap_total,
    })
}

fn check_gamma(coeffs: &CoefficientSet, gamma: &EmpiricalMeasure) -> Result<()> {
    if gamma.dim() != coeffs.dim() {
        return Err(invalid(format!(
            "initial law has dimension {}, coefficients {}",
            gamma.dim(),
            coeffs.dim()
        )));
    }
    Ok(())
}

/// Frozen SDE: the drift sees `mu_flow` (left-nearest in time), the diffusion
/// sees the ensemble's own empirical law.
pub fn simulate_frozen(
    coeffs: &CoefficientSet,
    mu_flow: &MeasureFlow,
    gamma: &EmpiricalMeasure,
    plan: &SimulationPlan,
) -> Result<ParticleEnsemble> {
    check_gamma(coeffs, gamma)?;
    plan.validate()?;
    let init = sample_initial(gamma, plan.n_particles, plan.seed);
    run_scheme(coeffs, plan, init, DriftLaw::Flow(mu_flow), 0)
}

/// Interacting particle system: both coefficients see the live empirical law.
pub fn simulate_mckean_vlasov(
    coeffs: &CoefficientSet,
    gamma: &EmpiricalMeasure,
    plan: &SimulationPlan,
) -> Result<ParticleEnsemble> {
    check_gamma(coeffs, gamma)?;
    plan.validate()?;
    let init = sample_initial(gamma, plan.n_particles, plan.seed);
    run_scheme(coeffs, plan, init, DriftLaw::Ensemble, 0)
}

/// `Φ^γ(μ)`: the empirical law flow of the frozen SDE on every plan grid time.
pub fn phi_map(
    coeffs: &CoefficientSet,
    gamma: &EmpiricalMeasure,
    mu_flow: &MeasureFlow,
    plan: &SimulationPlan,
) -> Result<MeasureFlow> {
    phi_map_on_lattice(coeffs, gamma, mu_flow, plan, None)
}

/// `Φ^γ(μ)` with each law projected onto the lattice `h·Z^d` when `lattice = Some(h)`.
pub fn phi_map_on_lattice(
    coeffs: &CoefficientSet,
    gamma: &EmpiricalMeasure,
    mu_flow: &MeasureFlow,
    plan: &SimulationPlan,
    lattice: Option<f64>,
) -> Result<MeasureFlow> {
    let full = plan.clone().with_record_stride(1);
    simulate_frozen(coeffs, mu_flow, gamma, &full)?.law_flow(lattice)
}
