use super::{phi_map, ParticleEnsemble, SimulationPlan};
use crate::coefficients::CoefficientSet;
use crate::error::Result;
use crate::measures::{raw_theta_moment, EmpiricalMeasure, MeasureFlow};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub theta: f64,
    pub times: Vec<f64>,
    /// `E[sup_{r ≤ T} (1 + |X_r|²)^{θ/2}]` over the recorded grid.
    pub sup_moment_theta: f64,
    pub sup_moment_stderr: f64,
    /// `E[(1 + |X_t|²)^{θ/2}]` at each recorded time.
    pub per_time_moments: Vec<f64>,
    /// `E[sup_{r ≤ t} (1 + |X_r|²)^{θ/2}]` at each recorded time.
    pub running_sup_moments: Vec<f64>,
    /// Least-squares slope of `ln running_sup` against elapsed time.
    pub fitted_growth_rate: f64,
}

/// Monte Carlo moment statistics of an ensemble.
pub fn moment_report(ens: &ParticleEnsemble, theta: f64) -> MomentReport {
    let nt = ens.n_times();
    let n = ens.n_particles;
    let mut per_time = vec![0.0; nt];
    let mut running = vec![0.0; nt];
    let mut sq_last = 0.0;
    for p in 0..n {
        let mut m = 0.0f64;
        for k in 0..nt {
            let x = ens.position(p, k);
            let v = (1.0 + x.iter().map(|a| a * a).sum::<f64>()).powf(0.5 * theta);
            m = m.max(v);
            per_time[k] += v;
            running[k] += m;
        }
        sq_last += m * m;
    }
    let nf = n as f64;
    per_time.iter_mut().for_each(|v| *v /= nf);
    running.iter_mut().for_each(|v| *v /= nf);
    let sup = running[nt - 1];
    let var = if n > 1 {
        (sq_last / nf - sup * sup).max(0.0) * nf / (nf - 1.0)
    } else {
        0.0
    };
    let t0 = ens.times[0];
    let xs: Vec<f64> = ens.times.iter().map(|t| t - t0).collect();
    let ys: Vec<f64> = running.iter().map(|v| v.ln()).collect();
    MomentReport {
        theta,
        times: ens.times.clone(),
        sup_moment_theta: sup,
        sup_moment_stderr: (var / nf).sqrt(),
        per_time_moments: per_time,
        running_sup_moments: running,
        fitted_growth_rate: ols_slope(&xs, &ys),
    }
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
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

fn moment_of(mu: &EmpiricalMeasure, theta: f64) -> f64 {
    raw_theta_moment(mu.iter(), theta)
}

/// `sup_r (1 + ‖μ_r‖_θ) e^{−N(r−s)} ≤ 2(1 + ‖γ‖_θ)` on the flow grid.
pub fn invariant_class_check(flow: &MeasureFlow, gamma: &EmpiricalMeasure, n: f64, theta: f64) -> bool {
    let s = flow.times()[0];
    let bound = 2.0 * (1.0 + moment_of(gamma, theta));
    flow.times()
        .iter()
        .zip(flow.measures())
        .all(|(r, mu)| (1.0 + moment_of(mu, theta)) * (-n * (r - s)).exp() <= bound * (1.0 + 1e-12))
}

/// Smallest `N ≥ 0` for which [`invariant_class_check`] holds; infinite when the
/// flow leaves the class at its first time.
pub fn minimal_invariant_n(flow: &MeasureFlow, gamma: &EmpiricalMeasure, theta: f64) -> f64 {
    let s = flow.times()[0];
    let bound = 2.0 * (1.0 + moment_of(gamma, theta));
    let mut n: f64 = 0.0;
    for (r, mu) in flow.times().iter().zip(flow.measures()) {
        let level = 1.0 + moment_of(mu, theta);
        if level <= bound {
            continue;
        }
        if *r <= s {
            return f64::INFINITY;
        }
        n = n.max((level / bound).ln() / (r - s));
    }
    n
}

/// Invariance level `N = 2 N_min + 1`, where `N_min` is the smallest class
/// level containing `Φ^γ` of the constant flow `γ`.
pub fn estimate_invariance_n(
    coeffs: &CoefficientSet,
    gamma: &EmpiricalMeasure,
    plan: &SimulationPlan,
) -> Result<f64> {
    let base = MeasureFlow::constant(plan.time_grid.clone(), gamma)?;
    let out = phi_map(coeffs, gamma, &base, plan)?;
    Ok(2.0 * minimal_invariant_n(&out, gamma, coeffs.theta()) + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ensemble(paths: Vec<f64>, n: usize, times: Vec<f64>) -> ParticleEnsemble {
        let plan = SimulationPlan::new(n, times.clone(), 0).unwrap();
        ParticleEnsemble {
            dim: 1,
            n_particles: n,
            times,
            paths,
            plan,
            cap_activations: 0,
        }
    }

    #[test]
    fn constant_paths() {
        let r = moment_report(&ensemble(vec![0.0; 6], 2, vec![0.0, 0.5, 1.0]), 2.0);
        assert_eq!(r.sup_moment_theta, 1.0);
        let r = moment_report(&ensemble(vec![1.0; 3], 1, vec![0.0, 0.5, 1.0]), 2.0);
        assert_eq!(r.sup_moment_theta, 2.0);
        assert!(r.running_sup_moments.iter().all(|&m| m <= r.sup_moment_theta));
    }

    #[test]
    fn invariant_class_examples() {
        let g = EmpiricalMeasure::dirac(&[1.0]);
        let constant = MeasureFlow::constant(vec![0.0, 1.0, 2.0], &g).unwrap();
        assert!(invariant_class_check(&constant, &g, 0.0, 2.0));
        let far = EmpiricalMeasure::dirac(&[1e6]);
        let jump = MeasureFlow::new(vec![0.0, 1.0], vec![g.clone(), far]).unwrap();
        assert!(!invariant_class_check(&jump, &g, 0.0, 2.0));
        let n = minimal_invariant_n(&jump, &g, 2.0);
        assert!(invariant_class_check(&jump, &g, n, 2.0));
        assert!(!invariant_class_check(&jump, &g, 0.999 * n, 2.0));
    }
}
