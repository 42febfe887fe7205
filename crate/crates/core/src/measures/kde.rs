use super::EmpiricalMeasure;
use crate::error::{invalid, Result};
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KdeEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Product-Gaussian kernel density estimate at each evaluation point, with the
/// sampling standard error of the estimator.
pub fn kde_gaussian(mu: &EmpiricalMeasure, points: &[Vec<f64>], bandwidth: f64) -> Result<Vec<KdeEstimate>> {
    if !(bandwidth > 0.0) {
        return Err(invalid("bandwidth must be positive"));
    }
    let d = mu.dim();
    if points.iter().any(|p| p.len() != d) {
        return Err(invalid("evaluation point dimension mismatch"));
    }
    let norm = (2.0 * std::f64::consts::PI).powf(-(d as f64) / 2.0) / bandwidth.powi(d as i32);
    let inv2h2 = 0.5 / (bandwidth * bandwidth);
    let n = mu.len() as f64;
    Ok(points
        .par_iter()
        .map(|z| {
            let kernel = |x: &[f64]| {
                let r2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                norm * (-r2 * inv2h2).exp()
            };
            let value = mu.expect(kernel);
            let var: f64 = mu
                .iter()
                .map(|(x, w)| {
                    let dk = kernel(x) - value;
                    w * w * dk * dk
                })
                .sum();
            let correction = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
            KdeEstimate {
                value,
                std_error: (var * correction).sqrt(),
            }
        })
        .collect())
}
