use crate::error::{invalid, Error, Result};
use crate::quadrature::composite_legendre;
use rayon::prelude::*;

/// Membership of `(p, q)` in the class `p, q > 1`, `d/p + 2/q < 1`.
pub fn kato_class_check(p: f64, q: f64, d: usize) -> bool {
    p > 1.0 && q > 1.0 && p.is_finite() && q.is_finite() && (d as f64 / p + 2.0 / q) < 1.0
}

/// Tensor Gauss–Legendre over the bounding box of each unit ball.
#[derive(Clone, Debug, PartialEq)]
pub struct BallQuadrature {
    /// Nodes per panel along each axis.
    pub nodes_per_panel: usize,
    /// Panels per axis at the coarsest level; doubled at each further level.
    pub base_panels: usize,
    /// Gauss nodes per time panel.
    pub time_nodes: usize,
    /// Refinement levels.
    pub levels: usize,
}

impl Default for BallQuadrature {
    fn default() -> Self {
        Self {
            nodes_per_panel: 8,
            base_panels: 2,
            time_nodes: 8,
            levels: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpqNorm {
    /// Finest-level value at the maximizing center.
    pub value: f64,
    /// Aitken-extrapolated value across levels at that center.
    pub extrapolated: f64,
    pub center: Vec<f64>,
    /// Per-level values at the maximizing center, coarse to fine.
    pub levels: Vec<f64>,
}

const SINGULAR_OFFSET: f64 = 1e-8;

pub(crate) fn push_off(x: &mut [f64], singular: &[Vec<f64>]) {
    for sp in singular {
        let dist = x.iter().zip(sp).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dist < SINGULAR_OFFSET {
            if dist == 0.0 {
                x[0] += SINGULAR_OFFSET;
            } else {
                let scale = SINGULAR_OFFSET / dist;
                for (xi, si) in x.iter_mut().zip(sp) {
                    *xi = si + (*xi - si) * scale;
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn level_value<F>(
    f: &F,
    dim: usize,
    p: f64,
    q: f64,
    s: f64,
    t: f64,
    center: &[f64],
    quad: &BallQuadrature,
    level: usize,
    singular: &[Vec<f64>],
) -> f64
where
    F: Fn(f64, &[f64]) -> f64 + Sync,
{
    let panels = quad.base_panels << level;
    let axes: Vec<_> = center
        .iter()
        .map(|&c| composite_legendre(c - 1.0, c + 1.0, panels, quad.nodes_per_panel))
        .collect();
    let time = composite_legendre(s, t, 1 << level, quad.time_nodes);
    let per_axis = axes[0].len();
    let total = per_axis.pow(dim as u32);
    let mut x = vec![0.0; dim];
    let mut outer = 0.0;
    for (u, wu) in time.nodes.iter().zip(&time.weights) {
        let mut inner = 0.0;
        for flat in 0..total {
            let mut rem = flat;
            let mut w = 1.0;
            let mut r2 = 0.0;
            for k in 0..dim {
                let i = rem % per_axis;
                rem /= per_axis;
                x[k] = axes[k].nodes[i];
                w *= axes[k].weights[i];
                r2 += (x[k] - center[k]) * (x[k] - center[k]);
            }
            if r2 > 1.0 {
                continue;
            }
            push_off(&mut x, singular);
            inner += w * f(*u, &x).abs().powf(p);
        }
        outer += wu * inner.powf(q / p);
    }
    outer.powf(1.0 / q)
}

/// `sup_z (∫_s^t (∫_{B(z,1)} |f(u,x)|^p dx)^{q/p} du)^{1/q}` over `centers`.
///
/// Nodes within `1e-8` of a declared singular point are pushed out to that
/// distance. Successive refinement differences that fail to shrink signal a
/// non-integrable singularity.
#[allow(clippy::too_many_arguments)]
pub fn tilde_lpq_norm<F>(
    f: &F,
    dim: usize,
    p: f64,
    q: f64,
    s: f64,
    t: f64,
    centers: &[Vec<f64>],
    quad: &BallQuadrature,
    singular: &[Vec<f64>],
) -> Result<LpqNorm>
where
    F: Fn(f64, &[f64]) -> f64 + Sync,
{
    if !(s < t) {
        return Err(invalid(format!("need s < t, got [{s}, {t}]")));
    }
    if !(p >= 1.0 && q >= 1.0) {
        return Err(invalid("p and q must be at least 1"));
    }
    if centers.is_empty() || centers.iter().any(|c| c.len() != dim) {
        return Err(invalid("centers must be non-empty points of the ambient dimension"));
    }
    if quad.levels == 0 || quad.nodes_per_panel == 0 || quad.base_panels == 0 || quad.time_nodes == 0 {
        return Err(invalid("ball quadrature sizes must be positive"));
    }
    let per_center: Vec<Vec<f64>> = centers
        .par_iter()
        .map(|c| {
            (0..quad.levels)
                .map(|l| level_value(f, dim, p, q, s, t, c, quad, l, singular))
                .collect()
        })
        .collect();
    let finest = quad.levels - 1;
    let (best, levels) = per_center
        .iter()
        .enumerate()
        .max_by(|a, b| a.1[finest].total_cmp(&b.1[finest]).then(b.0.cmp(&a.0)))
        .expect("centers non-empty");
    let value = levels[finest];
    if !value.is_finite() {
        return Err(Error::DivergentNorm { levels: levels.clone() });
    }
    let mut extrapolated = value;
    if levels.len() >= 3 {
        let n = levels.len();
        let d1 = levels[n - 2] - levels[n - 3];
        let d2 = levels[n - 1] - levels[n - 2];
        let noise = 1e-9 * value.abs().max(1e-300);
        if d1.abs() > noise && d2.abs() > noise && d1.signum() == d2.signum() {
            let ratio = d2 / d1;
            if ratio >= 0.95 {
                return Err(Error::DivergentNorm { levels: levels.clone() });
            }
            extrapolated = levels[n - 1] + d2 * ratio / (1.0 - ratio);
        }
    }
    Ok(LpqNorm {
        value,
        extrapolated,
        center: centers[best].clone(),
        levels: levels.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kato_examples() {
        assert!(kato_class_check(4.0, 8.0, 1));
        assert!(!kato_class_check(2.0, 2.0, 1));
        assert!(!kato_class_check(1.0, 8.0, 1));
    }

    #[test]
    fn constant_envelope() {
        let one = |_: f64, _: &[f64]| 1.0;
        for p in [1.5, 2.0, 4.0] {
            let r = tilde_lpq_norm(&one, 1, p, 8.0, 0.0, 1.0, &[vec![0.3]], &BallQuadrature::default(), &[])
                .unwrap();
            assert!((r.value - 2f64.powf(1.0 / p)).abs() < 1e-13);
        }
        let zero = |_: f64, _: &[f64]| 0.0;
        let r = tilde_lpq_norm(&zero, 2, 4.0, 8.0, 0.0, 1.0, &[vec![0.0, 0.0]], &BallQuadrature::default(), &[])
            .unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn non_integrable_singularity_detected() {
        let f = |_: f64, x: &[f64]| 1.0 / x[0].abs();
        let err = tilde_lpq_norm(&f, 1, 2.0, 4.0, 0.0, 1.0, &[vec![0.0]], &BallQuadrature::default(), &[vec![0.0]]);
        assert!(matches!(err, Err(Error::DivergentNorm { .. })), "{err:?}");
    }
}
