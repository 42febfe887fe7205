use super::{run_scheme, sample_initial, DriftLaw, SimulationPlan};
use crate::coefficients::CoefficientSet;
use crate::error::{invalid, Error, Result};
use crate::measures::{deposit_cic, flow_distance, EmpiricalMeasure, FlowMetric, MeasureFlow};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Maximal segment length.
    pub t0: f64,
    /// Lattice spacing for projecting particle laws; `None` keeps raw atoms.
    pub lattice: Option<f64>,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 40,
            t0: 0.1,
            lattice: Some(0.05),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub start: f64,
    pub end: f64,
    /// `d_k = ‖μ^k − μ^{k−1}‖_{s,t,θ,TV}` for each application of Φ.
    pub iterates: Vec<f64>,
    pub contraction_ratios: Vec<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct PicardResult {
    pub flow: MeasureFlow,
    /// Iterate distances of the first segment.
    pub iterates: Vec<f64>,
    /// `d_{k+1}/d_k` of the first segment, where `d_k > 0`.
    pub contraction_ratios: Vec<f64>,
    pub t0_used: f64,
    pub segments: usize,
    pub segment_reports: Vec<SegmentReport>,
    pub converged: bool,
    pub cap_activations: u64,
    /// Particle positions at the final grid time, particle-major.
    pub terminal_positions: Vec<f64>,
}

impl PicardResult {
    pub fn first_ratio(&self) -> Option<f64> {
        self.contraction_ratios.first().copied()
    }
}

fn project(mu: EmpiricalMeasure, lattice: Option<f64>) -> Result<EmpiricalMeasure> {
    match lattice {
        Some(h) => deposit_cic(&mu, h),
        None => Ok(mu),
    }
}

/// Segment boundaries `(a, b)` as grid indices with `t_b − t_a ≤ t0`.
fn segments(grid: &[f64], t0: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut a = 0;
    let last = grid.len() - 1;
    while a < last {
        let limit = grid[a] + t0 * (1.0 + 1e-9);
        let mut b = a + 1;
        while b < last && grid[b + 1] <= limit {
            b += 1;
        }
        out.push((a, b));
        a = b;
    }
    out
}

/// Picard iteration `μ^{k+1} = Φ^γ(μ^k)` on successive segments of length ≤ t0.
///
/// Each segment starts from the constant flow equal to the current initial law
/// and restarts from the previous segment's terminal particles. Brownian
/// increments are shared across iterates, so each iteration applies the same
/// deterministic map.
pub fn picard_solve(
    coeffs: &CoefficientSet,
    gamma: &EmpiricalMeasure,
    plan: &SimulationPlan,
    opts: &PicardOptions,
) -> Result<PicardResult> {
    plan.validate()?;
    if !(opts.t0 > 0.0) || !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(invalid("picard needs t0 > 0, tol > 0 and max_iter ≥ 1"));
    }
    if gamma.dim() != coeffs.dim() {
        return Err(invalid("initial law dimension differs from coefficients"));
    }
    let theta = coeffs.theta();
    let d = coeffs.dim();
    let mut positions = sample_initial(gamma, plan.n_particles, plan.seed);
    let mut times = Vec::new();
    let mut measures = Vec::new();
    let mut reports = Vec::new();
    let mut cap_total = 0;

    for (a, b) in segments(&plan.time_grid, opts.t0) {
        let grid = plan.time_grid[a..=b].to_vec();
        let seg_plan = SimulationPlan {
            time_grid: grid.clone(),
            record_stride: 1,
            ..plan.clone()
        };
        let start_law = project(EmpiricalMeasure::uniform(d, positions.clone())?, opts.lattice)?;
        let mut current = MeasureFlow::constant(grid.clone(), &start_law)?;
        let mut iterates = Vec::new();
        let mut ratios = Vec::new();
        let mut converged = false;
        let mut streak = 0;
        let mut last_terminal = positions.clone();
        let mut last_caps = 0;
        for _ in 0..opts.max_iter {
            let ens = run_scheme(coeffs, &seg_plan, positions.clone(), DriftLaw::Flow(&current), a)?;
            let next = ens.law_flow(opts.lattice)?;
            let dist = flow_distance(&next, &current, theta, FlowMetric::WeightedTv)?;
            if let Some(&prev) = iterates.last() {
                if prev > 0.0 {
                    let r: f64 = dist / prev;
                    ratios.push(r);
                    streak = if r >= 1.0 { streak + 1 } else { 0 };
                }
            }
            iterates.push(dist);
            last_terminal = ens.terminal_positions();
            last_caps = ens.cap_activations;
            current = next;
            if dist < opts.tol {
                converged = true;
                break;
            }
            if streak >= 3 {
                return Err(Error::NoContraction {
                    segment_start: grid[0],
                    t0: opts.t0,
                    ratios,
                });
            }
        }
        cap_total += last_caps;
        let (seg_times, seg_measures) = current.into_parts();
        let skip = usize::from(!times.is_empty());
        times.extend_from_slice(&seg_times[skip..]);
        measures.extend(seg_measures.into_iter().skip(skip));
        reports.push(SegmentReport {
            start: grid[0],
            end: *grid.last().unwrap(),
            iterates,
            contraction_ratios: ratios,
            converged,
        });
        positions = last_terminal;
    }
    let first = reports[0].clone();
    Ok(PicardResult {
        flow: MeasureFlow::new(times, measures)?,
        iterates: first.iterates,
        contraction_ratios: first.contraction_ratios,
        t0_used: opts.t0,
        segments: reports.len(),
        converged: reports.iter().all(|r| r.converged),
        segment_reports: reports,
        cap_activations: cap_total,
        terminal_positions: positions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_cover_grid() {
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        assert_eq!(segments(&grid, 0.3), vec![(0, 3), (3, 6), (6, 9), (9, 10)]);
        assert_eq!(segments(&grid, 5.0), vec![(0, 10)]);
        assert_eq!(segments(&grid, 0.01), (0..10).map(|k| (k, k + 1)).collect::<Vec<_>>());
    }
}
