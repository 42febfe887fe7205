//! One-dimensional backward PDE
//! `∂_t u + ½ a u'' + b u' + b = λ u`, `u(T, ·) = 0`, with `b` read from the
//! drift flow `μ` and `a = σσ*` from the flow `Φ(μ)`, its regularity gate
//! `‖u‖_∞ + ‖u'‖_∞ ≤ 1/5`, and the transform `Θ_t(x) = x + u_t(x)`.
//!
//! Time stepping is implicit Euler with centred differences in space and a
//! homogeneous Neumann condition at the ends of the truncation box.

use crate::coefficients::{CoefficientSet, LawView};
use crate::error::{invalid, Error, Result};
use crate::measures::io::fmt_num;
use crate::measures::MeasureFlow;
use serde::{Deserialize, Serialize};

/// Gate threshold on `sup|u| + sup|u'|`.
pub const GATE_BOUND: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub space_points: usize,
    pub time_steps: usize,
    /// Half width of the box; `None` uses `10 + 8√(K T)`.
    pub half_width: Option<f64>,
    /// Number of stored time slices besides the terminal one.
    pub record_slices: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            space_points: 401,
            time_steps: 2000,
            half_width: None,
            record_slices: 100,
        }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if self.space_points < 3 {
            return Err(invalid("space_points must be at least 3"));
        }
        if self.time_steps == 0 || self.record_slices == 0 {
            return Err(invalid("time_steps and record_slices must be positive"));
        }
        if let Some(h) = self.half_width {
            if !(h > 0.0 && h.is_finite()) {
                return Err(invalid(format!("half_width must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

/// Recorded slices of `u` on `[s, T] × [−R, R]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZvonkinSolution {
    pub x: Vec<f64>,
    /// Increasing recorded times; the last is `T`.
    pub t: Vec<f64>,
    /// `u[k][i] = u(t[k], x[i])`.
    pub u: Vec<Vec<f64>>,
    pub lambda: f64,
    /// Over every time step, not only the recorded ones.
    pub sup_u: f64,
    pub sup_du: f64,
    /// Discrete localized `L^q_t L^p_x` norm of `u''` over unit balls.
    pub sup_d2u_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub lambda: f64,
    pub sup_u: f64,
    pub sup_du: f64,
    pub sup_d2u_norm: f64,
    pub pass: bool,
}

impl ZvonkinSolution {
    /// `t,x,u` rows over the recorded slices.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,u\n");
        for (tk, row) in self.t.iter().zip(&self.u) {
            for (xi, ui) in self.x.iter().zip(row) {
                out.push_str(&format!("{},{},{}\n", fmt_num(*tk), fmt_num(*xi), fmt_num(*ui)));
            }
        }
        out
    }

    pub fn terminal_time(&self) -> f64 {
        self.t[self.t.len() - 1]
    }
}

/// `sup|u|` and the Lipschitz constant of the piecewise-linear interpolant.
fn max_abs_and_grad(u: &[f64], dx: f64) -> (f64, f64) {
    let sup_u = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sup_du = u.windows(2).fold(0.0f64, |m, w| m.max((w[1] - w[0]).abs() / dx));
    (sup_u, sup_du)
}

/// Tridiagonal solve; `None` on a vanishing pivot.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], scratch: &mut [f64]) -> Option<()> {
    let n = diag.len();
    let mut beta = diag[0];
    if beta.abs() < 1e-300 {
        return None;
    }
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch[i];
        if beta.abs() < 1e-300 {
            return None;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
    }
    Some(())
}

/// Solves the backward PDE on `[s, T]`, where `s` and `T` are the first and
/// last times of `phi_flow`.
pub fn solve_backward_pde(
    coeffs: &CoefficientSet,
    mu_flow: &MeasureFlow,
    phi_flow: &MeasureFlow,
    lambda: f64,
    grid: &GridSpec,
) -> Result<ZvonkinSolution> {
    if coeffs.dim() != 1 {
        return Err(Error::DimensionUnsupported {
            dim: coeffs.dim(),
            max: 1,
        });
    }
    if mu_flow.dim() != 1 || phi_flow.dim() != 1 {
        return Err(Error::IncompatibleFlows("flows must be one-dimensional".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be finite and ≥ 0, got {lambda}")));
    }
    grid.validate()?;
    let s = phi_flow.times()[0];
    let big_t = phi_flow.times()[phi_flow.len() - 1];
    if !(s < big_t) {
        return Err(invalid("phi_flow must span a nonempty interval"));
    }
    let half = grid
        .half_width
        .unwrap_or(10.0 + 8.0 * (coeffs.k() * (big_t - s)).sqrt());
    let n = grid.space_points;
    let dx = 2.0 * half / (n - 1) as f64;
    let x: Vec<f64> = (0..n).map(|i| -half + i as f64 * dx).collect();
    let steps = grid.time_steps;
    let dt = (big_t - s) / steps as f64;
    let m = coeffs.brownian_dim();
    let (p, q) = (coeffs.constants().p, coeffs.constants().q);

    let mu_views: Vec<LawView<'_>> = mu_flow.measures().iter().map(|mu| coeffs.law_view(mu)).collect();
    let phi_views: Vec<LawView<'_>> = phi_flow.measures().iter().map(|mu| coeffs.law_view(mu)).collect();

    // Ball integrals of |u''|^p use prefix sums over nodes within distance 1.
    let reach = (1.0 / dx).floor() as usize;
    let center_stride = ((0.5 / dx).round() as usize).max(1);
    let centers: Vec<usize> = (0..n).step_by(center_stride).collect();
    let mut ball_acc = vec![0.0; centers.len()];

    let record_every = (steps / grid.record_slices).max(1);
    let mut u = vec![0.0; n];
    let mut t_rec = vec![big_t];
    let mut u_rec = vec![u.clone()];
    let (mut sup_u, mut sup_du) = (0.0f64, 0.0f64);

    let (mut lower, mut diag, mut upper) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut rhs, mut scratch) = (vec![0.0; n], vec![0.0; n]);
    let mut b = [0.0];
    let mut sigma = vec![0.0; m];
    let mut d2 = vec![0.0; n];
    let mut prefix = vec![0.0; n + 1];

    for step in (0..steps).rev() {
        let tn = s + step as f64 * dt;
        let mu_view = &mu_views[mu_flow.index_at(tn)];
        let phi_view = &phi_views[phi_flow.index_at(tn)];
        for i in 0..n {
            coeffs.drift(tn, &x[i..=i], mu_view, &mut b);
            coeffs.diffusion(tn, &x[i..=i], phi_view, &mut sigma);
            let a: f64 = sigma.iter().map(|v| v * v).sum();
            let diff = 0.5 * a / (dx * dx);
            let adv = b[0] / (2.0 * dx);
            diag[i] = 1.0 / dt + lambda + 2.0 * diff;
            rhs[i] = u[i] / dt + b[0];
            if i == 0 {
                upper[0] = -2.0 * diff;
            } else if i == n - 1 {
                lower[n - 1] = -2.0 * diff;
            } else {
                lower[i] = -diff + adv;
                upper[i] = -diff - adv;
            }
        }
        let prev_sup = u.iter().fold(0.0f64, |mx, v| mx.max(v.abs()));
        if thomas(&lower, &diag, &upper, &mut rhs, &mut scratch).is_none() {
            return Err(Error::SolverDiverged { step });
        }
        std::mem::swap(&mut u, &mut rhs);
        let (su, sdu) = max_abs_and_grad(&u, dx);
        if !su.is_finite() || (prev_sup > 1e-12 && su > 10.0 * prev_sup) {
            return Err(Error::SolverDiverged { step });
        }
        sup_u = sup_u.max(su);
        sup_du = sup_du.max(sdu);

        d2[0] = 2.0 * (u[1] - u[0]) / (dx * dx);
        d2[n - 1] = 2.0 * (u[n - 2] - u[n - 1]) / (dx * dx);
        for i in 1..n - 1 {
            d2[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
        }
        for i in 0..n {
            prefix[i + 1] = prefix[i] + d2[i].abs().powf(p) * dx;
        }
        for (acc, &c) in ball_acc.iter_mut().zip(&centers) {
            let lo = c.saturating_sub(reach);
            let hi = (c + reach).min(n - 1);
            *acc += dt * (prefix[hi + 1] - prefix[lo]).powf(q / p);
        }

        if step % record_every == 0 || step == 0 {
            t_rec.push(tn);
            u_rec.push(u.clone());
        }
    }
    t_rec.reverse();
    u_rec.reverse();
    let sup_d2u_norm = ball_acc.iter().fold(0.0f64, |mx, v| mx.max(v.powf(1.0 / q)));
    Ok(ZvonkinSolution {
        x,
        t: t_rec,
        u: u_rec,
        lambda,
        sup_u,
        sup_du,
        sup_d2u_norm,
    })
}

/// `sup|u| + sup|u'| ≤ 1/5` (with `1e-9` slack).
pub fn regularity_gate(sol: &ZvonkinSolution) -> GateReport {
    GateReport {
        lambda: sol.lambda,
        sup_u: sol.sup_u,
        sup_du: sol.sup_du,
        sup_d2u_norm: sol.sup_d2u_norm,
        pass: sol.sup_u + sol.sup_du <= GATE_BOUND + 1e-9,
    }
}

/// Outcome of [`lambda_search`] with every gate evaluated along the way.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    pub lambda: f64,
    pub trail: Vec<GateReport>,
}

/// Smallest gate-passing `λ` found by trying 0, then doubling from 1, then
/// bisecting the last failing/passing pair to relative width `1e-4`.
pub fn lambda_search(
    coeffs: &CoefficientSet,
    mu_flow: &MeasureFlow,
    phi_flow: &MeasureFlow,
    grid: &GridSpec,
    lambda_max: f64,
) -> Result<LambdaSearch> {
    if !(lambda_max >= 0.0 && lambda_max.is_finite()) {
        return Err(invalid(format!("lambda_max must be finite, got {lambda_max}")));
    }
    let mut trail = Vec::new();
    let mut gate = |lam: f64| -> Result<bool> {
        let rep = regularity_gate(&solve_backward_pde(coeffs, mu_flow, phi_flow, lam, grid)?);
        let pass = rep.pass;
        trail.push(rep);
        Ok(pass)
    };
    if gate(0.0)? {
        return Ok(LambdaSearch { lambda: 0.0, trail });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        if hi > lambda_max {
            if lo < lambda_max && gate(lambda_max)? {
                hi = lambda_max;
                break;
            }
            return Err(Error::NoAdmissibleLambda { lambda_max });
        }
        if gate(hi)? {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-4 * hi {
        let mid = 0.5 * (lo + hi);
        if gate(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(LambdaSearch { lambda: hi, trail })
}

/// `Θ_t(x) = x + u_t(x)` by bilinear interpolation between recorded slices.
pub fn theta_transform(sol: &ZvonkinSolution, t: f64, x: f64) -> Result<f64> {
    let (t0, t1) = (sol.t[0], sol.terminal_time());
    let (x0, x1) = (sol.x[0], sol.x[sol.x.len() - 1]);
    let slack = 1e-12 * t1.abs().max(1.0);
    if !(t >= t0 - slack && t <= t1 + slack && x >= x0 && x <= x1) {
        return Err(Error::ExtrapolationRefused { t, x });
    }
    let bracket = |grid: &[f64], v: f64| -> (usize, f64) {
        let k = grid.partition_point(|&g| g <= v).clamp(1, grid.len() - 1);
        let w = ((v - grid[k - 1]) / (grid[k] - grid[k - 1])).clamp(0.0, 1.0);
        (k - 1, w)
    };
    let (kt, wt) = bracket(&sol.t, t);
    let (kx, wx) = bracket(&sol.x, x);
    let at = |row: &[f64]| row[kx] * (1.0 - wx) + row[kx + 1] * wx;
    let u = at(&sol.u[kt]) * (1.0 - wt) + at(&sol.u[kt + 1]) * wt;
    Ok(x + u)
}
