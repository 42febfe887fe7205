use crate::error::{invalid, Result};
use crate::linalg::{Cholesky, SmallMat, MAX_SMALL_DIM};
use crate::measures::io::fmt_num;
use crate::quadrature::composite_legendre;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Gaussian kernel `p^z_{s,t}(x, y)` with accumulated covariance `a`.
#[derive(Clone, Debug)]
pub struct FrozenKernel {
    pub a: SmallMat,
    pub s: f64,
    pub t: f64,
    pub z: Vec<f64>,
    chol: Cholesky,
    inv: SmallMat,
    log_norm: f64,
}

impl FrozenKernel {
    /// Symmetrizes `a` and factors it.
    pub fn new(a: SmallMat, s: f64, t: f64, z: Vec<f64>) -> Result<Self> {
        if !(s < t) {
            return Err(invalid(format!("kernel needs s < t, got [{s}, {t}]")));
        }
        if z.len() != a.d {
            return Err(invalid("freeze point dimension differs from covariance"));
        }
        let a = a.symmetrized();
        let chol = Cholesky::new(&a)?;
        let inv = chol.inverse();
        let log_norm = -0.5 * (a.d as f64 * (2.0 * PI).ln() + chol.log_det());
        Ok(Self {
            a,
            s,
            t,
            z,
            chol,
            inv,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.d
    }

    pub fn inverse(&self) -> &SmallMat {
        &self.inv
    }

    /// `(a⁻¹(y − x), ⟨a⁻¹(y − x), y − x⟩)`.
    fn solve(&self, x: &[f64], y: &[f64]) -> ([f64; MAX_SMALL_DIM], f64) {
        let d = self.dim();
        let mut v = [0.0; MAX_SMALL_DIM];
        for i in 0..d {
            v[i] = y[i] - x[i];
        }
        let diff = v;
        self.chol.solve_in_place(&mut v[..d]);
        let q = (0..d).map(|i| v[i] * diff[i]).sum();
        (v, q)
    }

    pub fn density(&self, x: &[f64], y: &[f64]) -> f64 {
        let (_, q) = self.solve(x, y);
        (self.log_norm - 0.5 * q).exp()
    }

    /// Gradient in the backward variable: `a⁻¹(y − x) p`.
    pub fn grad(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let (_, g, _) = self.eval(x, y);
        g[..self.dim()].to_vec()
    }

    /// Hessian in the backward variable: `p (v vᵀ − a⁻¹)` with `v = a⁻¹(y − x)`.
    pub fn hess(&self, x: &[f64], y: &[f64]) -> SmallMat {
        self.eval(x, y).2
    }

    /// Density, gradient and Hessian in one pass.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> (f64, [f64; MAX_SMALL_DIM], SmallMat) {
        let d = self.dim();
        let (v, q) = self.solve(x, y);
        let p = (self.log_norm - 0.5 * q).exp();
        let mut g = [0.0; MAX_SMALL_DIM];
        let mut h = SmallMat::zeros(d);
        for i in 0..d {
            g[i] = v[i] * p;
            for j in 0..d {
                h.set(i, j, p * (v[i] * v[j] - self.inv.get(i, j)));
            }
        }
        (p, g, h)
    }
}

pub fn frozen_density(k: &FrozenKernel, x: &[f64], y: &[f64]) -> f64 {
    k.density(x, y)
}

pub fn frozen_density_grad(k: &FrozenKernel, x: &[f64], y: &[f64]) -> Vec<f64> {
    k.grad(x, y)
}

pub fn frozen_density_hess(k: &FrozenKernel, x: &[f64], y: &[f64]) -> SmallMat {
    k.hess(x, y)
}

/// Isotropic Gaussian `p̃^K_{s,t}(x, y)` with variance `2K(t − s)` per coordinate.
pub fn reference_kernel(kc: f64, s: f64, t: f64, x: &[f64], y: &[f64]) -> f64 {
    let tau = t - s;
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-r2 / (4.0 * kc * tau)).exp() / (4.0 * kc * PI * tau).powf(0.5 * x.len() as f64)
}

/// Tensor Gauss–Legendre grid with kernel values at its nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelGrid {
    pub axes: Vec<Vec<f64>>,
    pub axis_weights: Vec<Vec<f64>>,
    /// Row-major over the axes; empty until filled.
    pub values: Vec<f64>,
}

impl KernelGrid {
    /// Box `center ± half_width` per axis with `panels × nodes` points per axis.
    pub fn boxed(center: &[f64], half_width: f64, panels: usize, nodes: usize) -> Result<Self> {
        if !(half_width > 0.0) || panels == 0 || nodes == 0 {
            return Err(invalid("grid needs positive width, panels and nodes"));
        }
        let (axes, axis_weights) = center
            .iter()
            .map(|c| {
                let r = composite_legendre(c - half_width, c + half_width, panels, nodes);
                (r.nodes, r.weights)
            })
            .unzip();
        Ok(Self {
            axes,
            axis_weights,
            values: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point and product weight of flat index `idx`.
    pub fn node(&self, idx: usize) -> (Vec<f64>, f64) {
        let mut rem = idx;
        let mut x = vec![0.0; self.dim()];
        let mut w = 1.0;
        for k in (0..self.dim()).rev() {
            let n = self.axes[k].len();
            let i = rem % n;
            rem /= n;
            x[k] = self.axes[k][i];
            w *= self.axis_weights[k][i];
        }
        (x, w)
    }

    pub fn fill(&mut self, f: impl Fn(&[f64]) -> f64 + Sync) {
        self.values = (0..self.len())
            .into_par_iter()
            .map(|i| f(&self.node(i).0))
            .collect();
    }

    /// Quadrature of the stored values, summed in index order.
    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| self.node(i).1 * v)
            .sum()
    }

    /// `x1,…,xd,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let head: Vec<String> = (1..=self.dim()).map(|k| format!("x{k}")).collect();
        out.push_str(&head.join(","));
        out.push_str(",value\n");
        for (i, v) in self.values.iter().enumerate() {
            for c in self.node(i).0 {
                out.push_str(&fmt_num(c));
                out.push(',');
            }
            out.push_str(&fmt_num(*v));
            out.push('\n');
        }
        out
    }
}

/// `y ↦ p(x, y)` on the box `x ± radius·√λ_max(a)`.
pub fn frozen_density_grid(k: &FrozenKernel, x: &[f64], radius: f64, panels: usize, nodes: usize) -> Result<KernelGrid> {
    let lmax = k.a.sym_eigenvalues().last().copied().unwrap_or(0.0);
    let mut g = KernelGrid::boxed(x, radius * lmax.sqrt(), panels, nodes)?;
    g.fill(|y| k.density(x, y));
    Ok(g)
}
