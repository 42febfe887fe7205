//! Gauss rules and the endpoint-smoothing time substitution.

use std::f64::consts::PI;

/// Nodes and weights of a one-dimensional rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Hermite rule for the standard normal weight: `∫ g φ ≈ Σ w_i g(x_i)`, `Σ w_i = 1`.
pub fn gauss_hermite_normal(n: usize) -> Rule {
    assert!(n >= 1, "need at least one node");
    // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite family.
    let jac = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrize to remove eigen-solver asymmetry.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1 / total).collect(),
    }
}

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels of `n` nodes.
pub fn composite_legendre(a: f64, b: f64, panels: usize, n: usize) -> Rule {
    let base = gauss_legendre(n);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * n);
    let mut weights = Vec::with_capacity(panels * n);
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (x, w) in base.nodes.iter().zip(&base.weights) {
            nodes.push(lo + 0.5 * h * (x + 1.0));
            weights.push(0.5 * h * w);
        }
    }
    Rule { nodes, weights }
}

/// Time rule on `[r, t]` via `u = r + (t − r) sin²(πv/2)`, `v ∈ [0, 1]`.
///
/// The Jacobian `(t − r)(π/2) sin(πv)` vanishes at both ends and absorbs
/// `(u − r)^{-1/2}(t − u)^{-1/2}` singularities. Weights include the Jacobian.
pub fn sin2_rule(r: f64, t: f64, n: usize) -> Rule {
    let base = gauss_legendre(n);
    let len = t - r;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (x, w) in base.nodes.iter().zip(&base.weights) {
        let v = 0.5 * (x + 1.0);
        let s = (0.5 * PI * v).sin();
        nodes.push(r + len * s * s);
        weights.push(0.5 * w * len * 0.5 * PI * (PI * v).sin());
    }
    Rule { nodes, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        for n in 1..=40 {
            let r = gauss_legendre(n);
            for k in 0..(2 * n) {
                let got: f64 = r
                    .nodes
                    .iter()
                    .zip(&r.weights)
                    .map(|(x, w)| w * x.powi(k as i32))
                    .sum();
                let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "n={n} k={k} got={got}");
            }
        }
    }

    #[test]
    fn hermite_matches_normal_moments() {
        for n in 1..=40 {
            let r = gauss_hermite_normal(n);
            let mut double_fact = 1.0;
            for k in 0..(2 * n).min(24) {
                let got: f64 = r
                    .nodes
                    .iter()
                    .zip(&r.weights)
                    .map(|(x, w)| w * x.powi(k as i32))
                    .sum();
                let scale: f64 = r
                    .nodes
                    .iter()
                    .zip(&r.weights)
                    .map(|(x, w)| w * x.abs().powi(k as i32))
                    .sum();
                let want = if k % 2 == 1 {
                    0.0
                } else {
                    if k >= 2 {
                        double_fact *= (k - 1) as f64;
                    }
                    double_fact
                };
                assert!(
                    (got - want).abs() < 1e-10 * scale.max(1.0),
                    "n={n} k={k} got={got} want={want}"
                );
            }
        }
    }

    #[test]
    fn sin2_rule_handles_inverse_sqrt_endpoints() {
        // ∫_0^1 u^{-1/2}(1-u)^{-1/2} du = π
        let r = sin2_rule(0.0, 1.0, 24);
        let got: f64 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .map(|(u, w)| w / (u * (1.0 - u)).sqrt())
            .sum();
        assert!((got - PI).abs() < 1e-12, "{got}");
    }
}
