//! Exact optimal transport between atomic measures.
//!
//! One-dimensional problems use the monotone (quantile) coupling. Equal-size
//! uniform supports reduce to an assignment problem (Hungarian method). Everything
//! else goes through the transportation simplex with u–v potentials.

use super::{check_dims, check_theta, norm, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::rng::{SeqRng, Stream};

pub const DEFAULT_MAX_ATOMS: usize = 2048;

#[derive(Clone, Copy, Debug)]
pub struct TransportConfig {
    /// Largest admissible `|supp μ| · |supp ν|`.
    pub max_coupling_entries: usize,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            max_coupling_entries: DEFAULT_MAX_ATOMS * DEFAULT_MAX_ATOMS,
        }
    }
}

/// `W_θ(μ, ν)` with the default size cap.
pub fn wasserstein(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, theta: f64) -> Result<f64> {
    wasserstein_with(mu, nu, theta, &TransportConfig::default())
}

pub fn wasserstein_with(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    theta: f64,
    cfg: &TransportConfig,
) -> Result<f64> {
    check_theta(theta)?;
    check_dims(mu, nu)?;
    // A fixed argument order makes the result bitwise symmetric.
    let (mu, nu) = if canonical_order(mu, nu) { (mu, nu) } else { (nu, mu) };
    if mu.dim() == 1 {
        return Ok(quantile_cost(mu, nu, theta).powf(1.0 / theta));
    }
    Ok(transport_cost(mu, nu, theta, cfg)?.powf(1.0 / theta))
}

fn canonical_order(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> bool {
    mu.len()
        .cmp(&nu.len())
        .then_with(|| cmp_slices(mu.atoms(), nu.atoms()))
        .then_with(|| cmp_slices(mu.weights(), nu.weights()))
        .is_le()
}

fn cmp_slices(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(a.len().cmp(&b.len()))
}

/// Optimal `Σ π_ij |x_i − y_j|^θ` by assignment or simplex, in any dimension.
pub fn transport_cost(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    theta: f64,
    cfg: &TransportConfig,
) -> Result<f64> {
    check_theta(theta)?;
    check_dims(mu, nu)?;
    let (n, m) = (mu.len(), nu.len());
    if n.saturating_mul(m) > cfg.max_coupling_entries {
        return Err(Error::InstanceTooLarge {
            rows: n,
            cols: m,
            cap: cfg.max_coupling_entries,
        });
    }
    let mut cost = vec![0.0; n * m];
    let mut diff = vec![0.0; mu.dim()];
    for i in 0..n {
        for j in 0..m {
            for (k, dk) in diff.iter_mut().enumerate() {
                *dk = mu.atom(i)[k] - nu.atom(j)[k];
            }
            cost[i * m + j] = norm(&diff).powf(theta);
        }
    }
    if n == m && mu.is_uniform() && nu.is_uniform() {
        let assignment = hungarian(&cost, n);
        let total: f64 = assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| cost[i * m + j])
            .sum();
        return Ok(total / n as f64);
    }
    transportation_simplex(mu.weights(), nu.weights(), &cost)
}

fn quantile_cost(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, theta: f64) -> f64 {
    let sorted = |m: &EmpiricalMeasure| {
        let mut v: Vec<(f64, f64)> = m.iter().map(|(x, w)| (x[0], w)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let (a, b) = (sorted(mu), sorted(nu));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut total = 0.0;
    loop {
        let mass = ra.min(rb);
        total += mass * (a[i].0 - b[j].0).abs().powf(theta);
        ra -= mass;
        rb -= mass;
        // Advance whichever side is exhausted; on ties advance both.
        let adv_a = ra <= rb;
        let adv_b = rb <= ra;
        if adv_a {
            i += 1;
            if i == a.len() {
                break;
            }
            ra = a[i].1;
        }
        if adv_b {
            j += 1;
            if j == b.len() {
                break;
            }
            rb = b[j].1;
        }
    }
    total
}

/// Minimum-cost perfect matching on a square cost matrix; returns column of each row.
fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    // Potentials formulation with 1-based sentinels.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

/// Transportation simplex: northwest-corner start, u–v potentials pricing,
/// cycle pivot on the spanning tree of basic cells.
fn transportation_simplex(a: &[f64], b: &[f64], cost: &[f64]) -> Result<f64> {
    let (n, m) = (a.len(), b.len());
    let nodes = n + m;

    // Northwest corner basis. Exactly n + m − 1 cells, degenerate ones carry 0.
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut basis: Vec<(usize, usize, f64)> = Vec::with_capacity(nodes - 1);
    let (mut i, mut j) = (0, 0);
    while basis.len() < nodes - 1 {
        let q = supply[i].min(demand[j]).max(0.0);
        basis.push((i, j, q));
        supply[i] -= q;
        demand[j] -= q;
        if i == n - 1 {
            j += 1;
        } else if j == m - 1 || supply[i] <= demand[j] {
            i += 1;
        } else {
            j += 1;
        }
    }

    let mut is_basic = vec![false; n * m];
    for &(i, j, _) in &basis {
        is_basic[i * m + j] = true;
    }
    let scale = cost.iter().copied().fold(0.0, f64::max).max(1e-300);
    let eps = 1e-12 * scale;
    let max_iter = 50 * nodes * nodes + 1000;

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut pot = vec![0.0; nodes];
    let mut known = vec![false; nodes];
    let mut stack = Vec::with_capacity(nodes);
    let mut parent_edge = vec![usize::MAX; nodes];

    for _ in 0..max_iter {
        for l in adj.iter_mut() {
            l.clear();
        }
        for (e, &(i, j, _)) in basis.iter().enumerate() {
            adj[i].push(e);
            adj[n + j].push(e);
        }

        // Potentials: u_i + v_j = c_ij on basic cells, u_0 = 0.
        known.fill(false);
        pot[0] = 0.0;
        known[0] = true;
        stack.clear();
        stack.push(0);
        while let Some(node) = stack.pop() {
            for &e in &adj[node] {
                let (i, j, _) = basis[e];
                let other = if node < n { n + j } else { i };
                if !known[other] {
                    pot[other] = cost[i * m + j] - pot[node];
                    known[other] = true;
                    stack.push(other);
                }
            }
        }
        if known.iter().any(|k| !k) {
            return Err(Error::TransportFailed("basis is not a spanning tree".into()));
        }

        // Dantzig pricing.
        let mut best = -eps;
        let mut enter = None;
        for i in 0..n {
            let ui = pot[i];
            for j in 0..m {
                if is_basic[i * m + j] {
                    continue;
                }
                let rc = cost[i * m + j] - ui - pot[n + j];
                if rc < best {
                    best = rc;
                    enter = Some((i, j));
                }
            }
        }
        let Some((ei, ej)) = enter else {
            return Ok(basis.iter().map(|&(i, j, f)| f * cost[i * m + j]).sum());
        };

        // Tree path from row ei to column ej.
        parent_edge.fill(usize::MAX);
        known.fill(false);
        known[ei] = true;
        stack.clear();
        stack.push(ei);
        let target = n + ej;
        while let Some(node) = stack.pop() {
            if node == target {
                break;
            }
            for &e in &adj[node] {
                let (i, j, _) = basis[e];
                let other = if node < n { n + j } else { i };
                if !known[other] {
                    known[other] = true;
                    parent_edge[other] = e;
                    stack.push(other);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while node != ei {
            let e = parent_edge[node];
            path.push(e);
            let (i, j, _) = basis[e];
            node = if node < n { n + j } else { i };
        }
        // `path` runs from the column end back to the row end. The cycle alternates
        // + (entering) − + − ... starting from the entering cell; the edge touching
        // column ej is the first edge after entering, so it is a − edge.
        let mut leave = usize::MAX;
        let mut theta = f64::INFINITY;
        for (k, &e) in path.iter().enumerate() {
            if k % 2 == 0 && basis[e].2 < theta {
                theta = basis[e].2;
                leave = e;
            }
        }
        for (k, &e) in path.iter().enumerate() {
            if k % 2 == 0 {
                basis[e].2 -= theta;
            } else {
                basis[e].2 += theta;
            }
        }
        let (li, lj, _) = basis[leave];
        is_basic[li * m + lj] = false;
        is_basic[ei * m + ej] = true;
        basis[leave] = (ei, ej, theta);
    }
    Err(Error::TransportFailed(format!(
        "no optimum after {max_iter} pivots"
    )))
}

/// Sliced approximation of `W_θ` from `n_directions` random projections.
///
/// This is an approximation (a lower bound in expectation), not the exact metric;
/// it is offered for supports beyond the exact solver's cap.
pub fn sliced_wasserstein(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    theta: f64,
    n_directions: usize,
    seed: u64,
) -> Result<f64> {
    check_theta(theta)?;
    check_dims(mu, nu)?;
    let d = mu.dim();
    let mut rng = SeqRng::new(seed, Stream::Aux, 0);
    let mut total = 0.0;
    let mut dir = vec![0.0; d];
    let project = |m: &EmpiricalMeasure, dir: &[f64]| -> EmpiricalMeasure {
        let pts = m
            .iter()
            .map(|(x, _)| x.iter().zip(dir).map(|(a, b)| a * b).sum())
            .collect();
        EmpiricalMeasure::new(1, pts, m.weights().to_vec())
            .expect("projection preserves validity")
    };
    for _ in 0..n_directions.max(1) {
        for v in dir.iter_mut() {
            *v = rng.normal();
        }
        let len = norm(&dir).max(1e-300);
        for v in dir.iter_mut() {
            *v /= len;
        }
        total += quantile_cost(&project(mu, &dir), &project(nu, &dir), theta);
    }
    Ok((total / n_directions.max(1) as f64).powf(1.0 / theta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(dim: usize, pts: &[f64], w: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::new(dim, pts.to_vec(), w.to_vec()).unwrap()
    }

    #[test]
    fn dirac_pair() {
        let a = EmpiricalMeasure::dirac(&[0.0, 0.0]);
        let b = EmpiricalMeasure::dirac(&[3.0, 4.0]);
        assert!((wasserstein(&a, &b, 2.0).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn hungarian_small_case() {
        // Row 0 prefers col 1, row 1 prefers col 0.
        let c = [4.0, 1.0, 2.0, 5.0];
        assert_eq!(hungarian(&c, 2), vec![1, 0]);
    }

    #[test]
    fn simplex_matches_quantile_in_one_dimension() {
        let mu = cloud(1, &[0.0, 1.0, 3.0], &[0.2, 0.5, 0.3]);
        let nu = cloud(1, &[-1.0, 2.0], &[0.6, 0.4]);
        for theta in [1.0, 2.0, 3.5] {
            let exact = quantile_cost(&mu, &nu, theta);
            let lp = transport_cost(&mu, &nu, theta, &TransportConfig::default()).unwrap();
            assert!((exact - lp).abs() < 1e-12, "theta={theta}: {exact} vs {lp}");
        }
    }

    #[test]
    fn cap_is_enforced() {
        let mu = EmpiricalMeasure::uniform(2, vec![0.0; 2 * 10]).unwrap();
        let cfg = TransportConfig {
            max_coupling_entries: 50,
        };
        assert!(matches!(
            wasserstein_with(&mu, &mu, 2.0, &cfg),
            Err(Error::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn sliced_is_below_exact() {
        let mu = cloud(2, &[0.0, 0.0, 1.0, 0.0, 0.0, 2.0], &[0.3, 0.3, 0.4]);
        let nu = cloud(2, &[1.0, 1.0, -1.0, 0.5], &[0.5, 0.5]);
        let exact = wasserstein(&mu, &nu, 2.0).unwrap();
        let sliced = sliced_wasserstein(&mu, &nu, 2.0, 64, 3).unwrap();
        assert!(sliced <= exact + 1e-12);
        assert!(sliced > 0.0);
    }
}
