//! Atomic probability measures on R^d, time-indexed flows of them, and the
//! metrics W_θ, ‖·‖_{θ,TV}, TV together with their sup-over-time versions.

mod deposit;
pub mod io;
mod kde;
mod transport;

pub use deposit::deposit_cic;
pub use kde::{kde_gaussian, KdeEstimate};
pub use transport::{
    sliced_wasserstein, transport_cost, wasserstein, wasserstein_with, TransportConfig,
    DEFAULT_MAX_ATOMS,
};

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

/// Euclidean tolerance under which two atoms are treated as the same site.
pub const ATOM_TOL: f64 = 1e-12;

/// A probability measure with finitely many weighted atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

impl EmpiricalMeasure {
    /// `atoms` is row-major, `weights.len()` rows of `dim` coordinates.
    pub fn new(dim: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if atoms.len() != dim * weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} coordinates for {} atoms of dimension {dim}",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(i) = atoms.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure(format!(
                "non-finite coordinate in atom {}",
                i / dim
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure(format!(
                "weight {i} is {}",
                weights[i]
            )));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self { dim, atoms, weights })
    }

    /// Equal weights `1/n`.
    pub fn uniform(dim: usize, atoms: Vec<f64>) -> Result<Self> {
        if dim == 0 || atoms.is_empty() || !atoms.len().is_multiple_of(dim) {
            return Err(Error::InvalidMeasure(
                "atom buffer length must be a positive multiple of dim".into(),
            ));
        }
        let n = atoms.len() / dim;
        Self::new(dim, atoms, vec![1.0 / n as f64; n])
    }

    pub fn dirac(point: &[f64]) -> Self {
        Self {
            dim: point.len(),
            atoms: point.to_vec(),
            weights: vec![1.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.atoms
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    pub fn is_uniform(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|&w| w == w0)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (x, w) in self.iter() {
            for (mi, xi) in m.iter_mut().zip(x) {
                *mi += w * xi;
            }
        }
        m
    }

    /// `Σ w g(x)`.
    pub fn expect(&self, mut g: impl FnMut(&[f64]) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * g(x)).sum()
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta >= 1.0) || !theta.is_finite() {
        return Err(invalid(format!("theta must be finite and >= 1, got {theta}")));
    }
    Ok(())
}

fn check_dims(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<()> {
    if mu.dim != nu.dim {
        return Err(invalid(format!(
            "dimension mismatch: {} vs {}",
            mu.dim, nu.dim
        )));
    }
    Ok(())
}

/// `‖μ‖_θ = (Σ w |x|^θ)^{1/θ}`.
pub fn theta_moment(mu: &EmpiricalMeasure, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(raw_theta_moment(mu.iter(), theta))
}

pub(crate) fn raw_theta_moment<'a>(
    atoms: impl Iterator<Item = (&'a [f64], f64)>,
    theta: f64,
) -> f64 {
    let s: f64 = atoms.map(|(x, w)| w * norm(x).powf(theta)).sum();
    s.powf(1.0 / theta)
}

/// Signed mass differences on the union of atom sites, with each site's
/// representative point.
fn site_differences(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Vec<(usize, f64)> {
    let d = mu.dim;
    let n = mu.len();
    let total = n + nu.len();
    let point = |k: usize| -> &[f64] {
        if k < n {
            mu.atom(k)
        } else {
            nu.atom(k - n)
        }
    };
    let mass = |k: usize| -> f64 {
        if k < n {
            mu.weights[k]
        } else {
            -nu.weights[k - n]
        }
    };
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (point(a), point(b));
        for i in 0..d {
            match pa[i].total_cmp(&pb[i]) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        a.cmp(&b)
    });
    // Each site is (representative entry, accumulated signed mass).
    let mut sites: Vec<(usize, f64)> = Vec::new();
    let mut site_of: Vec<usize> = vec![0; total];
    let mut window = 0;
    for (pos, &k) in order.iter().enumerate() {
        let pk = point(k);
        while point(order[window])[0] < pk[0] - ATOM_TOL {
            window += 1;
        }
        let mut found = None;
        for &j in &order[window..pos] {
            let pj = point(j);
            let dist2: f64 = pj.iter().zip(pk).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist2.sqrt() <= ATOM_TOL {
                found = Some(site_of[j]);
                break;
            }
        }
        let s = match found {
            Some(s) => s,
            None => {
                sites.push((k, 0.0));
                sites.len() - 1
            }
        };
        site_of[k] = s;
        sites[s].1 += mass(k);
    }
    sites
}

fn tv_pair(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, theta: f64) -> (f64, f64) {
    let n = mu.len();
    let mut tv = 0.0;
    let mut wtv = 0.0;
    for (rep, m) in site_differences(mu, nu) {
        let x = if rep < n { mu.atom(rep) } else { nu.atom(rep - n) };
        let a = m.abs();
        tv += a;
        wtv += (1.0 + norm(x).powf(theta)) * a;
    }
    (tv, wtv)
}

/// `‖μ − ν‖_{θ,TV} = Σ_sites (1 + |x|^θ)|μ({x}) − ν({x})|`.
pub fn weighted_tv(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    check_dims(mu, nu)?;
    Ok(tv_pair(mu, nu, theta).1)
}

/// Total variation `Σ_sites |μ({x}) − ν({x})|` (the test class `|g| ≤ 1`).
pub fn tv(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_dims(mu, nu)?;
    Ok(tv_pair(mu, nu, 1.0).0)
}

/// The three metrics of one pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub tv: f64,
    pub weighted_tv: f64,
    pub wasserstein_theta: f64,
    pub theta: f64,
}

impl MetricReport {
    /// Smallest κ with `tv + W_θ ≤ κ ‖μ − ν‖_{θ,TV}`, if the pair differs.
    pub fn kappa(&self) -> Option<f64> {
        (self.weighted_tv > 0.0).then(|| (self.tv + self.wasserstein_theta) / self.weighted_tv)
    }
}

pub fn gpp_report(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, theta: f64) -> Result<MetricReport> {
    check_theta(theta)?;
    check_dims(mu, nu)?;
    let (tv, weighted_tv) = tv_pair(mu, nu, theta);
    Ok(MetricReport {
        tv,
        weighted_tv,
        wasserstein_theta: wasserstein(mu, nu, theta)?,
        theta,
    })
}

/// A time-indexed family of measures on a strictly increasing grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureFlow {
    times: Vec<f64>,
    measures: Vec<EmpiricalMeasure>,
}

impl MeasureFlow {
    pub fn new(times: Vec<f64>, measures: Vec<EmpiricalMeasure>) -> Result<Self> {
        if times.is_empty() || times.len() != measures.len() {
            return Err(invalid(format!(
                "flow needs one measure per time, got {} times and {} measures",
                times.len(),
                measures.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("flow times must be finite and strictly increasing"));
        }
        let d = measures[0].dim();
        if measures.iter().any(|m| m.dim() != d) {
            return Err(invalid("flow measures must share a dimension"));
        }
        Ok(Self { times, measures })
    }

    /// The flow equal to `mu` at every grid time.
    pub fn constant(times: Vec<f64>, mu: &EmpiricalMeasure) -> Result<Self> {
        let measures = vec![mu.clone(); times.len()];
        Self::new(times, measures)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn measures(&self) -> &[EmpiricalMeasure] {
        &self.measures
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.measures[0].dim()
    }

    pub fn first(&self) -> &EmpiricalMeasure {
        &self.measures[0]
    }

    pub fn last(&self) -> &EmpiricalMeasure {
        &self.measures[self.measures.len() - 1]
    }

    /// Index of the latest grid time `≤ t` (left-nearest); the first index if `t`
    /// precedes the grid.
    pub fn index_at(&self, t: f64) -> usize {
        let slack = 1e-12 * t.abs().max(1.0);
        match self.times.partition_point(|&s| s <= t + slack) {
            0 => 0,
            k => k - 1,
        }
    }

    pub fn measure_at(&self, t: f64) -> &EmpiricalMeasure {
        &self.measures[self.index_at(t)]
    }

    pub fn covers(&self, s: f64, t: f64) -> bool {
        let slack = 1e-12 * t.abs().max(1.0);
        self.times[0] <= s + slack && *self.times.last().unwrap() >= t - slack
    }

    pub(crate) fn into_parts(self) -> (Vec<f64>, Vec<EmpiricalMeasure>) {
        (self.times, self.measures)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMetric {
    WeightedTv,
    Wasserstein,
}

/// Per-time distances between two flows on the same grid.
pub fn flow_distances(
    mu: &MeasureFlow,
    nu: &MeasureFlow,
    theta: f64,
    kind: FlowMetric,
) -> Result<Vec<f64>> {
    check_theta(theta)?;
    if mu.len() != nu.len()
        || mu
            .times
            .iter()
            .zip(&nu.times)
            .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(Error::IncompatibleFlows(format!(
            "grids differ ({} vs {} times)",
            mu.len(),
            nu.len()
        )));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::IncompatibleFlows("dimension mismatch".into()));
    }
    mu.measures
        .iter()
        .zip(&nu.measures)
        .map(|(a, b)| match kind {
            FlowMetric::WeightedTv => weighted_tv(a, b, theta),
            FlowMetric::Wasserstein => wasserstein(a, b, theta),
        })
        .collect()
}

/// `sup_r d(μ_r, ν_r)` over the shared grid.
pub fn flow_distance(mu: &MeasureFlow, nu: &MeasureFlow, theta: f64, kind: FlowMetric) -> Result<f64> {
    Ok(flow_distances(mu, nu, theta, kind)?
        .into_iter()
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(points: &[f64], weights: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::new(1, points.to_vec(), weights.to_vec()).unwrap()
    }

    #[test]
    fn theta_moment_examples() {
        assert_eq!(theta_moment(&EmpiricalMeasure::dirac(&[0.0]), 2.0).unwrap(), 0.0);
        let x = EmpiricalMeasure::dirac(&[3.0, 0.0]);
        assert!((theta_moment(&x, 2.0).unwrap() - 3.0).abs() < 1e-15);
        let mu = m1(&[1.0, -2.0], &[0.5, 0.5]);
        assert!((theta_moment(&mu, 2.0).unwrap() - 2.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(theta_moment(&mu, 0.5), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn weighted_tv_examples() {
        let mu = m1(&[0.0, 1.0], &[0.3, 0.7]);
        let nu = m1(&[0.0, 1.0], &[0.5, 0.5]);
        assert!((weighted_tv(&mu, &nu, 1.0).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(weighted_tv(&mu, &mu, 2.0).unwrap(), 0.0);
        let a = EmpiricalMeasure::dirac(&[2.0]);
        let b = EmpiricalMeasure::dirac(&[-1.0]);
        assert_eq!(weighted_tv(&a, &b, 2.0).unwrap(), 5.0 + 2.0);
    }

    #[test]
    fn atoms_within_tolerance_are_merged() {
        let a = EmpiricalMeasure::dirac(&[1.0, 1.0]);
        let b = EmpiricalMeasure::dirac(&[1.0 + 5e-13, 1.0]);
        assert_eq!(weighted_tv(&a, &b, 2.0).unwrap(), 0.0);
        let c = EmpiricalMeasure::dirac(&[1.0 + 1e-9, 1.0]);
        assert!(weighted_tv(&a, &c, 2.0).unwrap() > 5.9);
    }

    #[test]
    fn gpp_closed_form() {
        let a = EmpiricalMeasure::dirac(&[0.0]);
        let b = EmpiricalMeasure::dirac(&[1.0]);
        let r = gpp_report(&a, &b, 1.0).unwrap();
        assert_eq!(r.tv, 2.0);
        assert_eq!(r.wasserstein_theta, 1.0);
        assert_eq!(r.weighted_tv, 3.0);
        assert_eq!(r.kappa(), Some(1.0));
    }

    #[test]
    fn measure_validation() {
        assert!(EmpiricalMeasure::new(1, vec![0.0, 1.0], vec![0.5, 0.4]).is_err());
        assert!(EmpiricalMeasure::new(1, vec![0.0, f64::NAN], vec![0.5, 0.5]).is_err());
        assert!(EmpiricalMeasure::new(1, vec![0.0, 1.0], vec![1.5, -0.5]).is_err());
        assert!(EmpiricalMeasure::new(2, vec![0.0, 1.0, 2.0], vec![1.0]).is_err());
        let n = 1_000_003;
        assert!(EmpiricalMeasure::uniform(1, vec![0.25; n]).is_ok());
    }

    #[test]
    fn flow_distance_sup_and_mismatch() {
        let a = m1(&[0.0, 1.0], &[0.5, 0.5]);
        let b = m1(&[0.0, 1.0], &[0.25, 0.75]);
        let f = MeasureFlow::constant(vec![0.0, 0.5, 1.0], &a).unwrap();
        let g = MeasureFlow::new(vec![0.0, 0.5, 1.0], vec![a.clone(), a.clone(), b.clone()]).unwrap();
        let d = flow_distance(&f, &g, 1.0, FlowMetric::WeightedTv).unwrap();
        assert!((d - weighted_tv(&a, &b, 1.0).unwrap()).abs() < 1e-15);
        let h = MeasureFlow::constant(vec![0.0, 0.6, 1.0], &a).unwrap();
        assert!(matches!(
            flow_distance(&f, &h, 1.0, FlowMetric::WeightedTv),
            Err(Error::IncompatibleFlows(_))
        ));
    }

    #[test]
    fn left_nearest_lookup() {
        let a = EmpiricalMeasure::dirac(&[0.0]);
        let f = MeasureFlow::constant(vec![0.0, 0.5, 1.0], &a).unwrap();
        assert_eq!(f.index_at(0.49), 0);
        assert_eq!(f.index_at(0.5), 1);
        assert_eq!(f.index_at(2.0), 2);
        assert_eq!(f.index_at(-1.0), 0);
    }
}
