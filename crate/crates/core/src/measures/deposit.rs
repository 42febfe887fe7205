use super::EmpiricalMeasure;
use crate::error::{invalid, Result};
use std::collections::BTreeMap;

/// Cloud-in-cell projection of a weighted point cloud onto the lattice `h·Z^d`.
///
/// Each atom spreads its mass multilinearly over the `2^d` corners of its cell,
/// so the first moment is preserved exactly. Two clouds projected with the same
/// `h` share their support, which makes atomic ‖·‖_{θ,TV} meaningful between
/// particle laws.
pub fn deposit_cic(mu: &EmpiricalMeasure, h: f64) -> Result<EmpiricalMeasure> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(invalid(format!("lattice spacing must be positive, got {h}")));
    }
    let d = mu.dim();
    if d == 1 {
        return deposit_line(mu, h);
    }
    let mut cells: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    let mut base = vec![0i64; d];
    let mut frac = vec![0.0; d];
    let mut key = vec![0i64; d];
    for (x, w) in mu.iter() {
        for k in 0..d {
            let s = x[k] / h;
            let f = s.floor();
            base[k] = f as i64;
            frac[k] = s - f;
        }
        for corner in 0..(1usize << d) {
            let mut c = w;
            for k in 0..d {
                if corner >> k & 1 == 1 {
                    key[k] = base[k] + 1;
                    c *= frac[k];
                } else {
                    key[k] = base[k];
                    c *= 1.0 - frac[k];
                }
            }
            if c > 0.0 {
                *cells.entry(key.clone()).or_insert(0.0) += c;
            }
        }
    }
    let mut atoms = Vec::with_capacity(cells.len() * d);
    let mut weights = Vec::with_capacity(cells.len());
    for (k, w) in cells {
        atoms.extend(k.iter().map(|&i| i as f64 * h));
        weights.push(w);
    }
    renormalized(d, atoms, weights)
}

fn deposit_line(mu: &EmpiricalMeasure, h: f64) -> Result<EmpiricalMeasure> {
    let (mut lo, mut hi) = (i64::MAX, i64::MIN);
    for (x, _) in mu.iter() {
        let f = (x[0] / h).floor() as i64;
        lo = lo.min(f);
        hi = hi.max(f + 1);
    }
    let mut mass = vec![0.0; (hi - lo + 1) as usize];
    for (x, w) in mu.iter() {
        let s = x[0] / h;
        let f = s.floor();
        let r = s - f;
        let i = (f as i64 - lo) as usize;
        mass[i] += w * (1.0 - r);
        mass[i + 1] += w * r;
    }
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (i, &m) in mass.iter().enumerate() {
        if m > 0.0 {
            atoms.push((lo + i as i64) as f64 * h);
            weights.push(m);
        }
    }
    renormalized(1, atoms, weights)
}

fn renormalized(d: usize, atoms: Vec<f64>, mut weights: Vec<f64>) -> Result<EmpiricalMeasure> {
    let total = super::compensated_sum(weights.iter().copied());
    for w in weights.iter_mut() {
        *w /= total;
    }
    EmpiricalMeasure::new(d, atoms, weights)
}
