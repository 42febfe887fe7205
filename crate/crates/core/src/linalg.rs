//! Small dense matrices (d ≤ 3) on the stack, and spectral helpers via nalgebra.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

pub const MAX_SMALL_DIM: usize = 3;

/// Row-major `d × d` matrix with `d ≤ 3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallMat {
    pub d: usize,
    pub a: [f64; 9],
}

impl SmallMat {
    pub fn zeros(d: usize) -> Self {
        assert!((1..=MAX_SMALL_DIM).contains(&d));
        Self { d, a: [0.0; 9] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.a[i * 3 + i] = 1.0;
        }
        m
    }

    pub fn from_rows(d: usize, rows: &[f64]) -> Self {
        assert_eq!(rows.len(), d * d);
        let mut m = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m.a[i * 3 + j] = rows[i * d + j];
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * 3 + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * 3 + j] = v;
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut m = *self;
        for v in m.a.iter_mut() {
            *v *= c;
        }
        m
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut m = *self;
        for (v, w) in m.a.iter_mut().zip(other.a.iter()) {
            *v += w;
        }
        m
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-1.0))
    }

    pub fn symmetrized(&self) -> Self {
        let mut m = *self;
        for i in 0..self.d {
            for j in 0..i {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.d {
            let mut s = 0.0;
            for j in 0..self.d {
                s += self.get(i, j) * x[j];
            }
            out[i] = s;
        }
    }

    pub fn trace_product(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                s += self.get(i, j) * other.get(j, i);
            }
        }
        s
    }

    pub fn to_rows(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.d * self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                v.push(self.get(i, j));
            }
        }
        v
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.d, self.d, &self.to_rows())
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .symmetrized()
            .to_dmatrix()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Clone, Copy, Debug)]
pub struct Cholesky {
    pub l: SmallMat,
}

impl Cholesky {
    pub fn new(a: &SmallMat) -> Result<Self> {
        let d = a.d;
        let mut l = SmallMat::zeros(d);
        let scale = (0..d).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
        for j in 0..d {
            let mut s = a.get(j, j);
            for k in 0..j {
                s -= l.get(j, k) * l.get(j, k);
            }
            if !(s > 1e-14 * scale) || !s.is_finite() {
                return Err(Error::DegenerateCovariance);
            }
            let ljj = s.sqrt();
            l.set(j, j, ljj);
            for i in (j + 1)..d {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / ljj);
            }
        }
        Ok(Self { l })
    }

    pub fn log_det(&self) -> f64 {
        (0..self.l.d).map(|i| self.l.get(i, i).ln()).sum::<f64>() * 2.0
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let d = self.l.d;
        for i in 0..d {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l.get(i, k) * b[k];
            }
            b[i] = s / self.l.get(i, i);
        }
        for i in (0..d).rev() {
            let mut s = b[i];
            for k in (i + 1)..d {
                s -= self.l.get(k, i) * b[k];
            }
            b[i] = s / self.l.get(i, i);
        }
    }

    pub fn inverse(&self) -> SmallMat {
        let d = self.l.d;
        let mut inv = SmallMat::zeros(d);
        let mut col = [0.0; 3];
        for j in 0..d {
            col.fill(0.0);
            col[j] = 1.0;
            self.solve_in_place(&mut col[..d]);
            for i in 0..d {
                inv.set(i, j, col[i]);
            }
        }
        inv.symmetrized()
    }

    /// `L ξ`.
    pub fn apply_factor(&self, xi: &[f64], out: &mut [f64]) {
        let d = self.l.d;
        for i in 0..d {
            let mut s = 0.0;
            for k in 0..=i {
                s += self.l.get(i, k) * xi[k];
            }
            out[i] = s;
        }
    }
}

/// Largest singular value of a row-major `rows × cols` matrix.
pub fn spectral_norm(m: &[f64], rows: usize, cols: usize) -> f64 {
    if rows == 1 || cols == 1 {
        return m.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    let dm = DMatrix::from_row_slice(rows, cols, m);
    dm.singular_values().iter().copied().fold(0.0, f64::max)
}

/// `σ σᵀ` for a row-major `d × m` matrix.
pub fn outer_self(sigma: &[f64], d: usize, m: usize, out: &mut [f64]) {
    for i in 0..d {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..m {
                s += sigma[i * m + k] * sigma[j * m + k];
            }
            out[i * d + j] = s;
            out[j * d + i] = s;
        }
    }
}

/// Extreme eigenvalues of a symmetric row-major `d × d` matrix.
pub fn sym_eigen_range(a: &[f64], d: usize) -> (f64, f64) {
    if d == 1 {
        return (a[0], a[0]);
    }
    let dm = DMatrix::from_row_slice(d, d, a);
    let sym = (&dm + dm.transpose()) * 0.5;
    let ev = sym.symmetric_eigenvalues();
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_round_trip() {
        let a = SmallMat::from_rows(3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let c = Cholesky::new(&a).unwrap();
        let mut x = [1.0, -2.0, 0.5];
        let b = x;
        c.solve_in_place(&mut x);
        let mut back = [0.0; 3];
        a.matvec(&x, &mut back);
        for i in 0..3 {
            assert!((back[i] - b[i]).abs() < 1e-13);
        }
        let det = a.to_dmatrix().determinant();
        assert!((c.log_det() - det.ln()).abs() < 1e-13);
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = SmallMat::from_rows(2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(Cholesky::new(&a), Err(Error::DegenerateCovariance)));
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = [3.0, 0.0, 0.0, -5.0];
        assert!((spectral_norm(&m, 2, 2) - 5.0).abs() < 1e-12);
    }
}
