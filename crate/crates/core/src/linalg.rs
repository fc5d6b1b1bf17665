//! Dense Cholesky helpers with the diagonal jitter policy used throughout.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// First jitter tried after a plain factorization fails.
pub const JITTER_START: f64 = 1e-10;
/// Largest jitter before giving up.
pub const JITTER_MAX: f64 = 1e-4;

/// Lower Cholesky factor stored row-major so forward substitution walks
/// contiguous memory.
#[derive(Debug, Clone)]
pub struct LowerFactor {
    n: usize,
    rows: Vec<f64>,
    jitter: f64,
}

impl LowerFactor {
    /// Factorizes a symmetric matrix, escalating diagonal jitter from
    /// [`JITTER_START`] by ×10 up to [`JITTER_MAX`].
    pub fn new(matrix: &DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        let mut jitter = 0.0;
        loop {
            let mut m = matrix.clone();
            if jitter > 0.0 {
                for i in 0..n {
                    m[(i, i)] += jitter;
                }
            }
            if let Some(chol) = m.cholesky() {
                let l = chol.l_dirty();
                let mut rows = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..=i {
                        rows[i * n + j] = l[(i, j)];
                    }
                }
                return Ok(Self { n, rows, jitter });
            }
            jitter = if jitter == 0.0 {
                JITTER_START
            } else {
                jitter * 10.0
            };
            if jitter > JITTER_MAX * 1.000_001 {
                return Err(Error::NotPositiveDefinite { jitter: JITTER_MAX });
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Jitter that was added to the diagonal (0 when none was needed).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i * self.n + j]
    }

    /// Solves `L x = b` in place.
    pub fn forward_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.rows[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(l, x)| l * x).sum();
            b[i] = (b[i] - s) / self.rows[i * n + i];
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn backward_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).fold(b[i], |acc, k| acc - self.rows[k * n + i] * b[k]);
            b[i] = s / self.rows[i * n + i];
        }
    }

    /// Solves `(L Lᵀ) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        x
    }

    /// `log det(L Lᵀ)`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.get(i, i).ln()).sum::<f64>()
    }

    /// Explicit inverse of `L Lᵀ`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut inv = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let f = LowerFactor::new(&a).unwrap();
        assert_eq!(f.jitter(), 0.0);
        let b = [1.0, 2.0, 3.0];
        let x = f.solve(&b);
        let back = &a * nalgebra::DVector::from_column_slice(&x);
        for i in 0..3 {
            assert!((back[i] - b[i]).abs() < 1e-12);
        }
        let det = a.determinant();
        assert!((f.log_det() - det.ln()).abs() < 1e-12);
        let inv = f.inverse();
        let id = &a * inv;
        assert!((id - DMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn jitter_rescues_singular_psd() {
        // rank one: 1 1 ; 1 1
        let a = DMatrix::from_element(2, 2, 1.0);
        let f = LowerFactor::new(&a).unwrap();
        assert!(f.jitter() >= JITTER_START && f.jitter() <= JITTER_MAX);
    }

    #[test]
    fn indefinite_fails() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            LowerFactor::new(&a),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
