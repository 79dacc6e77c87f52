//! Dense Hermitian matrices over the one-particle site basis.

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Relative tolerance used when accepting a matrix as Hermitian.
const HERMITIAN_RTOL: f64 = 1e-12;

/// A dense, square, Hermitian matrix.
///
/// Construction validates `H = H^dag` to a relative tolerance of `1e-12`; the
/// stored entries are kept exactly as given.
#[derive(Clone, Debug)]
pub struct HermitianMatrix {
    mat: Mat<C64>,
}

impl HermitianMatrix {
    pub fn new(mat: Mat<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                got: mat.ncols(),
            });
        }
        let h = Self { mat };
        let defect = h.hermiticity_defect();
        if defect > HERMITIAN_RTOL * h.max_abs().max(1.0) {
            return Err(Error::NonHermitian(defect));
        }
        Ok(h)
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        Self::new(Mat::from_fn(n, n, f))
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            mat: Mat::zeros(n, n),
        }
    }

    /// Wraps a matrix that is Hermitian by construction.
    pub(crate) fn from_mat_unchecked(mat: Mat<C64>) -> Self {
        debug_assert_eq!(mat.nrows(), mat.ncols());
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn as_mat(&self) -> &Mat<C64> {
        &self.mat
    }

    pub fn into_mat(self) -> Mat<C64> {
        self.mat
    }

    pub fn max_abs(&self) -> f64 {
        let n = self.dim();
        let mut m = 0.0_f64;
        for j in 0..n {
            for i in 0..n {
                m = m.max(self.mat[(i, j)].norm());
            }
        }
        m
    }

    /// `max |H - H^dag|` over all entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut d = 0.0_f64;
        for i in 0..n {
            for j in 0..=i {
                d = d.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        d
    }

    /// True when every entry has a vanishing imaginary part.
    pub fn is_real(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| self.mat[(i, j)].im == 0.0))
    }

    /// Largest entrywise difference to another matrix of the same size.
    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let n = self.dim();
        let mut d = 0.0_f64;
        for j in 0..n {
            for i in 0..n {
                d = d.max((self.mat[(i, j)] - other.mat[(i, j)]).norm());
            }
        }
        Ok(d)
    }

    /// Matrix-vector product `H v`.
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        let n = self.dim();
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (j, &vj) in v.iter().enumerate() {
            if vj == C64::new(0.0, 0.0) {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.mat[(i, j)] * vj;
            }
        }
        Ok(out)
    }

    /// Real expectation value `<v|H|v>`.
    pub fn expectation(&self, v: &[C64]) -> Result<f64> {
        let hv = self.apply(v)?;
        Ok(v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum())
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.mat[(i, j)]).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_hermitian() {
        let err = HermitianMatrix::from_fn(2, |i, j| {
            if i == 0 && j == 1 {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::NonHermitian(_)));
    }

    #[test]
    fn expectation_of_pauli_x() {
        let h = HermitianMatrix::from_fn(2, |i, j| {
            if i != j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .unwrap();
        let s = 1.0 / 2f64.sqrt();
        let v = [C64::new(s, 0.0), C64::new(s, 0.0)];
        assert!((h.expectation(&v).unwrap() - 1.0).abs() < 1e-15);
        assert!(h.is_real());
    }
}
