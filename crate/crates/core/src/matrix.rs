//! Dense complex matrices and the small amount of vector algebra the rest of
//! the crate needs.

use std::ops::{Add, Index, Mul, Sub};

use faer::{Col, ColRef, Mat, MatRef};

use crate::c64;
use crate::error::{Error, Result};

/// A dense square complex matrix with finite entries.
///
/// Used for every operator in the crate: frozen Hamiltonians, metrics, the
/// Feshbach-Villars blocks and the energy-independent operators `K`, `L`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    inner: Mat<c64>,
}

impl OperatorMatrix {
    /// Wraps a faer matrix, checking that it is square and finite.
    pub fn from_mat(inner: Mat<c64>) -> Result<Self> {
        if inner.nrows() != inner.ncols() {
            return Err(Error::NotSquare {
                rows: inner.nrows(),
                cols: inner.ncols(),
            });
        }
        if !all_finite(inner.as_ref()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { inner })
    }

    /// Builds a matrix from row-major nested vectors.
    pub fn from_rows(rows: &[Vec<c64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::NotSquare {
                rows: n,
                cols: bad.len(),
            });
        }
        Self::from_mat(Mat::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Builds a real matrix from row-major nested vectors.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<c64>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| c64::new(v, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub(crate) fn from_fn(n: usize, f: impl FnMut(usize, usize) -> c64) -> Self {
        let inner = Mat::from_fn(n, n, f);
        debug_assert!(all_finite(inner.as_ref()));
        Self { inner }
    }

    pub(crate) fn from_mat_unchecked(inner: Mat<c64>) -> Self {
        debug_assert_eq!(inner.nrows(), inner.ncols());
        Self { inner }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: Mat::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: Mat::identity(n, n),
        }
    }

    pub fn diagonal(values: &[c64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { c64::new(0.0, 0.0) })
    }

    pub fn real_diagonal(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| {
            if i == j {
                c64::new(values[i], 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        })
    }

    /// Assembles `[[a, b], [c, d]]` from four equally sized blocks.
    pub fn from_blocks(a: &OperatorMatrix, b: &OperatorMatrix, c: &OperatorMatrix, d: &OperatorMatrix) -> Result<Self> {
        let n = a.dim();
        for m in [b, c, d] {
            if m.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.dim(),
                });
            }
        }
        Ok(Self::from_fn(2 * n, |i, j| {
            let block = match (i < n, j < n) {
                (true, true) => a,
                (true, false) => b,
                (false, true) => c,
                (false, false) => d,
            };
            block[(i % n, j % n)]
        }))
    }

    /// Extracts the `n x n` block starting at `(row, col)`.
    pub fn block(&self, row: usize, col: usize, n: usize) -> Self {
        Self::from_fn(n, |i, j| self.inner[(row + i, col + j)])
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_ref(&self) -> MatRef<'_, c64> {
        self.inner.as_ref()
    }

    pub fn as_mat(&self) -> &Mat<c64> {
        &self.inner
    }

    pub fn into_mat(self) -> Mat<c64> {
        self.inner
    }

    pub fn adjoint(&self) -> Self {
        Self {
            inner: self.inner.adjoint().to_owned(),
        }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.inner.norm_l2()
    }

    /// `‖A − A†‖` in the Frobenius norm.
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.inner - self.inner.adjoint()).norm_l2()
    }

    /// True when every entry has an exactly zero imaginary part.
    pub fn is_real(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| self.inner[(i, j)].im == 0.0))
    }

    pub fn scaled(&self, factor: c64) -> Self {
        Self {
            inner: Mat::from_fn(self.dim(), self.dim(), |i, j| self.inner[(i, j)] * factor),
        }
    }

    pub fn apply(&self, v: ColRef<'_, c64>) -> Col<c64> {
        &self.inner * v
    }

    /// Singular values in non-increasing order.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        self.inner
            .singular_values()
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))
    }

    /// 2-norm condition number; infinite for singular matrices.
    pub fn condition_number(&self) -> Result<f64> {
        let s = self.singular_values()?;
        Ok(condition_from_singular_values(&s))
    }

    /// Eigenvalues of the Hermitian part `(A + A†)/2`, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        let sym = Mat::from_fn(self.dim(), self.dim(), |i, j| {
            (self.inner[(i, j)] + self.inner[(j, i)].conj()) * 0.5
        });
        sym.self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))
    }
}

impl Index<(usize, usize)> for OperatorMatrix {
    type Output = c64;

    fn index(&self, idx: (usize, usize)) -> &c64 {
        &self.inner[idx]
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in product");
        OperatorMatrix {
            inner: &self.inner * &rhs.inner,
        }
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in sum");
        OperatorMatrix {
            inner: &self.inner + &rhs.inner,
        }
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in difference");
        OperatorMatrix {
            inner: &self.inner - &rhs.inner,
        }
    }
}

pub(crate) fn all_finite(m: MatRef<'_, c64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].is_finite()))
}

pub(crate) fn condition_from_singular_values(s: &[f64]) -> f64 {
    match (s.first(), s.last()) {
        (Some(&max), Some(&min)) if min > 0.0 => max / min,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// `⟨a|b⟩ = Σ conj(aᵢ) bᵢ`.
pub fn inner(a: ColRef<'_, c64>, b: ColRef<'_, c64>) -> c64 {
    assert_eq!(a.nrows(), b.nrows(), "dimension mismatch in inner product");
    (0..a.nrows()).fold(c64::new(0.0, 0.0), |acc, i| acc + a[i].conj() * b[i])
}

pub fn vector_norm(v: ColRef<'_, c64>) -> f64 {
    v.norm_l2()
}

/// `Σₖ |aₖ⟩ wₖ ⟨bₖ|` for the columns of `a` and `b`.
pub fn weighted_outer_sum(a: MatRef<'_, c64>, weights: &[c64], b: MatRef<'_, c64>) -> Mat<c64> {
    assert_eq!(a.ncols(), weights.len());
    assert_eq!(b.ncols(), weights.len());
    let scaled = Mat::from_fn(a.nrows(), a.ncols(), |i, k| a[(i, k)] * weights[k]);
    &scaled * b.adjoint()
}

/// Packs column vectors side by side.
pub fn columns_to_mat(n: usize, cols: &[Col<c64>]) -> Mat<c64> {
    Mat::from_fn(n, cols.len(), |i, k| cols[k][i])
}
