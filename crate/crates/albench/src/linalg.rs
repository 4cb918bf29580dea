//! Small dense linear algebra used by the regressors.
//!
//! The systems solved here are tiny (tens of rows), so a plain row-major
//! matrix with an unblocked Cholesky is all that is needed.

use crate::error::{Error, Result};
use crate::num::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<R> {
    rows: usize,
    cols: usize,
    data: Vec<R>,
}

impl<R: Real> Matrix<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![R::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<R>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == ncols));
        Matrix {
            rows: rows.len(),
            cols: ncols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> R {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: R) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[R] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `self * x` for a vector `x` of length `cols`.
    pub fn matvec(&self, x: &[R]) -> Vec<R> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| dot(self.row(i), x))
            .collect()
    }
}

pub fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn euclidean_distance<R: Real>(a: &[R], b: &[R]) -> R {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<R>()
        .sqrt()
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<R> {
    factor: Matrix<R>,
}

impl<R: Real> Cholesky<R> {
    /// Factorizes `a = L L^T`. Fails if a non-positive pivot is met.
    pub fn new(a: &Matrix<R>) -> Result<Self> {
        assert_eq!(a.rows(), a.cols());
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a.get(i, j);
                for k in 0..j {
                    sum = sum - l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if sum <= R::zero() {
                        return Err(Error::SingularSystem { escalated: false });
                    }
                    l.set(i, j, sum.sqrt());
                } else {
                    l.set(i, j, sum / l.get(j, j));
                }
            }
        }
        Ok(Cholesky { factor: l })
    }

    pub fn factor(&self) -> &Matrix<R> {
        &self.factor
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &[R]) -> Vec<R> {
        let n = self.factor.rows();
        assert_eq!(b.len(), n);
        let mut y = vec![R::zero(); n];
        for i in 0..n {
            let mut sum = b[i];
            for k in 0..i {
                sum = sum - self.factor.get(i, k) * y[k];
            }
            y[i] = sum / self.factor.get(i, i);
        }
        y
    }

    /// Solves `L^T x = b`.
    pub fn solve_upper(&self, b: &[R]) -> Vec<R> {
        let n = self.factor.rows();
        assert_eq!(b.len(), n);
        let mut x = vec![R::zero(); n];
        for i in (0..n).rev() {
            let mut sum = b[i];
            for k in i + 1..n {
                sum = sum - self.factor.get(k, i) * x[k];
            }
            x[i] = sum / self.factor.get(i, i);
        }
        x
    }

    /// Solves `A x = b` with `A = L L^T`.
    pub fn solve(&self, b: &[R]) -> Vec<R> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `A^{-1}` reconstructed column by column.
    pub fn inverse(&self) -> Matrix<R> {
        let n = self.factor.rows();
        let mut inv = Matrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![R::zero(); n];
            e[j] = R::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        inv
    }

    /// Sum of the logs of the diagonal of `L` (half the log determinant of `A`).
    pub fn log_diag_sum(&self) -> R {
        (0..self.factor.rows())
            .map(|i| self.factor.get(i, i).ln())
            .sum()
    }
}

/// Least-squares solve of `X beta = y` via the normal equations.
///
/// A tiny ridge is escalated only if the Gram matrix fails to factorize.
pub fn least_squares<R: Real>(x: &Matrix<R>, y: &[R]) -> Result<Vec<R>> {
    assert_eq!(x.rows(), y.len());
    let p = x.cols();
    let mut gram = Matrix::zeros(p, p);
    let mut rhs = vec![R::zero(); p];
    for i in 0..p {
        for j in 0..p {
            let mut s = R::zero();
            for r in 0..x.rows() {
                s = s + x.get(r, i) * x.get(r, j);
            }
            gram.set(i, j, s);
        }
        for r in 0..x.rows() {
            rhs[i] = rhs[i] + x.get(r, i) * y[r];
        }
    }
    let mut ridge = R::zero();
    for _ in 0..8 {
        let mut reg = gram.clone();
        for i in 0..p {
            reg.set(i, i, reg.get(i, i) + ridge);
        }
        if let Ok(chol) = Cholesky::new(&reg) {
            return Ok(chol.solve(&rhs));
        }
        ridge = if ridge == R::zero() {
            R::lit(1e-12)
        } else {
            ridge * R::lit(10.0)
        };
    }
    Err(Error::SingularSystem { escalated: true })
}
