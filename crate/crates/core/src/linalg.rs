//! Small dense linear algebra: row-major matrices, LU with partial
//! pivoting, and a cyclic Jacobi eigensolver for symmetric matrices.
//!
//! Problem sizes here are tens to a few hundred rows, so nothing is blocked
//! or vectorised.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot column {column})")]
    Singular { column: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from row vectors. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix { rows: rows.len(), cols, data: rows.concat() }
    }

    /// Row-major flat data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · v`.
    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `vᵀ · self`.
    pub fn vecmat(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "vecmat dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &w) in v.iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += w * x;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    /// Scales column `j` by `d[j]`, i.e. `self · diag(d)`.
    pub fn scale_columns(&self, d: &[T]) -> Self {
        assert_eq!(self.cols, d.len());
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * d[j])
    }

    /// Scales row `i` by `d[i]`, i.e. `diag(d) · self`.
    pub fn scale_rows(&self, d: &[T]) -> Self {
        assert_eq!(self.rows, d.len());
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * d[i])
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(&self.data)
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
    }

    /// Symmetric part `(A + Aᵀ)/2`.
    pub fn symmetric_part(&self) -> Self {
        assert!(self.is_square());
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| half * (self[(i, j)] + self[(j, i)]))
    }

    pub fn lu(&self) -> Result<Lu<T>, LinalgError> {
        Lu::factor(self)
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        self.lu()?.solve(b)
    }

    pub fn inverse(&self) -> Result<Self, LinalgError> {
        let lu = self.lu()?;
        let n = self.rows;
        let mut inv = Self::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = T::zero());
            e[j] = T::one();
            let col = lu.solve(&e)?;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }

    /// Numerical rank by Gaussian elimination with full pivoting.
    pub fn rank(&self) -> usize {
        let mut a = self.clone();
        let scale = a.max_abs();
        if scale == T::zero() {
            return 0;
        }
        let tol = scale * T::epsilon() * T::from_count(self.rows.max(self.cols)) * T::lit(64.0);
        let (m, n) = (a.rows, a.cols);
        let mut rank = 0;
        let mut col_done = vec![false; n];
        let mut row_done = vec![false; m];
        loop {
            let mut best = (T::zero(), usize::MAX, usize::MAX);
            for i in (0..m).filter(|&i| !row_done[i]) {
                for j in (0..n).filter(|&j| !col_done[j]) {
                    if a[(i, j)].abs() > best.0 {
                        best = (a[(i, j)].abs(), i, j);
                    }
                }
            }
            if best.0 <= tol {
                return rank;
            }
            let (_, p, q) = best;
            row_done[p] = true;
            col_done[q] = true;
            rank += 1;
            for i in (0..m).filter(|&i| !row_done[i]) {
                let f = a[(i, q)] / a[(p, q)];
                for j in 0..n {
                    let v = a[(p, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
    }

    /// Largest singular value, via the top eigenvalue of `AᵀA`.
    pub fn spectral_norm(&self) -> T {
        let gram = self.transpose().matmul(self);
        let eig = symmetric_eigenvalues(&gram);
        eig.last().copied().unwrap_or_else(T::zero).max(T::zero()).sqrt()
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

/// LU factorisation `PA = LU` with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    pub fn factor(a: &Matrix<T>) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::Dimension { expected: a.rows, got: a.cols });
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let tol = a.max_abs() * T::epsilon() * T::from_count(n.max(1)) * T::lit(16.0);
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= tol {
                return Err(LinalgError::Singular { column: k });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f == T::zero() {
                    continue;
                }
                for j in k + 1..n {
                    let v = lu[(k, j)];
                    lu[(i, j)] -= f * v;
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        let n = self.lu.rows;
        if b.len() != n {
            return Err(LinalgError::Dimension { expected: n, got: b.len() });
        }
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.lu.row(i)[..i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s = dot(&self.lu.row(i)[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        Ok(x)
    }
}

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
///
/// Only the symmetric part of `a` is used.
pub fn symmetric_eigenvalues<T: Scalar>(a: &Matrix<T>) -> Vec<T> {
    assert!(a.is_square(), "eigenvalues of a non-square matrix");
    let n = a.rows();
    let mut m = a.symmetric_part();
    let scale = m.frobenius();
    if n == 0 {
        return Vec::new();
    }
    let tiny = scale * T::epsilon() * T::lit(1e-3);
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off.sqrt() <= tiny || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= tiny * T::epsilon() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    eig
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solve_with_pivoting() {
        let a = Matrix::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]);
        let x_true = [1.0, -2.0, 0.5];
        let b = a.matvec(&x_true);
        let x = a.solve(&b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert_relative_eq!(u, v, epsilon = 1e-14);
        }
    }

    #[test]
    fn singular_detected() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(a.solve(&[1.0, 1.0]), Err(LinalgError::Singular { .. })));
        assert_eq!(a.rank(), 1);
    }

    #[test]
    fn inverse_roundtrip() {
        let a = Matrix::from_rows(&[vec![4.0, 1.0], vec![2.0, 3.0]]);
        let prod = a.matmul(&a.inverse().unwrap());
        assert!(prod.sub(&Matrix::identity(2)).max_abs() < 1e-15);
    }

    #[test]
    fn jacobi_matches_closed_form() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let e = symmetric_eigenvalues(&a);
        assert_relative_eq!(e[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(e[1], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn jacobi_uses_symmetric_part() {
        // Rotation generator has zero symmetric part.
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        assert_eq!(symmetric_eigenvalues(&a), vec![0.0, 0.0]);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = Matrix::diagonal(&[1.0, -5.0, 2.0]);
        assert_relative_eq!(a.spectral_norm(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn vecmat_is_transpose_matvec() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let v = [1.0, -1.0, 2.0];
        assert_eq!(a.vecmat(&v), a.transpose().matvec(&v));
    }
}
