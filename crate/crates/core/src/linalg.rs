//! Small dense matrices and index tensors.
//!
//! Parameter dimensions in this crate are tiny (n rarely exceeds four), so
//! everything is stored row-major in a flat `Vec` and factorized with
//! textbook algorithms: Cholesky for SPD systems, partially pivoted LU for
//! general inverses, cyclic Jacobi for symmetric eigenproblems.

use std::ops::{Index, IndexMut};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn to_rows_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.as_f64()).collect())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect())
    }

    /// Computes `xᵀ A y`.
    pub fn quadratic_form(&self, x: &[T], y: &[T]) -> Result<T> {
        let ay = self.mul_vec(y)?;
        if x.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: x.len(),
            });
        }
        Ok(x.iter().zip(&ay).map(|(&a, &b)| a * b).sum())
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        let half = T::of(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)]) * half
        })
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(&self.data)
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
            });
        }
        Ok(())
    }

    fn check_square(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        Ok(())
    }

    /// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`, or `None` if a
    /// pivot is not strictly positive.
    pub fn cholesky(&self) -> Option<Self> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Some(l)
    }

    /// Inverse of a symmetric positive definite matrix via Cholesky.
    pub fn spd_inverse(&self) -> Result<Self> {
        self.check_square()?;
        let l = self.cholesky().ok_or(Error::Singular)?;
        let n = self.rows;
        // Solve L Lᵀ X = I column by column.
        let mut inv = Self::zeros(n, n);
        for c in 0..n {
            let mut y = vec![T::zero(); n];
            for i in 0..n {
                let mut s = if i == c { T::one() } else { T::zero() };
                for k in 0..i {
                    s -= l[(i, k)] * y[k];
                }
                y[i] = s / l[(i, i)];
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= l[(k, i)] * inv[(k, c)];
                }
                inv[(i, c)] = s / l[(i, i)];
            }
        }
        Ok(inv.symmetrized())
    }

    /// General inverse by LU decomposition with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        self.check_square()?;
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.max_abs().max(T::min_positive_value());
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| {
                    a[(x, col)]
                        .abs()
                        .partial_cmp(&a[(y, col)].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap_or(col);
            if a[(pivot, col)].abs() <= T::epsilon() * scale * T::of_usize(n) {
                return Err(Error::Singular);
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let p = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= p;
                inv[(col, j)] /= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f == T::zero() {
                    continue;
                }
                for j in 0..n {
                    let av = a[(col, j)];
                    let iv = inv[(col, j)];
                    a[(r, j)] -= f * av;
                    inv[(r, j)] -= f * iv;
                }
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Eigen-decomposition of a symmetric matrix by cyclic Jacobi sweeps.
    ///
    /// Returns eigenvalues in ascending order and the matching eigenvectors
    /// as columns of the second matrix.
    pub fn symmetric_eigen(&self) -> Result<(Vec<T>, Self)> {
        self.check_square()?;
        let n = self.rows;
        let mut a = self.symmetrized();
        let mut v = Self::identity(n);
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in i + 1..n {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            let diag: T = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum();
            if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::of(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| {
            a[(x, x)]
                .partial_cmp(&a[(y, y)])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let vectors = Self::from_fn(n, n, |r, c| v[(r, order[c])]);
        Ok((values, vectors))
    }

    /// Ratio of largest to smallest absolute eigenvalue of a symmetric matrix.
    pub fn condition_number(&self) -> Result<T> {
        let (vals, _) = self.symmetric_eigen()?;
        let lo = vals.iter().fold(T::infinity(), |m, v| m.min(v.abs()));
        let hi = vals.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        Ok(if lo == T::zero() { T::infinity() } else { hi / lo })
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

impl<T: Scalar> Serialize for Matrix<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows_f64().serialize(s)
    }
}

/// Three-index array with shape `(d0, d1, d2)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    dims: [usize; 3],
    data: Vec<T>,
}

impl<T: Scalar> Tensor3<T> {
    pub fn zeros(d0: usize, d1: usize, d2: usize) -> Self {
        Self {
            dims: [d0, d1, d2],
            data: vec![T::zero(); d0 * d1 * d2],
        }
    }

    /// Cube of side `n`.
    pub fn cube(n: usize) -> Self {
        Self::zeros(n, n, n)
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Entrywise `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        Self {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + s * b)
                .collect(),
        }
    }

    pub fn to_nested_f64(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.dims[0])
            .map(|i| {
                (0..self.dims[1])
                    .map(|j| (0..self.dims[2]).map(|k| self[(i, j, k)].as_f64()).collect())
                    .collect()
            })
            .collect()
    }
}

impl<T> Index<(usize, usize, usize)> for Tensor3<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &T {
        &self.data[(i * self.dims[1] + j) * self.dims[2] + k]
    }
}

impl<T> IndexMut<(usize, usize, usize)> for Tensor3<T> {
    #[inline]
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut T {
        &mut self.data[(i * self.dims[1] + j) * self.dims[2] + k]
    }
}

impl<T: Scalar> Serialize for Tensor3<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_nested_f64().serialize(s)
    }
}

/// Four-index cube of side `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n * n * n],
        }
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

impl<T> Index<[usize; 4]> for Tensor4<T> {
    type Output = T;
    #[inline]
    fn index(&self, [a, b, c, d]: [usize; 4]) -> &T {
        &self.data[((a * self.n + b) * self.n + c) * self.n + d]
    }
}

impl<T> IndexMut<[usize; 4]> for Tensor4<T> {
    #[inline]
    fn index_mut(&mut self, [a, b, c, d]: [usize; 4]) -> &mut T {
        &mut self.data[((a * self.n + b) * self.n + c) * self.n + d]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cholesky_inverse_of_diagonal() {
        let m = Matrix::<f64>::from_diag(&[4.0, 0.5]);
        let inv = m.spd_inverse().unwrap();
        assert!((inv[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((inv[(1, 1)] - 2.0).abs() < 1e-15);
        assert_eq!(inv[(0, 1)], 0.0);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(m.cholesky().is_none());
        assert_eq!(m.spd_inverse(), Err(Error::Singular));
    }

    #[test]
    fn lu_inverse_handles_pivoting() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        let inv = m.inverse().unwrap();
        let id = m.mul(&inv).unwrap();
        assert!(id.max_abs_diff(&Matrix::identity(2)) < 1e-15);
    }

    #[test]
    fn eigen_of_known_matrix() {
        let m = Matrix::<f64>::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (vals, vecs) = m.symmetric_eigen().unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
        let v0 = vecs.column(0);
        assert!((v0[0] + v0[1]).abs() < 1e-14);
    }

    #[test]
    fn works_in_single_precision() {
        let m: Matrix<f32> = Matrix::from_diag(&[2.0, 8.0]);
        let inv = m.spd_inverse().unwrap();
        assert!((inv[(1, 1)] - 0.125).abs() < 1e-7);
    }

    fn spd_matrix(n: usize) -> impl Strategy<Value = Matrix<f64>> {
        proptest::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
            let a = Matrix::from_fn(n, n, |i, j| v[i * n + j]);
            let mut s = a.transpose().mul(&a).unwrap();
            for i in 0..n {
                s[(i, i)] += 0.5;
            }
            s
        })
    }

    proptest! {
        #[test]
        fn spd_inverse_is_inverse(m in (1usize..5).prop_flat_map(spd_matrix)) {
            let inv = m.spd_inverse().unwrap();
            let id = m.mul(&inv).unwrap();
            prop_assert!(id.max_abs_diff(&Matrix::identity(m.rows())) < 1e-10);
        }

        #[test]
        fn eigen_reconstructs(m in (1usize..5).prop_flat_map(spd_matrix)) {
            let (vals, vecs) = m.symmetric_eigen().unwrap();
            let d = Matrix::from_diag(&vals);
            let back = vecs.mul(&d).unwrap().mul(&vecs.transpose()).unwrap();
            prop_assert!(back.max_abs_diff(&m) < 1e-10);
            prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
