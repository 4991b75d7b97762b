//! Fisher information metric.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::ParametricFamily;
use crate::integrate::{expect_vec, Budget};
use crate::linalg::Matrix;
use crate::scalar::{vec_f64, Scalar};

/// Smallest eigenvalue must exceed this fraction of the largest.
pub const PD_RELATIVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherForm {
    /// `E[∂_i l ∂_j l]`.
    ScoreOuter,
    /// `−E[∂_i ∂_j l]`.
    NegHessian,
}

/// Symmetric positive-definite `g_ij` at a base point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherMatrix<T: Scalar> {
    at: Vec<T>,
    entries: Matrix<T>,
    form: FisherForm,
    error_estimate: T,
    converged: bool,
}

impl<T: Scalar> FisherMatrix<T> {
    /// Symmetrizes `entries` and checks positive definiteness.
    pub fn new(at: Vec<T>, entries: Matrix<T>, form: FisherForm) -> Result<Self> {
        if !entries.is_square() || entries.rows() != at.len() {
            return Err(Error::DimensionMismatch {
                expected: at.len(),
                found: entries.rows(),
            });
        }
        let entries = entries.symmetrized();
        check_positive_definite(&entries)?;
        Ok(Self {
            at,
            entries,
            form,
            error_estimate: T::zero(),
            converged: true,
        })
    }

    pub fn at(&self) -> &[T] {
        &self.at
    }

    pub fn entries(&self) -> &Matrix<T> {
        &self.entries
    }

    pub fn form(&self) -> FisherForm {
        self.form
    }

    pub fn dim(&self) -> usize {
        self.at.len()
    }

    /// Largest quadrature error estimate over the entries.
    pub fn error_estimate(&self) -> T {
        self.error_estimate
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn inverse(&self) -> Result<Matrix<T>> {
        inverse_metric(self)
    }

    pub fn condition_number(&self) -> Result<T> {
        self.entries.condition_number()
    }

    pub fn inner_product(&self, x: &[T], y: &[T]) -> Result<T> {
        inner_product(self, x, y)
    }
}

fn check_positive_definite<T: Scalar>(m: &Matrix<T>) -> Result<()> {
    if m.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    let (values, vectors) = m.symmetric_eigen()?;
    let lo = values[0];
    let hi = values[values.len() - 1];
    if !(hi > T::zero()) || !(lo > T::of(PD_RELATIVE_TOL) * hi) {
        return Err(Error::Degenerate {
            eigenvalue: lo.as_f64(),
            direction: vec_f64(&vectors.column(0)),
        });
    }
    Ok(())
}

fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn unpack<T: Scalar>(n: usize, packed: &[T]) -> Matrix<T> {
    let mut m = Matrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            m[(i, j)] = packed[k];
            m[(j, i)] = packed[k];
            k += 1;
        }
    }
    m
}

fn assemble<T: Scalar>(
    xi: &[T],
    form: FisherForm,
    values: &[T],
    error: T,
    converged: bool,
) -> Result<FisherMatrix<T>> {
    let mut g = FisherMatrix::new(xi.to_vec(), unpack(xi.len(), values), form)?;
    g.error_estimate = error;
    g.converged = converged;
    Ok(g)
}

/// `g_ij = E_ξ[∂_i l ∂_j l]`.
pub fn fisher_matrix<T, F>(family: &F, xi: &[T], budget: &Budget) -> Result<FisherMatrix<T>>
where
    T: Scalar,
    F: ParametricFamily<T> + ?Sized,
{
    let n = family.dim();
    let r = expect_vec(
        family,
        xi,
        packed_len(n),
        |x, out| {
            let s = family.score_raw(x, xi);
            let mut k = 0;
            for i in 0..n {
                for j in i..n {
                    out[k] = s[i] * s[j];
                    k += 1;
                }
            }
        },
        budget,
    )?;
    assemble(xi, FisherForm::ScoreOuter, &r.values, r.max_error(), r.converged)
}

/// `g_ij = −E_ξ[∂_i ∂_j l]`.
pub fn fisher_matrix_hessian<T, F>(family: &F, xi: &[T], budget: &Budget) -> Result<FisherMatrix<T>>
where
    T: Scalar,
    F: ParametricFamily<T> + ?Sized,
{
    let n = family.dim();
    let r = expect_vec(
        family,
        xi,
        packed_len(n),
        |x, out| {
            let h = family.hessian_raw(x, xi);
            let mut k = 0;
            for i in 0..n {
                for j in i..n {
                    out[k] = -h[(i, j)];
                    k += 1;
                }
            }
        },
        budget,
    )?;
    assemble(xi, FisherForm::NegHessian, &r.values, r.max_error(), r.converged)
}

/// `g^{ij}`, the inverse of the metric.
pub fn inverse_metric<T: Scalar>(g: &FisherMatrix<T>) -> Result<Matrix<T>> {
    g.entries.spd_inverse()
}

/// `⟨X, Y⟩ = Xᵀ g Y`.
pub fn inner_product<T: Scalar>(g: &FisherMatrix<T>, x: &[T], y: &[T]) -> Result<T> {
    g.entries.quadratic_form(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Bernoulli, Gaussian, Poisson};

    #[test]
    fn gaussian_metric() {
        let g = fisher_matrix(&Gaussian::<f64>::new(), &[0.3, 2.0], &Budget::default()).unwrap();
        let e = g.entries();
        assert!((e[(0, 0)] - 0.25).abs() < 1e-10);
        assert!((e[(1, 1)] - 0.5).abs() < 1e-10);
        assert!(e[(0, 1)].abs() < 1e-10);
        assert!((g.inner_product(&[1.0, 0.0], &[1.0, 0.0]).unwrap() - 0.25).abs() < 1e-10);
    }

    #[test]
    fn discrete_metrics() {
        let b = Budget::default();
        let g = fisher_matrix(&Poisson::<f64>::new(), &[1.0], &b).unwrap();
        assert!((g.entries()[(0, 0)] - 1f64.exp()).abs() < 1e-12);
        assert!((g.inverse().unwrap()[(0, 0)] - (-1f64).exp()).abs() < 1e-12);
        let g = fisher_matrix_hessian(&Poisson::<f64>::new(), &[0.0], &b).unwrap();
        assert!((g.entries()[(0, 0)] - 1.0).abs() < 1e-8);
        let g = fisher_matrix(&Bernoulli::<f64>::new(), &[0.2], &b).unwrap();
        assert!((g.entries()[(0, 0)] - 1.0 / 0.16).abs() < 1e-12);
    }

    #[test]
    fn degenerate_matrix_names_direction() {
        let m = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        match FisherMatrix::<f64>::new(vec![0.0, 0.0], m, FisherForm::ScoreOuter) {
            Err(Error::Degenerate { direction, .. }) => {
                assert!((direction[0] + direction[1]).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inner_product_dimension_check() {
        let g = FisherMatrix::new(vec![0.0, 1.0], Matrix::from_diag(&[1.0, 2.0]), FisherForm::ScoreOuter)
            .unwrap();
        assert_eq!(g.inner_product(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(
            g.inner_product(&[1.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
