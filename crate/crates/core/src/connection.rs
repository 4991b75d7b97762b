//! α-connections, the skewness tensor and Christoffel symbols.
//!
//! Everything at a base point comes from one joint expectation of
//! `∂_i l ∂_j l`, `∂_i∂_j l ∂_k l` and `∂_i l ∂_j l ∂_k l`, so the metric,
//! connection and skewness tensor share the same quadrature nodes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::ParametricFamily;
use crate::integrate::{expect_vec, Budget};
use crate::linalg::{Matrix, Tensor3};
use crate::metric::{FisherForm, FisherMatrix};
use crate::scalar::{vec_f64, Scalar};

/// `Γ_{ij,k}` with all indices down.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectionCoefficients<T: Scalar> {
    pub at: Vec<T>,
    pub alpha: T,
    /// Indexed `(i, j, k)`; symmetric in `(i, j)`.
    pub entries: Tensor3<T>,
    /// `max |Γ_{ij,k} − Γ_{ji,k}|` before symmetrization.
    pub asymmetry: T,
}

/// `T_ijk = E[∂_i l ∂_j l ∂_k l]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkewnessTensor<T: Scalar> {
    pub at: Vec<T>,
    pub entries: Tensor3<T>,
    /// Largest deviation from full symmetry before symmetrization.
    pub asymmetry: T,
}

/// `Γ^k_{ij}`, stored with the upper index first: `entries[(k, i, j)]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Christoffel<T: Scalar> {
    pub at: Vec<T>,
    pub alpha: T,
    pub entries: Tensor3<T>,
}

/// Raw ingredients at one base point.
#[derive(Debug, Clone)]
pub struct LocalGeometry<T: Scalar> {
    pub at: Vec<T>,
    /// `E[∂_i l ∂_j l]`, not yet PD-checked.
    pub metric: Matrix<T>,
    /// `E[∂_i∂_j l ∂_k l]`.
    pub hessian_score: Tensor3<T>,
    /// `E[∂_i l ∂_j l ∂_k l]`, unsymmetrized.
    pub score_cube: Tensor3<T>,
    pub error_estimate: T,
    pub converged: bool,
}

/// Evaluates the metric, `E[∂∂l ∂l]` and `E[∂l ∂l ∂l]` in one pass.
pub fn local_geometry<T, F>(family: &F, xi: &[T], budget: &Budget) -> Result<LocalGeometry<T>>
where
    T: Scalar,
    F: ParametricFamily<T> + ?Sized,
{
    let n = family.dim();
    let n2 = n * n;
    let n3 = n2 * n;
    let r = expect_vec(
        family,
        xi,
        n2 + 2 * n3,
        |x, out| {
            let s = family.score_raw(x, xi);
            let h = family.hessian_raw(x, xi);
            for i in 0..n {
                for j in 0..n {
                    let sij = s[i] * s[j];
                    out[i * n + j] = sij;
                    for k in 0..n {
                        let idx = (i * n + j) * n + k;
                        out[n2 + idx] = h[(i, j)] * s[k];
                        out[n2 + n3 + idx] = sij * s[k];
                    }
                }
            }
        },
        budget,
    )?;
    let v = &r.values;
    Ok(LocalGeometry {
        at: xi.to_vec(),
        metric: Matrix::from_fn(n, n, |i, j| v[i * n + j]).symmetrized(),
        hessian_score: Tensor3::from_fn([n, n, n], |i, j, k| v[n2 + (i * n + j) * n + k]),
        score_cube: Tensor3::from_fn([n, n, n], |i, j, k| v[n2 + n3 + (i * n + j) * n + k]),
        error_estimate: r.max_error(),
        converged: r.converged,
    })
}

impl<T: Scalar> LocalGeometry<T> {
    pub fn dim(&self) -> usize {
        self.at.len()
    }

    pub fn fisher(&self) -> Result<FisherMatrix<T>> {
        FisherMatrix::new(self.at.clone(), self.metric.clone(), FisherForm::ScoreOuter)
    }

    /// `Γ^(α)_{ij,k} = E[(∂_i∂_j l + (1−α)/2 ∂_i l ∂_j l) ∂_k l]`.
    pub fn connection(&self, alpha: T) -> ConnectionCoefficients<T> {
        let c = (T::one() - alpha) / T::of(2.0);
        let raw = self.hessian_score.axpy(c, &self.score_cube);
        let (entries, asymmetry) = symmetrize_lower(&raw);
        ConnectionCoefficients {
            at: self.at.clone(),
            alpha,
            entries,
            asymmetry,
        }
    }

    pub fn skewness(&self) -> SkewnessTensor<T> {
        let (entries, asymmetry) = symmetrize_full(&self.score_cube);
        SkewnessTensor {
            at: self.at.clone(),
            entries,
            asymmetry,
        }
    }

    pub fn christoffel(&self, alpha: T) -> Result<Christoffel<T>> {
        christoffel_second_kind(&self.connection(alpha), &self.fisher()?)
    }
}

fn symmetrize_lower<T: Scalar>(t: &Tensor3<T>) -> (Tensor3<T>, T) {
    let n = t.dims()[0];
    let mut asym = T::zero();
    let half = T::of(0.5);
    let out = Tensor3::from_fn([n, n, n], |i, j, k| {
        asym = asym.max((t[(i, j, k)] - t[(j, i, k)]).abs());
        half * (t[(i, j, k)] + t[(j, i, k)])
    });
    (out, asym)
}

fn symmetrize_full<T: Scalar>(t: &Tensor3<T>) -> (Tensor3<T>, T) {
    let n = t.dims()[0];
    let mut asym = T::zero();
    let out = Tensor3::from_fn([n, n, n], |i, j, k| {
        let perms = [
            t[(i, j, k)],
            t[(i, k, j)],
            t[(j, i, k)],
            t[(j, k, i)],
            t[(k, i, j)],
            t[(k, j, i)],
        ];
        for p in &perms {
            asym = asym.max((*p - perms[0]).abs());
        }
        perms.iter().copied().sum::<T>() / T::of(6.0)
    });
    (out, asym)
}

pub fn alpha_connection<T, F>(
    family: &F,
    xi: &[T],
    alpha: T,
    budget: &Budget,
) -> Result<ConnectionCoefficients<T>>
where
    T: Scalar,
    F: ParametricFamily<T> + ?Sized,
{
    Ok(local_geometry(family, xi, budget)?.connection(alpha))
}

pub fn skewness_tensor<T, F>(family: &F, xi: &[T], budget: &Budget) -> Result<SkewnessTensor<T>>
where
    T: Scalar,
    F: ParametricFamily<T> + ?Sized,
{
    Ok(local_geometry(family, xi, budget)?.skewness())
}

fn same_point<T: Scalar>(a: &[T], b: &[T]) -> Result<()> {
    if a != b {
        return Err(Error::BasePointMismatch {
            left: vec_f64(a),
            right: vec_f64(b),
        });
    }
    Ok(())
}

/// `Γ^(β)_{ij,k} = Γ^(α)_{ij,k} + (α − β)/2 · T_ijk`.
pub fn convert_connection<T: Scalar>(
    gamma: &ConnectionCoefficients<T>,
    skew: &SkewnessTensor<T>,
    beta: T,
) -> Result<ConnectionCoefficients<T>> {
    same_point(&gamma.at, &skew.at)?;
    if gamma.alpha == beta {
        return Ok(ConnectionCoefficients {
            alpha: beta,
            ..gamma.clone()
        });
    }
    let c = (gamma.alpha - beta) / T::of(2.0);
    Ok(ConnectionCoefficients {
        at: gamma.at.clone(),
        alpha: beta,
        entries: gamma.entries.axpy(c, &skew.entries),
        asymmetry: gamma.asymmetry,
    })
}

/// `Γ^k_{ij} = g^{km} Γ_{ij,m}`.
pub fn christoffel_second_kind<T: Scalar>(
    gamma: &ConnectionCoefficients<T>,
    g: &FisherMatrix<T>,
) -> Result<Christoffel<T>> {
    same_point(&gamma.at, g.at())?;
    let inv = g.inverse()?;
    Ok(Christoffel {
        at: gamma.at.clone(),
        alpha: gamma.alpha,
        entries: raise_first(&gamma.entries, &inv),
    })
}

/// `out[(k, i, j)] = Σ_m inv[(k, m)] · t[(i, j, m)]`.
pub(crate) fn raise_first<T: Scalar>(t: &Tensor3<T>, inv: &Matrix<T>) -> Tensor3<T> {
    let n = inv.rows();
    Tensor3::from_fn([n, n, n], |k, i, j| (0..n).map(|m| inv[(k, m)] * t[(i, j, m)]).sum())
}

/// `∂_k g_ij − Γ^(0)_{ki,j} − Γ^(0)_{kj,i}` at ξ, indexed `(k, i, j)`.
///
/// The metric derivative uses a five-point stencil with step
/// `h·max(1, |ξ_k|)`; a tighter budget than usual keeps the quadrature
/// noise below the stencil's truncation error.
pub fn metric_compatibility_residual<T, F>(
    family: &F,
    xi: &[T],
    h: T,
    budget: &Budget,
) -> Result<Tensor3<T>>
where
    T: Scalar,
    F: ParametricFamily<T> + ?Sized,
{
    let n = family.dim();
    let gamma = alpha_connection(family, xi, T::zero(), budget)?;
    let metric_at = |p: &[T]| -> Result<Matrix<T>> {
        if !family.domain().contains(p) {
            return Err(Error::StencilOutsideDomain { xi: vec_f64(p) });
        }
        Ok(local_geometry(family, p, budget)?.metric)
    };
    let mut out = Tensor3::cube(n);
    for k in 0..n {
        let step = h * T::one().max(xi[k].abs());
        let at = |s: T| {
            let mut p = xi.to_vec();
            p[k] += s * step;
            metric_at(&p)
        };
        let (p1, m1, p2, m2) = (at(T::one())?, at(-T::one())?, at(T::of(2.0))?, at(T::of(-2.0))?);
        for i in 0..n {
            for j in 0..n {
                let d = (T::of(8.0) * (p1[(i, j)] - m1[(i, j)]) - (p2[(i, j)] - m2[(i, j)]))
                    / (T::of(12.0) * step);
                out[(k, i, j)] = d - gamma.entries[(k, i, j)] - gamma.entries[(k, j, i)];
            }
        }
    }
    Ok(out)
}
