//! Parametric families: the statistical manifolds everything else works on.

mod builtin;
mod domain;
pub(crate) mod exponential;
mod mixture;
pub(crate) mod sampling;
pub mod spec;
mod validate;

use std::sync::Arc;

pub use builtin::{
    Bernoulli, Categorical, Gaussian, GaussianKnownSigma, Poisson, uniform_beta_mixture,
};
pub use domain::{Domain, Support, DOMAIN_MARGIN};
pub use exponential::{make_exponential_family, ExponentialFamily, ExponentialFamilySpec};
pub use mixture::{make_mixture_family, MixtureFamily, MixtureFamilySpec};
pub use validate::{validate_family, FamilyDiagnostics};

use crate::error::Result;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Real function of the sample point, shared between threads.
pub type SampleFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Shared handle to a family.
pub type FamilyRef<T> = Arc<dyn ParametricFamily<T>>;

/// A family `p(x; ξ)` of densities (or mass functions) on a common support,
/// smoothly indexed by a parameter ξ in an open domain.
///
/// Implementors provide the raw log-density and a sampler; scores and
/// Hessians fall back to central finite differences unless overridden.
/// The checked entry points (`log_density`, `score`, …) validate ξ against
/// the domain and `x` against the support.
pub trait ParametricFamily<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    fn domain(&self) -> &Domain<T>;

    fn support(&self) -> &Support<T>;

    /// `log p(x; ξ)` without argument checks.
    fn log_density_raw(&self, x: T, xi: &[T]) -> T;

    /// Analytic score, when the family knows it.
    fn analytic_score(&self, _x: T, _xi: &[T]) -> Option<Vec<T>> {
        None
    }

    /// Analytic `∂_i ∂_j log p`, when the family knows it.
    fn analytic_hessian(&self, _x: T, _xi: &[T]) -> Option<Matrix<T>> {
        None
    }

    fn has_analytic_score(&self) -> bool {
        false
    }

    /// Draws `count` independent samples; deterministic in `seed`.
    fn sample(&self, xi: &[T], seed: u64, count: usize) -> Result<Vec<T>>;

    /// Rough centre and spread of `p(·; ξ)`, used to place quadrature panels.
    fn location_scale(&self, _xi: &[T]) -> (T, T) {
        (T::zero(), T::one())
    }

    fn dim(&self) -> usize {
        self.domain().dim()
    }

    fn log_density(&self, x: T, xi: &[T]) -> Result<T> {
        self.domain().check(xi)?;
        self.support().check(x)?;
        Ok(self.log_density_raw(x, xi))
    }

    fn density(&self, x: T, xi: &[T]) -> Result<T> {
        Ok(self.log_density(x, xi)?.exp())
    }

    fn score(&self, x: T, xi: &[T]) -> Result<Vec<T>> {
        self.domain().check(xi)?;
        self.support().check(x)?;
        Ok(self.score_raw(x, xi))
    }

    fn score_raw(&self, x: T, xi: &[T]) -> Vec<T> {
        self.analytic_score(x, xi)
            .unwrap_or_else(|| finite_difference_score(self, x, xi))
    }

    /// `∂_i ∂_j log p(x; ξ)`, symmetrized.
    fn hessian(&self, x: T, xi: &[T]) -> Result<Matrix<T>> {
        self.domain().check(xi)?;
        self.support().check(x)?;
        Ok(self.hessian_raw(x, xi))
    }

    fn hessian_raw(&self, x: T, xi: &[T]) -> Matrix<T> {
        self.analytic_hessian(x, xi)
            .unwrap_or_else(|| finite_difference_hessian(self, x, xi))
    }

    /// `(1/N) Σ ∂ l(x_t; ξ)` without argument checks.
    fn mean_score(&self, xs: &[T], xi: &[T]) -> Vec<T> {
        let mut acc = vec![T::zero(); xi.len()];
        for &x in xs {
            for (a, s) in acc.iter_mut().zip(self.score_raw(x, xi)) {
                *a += s;
            }
        }
        let n = T::of_usize(xs.len());
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// `Σ log p(x_t; ξ)` without argument checks.
    fn log_likelihood(&self, xs: &[T], xi: &[T]) -> T {
        xs.iter().map(|&x| self.log_density_raw(x, xi)).sum()
    }
}

/// Step used for first-derivative central differences on axis `i`:
/// `cbrt(ε) · max(1, |ξ_i|)`.
pub fn score_step<T: Scalar>(xi_i: T) -> T {
    T::epsilon().cbrt() * T::one().max(xi_i.abs())
}

/// Central-difference score from the raw log-density.
pub fn finite_difference_score<T: Scalar, F: ParametricFamily<T> + ?Sized>(
    family: &F,
    x: T,
    xi: &[T],
) -> Vec<T> {
    let mut p = xi.to_vec();
    (0..xi.len())
        .map(|i| {
            let h = score_step(xi[i]);
            p[i] = xi[i] + h;
            let up = family.log_density_raw(x, &p);
            p[i] = xi[i] - h;
            let down = family.log_density_raw(x, &p);
            p[i] = xi[i];
            (up - down) / (h + h)
        })
        .collect()
}

/// Second derivatives of `log p`.
///
/// With an analytic score this differentiates the score once more (step as
/// in [`score_step`]); otherwise it uses the second-order stencil on the
/// log-density with step `ε^{1/4}·max(1, |ξ_i|)`.
pub fn finite_difference_hessian<T: Scalar, F: ParametricFamily<T> + ?Sized>(
    family: &F,
    x: T,
    xi: &[T],
) -> Matrix<T> {
    let n = xi.len();
    let mut h = Matrix::zeros(n, n);
    let mut p = xi.to_vec();
    if family.has_analytic_score() {
        for j in 0..n {
            let step = score_step(xi[j]);
            p[j] = xi[j] + step;
            let up = family.score_raw(x, &p);
            p[j] = xi[j] - step;
            let down = family.score_raw(x, &p);
            p[j] = xi[j];
            for i in 0..n {
                h[(i, j)] = (up[i] - down[i]) / (step + step);
            }
        }
        return h.symmetrized();
    }
    let steps: Vec<T> = xi
        .iter()
        .map(|v| T::epsilon().sqrt().sqrt() * T::one().max(v.abs()))
        .collect();
    let f0 = family.log_density_raw(x, xi);
    for i in 0..n {
        let hi = steps[i];
        p[i] = xi[i] + hi;
        let up = family.log_density_raw(x, &p);
        p[i] = xi[i] - hi;
        let down = family.log_density_raw(x, &p);
        p[i] = xi[i];
        h[(i, i)] = (up - f0 - f0 + down) / (hi * hi);
        for j in i + 1..n {
            let hj = steps[j];
            let mut eval = |si: T, sj: T| {
                p[i] = xi[i] + si * hi;
                p[j] = xi[j] + sj * hj;
                let v = family.log_density_raw(x, &p);
                p[i] = xi[i];
                p[j] = xi[j];
                v
            };
            let one = T::one();
            let v = (eval(one, one) - eval(one, -one) - eval(-one, one) + eval(-one, -one))
                / (T::of(4.0) * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}
