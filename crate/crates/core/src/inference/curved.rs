//! Curved submodels `u ↦ ξ(u)` of an ambient family.

use std::fmt;
use std::sync::Arc;

use crate::connection::local_geometry;
use crate::error::{Error, Result};
use crate::family::{score_step, Domain, FamilyRef, ParametricFamily, Support};
use crate::linalg::{Matrix, Tensor3};
use crate::metric::{FisherForm, FisherMatrix, PD_RELATIVE_TOL};
use crate::integrate::Budget;
use crate::scalar::{vec_f64, Scalar};

pub type EmbeddingFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
pub type JacobianFn<T> = Arc<dyn Fn(&[T]) -> Matrix<T> + Send + Sync>;

#[derive(Clone)]
pub struct CurvedModelSpec<T> {
    pub ambient: FamilyRef<T>,
    pub embedding: EmbeddingFn<T>,
    /// Analytic `∂ξ^κ/∂u^a` as an `n × m` matrix.
    pub jacobian: Option<JacobianFn<T>>,
    pub u_domain: Domain<T>,
}

impl<T: Scalar> fmt::Debug for CurvedModelSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CurvedModelSpec")
            .field("ambient", &self.ambient.name())
            .field("u_domain", &self.u_domain)
            .finish()
    }
}

impl<T: Scalar> CurvedModelSpec<T> {
    pub fn new(ambient: FamilyRef<T>, embedding: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static, u_domain: Domain<T>) -> Self {
        Self {
            ambient,
            embedding: Arc::new(embedding),
            jacobian: None,
            u_domain,
        }
    }

    pub fn with_jacobian(mut self, jacobian: impl Fn(&[T]) -> Matrix<T> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn model_dim(&self) -> usize {
        self.u_domain.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient.dim()
    }

    pub fn xi(&self, u: &[T]) -> Vec<T> {
        (self.embedding)(u)
    }

    /// `B = ∂ξ/∂u` (`n × m`), analytic or by central differences.
    pub fn basis(&self, u: &[T]) -> Matrix<T> {
        if let Some(j) = &self.jacobian {
            return j(u);
        }
        let (n, m) = (self.ambient_dim(), self.model_dim());
        let mut b = Matrix::zeros(n, m);
        let mut p = u.to_vec();
        for a in 0..m {
            let h = score_step(u[a]);
            p[a] = u[a] + h;
            let up = self.xi(&p);
            p[a] = u[a] - h;
            let down = self.xi(&p);
            p[a] = u[a];
            for k in 0..n {
                b[(k, a)] = (up[k] - down[k]) / (h + h);
            }
        }
        b
    }

    /// `∂_a ∂_b ξ^κ`, indexed `(κ, a, b)`.
    pub fn second_derivatives(&self, u: &[T]) -> Tensor3<T> {
        let (n, m) = (self.ambient_dim(), self.model_dim());
        let mut d = Tensor3::zeros(n, m, m);
        let mut p = u.to_vec();
        if self.jacobian.is_some() {
            for b in 0..m {
                let h = score_step(u[b]);
                p[b] = u[b] + h;
                let up = self.basis(&p);
                p[b] = u[b] - h;
                let down = self.basis(&p);
                p[b] = u[b];
                for k in 0..n {
                    for a in 0..m {
                        d[(k, a, b)] = (up[(k, a)] - down[(k, a)]) / (h + h);
                    }
                }
            }
        } else {
            let hs: Vec<T> = u.iter().map(|v| T::epsilon().sqrt().sqrt() * T::one().max(v.abs())).collect();
            let centre = self.xi(u);
            for a in 0..m {
                for b in a..m {
                    let mut at = |sa: T, sb: T| {
                        p[a] = u[a] + sa * hs[a];
                        p[b] += sb * hs[b];
                        let v = self.xi(&p);
                        p[a] = u[a];
                        p[b] = u[b];
                        v
                    };
                    let one = T::one();
                    let vals: Vec<T> = if a == b {
                        let (up, down) = (at(one, T::zero()), at(-one, T::zero()));
                        (0..n).map(|k| (up[k] - centre[k] - centre[k] + down[k]) / (hs[a] * hs[a])).collect()
                    } else {
                        let (pp, pm, mp, mm) = (at(one, one), at(one, -one), at(-one, one), at(-one, -one));
                        (0..n)
                            .map(|k| (pp[k] - pm[k] - mp[k] + mm[k]) / (T::of(4.0) * hs[a] * hs[b]))
                            .collect()
                    };
                    for k in 0..n {
                        d[(k, a, b)] = vals[k];
                        d[(k, b, a)] = vals[k];
                    }
                }
            }
        }
        d
    }

    /// The submodel as a family in `u`.
    pub fn family(&self) -> CurvedFamily<T> {
        CurvedFamily {
            spec: self.clone(),
            name: format!("curved({})", self.ambient.name()),
        }
    }
}

/// `p(x; ξ(u))` as a family over `u`.
#[derive(Clone)]
pub struct CurvedFamily<T> {
    spec: CurvedModelSpec<T>,
    name: String,
}

impl<T: Scalar> fmt::Debug for CurvedFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CurvedFamily").field("name", &self.name).finish()
    }
}

impl<T: Scalar> CurvedFamily<T> {
    pub fn spec(&self) -> &CurvedModelSpec<T> {
        &self.spec
    }
}

impl<T: Scalar> ParametricFamily<T> for CurvedFamily<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn domain(&self) -> &Domain<T> {
        &self.spec.u_domain
    }

    fn support(&self) -> &Support<T> {
        self.spec.ambient.support()
    }

    fn log_density_raw(&self, x: T, u: &[T]) -> T {
        let xi = self.spec.xi(u);
        if !self.spec.ambient.domain().contains(&xi) {
            return T::nan();
        }
        self.spec.ambient.log_density_raw(x, &xi)
    }

    fn analytic_score(&self, x: T, u: &[T]) -> Option<Vec<T>> {
        if !self.spec.ambient.has_analytic_score() {
            return None;
        }
        let xi = self.spec.xi(u);
        let s = self.spec.ambient.score_raw(x, &xi);
        let b = self.spec.basis(u);
        Some((0..b.cols()).map(|a| (0..b.rows()).map(|k| b[(k, a)] * s[k]).sum()).collect())
    }

    fn has_analytic_score(&self) -> bool {
        self.spec.ambient.has_analytic_score()
    }

    fn mean_score(&self, xs: &[T], u: &[T]) -> Vec<T> {
        let xi = self.spec.xi(u);
        let s = self.spec.ambient.mean_score(xs, &xi);
        let b = self.spec.basis(u);
        (0..b.cols()).map(|a| (0..b.rows()).map(|k| b[(k, a)] * s[k]).sum()).collect()
    }

    fn log_likelihood(&self, xs: &[T], u: &[T]) -> T {
        let xi = self.spec.xi(u);
        if !self.spec.ambient.domain().contains(&xi) {
            return T::nan();
        }
        self.spec.ambient.log_likelihood(xs, &xi)
    }

    fn sample(&self, u: &[T], seed: u64, count: usize) -> Result<Vec<T>> {
        self.spec.u_domain.check(u)?;
        self.spec.ambient.sample(&self.spec.xi(u), seed, count)
    }

    fn location_scale(&self, u: &[T]) -> (T, T) {
        self.spec.ambient.location_scale(&self.spec.xi(u))
    }
}

/// Pullback of the ambient metric to the model.
#[derive(Debug, Clone)]
pub struct InducedGeometry<T: Scalar> {
    pub u: Vec<T>,
    pub xi: Vec<T>,
    /// `B = ∂ξ/∂u`, `n × m`.
    pub basis: Matrix<T>,
    pub g_ambient: FisherMatrix<T>,
    /// `Bᵀ g B`.
    pub g_model: FisherMatrix<T>,
}

fn check_model_point<T: Scalar>(model: &CurvedModelSpec<T>, u: &[T]) -> Result<Vec<T>> {
    model.u_domain.check(u)?;
    let xi = model.xi(u);
    if xi.len() != model.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.ambient_dim(),
            found: xi.len(),
        });
    }
    model.ambient.domain().check(&xi)?;
    Ok(xi)
}

fn check_rank<T: Scalar>(b: &Matrix<T>) -> Result<()> {
    let btb = b.transpose().mul(b)?;
    let (vals, vecs) = btb.symmetric_eigen()?;
    let hi = vals[vals.len() - 1];
    if !(hi > T::zero()) || !(vals[0] > T::of(PD_RELATIVE_TOL) * hi) {
        return Err(Error::Degenerate {
            eigenvalue: vals[0].as_f64(),
            direction: vec_f64(&vecs.column(0)),
        });
    }
    Ok(())
}

pub fn induced_geometry<T: Scalar>(model: &CurvedModelSpec<T>, u: &[T], budget: &Budget) -> Result<InducedGeometry<T>> {
    let xi = check_model_point(model, u)?;
    let basis = model.basis(u);
    check_rank(&basis)?;
    let g_ambient = crate::metric::fisher_matrix(model.ambient.as_ref(), &xi, budget)?;
    let pulled = basis.transpose().mul(g_ambient.entries())?.mul(&basis)?;
    let g_model = FisherMatrix::new(u.to_vec(), pulled, FisherForm::ScoreOuter)?;
    Ok(InducedGeometry {
        u: u.to_vec(),
        xi,
        basis,
        g_ambient,
        g_model,
    })
}

/// `H^κ_{ab}`: normal part of `∂_a∂_b ξ^κ + Γ^(α)κ_{λμ} B^λ_a B^μ_b`, with
/// the tangent part `B (Bᵀ g B)⁻¹ Bᵀ g` removed. Indexed `(κ, a, b)`.
#[derive(Debug, Clone)]
pub struct EmbeddingCurvature<T: Scalar> {
    pub u: Vec<T>,
    pub alpha: T,
    pub entries: Tensor3<T>,
    /// The same quantity before projection.
    pub unprojected: Tensor3<T>,
}

pub fn embedding_curvature<T: Scalar>(
    model: &CurvedModelSpec<T>,
    u: &[T],
    alpha: T,
    budget: &Budget,
) -> Result<EmbeddingCurvature<T>> {
    let xi = check_model_point(model, u)?;
    let b = model.basis(u);
    check_rank(&b)?;
    let geo = local_geometry(model.ambient.as_ref(), &xi, budget)?;
    let gamma = geo.christoffel(alpha)?;
    let g = geo.fisher()?;
    let d = model.second_derivatives(u);
    Ok(project_normal(u, alpha, &b, g.entries(), &gamma.entries, &d)?)
}

/// Shared by the public entry point and tests with closed-form inputs.
pub(crate) fn project_normal<T: Scalar>(
    u: &[T],
    alpha: T,
    b: &Matrix<T>,
    g: &Matrix<T>,
    gamma: &Tensor3<T>,
    d: &Tensor3<T>,
) -> Result<EmbeddingCurvature<T>> {
    let (n, m) = (b.rows(), b.cols());
    let mut v = Tensor3::zeros(n, m, m);
    for k in 0..n {
        for a in 0..m {
            for c in 0..m {
                let mut s = d[(k, a, c)];
                for l in 0..n {
                    for mu in 0..n {
                        s += gamma[(k, l, mu)] * b[(l, a)] * b[(mu, c)];
                    }
                }
                v[(k, a, c)] = s;
            }
        }
    }
    // Tangent projector P = B (Bᵀ g B)⁻¹ Bᵀ g.
    let gb = g.mul(b)?;
    let gm = b.transpose().mul(&gb)?.spd_inverse()?;
    let p = b.mul(&gm)?.mul(&gb.transpose())?;
    let mut h = Tensor3::zeros(n, m, m);
    for k in 0..n {
        for a in 0..m {
            for c in 0..m {
                let tangent: T = (0..n).map(|l| p[(k, l)] * v[(l, a, c)]).sum();
                h[(k, a, c)] = v[(k, a, c)] - tangent;
            }
        }
    }
    // Symmetrize in (a, b).
    let half = T::of(0.5);
    let hs = Tensor3::from_fn([n, m, m], |k, a, c| half * (h[(k, a, c)] + h[(k, c, a)]));
    Ok(EmbeddingCurvature {
        u: u.to_vec(),
        alpha,
        entries: hs,
        unprojected: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Gaussian, Poisson};

    #[test]
    fn restriction_to_unit_sigma() {
        let model = CurvedModelSpec::new(
            Arc::new(Gaussian::<f64>::new()),
            |u: &[f64]| vec![u[0], 1.0],
            Domain::unbounded(1),
        );
        let geo = induced_geometry(&model, &[0.3], &Budget::default()).unwrap();
        assert!((geo.g_model.entries()[(0, 0)] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identity_embedding_has_no_normal_space() {
        let model = CurvedModelSpec::new(Arc::new(Gaussian::<f64>::new()), |u: &[f64]| u.to_vec(), Gaussian::<f64>::new().domain().clone());
        let geo = induced_geometry(&model, &[0.3, 1.4], &Budget::default()).unwrap();
        assert!(geo.g_model.entries().max_abs_diff(geo.g_ambient.entries()) < 1e-6);
        let h = embedding_curvature(&model, &[0.3, 1.4], 0.0, &Budget::default()).unwrap();
        assert!(h.entries.max_abs() < 1e-8);
    }

    #[test]
    fn zero_jacobian_column_is_degenerate() {
        let model = CurvedModelSpec::new(
            Arc::new(Gaussian::<f64>::new()),
            |u: &[f64]| vec![u[0], 1.0],
            Domain::unbounded(2),
        );
        assert!(matches!(
            induced_geometry(&model, &[0.0, 0.0], &Budget::default()),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn curved_family_score_is_chain_rule() {
        let model = CurvedModelSpec::new(Arc::new(Poisson::<f64>::new()), |u: &[f64]| vec![2.0 * u[0]], Domain::unbounded(1));
        let fam = model.family();
        let s = fam.score_raw(3.0, &[0.25]);
        assert!((s[0] - 2.0 * (3.0 - 0.5f64.exp())).abs() < 1e-9);
    }
}
