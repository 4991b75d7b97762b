//! Second-order MSE expansion `E[(û*−u)(û*−u)] = g^{ab}/N + K^{ab}/(2N²)`.
//!
//! Index conventions: model indices `a..f` are raised with the inverse of
//! `g_model`, ambient indices `κ..ν` are lowered/raised with `g_ambient` and
//! its inverse. `Γ^a_{cd}` is the model m-connection of the second kind.

use serde::Serialize;

use super::curved::{embedding_curvature, CurvedModelSpec};
use crate::connection::local_geometry;
use crate::error::{Error, Result};
use crate::integrate::Budget;
use crate::linalg::{Matrix, Tensor3};
use crate::scalar::{vec_f64, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseExpansionTerms<T: Scalar> {
    pub at: Vec<T>,
    pub g_model: Matrix<T>,
    /// `g^{ab}`.
    pub g_inverse: Matrix<T>,
    /// `Γ^a_{cd} Γ^b_{ef} g^{ce} g^{df}`.
    pub gamma_m_sq: Matrix<T>,
    /// `H^κ_{ce} H^λ_{df} g_{κλ} g^{cd} g^{ea} g^{fb}`.
    pub h_e_sq: Matrix<T>,
    /// `H^a_{κλ} H^b_{μν} g^{κμ} g^{λν}`.
    pub h_m_a_sq: Matrix<T>,
    /// `gamma_m_sq + 2 h_e_sq + h_m_a_sq`.
    pub k: Matrix<T>,
    /// Set when the ancillary curvature was not supplied and taken as zero.
    pub ancillary_assumed_m_flat: bool,
    /// Smallest eigenvalue over the three component matrices.
    pub min_component_eigenvalue: T,
}

fn expect_dims<T: Scalar>(t: &Tensor3<T>, dims: [usize; 3], what: &str) -> Result<()> {
    if t.dims() != dims {
        return Err(Error::Invalid(format!("{what} has shape {:?}, expected {dims:?}", t.dims())));
    }
    Ok(())
}

/// Evaluates the three contractions and assembles `K^{ab}`.
///
/// * `gamma_m`: `Γ^a_{cd}` indexed `(a, c, d)`, shape `m×m×m`;
/// * `h_e`: `H^κ_{ab}` indexed `(κ, a, b)`, shape `n×m×m`;
/// * `h_m_a`: `H^a_{κλ}` indexed `(a, κ, λ)`, shape `m×n×n`.
pub fn k_tensor<T: Scalar>(
    gamma_m: &Tensor3<T>,
    h_e: &Tensor3<T>,
    h_m_a: &Tensor3<T>,
    g_model: &Matrix<T>,
    g_ambient: &Matrix<T>,
) -> Result<MseExpansionTerms<T>> {
    let m = g_model.rows();
    let n = g_ambient.rows();
    if !g_model.is_square() || !g_ambient.is_square() {
        return Err(Error::Invalid("metrics must be square".into()));
    }
    expect_dims(gamma_m, [m, m, m], "gamma_m")?;
    expect_dims(h_e, [n, m, m], "h_e")?;
    expect_dims(h_m_a, [m, n, n], "h_m_a")?;
    let gi = g_model.spd_inverse()?;
    let gai = g_ambient.spd_inverse()?;

    // Γ̃^{b,cd} = g^{ce} g^{df} Γ^b_{ef}
    let raised = Tensor3::from_fn([m, m, m], |b, c, d| {
        let mut s = T::zero();
        for e in 0..m {
            for f in 0..m {
                s += gi[(c, e)] * gi[(d, f)] * gamma_m[(b, e, f)];
            }
        }
        s
    });
    let gamma_m_sq = Matrix::from_fn(m, m, |a, b| {
        let mut s = T::zero();
        for c in 0..m {
            for d in 0..m {
                s += gamma_m[(a, c, d)] * raised[(b, c, d)];
            }
        }
        s
    });

    // N_{ef} = g^{cd} g_{κλ} H^κ_{ce} H^λ_{df}
    let lowered = Tensor3::from_fn([n, m, m], |k, c, e| (0..n).map(|l| g_ambient[(k, l)] * h_e[(l, c, e)]).sum());
    let nn = Matrix::from_fn(m, m, |e, f| {
        let mut s = T::zero();
        for c in 0..m {
            for d in 0..m {
                let gcd = gi[(c, d)];
                for k in 0..n {
                    s += gcd * h_e[(k, c, e)] * lowered[(k, d, f)];
                }
            }
        }
        s
    });
    let h_e_sq = gi.mul(&nn)?.mul(&gi)?;

    // Ĥ^b = G⁻¹ H^b G⁻¹ over the ambient indices.
    let slice = |a: usize| Matrix::from_fn(n, n, |k, l| h_m_a[(a, k, l)]);
    let hats: Vec<Matrix<T>> = (0..m).map(|b| gai.mul(&slice(b))?.mul(&gai)).collect::<Result<_>>()?;
    let h_m_a_sq = Matrix::from_fn(m, m, |a, b| {
        let ha = slice(a);
        let mut s = T::zero();
        for k in 0..n {
            for l in 0..n {
                s += ha[(k, l)] * hats[b][(k, l)];
            }
        }
        s
    });

    let k = gamma_m_sq.add(&h_e_sq.scale(T::of(2.0)))?.add(&h_m_a_sq)?;
    let mut min_eig = T::infinity();
    for c in [&gamma_m_sq, &h_e_sq, &h_m_a_sq] {
        let (vals, _) = c.symmetrized().symmetric_eigen()?;
        min_eig = min_eig.min(vals[0]);
    }
    Ok(MseExpansionTerms {
        at: Vec::new(),
        g_model: g_model.clone(),
        g_inverse: gi,
        gamma_m_sq,
        h_e_sq,
        h_m_a_sq,
        k,
        ancillary_assumed_m_flat: false,
        min_component_eigenvalue: min_eig,
    })
}

/// `(1/N) g^{ab} + (1/(2N²)) K^{ab}`.
pub fn asymptotic_mse<T: Scalar>(g_model: &Matrix<T>, k: &Matrix<T>, n: usize) -> Result<Matrix<T>> {
    if n < 1 {
        return Err(Error::Invalid("sample count must be at least 1".into()));
    }
    let nf = T::of_usize(n);
    g_model
        .spd_inverse()?
        .scale(T::one() / nf)
        .add(&k.scale(T::one() / (T::of(2.0) * nf * nf)))
}

/// Every term of the second-order expansion for a curved model at `u`.
///
/// The model m-connection comes from the submodel family itself (α = −1),
/// `H^(e)` from [`embedding_curvature`] at α = 1. Without `h_m_a` the
/// ancillary curvature is taken as zero and flagged.
pub fn mse_terms<T: Scalar>(
    model: &CurvedModelSpec<T>,
    u: &[T],
    h_m_a: Option<&Tensor3<T>>,
    budget: &Budget,
) -> Result<MseExpansionTerms<T>> {
    let m = model.model_dim();
    let n = model.ambient_dim();
    let fam = model.family();
    let geo = local_geometry(&fam, u, budget)?;
    let gamma = geo.christoffel(-T::one())?;
    let g_model = geo.fisher()?;
    let h_e = embedding_curvature(model, u, T::one(), budget)?;
    let xi = model.xi(u);
    let g_ambient = crate::metric::fisher_matrix(model.ambient.as_ref(), &xi, budget)?;
    let zero = Tensor3::zeros(m, n, n);
    let mut terms = k_tensor(
        &gamma.entries,
        &h_e.entries,
        h_m_a.unwrap_or(&zero),
        g_model.entries(),
        g_ambient.entries(),
    )?;
    terms.at = u.to_vec();
    terms.ancillary_assumed_m_flat = h_m_a.is_none();
    Ok(terms)
}

impl<T: Scalar> MseExpansionTerms<T> {
    /// Predicted MSE matrix at sample size `n`.
    pub fn predicted(&self, n: usize) -> Result<Matrix<T>> {
        asymptotic_mse(&self.g_model, &self.k, n)
    }

    pub fn at_f64(&self) -> Vec<f64> {
        vec_f64(&self.at)
    }
}
