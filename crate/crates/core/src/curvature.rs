//! Riemann curvature of α-connections by finite differences of Christoffel
//! symbols.
//!
//! Convention: `R^l_{kij} = ∂_iΓ^l_{jk} − ∂_jΓ^l_{ik} + Γ^l_{im}Γ^m_{jk} − Γ^l_{jm}Γ^m_{ik}`,
//! so that `R(∂_i, ∂_j)∂_k = R^l_{kij} ∂_l` and the hyperbolic plane has
//! sectional curvature −1.

use rayon::prelude::*;
use serde::Serialize;

use crate::connection::{local_geometry, Christoffel};
use crate::error::{Error, Result};
use crate::family::ParametricFamily;
use crate::integrate::Budget;
use crate::linalg::{Matrix, Tensor4};
use crate::metric::FisherMatrix;
use crate::scalar::{vec_f64, Scalar};

pub const COEFFICIENT_FLAT_TOL: f64 = 1e-5;
pub const CURVATURE_FLAT_TOL: f64 = 1e-4;

/// Default relative stencil step.
pub const DEFAULT_H: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor<T: Scalar> {
    pub at: Vec<T>,
    pub alpha: T,
    /// `R^l_{kij}` at `[l, k, i, j]`.
    pub entries: Tensor4<T>,
    /// `R_{lkij} = g_{lm} R^m_{kij}`.
    pub lowered: Tensor4<T>,
}

impl<T: Scalar> CurvatureTensor<T> {
    pub fn max_abs(&self) -> T {
        self.entries.max_abs()
    }

    /// `max |R_{lkij} + R_{lkji}|`.
    pub fn antisymmetry_residual(&self) -> T {
        let n = self.entries.side();
        let mut worst = T::zero();
        for_each_index(n, |[l, k, i, j]| {
            worst = worst.max((self.lowered[[l, k, i, j]] + self.lowered[[l, k, j, i]]).abs());
        });
        worst
    }

    /// `max |R_{lkij} + R_{klij}|`; small for metric connections.
    pub fn pair_antisymmetry_residual(&self) -> T {
        let n = self.entries.side();
        let mut worst = T::zero();
        for_each_index(n, |[l, k, i, j]| {
            worst = worst.max((self.lowered[[l, k, i, j]] + self.lowered[[k, l, i, j]]).abs());
        });
        worst
    }
}

fn for_each_index(n: usize, mut f: impl FnMut([usize; 4])) {
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    f([a, b, c, d]);
                }
            }
        }
    }
}

/// Per-axis step `h·max(1, |ξ_i|)`.
fn steps<T: Scalar>(xi: &[T], h: T) -> Vec<T> {
    xi.iter().map(|v| h * T::one().max(v.abs())).collect()
}

/// Riemann tensor at ξ from central differences of `Γ^k_{ij}` over the
/// `2n` points `ξ ± h_i e_i`.
pub fn riemann_tensor<T, F>(
    family: &F,
    xi: &[T],
    alpha: T,
    h: Option<T>,
    budget: &Budget,
) -> Result<CurvatureTensor<T>>
where
    T: Scalar,
    F: ParametricFamily<T> + ?Sized,
{
    family.domain().check(xi)?;
    let n = family.dim();
    let hs = steps(xi, h.unwrap_or(T::of(DEFAULT_H)));
    let mut points = Vec::with_capacity(2 * n);
    for i in 0..n {
        for s in [T::one(), -T::one()] {
            let mut p = xi.to_vec();
            p[i] += s * hs[i];
            if !family.domain().contains(&p) {
                return Err(Error::StencilOutsideDomain { xi: vec_f64(&p) });
            }
            points.push(p);
        }
    }
    let centre = local_geometry(family, xi, budget)?;
    let g = centre.fisher()?;
    let gamma = centre.christoffel(alpha)?;
    let stencil: Vec<Christoffel<T>> = points
        .par_iter()
        .map(|p| local_geometry(family, p, budget)?.christoffel(alpha))
        .collect::<Result<_>>()?;
    // d[i][(l, j, k)] = ∂_i Γ^l_{jk}
    let d: Vec<_> = (0..n)
        .map(|i| {
            let (up, down) = (&stencil[2 * i].entries, &stencil[2 * i + 1].entries);
            up.axpy(-T::one(), down).map(|v| v / (hs[i] + hs[i]))
        })
        .collect();
    let c = &gamma.entries;
    let mut r = Tensor4::zeros(n);
    for_each_index(n, |[l, k, i, j]| {
        let mut v = d[i][(l, j, k)] - d[j][(l, i, k)];
        for m in 0..n {
            v += c[(l, i, m)] * c[(m, j, k)] - c[(l, j, m)] * c[(m, i, k)];
        }
        r[[l, k, i, j]] = v;
    });
    let lowered = lower(&r, g.entries());
    Ok(CurvatureTensor {
        at: xi.to_vec(),
        alpha,
        entries: r,
        lowered,
    })
}

fn lower<T: Scalar>(r: &Tensor4<T>, g: &Matrix<T>) -> Tensor4<T> {
    let n = r.side();
    let mut out = Tensor4::zeros(n);
    for_each_index(n, |[l, k, i, j]| {
        out[[l, k, i, j]] = (0..n).map(|m| g[(l, m)] * r[[m, k, i, j]]).sum();
    });
    out
}

/// `K(X, Y) = R(X, Y, Y, X) / (|X|²|Y|² − ⟨X, Y⟩²)`.
pub fn sectional_curvature<T: Scalar>(
    r: &CurvatureTensor<T>,
    g: &FisherMatrix<T>,
    x: &[T],
    y: &[T],
) -> Result<T> {
    let n = r.entries.side();
    if x.len() != n || y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if x.len() != n { x.len() } else { y.len() },
        });
    }
    let xx = g.inner_product(x, x)?;
    let yy = g.inner_product(y, y)?;
    let xy = g.inner_product(x, y)?;
    let denom = xx * yy - xy * xy;
    if !(denom.abs() > T::of(1e-12)) {
        return Err(Error::Invalid(format!(
            "tangent vectors span a degenerate plane (|X|²|Y|² − ⟨X,Y⟩² = {denom})"
        )));
    }
    let mut num = T::zero();
    for_each_index(n, |[l, k, i, j]| {
        num += r.lowered[[l, k, i, j]] * x[l] * y[k] * x[i] * y[j];
    });
    Ok(num / denom)
}

#[derive(Debug, Clone, Serialize)]
pub struct FlatnessReport {
    pub alpha: f64,
    pub points: usize,
    pub max_connection: f64,
    pub max_connection_at: Vec<f64>,
    pub max_riemann: f64,
    pub max_riemann_at: Vec<f64>,
    pub connection_tol: f64,
    pub curvature_tol: f64,
    pub flat_connection: bool,
    pub flat_curvature: bool,
    pub flat: bool,
}

/// Regular grid with `per_axis` points per axis spanning `[lo_i, hi_i]`.
pub fn region_grid<T: Scalar>(bounds: &[(T, T)], per_axis: usize) -> Vec<Vec<T>> {
    let mut grid = vec![Vec::new()];
    for &(lo, hi) in bounds {
        let axis: Vec<T> = if per_axis == 1 {
            vec![(lo + hi) / T::of(2.0)]
        } else {
            (0..per_axis)
                .map(|i| lo + (hi - lo) * T::of_usize(i) / T::of_usize(per_axis - 1))
                .collect()
        };
        grid = grid
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    grid
}

/// Maximum `|Γ^(α)_{ij,k}|` and `|R^l_{kij}|` over a grid, with verdicts.
pub fn flatness_report<T, F>(
    family: &F,
    grid: &[Vec<T>],
    alpha: T,
    h: Option<T>,
    budget: &Budget,
) -> Result<FlatnessReport>
where
    T: Scalar,
    F: ParametricFamily<T> + ?Sized,
{
    let per_point: Vec<(T, T)> = grid
        .par_iter()
        .map(|p| {
            let gamma = local_geometry(family, p, budget)?.connection(alpha);
            let r = riemann_tensor(family, p, alpha, h, budget)?;
            Ok((gamma.entries.max_abs(), r.max_abs()))
        })
        .collect::<Result<_>>()?;
    let argmax = |sel: fn(&(T, T)) -> T| {
        per_point
            .iter()
            .enumerate()
            .fold((T::zero(), 0), |(m, at), (i, v)| if sel(v) > m { (sel(v), i) } else { (m, at) })
    };
    let (mc, ic) = argmax(|v| v.0);
    let (mr, ir) = argmax(|v| v.1);
    let point = |i: usize| grid.get(i).map(|p| vec_f64(p)).unwrap_or_default();
    let flat_connection = mc.as_f64() < COEFFICIENT_FLAT_TOL;
    let flat_curvature = mr.as_f64() < CURVATURE_FLAT_TOL;
    Ok(FlatnessReport {
        alpha: alpha.as_f64(),
        points: grid.len(),
        max_connection: mc.as_f64(),
        max_connection_at: point(ic),
        max_riemann: mr.as_f64(),
        max_riemann_at: point(ir),
        connection_tol: COEFFICIENT_FLAT_TOL,
        curvature_tol: CURVATURE_FLAT_TOL,
        flat_connection,
        flat_curvature,
        flat: flat_connection && flat_curvature,
    })
}
