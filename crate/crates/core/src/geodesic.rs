//! Geodesics of α-connections: `ξ̈^k + Γ^k_{ij} ξ̇^i ξ̇^j = 0` by fixed-step RK4.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::connection::local_geometry;
use crate::error::{Error, Result};
use crate::family::{Domain, ParametricFamily};
use crate::integrate::Budget;
use crate::linalg::Tensor3;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GeodesicStatus {
    Completed,
    HitBoundary,
    StepFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicSample<T: Scalar> {
    pub t: T,
    pub xi: Vec<T>,
    pub velocity: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicPath<T: Scalar> {
    pub alpha: T,
    pub samples: Vec<GeodesicSample<T>>,
    pub status: GeodesicStatus,
    /// Why integration stopped early, if it did.
    pub message: Option<String>,
}

impl<T: Scalar> GeodesicPath<T> {
    pub fn last(&self) -> &GeodesicSample<T> {
        self.samples.last().expect("paths always hold the initial sample")
    }

    pub fn endpoint(&self) -> &[T] {
        &self.last().xi
    }

    /// CSV with columns `t, xi_1.., v_1..`.
    pub fn to_csv(&self) -> String {
        let n = self.samples[0].xi.len();
        let mut out = String::from("t");
        for i in 1..=n {
            let _ = write!(out, ",xi_{i}");
        }
        for i in 1..=n {
            let _ = write!(out, ",v_{i}");
        }
        out.push('\n');
        for s in &self.samples {
            let _ = write!(out, "{}", s.t.as_f64());
            for v in s.xi.iter().chain(&s.velocity) {
                let _ = write!(out, ",{}", v.as_f64());
            }
            out.push('\n');
        }
        out
    }
}

/// How Christoffel symbols are obtained at RK4 stage points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChristoffelMode {
    /// Exact for `n ≤ 3`, lattice with spacing 0.01 above.
    Auto,
    Exact,
    /// Multilinear interpolation from a cached lattice with this spacing.
    Lattice { spacing: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeodesicOptions {
    /// Fixed step; defaults to `t_end / 1000`.
    pub dt: Option<f64>,
    pub mode: ChristoffelMode,
    pub budget: Budget,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self {
            dt: None,
            mode: ChristoffelMode::Auto,
            budget: Budget::default(),
        }
    }
}

impl GeodesicOptions {
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }
}

/// Integrates the geodesic of `Γ^(α)` from `(ξ0, v0)` up to `t_end`.
pub fn integrate_geodesic<T, F>(
    family: &F,
    xi0: &[T],
    v0: &[T],
    alpha: T,
    t_end: T,
    options: &GeodesicOptions,
) -> Result<GeodesicPath<T>>
where
    T: Scalar,
    F: ParametricFamily<T> + ?Sized,
{
    let n = family.dim();
    let exact = |p: &[T]| local_geometry(family, p, &options.budget)?.christoffel(alpha).map(|c| c.entries);
    let spacing = match options.mode {
        ChristoffelMode::Exact => None,
        ChristoffelMode::Auto if n <= 3 => None,
        ChristoffelMode::Auto => Some(0.01),
        ChristoffelMode::Lattice { spacing } => Some(spacing),
    };
    match spacing {
        None => integrate_with(exact, family.domain(), xi0, v0, alpha, t_end, options.dt),
        Some(s) => {
            let lattice = Lattice::new(T::of(s), exact);
            integrate_with(|p| lattice.eval(p), family.domain(), xi0, v0, alpha, t_end, options.dt)
        }
    }
}

/// RK4 driver for any Christoffel source `p ↦ Γ^k_{ij}(p)` (indexed `(k, i, j)`).
pub fn integrate_with<T, C>(
    christoffel: C,
    domain: &Domain<T>,
    xi0: &[T],
    v0: &[T],
    alpha: T,
    t_end: T,
    dt: Option<f64>,
) -> Result<GeodesicPath<T>>
where
    T: Scalar,
    C: Fn(&[T]) -> Result<Tensor3<T>>,
{
    domain.check(xi0)?;
    let n = domain.dim();
    if v0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v0.len(),
        });
    }
    if !(t_end > T::zero()) {
        return Err(Error::Invalid(format!("t_end must be positive, got {t_end}")));
    }
    let dt = dt.map(T::of).unwrap_or(t_end / T::of(1000.0));
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::Invalid(format!("dt must be positive, got {dt}")));
    }
    let steps = (t_end / dt).ceil().to_usize().unwrap_or(usize::MAX).max(1);
    let h = t_end / T::of_usize(steps);

    let accel = |p: &[T], v: &[T]| -> std::result::Result<Vec<T>, (GeodesicStatus, String)> {
        if !domain.contains(p) {
            return Err((GeodesicStatus::HitBoundary, "stage point left the domain".into()));
        }
        let g = christoffel(p).map_err(|e| (GeodesicStatus::StepFailure, e.to_string()))?;
        Ok((0..n)
            .map(|k| {
                let mut a = T::zero();
                for i in 0..n {
                    for j in 0..n {
                        a -= g[(k, i, j)] * v[i] * v[j];
                    }
                }
                a
            })
            .collect())
    };
    let axpy = |x: &[T], s: T, d: &[T]| -> Vec<T> { x.iter().zip(d).map(|(&a, &b)| a + s * b).collect() };

    let mut samples = vec![GeodesicSample {
        t: T::zero(),
        xi: xi0.to_vec(),
        velocity: v0.to_vec(),
    }];
    let two = T::of(2.0);
    let six = T::of(6.0);
    for step in 1..=steps {
        let last = samples.last().unwrap();
        let (x, v) = (&last.xi, &last.velocity);
        let stage = || -> std::result::Result<(Vec<T>, Vec<T>), (GeodesicStatus, String)> {
            let a1 = accel(x, v)?;
            let (x2, v2) = (axpy(x, h / two, v), axpy(v, h / two, &a1));
            let a2 = accel(&x2, &v2)?;
            let (x3, v3) = (axpy(x, h / two, &v2), axpy(v, h / two, &a2));
            let a3 = accel(&x3, &v3)?;
            let (x4, v4) = (axpy(x, h, &v3), axpy(v, h, &a3));
            let a4 = accel(&x4, &v4)?;
            let xn = (0..n)
                .map(|i| x[i] + h / six * (v[i] + two * v2[i] + two * v3[i] + v4[i]))
                .collect::<Vec<_>>();
            let vn = (0..n)
                .map(|i| v[i] + h / six * (a1[i] + two * a2[i] + two * a3[i] + a4[i]))
                .collect::<Vec<_>>();
            if xn.iter().chain(&vn).any(|c| !c.is_finite()) {
                return Err((GeodesicStatus::StepFailure, "non-finite state".into()));
            }
            if !domain.contains(&xn) {
                return Err((GeodesicStatus::HitBoundary, "reached the domain boundary".into()));
            }
            Ok((xn, vn))
        };
        match stage() {
            Ok((xi, velocity)) => samples.push(GeodesicSample {
                t: if step == steps { t_end } else { h * T::of_usize(step) },
                xi,
                velocity,
            }),
            Err((status, message)) => {
                return Ok(GeodesicPath {
                    alpha,
                    samples,
                    status,
                    message: Some(message),
                })
            }
        }
    }
    Ok(GeodesicPath {
        alpha,
        samples,
        status: GeodesicStatus::Completed,
        message: None,
    })
}

/// Endpoint of the geodesic at `t = 1`.
pub fn exponential_map<T, F>(
    family: &F,
    xi0: &[T],
    v0: &[T],
    alpha: T,
    options: &GeodesicOptions,
) -> Result<Vec<T>>
where
    T: Scalar,
    F: ParametricFamily<T> + ?Sized,
{
    let path = integrate_geodesic(family, xi0, v0, alpha, T::one(), options)?;
    let t = path.last().t.as_f64();
    match path.status {
        GeodesicStatus::Completed => Ok(path.endpoint().to_vec()),
        GeodesicStatus::HitBoundary => Err(Error::Boundary { t }),
        GeodesicStatus::StepFailure => Err(Error::StepFailure { t }),
    }
}

/// Christoffel symbols cached on a regular lattice and interpolated
/// multilinearly between the `2^n` surrounding nodes.
struct Lattice<T, C> {
    spacing: T,
    source: C,
    cache: std::cell::RefCell<HashMap<Vec<i64>, Tensor3<T>>>,
}

impl<T: Scalar, C: Fn(&[T]) -> Result<Tensor3<T>>> Lattice<T, C> {
    fn new(spacing: T, source: C) -> Self {
        Self {
            spacing,
            source,
            cache: Default::default(),
        }
    }

    fn node(&self, idx: &[i64]) -> Result<Tensor3<T>> {
        if let Some(t) = self.cache.borrow().get(idx) {
            return Ok(t.clone());
        }
        let p: Vec<T> = idx.iter().map(|&i| T::of(i as f64) * self.spacing).collect();
        let t = (self.source)(&p)?;
        self.cache.borrow_mut().insert(idx.to_vec(), t.clone());
        Ok(t)
    }

    fn eval(&self, p: &[T]) -> Result<Tensor3<T>> {
        let n = p.len();
        let scaled: Vec<T> = p.iter().map(|&v| v / self.spacing).collect();
        let base: Vec<i64> = scaled.iter().map(|v| v.floor().to_i64().unwrap_or(0)).collect();
        let frac: Vec<T> = scaled.iter().zip(&base).map(|(&v, &b)| v - T::of(b as f64)).collect();
        let mut acc: Option<Tensor3<T>> = None;
        for corner in 0..1usize << n {
            let mut w = T::one();
            let idx: Vec<i64> = (0..n)
                .map(|i| {
                    if corner >> i & 1 == 1 {
                        w *= frac[i];
                        base[i] + 1
                    } else {
                        w *= T::one() - frac[i];
                        base[i]
                    }
                })
                .collect();
            if w == T::zero() {
                continue;
            }
            let t = self.node(&idx)?;
            acc = Some(match acc {
                None => t.map(|v| v * w),
                Some(a) => a.axpy(w, &t),
            });
        }
        acc.ok_or_else(|| Error::Invalid("empty interpolation stencil".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::Gaussian;

    /// Closed-form Levi-Civita symbols of `diag(1/σ², 2/σ²)`.
    fn gaussian_symbols(p: &[f64]) -> Result<Tensor3<f64>> {
        let s = p[1];
        let mut t = Tensor3::cube(2);
        t[(0, 0, 1)] = -1.0 / s;
        t[(0, 1, 0)] = -1.0 / s;
        t[(1, 0, 0)] = 1.0 / (2.0 * s);
        t[(1, 1, 1)] = -1.0 / s;
        Ok(t)
    }

    fn half_plane() -> Domain<f64> {
        Domain::new(vec![(f64::NEG_INFINITY, f64::INFINITY), (0.0, f64::INFINITY)]).unwrap()
    }

    #[test]
    fn vertical_geodesic_is_exponential() {
        let path = integrate_with(gaussian_symbols, &half_plane(), &[0.0, 1.0], &[0.0, 1.0], 0.0, 1.0, None).unwrap();
        assert_eq!(path.status, GeodesicStatus::Completed);
        let end = path.endpoint();
        assert_eq!(end[0], 0.0);
        assert!((end[1] - std::f64::consts::E).abs() < 1e-10);
    }

    #[test]
    fn boundary_is_reported() {
        // Straight line towards σ = 0 under zero symbols.
        let flat = |_p: &[f64]| Ok(Tensor3::cube(2));
        let path = integrate_with(flat, &half_plane(), &[0.0, 1.0], &[0.0, -1.0], 0.0, 2.0, Some(0.01)).unwrap();
        assert_eq!(path.status, GeodesicStatus::HitBoundary);
        assert!(path.last().t < 1.0);
    }

    #[test]
    fn lattice_matches_exact() {
        let fam = Gaussian::<f64>::new();
        let exact = integrate_geodesic(&fam, &[0.0, 1.0], &[0.5, 0.2], 0.0, 1.0, &GeodesicOptions::default().with_dt(0.01)).unwrap();
        let opts = GeodesicOptions {
            mode: ChristoffelMode::Lattice { spacing: 0.005 },
            ..GeodesicOptions::default().with_dt(0.01)
        };
        let lat = integrate_geodesic(&fam, &[0.0, 1.0], &[0.5, 0.2], 0.0, 1.0, &opts).unwrap();
        let d: f64 = exact.endpoint().iter().zip(lat.endpoint()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-4, "{d}");
    }

    #[test]
    fn zero_velocity_stays_put() {
        let fam = Gaussian::<f64>::new();
        let end = exponential_map(&fam, &[0.3, 1.2], &[0.0, 0.0], 0.0, &GeodesicOptions::default().with_dt(0.1)).unwrap();
        assert_eq!(end, vec![0.3, 1.2]);
    }

    #[test]
    fn csv_layout() {
        let path = integrate_with(gaussian_symbols, &half_plane(), &[0.0, 1.0], &[1.0, 0.0], 0.0, 0.1, Some(0.05)).unwrap();
        let csv = path.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,xi_1,xi_2,v_1,v_2");
        assert_eq!(lines.count(), 3);
    }
}
