//! Exponential families `p(x; ξ) = exp{K(x) + Σ ξ^i F_i(x) − ψ(ξ)}` with the
//! log-partition ψ computed numerically.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use super::sampling::inverse_cdf_draws;
use super::{Domain, ParametricFamily, SampleFn, Support};
use crate::error::{Error, Result};
use crate::integrate::{integrate_measure, Budget, Method};
use crate::linalg::Matrix;
use crate::scalar::{vec_f64, Scalar};

/// Carrier and sufficient statistics of an exponential family.
#[derive(Clone)]
pub struct ExponentialFamilySpec<T> {
    pub name: String,
    pub carrier: SampleFn<T>,
    pub statistics: Vec<SampleFn<T>>,
    pub support: Support<T>,
}

impl<T> fmt::Debug for ExponentialFamilySpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExponentialFamilySpec")
            .field("name", &self.name)
            .field("statistics", &self.statistics.len())
            .finish()
    }
}

/// ψ(ξ) with its first two derivatives and a placement hint for quadrature.
#[derive(Debug, Clone)]
pub struct LogPartition<T> {
    pub psi: T,
    /// ∂_i ψ = E_ξ[F_i].
    pub gradient: Vec<T>,
    /// ∂_i ∂_j ψ = Cov_ξ(F_i, F_j).
    pub hessian: Matrix<T>,
    mode: T,
    spread: T,
}

const CACHE_LIMIT: usize = 8192;

pub struct ExponentialFamily<T> {
    spec: ExponentialFamilySpec<T>,
    domain: Domain<T>,
    budget: Budget,
    cache: Mutex<HashMap<Vec<u64>, Arc<LogPartition<T>>>>,
}

impl<T: Scalar> fmt::Debug for ExponentialFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExponentialFamily")
            .field("name", &self.spec.name)
            .field("domain", &self.domain)
            .finish()
    }
}

/// Builds an exponential family after checking that the statistics are
/// linearly independent and non-constant, and that ψ is finite at probe
/// points spread over the domain.
pub fn make_exponential_family<T: Scalar>(
    spec: ExponentialFamilySpec<T>,
    domain: Domain<T>,
) -> Result<ExponentialFamily<T>> {
    let n = spec.statistics.len();
    if n == 0 {
        return Err(Error::Construction("at least one statistic is required".into()));
    }
    if n != domain.dim() {
        return Err(Error::Construction(format!(
            "{n} statistics but a {}-dimensional domain",
            domain.dim()
        )));
    }
    check_independent(&spec.statistics, &spec.support)?;
    let family = ExponentialFamily {
        spec,
        domain,
        budget: Budget {
            rel_tol: 1e-13,
            abs_tol: 0.0,
            max_evals: 400_000,
            ..Budget::default()
        },
        cache: Mutex::new(HashMap::new()),
    };
    for probe in probe_points(&family.domain) {
        if family.domain.contains(&probe) {
            family.log_partition(&probe).map_err(|e| {
                Error::Construction(format!(
                    "normalization integral diverges at {:?}: {e}",
                    vec_f64(&probe)
                ))
            })?;
        }
    }
    Ok(family)
}

/// Sample points used for linear-independence checks.
pub(crate) fn statistic_grid<T: Scalar>(support: &Support<T>) -> Vec<T> {
    match support {
        Support::Finite(p) => p.clone(),
        Support::Naturals => (0..64).map(T::of_usize).collect(),
        Support::Interval { lo, hi } => {
            let chart = crate::integrate::Chart::for_interval(*lo, *hi, T::zero(), T::one());
            let (t0, t1) = chart.t_range();
            (0..256)
                .map(|i| {
                    // Van der Corput points avoid aliasing with periodic statistics.
                    let mut k = i + 1;
                    let mut base = 0.5;
                    let mut u = 0.0;
                    while k > 0 {
                        if k & 1 == 1 {
                            u += base;
                        }
                        base *= 0.5;
                        k >>= 1;
                    }
                    chart.map(t0 + (t1 - t0) * T::of(u)).0
                })
                .collect()
        }
        Support::Continuous => (0..256).map(|i| T::of(-8.0 + 16.0 * i as f64 / 255.0)).collect(),
    }
}

pub(crate) fn check_independent<T: Scalar>(stats: &[SampleFn<T>], support: &Support<T>) -> Result<()> {
    let grid = statistic_grid(support);
    let n = stats.len();
    let m = grid.len();
    // Centered columns: constants and dependencies modulo constants both
    // collapse the Gram matrix.
    let mut cols: Vec<Vec<T>> = stats
        .iter()
        .map(|f| grid.iter().map(|&x| f(x)).collect())
        .collect();
    for (i, c) in cols.iter_mut().enumerate() {
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Construction(format!("statistic {i} is not finite on the support")));
        }
        let mean = c.iter().copied().sum::<T>() / T::of_usize(m);
        c.iter_mut().for_each(|v| *v -= mean);
        let norm = c.iter().map(|v| *v * *v).sum::<T>().sqrt();
        if norm == T::zero() {
            return Err(Error::Construction(format!("statistic {i} is constant on the support")));
        }
        c.iter_mut().for_each(|v| *v /= norm);
    }
    let gram = Matrix::from_fn(n, n, |i, j| crate::linalg::dot(&cols[i], &cols[j]));
    let (vals, _) = gram.symmetric_eigen()?;
    if vals[0] <= T::of(1e-10) * vals[n - 1] {
        return Err(Error::Construction(
            "statistics are linearly dependent on the support".into(),
        ));
    }
    Ok(())
}

pub(crate) fn probe_points<T: Scalar>(domain: &Domain<T>) -> Vec<Vec<T>> {
    let centre: Vec<T> = domain
        .bounds()
        .iter()
        .map(|&(lo, hi)| match (lo.is_finite(), hi.is_finite()) {
            (true, true) => (lo + hi) * T::of(0.5),
            (true, false) => lo + T::one(),
            (false, true) => hi - T::one(),
            (false, false) => T::zero(),
        })
        .collect();
    let mut out = vec![centre.clone()];
    for (i, &(lo, hi)) in domain.bounds().iter().enumerate() {
        for target in [lo, hi] {
            let mut p = centre.clone();
            p[i] = if target.is_finite() {
                centre[i] + (target - centre[i]) * T::of(0.9)
            } else {
                centre[i] + target.signum() * T::one()
            };
            out.push(p);
        }
    }
    out
}

impl<T: Scalar> ExponentialFamily<T> {
    pub fn spec(&self) -> &ExponentialFamilySpec<T> {
        &self.spec
    }

    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }

    fn exponent(&self, x: T, xi: &[T]) -> T {
        let mut v = (self.spec.carrier)(x);
        for (s, &c) in self.spec.statistics.iter().zip(xi) {
            v += c * s(x);
        }
        v
    }

    /// ψ(ξ) with gradient and Hessian, cached per ξ.
    pub fn log_partition(&self, xi: &[T]) -> Result<Arc<LogPartition<T>>> {
        let key: Vec<u64> = xi.iter().map(|v| v.as_f64().to_bits()).collect();
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let value = Arc::new(self.compute_log_partition(xi)?);
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, value.clone());
        Ok(value)
    }

    fn compute_log_partition(&self, xi: &[T]) -> Result<LogPartition<T>> {
        if xi.len() != self.spec.statistics.len() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.statistics.len(),
                found: xi.len(),
            });
        }
        let n = xi.len();
        let (mode, spread, shift) = self.locate_mass(xi)?;
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        let dim = 1 + n + pairs.len();
        let method = if self.spec.support.is_discrete() {
            Method::ExactSum
        } else {
            Method::Quadrature
        };
        let out = integrate_measure(
            &self.spec.support,
            (mode, spread),
            dim,
            |x, o: &mut [T]| {
                let w = (self.exponent(x, xi) - shift).exp();
                if w == T::zero() {
                    return;
                }
                let f: Vec<T> = self.spec.statistics.iter().map(|s| s(x)).collect();
                o[0] = w;
                for i in 0..n {
                    o[1 + i] = w * f[i];
                }
                for (p, &(i, j)) in pairs.iter().enumerate() {
                    o[1 + n + p] = w * f[i] * f[j];
                }
            },
            &self.budget,
            method,
        )?;
        let z = out.values[0];
        if !(z > T::zero() && z.is_finite()) || !out.converged {
            return Err(Error::NonConverged(format!(
                "normalization integral at {:?} gave {z} (converged: {})",
                vec_f64(xi),
                out.converged
            )));
        }
        let gradient: Vec<T> = (0..n).map(|i| out.values[1 + i] / z).collect();
        let mut hessian = Matrix::zeros(n, n);
        for (p, &(i, j)) in pairs.iter().enumerate() {
            let c = out.values[1 + n + p] / z - gradient[i] * gradient[j];
            hessian[(i, j)] = c;
            hessian[(j, i)] = c;
        }
        Ok(LogPartition {
            psi: z.ln() + shift,
            gradient,
            hessian,
            mode,
            spread,
        })
    }

    /// Mode of the exponent, its value, and a curvature-based spread.
    fn locate_mass(&self, xi: &[T]) -> Result<(T, T, T)> {
        let h = |x: T| self.exponent(x, xi);
        match &self.spec.support {
            Support::Finite(points) => {
                let best = points
                    .iter()
                    .map(|&x| (x, h(x)))
                    .filter(|(_, v)| v.is_finite())
                    .fold((T::zero(), T::neg_infinity()), |a, b| if b.1 > a.1 { b } else { a });
                Ok((best.0, T::one(), finite_or_zero(best.1)))
            }
            Support::Naturals => {
                let mut best = (T::zero(), h(T::zero()));
                let mut k = 1usize;
                // Walk while the exponent keeps increasing, doubling the stride.
                let mut stride = 1usize;
                while k < 100_000_000 {
                    let v = h(T::of_usize(k));
                    if !(v > best.1) {
                        if stride == 1 {
                            break;
                        }
                        k = best.0.to_usize().unwrap_or(0) + 1;
                        stride = 1;
                        continue;
                    }
                    best = (T::of_usize(k), v);
                    k += stride;
                    stride *= 2;
                }
                Ok((best.0, (best.0 + T::one()).sqrt(), finite_or_zero(best.1)))
            }
            Support::Interval { lo, hi } => {
                let (lo, hi) = (*lo, *hi);
                let candidates: Vec<T> = if lo.is_finite() && hi.is_finite() {
                    (0..=256)
                        .map(|i| lo + (hi - lo) * T::of(i as f64 / 256.0))
                        .collect()
                } else {
                    (-600..=600)
                        .map(|i| T::of((i as f64 * 0.025).sinh()))
                        .filter(|&x| x >= lo && x <= hi)
                        .collect()
                };
                let mut best_i = None;
                let mut best_v = T::neg_infinity();
                for (i, &x) in candidates.iter().enumerate() {
                    let v = h(x);
                    if v.is_finite() && v > best_v {
                        best_v = v;
                        best_i = Some(i);
                    }
                }
                let i = best_i.ok_or_else(|| {
                    Error::Construction("exponent is not finite anywhere on the support".into())
                })?;
                let left = candidates[i.saturating_sub(1)];
                let right = candidates[(i + 1).min(candidates.len() - 1)];
                let mode = golden_max(&h, left, right);
                let v = h(mode).max(best_v);
                let step = (right - left).abs().max(T::epsilon()) * T::of(0.05);
                let curv = (h(mode + step) - v - v + h(mode - step)) / (step * step);
                let spread = if curv < T::zero() && curv.is_finite() {
                    T::one() / (-curv).sqrt()
                } else {
                    (right - left).abs().max(T::one())
                };
                Ok((mode, spread, finite_or_zero(v)))
            }
            Support::Continuous => Ok((T::zero(), T::one(), T::zero())),
        }
    }
}

fn finite_or_zero<T: Scalar>(v: T) -> T {
    if v.is_finite() {
        v
    } else {
        T::zero()
    }
}

fn golden_max<T: Scalar>(h: &dyn Fn(T) -> T, mut a: T, mut b: T) -> T {
    let g = T::of((5f64.sqrt() - 1.0) / 2.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..80 {
        if (b - a).abs() <= T::epsilon() * (a.abs() + b.abs()) {
            break;
        }
        if h(c) > h(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    (a + b) * T::of(0.5)
}

impl<T: Scalar> ParametricFamily<T> for ExponentialFamily<T> {
    fn name(&self) -> &str {
        &self.spec.name
    }

    fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    fn support(&self) -> &Support<T> {
        &self.spec.support
    }

    fn log_density_raw(&self, x: T, xi: &[T]) -> T {
        match self.log_partition(xi) {
            Ok(lp) => self.exponent(x, xi) - lp.psi,
            Err(_) => T::nan(),
        }
    }

    fn analytic_score(&self, x: T, xi: &[T]) -> Option<Vec<T>> {
        Some(match self.log_partition(xi) {
            Ok(lp) => self
                .spec
                .statistics
                .iter()
                .zip(&lp.gradient)
                .map(|(f, &m)| f(x) - m)
                .collect(),
            Err(_) => vec![T::nan(); xi.len()],
        })
    }

    fn has_analytic_score(&self) -> bool {
        true
    }

    fn analytic_hessian(&self, _x: T, xi: &[T]) -> Option<Matrix<T>> {
        Some(match self.log_partition(xi) {
            Ok(lp) => lp.hessian.scale(-T::one()),
            Err(_) => Matrix::from_fn(xi.len(), xi.len(), |_, _| T::nan()),
        })
    }

    fn sample(&self, xi: &[T], seed: u64, count: usize) -> Result<Vec<T>> {
        self.domain.check(xi)?;
        let lp = self.log_partition(xi)?;
        let ld = |x: T| self.exponent(x, xi) - lp.psi;
        inverse_cdf_draws(&ld, &self.spec.support, (lp.mode, lp.spread), seed, count)
    }

    fn location_scale(&self, xi: &[T]) -> (T, T) {
        match self.log_partition(xi) {
            Ok(lp) => (lp.mode, lp.spread),
            Err(_) => (T::zero(), T::one()),
        }
    }
}
