//! Expectation engine: `E_ξ[f(X)]` against a family.
//!
//! The method follows the support: finite and countable supports are summed
//! exactly (countable ones up to a geometric tail bound), declared intervals
//! use adaptive Gauss–Kronrod quadrature after compactifying infinite ends,
//! and anything else falls back to seeded Monte Carlo with the family's
//! sampler. Integrands are always weighted as `f(x)·exp(log p(x; ξ))`.

mod discrete;
mod kronrod;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{ParametricFamily, Support};
use crate::scalar::Scalar;

pub(crate) use kronrod::Chart;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactSum,
    Quadrature,
    MonteCarlo,
}

/// Accuracy and cost knobs for one expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Budget {
    /// Relative tolerance for quadrature.
    pub rel_tol: f64,
    /// Absolute tolerance floor for quadrature.
    pub abs_tol: f64,
    /// Maximum integrand evaluations for quadrature and countable sums.
    pub max_evals: usize,
    /// Draws used by the Monte Carlo path.
    pub mc_samples: usize,
    pub seed: u64,
    /// Relative tail bound for countable sums.
    pub tail_tol: f64,
    /// Overrides the support-driven choice of method.
    pub method: Option<Method>,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_evals: 500_000,
            mc_samples: 1_000_000,
            seed: 0,
            tail_tol: 1e-15,
            method: None,
        }
    }
}

impl Budget {
    pub fn with_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = Some(method);
        self
    }

    pub fn with_mc(mut self, samples: usize, seed: u64) -> Self {
        self.mc_samples = samples;
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectationResult<T> {
    pub value: T,
    pub error_estimate: T,
    pub method: Method,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorExpectation<T> {
    pub values: Vec<T>,
    pub error_estimates: Vec<T>,
    pub method: Method,
    pub evaluations: usize,
    pub converged: bool,
}

impl<T: Scalar> VectorExpectation<T> {
    pub fn max_error(&self) -> T {
        crate::scalar::max_abs(&self.error_estimates)
    }
}

/// `E_ξ[f(X)]` for a scalar integrand.
pub fn expect<T, Fam, F>(family: &Fam, xi: &[T], f: F, budget: &Budget) -> Result<ExpectationResult<T>>
where
    T: Scalar,
    Fam: ParametricFamily<T> + ?Sized,
    F: Fn(T) -> T + Sync,
{
    let r = expect_vec(family, xi, 1, |x, out| out[0] = f(x), budget)?;
    Ok(ExpectationResult {
        value: r.values[0],
        error_estimate: r.error_estimates[0],
        method: r.method,
        evaluations: r.evaluations,
        converged: r.converged,
    })
}

/// `E_ξ[f(X)]` for a vector integrand writing `dim` components into its buffer.
///
/// All components share the same nodes, so each entry is a single joint
/// expectation rather than a combination of separate ones.
pub fn expect_vec<T, Fam, F>(
    family: &Fam,
    xi: &[T],
    dim: usize,
    f: F,
    budget: &Budget,
) -> Result<VectorExpectation<T>>
where
    T: Scalar,
    Fam: ParametricFamily<T> + ?Sized,
    F: Fn(T, &mut [T]) + Sync,
{
    family.domain().check(xi)?;
    let weighted = |x: T, out: &mut [T]| {
        let p = family.log_density_raw(x, xi).exp();
        if p == T::zero() {
            return;
        }
        f(x, out);
        for v in out.iter_mut() {
            *v *= p;
        }
    };
    let method = budget.method.unwrap_or(match family.support() {
        Support::Finite(_) | Support::Naturals => Method::ExactSum,
        Support::Interval { .. } => Method::Quadrature,
        Support::Continuous => Method::MonteCarlo,
    });
    match method {
        Method::MonteCarlo => monte_carlo(family, xi, dim, &f, budget),
        _ => integrate_measure(
            family.support(),
            family.location_scale(xi),
            dim,
            weighted,
            budget,
            method,
        ),
    }
}

/// Integrates `f` against the base measure of `support` (Lebesgue on
/// intervals, counting on discrete sets). `hint` is a rough centre/spread.
pub(crate) fn integrate_measure<T, F>(
    support: &Support<T>,
    hint: (T, T),
    dim: usize,
    f: F,
    budget: &Budget,
    method: Method,
) -> Result<VectorExpectation<T>>
where
    T: Scalar,
    F: Fn(T, &mut [T]),
{
    match (support, method) {
        (Support::Finite(points), _) => {
            let out = discrete::finite(points, dim, f)?;
            Ok(VectorExpectation {
                values: out.values,
                error_estimates: vec![T::zero(); dim],
                method: Method::ExactSum,
                evaluations: out.evaluations,
                converged: true,
            })
        }
        (Support::Naturals, _) => {
            let (centre, spread) = hint;
            let start = (centre + T::of(10.0) * spread)
                .max(T::zero())
                .min(T::of(1e7))
                .to_usize()
                .unwrap_or(0);
            let out = discrete::naturals(dim, start, budget.tail_tol, budget.max_evals.max(start + 64), f)?;
            Ok(VectorExpectation {
                values: out.values,
                error_estimates: vec![out.tail_bound; dim],
                method: Method::ExactSum,
                evaluations: out.evaluations,
                converged: out.converged,
            })
        }
        (Support::Interval { lo, hi }, _) => {
            let chart = Chart::for_interval(*lo, *hi, hint.0, hint.1);
            let out = kronrod::adaptive(chart, dim, budget.rel_tol, budget.abs_tol, budget.max_evals, f)?;
            Ok(VectorExpectation {
                values: out.values,
                error_estimates: out.errors,
                method: Method::Quadrature,
                evaluations: out.evaluations,
                converged: out.converged,
            })
        }
        (Support::Continuous, _) => Err(Error::Invalid(
            "support has no declared interval; use Monte Carlo".into(),
        )),
    }
}

const MC_CHUNK: usize = 4096;

fn monte_carlo<T, Fam, F>(
    family: &Fam,
    xi: &[T],
    dim: usize,
    f: &F,
    budget: &Budget,
) -> Result<VectorExpectation<T>>
where
    T: Scalar,
    Fam: ParametricFamily<T> + ?Sized,
    F: Fn(T, &mut [T]) + Sync,
{
    let n = budget.mc_samples.max(2);
    let samples = family.sample(xi, budget.seed, n)?;
    // Per-chunk sums in parallel, combined in chunk order for reproducibility.
    let partials: Vec<Result<(Vec<T>, Vec<T>)>> = samples
        .par_chunks(MC_CHUNK)
        .map(|chunk| {
            let mut s = vec![T::zero(); dim];
            let mut s2 = vec![T::zero(); dim];
            let mut buf = vec![T::zero(); dim];
            for &x in chunk {
                buf.iter_mut().for_each(|v| *v = T::zero());
                f(x, &mut buf);
                if buf.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Integration { x: x.as_f64() });
                }
                for c in 0..dim {
                    s[c] += buf[c];
                    s2[c] += buf[c] * buf[c];
                }
            }
            Ok((s, s2))
        })
        .collect();
    let mut sum = vec![T::zero(); dim];
    let mut sum2 = vec![T::zero(); dim];
    for p in partials {
        let (s, s2) = p?;
        for c in 0..dim {
            sum[c] += s[c];
            sum2[c] += s2[c];
        }
    }
    let nf = T::of_usize(n);
    let mut values = Vec::with_capacity(dim);
    let mut errors = Vec::with_capacity(dim);
    for c in 0..dim {
        let mean = sum[c] / nf;
        let var = ((sum2[c] / nf - mean * mean) * nf / (nf - T::one())).max(T::zero());
        values.push(mean);
        errors.push((var / nf).sqrt());
    }
    Ok(VectorExpectation {
        values,
        error_estimates: errors,
        method: Method::MonteCarlo,
        evaluations: n,
        converged: true,
    })
}
