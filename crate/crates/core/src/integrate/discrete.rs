//! Exact summation over finite and countable supports.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) struct SumOutcome<T> {
    pub values: Vec<T>,
    pub tail_bound: T,
    pub evaluations: usize,
    pub converged: bool,
}

fn accumulate<T: Scalar, F>(x: T, f: &mut F, scratch: &mut [T], acc: &mut [T]) -> Result<T>
where
    F: FnMut(T, &mut [T]),
{
    scratch.iter_mut().for_each(|v| *v = T::zero());
    f(x, scratch);
    if scratch.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration { x: x.as_f64() });
    }
    let mut norm = T::zero();
    for (a, &s) in acc.iter_mut().zip(scratch.iter()) {
        *a += s;
        norm = norm.max(s.abs());
    }
    Ok(norm)
}

pub(crate) fn finite<T: Scalar, F>(points: &[T], dim: usize, mut f: F) -> Result<SumOutcome<T>>
where
    F: FnMut(T, &mut [T]),
{
    let mut acc = vec![T::zero(); dim];
    let mut scratch = vec![T::zero(); dim];
    for &x in points {
        accumulate(x, &mut f, &mut scratch, &mut acc)?;
    }
    Ok(SumOutcome {
        values: acc,
        tail_bound: T::zero(),
        evaluations: points.len(),
        converged: true,
    })
}

/// Sums `f(k)` for `k = 0, 1, 2, …`.
///
/// Summation runs at least past `start_after`; it stops once the terms are
/// decaying geometrically and the geometric tail bound `|t_k|·r/(1−r)`
/// (with `r` the largest ratio over the last few terms) falls below
/// `tail_tol · max(1, ‖S‖∞)`.
pub(crate) fn naturals<T: Scalar, F>(
    dim: usize,
    start_after: usize,
    tail_tol: f64,
    max_terms: usize,
    mut f: F,
) -> Result<SumOutcome<T>>
where
    F: FnMut(T, &mut [T]),
{
    const WINDOW: usize = 4;
    let mut acc = vec![T::zero(); dim];
    let mut scratch = vec![T::zero(); dim];
    let mut recent: Vec<T> = Vec::with_capacity(WINDOW + 1);
    let tol = T::of(tail_tol);
    let mut bound = T::infinity();
    for k in 0..max_terms {
        let norm = accumulate(T::of_usize(k), &mut f, &mut scratch, &mut acc)?;
        recent.push(norm);
        if recent.len() > WINDOW + 1 {
            recent.remove(0);
        }
        if k < start_after || recent.len() <= WINDOW {
            continue;
        }
        if norm == T::zero() && recent.iter().all(|v| *v == T::zero()) {
            bound = T::zero();
        } else {
            let ratio = recent
                .windows(2)
                .map(|w| {
                    if w[0] == T::zero() {
                        if w[1] == T::zero() {
                            T::zero()
                        } else {
                            T::infinity()
                        }
                    } else {
                        w[1] / w[0]
                    }
                })
                .fold(T::zero(), T::max);
            if ratio >= T::one() {
                continue;
            }
            bound = norm * ratio / (T::one() - ratio);
        }
        let scale = T::one().max(crate::scalar::max_abs(&acc));
        if bound <= tol * scale {
            return Ok(SumOutcome {
                values: acc,
                tail_bound: bound,
                evaluations: k + 1,
                converged: true,
            });
        }
    }
    Ok(SumOutcome {
        values: acc,
        tail_bound: bound,
        evaluations: max_terms,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_mass_sums_to_one() {
        let lambda: f64 = 3.0;
        let out = naturals(2, 0, 1e-12, 10_000, |k: f64, o: &mut [f64]| {
            let p = (k * lambda.ln() - lambda - statrs::function::gamma::ln_gamma(k + 1.0)).exp();
            o[0] = p;
            o[1] = k * p;
        })
        .unwrap();
        assert!(out.converged);
        assert!((out.values[0] - 1.0).abs() < 1e-13);
        assert!((out.values[1] - lambda).abs() < 1e-12);
        assert!(out.tail_bound < 1e-12 * 3.0);
    }

    #[test]
    fn geometric_tail() {
        let out = naturals(1, 0, 1e-12, 10_000, |k: f64, o: &mut [f64]| o[0] = 0.5f64.powf(k + 1.0))
            .unwrap();
        assert!((out.values[0] - 1.0).abs() < 2e-12);
    }

    #[test]
    fn divergent_series_is_not_converged() {
        let out = naturals(1, 0, 1e-12, 500, |k: f64, o: &mut [f64]| o[0] = 1.0 / (k + 1.0)).unwrap();
        assert!(!out.converged);
    }
}
