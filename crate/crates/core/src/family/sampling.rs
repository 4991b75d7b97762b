//! Generic samplers for families that only know their density.

use rand::Rng;

use crate::error::{Error, Result};
use crate::family::Support;
use crate::integrate::Chart;
use crate::rng::generator;
use crate::scalar::Scalar;

const GRID_CELLS: usize = 8192;

/// Draws by inverting a tabulated CDF.
///
/// Discrete supports are inverted exactly (countable ones truncated where
/// the remaining mass drops below 1e-15). Intervals are tabulated with the
/// midpoint rule on a uniform grid in the quadrature chart, so the draws
/// follow a piecewise-constant approximation of the density in that chart.
pub(crate) fn inverse_cdf_draws<T: Scalar>(
    log_density: &dyn Fn(T) -> T,
    support: &Support<T>,
    hint: (T, T),
    seed: u64,
    count: usize,
) -> Result<Vec<T>> {
    let mut rng = generator(seed);
    match support {
        Support::Finite(points) => {
            let w: Vec<f64> = points.iter().map(|&x| log_density(x).exp().as_f64()).collect();
            let cdf = cumulative(&w)?;
            Ok((0..count)
                .map(|_| points[locate(&cdf, rng.random::<f64>())])
                .collect())
        }
        Support::Naturals => {
            let mut w = Vec::new();
            let mut total = 0.0;
            let centre = hint.0.as_f64().max(0.0);
            for k in 0..10_000_000usize {
                let p = log_density(T::of_usize(k)).exp().as_f64();
                w.push(p);
                total += p;
                if k as f64 > centre && p < 1e-17 * total.max(1e-300) && total > 0.0 {
                    break;
                }
            }
            let cdf = cumulative(&w)?;
            Ok((0..count)
                .map(|_| T::of_usize(locate(&cdf, rng.random::<f64>())))
                .collect())
        }
        Support::Interval { lo, hi } => {
            let chart = Chart::for_interval(*lo, *hi, hint.0, hint.1);
            let (t0, t1) = chart.t_range();
            let dt = (t1 - t0) / T::of_usize(GRID_CELLS);
            let mut w = Vec::with_capacity(GRID_CELLS);
            for i in 0..GRID_CELLS {
                let t = t0 + dt * (T::of_usize(i) + T::of(0.5));
                let (x, jac) = chart.map(t);
                let v = (log_density(x).exp() * jac * dt).as_f64();
                w.push(if v.is_finite() { v.max(0.0) } else { 0.0 });
            }
            let cdf = cumulative(&w)?;
            Ok((0..count)
                .map(|_| {
                    let u: f64 = rng.random();
                    let i = locate(&cdf, u);
                    let below = if i == 0 { 0.0 } else { cdf[i - 1] };
                    let frac = if w[i] > 0.0 {
                        ((u - below) / (cdf[i] - below)).clamp(0.0, 1.0)
                    } else {
                        0.5
                    };
                    let t = t0 + dt * (T::of_usize(i) + T::of(frac));
                    chart.map(t).0
                })
                .collect())
        }
        Support::Continuous => Err(Error::Invalid(
            "cannot build a sampler for a support without a declared interval".into(),
        )),
    }
}

fn cumulative(w: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Invalid("density has no mass to sample from".into()));
    }
    let mut acc = 0.0;
    Ok(w.iter()
        .map(|v| {
            acc += v / total;
            acc
        })
        .collect())
}

fn locate(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}
