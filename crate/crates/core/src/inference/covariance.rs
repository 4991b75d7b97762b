use rayon::prelude::*;
use serde::Serialize;

use super::estimator::EstimatorSpec;
use crate::error::{Error, Result};
use crate::family::ParametricFamily;
use crate::linalg::Matrix;
use crate::metric::FisherMatrix;
use crate::rng::substream_seed;
use crate::scalar::{vec_f64, Scalar};

/// Trials may be discarded for non-finite estimates up to this fraction.
pub const MAX_DISCARD_FRACTION: f64 = 0.01;

/// Delete-a-group jackknife block count.
pub const JACKKNIFE_GROUPS: usize = 100;

/// Runs `trials` independent experiments; trial `t` draws `n` samples from
/// substream `t` of `seed` and maps them through `stat`. The output keeps
/// trial order regardless of scheduling.
pub fn run_trials<T, F, S>(
    family: &F,
    xi: &[T],
    n: usize,
    trials: std::ops::Range<usize>,
    seed: u64,
    stat: S,
) -> Result<Vec<Option<Vec<f64>>>>
where
    T: Scalar,
    F: ParametricFamily<T> + ?Sized,
    S: Fn(&[T]) -> Vec<f64> + Sync,
{
    family.domain().check(xi)?;
    trials
        .into_par_iter()
        .map(|t| {
            let xs = family.sample(xi, substream_seed(seed, t as u64), n)?;
            let v = stat(&xs);
            Ok(v.iter().all(|c| c.is_finite()).then_some(v))
        })
        .collect()
}

/// Drops discarded trials, failing if more than 1% were discarded.
pub(crate) fn keep_finite(outputs: Vec<Option<Vec<f64>>>) -> Result<(Vec<Vec<f64>>, usize)> {
    let total = outputs.len();
    let kept: Vec<Vec<f64>> = outputs.into_iter().flatten().collect();
    let discarded = total - kept.len();
    if discarded as f64 > MAX_DISCARD_FRACTION * total as f64 {
        return Err(Error::Experiment(format!(
            "{discarded} of {total} trials produced non-finite estimates"
        )));
    }
    Ok((kept, discarded))
}

/// Delete-a-group jackknife for a statistic that is a function of the
/// column means of `rows`. Groups are contiguous blocks in trial order.
/// Returns the full-sample statistic and its standard errors.
pub fn jackknife<S>(rows: &[Vec<f64>], groups: usize, stat: S) -> (Vec<f64>, Vec<f64>)
where
    S: Fn(&[f64]) -> Vec<f64>,
{
    let m = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    let mut total = vec![0.0; k];
    for r in rows {
        for (a, v) in total.iter_mut().zip(r) {
            *a += v;
        }
    }
    let means: Vec<f64> = total.iter().map(|s| s / m as f64).collect();
    let full = stat(&means);
    let g = groups.min(m);
    if g < 2 {
        return (full.clone(), vec![f64::NAN; full.len()]);
    }
    let mut leave_out = Vec::with_capacity(g);
    for b in 0..g {
        let (lo, hi) = (b * m / g, (b + 1) * m / g);
        let mut part = vec![0.0; k];
        for r in &rows[lo..hi] {
            for (a, v) in part.iter_mut().zip(r) {
                *a += v;
            }
        }
        let rest = (m - (hi - lo)) as f64;
        let mu: Vec<f64> = total.iter().zip(&part).map(|(t, p)| (t - p) / rest).collect();
        leave_out.push(stat(&mu));
    }
    let q = full.len();
    let gf = g as f64;
    let se = (0..q)
        .map(|c| {
            let avg = leave_out.iter().map(|v| v[c]).sum::<f64>() / gf;
            let ss: f64 = leave_out.iter().map(|v| (v[c] - avg).powi(2)).sum();
            ((gf - 1.0) / gf * ss).sqrt()
        })
        .collect();
    (full, se)
}

/// Monte Carlo covariance of an estimator around the true parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceReport {
    pub estimator: String,
    pub claims_unbiased: bool,
    pub xi_true: Vec<f64>,
    /// Samples per trial.
    pub n: usize,
    /// Trials kept.
    pub trials: usize,
    pub discarded: usize,
    pub seed: u64,
    pub mean_estimate: Vec<f64>,
    pub bias: Vec<f64>,
    pub bias_standard_errors: Vec<f64>,
    /// `v^{ij} = E[(ξ̂^i − ξ^i)(ξ̂^j − ξ^j)]`.
    pub covariance: Vec<Vec<f64>>,
    /// Jackknife standard errors of `covariance`.
    pub standard_errors: Vec<Vec<f64>>,
    /// Sample covariance around the mean estimate.
    pub centered_covariance: Vec<Vec<f64>>,
}

/// Rows `[d_1.., d_i d_j (i ≤ j)..]` with `d = ξ̂ − ξ_true`.
pub(crate) fn deviation_rows(estimates: &[Vec<f64>], truth: &[f64]) -> Vec<Vec<f64>> {
    estimates
        .iter()
        .map(|e| {
            let d: Vec<f64> = e.iter().zip(truth).map(|(a, b)| a - b).collect();
            let mut row = d.clone();
            for i in 0..d.len() {
                for j in i..d.len() {
                    row.push(d[i] * d[j]);
                }
            }
            row
        })
        .collect()
}

pub(crate) fn unpack(n: usize, packed: &[f64]) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            m[i][j] = packed[k];
            m[j][i] = packed[k];
            k += 1;
        }
    }
    m
}

pub fn estimator_covariance<T, F>(
    family: &F,
    xi_true: &[T],
    estimator: &EstimatorSpec<T>,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<CovarianceReport>
where
    T: Scalar,
    F: ParametricFamily<T> + ?Sized,
{
    if n < 1 {
        return Err(Error::Invalid("need at least one sample per trial".into()));
    }
    if trials < 2 {
        return Err(Error::Invalid("need at least two trials".into()));
    }
    let dim = xi_true.len();
    let outputs = run_trials(family, xi_true, n, 0..trials, seed, |xs| {
        let e = estimator.estimate(xs);
        if e.len() != dim {
            return vec![f64::NAN];
        }
        vec_f64(&e)
    })?;
    let (kept, discarded) = keep_finite(outputs)?;
    covariance_report(estimator, vec_f64(xi_true), n, seed, &kept, discarded)
}

pub(crate) fn covariance_report<T: Scalar>(
    estimator: &EstimatorSpec<T>,
    truth: Vec<f64>,
    n: usize,
    seed: u64,
    estimates: &[Vec<f64>],
    discarded: usize,
) -> Result<CovarianceReport> {
    let dim = truth.len();
    let rows = deviation_rows(estimates, &truth);
    let (bias, bias_se) = jackknife(&rows, JACKKNIFE_GROUPS, |mu| mu[..dim].to_vec());
    let (second, second_se) = jackknife(&rows, JACKKNIFE_GROUPS, |mu| mu[dim..].to_vec());
    let m = rows.len() as f64;
    // Unbiased sample covariance: (m/(m−1))·(E[dd] − E[d]E[d]).
    let mut centered = vec![0.0; second.len()];
    let mut k = 0;
    for i in 0..dim {
        for j in i..dim {
            centered[k] = (second[k] - bias[i] * bias[j]) * m / (m - 1.0);
            k += 1;
        }
    }
    Ok(CovarianceReport {
        estimator: estimator.name.clone(),
        claims_unbiased: estimator.claims_unbiased,
        mean_estimate: truth.iter().zip(&bias).map(|(t, b)| t + b).collect(),
        xi_true: truth,
        n,
        trials: estimates.len(),
        discarded,
        seed,
        bias,
        bias_standard_errors: bias_se,
        covariance: unpack(dim, &second),
        standard_errors: unpack(dim, &second_se),
        centered_covariance: unpack(dim, &centered),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The estimator is not (measurably) unbiased, so the bound does not apply.
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CramerRaoCheck {
    pub verdict: Verdict,
    pub reason: Option<String>,
    /// `D = v − g⁻¹/N`.
    pub gap: Vec<Vec<f64>>,
    /// Eigenvalues of `D`, ascending.
    pub gap_eigenvalues: Vec<f64>,
    /// Propagated Monte Carlo standard error of the smallest eigenvalue.
    pub min_eigenvalue_standard_error: f64,
    /// Every eigenvalue of `D` within three standard errors of zero.
    pub near_equality: bool,
    /// Eigenvalues of `N · Lᵀ v L` with `g = L Lᵀ`; 1 means efficient.
    pub efficiency_ratios: Vec<f64>,
    pub bound: Vec<Vec<f64>>,
}

/// Propagated standard error of `uᵀ D u` for a unit vector `u`, treating
/// entry errors as independent.
fn propagated_se(u: &[f64], se: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        for j in 0..u.len() {
            s += (u[i] * u[j] * se[i][j]).powi(2);
        }
    }
    s.sqrt()
}

/// Tests `v ≥ g⁻¹/N` in the Loewner order.
pub fn cramer_rao_check<T: Scalar>(report: &CovarianceReport, g: &FisherMatrix<T>) -> Result<CramerRaoCheck> {
    let at = vec_f64(g.at());
    if at != report.xi_true {
        return Err(Error::BasePointMismatch {
            left: report.xi_true.clone(),
            right: at,
        });
    }
    let dim = at.len();
    let g64 = Matrix::from_rows(&g.entries().to_rows_f64())?;
    let bound = g64.spd_inverse()?.scale(1.0 / report.n as f64);
    let v = Matrix::from_rows(&report.covariance)?;
    let d = v.sub(&bound)?.symmetrized();
    let (vals, vecs) = d.symmetric_eigen()?;
    let ses: Vec<f64> = (0..dim).map(|c| propagated_se(&vecs.column(c), &report.standard_errors)).collect();
    let min_se = ses[0];
    let near_equality = vals.iter().zip(&ses).all(|(l, s)| l.abs() <= 3.0 * s);

    let l = g64.cholesky().ok_or(Error::Singular)?;
    let scaled = l.transpose().mul(&v)?.mul(&l)?.scale(report.n as f64).symmetrized();
    let (ratios, _) = scaled.symmetric_eigen()?;

    let biased = report
        .bias
        .iter()
        .zip(&report.bias_standard_errors)
        .any(|(b, s)| !(b.abs() < 3.0 * s) && *b != 0.0);
    let (verdict, reason) = if !report.claims_unbiased {
        (Verdict::Inapplicable, Some("estimator does not claim to be unbiased".to_string()))
    } else if biased {
        (Verdict::Inapplicable, Some("measured bias exceeds three standard errors".to_string()))
    } else if vals[0] >= -3.0 * min_se {
        (Verdict::Pass, None)
    } else {
        (
            Verdict::Fail,
            Some(format!("smallest gap eigenvalue {} below −3·SE = {}", vals[0], -3.0 * min_se)),
        )
    };
    Ok(CramerRaoCheck {
        verdict,
        reason,
        gap: d.to_rows(),
        gap_eigenvalues: vals,
        min_eigenvalue_standard_error: min_se,
        near_equality,
        efficiency_ratios: ratios,
        bound: bound.to_rows(),
    })
}
