//! Monte Carlo check of the second-order MSE expansion.
//!
//! Each trial records the estimate `û` and the linear score term
//! `ε = g⁻¹ · (1/N) Σ ∂l(x_t; u)`. The estimate is bias-corrected to
//! `d* = û − u − b(u) − ∂b(u)·(û − u)` with the leading MLE bias
//! `b^a = −(1/2N) g^{cd} Γ^(m)a_{cd}`, then the remaining empirical bias is
//! removed. Since `E[ε εᵀ] = g⁻¹/N` exactly, `N² E[d* d*ᵀ − ε εᵀ]` estimates
//! `K/2` with far less noise than the raw MSE does.

use std::sync::Arc;

use serde::Serialize;

use super::covariance::{jackknife, keep_finite, run_trials, unpack, JACKKNIFE_GROUPS};
use super::curved::CurvedModelSpec;
use super::estimator::EstimatorSpec;
use super::expansion::{mse_terms, MseExpansionTerms};
use crate::connection::local_geometry;
use crate::error::{Error, Result};
use crate::family::ParametricFamily;
use crate::integrate::Budget;
use crate::linalg::{Matrix, Tensor3};
use crate::scalar::{vec_f64, Scalar};

/// Relative tolerance of the advisory second-order comparison.
pub const SECOND_ORDER_TOLERANCE: f64 = 0.25;

/// Trial count control: start at `initial` and double while the standard
/// error of the second-order residual exceeds `target_ratio` times the
/// predicted second-order term, never exceeding `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialPolicy {
    pub initial: usize,
    pub max: usize,
    pub target_ratio: f64,
}

impl Default for TrialPolicy {
    fn default() -> Self {
        Self {
            initial: 100_000,
            max: 400_000,
            target_ratio: 0.1,
        }
    }
}

impl TrialPolicy {
    pub fn fixed(trials: usize) -> Self {
        Self {
            initial: trials,
            max: trials,
            target_ratio: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BiasCorrection {
    /// Analytic leading MLE bias plus the empirical remainder.
    #[default]
    Analytic,
    /// Empirical bias only.
    Empirical,
}

#[derive(Debug, Clone)]
pub struct ExperimentOptions<T: Scalar> {
    pub trials: TrialPolicy,
    pub seed: u64,
    pub budget: Budget,
    /// Ancillary curvature `H^a_{κλ}`; zero when absent.
    pub h_m_a: Option<Tensor3<T>>,
    pub bias_correction: BiasCorrection,
}

impl<T: Scalar> Default for ExperimentOptions<T> {
    fn default() -> Self {
        Self {
            trials: TrialPolicy::default(),
            seed: 0,
            budget: Budget::default(),
            h_m_a: None,
            bias_correction: BiasCorrection::default(),
        }
    }
}

/// One sample size. Matrices are full `m × m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseRow {
    pub n: usize,
    pub trials: usize,
    pub discarded: usize,
    /// Bias remaining after the analytic correction.
    pub residual_bias: Vec<f64>,
    pub empirical_mse: Vec<Vec<f64>>,
    pub mse_standard_errors: Vec<Vec<f64>>,
    /// `g⁻¹/N`.
    pub predicted_first_order: Vec<Vec<f64>>,
    /// `g⁻¹/N + K/(2N²)`.
    pub predicted_second_order: Vec<Vec<f64>>,
    /// `N · MSE`.
    pub scaled_mse: Vec<Vec<f64>>,
    /// `N² (MSE − g⁻¹/N)`.
    pub second_order_trend: Vec<Vec<f64>>,
    /// `N² (Cov d* − Cov ε)`, an estimate of `K/2`.
    pub control_variate_residual: Vec<Vec<f64>>,
    pub control_variate_standard_errors: Vec<Vec<f64>>,
    /// Advisory: residual within 25% of `K/2`.
    pub second_order_consistent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MseExperiment<T: Scalar> {
    pub estimator: String,
    pub u_true: Vec<f64>,
    pub seed: u64,
    pub bias_correction: BiasCorrection,
    /// `N · b(u)`.
    pub leading_bias: Vec<f64>,
    pub terms: MseExpansionTerms<T>,
    pub rows: Vec<MseRow>,
}

/// `N · b^a(u) = −½ g^{cd} Γ^(m)a_{cd}` of the submodel family.
pub fn leading_mle_bias<T, F>(family: &F, u: &[T], budget: &Budget) -> Result<Vec<T>>
where
    T: Scalar,
    F: ParametricFamily<T> + ?Sized,
{
    let geo = local_geometry(family, u, budget)?;
    let gi = geo.fisher()?.inverse()?;
    let gamma = geo.christoffel(-T::one())?;
    let m = u.len();
    Ok((0..m)
        .map(|a| {
            let mut s = T::zero();
            for c in 0..m {
                for d in 0..m {
                    s += gi[(c, d)] * gamma.entries[(a, c, d)];
                }
            }
            -T::of(0.5) * s
        })
        .collect())
}

/// `∂_c (N b^a)` by central differences, indexed `[a][c]`.
fn leading_bias_jacobian<T, F>(family: &F, u: &[T], budget: &Budget) -> Result<Vec<Vec<f64>>>
where
    T: Scalar,
    F: ParametricFamily<T> + ?Sized,
{
    let m = u.len();
    let mut jac = vec![vec![0.0; m]; m];
    let mut p = u.to_vec();
    for c in 0..m {
        let h = T::of(1e-4) * T::one().max(u[c].abs());
        p[c] = u[c] + h;
        let up = leading_mle_bias(family, &p, budget)?;
        p[c] = u[c] - h;
        let down = leading_mle_bias(family, &p, budget)?;
        p[c] = u[c];
        for a in 0..m {
            jac[a][c] = ((up[a] - down[a]) / (h + h)).as_f64();
        }
    }
    Ok(jac)
}

fn full(m: usize, f: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
    (0..m).map(|i| (0..m).map(|j| f(i, j)).collect()).collect()
}

fn max_abs(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
}

/// Column means, shifted by the first row so constant columns come out exact.
fn column_means<R: AsRef<[f64]>>(rows: &[R]) -> Vec<f64> {
    let Some(first) = rows.first().map(|r| r.as_ref().to_vec()) else {
        return Vec::new();
    };
    let count = rows.len() as f64;
    (0..first.len())
        .map(|a| first[a] + rows.iter().map(|r| r.as_ref()[a] - first[a]).sum::<f64>() / count)
        .collect()
}

/// Summarizes raw trial rows `[û (m), ε (m)]` at sample size `n`.
#[allow(clippy::too_many_arguments)]
fn summarize(
    raw: &[Vec<f64>],
    discarded: usize,
    n: usize,
    u: &[f64],
    bias: &[f64],
    bias_jac: &[Vec<f64>],
    g_inv: &Matrix<f64>,
    half_k: &Matrix<f64>,
) -> MseRow {
    let m = u.len();
    let nf = n as f64;
    let corrected: Vec<Vec<f64>> = raw
        .iter()
        .map(|r| {
            (0..m)
                .map(|a| {
                    let lin: f64 = (0..m).map(|c| bias_jac[a][c] * (r[c] - u[c])).sum();
                    r[a] - u[a] - (bias[a] + lin) / nf
                })
                .collect()
        })
        .collect();
    let eps: Vec<&[f64]> = raw.iter().map(|r| &r[m..]).collect();
    let centre = column_means(&corrected);
    let eps_centre = column_means(&eps);
    let rows: Vec<Vec<f64>> = corrected
        .iter()
        .zip(&eps)
        .map(|(d, e)| {
            let d: Vec<f64> = d.iter().zip(&centre).map(|(a, b)| a - b).collect();
            let eps: Vec<f64> = e.iter().zip(&eps_centre).map(|(a, b)| a - b).collect();
            let mut row = Vec::with_capacity(m * (m + 1));
            for i in 0..m {
                for j in i..m {
                    row.push(d[i] * d[j]);
                }
            }
            for i in 0..m {
                for j in i..m {
                    row.push(d[i] * d[j] - eps[i] * eps[j]);
                }
            }
            row
        })
        .collect();
    let p = m * (m + 1) / 2;
    let (mse, mse_se) = jackknife(&rows, JACKKNIFE_GROUPS, |mu| mu[..p].to_vec());
    let (cv, cv_se) = jackknife(&rows, JACKKNIFE_GROUPS, |mu| mu[p..].iter().map(|v| v * nf * nf).collect());
    let (mse, mse_se, cv, cv_se) = (unpack(m, &mse), unpack(m, &mse_se), unpack(m, &cv), unpack(m, &cv_se));
    let first = full(m, |i, j| g_inv[(i, j)] / nf);
    let second = full(m, |i, j| first[i][j] + half_k[(i, j)] / (nf * nf));
    let scale = max_abs(&half_k.to_rows());
    let worst = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .fold(0.0f64, |w, (i, j)| w.max((cv[i][j] - half_k[(i, j)]).abs()));
    let consistent = if scale > 0.0 {
        worst <= SECOND_ORDER_TOLERANCE * scale
    } else {
        worst <= 3.0 * max_abs(&cv_se)
    };
    MseRow {
        n,
        trials: raw.len(),
        discarded,
        residual_bias: centre,
        scaled_mse: full(m, |i, j| mse[i][j] * nf),
        second_order_trend: full(m, |i, j| (mse[i][j] - first[i][j]) * nf * nf),
        empirical_mse: mse,
        mse_standard_errors: mse_se,
        predicted_first_order: first,
        predicted_second_order: second,
        control_variate_residual: cv,
        control_variate_standard_errors: cv_se,
        second_order_consistent: consistent,
    }
}

/// Runs the experiment for each sample size in `n_list`.
///
/// Trial `t` at every `N` uses substream `t` of `seed`; extra trials added
/// by the doubling policy extend the same sequence, so results depend only
/// on the inputs.
pub fn mse_experiment<T: Scalar>(
    model: &CurvedModelSpec<T>,
    u_true: &[T],
    estimator: &EstimatorSpec<T>,
    n_list: &[usize],
    options: &ExperimentOptions<T>,
) -> Result<MseExperiment<T>> {
    let policy = options.trials;
    if policy.initial < 2 || policy.max < policy.initial {
        return Err(Error::Invalid("trial policy needs 2 ≤ initial ≤ max".into()));
    }
    if n_list.iter().any(|&n| n < 1) {
        return Err(Error::Invalid("sample sizes must be at least 1".into()));
    }
    let fam = model.family();
    let terms = mse_terms(model, u_true, options.h_m_a.as_ref(), &options.budget)?;
    let m = u_true.len();
    let g_inv = Matrix::from_rows(&terms.g_inverse.to_rows_f64())?;
    let half_k = Matrix::from_rows(&terms.k.to_rows_f64())?.scale(0.5);
    let (bias, bias_jac) = match options.bias_correction {
        BiasCorrection::Analytic => (
            vec_f64(&leading_mle_bias(&fam, u_true, &options.budget)?),
            leading_bias_jacobian(&fam, u_true, &options.budget)?,
        ),
        BiasCorrection::Empirical => (vec![0.0; m], vec![vec![0.0; m]; m]),
    };
    let u64s = vec_f64(u_true);
    let g_inv_t = terms.g_inverse.clone();
    let stat = |xs: &[T]| -> Vec<f64> {
        let est = estimator.estimate(xs);
        if est.len() != m {
            return vec![f64::NAN];
        }
        let s = fam.mean_score(xs, u_true);
        let eps = g_inv_t.mul_vec(&s).unwrap_or_else(|_| vec![T::nan(); m]);
        let mut row = vec_f64(&est);
        row.extend(vec_f64(&eps));
        row
    };

    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut outputs = run_trials(&fam, u_true, n, 0..policy.initial, options.seed, stat)?;
        let row = loop {
            let (kept, discarded) = keep_finite(outputs.clone())?;
            let row = summarize(&kept, discarded, n, &u64s, &bias, &bias_jac, &g_inv, &half_k);
            let target = policy.target_ratio * max_abs(&half_k.to_rows());
            let total = outputs.len();
            if max_abs(&row.control_variate_standard_errors) <= target || total >= policy.max {
                break row;
            }
            let next = (2 * total).min(policy.max);
            outputs.extend(run_trials(&fam, u_true, n, total..next, options.seed, stat)?);
        };
        rows.push(row);
    }
    Ok(MseExperiment {
        estimator: estimator.name.clone(),
        u_true: u64s,
        seed: options.seed,
        bias_correction: options.bias_correction,
        leading_bias: bias,
        terms,
        rows,
    })
}

/// The default estimator for the experiment: MLE in `u` started at `u_true`.
pub fn model_mle<T: Scalar>(model: &CurvedModelSpec<T>, u_true: &[T]) -> EstimatorSpec<T> {
    EstimatorSpec::mle(Arc::new(model.family()), u_true.to_vec())
}

impl<T: Scalar> MseExperiment<T> {
    /// CSV with columns `N, mse_ij.., pred1_ij.., pred2_ij..` followed by
    /// `se_ij.., cv_ij.., cv_se_ij.., trials`, indices row-major from 1.
    pub fn to_csv(&self) -> String {
        let m = self.u_true.len();
        let idx: Vec<String> = (1..=m).flat_map(|i| (1..=m).map(move |j| format!("{i}{j}"))).collect();
        let mut header = vec!["N".to_string()];
        for prefix in ["mse", "pred1", "pred2", "se", "cv", "cv_se"] {
            header.extend(idx.iter().map(|s| format!("{prefix}_{s}")));
        }
        header.push("trials".into());
        let mut out = header.join(",");
        out.push('\n');
        for r in &self.rows {
            let mut cells = vec![r.n.to_string()];
            for mat in [
                &r.empirical_mse,
                &r.predicted_first_order,
                &r.predicted_second_order,
                &r.mse_standard_errors,
                &r.control_variate_residual,
                &r.control_variate_standard_errors,
            ] {
                cells.extend(mat.iter().flatten().map(|v| format!("{v:e}")));
            }
            cells.push(r.trials.to_string());
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}
