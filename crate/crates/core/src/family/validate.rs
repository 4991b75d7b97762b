use serde::Serialize;

use super::exponential::{probe_points, statistic_grid};
use super::{finite_difference_score, ParametricFamily};
use crate::error::Result;
use crate::integrate::{expect_vec, Budget, Method};
use crate::scalar::{max_abs, vec_f64, Scalar};

/// Numerical check of the regularity assumptions at one parameter value.
#[derive(Debug, Clone, Serialize)]
pub struct FamilyDiagnostics {
    pub at: Vec<f64>,
    pub reference: Vec<f64>,
    /// `|∫p − 1|`.
    pub normalization_residual: f64,
    /// `max_i |E[∂_i l]|`; infinite when the score is not integrable.
    pub score_mean_residual: f64,
    /// Largest gap between analytic and central-difference scores on the grid.
    pub score_fd_deviation: Option<f64>,
    /// Whether `p(x; ξ) > 0 ⇔ p(x; ξ₀) > 0` on every grid point.
    pub support_invariant: bool,
    /// First grid point where support membership differs, if any.
    pub support_violation: Option<f64>,
    pub method: Method,
    pub converged: bool,
}

/// Runs the diagnostics at ξ against a reference ξ₀ (defaults to the
/// centre of the domain). Never fails on a bad family: problems show up as
/// residuals and verdicts. Errors are only returned for invalid ξ.
pub fn validate_family<T, F>(
    family: &F,
    xi: &[T],
    reference: Option<&[T]>,
    budget: &Budget,
) -> Result<FamilyDiagnostics>
where
    T: Scalar,
    F: ParametricFamily<T> + ?Sized,
{
    family.domain().check(xi)?;
    let reference: Vec<T> = match reference {
        Some(r) => {
            family.domain().check(r)?;
            r.to_vec()
        }
        None => probe_points(family.domain())
            .into_iter()
            .find(|p| family.domain().contains(p))
            .unwrap_or_else(|| xi.to_vec()),
    };
    let n = family.dim();
    let mass = expect_vec(family, xi, 1, |_, out| out[0] = T::one(), budget)?;
    // A badly behaved score (e.g. at a moving support edge) is a finding, not an error.
    let score = expect_vec(
        family,
        xi,
        n,
        |x, out| out.copy_from_slice(&family.score_raw(x, xi)),
        budget,
    );

    let grid = statistic_grid(family.support());
    let mut violation = None;
    for &x in &grid {
        let here = positive(family.log_density_raw(x, xi));
        let there = positive(family.log_density_raw(x, &reference));
        if here != there {
            violation = Some(x.as_f64());
            break;
        }
    }

    let score_fd_deviation = if family.has_analytic_score() {
        let mut worst = T::zero();
        for &x in &grid {
            if !positive(family.log_density_raw(x, xi)) {
                continue;
            }
            let a = family.score_raw(x, xi);
            let fd = finite_difference_score(family, x, xi);
            for (u, v) in a.iter().zip(&fd) {
                let scale = T::one().max(u.abs());
                worst = worst.max((*u - *v).abs() / scale);
            }
        }
        Some(worst.as_f64())
    } else {
        None
    };

    Ok(FamilyDiagnostics {
        at: vec_f64(xi),
        reference: vec_f64(&reference),
        normalization_residual: (mass.values[0] - T::one()).abs().as_f64(),
        score_mean_residual: score
            .as_ref()
            .map_or(f64::INFINITY, |s| max_abs(&s.values).as_f64()),
        score_fd_deviation,
        support_invariant: violation.is_none(),
        support_violation: violation,
        method: mass.method,
        converged: mass.converged && score.map_or(false, |s| s.converged),
    })
}

fn positive<T: Scalar>(log_p: T) -> bool {
    log_p > T::neg_infinity()
}
