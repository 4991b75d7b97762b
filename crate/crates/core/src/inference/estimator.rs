use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::family::{FamilyRef, ParametricFamily};
use crate::scalar::Scalar;

pub type EstimatorFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

/// A map from a sample list to a parameter estimate.
#[derive(Clone)]
pub struct EstimatorSpec<T> {
    pub name: String,
    pub map: EstimatorFn<T>,
    pub claims_unbiased: bool,
}

impl<T> fmt::Debug for EstimatorSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EstimatorSpec")
            .field("name", &self.name)
            .field("claims_unbiased", &self.claims_unbiased)
            .finish()
    }
}

impl<T: Scalar> EstimatorSpec<T> {
    pub fn new(name: impl Into<String>, claims_unbiased: bool, map: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            map: Arc::new(map),
            claims_unbiased,
        }
    }

    pub fn estimate(&self, samples: &[T]) -> Vec<T> {
        (self.map)(samples)
    }

    pub fn sample_mean() -> Self {
        Self::new("mean", true, |xs: &[T]| vec![mean(xs)])
    }

    /// Unbiased for symmetric families.
    pub fn sample_median() -> Self {
        Self::new("median", true, |xs: &[T]| vec![median(xs)])
    }

    pub fn constant(value: Vec<T>) -> Self {
        Self::new("constant", false, move |_: &[T]| value.clone())
    }

    /// `est + offset` in every coordinate.
    pub fn shifted(inner: Self, offset: T) -> Self {
        let map = inner.map.clone();
        Self::new(format!("{}+{offset}", inner.name), false, move |xs: &[T]| {
            map(xs).into_iter().map(|v| v + offset).collect()
        })
    }

    /// Maximum likelihood by Newton iteration from `start`.
    pub fn mle(family: FamilyRef<T>, start: Vec<T>) -> Self {
        Self::new("mle", true, move |xs: &[T]| {
            maximum_likelihood(family.as_ref(), xs, &start)
                .unwrap_or_else(|_| vec![T::nan(); start.len()])
        })
    }

    /// One-dimensional estimator from an expression over the summary
    /// statistics `mean`, `median`, `var` (unbiased), `sd`, `min`, `max`,
    /// `sum` and `n`.
    pub fn from_expression(source: &str, claims_unbiased: bool) -> Result<Self> {
        let expr = Expr::parse(source, &SUMMARY_VARIABLES)?;
        Ok(Self::new(format!("expr:{source}"), claims_unbiased, move |xs: &[T]| {
            vec![expr.eval(&summary(xs))]
        }))
    }
}

pub const SUMMARY_VARIABLES: [&str; 8] = ["mean", "median", "var", "sd", "min", "max", "sum", "n"];

fn summary<T: Scalar>(xs: &[T]) -> [T; 8] {
    let n = T::of_usize(xs.len());
    let m = mean(xs);
    let var = if xs.len() > 1 {
        xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / (n - T::one())
    } else {
        T::nan()
    };
    let min = xs.iter().copied().fold(T::infinity(), T::min);
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    [m, median(xs), var, var.sqrt(), min, max, xs.iter().copied().sum(), n]
}

pub fn mean<T: Scalar>(xs: &[T]) -> T {
    xs.iter().copied().sum::<T>() / T::of_usize(xs.len())
}

pub fn median<T: Scalar>(xs: &[T]) -> T {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    if n == 0 {
        return T::nan();
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::of(2.0)
    }
}

/// Maximizes `Σ log p(x_t; ξ)` by Newton's method on the mean score, with
/// the Hessian from central differences of the mean score and step halving
/// to stay in the domain and increase the likelihood.
pub fn maximum_likelihood<T, F>(family: &F, xs: &[T], start: &[T]) -> Result<Vec<T>>
where
    T: Scalar,
    F: ParametricFamily<T> + ?Sized,
{
    family.domain().check(start)?;
    if xs.is_empty() {
        return Err(Error::Invalid("empty sample".into()));
    }
    let n = start.len();
    let loglik = |xi: &[T]| family.log_likelihood(xs, xi);
    let mut xi = start.to_vec();
    let mut current = loglik(&xi);
    for _ in 0..100 {
        let s = family.mean_score(xs, &xi);
        let mut hess = crate::linalg::Matrix::zeros(n, n);
        for j in 0..n {
            let h = crate::family::score_step(xi[j]);
            let mut p = xi.clone();
            p[j] = xi[j] + h;
            let up = family.mean_score(xs, &p);
            p[j] = xi[j] - h;
            let down = family.mean_score(xs, &p);
            for i in 0..n {
                hess[(i, j)] = (up[i] - down[i]) / (h + h);
            }
        }
        let neg = hess.symmetrized().scale(-T::one());
        let step = match neg.cholesky() {
            Some(_) => neg.spd_inverse()?.mul_vec(&s)?,
            // Not locally concave: fall back to gradient ascent.
            None => s.clone(),
        };
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<T> = xi.iter().zip(&step).map(|(&a, &d)| a + t * d).collect();
            if family.domain().contains(&cand) {
                let value = loglik(&cand);
                let slack = T::of(1e-12) * (T::one() + current.abs());
                if value.is_finite() && value >= current - slack {
                    let done = cand
                        .iter()
                        .zip(&xi)
                        .all(|(&a, &b)| (a - b).abs() <= T::of(1e-13) * T::one().max(b.abs()));
                    xi = cand;
                    current = value;
                    accepted = true;
                    if done {
                        return Ok(xi);
                    }
                    break;
                }
            }
            t *= T::of(0.5);
        }
        if !accepted {
            // No ascent step left: the current point is a maximum to working precision.
            return Ok(xi);
        }
    }
    Err(Error::NonConverged("maximum likelihood did not converge in 100 iterations".into()))
}
