//! Mixture families `p(x; ξ) = K(x) + Σ ξ^i F_i(x)`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use super::exponential::{check_independent, statistic_grid};
use super::sampling::inverse_cdf_draws;
use super::{Domain, ParametricFamily, SampleFn, Support};
use crate::error::{Error, Result};
use crate::integrate::{integrate_measure, Budget, Method};
use crate::rng::generator;
use crate::scalar::{vec_f64, Scalar};

#[derive(Clone)]
pub struct MixtureFamilySpec<T> {
    pub name: String,
    /// Base density; must integrate to one.
    pub carrier: SampleFn<T>,
    /// Directions; each must integrate to zero.
    pub statistics: Vec<SampleFn<T>>,
    pub support: Support<T>,
}

impl<T> fmt::Debug for MixtureFamilySpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MixtureFamilySpec")
            .field("name", &self.name)
            .field("statistics", &self.statistics.len())
            .finish()
    }
}

/// Inverse CDF `(ξ, u) ↦ x` for families with a closed-form sampler.
pub type InverseCdf<T> = Arc<dyn Fn(&[T], f64) -> T + Send + Sync>;

#[derive(Clone)]
pub struct MixtureFamily<T> {
    spec: MixtureFamilySpec<T>,
    domain: Domain<T>,
    inverse_cdf: Option<InverseCdf<T>>,
}

impl<T: Scalar> fmt::Debug for MixtureFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MixtureFamily")
            .field("name", &self.spec.name)
            .field("domain", &self.domain)
            .finish()
    }
}

const NORMALIZATION_TOL: f64 = 1e-8;

/// Builds a mixture family, rejecting specs whose carrier does not
/// integrate to one, whose directions do not integrate to zero, or whose
/// density goes negative anywhere on the check grid. The density is affine
/// in ξ, so on a bounded box checking the vertices covers the whole domain.
pub fn make_mixture_family<T: Scalar>(
    spec: MixtureFamilySpec<T>,
    domain: Domain<T>,
) -> Result<MixtureFamily<T>> {
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

    let method = if spec.support.is_discrete() {
        Method::ExactSum
    } else {
        Method::Quadrature
    };
    let budget = Budget::default().with_tol(1e-12);
    let integrals = integrate_measure(
        &spec.support,
        (T::zero(), T::one()),
        n + 1,
        |x, o: &mut [T]| {
            o[0] = (spec.carrier)(x);
            for (i, f) in spec.statistics.iter().enumerate() {
                o[1 + i] = f(x);
            }
        },
        &budget,
        method,
    )?;
    let tol = T::of(NORMALIZATION_TOL);
    if (integrals.values[0] - T::one()).abs() > tol {
        return Err(Error::Construction(format!(
            "carrier integrates to {}, not 1",
            integrals.values[0]
        )));
    }
    for i in 0..n {
        if integrals.values[1 + i].abs() > tol {
            return Err(Error::Construction(format!(
                "statistic {i} integrates to {}, not 0",
                integrals.values[1 + i]
            )));
        }
    }

    let family = MixtureFamily {
        spec,
        domain,
        inverse_cdf: None,
    };
    let grid = statistic_grid(&family.spec.support);
    for xi in family.check_points() {
        for &x in &grid {
            let p = family.raw_density(x, &xi);
            if !(p >= T::zero()) {
                return Err(Error::NegativeDensity {
                    x: x.as_f64(),
                    xi: vec_f64(&xi),
                    value: p.as_f64(),
                });
            }
        }
    }
    Ok(family)
}

impl<T: Scalar> MixtureFamily<T> {
    pub fn spec(&self) -> &MixtureFamilySpec<T> {
        &self.spec
    }

    pub fn with_sampler(mut self, inverse_cdf: InverseCdf<T>) -> Self {
        self.inverse_cdf = Some(inverse_cdf);
        self
    }

    fn raw_density(&self, x: T, xi: &[T]) -> T {
        let mut p = (self.spec.carrier)(x);
        for (f, &c) in self.spec.statistics.iter().zip(xi) {
            p += c * f(x);
        }
        p
    }

    /// Box vertices just inside the margin when bounded, probe points otherwise.
    fn check_points(&self) -> Vec<Vec<T>> {
        let bounds = self.domain.bounds();
        let m = self.domain.margin() * T::of(2.0);
        if bounds.iter().all(|(lo, hi)| lo.is_finite() && hi.is_finite()) && bounds.len() <= 16 {
            let n = bounds.len();
            (0..1usize << n)
                .map(|mask| {
                    (0..n)
                        .map(|i| {
                            let (lo, hi) = bounds[i];
                            if mask >> i & 1 == 1 {
                                hi - m
                            } else {
                                lo + m
                            }
                        })
                        .collect()
                })
                .collect()
        } else {
            super::exponential::probe_points(&self.domain)
        }
    }
}

impl<T: Scalar> ParametricFamily<T> for MixtureFamily<T> {
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
        self.raw_density(x, xi).ln()
    }

    fn analytic_score(&self, x: T, xi: &[T]) -> Option<Vec<T>> {
        let p = self.raw_density(x, xi);
        Some(self.spec.statistics.iter().map(|f| f(x) / p).collect())
    }

    fn has_analytic_score(&self) -> bool {
        true
    }

    fn sample(&self, xi: &[T], seed: u64, count: usize) -> Result<Vec<T>> {
        self.domain.check(xi)?;
        if let Some(inv) = &self.inverse_cdf {
            let mut rng = generator(seed);
            return Ok((0..count).map(|_| inv(xi, rng.random::<f64>())).collect());
        }
        let ld = |x: T| self.log_density_raw(x, xi);
        inverse_cdf_draws(&ld, &self.spec.support, self.location_scale(xi), seed, count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::uniform_beta_mixture;

    fn unit() -> Support<f64> {
        Support::Interval { lo: 0.0, hi: 1.0 }
    }

    #[test]
    fn zero_parameter_gives_carrier() {
        let spec = MixtureFamilySpec {
            name: "m".into(),
            carrier: Arc::new(|_x: f64| 1.0),
            statistics: vec![Arc::new(|x: f64| 2.0 * x - 1.0)],
            support: unit(),
        };
        let fam = make_mixture_family(spec, Domain::new(vec![(-0.5, 0.5)]).unwrap()).unwrap();
        for x in [0.1, 0.5, 0.9] {
            assert!((fam.density(x, &[0.0]).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn builtin_mixture_is_uniform_beta_blend() {
        let fam = uniform_beta_mixture::<f64>().unwrap();
        // ξ q₁ + (1 − ξ) uniform with q₁ = 2x.
        let xi = 0.3;
        let x = 0.8;
        assert!((fam.density(x, &[xi]).unwrap() - (xi * 2.0 * x + (1.0 - xi))).abs() < 1e-15);
    }

    #[test]
    fn negativity_is_reported() {
        let spec = MixtureFamilySpec {
            name: "m".into(),
            carrier: Arc::new(|_x: f64| 1.0),
            statistics: vec![Arc::new(|x: f64| 4.0 * x - 2.0)],
            support: unit(),
        };
        let err = make_mixture_family(spec, Domain::new(vec![(0.0, 1.0)]).unwrap()).unwrap_err();
        match err {
            Error::NegativeDensity { value, .. } => assert!(value < 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unnormalized_carrier_rejected() {
        let spec = MixtureFamilySpec {
            name: "m".into(),
            carrier: Arc::new(|_x: f64| 2.0),
            statistics: vec![Arc::new(|x: f64| 2.0 * x - 1.0)],
            support: unit(),
        };
        assert!(matches!(
            make_mixture_family(spec, Domain::new(vec![(0.0, 1.0)]).unwrap()),
            Err(Error::Construction(_))
        ));
    }

    #[test]
    fn generic_sampler_matches_closed_form_mean() {
        let spec = MixtureFamilySpec {
            name: "m".into(),
            carrier: Arc::new(|_x: f64| 1.0),
            statistics: vec![Arc::new(|x: f64| 2.0 * x - 1.0)],
            support: unit(),
        };
        let fam = make_mixture_family(spec, Domain::new(vec![(0.0, 1.0)]).unwrap()).unwrap();
        let xs = fam.sample(&[0.6], 11, 200_000).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - (0.5 + 0.6 / 6.0)).abs() < 3e-3);
    }
}
