//! Built-in families with closed-form log-densities, scores and samplers.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{make_mixture_family, Domain, MixtureFamily, MixtureFamilySpec, ParametricFamily, Support};
use crate::error::{Error, Result};
use crate::rng::generator;
use crate::scalar::Scalar;

fn ln_factorial<T: Scalar>(x: T) -> T {
    T::of(statrs::function::gamma::ln_gamma(x.as_f64() + 1.0))
}

/// `N(μ, σ²)` with ξ = (μ, σ).
#[derive(Debug, Clone)]
pub struct Gaussian<T> {
    domain: Domain<T>,
    support: Support<T>,
}

impl<T: Scalar> Gaussian<T> {
    pub fn new() -> Self {
        Self::with_domain(
            Domain::new(vec![(T::neg_infinity(), T::infinity()), (T::zero(), T::infinity())])
                .expect("valid default domain"),
        )
    }

    pub fn with_domain(domain: Domain<T>) -> Self {
        Self {
            domain,
            support: Support::real_line(),
        }
    }
}

impl<T: Scalar> Default for Gaussian<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn half_ln_two_pi<T: Scalar>() -> T {
    T::of(0.5 * (2.0 * std::f64::consts::PI).ln())
}

fn normal_draws<T: Scalar>(mean: T, sd: T, seed: u64, count: usize) -> Vec<T> {
    let mut rng = generator(seed);
    (0..count)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            mean + sd * T::of(z)
        })
        .collect()
}

impl<T: Scalar> ParametricFamily<T> for Gaussian<T> {
    fn name(&self) -> &str {
        "gaussian"
    }

    fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    fn support(&self) -> &Support<T> {
        &self.support
    }

    fn log_density_raw(&self, x: T, xi: &[T]) -> T {
        let (mu, sigma) = (xi[0], xi[1]);
        let z = (x - mu) / sigma;
        -sigma.ln() - half_ln_two_pi::<T>() - z * z * T::of(0.5)
    }

    fn analytic_score(&self, x: T, xi: &[T]) -> Option<Vec<T>> {
        let (mu, sigma) = (xi[0], xi[1]);
        let d = x - mu;
        let s2 = sigma * sigma;
        Some(vec![d / s2, -T::one() / sigma + d * d / (s2 * sigma)])
    }

    fn has_analytic_score(&self) -> bool {
        true
    }

    fn sample(&self, xi: &[T], seed: u64, count: usize) -> Result<Vec<T>> {
        self.domain.check(xi)?;
        Ok(normal_draws(xi[0], xi[1], seed, count))
    }

    fn location_scale(&self, xi: &[T]) -> (T, T) {
        (xi[0], xi[1])
    }
}

/// `N(μ, σ₀²)` with known σ₀ and ξ = (μ).
#[derive(Debug, Clone)]
pub struct GaussianKnownSigma<T> {
    sigma: T,
    domain: Domain<T>,
    support: Support<T>,
}

impl<T: Scalar> GaussianKnownSigma<T> {
    pub fn new(sigma: T) -> Result<Self> {
        Self::with_domain(sigma, Domain::unbounded(1))
    }

    pub fn with_domain(sigma: T, domain: Domain<T>) -> Result<Self> {
        if !(sigma > T::zero() && sigma.is_finite()) {
            return Err(Error::Construction(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            sigma,
            domain,
            support: Support::real_line(),
        })
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }
}

impl<T: Scalar> ParametricFamily<T> for GaussianKnownSigma<T> {
    fn name(&self) -> &str {
        "gaussian_known_sigma"
    }

    fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    fn support(&self) -> &Support<T> {
        &self.support
    }

    fn log_density_raw(&self, x: T, xi: &[T]) -> T {
        let z = (x - xi[0]) / self.sigma;
        -self.sigma.ln() - half_ln_two_pi::<T>() - z * z * T::of(0.5)
    }

    fn analytic_score(&self, x: T, xi: &[T]) -> Option<Vec<T>> {
        Some(vec![(x - xi[0]) / (self.sigma * self.sigma)])
    }

    fn mean_score(&self, xs: &[T], xi: &[T]) -> Vec<T> {
        let mean = xs.iter().copied().sum::<T>() / T::of_usize(xs.len());
        vec![(mean - xi[0]) / (self.sigma * self.sigma)]
    }

    fn has_analytic_score(&self) -> bool {
        true
    }

    fn sample(&self, xi: &[T], seed: u64, count: usize) -> Result<Vec<T>> {
        self.domain.check(xi)?;
        Ok(normal_draws(xi[0], self.sigma, seed, count))
    }

    fn location_scale(&self, xi: &[T]) -> (T, T) {
        (xi[0], self.sigma)
    }
}

/// Poisson in its natural parameter θ = log λ.
#[derive(Debug, Clone)]
pub struct Poisson<T> {
    domain: Domain<T>,
    support: Support<T>,
}

impl<T: Scalar> Poisson<T> {
    pub fn new() -> Self {
        Self::with_domain(Domain::new(vec![(T::of(-20.0), T::of(20.0))]).expect("valid domain"))
    }

    pub fn with_domain(domain: Domain<T>) -> Self {
        Self {
            domain,
            support: Support::Naturals,
        }
    }
}

impl<T: Scalar> Default for Poisson<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParametricFamily<T> for Poisson<T> {
    fn name(&self) -> &str {
        "poisson"
    }

    fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    fn support(&self) -> &Support<T> {
        &self.support
    }

    fn log_density_raw(&self, x: T, xi: &[T]) -> T {
        x * xi[0] - xi[0].exp() - ln_factorial(x)
    }

    fn analytic_score(&self, x: T, xi: &[T]) -> Option<Vec<T>> {
        Some(vec![x - xi[0].exp()])
    }

    fn mean_score(&self, xs: &[T], xi: &[T]) -> Vec<T> {
        vec![xs.iter().copied().sum::<T>() / T::of_usize(xs.len()) - xi[0].exp()]
    }

    fn has_analytic_score(&self) -> bool {
        true
    }

    fn sample(&self, xi: &[T], seed: u64, count: usize) -> Result<Vec<T>> {
        self.domain.check(xi)?;
        let lambda = xi[0].exp().as_f64();
        let dist = rand_distr::Poisson::new(lambda)
            .map_err(|e| Error::Invalid(format!("poisson sampler: {e}")))?;
        let mut rng = generator(seed);
        Ok((0..count).map(|_| T::of(dist.sample(&mut rng))).collect())
    }

    fn location_scale(&self, xi: &[T]) -> (T, T) {
        let lambda = xi[0].exp();
        (lambda, lambda.sqrt())
    }
}

/// Bernoulli with success probability ξ = (p).
#[derive(Debug, Clone)]
pub struct Bernoulli<T> {
    domain: Domain<T>,
    support: Support<T>,
}

impl<T: Scalar> Bernoulli<T> {
    pub fn new() -> Self {
        Self {
            domain: Domain::new(vec![(T::zero(), T::one())]).expect("valid domain"),
            support: Support::Finite(vec![T::zero(), T::one()]),
        }
    }
}

impl<T: Scalar> Default for Bernoulli<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParametricFamily<T> for Bernoulli<T> {
    fn name(&self) -> &str {
        "bernoulli"
    }

    fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    fn support(&self) -> &Support<T> {
        &self.support
    }

    fn log_density_raw(&self, x: T, xi: &[T]) -> T {
        let p = xi[0];
        if x == T::one() {
            p.ln()
        } else {
            (T::one() - p).ln()
        }
    }

    fn analytic_score(&self, x: T, xi: &[T]) -> Option<Vec<T>> {
        let p = xi[0];
        Some(vec![if x == T::one() {
            T::one() / p
        } else {
            -T::one() / (T::one() - p)
        }])
    }

    fn has_analytic_score(&self) -> bool {
        true
    }

    fn sample(&self, xi: &[T], seed: u64, count: usize) -> Result<Vec<T>> {
        self.domain.check(xi)?;
        let p = xi[0].as_f64();
        let mut rng = generator(seed);
        Ok((0..count)
            .map(|_| {
                if rng.random::<f64>() < p {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect())
    }

    fn location_scale(&self, xi: &[T]) -> (T, T) {
        (xi[0], T::of(0.5))
    }
}

/// Categorical on `{0, …, k−1}` parametrized by the first `k−1` probabilities.
#[derive(Debug, Clone)]
pub struct Categorical<T> {
    k: usize,
    domain: Domain<T>,
    support: Support<T>,
}

impl<T: Scalar> Categorical<T> {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Construction(format!("categorical needs k >= 2, got {k}")));
        }
        let margin = T::of(super::DOMAIN_MARGIN);
        let domain = Domain::new(vec![(T::zero(), T::one()); k - 1])?.with_predicate(
            "probabilities sum below one",
            move |xi: &[T]| xi.iter().copied().sum::<T>() < T::one() - margin,
        );
        Ok(Self {
            k,
            domain,
            support: Support::Finite((0..k).map(T::of_usize).collect()),
        })
    }

    pub fn categories(&self) -> usize {
        self.k
    }

    fn last(&self, xi: &[T]) -> T {
        T::one() - xi.iter().copied().sum::<T>()
    }

    fn category(&self, x: T) -> usize {
        x.to_usize().unwrap_or(0).min(self.k - 1)
    }
}

impl<T: Scalar> ParametricFamily<T> for Categorical<T> {
    fn name(&self) -> &str {
        "categorical"
    }

    fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    fn support(&self) -> &Support<T> {
        &self.support
    }

    fn log_density_raw(&self, x: T, xi: &[T]) -> T {
        let c = self.category(x);
        if c + 1 == self.k {
            self.last(xi).ln()
        } else {
            xi[c].ln()
        }
    }

    fn analytic_score(&self, x: T, xi: &[T]) -> Option<Vec<T>> {
        let c = self.category(x);
        let mut s = vec![T::zero(); self.k - 1];
        if c + 1 == self.k {
            let v = -T::one() / self.last(xi);
            s.iter_mut().for_each(|e| *e = v);
        } else {
            s[c] = T::one() / xi[c];
        }
        Some(s)
    }

    fn has_analytic_score(&self) -> bool {
        true
    }

    fn sample(&self, xi: &[T], seed: u64, count: usize) -> Result<Vec<T>> {
        self.domain.check(xi)?;
        let probs: Vec<f64> = xi.iter().map(|p| p.as_f64()).collect();
        let mut rng = generator(seed);
        Ok((0..count)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return T::of_usize(i);
                    }
                }
                T::of_usize(self.k - 1)
            })
            .collect())
    }
}

/// Mixture of the uniform density and the Beta(2, 1) density on `[0, 1]`:
/// `p(x; ξ) = 1 + ξ (2x − 1)` for ξ ∈ (0, 1).
pub fn uniform_beta_mixture<T: Scalar>() -> Result<MixtureFamily<T>> {
    let spec = MixtureFamilySpec {
        name: "uniform_beta_mixture".into(),
        carrier: Arc::new(|_x: T| T::one()),
        statistics: vec![Arc::new(|x: T| x + x - T::one())],
        support: Support::Interval {
            lo: T::zero(),
            hi: T::one(),
        },
    };
    let family = make_mixture_family(spec, Domain::new(vec![(T::zero(), T::one())])?)?;
    Ok(family.with_sampler(Arc::new(|xi: &[T], u: f64| {
        // Inverse of F(x) = x + ξ(x² − x).
        let a = xi[0].as_f64();
        let x = if a.abs() < 1e-12 {
            u
        } else {
            let b = 1.0 - a;
            (-b + (b * b + 4.0 * a * u).sqrt()) / (2.0 * a)
        };
        T::of(x.clamp(0.0, 1.0))
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::finite_difference_score;

    #[test]
    fn gaussian_log_density_at_mean() {
        let g = Gaussian::<f64>::new();
        let l = g.log_density(0.3, &[0.3, 2.0]).unwrap();
        let expect = -(2.0f64).ln() - (2.0 * std::f64::consts::PI).sqrt().ln();
        assert!((l - expect).abs() < 1e-15);
    }

    #[test]
    fn gaussian_score_example() {
        let g = Gaussian::<f64>::new();
        let s = g.score(1.0, &[0.0, 1.0]).unwrap();
        assert_eq!(s, vec![1.0, 0.0]);
        let fd = finite_difference_score(&g, 1.0, &[0.0, 1.0]);
        assert!((fd[0] - 1.0).abs() < 1e-9 && fd[1].abs() < 1e-9);
    }

    #[test]
    fn poisson_examples() {
        let p = Poisson::<f64>::new();
        assert!((p.log_density(0.0, &[0.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(p.score(2.0, &[0.0]).unwrap(), vec![1.0]);
        assert!(matches!(p.log_density(1.5, &[0.0]), Err(Error::Support { .. })));
        assert!(matches!(p.log_density(1.0, &[25.0]), Err(Error::Domain { .. })));
    }

    #[test]
    fn density_is_exp_log_density() {
        let b = Bernoulli::<f64>::new();
        assert!((b.density(1.0, &[0.3]).unwrap() - 0.3).abs() < 1e-15);
        let c = Categorical::<f64>::new(3).unwrap();
        assert!((c.density(2.0, &[0.2, 0.5]).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn categorical_domain_rejects_outside_simplex() {
        let c = Categorical::<f64>::new(3).unwrap();
        assert!(c.log_density(0.0, &[0.6, 0.6]).is_err());
        assert!(Categorical::<f64>::new(1).is_err());
    }

    #[test]
    fn samplers_are_deterministic() {
        let g = Gaussian::<f64>::new();
        let a = g.sample(&[1.0, 2.0], 42, 16).unwrap();
        assert_eq!(a, g.sample(&[1.0, 2.0], 42, 16).unwrap());
        assert_ne!(a, g.sample(&[1.0, 2.0], 43, 16).unwrap());
    }

    #[test]
    fn single_precision_family() {
        let g = Gaussian::<f32>::new();
        let s = g.score(1.0f32, &[0.0, 1.0]).unwrap();
        assert_eq!(s, vec![1.0f32, 0.0]);
    }

    #[test]
    fn mixture_sampler_mean() {
        let m = uniform_beta_mixture::<f64>().unwrap();
        let xs = m.sample(&[0.5], 1, 200_000).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        // E[X] = 1/2 + ξ/6
        assert!((mean - (0.5 + 0.5 / 6.0)).abs() < 3e-3);
    }
}
