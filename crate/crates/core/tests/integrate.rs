use proptest::prelude::*;
use statmanifold::family::{Bernoulli, Gaussian, ParametricFamily, Poisson};
use statmanifold::integrate::{expect, Budget, Method};

#[test]
fn gaussian_moments() {
    let g = Gaussian::<f64>::new();
    let b = Budget::default();
    let m2 = expect(&g, &[0.0, 1.0], |x| x * x, &b).unwrap();
    assert_eq!(m2.method, Method::Quadrature);
    assert!((m2.value - 1.0).abs() < 1e-10, "{m2:?}");
    assert!(m2.converged);
    let m4 = expect(&g, &[0.0, 1.0], |x| x.powi(4), &b).unwrap();
    assert!((m4.value - 3.0).abs() < 1e-9, "{m4:?}");
}

#[test]
fn normalization_for_every_builtin() {
    let b = Budget::default();
    let one = |_x: f64| 1.0;
    assert!((expect(&Gaussian::new(), &[0.7, 0.3], one, &b).unwrap().value - 1.0).abs() < 1e-10);
    assert!((expect(&Poisson::new(), &[2.0], one, &b).unwrap().value - 1.0).abs() < 1e-12);
    assert!((expect(&Bernoulli::new(), &[0.2], one, &b).unwrap().value - 1.0).abs() < 1e-15);
}

#[test]
fn narrow_gaussian_is_resolved() {
    let g = Gaussian::<f64>::new();
    let r = expect(&g, &[3.0, 1e-3], |x| (x - 3.0).powi(2), &Budget::default()).unwrap();
    assert!((r.value - 1e-6).abs() < 1e-15, "{r:?}");
}

#[test]
fn poisson_mean_by_exact_sum() {
    let r = expect(&Poisson::<f64>::new(), &[1.5], |x| x, &Budget::default()).unwrap();
    assert_eq!(r.method, Method::ExactSum);
    assert!((r.value - 1.5f64.exp()).abs() < 1e-12, "{r:?} {}", 1.5f64.exp());
}

#[test]
fn nan_integrand_is_an_error() {
    let err = expect(&Gaussian::<f64>::new(), &[0.0, 1.0], |x| if x > 0.5 { f64::NAN } else { x }, &Budget::default());
    assert!(matches!(err, Err(statmanifold::Error::Integration { .. })));
}

#[test]
fn monte_carlo_is_deterministic() {
    let g = Gaussian::<f64>::new();
    let b = Budget::default().with_method(Method::MonteCarlo).with_mc(100_000, 42);
    let a = expect(&g, &[0.0, 1.0], |x| x * x, &b).unwrap();
    let c = expect(&g, &[0.0, 1.0], |x| x * x, &b).unwrap();
    assert_eq!(a.value.to_bits(), c.value.to_bits());
    let d = expect(&g, &[0.0, 1.0], |x| x * x, &b.with_mc(100_000, 43)).unwrap();
    assert_ne!(a.value.to_bits(), d.value.to_bits());
}

#[test]
fn monte_carlo_agrees_with_quadrature() {
    let g = Gaussian::<f64>::new();
    let xi = [0.4, 1.3];
    for (k, f) in [|x: f64| x.sin(), |x: f64| x * x, |x: f64| (-x * x).exp()].iter().enumerate() {
        let q = expect(&g, &xi, f, &Budget::default()).unwrap();
        let mc = expect(&g, &xi, f, &Budget::default().with_method(Method::MonteCarlo).with_mc(200_000, k as u64)).unwrap();
        let tol = 3.0 * (q.error_estimate + mc.error_estimate);
        assert!((q.value - mc.value).abs() < tol, "{k}: {q:?} vs {mc:?}");
    }
}

#[test]
fn doubled_budget_stays_within_error_estimate() {
    let g = Gaussian::<f64>::new();
    let mut rng = 0x9e37_79b9_7f4a_7c15u64;
    let mut next = || {
        rng ^= rng << 13;
        rng ^= rng >> 7;
        rng ^= rng << 17;
        (rng >> 11) as f64 / (1u64 << 53) as f64
    };
    let trials = 100;
    let mut ok = 0;
    for t in 0..trials {
        let a = 0.5 + 2.0 * next();
        let c = next() - 0.5;
        let f = move |x: f64| (a * x).cos() + c * x * x;
        let b = Budget::default().with_method(Method::MonteCarlo).with_mc(20_000, t);
        let r1 = expect(&g, &[0.0, 1.0], f, &b).unwrap();
        let r2 = expect(&g, &[0.0, 1.0], f, &b.with_mc(40_000, t)).unwrap();
        if (r1.value - r2.value).abs() < 4.0 * r1.error_estimate {
            ok += 1;
        }
    }
    assert!(ok >= 95, "{ok}/{trials}");
}

#[test]
fn f32_expectations() {
    let g = Gaussian::<f32>::new();
    let b = Budget::default().with_tol(1e-5);
    let r = expect(&g, &[0.0f32, 1.0], |x| x * x, &b).unwrap();
    assert!((r.value - 1.0).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linearity(a in -3.0f64..3.0, b in -3.0f64..3.0, mu in -2.0f64..2.0, sigma in 0.3f64..3.0) {
        let g = Gaussian::<f64>::new();
        let budget = Budget::default();
        let xi = [mu, sigma];
        let f = |x: f64| x.sin();
        let h = |x: f64| x * x;
        let ef = expect(&g, &xi, f, &budget).unwrap();
        let eh = expect(&g, &xi, h, &budget).unwrap();
        let ec = expect(&g, &xi, |x| a * f(x) + b * h(x), &budget).unwrap();
        let err = a.abs() * ef.error_estimate + b.abs() * eh.error_estimate + ec.error_estimate;
        prop_assert!((ec.value - (a * ef.value + b * eh.value)).abs() <= err.max(1e-12));
    }

    #[test]
    fn score_has_zero_mean(mu in -2.0f64..2.0, sigma in 0.2f64..4.0) {
        let g = Gaussian::<f64>::new();
        for i in 0..2 {
            let r = expect(&g, &[mu, sigma], |x| g.score_raw(x, &[mu, sigma])[i], &Budget::default()).unwrap();
            prop_assert!(r.value.abs() < 1e-6);
        }
    }
}
