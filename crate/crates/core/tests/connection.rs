use proptest::prelude::*;
use statmanifold::connection::{
    alpha_connection, christoffel_second_kind, convert_connection, local_geometry, metric_compatibility_residual,
    skewness_tensor, ConnectionCoefficients,
};
use statmanifold::family::{uniform_beta_mixture, Bernoulli, Gaussian, Poisson};
use statmanifold::integrate::Budget;
use statmanifold::linalg::{Matrix, Tensor3};
use statmanifold::metric::{fisher_matrix, FisherForm, FisherMatrix};
use statmanifold::Error;

fn gaussian_metric(sigma: f64) -> [[f64; 2]; 2] {
    [[1.0 / (sigma * sigma), 0.0], [0.0, 2.0 / (sigma * sigma)]]
}

/// `½(∂_i g_jk + ∂_j g_ik − ∂_k g_ij)` from central differences of the
/// closed-form Gaussian metric `diag(1/σ², 2/σ²)`.
fn levi_civita_oracle(p: [f64; 2]) -> Tensor3<f64> {
    let h = 1e-5;
    let dg = |k: usize| {
        let (mut a, mut b) = (p, p);
        a[k] += h;
        b[k] -= h;
        let (ga, gb) = (gaussian_metric(a[1]), gaussian_metric(b[1]));
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = (ga[i][j] - gb[i][j]) / (2.0 * h);
            }
        }
        out
    };
    let d = [dg(0), dg(1)];
    Tensor3::from_fn([2, 2, 2], |i, j, k| 0.5 * (d[i][j][k] + d[j][i][k] - d[k][i][j]))
}

#[test]
fn exponential_and_mixture_families_are_flat() {
    let p = Poisson::<f64>::new();
    for theta in [-1.0, 0.0, 1.0] {
        let g = alpha_connection(&p, &[theta], 1.0, &Budget::default()).unwrap();
        assert!(g.entries.max_abs() < 1e-6, "{theta}: {}", g.entries.max_abs());
    }
    let m = uniform_beta_mixture::<f64>().unwrap();
    for xi in [0.2, 0.5, 0.8] {
        let g = alpha_connection(&m, &[xi], -1.0, &Budget::default()).unwrap();
        assert!(g.entries.max_abs() < 1e-6, "{xi}: {}", g.entries.max_abs());
    }
}

#[test]
fn gaussian_levi_civita_matches_oracle() {
    let g = Gaussian::<f64>::new();
    for p in [[0.0, 1.0], [-1.0, 0.5], [1.0, 2.0]] {
        let gamma = alpha_connection(&g, &p, 0.0, &Budget::default()).unwrap();
        let oracle = levi_civita_oracle(p);
        assert!(gamma.entries.max_abs_diff(&oracle) < 1e-6, "{p:?}");
        assert!((gamma.entries[(0, 0, 1)] - 1.0 / p[1].powi(3)).abs() < 1e-8);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert_eq!(gamma.entries[(i, j, k)], gamma.entries[(j, i, k)]);
                }
            }
        }
    }
}

#[test]
fn skewness_closed_forms() {
    let g = Gaussian::<f64>::new();
    for s in [0.5, 1.0, 2.0] {
        let t = skewness_tensor(&g, &[0.3, s], &Budget::default()).unwrap();
        assert!(t.entries[(0, 0, 0)].abs() < 1e-9);
        let expect = 2.0 / s.powi(3);
        for (i, j, k) in [(0, 0, 1), (0, 1, 0), (1, 0, 0)] {
            assert!((t.entries[(i, j, k)] - expect).abs() < 1e-8 * expect);
        }
    }
    let b = Bernoulli::<f64>::new();
    let t = skewness_tensor(&b, &[0.5], &Budget::default()).unwrap();
    assert!(t.entries.max_abs() < 1e-14);
}

#[test]
fn conversion_matches_direct_computation() {
    let g = Gaussian::<f64>::new();
    let p = [0.4, 1.3];
    let budget = Budget::default();
    let t = skewness_tensor(&g, &p, &budget).unwrap();
    let e = alpha_connection(&g, &p, 1.0, &budget).unwrap();
    let m = alpha_connection(&g, &p, -1.0, &budget).unwrap();
    let converted = convert_connection(&e, &t, -1.0).unwrap();
    assert_eq!(converted.alpha, -1.0);
    assert!(converted.entries.max_abs_diff(&m.entries) < 1e-6);
    let same = convert_connection(&e, &t, 1.0).unwrap();
    assert_eq!(same.entries, e.entries);
}

#[test]
fn conversion_rejects_mismatched_points() {
    let g = Gaussian::<f64>::new();
    let t = skewness_tensor(&g, &[0.0, 1.0], &Budget::default()).unwrap();
    let e = alpha_connection(&g, &[0.0, 1.5], 1.0, &Budget::default()).unwrap();
    assert!(matches!(convert_connection(&e, &t, 0.0), Err(Error::BasePointMismatch { .. })));
}

#[test]
fn conversion_and_combination_identities() {
    let g = Gaussian::<f64>::new();
    let p = [-0.3, 0.8];
    let budget = Budget::default();
    let t = skewness_tensor(&g, &p, &budget).unwrap();
    let at = |a: f64| alpha_connection(&g, &p, a, &budget).unwrap();
    let (g0, g1, gm1) = (at(0.0), at(1.0), at(-1.0));
    let betas = [-0.73, 0.41, 1.9];
    for alpha in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let ga = at(alpha);
        for &beta in &betas {
            let direct = at(beta);
            let conv = convert_connection(&ga, &t, beta).unwrap();
            assert!(conv.entries.max_abs_diff(&direct.entries) < 1e-6);
        }
        let first = g0.entries.map(|v| (1.0 - alpha) * v).axpy(alpha, &g1.entries);
        let second = g1.entries.map(|v| (1.0 + alpha) / 2.0 * v).axpy((1.0 - alpha) / 2.0, &gm1.entries);
        assert!(ga.entries.max_abs_diff(&first) < 1e-6);
        assert!(ga.entries.max_abs_diff(&second) < 1e-6);
    }
}

#[test]
fn second_kind_examples() {
    let g = Gaussian::<f64>::new();
    let p = [0.0, 1.6];
    let gamma = alpha_connection(&g, &p, 0.0, &Budget::default()).unwrap();
    let metric = fisher_matrix(&g, &p, &Budget::default()).unwrap();
    let c = christoffel_second_kind(&gamma, &metric).unwrap();
    // Γ^σ_{μμ}, stored upper index first.
    assert!((c.entries[(1, 0, 0)] - 1.0 / (2.0 * p[1])).abs() < 1e-8);

    let flat = ConnectionCoefficients {
        at: vec![0.0, 1.0],
        alpha: 1.0,
        entries: Tensor3::cube(2),
        asymmetry: 0.0,
    };
    let id = FisherMatrix::new(vec![0.0, 1.0], Matrix::identity(2), FisherForm::ScoreOuter).unwrap();
    assert_eq!(christoffel_second_kind(&flat, &id).unwrap().entries.max_abs(), 0.0);
    let raw = ConnectionCoefficients {
        entries: Tensor3::from_fn([2, 2, 2], |i, j, k| (i + j) as f64 * 0.5 + k as f64),
        ..flat
    };
    let c = christoffel_second_kind(&raw, &id).unwrap();
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(c.entries[(k, i, j)], raw.entries[(i, j, k)]);
            }
        }
    }
}

#[test]
fn metric_compatibility_on_grids() {
    let g = Gaussian::<f64>::new();
    for mu in [-1.0, 0.0, 1.0] {
        for sigma in [0.5, 1.0, 2.0] {
            let r = metric_compatibility_residual(&g, &[mu, sigma], 1e-3, &Budget::default()).unwrap();
            assert!(r.max_abs() < 1e-5, "({mu},{sigma}): {}", r.max_abs());
        }
    }
    let p = Poisson::<f64>::new();
    for theta in [-1.0, 0.0, 1.0] {
        let r = metric_compatibility_residual(&p, &[theta], 1e-3, &Budget::default()).unwrap();
        assert!(r.max_abs() < 1e-5, "{theta}: {}", r.max_abs());
    }
}

#[test]
fn stencil_leaving_the_domain_is_an_error() {
    let g = Gaussian::<f64>::new();
    assert!(matches!(
        metric_compatibility_residual(&g, &[0.0, 0.05], 0.1, &Budget::default()),
        Err(Error::StencilOutsideDomain { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conversion_round_trip(mu in -2.0f64..2.0, sigma in 0.3f64..3.0, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let g = Gaussian::<f64>::new();
        let geo = local_geometry(&g, &[mu, sigma], &Budget::default()).unwrap();
        let t = geo.skewness();
        let ga = geo.connection(a);
        let back = convert_connection(&convert_connection(&ga, &t, b).unwrap(), &t, a).unwrap();
        let scale = 1.0 + ga.entries.max_abs() + t.entries.max_abs();
        prop_assert!(back.entries.max_abs_diff(&ga.entries) <= 4.0 * f64::EPSILON * scale);
    }
}
