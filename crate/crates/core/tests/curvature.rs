use statmanifold::curvature::{flatness_report, region_grid, riemann_tensor, sectional_curvature};
use statmanifold::family::{uniform_beta_mixture, Bernoulli, Gaussian, Poisson};
use statmanifold::integrate::Budget;
use statmanifold::metric::fisher_matrix;

/// Sectional curvature of `diag(1/σ², 2/σ²)`: with `μ = √2·u` the metric is
/// `2(du² + dσ²)/σ²`, twice the hyperbolic half-plane, so `K = −1/2`.
const GAUSSIAN_K: f64 = -0.5;

fn gaussian_k(mu: f64, sigma: f64) -> f64 {
    let g = Gaussian::<f64>::new();
    let r = riemann_tensor(&g, &[mu, sigma], 0.0, None, &Budget::default()).unwrap();
    let metric = fisher_matrix(&g, &[mu, sigma], &Budget::default()).unwrap();
    sectional_curvature(&r, &metric, &[1.0, 0.0], &[0.0, 1.0]).unwrap()
}

#[test]
fn gaussian_sectional_curvature_on_the_grid() {
    let mut values = Vec::new();
    for mu in [-1.0, 0.0, 1.0] {
        for sigma in [0.5, 1.0, 2.0] {
            let k = gaussian_k(mu, sigma);
            assert!((k - GAUSSIAN_K).abs() < 1e-3, "({mu},{sigma}): {k}");
            values.push(k);
        }
    }
    let spread = values.iter().cloned().fold(f64::MIN, f64::max) - values.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 1e-3);
}

#[test]
fn gaussian_curvature_is_constant_on_a_finer_grid() {
    let grid = region_grid(&[(-2.0, 2.0), (0.5, 2.5)], 5);
    let ks: Vec<f64> = grid.iter().map(|p| gaussian_k(p[0], p[1])).collect();
    let spread = ks.iter().cloned().fold(f64::MIN, f64::max) - ks.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 1e-3, "{ks:?}");
}

#[test]
fn sectional_curvature_is_homogeneous() {
    let g = Gaussian::<f64>::new();
    let p = [0.2, 1.1];
    let r = riemann_tensor(&g, &p, 0.0, None, &Budget::default()).unwrap();
    let metric = fisher_matrix(&g, &p, &Budget::default()).unwrap();
    let k1 = sectional_curvature(&r, &metric, &[1.0, 0.3], &[0.2, 1.0]).unwrap();
    let k2 = sectional_curvature(&r, &metric, &[2.0, 0.6], &[0.2, 1.0]).unwrap();
    assert!((k1 - k2).abs() < 1e-12);
    assert!(sectional_curvature(&r, &metric, &[1.0, 0.0], &[2.0, 0.0]).is_err());
}

#[test]
fn riemann_symmetries() {
    let g = Gaussian::<f64>::new();
    let r = riemann_tensor(&g, &[0.0, 1.0], 0.0, None, &Budget::default()).unwrap();
    assert!(r.antisymmetry_residual() < 1e-4);
    assert!(r.pair_antisymmetry_residual() < 1e-4);
    let r = riemann_tensor(&g, &[0.0, 1.0], 0.7, None, &Budget::default()).unwrap();
    assert!(r.antisymmetry_residual() < 1e-4);
}

#[test]
fn one_parameter_families_have_no_curvature() {
    let b = Bernoulli::<f64>::new();
    for alpha in [-1.0, 0.0, 0.5] {
        let r = riemann_tensor(&b, &[0.3], alpha, None, &Budget::default()).unwrap();
        assert!(r.max_abs() < 1e-12);
    }
}

#[test]
fn flat_families_and_gaussian_report() {
    let p = Poisson::<f64>::new();
    let rep = flatness_report(&p, &region_grid(&[(-1.0, 1.0)], 5), 1.0, None, &Budget::default()).unwrap();
    assert!(rep.max_connection < 1e-5 && rep.max_riemann < 1e-4);
    assert!(rep.flat_connection && rep.flat_curvature && rep.flat);

    let m = uniform_beta_mixture::<f64>().unwrap();
    let rep = flatness_report(&m, &region_grid(&[(0.2, 0.8)], 4), -1.0, None, &Budget::default()).unwrap();
    assert!(rep.flat);

    let g = Gaussian::<f64>::new();
    let rep = flatness_report(&g, &region_grid(&[(-1.0, 1.0), (0.5, 2.0)], 3), 0.0, None, &Budget::default()).unwrap();
    assert!(!rep.flat);
    // At σ = 0.5, R^μ_{σμσ} = K·g_σσ = −0.5 · 8 = −4.
    assert!((rep.max_riemann - 4.0).abs() < 1e-2, "{}", rep.max_riemann);
}

#[test]
fn stencil_refinement_behaves_like_second_order() {
    let g = Gaussian::<f64>::new();
    let p = [0.1, 0.9];
    let at = |h: f64| riemann_tensor(&g, &p, 0.0, Some(h), &Budget::default()).unwrap();
    let (r1, r2, r3) = (at(4e-2), at(2e-2), at(1e-2));
    let d1 = r1.entries.max_abs_diff(&r2.entries);
    let d2 = r2.entries.max_abs_diff(&r3.entries);
    assert!(d2 < d1 / 4.0 * 1.5, "{d1} {d2}");
}
