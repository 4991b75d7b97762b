//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report is always
//! printed. Exits non-zero if a required criterion fails; the second-order
//! Monte Carlo check under criterion 9 is advisory and never fails the run.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use statmanifold::connection::{alpha_connection, convert_connection, metric_compatibility_residual, skewness_tensor};
use statmanifold::curvature::{flatness_report, region_grid, riemann_tensor, sectional_curvature};
use statmanifold::family::{
    make_exponential_family, uniform_beta_mixture, Bernoulli, Categorical, Domain, ExponentialFamilySpec, FamilyRef,
    Gaussian, GaussianKnownSigma, Poisson, Support,
};
use statmanifold::geodesic::{integrate_geodesic, GeodesicOptions, GeodesicStatus};
use statmanifold::inference::{
    cramer_rao_check, embedding_curvature, estimator_covariance, k_tensor, model_mle, mse_experiment, mse_terms,
    CurvedModelSpec, EstimatorSpec, ExperimentOptions, TrialPolicy, Verdict,
};
use statmanifold::integrate::Budget;
use statmanifold::linalg::{Matrix, Tensor3};
use statmanifold::metric::{fisher_matrix, fisher_matrix_hessian};
use statmanifold::rng::generator;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gaussian_grid() -> Vec<Vec<f64>> {
    let mut grid = Vec::new();
    for mu in [-1.0, 0.0, 1.0] {
        for sigma in [0.5, 1.0, 2.0] {
            grid.push(vec![mu, sigma]);
        }
    }
    grid
}

fn b() -> Budget {
    Budget::default()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let g = Gaussian::<f64>::new();
    let mut worst = 0.0f64;
    for p in gaussian_grid() {
        let s2 = p[1] * p[1];
        let expect = Matrix::from_diag(&[1.0 / s2, 2.0 / s2]);
        let f = fisher_matrix(&g, &p, &b()).unwrap();
        worst = worst.max(f.entries().max_abs_diff(&expect));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-6 && secs < 10.0, format!("max deviation {worst:.2e} (tol 1e-6), {secs:.2} s (limit 10 s)"))
}

fn builtin_grids() -> Vec<(FamilyRef<f64>, Vec<Vec<f64>>)> {
    let one = |v: [f64; 3]| v.iter().map(|&x| vec![x]).collect::<Vec<_>>();
    vec![
        (Arc::new(Gaussian::new()), gaussian_grid()),
        (Arc::new(GaussianKnownSigma::new(1.5).unwrap()), one([-1.0, 0.0, 1.0])),
        (Arc::new(Poisson::new()), one([-1.0, 0.0, 1.0])),
        (Arc::new(Bernoulli::new()), one([0.2, 0.5, 0.8])),
        (
            Arc::new(Categorical::new(3).unwrap()),
            vec![vec![0.2, 0.3], vec![0.5, 0.25], vec![0.1, 0.8]],
        ),
        (Arc::new(uniform_beta_mixture().unwrap()), one([0.2, 0.5, 0.8])),
    ]
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    for (fam, grid) in builtin_grids() {
        for p in grid {
            let a = fisher_matrix(fam.as_ref(), &p, &b()).unwrap();
            let h = fisher_matrix_hessian(fam.as_ref(), &p, &b()).unwrap();
            worst = worst.max(a.entries().max_abs_diff(h.entries()));
        }
    }
    outcome(worst < 1e-5, format!("max |score form − Hessian form| {worst:.2e} over 6 families (tol 1e-5)"))
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    let g = Gaussian::<f64>::new();
    for p in gaussian_grid() {
        worst = worst.max(metric_compatibility_residual(&g, &p, 1e-3, &b()).unwrap().max_abs());
    }
    let poisson = Poisson::<f64>::new();
    for theta in [-1.0, 0.0, 1.0] {
        worst = worst.max(metric_compatibility_residual(&poisson, &[theta], 1e-3, &b()).unwrap().max_abs());
    }
    outcome(worst < 1e-5, format!("max metric-compatibility residual {worst:.2e} (tol 1e-5)"))
}

fn criterion_4() -> Outcome {
    let g = Gaussian::<f64>::new();
    let p = [-0.3, 0.8];
    let t = skewness_tensor(&g, &p, &b()).unwrap();
    let at = |a: f64| alpha_connection(&g, &p, a, &b()).unwrap();
    let (g0, g1, gm1) = (at(0.0), at(1.0), at(-1.0));
    let mut rng = generator(4);
    let mut worst = 0.0f64;
    for alpha in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let ga = at(alpha);
        for _ in 0..3 {
            let beta: f64 = rng.random_range(-2.0..2.0);
            let conv = convert_connection(&ga, &t, beta).unwrap();
            worst = worst.max(conv.entries.max_abs_diff(&at(beta).entries));
        }
        let first = g0.entries.map(|v| (1.0 - alpha) * v).axpy(alpha, &g1.entries);
        let second = g1.entries.map(|v| (1.0 + alpha) / 2.0 * v).axpy((1.0 - alpha) / 2.0, &gm1.entries);
        worst = worst.max(ga.entries.max_abs_diff(&first));
        worst = worst.max(ga.entries.max_abs_diff(&second));
    }
    outcome(worst < 1e-6, format!("max identity residual {worst:.2e} (tol 1e-6)"))
}

fn criterion_5() -> Outcome {
    let p = Poisson::<f64>::new();
    let rp = flatness_report(&p, &region_grid(&[(-1.0, 1.0)], 5), 1.0, None, &b()).unwrap();
    let m = uniform_beta_mixture::<f64>().unwrap();
    let rm = flatness_report(&m, &region_grid(&[(0.2, 0.8)], 5), -1.0, None, &b()).unwrap();
    let pass = rp.max_connection < 1e-5 && rp.max_riemann < 1e-4 && rm.max_connection < 1e-5 && rm.max_riemann < 1e-4;
    outcome(
        pass,
        format!(
            "Poisson α=1: |Γ| {:.1e}, |R| {:.1e}; mixture α=−1: |Γ| {:.1e}, |R| {:.1e} (tol 1e-5, 1e-4)",
            rp.max_connection, rp.max_riemann, rm.max_connection, rm.max_riemann
        ),
    )
}

fn criterion_6() -> Outcome {
    let g = Gaussian::<f64>::new();
    let ks: Vec<f64> = gaussian_grid()
        .iter()
        .map(|p| {
            let r = riemann_tensor(&g, p, 0.0, None, &b()).unwrap();
            let metric = fisher_matrix(&g, p, &b()).unwrap();
            sectional_curvature(&r, &metric, &[1.0, 0.0], &[0.0, 1.0]).unwrap()
        })
        .collect();
    let worst = ks.iter().map(|k| (k + 0.5).abs()).fold(0.0, f64::max);
    let spread = ks.iter().cloned().fold(f64::MIN, f64::max) - ks.iter().cloned().fold(f64::MAX, f64::min);
    outcome(
        worst < 1e-3 && spread < 1e-3,
        format!("max |K + 0.5| {worst:.2e}, spread {spread:.2e} (tol 1e-3; closed form −1/2)"),
    )
}

fn criterion_7() -> Outcome {
    let g = Gaussian::<f64>::new();
    let opts = |dt: f64| GeodesicOptions::default().with_dt(dt);
    let vertical = integrate_geodesic(&g, &[0.0, 1.0], &[0.0, 1.0], 0.0, 2.0, &opts(2e-3)).unwrap();
    let drift = vertical.samples.iter().map(|s| s.xi[0].abs()).fold(0.0, f64::max);

    let fam = make_exponential_family(
        ExponentialFamilySpec {
            name: "gauss_natural".into(),
            carrier: Arc::new(|_x: f64| -0.5 * (2.0 * PI).ln()),
            statistics: vec![Arc::new(|x: f64| x), Arc::new(|x: f64| x * x)],
            support: Support::real_line(),
        },
        Domain::new(vec![(-3.0, 3.0), (-2.0, -0.1)]).unwrap(),
    )
    .unwrap();
    let (x0, v0) = ([0.5, -0.5], [0.4, -0.3]);
    let path = integrate_geodesic(&fam, &x0, &v0, 1.0, 1.0, &opts(0.05)).unwrap();
    let mut bend = 0.0f64;
    for s in &path.samples {
        for i in 0..2 {
            bend = bend.max((s.xi[i] - (x0[i] + s.t * v0[i])).abs());
        }
    }
    let poisson = Poisson::<f64>::new();
    let line = integrate_geodesic(&poisson, &[0.2], &[-0.9], 1.0, 1.0, &opts(1e-2)).unwrap();
    for s in &line.samples {
        bend = bend.max((s.xi[0] - (0.2 - 0.9 * s.t)).abs());
    }

    let err = |dt: f64| {
        let p = integrate_geodesic(&g, &[0.0, 1.0], &[0.0, 1.0], 0.0, 1.0, &opts(dt)).unwrap();
        (p.endpoint()[1] - std::f64::consts::E).abs()
    };
    let (e1, e2, e3) = (err(0.1), err(0.05), err(0.025));
    let order = (e1 / e2).log2().min((e2 / e3).log2());
    let completed = vertical.status == GeodesicStatus::Completed && path.status == GeodesicStatus::Completed;
    outcome(
        completed && drift < 1e-8 && bend < 1e-6 && order >= 3.8,
        format!("vertical |Δμ| {drift:.1e} (tol 1e-8), e-flat deviation {bend:.1e} (tol 1e-6), RK4 order {order:.2} (≥ 3.8)"),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let fam = GaussianKnownSigma::<f64>::new(1.0).unwrap();
    let g = fisher_matrix(&fam, &[0.0], &b()).unwrap();
    let n = 100;
    let mean = estimator_covariance(&fam, &[0.0], &EstimatorSpec::sample_mean(), n, 100_000, 1).unwrap();
    let cm = cramer_rao_check(&mean, &g).unwrap();
    let bound = 1.0 / n as f64;
    let within = (mean.covariance[0][0] - bound).abs() <= 3.0 * mean.standard_errors[0][0];
    let median = estimator_covariance(&fam, &[0.0], &EstimatorSpec::sample_median(), n, 100_000, 2).unwrap();
    let cd = cramer_rao_check(&median, &g).unwrap();
    let ratio = cd.efficiency_ratios[0];
    let ratio_ok = (ratio - PI / 2.0).abs() < 0.1 * PI / 2.0;
    let secs = start.elapsed().as_secs_f64();
    let pass = within
        && cm.verdict == Verdict::Pass
        && cd.verdict == Verdict::Pass
        && cd.gap_eigenvalues[0] > 0.0
        && ratio_ok
        && secs < 60.0;
    outcome(
        pass,
        format!(
            "mean: v = {:.5e} vs 1/N = {bound:.1e} (SE {:.1e}), {:?}; median: {:?}, gap {:.2e}, ratio {ratio:.3} vs π/2 (±10%); {secs:.1} s (limit 60 s)",
            mean.covariance[0][0], mean.standard_errors[0][0], cm.verdict, cd.verdict, cd.gap_eigenvalues[0]
        ),
    )
}

/// Nested-sum transcription of the three contractions.
fn naive_k(gm: &Tensor3<f64>, he: &Tensor3<f64>, hm: &Tensor3<f64>, g: &Matrix<f64>, ga: &Matrix<f64>) -> [Matrix<f64>; 3] {
    let (m, n) = (g.rows(), ga.rows());
    let gi = g.inverse().unwrap();
    let gai = ga.inverse().unwrap();
    let mut out = [Matrix::zeros(m, m), Matrix::zeros(m, m), Matrix::zeros(m, m)];
    for a in 0..m {
        for bb in 0..m {
            for c in 0..m {
                for d in 0..m {
                    for e in 0..m {
                        for f in 0..m {
                            out[0][(a, bb)] += gm[(a, c, d)] * gm[(bb, e, f)] * gi[(c, e)] * gi[(d, f)];
                            for k in 0..n {
                                for l in 0..n {
                                    out[1][(a, bb)] +=
                                        he[(k, c, e)] * he[(l, d, f)] * ga[(k, l)] * gi[(c, d)] * gi[(e, a)] * gi[(f, bb)];
                                }
                            }
                        }
                    }
                }
            }
            for k in 0..n {
                for l in 0..n {
                    for mu in 0..n {
                        for nu in 0..n {
                            out[2][(a, bb)] += hm[(a, k, l)] * hm[(bb, mu, nu)] * gai[(k, mu)] * gai[(l, nu)];
                        }
                    }
                }
            }
        }
    }
    out
}

fn three_point_family() -> FamilyRef<f64> {
    Arc::new(
        make_exponential_family(
            ExponentialFamilySpec {
                name: "three_point".into(),
                carrier: Arc::new(|_x: f64| 0.0),
                statistics: vec![Arc::new(|x: f64| x), Arc::new(|x: f64| x * x)],
                support: Support::Finite(vec![0.0, 1.0, 2.0]),
            },
            Domain::unbounded(2),
        )
        .unwrap(),
    )
}

fn criterion_9() -> (Outcome, Outcome) {
    let mut rng = generator(2024);
    let mut random = |dims: [usize; 3]| Tensor3::from_fn(dims, |_, _, _| rng.random_range(-1.0..1.0));
    let mut contraction = 0.0f64;
    let mut assembly_exact = true;
    let mut spd_rng = generator(7);
    let mut spd = |n: usize| {
        let a = Matrix::from_fn(n, n, |_, _| spd_rng.random_range(-1.0..1.0));
        a.mul(&a.transpose()).unwrap().add(&Matrix::identity(n)).unwrap()
    };
    let mut dims_rng = generator(99);
    for _ in 0..100 {
        let m = dims_rng.random_range(1..=3);
        let n = dims_rng.random_range(m..=4);
        let (gm, he, hm) = (random([m, m, m]), random([n, m, m]), random([m, n, n]));
        let (g, ga) = (spd(m), spd(n));
        let t = k_tensor(&gm, &he, &hm, &g, &ga).unwrap();
        let [g2, e2, a2] = naive_k(&gm, &he, &hm, &g, &ga);
        contraction = contraction
            .max(t.gamma_m_sq.max_abs_diff(&g2))
            .max(t.h_e_sq.max_abs_diff(&e2))
            .max(t.h_m_a_sq.max_abs_diff(&a2));
        let assembled = t.gamma_m_sq.add(&t.h_e_sq.scale(2.0)).unwrap().add(&t.h_m_a_sq).unwrap();
        assembly_exact &= t.k == assembled;
    }

    let affine = CurvedModelSpec::new(
        three_point_family(),
        |u: &[f64]| vec![0.2 + 0.5 * u[0], -0.4 + 0.3 * u[0]],
        Domain::unbounded(1),
    );
    let h_e = [-1.0, 0.0, 1.5]
        .iter()
        .map(|&u| embedding_curvature(&affine, &[u], 1.0, &b()).unwrap().entries.max_abs())
        .fold(0.0, f64::max);

    let gauss = CurvedModelSpec::new(
        Arc::new(GaussianKnownSigma::<f64>::new(1.0).unwrap()),
        |u: &[f64]| u.to_vec(),
        Domain::unbounded(1),
    );
    let opts = ExperimentOptions {
        trials: TrialPolicy::fixed(100_000),
        seed: 5,
        ..Default::default()
    };
    let e = mse_experiment(&gauss, &[0.3], &model_mle(&gauss, &[0.3]), &[10, 100, 1000], &opts).unwrap();
    let scaled = e.rows.last().unwrap().scaled_mse[0][0];
    let first_order = (scaled - 1.0).abs() / 1.0;

    let required = outcome(
        contraction < 1e-12 && assembly_exact && h_e < 1e-5 && first_order < 0.02,
        format!(
            "k_tensor vs naive {contraction:.1e} (tol 1e-12), assembly exact {assembly_exact}, affine H(e) {h_e:.1e} (tol 1e-5), N·MSE at N=1000 {scaled:.4} vs g⁻¹ = 1 (tol 2%)"
        ),
    );

    // Soft check: Poisson in its natural parameter, where K = Γ² = 1/λ².
    let poisson = CurvedModelSpec::new(Arc::new(Poisson::<f64>::new()), |u: &[f64]| u.to_vec(), Domain::unbounded(1));
    let terms = mse_terms(&poisson, &[0.0], None, &b()).unwrap();
    let half_k = terms.k[(0, 0)] / 2.0;
    let opts = ExperimentOptions {
        trials: TrialPolicy::fixed(1_000_000),
        seed: 3,
        ..Default::default()
    };
    let e = mse_experiment(&poisson, &[0.0], &model_mle(&poisson, &[0.0]), &[100], &opts).unwrap();
    let row = &e.rows[0];
    let cv = row.control_variate_residual[0][0];
    let se = row.control_variate_standard_errors[0][0];
    let rel = (cv - half_k).abs() / half_k.abs();
    let advisory = outcome(
        rel < 0.25,
        format!("N²-residual {cv:.3} ± {se:.3} vs K/2 = {half_k:.3}, relative gap {rel:.2} (tol 25%, 1e6 trials, N=100)"),
    );
    (required, advisory)
}

fn run_cli(bin: &Path, dir: &Path, args: &[&str]) -> (Vec<u8>, i32) {
    let out = Command::new(bin).current_dir(dir).args(args).output().expect("CLI runs");
    (out.stdout, out.status.code().unwrap_or(-1))
}

fn criterion_10() -> Outcome {
    let bin = PathBuf::from(env!("CARGO_BIN_EXE_statmanifold"));
    let dir = std::env::temp_dir().join(format!("statmanifold-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let files = [
        ("gaussian.json", r#"{"schema": 1, "kind": "gaussian"}"#),
        ("known.json", r#"{"schema": 1, "kind": "gaussian", "sigma": 1.0}"#),
        (
            "broken.json",
            r#"{"schema": 1, "kind": "mixture_family", "domain": [[0, 1]],
               "support": {"type": "interval", "lo": 0, "hi": 1},
               "carrier": "1", "statistics": ["4*x - 2"]}"#,
        ),
        (
            "poisson_model.json",
            r#"{"schema": 1, "ambient": {"kind": "poisson"}, "embedding": ["u1"], "u_domain": [[-3, 3]]}"#,
        ),
    ];
    for (name, text) in files {
        std::fs::write(dir.join(name), text).unwrap();
    }
    let runs: Vec<(Vec<&str>, i32)> = vec![
        (vec!["validate", "--family", "gaussian.json"], 0),
        (vec!["validate", "--family", "broken.json"], 1),
        (vec!["fisher", "--family", "gaussian.json", "--at", "0,1"], 0),
        (vec!["connection", "--family", "gaussian.json", "--at", "0.2,1.1", "--alpha", "-0.5"], 0),
        (vec!["curvature", "--family", "gaussian.json", "--at", "0,1"], 0),
        (
            vec!["geodesic", "--family", "gaussian.json", "--from", "0,1", "--velocity", "0.5,0.3", "--t-end", "1", "--format", "csv"],
            0,
        ),
        (
            vec!["cramer-rao", "--family", "known.json", "--estimator", "median", "--at", "0", "--n", "100", "--trials", "20000", "--seed", "7"],
            0,
        ),
        (
            vec!["mse-expansion", "--model", "poisson_model.json", "--at", "0", "--n-list", "10,100", "--trials", "5000", "--seed", "3", "--format", "csv"],
            0,
        ),
    ];
    let mut failures = Vec::new();
    for (args, expected) in &runs {
        let (a, sa) = run_cli(&bin, &dir, args);
        let (b, sb) = run_cli(&bin, &dir, args);
        if a != b || sa != *expected || sb != *expected || a.is_empty() {
            failures.push(format!("{} (exit {sa}/{sb}, expected {expected})", args[0]));
        }
    }
    // The documented example: entries [[1,0],[0,2]].
    let (fisher, _) = run_cli(&bin, &dir, &["fisher", "--family", "gaussian.json", "--at", "0,1"]);
    let doc: serde_json::Value = serde_json::from_slice(&fisher).unwrap();
    let entries = &doc["result"]["entries"];
    let expect = [[1.0, 0.0], [0.0, 2.0]];
    for i in 0..2 {
        for j in 0..2 {
            if (entries[i][j].as_f64().unwrap_or(f64::NAN) - expect[i][j]).abs() >= 1e-6 {
                failures.push("fisher example".into());
            }
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    let detail = if failures.is_empty() {
        format!("{} commands byte-identical across two runs with expected exit codes", runs.len())
    } else {
        format!("mismatches: {}", failures.join(", "))
    };
    outcome(failures.is_empty(), detail)
}

fn main() {
    let mut hard_failures = 0;
    let mut report = |label: &str, name: &str, o: Outcome, advisory: bool| {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let tag = if advisory { " (advisory)" } else { "" };
        println!("{verdict} {label} {name}{tag}: {}", o.detail);
        if !o.pass && !advisory {
            hard_failures += 1;
        }
    };
    report("criterion 1", "Gaussian Fisher matrix", criterion_1(), false);
    report("criterion 2", "two Fisher forms agree", criterion_2(), false);
    report("criterion 3", "Levi-Civita metric compatibility", criterion_3(), false);
    report("criterion 4", "conversion and combination identities", criterion_4(), false);
    report("criterion 5", "e- and m-flatness", criterion_5(), false);
    report("criterion 6", "Gaussian sectional curvature", criterion_6(), false);
    report("criterion 7", "geodesics", criterion_7(), false);
    report("criterion 8", "Cramér-Rao experiments", criterion_8(), false);
    let (required, advisory) = criterion_9();
    report("criterion 9", "MSE expansion machinery", required, false);
    report("criterion 9", "second-order residual", advisory, true);
    report("criterion 10", "CLI determinism", criterion_10(), false);
    if hard_failures > 0 {
        println!("{hard_failures} required criteria failed");
        std::process::exit(1);
    }
}
