use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};
use statmanifold::connection::local_geometry;
use statmanifold::curvature::{riemann_tensor, sectional_curvature, COEFFICIENT_FLAT_TOL, CURVATURE_FLAT_TOL};
use statmanifold::family::spec::FamilySpec;
use statmanifold::family::{validate_family, FamilyRef, ParametricFamily};
use statmanifold::geodesic::{integrate_geodesic, GeodesicOptions, GeodesicStatus};
use statmanifold::inference::{
    cramer_rao_check, estimator_covariance, model_mle, mse_experiment, EstimatorSpec, ExperimentOptions, TrialPolicy,
};
use statmanifold::integrate::Budget;
use statmanifold::linalg::Tensor4;
use statmanifold::metric::{fisher_matrix, fisher_matrix_hessian};
use statmanifold::{Error, Result};

use crate::args::*;
use crate::model::ModelDocument;

/// Diagnostics thresholds used by `validate`.
const NORMALIZATION_TOL: f64 = 1e-8;
const SCORE_MEAN_TOL: f64 = 1e-6;
const SCORE_FD_TOL: f64 = 1e-6;
const ANTISYMMETRY_TOL: f64 = 1e-4;

/// Exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub enum Body {
    Json(Value),
    Csv(String),
}

/// A finished run: the report plus the exit status it implies.
pub struct Outcome {
    pub body: Body,
    pub status: i32,
    /// Extra configuration resolved while running (embedded specs, defaults).
    pub resolved: Value,
}

impl Outcome {
    fn json(value: impl Serialize, status: i32, resolved: Value) -> Result<Self> {
        let value = serde_json::to_value(value).map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(Self {
            body: Body::Json(value),
            status,
            resolved,
        })
    }
}

fn budget(c: &Common) -> Budget {
    Budget::default().with_tol(c.tol).with_mc(c.mc_samples, c.seed)
}

fn load_family(path: &std::path::Path) -> Result<(FamilySpec, FamilyRef<f64>)> {
    let spec = FamilySpec::load(path)?;
    let family = spec.build::<f64>()?;
    Ok((spec, family))
}

fn family_config(spec: &FamilySpec) -> Value {
    json!({ "family_spec": spec })
}

fn json_only(c: &Common, command: &str) -> Result<()> {
    if c.format == Format::Csv {
        return Err(Error::Invalid(format!("{command} only produces JSON output")));
    }
    Ok(())
}

fn converged_status(converged: bool) -> i32 {
    if converged {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    }
}

/// A point inside the domain: box midpoints, or failing that a point
/// biased towards the lower corner (which keeps simplex constraints).
fn interior_point(family: &dyn ParametricFamily<f64>) -> Vec<f64> {
    let bounds = family.domain().bounds().to_vec();
    let n = bounds.len() as f64;
    let pick = |frac: f64| -> Vec<f64> {
        bounds
            .iter()
            .map(|&(lo, hi)| match (lo.is_finite(), hi.is_finite()) {
                (true, true) => lo + (hi - lo) * frac,
                (true, false) => lo + 1.0,
                (false, true) => hi - 1.0,
                (false, false) => 0.0,
            })
            .collect()
    };
    let mid = pick(0.5);
    if family.domain().contains(&mid) {
        mid
    } else {
        pick(1.0 / (n + 1.0))
    }
}

pub fn validate(a: &ValidateArgs) -> Result<Outcome> {
    json_only(&a.common, "validate")?;
    let (spec, family) = load_family(&a.family)?;
    let at = a.at.clone().unwrap_or_else(|| interior_point(family.as_ref()));
    let d = validate_family(family.as_ref(), &at, a.reference.as_deref(), &budget(&a.common))?;
    let checks = json!({
        "normalization": d.normalization_residual < NORMALIZATION_TOL,
        "score_mean": d.score_mean_residual < SCORE_MEAN_TOL,
        "score_finite_difference": d.score_fd_deviation.map_or(true, |v| v < SCORE_FD_TOL),
        "support_invariant": d.support_invariant,
    });
    let ok = checks.as_object().unwrap().values().all(|v| v == &Value::Bool(true));
    let status = if !ok {
        EXIT_VALIDATION
    } else {
        converged_status(d.converged)
    };
    let mut resolved = family_config(&spec);
    resolved["at"] = json!(at);
    Outcome::json(
        json!({
            "ok": ok,
            "checks": checks,
            "tolerances": {
                "normalization": NORMALIZATION_TOL,
                "score_mean": SCORE_MEAN_TOL,
                "score_finite_difference": SCORE_FD_TOL,
            },
            "diagnostics": d,
        }),
        status,
        resolved,
    )
}

pub fn fisher(a: &FisherArgs) -> Result<Outcome> {
    json_only(&a.common, "fisher")?;
    let (spec, family) = load_family(&a.family)?;
    let b = budget(&a.common);
    let g = match a.form {
        FormArg::Score => fisher_matrix(family.as_ref(), &a.at, &b)?,
        FormArg::Hessian => fisher_matrix_hessian(family.as_ref(), &a.at, &b)?,
    };
    Outcome::json(
        json!({
            "at": g.at(),
            "form": g.form(),
            "entries": g.entries(),
            "inverse": g.inverse()?,
            "condition_number": g.condition_number()?,
            "error_estimate": g.error_estimate(),
            "converged": g.converged(),
        }),
        converged_status(g.converged()),
        family_config(&spec),
    )
}

pub fn connection(a: &ConnectionArgs) -> Result<Outcome> {
    json_only(&a.common, "connection")?;
    let (spec, family) = load_family(&a.family)?;
    let geo = local_geometry(family.as_ref(), &a.at, &budget(&a.common))?;
    let gamma = geo.connection(a.alpha);
    let second = geo.christoffel(a.alpha)?;
    let skew = geo.skewness();
    Outcome::json(
        json!({
            "at": a.at,
            "alpha": a.alpha,
            "gamma_first_kind": gamma.entries,
            "gamma_second_kind": second.entries,
            "skewness": skew.entries,
            "asymmetry": gamma.asymmetry,
            "error_estimate": geo.error_estimate,
            "converged": geo.converged,
        }),
        converged_status(geo.converged),
        family_config(&spec),
    )
}

fn nested4(t: &Tensor4<f64>) -> Vec<Vec<Vec<Vec<f64>>>> {
    let n = t.side();
    (0..n)
        .map(|l| (0..n).map(|k| (0..n).map(|i| (0..n).map(|j| t[[l, k, i, j]]).collect()).collect()).collect())
        .collect()
}

pub fn curvature(a: &CurvatureArgs) -> Result<Outcome> {
    json_only(&a.common, "curvature")?;
    let (spec, family) = load_family(&a.family)?;
    let b = budget(&a.common);
    let geo = local_geometry(family.as_ref(), &a.at, &b)?;
    let gamma_max = geo.connection(a.alpha).entries.max_abs();
    let r = riemann_tensor(family.as_ref(), &a.at, a.alpha, Some(a.h), &b)?;
    let sectional = if family.dim() == 2 {
        let g = geo.fisher()?;
        Some(sectional_curvature(&r, &g, &[1.0, 0.0], &[0.0, 1.0])?)
    } else {
        None
    };
    let antisymmetry = r.antisymmetry_residual();
    Outcome::json(
        json!({
            "at": a.at,
            "alpha": a.alpha,
            "riemann": nested4(&r.entries),
            "riemann_max_abs": r.max_abs(),
            "connection_max_abs": gamma_max,
            "sectional": sectional,
            "antisymmetry_residual": antisymmetry,
            "verdicts": {
                "flat_connection": gamma_max < COEFFICIENT_FLAT_TOL,
                "flat_curvature": r.max_abs() < CURVATURE_FLAT_TOL,
                "antisymmetric": antisymmetry < ANTISYMMETRY_TOL,
            },
            "tolerances": {
                "connection": COEFFICIENT_FLAT_TOL,
                "curvature": CURVATURE_FLAT_TOL,
                "antisymmetry": ANTISYMMETRY_TOL,
            },
        }),
        converged_status(geo.converged),
        family_config(&spec),
    )
}

pub fn geodesic(a: &GeodesicArgs) -> Result<Outcome> {
    let (spec, family) = load_family(&a.family)?;
    let dt = a.dt.unwrap_or(a.t_end / 1000.0);
    let options = GeodesicOptions {
        budget: budget(&a.common),
        ..GeodesicOptions::default().with_dt(dt)
    };
    let path = integrate_geodesic(family.as_ref(), &a.from, &a.velocity, a.alpha, a.t_end, &options)?;
    let status = match path.status {
        GeodesicStatus::Completed => EXIT_OK,
        GeodesicStatus::HitBoundary => EXIT_VALIDATION,
        GeodesicStatus::StepFailure => EXIT_NUMERICAL,
    };
    let mut resolved = family_config(&spec);
    resolved["dt"] = json!(dt);
    let last = path.last();
    match a.common.format {
        Format::Csv => Ok(Outcome {
            body: Body::Csv(path.to_csv()),
            status,
            resolved,
        }),
        Format::Json => Outcome::json(
            json!({
                "status": path.status,
                "message": path.message,
                "steps": path.samples.len() - 1,
                "t": last.t,
                "endpoint": last.xi,
                "end_velocity": last.velocity,
            }),
            status,
            resolved,
        ),
    }
}

fn estimator_for(kind: EstimatorArg, expr: Option<&str>, family: FamilyRef<f64>, at: &[f64]) -> Result<EstimatorSpec<f64>> {
    Ok(match kind {
        EstimatorArg::Mean => EstimatorSpec::sample_mean(),
        EstimatorArg::Median => EstimatorSpec::sample_median(),
        EstimatorArg::Mle => EstimatorSpec::mle(family, at.to_vec()),
        EstimatorArg::Expr => {
            let source = expr.ok_or_else(|| Error::Invalid("--estimator expr needs --expr".into()))?;
            EstimatorSpec::from_expression(source, true)?
        }
    })
}

pub fn cramer_rao(a: &CramerRaoArgs) -> Result<Outcome> {
    json_only(&a.common, "cramer-rao")?;
    let (spec, family) = load_family(&a.family)?;
    family.domain().check(&a.at)?;
    let est = estimator_for(a.estimator, a.expr.as_deref(), family.clone(), &a.at)?;
    let report = estimator_covariance(family.as_ref(), &a.at, &est, a.n, a.trials, a.common.seed)?;
    let g = fisher_matrix(family.as_ref(), &a.at, &budget(&a.common))?;
    let check = cramer_rao_check(&report, &g)?;
    Outcome::json(
        json!({ "verdict": check.verdict, "check": check, "report": report }),
        converged_status(g.converged()),
        family_config(&spec),
    )
}

pub fn mse_expansion(a: &MseArgs) -> Result<Outcome> {
    let loaded = ModelDocument::load(&a.model)?.build()?;
    let model = &loaded.spec;
    let estimator = match a.estimator {
        EstimatorArg::Mle => model_mle(model, &a.at),
        other => estimator_for(other, a.expr.as_deref(), Arc::new(model.family()), &a.at)?,
    };
    let max = a.max_trials.unwrap_or(4 * a.trials);
    let options = ExperimentOptions {
        trials: TrialPolicy {
            initial: a.trials,
            max,
            ..TrialPolicy::default()
        },
        seed: a.common.seed,
        budget: budget(&a.common),
        h_m_a: loaded.ancillary.clone(),
        ..Default::default()
    };
    let exp = mse_experiment(model, &a.at, &estimator, &a.n_list, &options)?;
    let resolved = json!({
        "model_spec": loaded.document,
        "max_trials": max,
        "target_ratio": options.trials.target_ratio,
        "bias_correction": options.bias_correction,
    });
    match a.common.format {
        Format::Csv => Ok(Outcome {
            body: Body::Csv(exp.to_csv()),
            status: EXIT_OK,
            resolved,
        }),
        Format::Json => {
            let t = &exp.terms;
            Outcome::json(
                json!({
                    "at": exp.u_true,
                    "estimator": exp.estimator,
                    "g_ab": t.g_model,
                    "g_inverse": t.g_inverse,
                    "K_ab": t.k,
                    "components": {
                        "gamma_m_sq": t.gamma_m_sq,
                        "h_e_sq": t.h_e_sq,
                        "h_m_a_sq": t.h_m_a_sq,
                    },
                    "flags": {
                        "ancillary_assumed_m_flat": t.ancillary_assumed_m_flat,
                        "components_psd": t.min_component_eigenvalue >= -1e-12,
                        "second_order_consistent": exp.rows.iter().map(|r| r.second_order_consistent).collect::<Vec<_>>(),
                    },
                    "leading_bias": exp.leading_bias,
                    "rows": exp.rows,
                }),
                EXIT_OK,
                resolved,
            )
        }
    }
}
