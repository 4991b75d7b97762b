//! Estimator experiments: Cramér-Rao checks, curved submodels and the
//! second-order MSE expansion.

mod covariance;
mod curved;
mod estimator;
mod expansion;
mod experiment;

pub use covariance::{
    cramer_rao_check, estimator_covariance, jackknife, run_trials, CovarianceReport, CramerRaoCheck, Verdict,
    JACKKNIFE_GROUPS, MAX_DISCARD_FRACTION,
};
pub use curved::{
    embedding_curvature, induced_geometry, CurvedFamily, CurvedModelSpec, EmbeddingCurvature, EmbeddingFn,
    InducedGeometry, JacobianFn,
};
pub use estimator::{maximum_likelihood, mean, median, EstimatorFn, EstimatorSpec, SUMMARY_VARIABLES};
pub use expansion::{asymptotic_mse, k_tensor, mse_terms, MseExpansionTerms};
pub use experiment::{
    leading_mle_bias, model_mle, mse_experiment, BiasCorrection, ExperimentOptions, MseExperiment, MseRow,
    TrialPolicy, SECOND_ORDER_TOLERANCE,
};
