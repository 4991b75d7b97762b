//! Numerical information geometry for parametric families.
//!
//! A [`family::ParametricFamily`] is treated as a statistical manifold. On top
//! of it the crate computes the Fisher metric, α-connections, curvature and
//! geodesics, and runs Monte Carlo estimator experiments. Everything is
//! generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases below fix `f64`.

pub mod connection;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod family;
pub mod geodesic;
pub mod inference;
pub mod integrate;
pub mod linalg;
pub mod metric;
pub mod rng;
pub mod scalar;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Scalar;

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Matrix64 = linalg::Matrix<f64>;
pub type Tensor3_64 = linalg::Tensor3<f64>;
pub type Budget64 = integrate::Budget;
pub type ExpectationResult64 = integrate::ExpectationResult<f64>;
pub type FamilyRef64 = family::FamilyRef<f64>;
