//! JSON family specifications.
//!
//! ```json
//! {"schema": 1, "kind": "gaussian", "dim": 2, "domain": [[null, null], [0, null]]}
//! {"kind": "exponential_family", "dim": 1, "domain": [[-5, 5]],
//!  "support": {"type": "naturals"}, "carrier": "-lgamma(x + 1)", "statistics": ["x"]}
//! ```
//!
//! `null` bounds stand for ±∞. Kinds: `gaussian` (add `"sigma"` for the
//! known-σ family), `poisson`, `bernoulli`, `categorical` (with `"k"`),
//! `exponential_family` and `mixture_family` (with `carrier`, `statistics`
//! and `support`).

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    make_exponential_family, make_mixture_family, Bernoulli, Categorical, Domain,
    ExponentialFamilySpec, FamilyRef, Gaussian, GaussianKnownSigma, MixtureFamilySpec, Poisson,
    SampleFn, Support,
};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::scalar::Scalar;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Gaussian,
    Poisson,
    Bernoulli,
    Categorical,
    ExponentialFamily,
    MixtureFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SupportSpec {
    Naturals,
    Finite { points: Vec<f64> },
    Interval { lo: Option<f64>, hi: Option<f64> },
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub kind: FamilyKind,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub domain: Option<Vec<[Option<f64>; 2]>>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub carrier: Option<String>,
    #[serde(default)]
    pub statistics: Option<Vec<String>>,
    #[serde(default)]
    pub support: Option<SupportSpec>,
    #[serde(default)]
    pub name: Option<String>,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

impl FamilySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if spec.schema != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                spec.schema
            )));
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn expected_dim(&self) -> Result<usize> {
        let implied = match self.kind {
            FamilyKind::Gaussian => Some(if self.sigma.is_some() { 1 } else { 2 }),
            FamilyKind::Poisson | FamilyKind::Bernoulli => Some(1),
            FamilyKind::Categorical => {
                let k = self
                    .k
                    .ok_or_else(|| Error::Invalid("categorical spec needs \"k\"".into()))?;
                Some(k.saturating_sub(1))
            }
            FamilyKind::ExponentialFamily | FamilyKind::MixtureFamily => {
                self.statistics.as_ref().map(Vec::len)
            }
        };
        match (implied, self.dim) {
            (Some(a), Some(b)) if a != b => Err(Error::Invalid(format!(
                "dim {b} does not match the {a} parameters implied by the spec"
            ))),
            (Some(a), _) => Ok(a),
            (None, Some(b)) => Ok(b),
            (None, None) => Err(Error::Invalid("cannot determine the parameter dimension".into())),
        }
    }

    fn domain<T: Scalar>(&self, dim: usize) -> Result<Option<Domain<T>>> {
        let Some(axes) = &self.domain else {
            return Ok(None);
        };
        if axes.len() != dim {
            return Err(Error::Invalid(format!(
                "domain has {} axes but the family has {dim} parameters",
                axes.len()
            )));
        }
        let bounds = axes
            .iter()
            .map(|[lo, hi]| {
                (
                    lo.map_or(T::neg_infinity(), T::of),
                    hi.map_or(T::infinity(), T::of),
                )
            })
            .collect();
        Domain::new(bounds).map(Some)
    }

    fn support<T: Scalar>(&self) -> Result<Support<T>> {
        Ok(
            match self
                .support
                .as_ref()
                .ok_or_else(|| Error::Invalid("custom families need a \"support\"".into()))?
            {
                SupportSpec::Naturals => Support::Naturals,
                SupportSpec::Finite { points } => {
                    Support::Finite(points.iter().map(|&p| T::of(p)).collect())
                }
                SupportSpec::Interval { lo, hi } => Support::Interval {
                    lo: lo.map_or(T::neg_infinity(), T::of),
                    hi: hi.map_or(T::infinity(), T::of),
                },
                SupportSpec::Continuous => Support::Continuous,
            },
        )
    }

    fn functions<T: Scalar>(&self) -> Result<(SampleFn<T>, Vec<SampleFn<T>>)> {
        let carrier = Expr::parse_x(self.carrier.as_deref().unwrap_or("0"))?;
        let stats = self
            .statistics
            .as_ref()
            .ok_or_else(|| Error::Invalid("custom families need \"statistics\"".into()))?
            .iter()
            .map(|s| Expr::parse_x(s))
            .collect::<Result<Vec<_>>>()?;
        let carrier: SampleFn<T> = Arc::new(move |x| carrier.eval1(x));
        let stats = stats
            .into_iter()
            .map(|e| Arc::new(move |x: T| e.eval1(x)) as SampleFn<T>)
            .collect();
        Ok((carrier, stats))
    }

    /// Instantiates the family.
    pub fn build<T: Scalar>(&self) -> Result<FamilyRef<T>> {
        let dim = self.expected_dim()?;
        if dim == 0 {
            return Err(Error::Invalid("families need at least one parameter".into()));
        }
        let domain = self.domain::<T>(dim)?;
        let name = |default: &str| self.name.clone().unwrap_or_else(|| default.to_string());
        Ok(match self.kind {
            FamilyKind::Gaussian => match (self.sigma, domain) {
                (Some(s), Some(d)) => Arc::new(GaussianKnownSigma::with_domain(T::of(s), d)?),
                (Some(s), None) => Arc::new(GaussianKnownSigma::new(T::of(s))?),
                (None, Some(d)) => Arc::new(Gaussian::with_domain(d)),
                (None, None) => Arc::new(Gaussian::new()),
            },
            FamilyKind::Poisson => match domain {
                Some(d) => Arc::new(Poisson::with_domain(d)),
                None => Arc::new(Poisson::new()),
            },
            FamilyKind::Bernoulli => Arc::new(Bernoulli::new()),
            FamilyKind::Categorical => Arc::new(Categorical::new(dim + 1)?),
            FamilyKind::ExponentialFamily => {
                let (carrier, statistics) = self.functions::<T>()?;
                let domain = domain.ok_or_else(|| {
                    Error::Invalid("exponential families need an explicit \"domain\"".into())
                })?;
                Arc::new(make_exponential_family(
                    ExponentialFamilySpec {
                        name: name("exponential_family"),
                        carrier,
                        statistics,
                        support: self.support()?,
                    },
                    domain,
                )?)
            }
            FamilyKind::MixtureFamily => {
                let (carrier, statistics) = self.functions::<T>()?;
                let domain = domain.ok_or_else(|| {
                    Error::Invalid("mixture families need an explicit \"domain\"".into())
                })?;
                Arc::new(make_mixture_family(
                    MixtureFamilySpec {
                        name: name("mixture_family"),
                        carrier,
                        statistics,
                        support: self.support()?,
                    },
                    domain,
                )?)
            }
        })
    }
}

/// Parses and builds a family from JSON text.
pub fn family_from_json<T: Scalar>(text: &str) -> Result<FamilyRef<T>> {
    FamilySpec::from_json(text)?.build()
}
