//! Curved-model documents.
//!
//! ```json
//! {"schema": 1,
//!  "ambient": {"kind": "poisson"},
//!  "embedding": ["u1"],
//!  "u_domain": [[-3, 3]]}
//! ```
//!
//! Embedding components are expressions in `u1..um`. An optional
//! `"ancillary_curvature"` holds `H^a_{κλ}` as an `m × n × n` array.

use std::path::Path;

use serde::{Deserialize, Serialize};
use statmanifold::expr::Expr;
use statmanifold::family::spec::FamilySpec;
use statmanifold::family::Domain;
use statmanifold::inference::CurvedModelSpec;
use statmanifold::linalg::Tensor3;
use statmanifold::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    #[serde(default = "schema_one")]
    pub schema: u32,
    pub ambient: FamilySpec,
    pub embedding: Vec<String>,
    pub u_domain: Vec<[Option<f64>; 2]>,
    #[serde(default)]
    pub ancillary_curvature: Option<Vec<Vec<Vec<f64>>>>,
}

fn schema_one() -> u32 {
    1
}

pub struct LoadedModel {
    pub document: ModelDocument,
    pub spec: CurvedModelSpec<f64>,
    pub ancillary: Option<Tensor3<f64>>,
}

impl ModelDocument {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let doc: Self = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.schema != 1 {
            return Err(Error::Parse(format!("unsupported schema version {} (expected 1)", doc.schema)));
        }
        Ok(doc)
    }

    pub fn build(self) -> Result<LoadedModel> {
        let ambient = self.ambient.build::<f64>()?;
        let n = ambient.dim();
        if self.embedding.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.embedding.len(),
            });
        }
        let m = self.u_domain.len();
        let names: Vec<String> = (1..=m).map(|a| format!("u{a}")).collect();
        let vars: Vec<&str> = names.iter().map(String::as_str).collect();
        let exprs = self
            .embedding
            .iter()
            .map(|s| Expr::parse(s, &vars))
            .collect::<Result<Vec<_>>>()?;
        let bounds = self
            .u_domain
            .iter()
            .map(|[lo, hi]| (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)))
            .collect();
        let u_domain = Domain::new(bounds)?;
        let ancillary = match &self.ancillary_curvature {
            None => None,
            Some(h) => Some(ancillary_tensor(h, m, n)?),
        };
        let spec = CurvedModelSpec::new(ambient, move |u: &[f64]| exprs.iter().map(|e| e.eval(u)).collect(), u_domain);
        Ok(LoadedModel {
            document: self,
            spec,
            ancillary,
        })
    }
}

fn ancillary_tensor(h: &[Vec<Vec<f64>>], m: usize, n: usize) -> Result<Tensor3<f64>> {
    let shape_ok = h.len() == m && h.iter().all(|s| s.len() == n && s.iter().all(|r| r.len() == n));
    if !shape_ok {
        return Err(Error::Invalid(format!("ancillary_curvature must have shape [{m}, {n}, {n}]")));
    }
    Ok(Tensor3::from_fn([m, n, n], |a, k, l| h[a][k][l]))
}
