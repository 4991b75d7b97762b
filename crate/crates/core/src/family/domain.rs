use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{vec_f64, Scalar};

/// Default distance kept from the boundary of every parameter box.
pub const DOMAIN_MARGIN: f64 = 1e-6;

type Predicate<T> = Arc<dyn Fn(&[T]) -> bool + Send + Sync>;

/// Open parameter region: a box with an optional extra predicate.
///
/// A point is inside only if every coordinate is more than `margin` away
/// from its box edges and the predicate (if any) holds.
#[derive(Clone)]
pub struct Domain<T> {
    bounds: Vec<(T, T)>,
    margin: T,
    predicate: Option<(String, Predicate<T>)>,
}

impl<T: fmt::Debug> fmt::Debug for Domain<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Domain")
            .field("bounds", &self.bounds)
            .field("margin", &self.margin)
            .field("predicate", &self.predicate.as_ref().map(|p| &p.0))
            .finish()
    }
}

impl<T: Scalar> Domain<T> {
    pub fn new(bounds: Vec<(T, T)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Invalid("domain needs at least one axis".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(Error::Invalid(format!(
                    "axis {i}: lower bound {lo} must be below upper bound {hi}"
                )));
            }
        }
        Ok(Self {
            bounds,
            margin: T::of(DOMAIN_MARGIN),
            predicate: None,
        })
    }

    /// Whole of ℝⁿ.
    pub fn unbounded(n: usize) -> Self {
        Self {
            bounds: vec![(T::neg_infinity(), T::infinity()); n],
            margin: T::of(DOMAIN_MARGIN),
            predicate: None,
        }
    }

    pub fn with_margin(mut self, margin: T) -> Self {
        self.margin = margin;
        self
    }

    pub fn with_predicate(
        mut self,
        description: impl Into<String>,
        pred: impl Fn(&[T]) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.predicate = Some((description.into(), Arc::new(pred)));
        self
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(T, T)] {
        &self.bounds
    }

    pub fn margin(&self) -> T {
        self.margin
    }

    pub fn contains(&self, xi: &[T]) -> bool {
        self.check(xi).is_ok()
    }

    pub fn check(&self, xi: &[T]) -> Result<()> {
        if xi.len() != self.bounds.len() {
            return Err(Error::DimensionMismatch {
                expected: self.bounds.len(),
                found: xi.len(),
            });
        }
        for (i, (&v, &(lo, hi))) in xi.iter().zip(&self.bounds).enumerate() {
            if !v.is_finite() {
                return Err(self.domain_error(xi, format!("coordinate {i} is not finite")));
            }
            if !(v > lo + self.margin && v < hi - self.margin) {
                return Err(self.domain_error(
                    xi,
                    format!(
                        "coordinate {i} = {v} not inside ({lo}, {hi}) with margin {}",
                        self.margin
                    ),
                ));
            }
        }
        if let Some((desc, pred)) = &self.predicate {
            if !pred(xi) {
                return Err(self.domain_error(xi, format!("constraint violated: {desc}")));
            }
        }
        Ok(())
    }

    fn domain_error(&self, xi: &[T], reason: String) -> Error {
        Error::Domain {
            xi: vec_f64(xi),
            reason,
        }
    }
}

/// The sample space Ω.
#[derive(Debug, Clone, PartialEq)]
pub enum Support<T> {
    /// Finite set of atoms.
    Finite(Vec<T>),
    /// {0, 1, 2, …}.
    Naturals,
    /// Continuous interval; either end may be infinite.
    Interval { lo: T, hi: T },
    /// Continuous with no declared interval; expectations fall back to Monte Carlo.
    Continuous,
}

impl<T: Scalar> Support<T> {
    pub fn real_line() -> Self {
        Support::Interval {
            lo: T::neg_infinity(),
            hi: T::infinity(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Support::Finite(_) | Support::Naturals)
    }

    pub fn contains(&self, x: T) -> bool {
        if x.is_nan() {
            return false;
        }
        match self {
            Support::Finite(pts) => pts.iter().any(|&p| p == x),
            Support::Naturals => x >= T::zero() && x.fract() == T::zero() && x.is_finite(),
            Support::Interval { lo, hi } => x >= *lo && x <= *hi && x.is_finite(),
            Support::Continuous => x.is_finite(),
        }
    }

    pub fn check(&self, x: T) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Support {
                x: x.as_f64(),
                support: self.to_string(),
            })
        }
    }
}

impl<T: Scalar> fmt::Display for Support<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Support::Finite(pts) => {
                write!(f, "{{")?;
                for (i, p) in pts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, "}}")
            }
            Support::Naturals => write!(f, "{{0, 1, 2, ...}}"),
            Support::Interval { lo, hi } => write!(f, "[{lo}, {hi}]"),
            Support::Continuous => write!(f, "R (undeclared interval)"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_is_enforced() {
        let d = Domain::new(vec![(0.0, 1.0)]).unwrap();
        assert!(d.contains(&[0.5]));
        assert!(!d.contains(&[1e-6]));
        assert!(!d.contains(&[1.0 - 1e-6]));
        assert!(d.contains(&[2e-6]));
        assert!(matches!(d.check(&[0.5, 0.5]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn predicate_is_checked() {
        let d = Domain::new(vec![(0.0, 1.0), (0.0, 1.0)])
            .unwrap()
            .with_predicate("sum < 1", |xi: &[f64]| xi.iter().sum::<f64>() < 1.0);
        assert!(d.contains(&[0.2, 0.3]));
        assert!(!d.contains(&[0.6, 0.6]));
    }

    #[test]
    fn support_membership() {
        assert!(Support::<f64>::Naturals.contains(3.0));
        assert!(!Support::<f64>::Naturals.contains(2.5));
        assert!(!Support::<f64>::Naturals.contains(-1.0));
        assert!(Support::Finite(vec![0.0, 1.0]).contains(1.0));
        assert!(!Support::Finite(vec![0.0, 1.0]).contains(0.5));
        assert!(Support::<f64>::real_line().contains(-1e300));
        let unit = Support::Interval { lo: 0.0, hi: 1.0 };
        assert!(unit.contains(0.0) && !unit.contains(1.5));
    }

    #[test]
    fn bad_bounds_rejected() {
        assert!(Domain::new(vec![(1.0, 0.0)]).is_err());
        assert!(Domain::<f64>::new(vec![]).is_err());
    }
}
