//! Right-hand sides `f(t, x)` of first-order systems `ẋ = f(t, x)` together
//! with their open domains.

use crate::expr::{self, evaluate_expr, EvalError, Expression, ParseError, ValidationError};
use std::sync::Arc;

pub const DEFAULT_BLOWUP_RADIUS: f64 = 1e6;

/// An open subset of `ℝ × ℝⁿ`: an open time interval crossed with
/// `{x : predicate(t, x) > 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub n: usize,
    pub time_box: (f64, f64),
    pub predicate: Option<Expression>,
    pub blowup_radius: f64,
}

impl DomainSpec {
    /// All of `ℝ × ℝⁿ`.
    pub fn full(n: usize) -> Self {
        DomainSpec {
            n,
            time_box: (f64::NEG_INFINITY, f64::INFINITY),
            predicate: None,
            blowup_radius: DEFAULT_BLOWUP_RADIUS,
        }
    }

    pub fn with_time_box(mut self, lo: f64, hi: f64) -> Self {
        self.time_box = (lo, hi);
        self
    }

    pub fn with_predicate(mut self, predicate: Expression) -> Self {
        self.predicate = Some(predicate);
        self
    }

    /// Membership test. Total on finite input; a predicate that fails to
    /// evaluate counts as "outside".
    pub fn contains(&self, t: f64, x: &[f64]) -> bool {
        if x.len() != self.n || !(self.time_box.0 < t && t < self.time_box.1) {
            return false;
        }
        match &self.predicate {
            None => true,
            Some(p) => matches!(evaluate_expr(p, t, x), Ok(v) if v > 0.0),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("rhs has {found} components, expected {expected}")]
    Arity { expected: usize, found: usize },
    #[error("expression {index}: {source}")]
    Parse {
        index: usize,
        #[source]
        source: ParseError,
    },
    #[error("expression {index}: {source}")]
    Invalid {
        index: usize,
        #[source]
        source: ValidationError,
    },
}

/// Evaluation contract for `f` in `ẋ = f(t, x)`.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn contains(&self, t: f64, x: &[f64]) -> bool;

    /// Writes `f(t, x)` into `out`.
    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), EvalError>;

    /// Norm threshold above which a trajectory is declared to blow up.
    fn blowup_radius(&self) -> f64 {
        DEFAULT_BLOWUP_RADIUS
    }

    fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, x, &mut out)?;
        Ok(out)
    }
}

impl<V: VectorField + ?Sized> VectorField for &V {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn contains(&self, t: f64, x: &[f64]) -> bool {
        (**self).contains(t, x)
    }
    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        (**self).eval_into(t, x, out)
    }
    fn blowup_radius(&self) -> f64 {
        (**self).blowup_radius()
    }
}

impl<V: VectorField + ?Sized> VectorField for Arc<V> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn contains(&self, t: f64, x: &[f64]) -> bool {
        (**self).contains(t, x)
    }
    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        (**self).eval_into(t, x, out)
    }
    fn blowup_radius(&self) -> f64 {
        (**self).blowup_radius()
    }
}

impl<V: VectorField + ?Sized> VectorField for Box<V> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn contains(&self, t: f64, x: &[f64]) -> bool {
        (**self).contains(t, x)
    }
    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        (**self).eval_into(t, x, out)
    }
    fn blowup_radius(&self) -> f64 {
        (**self).blowup_radius()
    }
}

/// A vector field given by one expression per component.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprField {
    pub domain: DomainSpec,
    pub rhs: Vec<Expression>,
}

impl ExprField {
    pub fn new(domain: DomainSpec, rhs: Vec<Expression>) -> Result<Self, FieldError> {
        if rhs.len() != domain.n {
            return Err(FieldError::Arity {
                expected: domain.n,
                found: rhs.len(),
            });
        }
        for (index, e) in rhs.iter().enumerate() {
            expr::validate(e, domain.n).map_err(|source| FieldError::Invalid { index, source })?;
        }
        if let Some(p) = &domain.predicate {
            expr::validate(p, domain.n).map_err(|source| FieldError::Invalid {
                index: rhs.len(),
                source,
            })?;
        }
        Ok(ExprField { domain, rhs })
    }

    /// Parses one source string per component; the domain is all of `ℝ × ℝⁿ`.
    pub fn parse(rhs: &[&str]) -> Result<Self, FieldError> {
        let exprs = rhs
            .iter()
            .enumerate()
            .map(|(index, s)| expr::parse(s).map_err(|source| FieldError::Parse { index, source }))
            .collect::<Result<Vec<_>, _>>()?;
        ExprField::new(DomainSpec::full(rhs.len()), exprs)
    }
}

impl VectorField for ExprField {
    fn dim(&self) -> usize {
        self.domain.n
    }

    fn contains(&self, t: f64, x: &[f64]) -> bool {
        self.domain.contains(t, x)
    }

    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        for (o, e) in out.iter_mut().zip(&self.rhs) {
            *o = evaluate_expr(e, t, x)?;
        }
        Ok(())
    }

    fn blowup_radius(&self) -> f64 {
        self.domain.blowup_radius
    }
}

/// A vector field backed by a closure, defined on all of `ℝ × ℝⁿ`.
pub struct FnField<F> {
    n: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(f64, &[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(n: usize, f: F) -> Self {
        FnField { n, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(f64, &[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn contains(&self, _t: f64, x: &[f64]) -> bool {
        x.len() == self.n
    }

    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        (self.f)(t, x, out);
        if out.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(EvalError::NonFinite)
        }
    }
}
