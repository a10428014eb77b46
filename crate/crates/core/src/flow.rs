//! Two-parameter flow families `F_{τσ}`, the escape intervals `J(ρ, a)` and
//! complete solutions labelled by their Cauchy data `(ρ, a)`.
//!
//! A family maps the state at time `σ` to the state at time `τ`. The set
//! `K = {(τ, σ, a) : a ∈ Dom(F_{τσ})}` is queried through
//! [`FlowFamily::in_domain`], and empty maps are legal: a family may have
//! `Dom(F_{τσ}) = ∅` outside some time window.

use crate::expr::{self, evaluate_family, Expression, ParseError, ValidationError};
use crate::state::State;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum DomainViolation {
    #[error("point outside the domain of the map")]
    OutOfDomain,
    #[error("state has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

impl DomainViolation {
    pub fn kind(&self) -> &'static str {
        match self {
            DomainViolation::OutOfDomain => "out_of_domain",
            DomainViolation::DimensionMismatch { .. } => "dimension_mismatch",
        }
    }
}

pub(crate) fn check_dim(expected: usize, a: &[f64]) -> Result<(), DomainViolation> {
    if a.len() == expected {
        Ok(())
    } else {
        Err(DomainViolation::DimensionMismatch {
            expected,
            found: a.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    ClosedForm,
    Numeric,
    GroupBacked,
    AffineBacked,
}

/// The evaluation contract for a family `{F_{τσ}}`.
///
/// Implementations must keep `in_domain` and `evaluate` in agreement, and
/// every successful evaluation must be finite.
pub trait FlowFamily: Send + Sync {
    fn dim(&self) -> usize;

    fn kind(&self) -> FamilyKind;

    /// `F_{τσ}(a)`.
    fn evaluate(&self, tau: f64, sigma: f64, a: &[f64]) -> Result<State, DomainViolation>;

    /// Whether `(τ, σ, a) ∈ K`.
    fn in_domain(&self, tau: f64, sigma: f64, a: &[f64]) -> bool {
        self.evaluate(tau, sigma, a).is_ok()
    }
}

macro_rules! forward_family {
    ($($ty:ty),*) => {$(
        impl<T: FlowFamily + ?Sized> FlowFamily for $ty {
            fn dim(&self) -> usize {
                (**self).dim()
            }
            fn kind(&self) -> FamilyKind {
                (**self).kind()
            }
            fn evaluate(&self, tau: f64, sigma: f64, a: &[f64]) -> Result<State, DomainViolation> {
                (**self).evaluate(tau, sigma, a)
            }
            fn in_domain(&self, tau: f64, sigma: f64, a: &[f64]) -> bool {
                (**self).in_domain(tau, sigma, a)
            }
        }
    )*};
}

forward_family!(&T, Box<T>, Arc<T>);

/// Free-function form of [`FlowFamily::evaluate`].
pub fn evaluate<F: FlowFamily + ?Sized>(
    fam: &F,
    tau: f64,
    sigma: f64,
    a: &[f64],
) -> Result<State, DomainViolation> {
    fam.evaluate(tau, sigma, a)
}

/// Free-function form of [`FlowFamily::in_domain`].
pub fn in_domain<F: FlowFamily + ?Sized>(fam: &F, tau: f64, sigma: f64, a: &[f64]) -> bool {
    fam.in_domain(tau, sigma, a)
}

type MapFn = dyn Fn(f64, f64, &[f64]) -> State + Send + Sync;
type DomainFn = dyn Fn(f64, f64, &[f64]) -> bool + Send + Sync;

/// A closed-form family backed by closures.
#[derive(Clone)]
pub struct FnFamily {
    n: usize,
    kind: FamilyKind,
    map: Arc<MapFn>,
    domain: Option<Arc<DomainFn>>,
}

impl fmt::Debug for FnFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnFamily")
            .field("n", &self.n)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

impl FnFamily {
    /// A family defined wherever `map` returns a finite state.
    pub fn new<M>(n: usize, map: M) -> Self
    where
        M: Fn(f64, f64, &[f64]) -> State + Send + Sync + 'static,
    {
        FnFamily {
            n,
            kind: FamilyKind::ClosedForm,
            map: Arc::new(map),
            domain: None,
        }
    }

    /// Restricts the family to the points where `domain` holds.
    pub fn with_domain<D>(mut self, domain: D) -> Self
    where
        D: Fn(f64, f64, &[f64]) -> bool + Send + Sync + 'static,
    {
        self.domain = Some(Arc::new(domain));
        self
    }

    pub fn with_kind(mut self, kind: FamilyKind) -> Self {
        self.kind = kind;
        self
    }

    /// The family whose every map is empty.
    pub fn empty(n: usize) -> Self {
        FnFamily::new(n, |_, _, a| State::from(a)).with_domain(|_, _, _| false)
    }
}

impl FlowFamily for FnFamily {
    fn dim(&self) -> usize {
        self.n
    }

    fn kind(&self) -> FamilyKind {
        self.kind
    }

    fn evaluate(&self, tau: f64, sigma: f64, a: &[f64]) -> Result<State, DomainViolation> {
        check_dim(self.n, a)?;
        if let Some(d) = &self.domain {
            if !d(tau, sigma, a) {
                return Err(DomainViolation::OutOfDomain);
            }
        }
        let out = (self.map)(tau, sigma, a);
        if out.dim() == self.n && out.is_finite() {
            Ok(out)
        } else {
            Err(DomainViolation::OutOfDomain)
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FamilyError {
    #[error("family has {found} components, expected {expected}")]
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

/// A closed-form family given by expressions over `tau`, `sigma`,
/// `a1..an`, restricted to `domain_predicate > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprFamily {
    n: usize,
    components: Vec<Expression>,
    domain_predicate: Option<Expression>,
}

impl ExprFamily {
    pub fn new(
        n: usize,
        components: Vec<Expression>,
        domain_predicate: Option<Expression>,
    ) -> Result<Self, FamilyError> {
        if components.len() != n {
            return Err(FamilyError::Arity {
                expected: n,
                found: components.len(),
            });
        }
        for (index, e) in components.iter().chain(&domain_predicate).enumerate() {
            expr::validate_family(e, n).map_err(|source| FamilyError::Invalid { index, source })?;
        }
        Ok(ExprFamily {
            n,
            components,
            domain_predicate,
        })
    }

    pub fn parse(components: &[&str], domain_predicate: Option<&str>) -> Result<Self, FamilyError> {
        let parse = |index: usize, s: &str| {
            expr::parse(s).map_err(|source| FamilyError::Parse { index, source })
        };
        let exprs = components
            .iter()
            .enumerate()
            .map(|(i, s)| parse(i, s))
            .collect::<Result<Vec<_>, _>>()?;
        let pred = domain_predicate
            .map(|s| parse(components.len(), s))
            .transpose()?;
        ExprFamily::new(components.len(), exprs, pred)
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    pub fn domain_predicate(&self) -> Option<&Expression> {
        self.domain_predicate.as_ref()
    }
}

impl FlowFamily for ExprFamily {
    fn dim(&self) -> usize {
        self.n
    }

    fn kind(&self) -> FamilyKind {
        FamilyKind::ClosedForm
    }

    fn evaluate(&self, tau: f64, sigma: f64, a: &[f64]) -> Result<State, DomainViolation> {
        check_dim(self.n, a)?;
        if !a.iter().all(|v| v.is_finite()) {
            return Err(DomainViolation::OutOfDomain);
        }
        if let Some(p) = &self.domain_predicate {
            match evaluate_family(p, tau, sigma, a) {
                Ok(v) if v > 0.0 => {}
                _ => return Err(DomainViolation::OutOfDomain),
            }
        }
        self.components
            .iter()
            .map(|e| evaluate_family(e, tau, sigma, a))
            .collect::<Result<Vec<_>, _>>()
            .map(State::new)
            .map_err(|_| DomainViolation::OutOfDomain)
    }
}

/// How an end of an escape interval was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapeKind {
    /// `‖x‖∞` crossed the blow-up radius.
    BlowUp,
    /// The trajectory left the domain of the vector field.
    LeftDomain,
    /// The integration window edge was reached without escaping.
    WindowLimit,
    /// The step size fell below the configured minimum.
    StepUnderflow,
    /// The step budget ran out before the target time.
    StepLimit,
    /// Known analytically to extend to infinity.
    Unbounded,
}

impl EscapeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EscapeKind::BlowUp => "blow_up",
            EscapeKind::LeftDomain => "left_domain",
            EscapeKind::WindowLimit => "window_limit",
            EscapeKind::StepUnderflow => "step_underflow",
            EscapeKind::StepLimit => "step_limit",
            EscapeKind::Unbounded => "unbounded",
        }
    }
}

impl fmt::Display for EscapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The open interval `J(ρ, a)` of a complete solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeInterval {
    pub lower: f64,
    pub upper: f64,
    pub lower_kind: EscapeKind,
    pub upper_kind: EscapeKind,
}

impl EscapeInterval {
    pub fn new(lower: f64, lower_kind: EscapeKind, upper: f64, upper_kind: EscapeKind) -> Self {
        debug_assert!(lower < upper, "escape interval must be non-degenerate");
        EscapeInterval {
            lower,
            upper,
            lower_kind,
            upper_kind,
        }
    }

    pub fn unbounded() -> Self {
        EscapeInterval::new(
            f64::NEG_INFINITY,
            EscapeKind::Unbounded,
            f64::INFINITY,
            EscapeKind::Unbounded,
        )
    }

    /// Open-interval membership; endpoints are never attained.
    pub fn contains(&self, t: f64) -> bool {
        self.lower < t && t < self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("initial time {rho} lies outside the solution interval ({lower}, {upper})")]
pub struct InitialTimeOutside {
    pub rho: f64,
    pub lower: f64,
    pub upper: f64,
}

/// The maximal solution through `x(ρ) = a`, which also labels the
/// corresponding point of the solution manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteSolution {
    rho: f64,
    a: State,
    interval: EscapeInterval,
}

impl CompleteSolution {
    pub fn new(rho: f64, a: State, interval: EscapeInterval) -> Result<Self, InitialTimeOutside> {
        if !interval.contains(rho) {
            return Err(InitialTimeOutside {
                rho,
                lower: interval.lower,
                upper: interval.upper,
            });
        }
        Ok(CompleteSolution { rho, a, interval })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn initial_state(&self) -> &State {
        &self.a
    }

    pub fn interval(&self) -> &EscapeInterval {
        &self.interval
    }

    /// `x(τ) = F_{τρ}(a)` for `τ ∈ J(ρ, a)`.
    pub fn value<F: FlowFamily + ?Sized>(&self, fam: &F, tau: f64) -> Result<State, DomainViolation> {
        solution_value(self, fam, tau)
    }
}

pub fn solution_value<F: FlowFamily + ?Sized>(
    sol: &CompleteSolution,
    fam: &F,
    tau: f64,
) -> Result<State, DomainViolation> {
    check_dim(fam.dim(), &sol.a)?;
    if !sol.interval.contains(tau) {
        return Err(DomainViolation::OutOfDomain);
    }
    fam.evaluate(tau, sol.rho, &sol.a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn riccati() -> ExprFamily {
        ExprFamily::parse(&["a1/(1+(sigma-tau)*a1)"], Some("1-(tau-sigma)*a1")).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let fam = riccati();
        assert_eq!(fam.evaluate(1.0, 0.0, &[0.5]).unwrap(), State::scalar(1.0));
        assert_eq!(fam.evaluate(0.7, 0.7, &[-0.3]).unwrap(), State::scalar(-0.3));
        assert_eq!(
            fam.evaluate(2.0, 0.0, &[0.5]),
            Err(DomainViolation::OutOfDomain)
        );
        assert_eq!(
            fam.evaluate(1.0, 0.0, &[0.5, 1.0]),
            Err(DomainViolation::DimensionMismatch {
                expected: 1,
                found: 2
            })
        );
    }

    #[test]
    fn in_domain_examples() {
        let fam = riccati();
        assert!(fam.in_domain(1.0, 0.0, &[0.5]));
        assert!(!fam.in_domain(2.0, 0.0, &[0.5]));
        assert!(fam.in_domain(0.0, 0.0, &[1e9]));
    }

    #[test]
    fn solution_value_examples() {
        let fam = riccati();
        let j = EscapeInterval::new(f64::NEG_INFINITY, EscapeKind::Unbounded, 2.0, EscapeKind::BlowUp);
        let sol = CompleteSolution::new(0.0, State::scalar(0.5), j).unwrap();
        assert_eq!(sol.value(&fam, 1.0).unwrap(), State::scalar(1.0));
        assert_eq!(sol.value(&fam, 0.0).unwrap(), State::scalar(0.5));
        assert_eq!(sol.value(&fam, 2.5), Err(DomainViolation::OutOfDomain));
        assert!(CompleteSolution::new(3.0, State::scalar(0.5), j).is_err());
    }

    #[test]
    fn empty_family_has_empty_domain() {
        let fam = FnFamily::empty(1);
        assert!(!fam.in_domain(0.0, 0.0, &[0.0]));
    }

    #[test]
    fn fn_family_rejects_non_finite() {
        let fam = FnFamily::new(1, |tau, sigma, a| State::scalar(a[0] / (1.0 + (sigma - tau) * a[0])));
        assert!(!fam.in_domain(2.0, 0.0, &[0.5]));
    }
}
