//! Time-translation invariance and the reduction `F_{τρ} = G_{τ−ρ}` of an
//! autonomous family to a local one-parameter group.

use crate::flow::{check_dim, DomainViolation, FamilyKind, FlowFamily};
use crate::state::{scaled_residual, State};
use crate::verify::{reduce, ConditionReport, Outcome, Sample, SamplePlan, WorstCase};
use rayon::prelude::*;
use std::sync::Arc;

pub const AUTONOMY: &str = "autonomy";
pub const GROUP_LAW: &str = "group_law";

/// Default autonomy tolerance for closed-form families.
pub const CLOSED_FORM_TOL: f64 = 1e-9;

/// A local one-parameter group `α ↦ G_α` with `G_0 = id`.
pub trait OneParamGroup: Send + Sync {
    fn dim(&self) -> usize;

    fn g(&self, alpha: f64, a: &[f64]) -> Result<State, DomainViolation>;

    fn in_domain(&self, alpha: f64, a: &[f64]) -> bool {
        self.g(alpha, a).is_ok()
    }
}

impl<G: OneParamGroup + ?Sized> OneParamGroup for &G {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn g(&self, alpha: f64, a: &[f64]) -> Result<State, DomainViolation> {
        (**self).g(alpha, a)
    }
    fn in_domain(&self, alpha: f64, a: &[f64]) -> bool {
        (**self).in_domain(alpha, a)
    }
}

impl<G: OneParamGroup + ?Sized> OneParamGroup for Arc<G> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn g(&self, alpha: f64, a: &[f64]) -> Result<State, DomainViolation> {
        (**self).g(alpha, a)
    }
    fn in_domain(&self, alpha: f64, a: &[f64]) -> bool {
        (**self).in_domain(alpha, a)
    }
}

/// `G_α = F_{base+α, base}` for an autonomous family. The base point is 0
/// unless the family's time range requires re-centering.
#[derive(Debug, Clone)]
pub struct FamilyGroup<F> {
    fam: F,
    base: f64,
}

impl<F: FlowFamily> FamilyGroup<F> {
    /// Wraps `fam` without checking autonomy.
    pub fn assume(fam: F) -> Self {
        FamilyGroup { fam, base: 0.0 }
    }

    pub fn with_base(mut self, base: f64) -> Self {
        self.base = base;
        self
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn family(&self) -> &F {
        &self.fam
    }
}

impl<F: FlowFamily> OneParamGroup for FamilyGroup<F> {
    fn dim(&self) -> usize {
        self.fam.dim()
    }

    fn g(&self, alpha: f64, a: &[f64]) -> Result<State, DomainViolation> {
        self.fam.evaluate(self.base + alpha, self.base, a)
    }

    fn in_domain(&self, alpha: f64, a: &[f64]) -> bool {
        self.fam.in_domain(self.base + alpha, self.base, a)
    }
}

type GroupMap = dyn Fn(f64, &[f64]) -> State + Send + Sync;
type GroupDomain = dyn Fn(f64, &[f64]) -> bool + Send + Sync;

/// A group given by closures, e.g. a known closed form.
#[derive(Clone)]
pub struct FnGroup {
    n: usize,
    map: Arc<GroupMap>,
    domain: Option<Arc<GroupDomain>>,
}

impl FnGroup {
    pub fn new(n: usize, map: impl Fn(f64, &[f64]) -> State + Send + Sync + 'static) -> Self {
        FnGroup {
            n,
            map: Arc::new(map),
            domain: None,
        }
    }

    pub fn with_domain(mut self, domain: impl Fn(f64, &[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Some(Arc::new(domain));
        self
    }
}

impl OneParamGroup for FnGroup {
    fn dim(&self) -> usize {
        self.n
    }

    fn g(&self, alpha: f64, a: &[f64]) -> Result<State, DomainViolation> {
        check_dim(self.n, a)?;
        if !self.in_domain(alpha, a) {
            return Err(DomainViolation::OutOfDomain);
        }
        let x = (self.map)(alpha, a);
        if x.is_finite() {
            Ok(x)
        } else {
            Err(DomainViolation::OutOfDomain)
        }
    }

    fn in_domain(&self, alpha: f64, a: &[f64]) -> bool {
        a.len() == self.n && self.domain.as_ref().is_none_or(|d| d(alpha, a))
    }
}

/// The two-parameter family `F_{τσ} = G_{τ−σ}` of a group.
#[derive(Debug, Clone)]
pub struct GroupFamily<G>(pub G);

impl<G: OneParamGroup> FlowFamily for GroupFamily<G> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn kind(&self) -> FamilyKind {
        FamilyKind::GroupBacked
    }

    fn evaluate(&self, tau: f64, sigma: f64, a: &[f64]) -> Result<State, DomainViolation> {
        self.0.g(tau - sigma, a)
    }

    fn in_domain(&self, tau: f64, sigma: f64, a: &[f64]) -> bool {
        self.0.in_domain(tau - sigma, a)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("family is not autonomous: shift residual {residual:e} exceeds {tolerance:e}")]
pub struct NotAutonomous {
    pub residual: f64,
    pub tolerance: f64,
}

/// `‖F_{τ+c,ρ+c}(a) − F_{τρ}(a)‖` over samples where both sides are
/// defined, for every nonzero shift `c` in the time grid.
pub fn autonomy_report<F: FlowFamily + ?Sized>(fam: &F, plan: &SamplePlan, tol: f64) -> ConditionReport {
    let shifts: Vec<f64> = plan.time_grid.iter().copied().filter(|&c| c != 0.0).collect();
    let outcomes = plan
        .samples(2, 50)
        .into_par_iter()
        .flat_map_iter(|s| {
            let [tau, rho, _] = s.times;
            let base = fam.evaluate(tau, rho, &s.a).ok();
            shifts
                .iter()
                .map(|&c| {
                    let (Some(x), Ok(y)) = (&base, fam.evaluate(tau + c, rho + c, &s.a)) else {
                        return Outcome::Skipped;
                    };
                    Outcome::Checked(scaled_residual(&y, x), WorstCase::new(&s.a).tau(tau).rho(rho))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    reduce(AUTONOMY, tol, outcomes)
}

pub fn detect_autonomous<F: FlowFamily + ?Sized>(fam: &F, plan: &SamplePlan, tol: f64) -> bool {
    autonomy_report(fam, plan, tol).pass
}

/// Reduces an autonomous family to `G_α = F_{α0}`, checking autonomy first.
pub fn to_group<F: FlowFamily>(fam: F, plan: &SamplePlan, tol: f64) -> Result<FamilyGroup<F>, NotAutonomous> {
    let report = autonomy_report(&fam, plan, tol);
    if report.pass {
        Ok(FamilyGroup::assume(fam))
    } else {
        Err(NotAutonomous {
            residual: report.max_residual,
            tolerance: tol,
        })
    }
}

/// `‖G_α(G_β(a)) − G_{α+β}(a)‖` where both legs on the left are defined.
/// Under that guard `G_{α+β}(a)` must exist; if it does not, the residual
/// is infinite.
pub fn check_group_law<G: OneParamGroup + ?Sized>(group: &G, plan: &SamplePlan, tol: f64) -> ConditionReport {
    let outcomes = plan
        .samples(2, 51)
        .into_par_iter()
        .map(|Sample { times: [alpha, beta, _], a }| {
            let Ok(mid) = group.g(beta, &a) else {
                return Outcome::Skipped;
            };
            let Ok(lhs) = group.g(alpha, &mid) else {
                return Outcome::Skipped;
            };
            let worst = WorstCase::new(&a).tau(alpha).sigma(beta);
            match group.g(alpha + beta, &a) {
                Ok(rhs) => Outcome::Checked(scaled_residual(&lhs, &rhs), worst),
                Err(_) => Outcome::Checked(f64::INFINITY, worst),
            }
        })
        .collect();
    reduce(GROUP_LAW, tol, outcomes)
}
