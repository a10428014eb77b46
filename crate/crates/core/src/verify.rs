//! Sampled checks of the conditions that characterize flow families:
//! diagonal identity, two-sided inverse, the cocycle law
//! `F_{τσ}(F_{σρ}(a)) = F_{τρ}(a)`, domain inclusion
//! `Dom(F_{ρσ}) ⊆ Dom(F_{σσ})`, interval-shaped `J(ρ, a)` and openness of
//! `K`.
//!
//! Every check walks a deterministic grid (the plan's time grid crossed
//! with its state grid) followed by `random_count` seeded random samples
//! drawn from the grid's bounding box. Samples are evaluated in parallel
//! and reduced in sample order, so reports are reproducible bit for bit.

use crate::flow::{FamilyKind, FlowFamily};
use crate::state::{scaled_residual, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplePlan {
    pub time_grid: Vec<f64>,
    pub state_grid: Vec<State>,
    #[serde(default)]
    pub random_count: usize,
    #[serde(default)]
    pub seed: u64,
}

const STANDARD_TIMES: [f64; 6] = [-1.0, -0.5, 0.0, 0.5, 1.0, 1.5];
const STANDARD_VALUES: [f64; 5] = [-1.0, -0.5, 0.0, 0.25, 0.5];

impl SamplePlan {
    pub fn new(time_grid: Vec<f64>, state_grid: Vec<State>) -> Self {
        let mut plan = SamplePlan {
            time_grid,
            state_grid,
            random_count: 0,
            seed: 0,
        };
        plan.normalize();
        plan
    }

    /// The default plan: times `{-1, -0.5, 0, 0.5, 1, 1.5}`, five states
    /// built from `{-1, -0.5, 0, 0.25, 0.5}` (component `k` of state `i`
    /// takes value `(i + k) mod 5`), 200 random samples, seed 0.
    pub fn standard(n: usize) -> Self {
        let states = (0..STANDARD_VALUES.len())
            .map(|i| {
                State::new(
                    (0..n)
                        .map(|k| STANDARD_VALUES[(i + k) % STANDARD_VALUES.len()])
                        .collect(),
                )
            })
            .collect();
        SamplePlan {
            time_grid: STANDARD_TIMES.to_vec(),
            state_grid: states,
            random_count: 200,
            seed: 0,
        }
    }

    pub fn with_random(mut self, count: usize, seed: u64) -> Self {
        self.random_count = count;
        self.seed = seed;
        self
    }

    /// Sorts the time grid and drops duplicates.
    pub fn normalize(&mut self) {
        self.time_grid.sort_by(f64::total_cmp);
        self.time_grid.dedup();
    }

    fn time_range(&self) -> (f64, f64) {
        let lo = self.time_grid.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.time_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    fn state_box(&self) -> Vec<(f64, f64)> {
        let n = self.state_grid.first().map_or(0, |s| s.dim());
        (0..n)
            .map(|k| {
                self.state_grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                    (lo.min(s[k]), hi.max(s[k]))
                })
            })
            .collect()
    }

    /// Seeded generator for one check; `stream` keeps checks independent.
    pub(crate) fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    pub(crate) fn random_time(&self, rng: &mut ChaCha8Rng) -> f64 {
        let (lo, hi) = self.time_range();
        if lo < hi {
            rng.random_range(lo..=hi)
        } else {
            lo
        }
    }

    pub(crate) fn random_state(&self, rng: &mut ChaCha8Rng) -> State {
        State::new(
            self.state_box()
                .into_iter()
                .map(|(lo, hi)| if lo < hi { rng.random_range(lo..=hi) } else { lo })
                .collect(),
        )
    }

    /// Grid points `(t_1, .., t_k, a)` over `time_grid^k × state_grid`,
    /// followed by `random_count` random points.
    pub(crate) fn samples(&self, k: usize, stream: u64) -> Vec<Sample> {
        let mut out = Vec::new();
        let m = self.time_grid.len();
        if m > 0 {
            let total = m.pow(k as u32);
            for idx in 0..total {
                let mut rem = idx;
                let mut times = [0.0; 3];
                for slot in times.iter_mut().take(k) {
                    *slot = self.time_grid[rem % m];
                    rem /= m;
                }
                for a in &self.state_grid {
                    out.push(Sample { times, a: a.clone() });
                }
            }
        }
        if !self.state_grid.is_empty() {
            let mut rng = self.rng(stream);
            for _ in 0..self.random_count {
                let mut times = [0.0; 3];
                for slot in times.iter_mut().take(k) {
                    *slot = self.random_time(&mut rng);
                }
                let a = self.random_state(&mut rng);
                out.push(Sample { times, a });
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Sample {
    pub times: [f64; 3],
    pub a: State,
}

/// The sample at which a condition was worst.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub a: State,
}

impl WorstCase {
    pub fn new(a: &[f64]) -> Self {
        WorstCase {
            tau: None,
            sigma: None,
            rho: None,
            a: State::from(a),
        }
    }

    pub fn tau(mut self, v: f64) -> Self {
        self.tau = Some(v);
        self
    }

    pub fn sigma(mut self, v: f64) -> Self {
        self.sigma = Some(v);
        self
    }

    pub fn rho(mut self, v: f64) -> Self {
        self.rho = Some(v);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition_name: String,
    pub samples_checked: usize,
    pub samples_skipped: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub worst_case: Option<WorstCase>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ConditionReport {
    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

pub(crate) enum Outcome {
    Skipped,
    Checked(f64, WorstCase),
}

/// Folds per-sample outcomes in sample order. Ties keep the earliest
/// sample, so the worst case does not depend on scheduling.
pub(crate) fn reduce(name: &str, tolerance: f64, outcomes: Vec<Outcome>) -> ConditionReport {
    let mut checked = 0;
    let mut skipped = 0;
    let mut max_residual = 0.0;
    let mut worst = None;
    for o in outcomes {
        match o {
            Outcome::Skipped => skipped += 1,
            Outcome::Checked(r, w) => {
                checked += 1;
                let r = if r.is_nan() { f64::INFINITY } else { r };
                if worst.is_none() || r > max_residual {
                    max_residual = r;
                    worst = Some(w);
                }
            }
        }
    }
    ConditionReport {
        condition_name: name.to_owned(),
        samples_checked: checked,
        samples_skipped: skipped,
        max_residual,
        tolerance,
        worst_case: worst,
        pass: max_residual <= tolerance,
        note: None,
    }
}

/// Count-valued conditions: residual is the number of violations and the
/// worst case is the first violation.
fn reduce_count(name: &str, outcomes: Vec<Outcome>) -> ConditionReport {
    let mut checked = 0;
    let mut skipped = 0;
    let mut violations = 0usize;
    let mut first = None;
    for o in outcomes {
        match o {
            Outcome::Skipped => skipped += 1,
            Outcome::Checked(r, w) => {
                checked += 1;
                if r > 0.0 {
                    violations += 1;
                    first.get_or_insert(w);
                }
            }
        }
    }
    ConditionReport {
        condition_name: name.to_owned(),
        samples_checked: checked,
        samples_skipped: skipped,
        max_residual: violations as f64,
        tolerance: 0.0,
        worst_case: first,
        pass: violations == 0,
        note: None,
    }
}

pub const IDENTITY: &str = "identity";
pub const INVERSE: &str = "inverse";
pub const COCYCLE: &str = "cocycle";
pub const DOMAIN_INCLUSION: &str = "domain_inclusion";
pub const INTERVAL: &str = "interval";
pub const OPENNESS: &str = "openness";

/// `‖F_{σσ}(a) − a‖` over in-domain diagonal samples.
pub fn check_identity<F: FlowFamily + ?Sized>(fam: &F, plan: &SamplePlan, tol: f64) -> ConditionReport {
    let outcomes = plan
        .samples(1, 1)
        .into_par_iter()
        .map(|s| {
            let sigma = s.times[0];
            match fam.evaluate(sigma, sigma, &s.a) {
                Ok(x) => Outcome::Checked(
                    scaled_residual(&x, &s.a),
                    WorstCase::new(&s.a).tau(sigma).sigma(sigma),
                ),
                Err(_) => Outcome::Skipped,
            }
        })
        .collect();
    reduce(IDENTITY, tol, outcomes)
}

/// `‖F_{ρσ}(F_{σρ}(a)) − a‖` where both legs are defined.
pub fn check_inverse<F: FlowFamily + ?Sized>(fam: &F, plan: &SamplePlan, tol: f64) -> ConditionReport {
    let outcomes = plan
        .samples(2, 2)
        .into_par_iter()
        .map(|s| {
            let [rho, sigma, _] = s.times;
            let Ok(y) = fam.evaluate(sigma, rho, &s.a) else {
                return Outcome::Skipped;
            };
            let Ok(back) = fam.evaluate(rho, sigma, &y) else {
                return Outcome::Skipped;
            };
            Outcome::Checked(
                scaled_residual(&back, &s.a),
                WorstCase::new(&s.a).sigma(sigma).rho(rho),
            )
        })
        .collect();
    reduce(INVERSE, tol, outcomes).with_note(
        "bijectivity: injectivity certified through the two-sided inverse; surjectivity onto the codomain not sampled",
    )
}

/// The cocycle law on guarded samples.
///
/// The guard requires `F_{σρ}(a)` and `F_{τσ}(F_{σρ}(a))` to be defined;
/// with two-sided inverses this is exactly membership of `a` in
/// `F_{σρ}⁻¹(Codom F_{σρ} ∩ Codom F_{στ})`. Under the guard `F_{τρ}(a)`
/// must exist, so an undefined right-hand side is an infinite residual.
pub fn check_cocycle<F: FlowFamily + ?Sized>(fam: &F, plan: &SamplePlan, tol: f64) -> ConditionReport {
    let samples = plan.samples(3, 3);
    check_cocycle_samples(fam, samples, tol)
}

pub(crate) fn check_cocycle_samples<F: FlowFamily + ?Sized>(
    fam: &F,
    samples: Vec<Sample>,
    tol: f64,
) -> ConditionReport {
    let outcomes = samples
        .into_par_iter()
        .map(|s| {
            let [tau, sigma, rho] = s.times;
            let Ok(mid) = fam.evaluate(sigma, rho, &s.a) else {
                return Outcome::Skipped;
            };
            let Ok(lhs) = fam.evaluate(tau, sigma, &mid) else {
                return Outcome::Skipped;
            };
            let worst = WorstCase::new(&s.a).tau(tau).sigma(sigma).rho(rho);
            match fam.evaluate(tau, rho, &s.a) {
                Ok(rhs) => Outcome::Checked(scaled_residual(&lhs, &rhs), worst),
                Err(_) => Outcome::Checked(f64::INFINITY, worst),
            }
        })
        .collect();
    reduce(COCYCLE, tol, outcomes)
}

/// Cocycle residual over `count` seeded random triples only, discarding
/// unguarded draws until `count` guarded samples are found (or `20·count`
/// draws are exhausted).
pub fn check_cocycle_random<F: FlowFamily + ?Sized>(
    fam: &F,
    plan: &SamplePlan,
    count: usize,
    tol: f64,
) -> ConditionReport {
    let mut rng = plan.rng(30);
    let mut guarded = Vec::with_capacity(count);
    let mut draws = 0;
    while guarded.len() < count && draws < 20 * count {
        draws += 1;
        let s = Sample {
            times: [
                plan.random_time(&mut rng),
                plan.random_time(&mut rng),
                plan.random_time(&mut rng),
            ],
            a: plan.random_state(&mut rng),
        };
        let [tau, sigma, rho] = s.times;
        let ok = fam
            .evaluate(sigma, rho, &s.a)
            .map(|mid| fam.in_domain(tau, sigma, &mid))
            .unwrap_or(false);
        if ok {
            guarded.push(s);
        }
    }
    let mut report = check_cocycle_samples(fam, guarded, tol);
    report.samples_skipped = draws - report.samples_checked;
    report
}

/// `Dom(F_{ρσ}) ⊆ Dom(F_{σσ})`: counts samples in the first set but not
/// the second.
pub fn check_domain_inclusion<F: FlowFamily + ?Sized>(fam: &F, plan: &SamplePlan) -> ConditionReport {
    let outcomes = plan
        .samples(2, 4)
        .into_par_iter()
        .map(|s| {
            let [rho, sigma, _] = s.times;
            if !fam.in_domain(rho, sigma, &s.a) {
                return Outcome::Skipped;
            }
            let violated = !fam.in_domain(sigma, sigma, &s.a);
            Outcome::Checked(
                if violated { 1.0 } else { 0.0 },
                WorstCase::new(&s.a).tau(rho).sigma(sigma),
            )
        })
        .collect();
    reduce_count(DOMAIN_INCLUSION, outcomes)
}

/// `J(ρ, a)` must be an interval: along the sorted time grid the in-domain
/// times may not have a gap.
pub fn check_interval<F: FlowFamily + ?Sized>(fam: &F, plan: &SamplePlan) -> ConditionReport {
    let mut times = plan.time_grid.clone();
    times.sort_by(f64::total_cmp);
    let outcomes = plan
        .samples(1, 5)
        .into_par_iter()
        .map(|s| {
            let rho = s.times[0];
            let mut state = 0u8; // 0: before J, 1: inside, 2: after
            let mut gap = None;
            for &tau in &times {
                let inside = fam.in_domain(tau, rho, &s.a);
                state = match (state, inside) {
                    (0, true) => 1,
                    (1, false) => 2,
                    (2, true) => {
                        gap = Some(tau);
                        break;
                    }
                    (st, _) => st,
                };
            }
            let mut w = WorstCase::new(&s.a).rho(rho);
            if let Some(tau) = gap {
                w = w.tau(tau);
            }
            Outcome::Checked(if gap.is_some() { 1.0 } else { 0.0 }, w)
        })
        .collect();
    reduce_count(INTERVAL, outcomes)
}

/// Openness of `K` at sampled interior points.
///
/// A sample with any axis neighbour at distance `δ` outside `K` is treated
/// as lying within `δ` of the boundary and skipped. For the rest, all
/// `2(n+2)` neighbours at distance `δ/2` must be in `K`.
pub fn check_openness<F: FlowFamily + ?Sized>(fam: &F, plan: &SamplePlan, delta: f64) -> ConditionReport {
    let n = fam.dim();
    let neighbours_inside = |tau: f64, sigma: f64, a: &[f64], d: f64| {
        let mut x = a.to_vec();
        for sign in [-1.0, 1.0] {
            if !fam.in_domain(tau + sign * d, sigma, a) || !fam.in_domain(tau, sigma + sign * d, a) {
                return false;
            }
            for k in 0..n {
                x[k] = a[k] + sign * d;
                let inside = fam.in_domain(tau, sigma, &x);
                x[k] = a[k];
                if !inside {
                    return false;
                }
            }
        }
        true
    };
    let outcomes: Vec<(bool, Outcome)> = plan
        .samples(2, 6)
        .into_par_iter()
        .map(|s| {
            let [tau, sigma, _] = s.times;
            if !fam.in_domain(tau, sigma, &s.a) {
                return (false, Outcome::Skipped);
            }
            if !neighbours_inside(tau, sigma, &s.a, delta) {
                return (true, Outcome::Skipped);
            }
            let violated = !neighbours_inside(tau, sigma, &s.a, 0.5 * delta);
            (
                true,
                Outcome::Checked(
                    if violated { 1.0 } else { 0.0 },
                    WorstCase::new(&s.a).tau(tau).sigma(sigma),
                ),
            )
        })
        .collect();
    let nonempty = outcomes.iter().any(|(inside, _)| *inside);
    let report = reduce_count(OPENNESS, outcomes.into_iter().map(|(_, o)| o).collect());
    if nonempty {
        report
    } else {
        ConditionReport {
            pass: false,
            ..report
        }
        .with_note("K empty over plan")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteTolerances {
    pub identity: f64,
    pub inverse: f64,
    pub cocycle: f64,
    pub openness_delta: f64,
}

impl Default for SuiteTolerances {
    fn default() -> Self {
        SuiteTolerances {
            identity: 1e-9,
            inverse: 1e-9,
            cocycle: 1e-9,
            openness_delta: 1e-4,
        }
    }
}

impl SuiteTolerances {
    /// Defaults per family kind: numeric families carry integration error
    /// in every leg except the zero-length diagonal one.
    pub fn for_kind(kind: FamilyKind) -> Self {
        match kind {
            FamilyKind::Numeric => SuiteTolerances {
                identity: 1e-10,
                inverse: 1e-7,
                cocycle: 1e-7,
                ..Default::default()
            },
            _ => SuiteTolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub conditions: Vec<ConditionReport>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn condition(&self, name: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.condition_name == name)
    }

    pub fn failed(&self) -> impl Iterator<Item = &str> {
        self.conditions
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.condition_name.as_str())
    }
}

/// Runs all six checks; the family passes when every one does.
pub fn run_suite<F: FlowFamily + ?Sized>(
    fam: &F,
    plan: &SamplePlan,
    tol: &SuiteTolerances,
) -> VerificationReport {
    let conditions = vec![
        check_identity(fam, plan, tol.identity),
        check_inverse(fam, plan, tol.inverse),
        check_cocycle(fam, plan, tol.cocycle),
        check_domain_inclusion(fam, plan),
        check_interval(fam, plan),
        check_openness(fam, plan, tol.openness_delta),
    ];
    let pass = conditions.iter().all(|c| c.pass);
    VerificationReport { conditions, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{ExprFamily, FnFamily};

    fn riccati() -> ExprFamily {
        ExprFamily::parse(&["a1/(1+(sigma-tau)*a1)"], Some("1-(tau-sigma)*a1")).unwrap()
    }

    fn single(tau: f64, sigma: f64, rho: f64, a: f64) -> Vec<Sample> {
        vec![Sample {
            times: [tau, sigma, rho],
            a: State::scalar(a),
        }]
    }

    #[test]
    fn identity_examples() {
        let plan = SamplePlan::standard(1);
        let r = check_identity(&riccati(), &plan, 1e-12);
        assert!(r.pass);
        assert_eq!(r.max_residual, 0.0);

        let broken = FnFamily::new(1, |tau, sigma, a| {
            if tau == sigma {
                State::scalar(a[0] + 0.1)
            } else {
                State::scalar(a[0])
            }
        });
        let r = check_identity(&broken, &SamplePlan::standard(1).with_random(0, 0), 1e-12);
        assert!(!r.pass);
        assert!((r.max_residual - 0.1).abs() < 1e-15, "{}", r.max_residual);
    }

    #[test]
    fn inverse_examples() {
        let fam = riccati();
        let x = fam.evaluate(1.0, 0.0, &[0.5]).unwrap();
        assert_eq!(x[0], 1.0);
        assert_eq!(fam.evaluate(0.0, 1.0, &x).unwrap()[0], 0.5);

        let constant = FnFamily::new(1, |_, _, _| State::scalar(0.0));
        let r = check_inverse(&constant, &SamplePlan::standard(1), 1e-9);
        assert!(!r.pass);
        assert!(check_inverse(&fam, &SamplePlan::standard(1), 1e-9).pass);
    }

    #[test]
    fn cocycle_examples() {
        let fam = riccati();
        let r = check_cocycle_samples(&fam, single(1.5, 1.0, 0.0, 0.5), 1e-12);
        assert_eq!((r.samples_checked, r.max_residual), (1, 0.0));

        // τ = σ = ρ collapses to the identity check.
        let r = check_cocycle_samples(&fam, single(0.5, 0.5, 0.5, 0.25), 0.0);
        assert!(r.pass);

        // Outside the guard: F_{σρ}(a) undefined.
        let r = check_cocycle_samples(&fam, single(0.0, 2.5, 0.0, 0.5), 0.0);
        assert_eq!((r.samples_checked, r.samples_skipped), (0, 1));
    }

    #[test]
    fn perturbed_cocycle_fails() {
        let perturbed = FnFamily::new(1, |tau, sigma, a| {
            State::scalar(a[0] / (1.0 + (sigma - tau) * a[0]) + 0.01 * (tau - sigma).powi(2))
        })
        .with_domain(|tau, sigma, a| (tau - sigma) * a[0] < 1.0);
        let r = check_cocycle(&perturbed, &SamplePlan::standard(1), 1e-9);
        assert!(!r.pass);
        // Brute force over the plan: at a = 0, F̃_{τσ}(F̃_{σρ}(0)) − F̃_{τρ}(0)
        // includes 0.01·((τ−σ)² + (σ−ρ)² − (τ−ρ)²), which is 0.005 on the
        // grid step; the reported maximum dominates it.
        assert!(r.max_residual >= 0.005);
    }

    #[test]
    fn domain_inclusion_examples() {
        let plan = SamplePlan::standard(1);
        assert!(check_domain_inclusion(&riccati(), &plan).pass);

        let shrunk = FnFamily::new(1, |_, _, a| State::from(a))
            .with_domain(|tau, sigma, a| tau != sigma || a[0] > 0.0);
        let r = check_domain_inclusion(&shrunk, &plan);
        assert!(!r.pass);
        assert!(r.worst_case.unwrap().a[0] <= 0.0);
    }

    #[test]
    fn interval_examples() {
        let times: Vec<f64> = (0..=16).map(|i| -1.0 + 0.25 * i as f64).collect();
        let plan = SamplePlan::new(times.clone(), vec![State::scalar(0.5)]);
        let fam = riccati();
        let inside: Vec<f64> = times.iter().copied().filter(|&t| fam.in_domain(t, 0.0, &[0.5])).collect();
        assert_eq!(inside.last(), Some(&1.75));
        assert!(check_interval(&fam, &plan).pass);

        let plan0 = SamplePlan::new(times.clone(), vec![State::scalar(0.0)]);
        assert!(check_interval(&fam, &plan0).pass);

        let gappy = FnFamily::new(1, |_, _, a| State::from(a)).with_domain(|tau, sigma, _| {
            let d = (tau - sigma).abs();
            d < 1.0 || d > 2.0
        });
        assert!(!check_interval(&gappy, &plan).pass);
    }

    #[test]
    fn openness_examples() {
        let fam = riccati();
        let at = |tau: f64| SamplePlan {
            time_grid: vec![tau, 0.0],
            state_grid: vec![State::scalar(0.5)],
            random_count: 0,
            seed: 0,
        };
        let r = check_openness(&fam, &at(1.0), 1e-4);
        assert!(r.pass && r.samples_checked > 0);

        let r = check_openness(&FnFamily::empty(1), &SamplePlan::standard(1), 1e-4);
        assert!(!r.pass);
        assert_eq!(r.note.as_deref(), Some("K empty over plan"));

        // (1.99, 0, 0.5) sits 0.01 from the boundary τ = 2: checked at
        // δ = 1e-4, skipped once δ exceeds that distance.
        let plan = SamplePlan {
            time_grid: vec![0.0, 1.99],
            state_grid: vec![State::scalar(0.5)],
            random_count: 0,
            seed: 0,
        };
        let r = check_openness(&fam, &plan, 1e-4);
        assert!(r.pass);
        assert_eq!((r.samples_checked, r.samples_skipped), (4, 0));
        let r = check_openness(&fam, &plan, 0.02);
        assert!(r.pass);
        assert_eq!((r.samples_checked, r.samples_skipped), (3, 1));
        assert_eq!(r.worst_case, None);
    }

    #[test]
    fn suite_passes_on_riccati_and_is_deterministic() {
        let plan = SamplePlan::standard(1).with_random(100, 7);
        let tol = SuiteTolerances::default();
        let r1 = run_suite(&riccati(), &plan, &tol);
        assert!(r1.pass, "{:?}", r1.failed().collect::<Vec<_>>());
        let r2 = run_suite(&riccati(), &plan, &tol);
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap()
        );
    }

    #[test]
    fn random_samples_depend_on_seed() {
        let a = SamplePlan::standard(2).with_random(5, 1).samples(1, 1);
        let b = SamplePlan::standard(2).with_random(5, 2).samples(1, 1);
        assert_eq!(a.len(), b.len());
        assert_ne!(a.last().unwrap().a, b.last().unwrap().a);
    }
}
