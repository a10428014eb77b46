//! Adaptive Dormand–Prince 5(4) integration with escape detection.
//!
//! [`advance`] moves a state from `ρ` to `τ` along `ẋ = f(t, x)` and
//! reports why it could not, when it could not: the norm crossed the
//! blow-up radius, the trajectory left the domain of `f`, the integration
//! window ended, or the step control gave up. Escape times are bracketed
//! by bisection on the last accepted step.

use crate::expr::EvalError;
use crate::field::VectorField;
use crate::flow::{check_dim, DomainViolation, EscapeInterval, EscapeKind, FamilyKind, FlowFamily};
use crate::state::{sup_norm, State};
use serde::{Deserialize, Serialize};

/// Width below which a bisected escape time is considered located.
const ESCAPE_BRACKET: f64 = 1e-7;
const SAFETY: f64 = 0.9;
const FACTOR_MIN: f64 = 0.2;
const FACTOR_MAX: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub blowup_radius: f64,
    pub window: (f64, f64),
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            h_init: 1e-3,
            h_min: 1e-12,
            blowup_radius: 1e6,
            window: (-50.0, 50.0),
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid integrator config: {0}")]
pub struct InvalidConfig(pub String);

impl IntegratorConfig {
    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_window(mut self, lo: f64, hi: f64) -> Self {
        self.window = (lo, hi);
        self
    }

    pub fn validate(&self) -> Result<(), InvalidConfig> {
        let bad = |m: &str| Err(InvalidConfig(m.to_owned()));
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("rel_tol and abs_tol must be positive");
        }
        if !(self.h_min > 0.0 && self.h_min < self.h_init) {
            return bad("need 0 < h_min < h_init");
        }
        if !(self.blowup_radius > 0.0) {
            return bad("blowup_radius must be positive");
        }
        if !(self.window.0 < self.window.1) {
            return bad("window must be a nonempty interval");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        Ok(())
    }

    /// The scalar the two-sided and cocycle checks scale their tolerances by.
    pub fn tolerance_scale(&self) -> f64 {
        self.rel_tol.max(self.abs_tol)
    }
}

/// Why and where an integration stopped short of its target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{kind} at t = {time}")]
pub struct EscapeEvent {
    pub kind: EscapeKind,
    pub time: f64,
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<'f, V: ?Sized> {
    field: &'f V,
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    y_new: Vec<f64>,
}

impl<'f, V: VectorField + ?Sized> Stepper<'f, V> {
    fn new(field: &'f V) -> Self {
        let n = field.dim();
        Stepper {
            field,
            k: std::array::from_fn(|_| vec![0.0; n]),
            stage: vec![0.0; n],
            y_new: vec![0.0; n],
        }
    }

    fn prime(&mut self, t: f64, y: &[f64]) -> Result<(), EvalError> {
        self.field.eval_into(t, y, &mut self.k[0])
    }

    /// One trial step from `(t, y)` with `k[0] = f(t, y)` already set.
    /// Leaves the fifth-order solution in `y_new` and `f(t + h, y_new)` in
    /// `k[6]`; returns the error estimate in the mixed-tolerance ∞-norm.
    fn attempt(&mut self, t: f64, y: &[f64], h: f64, atol: f64, rtol: f64) -> Result<f64, EvalError> {
        for s in 1..7 {
            for i in 0..y.len() {
                let mut acc = 0.0;
                for (j, a) in A[s][..s].iter().enumerate() {
                    acc += a * self.k[j][i];
                }
                self.stage[i] = y[i] + h * acc;
            }
            self.field.eval_into(t + C[s] * h, &self.stage, &mut self.k[s])?;
        }
        // Row 7 of A is the fifth-order solution, so the last stage is y_new.
        self.y_new.copy_from_slice(&self.stage);
        let mut err: f64 = 0.0;
        for i in 0..y.len() {
            let e: f64 = (0..7).map(|j| E[j] * self.k[j][i]).sum::<f64>() * h;
            let scale = atol + rtol * y[i].abs().max(self.y_new[i].abs());
            err = err.max(e.abs() / scale);
        }
        if err.is_nan() {
            err = f64::INFINITY;
        }
        Ok(err)
    }

    fn accept(&mut self) {
        self.k.swap(0, 6);
    }
}

fn step_factor(err: f64) -> f64 {
    if err == 0.0 {
        FACTOR_MAX
    } else if !err.is_finite() {
        FACTOR_MIN
    } else {
        (SAFETY * err.powf(-0.2)).clamp(FACTOR_MIN, FACTOR_MAX)
    }
}

/// Failure of a segment integration: the last accepted point and the end
/// of the step that failed.
struct Escape {
    kind: EscapeKind,
    t_ok: f64,
    x_ok: Vec<f64>,
    t_bad: f64,
    h: f64,
}

fn integrate_segment<V: VectorField + ?Sized>(
    field: &V,
    t0: f64,
    x0: &[f64],
    t1: f64,
    cfg: &IntegratorConfig,
    h0: f64,
) -> Result<(Vec<f64>, f64), Escape> {
    let radius = cfg.blowup_radius.min(field.blowup_radius());
    let mut t = t0;
    let mut y = x0.to_vec();
    let mut h = h0.abs().max(cfg.h_min);
    if t0 == t1 {
        return Ok((y, h));
    }
    let dir = (t1 - t0).signum();
    let mut stepper = Stepper::new(field);
    let fail = |kind, t: f64, y: &[f64], t_bad: f64, h: f64| Escape {
        kind,
        t_ok: t,
        x_ok: y.to_vec(),
        t_bad,
        h,
    };
    if stepper.prime(t, &y).is_err() {
        return Err(fail(EscapeKind::LeftDomain, t, &y, t, h));
    }
    let mut steps = 0usize;
    loop {
        let remaining = (t1 - t).abs();
        if remaining <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            return Ok((y, h));
        }
        if steps >= cfg.max_steps {
            return Err(fail(EscapeKind::StepLimit, t, &y, t, h));
        }
        steps += 1;
        let last = h >= remaining;
        let h_try = if last { remaining } else { h };
        match stepper.attempt(t, &y, dir * h_try, cfg.abs_tol, cfg.rel_tol) {
            Ok(err) if err <= 1.0 => {
                let t_new = if last { t1 } else { t + dir * h_try };
                if sup_norm(&stepper.y_new) > radius {
                    return Err(fail(EscapeKind::BlowUp, t, &y, t_new, h_try));
                }
                if !field.contains(t_new, &stepper.y_new) {
                    return Err(fail(EscapeKind::LeftDomain, t, &y, t_new, h_try));
                }
                t = t_new;
                y.copy_from_slice(&stepper.y_new);
                stepper.accept();
                if !last {
                    h = h_try * step_factor(err);
                }
                continue;
            }
            Ok(err) => h = h_try * step_factor(err).min(1.0),
            Err(_) => h = h_try * 0.25,
        }
        if h < cfg.h_min {
            return Err(fail(EscapeKind::StepUnderflow, t, &y, t + dir * h_try, h));
        }
    }
}

/// Narrows the failing step down to `ESCAPE_BRACKET` by re-integrating
/// from the last good point with fresh step control.
fn refine<V: VectorField + ?Sized>(field: &V, esc: Escape, cfg: &IntegratorConfig) -> EscapeEvent {
    if !matches!(esc.kind, EscapeKind::BlowUp | EscapeKind::LeftDomain) {
        return EscapeEvent {
            kind: esc.kind,
            time: esc.t_ok,
        };
    }
    let (mut lo, mut x_lo, mut hi, mut h) = (esc.t_ok, esc.x_ok, esc.t_bad, esc.h);
    let mut kind = esc.kind;
    for _ in 0..200 {
        if (hi - lo).abs() <= ESCAPE_BRACKET {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match integrate_segment(field, lo, &x_lo, mid, cfg, h.min((mid - lo).abs())) {
            Ok((x, h_last)) => {
                lo = mid;
                x_lo = x;
                h = h_last;
            }
            Err(e) => {
                if !matches!(e.kind, EscapeKind::BlowUp | EscapeKind::LeftDomain) {
                    // Step control gave out inside the bracket; the event is
                    // no closer than the last good point.
                    return EscapeEvent {
                        kind,
                        time: e.t_ok,
                    };
                }
                kind = e.kind;
                lo = e.t_ok;
                x_lo = e.x_ok;
                hi = e.t_bad;
                h = e.h;
            }
        }
    }
    EscapeEvent {
        kind,
        time: 0.5 * (lo + hi),
    }
}

/// `x(τ)` for the solution of `ẋ = f(t, x)`, `x(ρ) = a`.
///
/// Integrates backward when `τ < ρ`. A zero-length request returns `a`
/// unchanged. Targets outside the window are integrated up to the window
/// edge and then reported as [`EscapeKind::WindowLimit`].
pub fn advance<V: VectorField + ?Sized>(
    field: &V,
    rho: f64,
    a: &[f64],
    tau: f64,
    cfg: &IntegratorConfig,
) -> Result<State, EscapeEvent> {
    if a.len() != field.dim() || !field.contains(rho, a) {
        return Err(EscapeEvent {
            kind: EscapeKind::LeftDomain,
            time: rho,
        });
    }
    if tau == rho {
        return Ok(State::from(a));
    }
    let (lo, hi) = cfg.window;
    if !(lo..=hi).contains(&rho) {
        return Err(EscapeEvent {
            kind: EscapeKind::WindowLimit,
            time: rho.clamp(lo, hi),
        });
    }
    let target = tau.clamp(lo, hi);
    match integrate_segment(field, rho, a, target, cfg, cfg.h_init) {
        Ok(_) if target != tau => Err(EscapeEvent {
            kind: EscapeKind::WindowLimit,
            time: target,
        }),
        Ok((x, _)) => Ok(State::new(x)),
        Err(esc) => Err(refine(field, esc, cfg)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("initial point (rho = {rho}) is outside the field's domain or the window")]
pub struct InitialPointOutside {
    pub rho: f64,
}

/// The open interval `J(ρ, a)` seen inside the integration window.
pub fn escape_interval<V: VectorField + ?Sized>(
    field: &V,
    rho: f64,
    a: &[f64],
    cfg: &IntegratorConfig,
) -> Result<EscapeInterval, InitialPointOutside> {
    let (lo, hi) = cfg.window;
    if a.len() != field.dim() || !field.contains(rho, a) || !(lo < rho && rho < hi) {
        return Err(InitialPointOutside { rho });
    }
    let end = |edge: f64| match integrate_segment(field, rho, a, edge, cfg, cfg.h_init) {
        Ok(_) => (edge, EscapeKind::WindowLimit),
        Err(esc) => {
            let ev = refine(field, esc, cfg);
            (ev.time, ev.kind)
        }
    };
    let (upper, upper_kind) = end(hi);
    let (lower, lower_kind) = end(lo);
    Ok(EscapeInterval {
        lower,
        upper,
        lower_kind,
        upper_kind,
    })
}

/// Non-adaptive Dormand–Prince integration with `steps` equal steps,
/// using the fifth-order solution. Used for order-of-accuracy checks.
pub fn integrate_fixed<V: VectorField + ?Sized>(
    field: &V,
    t0: f64,
    x0: &[f64],
    t1: f64,
    steps: usize,
) -> Result<State, EvalError> {
    let h = (t1 - t0) / steps as f64;
    let mut stepper = Stepper::new(field);
    let mut y = x0.to_vec();
    stepper.prime(t0, &y)?;
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        stepper.attempt(t, &y, h, 1.0, 0.0)?;
        y.copy_from_slice(&stepper.y_new);
        stepper.accept();
    }
    Ok(State::new(y))
}

/// A flow family whose maps are computed by integrating a vector field.
#[derive(Debug, Clone)]
pub struct NumericFamily<V> {
    field: V,
    cfg: IntegratorConfig,
}

impl<V: VectorField> NumericFamily<V> {
    pub fn new(field: V, cfg: IntegratorConfig) -> Self {
        NumericFamily { field, cfg }
    }

    pub fn field(&self) -> &V {
        &self.field
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }
}

pub fn numeric_family<V: VectorField>(field: V, cfg: IntegratorConfig) -> NumericFamily<V> {
    NumericFamily::new(field, cfg)
}

impl<V: VectorField> FlowFamily for NumericFamily<V> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn kind(&self) -> FamilyKind {
        FamilyKind::Numeric
    }

    fn evaluate(&self, tau: f64, sigma: f64, a: &[f64]) -> Result<State, DomainViolation> {
        check_dim(self.field.dim(), a)?;
        advance(&self.field, sigma, a, tau, &self.cfg).map_err(|_| DomainViolation::OutOfDomain)
    }
}
