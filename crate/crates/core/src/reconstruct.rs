//! Recovering the generating vector field of a flow family,
//! `f(τ, a) = ∂F_{τσ}(a)/∂τ |_{σ=τ}`, by finite differences on a tensor
//! grid, and closing the loop family → field → numeric family.

use crate::expr::EvalError;
use crate::field::{VectorField, DEFAULT_BLOWUP_RADIUS};
use crate::flow::{DomainViolation, FlowFamily};
use crate::integrate::{numeric_family, IntegratorConfig};
use crate::state::{sup_dist, State};
use crate::verify::SamplePlan;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A uniform grid `lo, lo + Δ, …, hi` with `count ≥ 2` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, count: usize) -> Self {
        assert!(lo < hi && count >= 2, "axis needs lo < hi and at least two nodes");
        Axis { lo, hi, count }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    /// Cell index and fractional offset of `v`, or `None` outside `[lo, hi]`.
    fn locate(&self, v: f64) -> Option<(usize, f64)> {
        if !(self.lo <= v && v <= self.hi) {
            return None;
        }
        let u = (v - self.lo) / self.step();
        let i = (u.floor() as usize).min(self.count - 2);
        Some((i, u - i as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DifferenceScheme {
    /// `[F_{τ+h,τ}(a) − F_{τ−h,τ}(a)] / 2h`
    Central,
    /// Central differences at `h` and `h/2` combined as `(4·D_{h/2} − D_h)/3`.
    Richardson,
    /// `[F_{τ+h,τ}(a) − a] / h`, for sites without room below `τ`.
    Forward,
}

/// `∂F_{τσ}(a)/∂τ` at `σ = τ`.
pub fn fd_derivative<F: FlowFamily + ?Sized>(
    fam: &F,
    tau: f64,
    a: &[f64],
    h: f64,
    scheme: DifferenceScheme,
) -> Result<State, DomainViolation> {
    let central = |h: f64| -> Result<Vec<f64>, DomainViolation> {
        let up = fam.evaluate(tau + h, tau, a)?;
        let down = fam.evaluate(tau - h, tau, a)?;
        Ok(up.iter().zip(down.iter()).map(|(u, d)| (u - d) / (2.0 * h)).collect())
    };
    let d = match scheme {
        DifferenceScheme::Central => central(h)?,
        DifferenceScheme::Richardson => {
            let coarse = central(h)?;
            let fine = central(0.5 * h)?;
            fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect()
        }
        DifferenceScheme::Forward => {
            let up = fam.evaluate(tau + h, tau, a)?;
            up.iter().zip(a).map(|(u, a)| (u - a) / h).collect()
        }
    };
    Ok(State::new(d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionConfig {
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_true")]
    pub richardson: bool,
    pub time_axis: Axis,
    pub state_axes: Vec<Axis>,
    /// Fraction of skipped sites above which reconstruction fails.
    #[serde(default = "default_skip_fraction")]
    pub max_skip_fraction: f64,
    /// Optional bound on second differences of the tabulated field; off by
    /// default.
    #[serde(default)]
    pub smoothness_bound: Option<f64>,
}

fn default_h() -> f64 {
    1e-4
}

fn default_true() -> bool {
    true
}

fn default_skip_fraction() -> f64 {
    0.5
}

impl ReconstructionConfig {
    pub fn new(time_axis: Axis, state_axes: Vec<Axis>) -> Self {
        ReconstructionConfig {
            h: default_h(),
            richardson: true,
            time_axis,
            state_axes,
            max_skip_fraction: default_skip_fraction(),
            smoothness_bound: None,
        }
    }

    fn scheme(&self) -> DifferenceScheme {
        if self.richardson {
            DifferenceScheme::Richardson
        } else {
            DifferenceScheme::Central
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReconstructError {
    #[error("tabulation grid has {axes} state axes but the family has dimension {n}")]
    GridDimension { axes: usize, n: usize },
    #[error("reconstruction failed: {skipped} of {total} grid sites skipped")]
    ReconstructionFailed { skipped: usize, total: usize },
    #[error("second differences reach {found}, above the bound {bound}")]
    NotSmooth { found: f64, bound: f64 },
    #[error("round trip failed at every checked sample")]
    RoundtripEscaped,
}

/// A vector field tabulated on a tensor grid over `(t, x1, …, xn)` and
/// evaluated by multilinear interpolation. Sites that could not be
/// computed hold NaN; cells touching one are outside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedField {
    n: usize,
    axes: Vec<Axis>,
    values: Vec<f64>,
    blowup_radius: f64,
}

impl TabulatedField {
    /// `axes[0]` is time; `values` holds `n` entries per site, sites in
    /// row-major order with time outermost.
    pub fn new(axes: Vec<Axis>, values: Vec<f64>) -> Self {
        let n = axes.len() - 1;
        let sites: usize = axes.iter().map(|a| a.count).product();
        assert_eq!(values.len(), sites * n, "value table does not match the grid");
        TabulatedField {
            n,
            axes,
            values,
            blowup_radius: DEFAULT_BLOWUP_RADIUS,
        }
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn site_count(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    /// Coordinates `(t, x1, …, xn)` of site `index`.
    pub fn site(&self, index: usize) -> Vec<f64> {
        let mut rem = index;
        let mut coords = vec![0.0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            coords[k] = axis.node(rem % axis.count);
            rem /= axis.count;
        }
        coords
    }

    pub fn site_value(&self, index: usize) -> &[f64] {
        &self.values[index * self.n..(index + 1) * self.n]
    }

    pub fn skipped_sites(&self) -> usize {
        (0..self.site_count())
            .filter(|&i| self.site_value(i).iter().any(|v| v.is_nan()))
            .count()
    }

    /// Max over valid sites of `‖f_tab − f_ref‖∞`.
    pub fn max_deviation<V: VectorField + ?Sized>(&self, reference: &V) -> f64 {
        (0..self.site_count())
            .into_par_iter()
            .map(|i| {
                let v = self.site_value(i);
                if v.iter().any(|x| x.is_nan()) {
                    return 0.0;
                }
                let c = self.site(i);
                match reference.eval(c[0], &c[1..]) {
                    Ok(r) => sup_dist(v, &r),
                    Err(_) => f64::INFINITY,
                }
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Largest `|Δ²f| / Δ²` along any axis over fully valid stencils.
    pub fn max_second_difference(&self) -> f64 {
        let strides: Vec<usize> = (0..self.axes.len())
            .map(|k| self.axes[k + 1..].iter().map(|a| a.count).product())
            .collect();
        let mut worst: f64 = 0.0;
        for i in 0..self.site_count() {
            let mut rem = i;
            let mut idx = vec![0; self.axes.len()];
            for k in (0..self.axes.len()).rev() {
                idx[k] = rem % self.axes[k].count;
                rem /= self.axes[k].count;
            }
            for (k, axis) in self.axes.iter().enumerate() {
                if idx[k] == 0 || idx[k] + 1 == axis.count {
                    continue;
                }
                let (lo, mid, hi) = (
                    self.site_value(i - strides[k]),
                    self.site_value(i),
                    self.site_value(i + strides[k]),
                );
                let dx2 = axis.step() * axis.step();
                for c in 0..self.n {
                    let d2 = (lo[c] - 2.0 * mid[c] + hi[c]) / dx2;
                    if d2.is_finite() {
                        worst = worst.max(d2.abs());
                    }
                }
            }
        }
        worst
    }

    fn interpolate(&self, point: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let d = self.axes.len();
        let mut cell = Vec::with_capacity(d);
        for (axis, &v) in self.axes.iter().zip(point) {
            cell.push(axis.locate(v).ok_or(EvalError::Domain)?);
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut site = 0;
            for (k, &(i, w)) in cell.iter().enumerate() {
                let upper = (corner >> (d - 1 - k)) & 1 == 1;
                weight *= if upper { w } else { 1.0 - w };
                site = site * self.axes[k].count + i + upper as usize;
            }
            let v = self.site_value(site);
            if v.iter().any(|x| x.is_nan()) {
                return Err(EvalError::Domain);
            }
            if weight != 0.0 {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += weight * x;
                }
            }
        }
        Ok(())
    }
}

impl VectorField for TabulatedField {
    fn dim(&self) -> usize {
        self.n
    }

    fn contains(&self, t: f64, x: &[f64]) -> bool {
        if x.len() != self.n {
            return false;
        }
        let inside = std::iter::once(t)
            .chain(x.iter().copied())
            .zip(&self.axes)
            .all(|(v, a)| a.lo < v && v < a.hi);
        let mut scratch = vec![0.0; self.n];
        inside && self.interpolate(&[&[t][..], x].concat(), &mut scratch).is_ok()
    }

    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let mut point = Vec::with_capacity(self.n + 1);
        point.push(t);
        point.extend_from_slice(x);
        self.interpolate(&point, out)
    }

    fn blowup_radius(&self) -> f64 {
        self.blowup_radius
    }
}

/// Tabulates `f(τ, a) = ∂F_{τσ}(a)/∂τ |_{σ=τ}` over the configured grid.
pub fn field_from_family<F: FlowFamily + ?Sized>(
    fam: &F,
    cfg: &ReconstructionConfig,
) -> Result<TabulatedField, ReconstructError> {
    let n = fam.dim();
    if cfg.state_axes.len() != n {
        return Err(ReconstructError::GridDimension {
            axes: cfg.state_axes.len(),
            n,
        });
    }
    let axes: Vec<Axis> = std::iter::once(cfg.time_axis)
        .chain(cfg.state_axes.iter().copied())
        .collect();
    let shell = TabulatedField::new(axes.clone(), vec![f64::NAN; axes.iter().map(|a| a.count).product::<usize>() * n]);
    let total = shell.site_count();
    let scheme = cfg.scheme();
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .flat_map_iter(|i| {
            let c = shell.site(i);
            match fd_derivative(fam, c[0], &c[1..], cfg.h, scheme) {
                Ok(d) => d.into_inner(),
                Err(_) => vec![f64::NAN; n],
            }
        })
        .collect();
    let field = TabulatedField::new(axes, values);
    let skipped = field.skipped_sites();
    if skipped as f64 > cfg.max_skip_fraction * total as f64 {
        return Err(ReconstructError::ReconstructionFailed { skipped, total });
    }
    if let Some(bound) = cfg.smoothness_bound {
        let found = field.max_second_difference();
        if found > bound {
            return Err(ReconstructError::NotSmooth { found, bound });
        }
    }
    Ok(field)
}

/// Max of `‖F_{τσ}(a) − F̂_{τσ}(a)‖∞` where `F̂` integrates the
/// reconstructed field, over the plan's `(τ, σ, a)` samples inside the
/// family's domain.
pub fn roundtrip_error<F: FlowFamily + ?Sized>(
    fam: &F,
    cfg: &ReconstructionConfig,
    icfg: &IntegratorConfig,
    plan: &SamplePlan,
) -> Result<f64, ReconstructError> {
    roundtrip_error_where(fam, cfg, icfg, plan, |_, _, _| true)
}

/// Like [`roundtrip_error`], restricted to samples accepted by `guard`.
/// Samples whose round trip escapes the tabulated box are not counted; if
/// none survive, the round trip has failed.
pub fn roundtrip_error_where<F, G>(
    fam: &F,
    cfg: &ReconstructionConfig,
    icfg: &IntegratorConfig,
    plan: &SamplePlan,
    guard: G,
) -> Result<f64, ReconstructError>
where
    F: FlowFamily + ?Sized,
    G: Fn(f64, f64, &[f64]) -> bool + Sync,
{
    let field = field_from_family(fam, cfg)?;
    roundtrip_with_field(fam, &field, icfg, plan, guard)
}

/// Round trip through an already tabulated field.
pub fn roundtrip_with_field<F, G>(
    fam: &F,
    field: &TabulatedField,
    icfg: &IntegratorConfig,
    plan: &SamplePlan,
    guard: G,
) -> Result<f64, ReconstructError>
where
    F: FlowFamily + ?Sized,
    G: Fn(f64, f64, &[f64]) -> bool + Sync,
{
    let rebuilt = numeric_family(field, *icfg);
    let errors: Vec<Option<f64>> = plan
        .samples(2, 40)
        .into_par_iter()
        .filter_map(|s| {
            let [tau, sigma, _] = s.times;
            if !guard(tau, sigma, &s.a) {
                return None;
            }
            let original = fam.evaluate(tau, sigma, &s.a).ok()?;
            Some(
                rebuilt
                    .evaluate(tau, sigma, &s.a)
                    .ok()
                    .map(|x| sup_dist(&x, &original)),
            )
        })
        .collect();
    let checked: Vec<f64> = errors.into_iter().flatten().collect();
    if checked.is_empty() {
        return Err(ReconstructError::RoundtripEscaped);
    }
    Ok(checked.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{ExprFamily, FnFamily};

    fn riccati() -> ExprFamily {
        ExprFamily::parse(&["a1/(1+(sigma-tau)*a1)"], Some("1-(tau-sigma)*a1")).unwrap()
    }

    fn exp_family() -> FnFamily {
        FnFamily::new(1, |tau, sigma, a| State::scalar((tau - sigma).exp() * a[0]))
    }

    #[test]
    fn derivative_examples() {
        let d = fd_derivative(&riccati(), 0.3, &[0.7], 1e-4, DifferenceScheme::Richardson).unwrap();
        assert!((d[0] - 0.49).abs() <= 1e-8, "{d:?}");
        let d = fd_derivative(&riccati(), 0.3, &[0.0], 1e-4, DifferenceScheme::Richardson).unwrap();
        assert_eq!(d[0], 0.0);
        let d = fd_derivative(&exp_family(), 1.2, &[2.0], 1e-4, DifferenceScheme::Richardson).unwrap();
        assert!((d[0] - 2.0).abs() <= 1e-8, "{d:?}");
    }

    #[test]
    fn richardson_beats_plain_central() {
        // Exact derivative of the Riccati family at the diagonal is a².
        let (tau, a, h) = (0.3, 0.7, 1e-3);
        let exact = a * a;
        let err = |scheme| (fd_derivative(&riccati(), tau, &[a], h, scheme).unwrap()[0] - exact).abs();
        let central = err(DifferenceScheme::Central);
        let richardson = err(DifferenceScheme::Richardson);
        assert!(richardson * 10.0 <= central, "{richardson} vs {central}");
        // O(h²): halving h quarters the plain central error.
        let half = (fd_derivative(&riccati(), tau, &[a], h / 2.0, DifferenceScheme::Central).unwrap()[0] - exact).abs();
        let ratio = central / half;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn forward_difference_agrees_to_first_order() {
        let h = 1e-4;
        let c = fd_derivative(&riccati(), 0.2, &[0.5], h, DifferenceScheme::Central).unwrap();
        let f = fd_derivative(&riccati(), 0.2, &[0.5], h, DifferenceScheme::Forward).unwrap();
        assert!((c[0] - f[0]).abs() <= 10.0 * h);
    }

    #[test]
    fn interpolation_is_exact_for_multilinear_data() {
        // f(t, x) = t·x + 2x − t is multilinear in (t, x).
        let axes = vec![Axis::new(-1.0, 1.0, 3), Axis::new(0.0, 2.0, 5)];
        let mut values = Vec::new();
        for i in 0..3 {
            for j in 0..5 {
                let (t, x) = (axes[0].node(i), axes[1].node(j));
                values.push(t * x + 2.0 * x - t);
            }
        }
        let tab = TabulatedField::new(axes, values);
        let v = tab.eval(0.3, &[1.7]).unwrap();
        assert!((v[0] - (0.3 * 1.7 + 2.0 * 1.7 - 0.3)).abs() < 1e-14);
        assert!(tab.contains(0.3, &[1.7]));
        assert!(!tab.contains(1.0, &[1.7]));
        assert!(tab.eval(1.5, &[1.0]).is_err());
    }

    #[test]
    fn skipped_sites_leave_holes() {
        let axes = vec![Axis::new(0.0, 1.0, 2), Axis::new(0.0, 1.0, 3)];
        let tab = TabulatedField::new(axes, vec![0.0, 0.0, f64::NAN, 0.0, 0.0, 0.0]);
        assert_eq!(tab.skipped_sites(), 1);
        assert!(tab.contains(0.5, &[0.25]));
        assert!(!tab.contains(0.5, &[0.75]));
    }

    #[test]
    fn riccati_reconstruction() {
        let cfg = ReconstructionConfig::new(Axis::new(-1.0, 1.0, 5), vec![Axis::new(-2.0, 2.0, 81)]);
        let tab = field_from_family(&riccati(), &cfg).unwrap();
        let reference = crate::field::ExprField::parse(&["x1^2"]).unwrap();
        assert!(tab.max_deviation(&reference) <= 1e-8);
    }

    #[test]
    fn identity_family_reconstructs_zero_field() {
        let id = FnFamily::new(1, |_, _, a| State::from(a));
        let cfg = ReconstructionConfig::new(Axis::new(-2.0, 2.0, 5), vec![Axis::new(-2.0, 2.0, 5)]);
        let tab = field_from_family(&id, &cfg).unwrap();
        assert!(tab.values().iter().all(|&v| v == 0.0));
        let plan = SamplePlan::standard(1);
        let err = roundtrip_error(&id, &cfg, &IntegratorConfig::default(), &plan).unwrap();
        assert!(err <= 1e-12);
    }

    #[test]
    fn exp_family_roundtrip() {
        let cfg = ReconstructionConfig::new(Axis::new(-1.5, 1.5, 7), vec![Axis::new(-16.0, 16.0, 9)]);
        let plan = SamplePlan::new(
            (0..=8).map(|i| -1.0 + 0.25 * i as f64).collect(),
            (0..=8).map(|i| State::scalar(-2.0 + 0.5 * i as f64)).collect(),
        );
        let err = roundtrip_error(&exp_family(), &cfg, &IntegratorConfig::default(), &plan).unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn mostly_empty_family_fails() {
        let fam = FnFamily::new(1, |_, _, a| State::from(a)).with_domain(|_, _, a| a[0] > 1.5);
        let cfg = ReconstructionConfig::new(Axis::new(0.0, 1.0, 3), vec![Axis::new(0.0, 2.0, 5)]);
        assert!(matches!(
            field_from_family(&fam, &cfg),
            Err(ReconstructError::ReconstructionFailed { skipped: 12, total: 15 })
        ));
    }

    #[test]
    fn smoothness_gate() {
        let mut cfg = ReconstructionConfig::new(Axis::new(-1.0, 1.0, 5), vec![Axis::new(-1.0, 1.0, 21)]);
        cfg.smoothness_bound = Some(2.5);
        // f = a² has second derivative 2 along a.
        assert!(field_from_family(&riccati(), &cfg).is_ok());
        cfg.smoothness_bound = Some(1.0);
        assert!(matches!(
            field_from_family(&riccati(), &cfg),
            Err(ReconstructError::NotSmooth { .. })
        ));
    }
}
