//! Affine families `F_{τσ}(a) = W_τ(W_σ⁻¹a + h_τ − h_σ)`: detection,
//! Sincov decomposition into a Wronski matrix and particular solution, and
//! the mollifier that averages an affine one-parameter group.

use crate::autonomous::OneParamGroup;
use crate::field::VectorField;
use crate::flow::{check_dim, DomainViolation, FamilyKind, FlowFamily};
use crate::state::{scaled_residual, State};
use crate::verify::{reduce, ConditionReport, Outcome, SamplePlan, WorstCase};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Singular-value ratio below which a matrix counts as singular.
pub const SINGULAR_RATIO: f64 = 1e-12;

/// Scaled residual allowed when confirming that a probed map is affine.
const AFFINE_PROBE_TOL: f64 = 1e-8;

pub const AFFINITY: &str = "affinity";
pub const WRONSKI: &str = "wronski";
pub const SMOOTHING: &str = "smoothing";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinearError {
    #[error("family is not affine at tau = {tau}: residual {residual:e}")]
    NotAffine { tau: f64, residual: f64 },
    #[error("field is not affine in x at t = {tau}: residual {residual:e}")]
    NotAffineField { tau: f64, residual: f64 },
    #[error("Wronski matrix at tau = {tau} is singular (singular value ratio {ratio:e})")]
    SingularWronskian { tau: f64, ratio: f64 },
    #[error("averaged map is not invertible: smallest singular value {smallest_singular_value:e}")]
    NotInvertible { smallest_singular_value: f64 },
    #[error("panel count must be even and at least 2, got {0}")]
    InvalidPanels(usize),
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("decomposition needs at least one grid time")]
    EmptyGrid,
    #[error("evaluation failed at tau = {tau}: {source}")]
    Evaluation {
        tau: f64,
        #[source]
        source: DomainViolation,
    },
}

/// `a ↦ A·a + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl AffineMap {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        assert!(a.is_square() && a.nrows() == b.len(), "affine map needs a square matrix matching the offset");
        AffineMap { a, b }
    }

    pub fn identity(n: usize) -> Self {
        AffineMap::new(DMatrix::identity(n, n), DVector::zeros(n))
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn apply(&self, x: &[f64]) -> State {
        let y = &self.a * DVector::from_column_slice(x) + &self.b;
        State::new(y.as_slice().to_vec())
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AffineMap) -> AffineMap {
        AffineMap::new(&self.a * &other.a, &self.a * &other.b + &self.b)
    }

    /// Smallest over largest singular value of `A`.
    pub fn condition_ratio(&self) -> f64 {
        singular_ratio(&self.a).0
    }

    pub fn is_invertible(&self) -> bool {
        self.condition_ratio() > SINGULAR_RATIO
    }

    pub fn inverse(&self) -> Result<AffineMap, LinearError> {
        let (ratio, smallest) = singular_ratio(&self.a);
        if ratio <= SINGULAR_RATIO {
            return Err(LinearError::NotInvertible {
                smallest_singular_value: smallest,
            });
        }
        let inv = self
            .a
            .clone()
            .try_inverse()
            .ok_or(LinearError::NotInvertible {
                smallest_singular_value: smallest,
            })?;
        let b = -(&inv * &self.b);
        Ok(AffineMap::new(inv, b))
    }

    /// Largest entrywise difference over `A` and `b`.
    pub fn sup_dist(&self, other: &AffineMap) -> f64 {
        let da = (&self.a - &other.a).amax();
        let db = (&self.b - &other.b).amax();
        da.max(db)
    }

    /// Rows of `A` as nested vectors, for reports.
    pub fn matrix_rows(&self) -> Vec<Vec<f64>> {
        self.a.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

/// `(σ_min/σ_max, σ_min)`; a zero matrix has ratio 0.
fn singular_ratio(m: &DMatrix<f64>) -> (f64, f64) {
    if m.is_empty() {
        return (1.0, 0.0);
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if max > 0.0 {
        (min / max, min)
    } else {
        (0.0, 0.0)
    }
}

/// Probe vector used to confirm affinity after extraction.
fn probe(n: usize) -> Vec<f64> {
    (0..n).map(|k| if k % 2 == 0 { -0.75 } else { 1.25 }).collect()
}

/// Reads off `A` and `b` from `n + 1` evaluations at 0 and the unit
/// vectors, then confirms the fit at one more point. Returns the map and
/// the confirmation residual.
fn probe_affine<E>(n: usize, map: impl Fn(&[f64]) -> Result<Vec<f64>, E>) -> Result<(AffineMap, f64), E> {
    let origin = map(&vec![0.0; n])?;
    let b = DVector::from_vec(origin);
    let mut a = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for k in 0..n {
        e[k] = 1.0;
        let col = DVector::from_vec(map(&e)?) - &b;
        a.set_column(k, &col);
        e[k] = 0.0;
    }
    let fitted = AffineMap::new(a, b);
    let v = probe(n);
    let actual = map(&v)?;
    let residual = scaled_residual(&actual, &fitted.apply(&v));
    Ok((fitted, residual))
}

/// The affine map `F_{τσ}`, assuming the family is affine.
pub fn extract_affine<F: FlowFamily + ?Sized>(fam: &F, tau: f64, sigma: f64) -> Result<AffineMap, DomainViolation> {
    probe_affine(fam.dim(), |a| fam.evaluate(tau, sigma, a).map(State::into_inner)).map(|(m, _)| m)
}

/// `‖F(λa + (1−λ)b) − λF(a) − (1−λ)F(b)‖` for λ ∈ {−1, 0.5, 2}, pairing
/// each sample state with every state of the grid.
pub fn affinity_report<F: FlowFamily + ?Sized>(fam: &F, plan: &SamplePlan, tol: f64) -> ConditionReport {
    const LAMBDAS: [f64; 3] = [-1.0, 0.5, 2.0];
    let outcomes = plan
        .samples(2, 60)
        .into_par_iter()
        .flat_map_iter(|s| {
            let [tau, sigma, _] = s.times;
            let fa = fam.evaluate(tau, sigma, &s.a).ok();
            let mut out = Vec::new();
            for b in &plan.state_grid {
                let fb = fam.evaluate(tau, sigma, b).ok();
                for lambda in LAMBDAS {
                    let mix: Vec<f64> = s.a.iter().zip(b.iter()).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
                    let (Some(fa), Some(fb), Ok(fm)) = (&fa, &fb, fam.evaluate(tau, sigma, &mix)) else {
                        out.push(Outcome::Skipped);
                        continue;
                    };
                    let rhs: Vec<f64> = fa.iter().zip(fb.iter()).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
                    out.push(Outcome::Checked(
                        scaled_residual(&fm, &rhs),
                        WorstCase::new(&s.a).tau(tau).sigma(sigma),
                    ));
                }
            }
            out
        })
        .collect();
    reduce(AFFINITY, tol, outcomes)
}

pub fn detect_affine<F: FlowFamily + ?Sized>(fam: &F, plan: &SamplePlan, tol: f64) -> bool {
    affinity_report(fam, plan, tol).pass
}

/// Wronski matrices `W_τ` and offsets `h_τ` on a time grid, normalized by
/// `W_{τ0} = I`, `h_{τ0} = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SincovDecomposition {
    pub tau0: f64,
    pub grid: Vec<f64>,
    pub w: Vec<DMatrix<f64>>,
    pub h: Vec<DVector<f64>>,
    /// When set, the family is empty outside the grid span; otherwise the
    /// end segments are extended linearly.
    pub enforce_span: bool,
}

impl SincovDecomposition {
    pub fn dim(&self) -> usize {
        self.h.first().map_or(0, |h| h.len())
    }

    /// Particular solution `W_τ h_τ = F_{τ,τ0}(0)` at grid index `i`.
    pub fn particular(&self, i: usize) -> DVector<f64> {
        &self.w[i] * &self.h[i]
    }

    fn span(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    /// `(W_τ, h_τ)`, interpolated linearly between grid times.
    pub fn at(&self, tau: f64) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let (lo, hi) = self.span();
        if !tau.is_finite() || (self.enforce_span && !(lo <= tau && tau <= hi)) {
            return None;
        }
        if self.grid.len() == 1 {
            return Some((self.w[0].clone(), self.h[0].clone()));
        }
        let i = match self.grid.binary_search_by(|g| g.total_cmp(&tau)) {
            Ok(i) => return Some((self.w[i].clone(), self.h[i].clone())),
            Err(i) => i.clamp(1, self.grid.len() - 1) - 1,
        };
        let (t0, t1) = (self.grid[i], self.grid[i + 1]);
        let s = (tau - t0) / (t1 - t0);
        let w = &self.w[i] * (1.0 - s) + &self.w[i + 1] * s;
        let h = &self.h[i] * (1.0 - s) + &self.h[i + 1] * s;
        Some((w, h))
    }
}

/// Decomposes an affine family with the gauge fixed at `tau0`. `tau0` is
/// added to the grid if absent.
pub fn sincov_decompose<F: FlowFamily + ?Sized>(
    fam: &F,
    tau0: f64,
    grid: &[f64],
) -> Result<SincovDecomposition, LinearError> {
    let mut times: Vec<f64> = grid.iter().copied().chain(std::iter::once(tau0)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let n = fam.dim();
    let parts = times
        .par_iter()
        .map(|&tau| {
            let (map, residual) = probe_affine(n, |a| fam.evaluate(tau, tau0, a).map(State::into_inner))
                .map_err(|source| LinearError::Evaluation { tau, source })?;
            if residual > AFFINE_PROBE_TOL {
                return Err(LinearError::NotAffine { tau, residual });
            }
            let (ratio, _) = singular_ratio(&map.a);
            if ratio <= SINGULAR_RATIO {
                return Err(LinearError::SingularWronskian { tau, ratio });
            }
            let h = map
                .a
                .clone()
                .lu()
                .solve(&map.b)
                .ok_or(LinearError::SingularWronskian { tau, ratio })?;
            Ok((map.a, h))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if times.is_empty() {
        return Err(LinearError::EmptyGrid);
    }
    let (w, h) = parts.into_iter().unzip();
    Ok(SincovDecomposition {
        tau0,
        grid: times,
        w,
        h,
        enforce_span: true,
    })
}

/// The affine family rebuilt from a decomposition.
#[derive(Debug, Clone)]
pub struct AffineFamily {
    dec: SincovDecomposition,
}

impl AffineFamily {
    pub fn decomposition(&self) -> &SincovDecomposition {
        &self.dec
    }
}

pub fn family_from_decomposition(dec: SincovDecomposition) -> AffineFamily {
    AffineFamily { dec }
}

impl FlowFamily for AffineFamily {
    fn dim(&self) -> usize {
        self.dec.dim()
    }

    fn kind(&self) -> FamilyKind {
        FamilyKind::AffineBacked
    }

    fn evaluate(&self, tau: f64, sigma: f64, a: &[f64]) -> Result<State, DomainViolation> {
        check_dim(self.dim(), a)?;
        let (Some((w_tau, h_tau)), Some((w_sigma, h_sigma))) = (self.dec.at(tau), self.dec.at(sigma)) else {
            return Err(DomainViolation::OutOfDomain);
        };
        if tau == sigma {
            return Ok(State::from(a));
        }
        let y = w_sigma
            .lu()
            .solve(&DVector::from_column_slice(a))
            .ok_or(DomainViolation::OutOfDomain)?;
        let x = w_tau * (y + h_tau - h_sigma);
        let x = State::new(x.as_slice().to_vec());
        if x.is_finite() {
            Ok(x)
        } else {
            Err(DomainViolation::OutOfDomain)
        }
    }
}

/// Checks `Ẇ = A(τ)W` and `d(Wh)/dτ = A(τ)·Wh + c(τ)` at interior grid
/// times, with `f(τ, x) = A(τ)x + c(τ)` read off the field and the left
/// sides taken by central differences on the grid.
pub fn wronski_consistency<V: VectorField + ?Sized>(
    dec: &SincovDecomposition,
    field: &V,
    tol: f64,
) -> Result<ConditionReport, LinearError> {
    let n = dec.dim();
    let interior: Vec<usize> = (1..dec.grid.len().saturating_sub(1)).collect();
    let rows = interior
        .par_iter()
        .map(|&i| {
            let tau = dec.grid[i];
            let (f, residual) = probe_affine(n, |x| field.eval(tau, x))
                .map_err(|_| LinearError::NotAffineField { tau, residual: f64::INFINITY })?;
            if residual > AFFINE_PROBE_TOL {
                return Err(LinearError::NotAffineField { tau, residual });
            }
            // The weights sum to zero, so differences keep constants exact.
            let [c0, _, c2] = three_point_weights(dec.grid[i - 1], tau, dec.grid[i + 1]);
            let dw = (&dec.w[i - 1] - &dec.w[i]) * c0 + (&dec.w[i + 1] - &dec.w[i]) * c2;
            let hom = &f.a * &dec.w[i];
            let p = dec.particular(i);
            let dp = (dec.particular(i - 1) - &p) * c0 + (dec.particular(i + 1) - &p) * c2;
            let part = &f.a * &p + &f.b;
            let r_hom = scaled_residual(dw.as_slice(), hom.as_slice());
            let r_part = scaled_residual(dp.as_slice(), part.as_slice());
            Ok((tau, r_hom, r_part))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let hom_max = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let part_max = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let outcomes = rows
        .iter()
        .map(|&(tau, rh, rp)| Outcome::Checked(rh.max(rp), WorstCase::new(&[]).tau(tau)))
        .collect();
    let mut report = reduce(WRONSKI, tol, outcomes);
    report.note = Some(format!(
        "homogeneous residual {hom_max:e}, particular residual {part_max:e}"
    ));
    Ok(report)
}

/// Weights of the second-order derivative at `t1` from values at
/// `t0 < t1 < t2`; reduces to the central difference on a uniform grid.
fn three_point_weights(t0: f64, t1: f64, t2: f64) -> [f64; 3] {
    let (h1, h2) = (t1 - t0, t2 - t1);
    [-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))]
}

/// The average `H_ε = (1/2ε)∫_{−ε}^{ε} G_β dβ` of an affine group.
#[derive(Debug, Clone, PartialEq)]
pub struct Mollifier {
    pub epsilon: f64,
    pub h: AffineMap,
    pub panels: usize,
    /// `(2ε)⁵ / (180·panels⁴)`: the composite Simpson error per unit bound
    /// on the integrand's fourth derivative.
    pub quadrature_bound: f64,
}

pub const DEFAULT_PANELS: usize = 256;

/// The affine map `G_β`, confirmed affine at a probe point.
pub fn extract_group_map<G: OneParamGroup + ?Sized>(group: &G, beta: f64) -> Result<AffineMap, LinearError> {
    let (map, residual) = probe_affine(group.dim(), |a| group.g(beta, a).map(State::into_inner))
        .map_err(|source| LinearError::Evaluation { tau: beta, source })?;
    if residual > AFFINE_PROBE_TOL {
        return Err(LinearError::NotAffine { tau: beta, residual });
    }
    Ok(map)
}

/// Composite Simpson average of `G_γ` over `γ ∈ [lo, hi]`, together with
/// the largest singular value of any sampled `G_γ`.
fn simpson_average<G: OneParamGroup + ?Sized>(
    group: &G,
    lo: f64,
    hi: f64,
    panels: usize,
) -> Result<(AffineMap, f64), LinearError> {
    let step = (hi - lo) / panels as f64;
    let maps = (0..=panels)
        .into_par_iter()
        .map(|j| {
            let gamma = if j == panels { hi } else { lo + j as f64 * step };
            extract_group_map(group, gamma)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = group.dim();
    let mut acc = AffineMap::new(DMatrix::zeros(n, n), DVector::zeros(n));
    let mut scale: f64 = 0.0;
    for (j, m) in maps.iter().enumerate() {
        if !m.a.is_empty() {
            scale = scale.max(m.a.clone().svd(false, false).singular_values.max());
        }
        let w = if j == 0 || j == panels {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc.a += &m.a * w;
        acc.b += &m.b * w;
    }
    let weight = step / 3.0 / (hi - lo);
    acc.a *= weight;
    acc.b *= weight;
    Ok((acc, scale))
}

fn check_quadrature(epsilon: f64, panels: usize) -> Result<(), LinearError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(LinearError::InvalidEpsilon(epsilon));
    }
    if panels < 2 || !panels.is_multiple_of(2) {
        return Err(LinearError::InvalidPanels(panels));
    }
    Ok(())
}

pub fn mollify<G: OneParamGroup + ?Sized>(group: &G, epsilon: f64, panels: usize) -> Result<Mollifier, LinearError> {
    check_quadrature(epsilon, panels)?;
    let (h, scale) = simpson_average(group, -epsilon, epsilon, panels)?;
    // Measured against the integrand: an average that cancels to a tiny
    // multiple of the identity is singular even though it is well conditioned.
    let (_, smallest) = singular_ratio(&h.a);
    if h.dim() > 0 && !(smallest > SINGULAR_RATIO * scale) {
        return Err(LinearError::NotInvertible {
            smallest_singular_value: smallest,
        });
    }
    Ok(Mollifier {
        epsilon,
        h,
        panels,
        quadrature_bound: (2.0 * epsilon).powi(5) / (180.0 * (panels as f64).powi(4)),
    })
}

/// `(1/2ε)∫_{α−ε}^{α+ε} G_γ ∘ H_ε⁻¹ dγ`, which recovers `G_α`.
pub fn smooth_apply<G: OneParamGroup + ?Sized>(group: &G, m: &Mollifier, alpha: f64) -> Result<AffineMap, LinearError> {
    check_quadrature(m.epsilon, m.panels)?;
    let (avg, _) = simpson_average(group, alpha - m.epsilon, alpha + m.epsilon, m.panels)?;
    Ok(avg.compose(&m.h.inverse()?))
}

/// `‖smooth_apply(G, m, α) − G_α‖` over the given parameters.
pub fn smoothing_report<G: OneParamGroup + ?Sized>(
    group: &G,
    m: &Mollifier,
    alphas: &[f64],
    tol: f64,
) -> Result<ConditionReport, LinearError> {
    let mut outcomes = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let smoothed = smooth_apply(group, m, alpha)?;
        let direct = extract_group_map(group, alpha)?;
        outcomes.push(Outcome::Checked(smoothed.sup_dist(&direct), WorstCase::new(&[]).tau(alpha)));
    }
    Ok(reduce(SMOOTHING, tol, outcomes))
}
