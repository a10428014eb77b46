use serde::{Deserialize, Serialize};
use std::ops::Deref;

/// A point of phase space, `a ∈ ℝⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(Vec<f64>);

impl State {
    pub fn new(components: Vec<f64>) -> Self {
        State(components)
    }

    pub fn scalar(v: f64) -> Self {
        State(vec![v])
    }

    pub fn zeros(n: usize) -> Self {
        State(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl Deref for State {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for State {
    fn from(v: Vec<f64>) -> Self {
        State(v)
    }
}

impl From<&[f64]> for State {
    fn from(v: &[f64]) -> Self {
        State(v.to_vec())
    }
}

pub fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn sup_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

/// Componentwise `|x - r| / max(1, |r|)`, maximized over components.
///
/// This is the residual every verification check reports. It is absolute
/// for O(1) data and relative for large values, so comparing it against a
/// single `tol` is the mixed rule `|e| ≤ atol + rtol·|r|` with
/// `atol = rtol = tol` (up to a factor of two).
pub fn scaled_residual(x: &[f64], reference: &[f64]) -> f64 {
    x.iter()
        .zip(reference)
        .fold(0.0, |m, (v, r)| m.max((v - r).abs() / r.abs().max(1.0)))
}

/// The mixed absolute/relative comparison rule, applied in the ∞-norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            atol: 1e-9,
            rtol: 1e-9,
        }
    }
}

impl Tolerance {
    pub fn new(atol: f64, rtol: f64) -> Self {
        Tolerance { atol, rtol }
    }

    /// `|x_i - r_i| ≤ atol + rtol·|r_i|` for every component.
    pub fn accepts(&self, x: &[f64], reference: &[f64]) -> bool {
        x.len() == reference.len()
            && x
                .iter()
                .zip(reference)
                .all(|(v, r)| (v - r).abs() <= self.atol + self.rtol * r.abs())
    }
}
