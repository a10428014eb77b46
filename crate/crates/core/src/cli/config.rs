//! JSON run configuration: which system to study and the parameters each
//! command needs.

use super::catalog;
use crate::field::{DomainSpec, ExprField};
use crate::flow::ExprFamily;
use crate::expr;
use crate::integrate::IntegratorConfig;
use crate::reconstruct::Axis;
use crate::state::State;
use crate::verify::SamplePlan;
use serde::Deserialize;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub path: String,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}: {}", self.path, self.message)
        } else {
            write!(f, "{}: {}: {}", self.path, self.field, self.message)
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: RawSystem,
    #[serde(default)]
    integrator: IntegratorConfig,
    #[serde(default)]
    plan: Option<SamplePlan>,
    #[serde(default)]
    tolerances: ToleranceOverrides,
    #[serde(default)]
    reconstruct: ReconstructParams,
    #[serde(default)]
    decompose: DecomposeParams,
    #[serde(default)]
    mollify: MollifyParams,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    catalog: Option<String>,
    field: Option<RawField>,
    family: Option<RawFamily>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    n: usize,
    rhs: Vec<String>,
    #[serde(default)]
    domain: RawDomain,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    time: Option<(f64, f64)>,
    predicate: Option<String>,
    blowup_radius: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFamily {
    n: usize,
    components: Vec<String>,
    domain_predicate: Option<String>,
}

/// Per-check tolerance overrides; unset entries fall back to each
/// command's defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub identity: Option<f64>,
    pub inverse: Option<f64>,
    pub cocycle: Option<f64>,
    pub openness_delta: Option<f64>,
    pub autonomy: Option<f64>,
    pub group_law: Option<f64>,
    pub affinity: Option<f64>,
    pub wronski: Option<f64>,
    pub reconstruction: Option<f64>,
    pub roundtrip: Option<f64>,
    pub smoothing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructParams {
    pub h: Option<f64>,
    pub richardson: Option<bool>,
    pub time_axis: Option<Axis>,
    pub state_axes: Option<Vec<Axis>>,
    pub smoothness_bound: Option<f64>,
    #[serde(default = "yes")]
    pub roundtrip: bool,
}

fn yes() -> bool {
    true
}

impl Default for ReconstructParams {
    fn default() -> Self {
        ReconstructParams {
            h: None,
            richardson: None,
            time_axis: None,
            state_axes: None,
            smoothness_bound: None,
            roundtrip: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeParams {
    pub tau0: Option<f64>,
    /// Explicit grid times; otherwise `lo..=hi` in steps of `step`.
    pub times: Option<Vec<f64>>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub step: Option<f64>,
    pub enforce_span: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifyParams {
    pub epsilon: Option<f64>,
    pub panels: Option<usize>,
    pub alphas: Option<Vec<f64>>,
}

/// A validated run configuration.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub name: Option<String>,
    pub n: usize,
    pub field: Option<ExprField>,
    pub family: Option<ExprFamily>,
    pub integrator: IntegratorConfig,
    pub plan: SamplePlan,
    pub tolerances: ToleranceOverrides,
    pub reconstruct: ReconstructParams,
    pub decompose: DecomposeParams,
    pub mollify: MollifyParams,
}

pub fn load_config(path: &Path) -> Result<RunSpec, ConfigError> {
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        path: label.clone(),
        field: String::new(),
        message: e.to_string(),
    })?;
    parse_config(&text, &label)
}

/// Parses config text; `label` names the source in errors.
pub fn parse_config(text: &str, label: &str) -> Result<RunSpec, ConfigError> {
    let err = |field: &str, message: String| ConfigError {
        path: label.to_owned(),
        field: field.to_owned(),
        message,
    };
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| err("", e.to_string()))?;
    raw.integrator
        .validate()
        .map_err(|e| err("integrator", e.to_string()))?;

    let RawSystem { catalog, field, family } = raw.system;
    let sources = catalog.is_some() as usize + field.is_some() as usize + family.is_some() as usize;
    if sources != 1 {
        return Err(err("system", "exactly one system source".into()));
    }

    let (name, n, field, family) = if let Some(name) = catalog {
        let entry = catalog::lookup(&name).ok_or_else(|| {
            let known: Vec<&str> = catalog::names().collect();
            err("system.catalog", format!("unknown system `{name}` (known: {})", known.join(", ")))
        })?;
        let field = ExprField::parse(entry.rhs).map_err(|e| err("system.catalog", e.to_string()))?;
        let family = ExprFamily::parse(entry.family, entry.family_domain)
            .map_err(|e| err("system.catalog", e.to_string()))?;
        (Some(name), entry.n, Some(field), Some(family))
    } else if let Some(f) = field {
        (None, f.n, Some(build_field(f, &err)?), None)
    } else if let Some(f) = family {
        let comps: Vec<&str> = f.components.iter().map(String::as_str).collect();
        if comps.len() != f.n {
            return Err(err(
                "system.family.components",
                format!("{} components for n = {}", comps.len(), f.n),
            ));
        }
        let family = ExprFamily::parse(&comps, f.domain_predicate.as_deref())
            .map_err(|e| err("system.family", e.to_string()))?;
        (None, f.n, None, Some(family))
    } else {
        unreachable!("source count checked above")
    };

    let plan = match raw.plan {
        Some(mut plan) => {
            if plan.time_grid.is_empty() || plan.state_grid.is_empty() {
                return Err(err("plan", "time_grid and state_grid must be nonempty".into()));
            }
            if let Some(s) = plan.state_grid.iter().find(|s| s.dim() != n) {
                return Err(err("plan.state_grid", format!("state of dimension {} for n = {n}", s.dim())));
            }
            plan.normalize();
            plan
        }
        None => SamplePlan::standard(n),
    };

    let axes = raw.reconstruct.time_axis.iter().chain(raw.reconstruct.state_axes.iter().flatten());
    if axes.into_iter().any(|a| !(a.lo < a.hi && a.count >= 2)) {
        return Err(err("reconstruct", "axes need lo < hi and count >= 2".into()));
    }
    if raw.reconstruct.state_axes.as_ref().is_some_and(|a| a.len() != n) {
        return Err(err("reconstruct.state_axes", format!("need one axis per state component (n = {n})")));
    }

    Ok(RunSpec {
        name,
        n,
        field,
        family,
        integrator: raw.integrator,
        plan,
        tolerances: raw.tolerances,
        reconstruct: raw.reconstruct,
        decompose: raw.decompose,
        mollify: raw.mollify,
    })
}

fn build_field(f: RawField, err: &dyn Fn(&str, String) -> ConfigError) -> Result<ExprField, ConfigError> {
    if f.rhs.len() != f.n {
        return Err(err("system.field.rhs", format!("{} components for n = {}", f.rhs.len(), f.n)));
    }
    let mut rhs = Vec::with_capacity(f.n);
    for (i, src) in f.rhs.iter().enumerate() {
        let at = format!("system.field.rhs[{i}]");
        let e = expr::parse(src).map_err(|e| err(&at, e.to_string()))?;
        expr::validate(&e, f.n).map_err(|e| err(&at, e.to_string()))?;
        rhs.push(e);
    }
    let mut domain = DomainSpec::full(f.n);
    if let Some((lo, hi)) = f.domain.time {
        if !(lo < hi) {
            return Err(err("system.field.domain.time", "need lo < hi".into()));
        }
        domain = domain.with_time_box(lo, hi);
    }
    if let Some(src) = &f.domain.predicate {
        let at = "system.field.domain.predicate";
        let e = expr::parse(src).map_err(|e| err(at, e.to_string()))?;
        expr::validate(&e, f.n).map_err(|e| err(at, e.to_string()))?;
        domain = domain.with_predicate(e);
    }
    if let Some(r) = f.domain.blowup_radius {
        domain.blowup_radius = r;
    }
    ExprField::new(domain, rhs).map_err(|e| err("system.field", e.to_string()))
}

impl RunSpec {
    /// The field's open time interval, if it has one.
    pub fn time_box(&self) -> (f64, f64) {
        self.field
            .as_ref()
            .map_or((f64::NEG_INFINITY, f64::INFINITY), |f| f.domain.time_box)
    }

    pub fn plan_with_seed(&self, seed: Option<u64>) -> SamplePlan {
        let mut plan = self.plan.clone();
        if let Some(s) = seed {
            plan.seed = s;
        }
        plan
    }

    /// Default tabulation box: the plan's time range padded by 0.5 in
    /// steps of 0.25, and its state box padded by 2 on each side.
    pub fn default_axes(&self) -> (Axis, Vec<Axis>) {
        let (tlo, thi) = range(self.plan.time_grid.iter().copied());
        let (tlo, thi) = (tlo - 0.5, thi + 0.5);
        let tcount = ((thi - tlo) / 0.25).round() as usize + 1;
        let per_axis = match self.n {
            1 => 6001,
            2 => 401,
            _ => 41,
        };
        let state_axes = (0..self.n)
            .map(|k| {
                let (lo, hi) = range(self.plan.state_grid.iter().map(|s: &State| s[k]));
                Axis::new(lo - 2.0, hi + 2.0, per_axis)
            })
            .collect();
        (Axis::new(tlo, thi, tcount.max(2)), state_axes)
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowFamily;

    #[test]
    fn catalog_riccati() {
        let spec = parse_config(r#"{"system": {"catalog": "riccati"}}"#, "mem").unwrap();
        assert_eq!(spec.n, 1);
        assert_eq!(crate::expr::pretty_print(&spec.field.as_ref().unwrap().rhs[0]), "(x1 ^ 2)");
        let fam = spec.family.unwrap();
        assert_eq!(fam.evaluate(1.0, 0.0, &[0.5]).unwrap()[0], 1.0);
        assert_eq!(spec.plan, SamplePlan::standard(1));
    }

    #[test]
    fn two_sources_rejected() {
        let text = r#"{"system": {"catalog": "riccati", "field": {"n": 1, "rhs": ["x1"]}}}"#;
        let e = parse_config(text, "mem").unwrap_err();
        assert_eq!(e.message, "exactly one system source");
        assert_eq!(e.field, "system");
        let e = parse_config(r#"{"system": {}}"#, "mem").unwrap_err();
        assert_eq!(e.message, "exactly one system source");
    }

    #[test]
    fn invalid_field_variable() {
        let e = parse_config(r#"{"system": {"field": {"n": 1, "rhs": ["x2"]}}}"#, "cfg.json").unwrap_err();
        assert_eq!(e.field, "system.field.rhs[0]");
        assert!(e.message.contains("x2"), "{e}");
        assert!(e.to_string().starts_with("cfg.json: "));
    }

    #[test]
    fn parse_errors_carry_offsets() {
        let e = parse_config(r#"{"system": {"field": {"n": 1, "rhs": ["x1 +"]}}}"#, "mem").unwrap_err();
        assert!(e.message.contains("byte 4"), "{e}");
    }

    #[test]
    fn field_with_domain_and_plan() {
        let text = r#"{
            "system": {"field": {"n": 1, "rhs": ["x1^2"], "domain": {"time": [-2, 3], "predicate": "2 - x1"}}},
            "integrator": {"rel_tol": 1e-9},
            "plan": {"time_grid": [1, 0], "state_grid": [[0.5]], "seed": 4}
        }"#;
        let spec = parse_config(text, "mem").unwrap();
        let f = spec.field.unwrap();
        assert_eq!(f.domain.time_box, (-2.0, 3.0));
        assert!(!crate::field::VectorField::contains(&f, 0.0, &[2.5]));
        assert_eq!(spec.integrator.rel_tol, 1e-9);
        assert_eq!(spec.integrator.abs_tol, 1e-12);
        assert_eq!(spec.plan.time_grid, vec![0.0, 1.0]);
        assert_eq!(spec.plan.seed, 4);
    }

    #[test]
    fn unknown_keys_and_catalog_names() {
        assert!(parse_config(r#"{"system": {"catalog": "riccati"}, "extra": 1}"#, "mem").is_err());
        let e = parse_config(r#"{"system": {"catalog": "lorenz"}}"#, "mem").unwrap_err();
        assert!(e.message.contains("unknown system"));
        let e = parse_config(
            r#"{"system": {"catalog": "rotation"}, "plan": {"time_grid": [0], "state_grid": [[1]]}}"#,
            "mem",
        )
        .unwrap_err();
        assert_eq!(e.field, "plan.state_grid");
    }

    #[test]
    fn family_source() {
        let text = r#"{"system": {"family": {"n": 1, "components": ["a1 + tau - sigma"]}}}"#;
        let spec = parse_config(text, "mem").unwrap();
        assert!(spec.field.is_none());
        assert_eq!(spec.family.unwrap().evaluate(2.0, 0.5, &[1.0]).unwrap()[0], 2.5);
        let bad = r#"{"system": {"family": {"n": 1, "components": ["x1"]}}}"#;
        assert!(parse_config(bad, "mem").is_err());
    }
}
