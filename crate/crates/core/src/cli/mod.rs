//! The `flowatlas` command line: one subcommand per capability, reports as
//! NDJSON on stdout (or `--out`).
//!
//! Exit codes: 0 on success, 1 when a condition fails or a point query
//! leaves the domain, 2 on usage or configuration errors.

pub mod catalog;
pub mod config;
pub mod formats;
pub mod report;

use crate::autonomous::{self, FamilyGroup};
use crate::field::{ExprField, VectorField};
use crate::flow::{FamilyKind, FlowFamily};
use crate::integrate::{self, numeric_family};
use crate::linear::{self, LinearError};
use crate::reconstruct::{self, ReconstructionConfig};
use crate::verify::{self, ConditionReport, SuiteTolerances};
use clap::{Args, Parser, Subcommand};
use config::{load_config, RunSpec};
use report::Reporter;
use serde_json::json;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "flowatlas", version, about = "Flow families of ODEs: evaluate, verify, reconstruct")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Write the NDJSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the sampling seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Omit timestamps so repeated runs are byte-identical.
    #[arg(long)]
    pub no_timestamp: bool,
    /// Use the integrated flow of the field even when a closed form exists.
    #[arg(long)]
    pub numeric: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate F_{tau,sigma}(a).
    Flow {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        tau: f64,
        #[arg(long, allow_hyphen_values = true)]
        sigma: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        a: Vec<f64>,
    },
    /// Escape interval J(rho, a) of the solution through (rho, a).
    Interval {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        rho: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        a: Vec<f64>,
    },
    /// Run the flow-family condition suite.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Recover the vector field from the family and optionally export it.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Write the tabulated field as CSV.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Test time-translation invariance and the group law.
    Autonomous {
        #[command(flatten)]
        common: Common,
    },
    /// Sincov decomposition of an affine family.
    Decompose {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        tau0: Option<f64>,
        /// Write the decomposition as CSV.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Average an affine group over [-epsilon, epsilon] and check smoothing.
    Mollify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        panels: Option<usize>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Flow { common, .. }
            | Command::Interval { common, .. }
            | Command::Verify { common }
            | Command::Reconstruct { common, .. }
            | Command::Autonomous { common }
            | Command::Decompose { common, .. }
            | Command::Mollify { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Flow { .. } => "flow",
            Command::Interval { .. } => "interval",
            Command::Verify { .. } => "verify",
            Command::Reconstruct { .. } => "reconstruct",
            Command::Autonomous { .. } => "autonomous",
            Command::Decompose { .. } => "decompose",
            Command::Mollify { .. } => "mollify",
        }
    }
}

/// A command that stopped early: an error code for the report and an
/// exit status.
struct Stop {
    code: &'static str,
    message: String,
    exit: i32,
}

impl Stop {
    fn usage(message: impl Into<String>) -> Self {
        Stop {
            code: "usage",
            message: message.into(),
            exit: EXIT_USAGE,
        }
    }

    fn fail(code: &'static str, message: impl ToString) -> Self {
        Stop {
            code,
            message: message.to_string(),
            exit: EXIT_FAIL,
        }
    }
}

impl From<io::Error> for Stop {
    fn from(e: io::Error) -> Self {
        Stop {
            code: "io",
            message: e.to_string(),
            exit: EXIT_USAGE,
        }
    }
}

impl From<LinearError> for Stop {
    fn from(e: LinearError) -> Self {
        let code = match e {
            LinearError::NotAffine { .. } => "not_affine",
            LinearError::NotAffineField { .. } => "not_affine_field",
            LinearError::SingularWronskian { .. } => "singular_wronskian",
            LinearError::NotInvertible { .. } => "not_invertible",
            LinearError::Evaluation { .. } => "out_of_domain",
            LinearError::InvalidPanels(_) | LinearError::InvalidEpsilon(_) | LinearError::EmptyGrid => {
                return Stop::usage(e.to_string())
            }
        };
        Stop::fail(code, e)
    }
}

/// Runs the command line with reports on stdout.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            let _ = write!(stderr, "{e}");
            let first = e.to_string().lines().next().unwrap_or_default().to_owned();
            let _ = Reporter::new(stdout, false).error("usage", first);
            return EXIT_USAGE;
        }
    };
    let common = cli.command.common().clone();
    let mut file;
    let out: &mut dyn Write = match &common.out {
        Some(path) => match File::create(path) {
            Ok(f) => {
                file = BufWriter::new(f);
                &mut file
            }
            Err(e) => {
                let _ = writeln!(stderr, "cannot create {}: {e}", path.display());
                let _ = Reporter::new(stdout, false).error("io", e);
                return EXIT_USAGE;
            }
        },
        None => stdout,
    };
    let mut rep = Reporter::new(out, !common.no_timestamp);
    let status = match load_config(&common.config) {
        Err(e) => Err(Stop {
            code: "config",
            message: e.to_string(),
            exit: EXIT_USAGE,
        }),
        Ok(spec) => dispatch(&cli.command, &spec, &mut rep),
    };
    let code = match status {
        Ok(()) if rep.failed() => EXIT_FAIL,
        Ok(()) => EXIT_OK,
        Err(stop) => {
            let _ = writeln!(stderr, "{}: {}", cli.command.name(), stop.message);
            if rep.error(stop.code, &stop.message).is_err() {
                return EXIT_USAGE;
            }
            stop.exit
        }
    };
    if rep.flush().is_err() {
        return EXIT_USAGE;
    }
    code
}

fn dispatch(cmd: &Command, spec: &RunSpec, rep: &mut Reporter) -> Result<(), Stop> {
    let common = cmd.common();
    rep.emit(
        "run",
        json!({
            "command": cmd.name(),
            "system": spec.name,
            "n": spec.n,
            "seed": common.seed.unwrap_or(spec.plan.seed),
        }),
    )?;
    match cmd {
        Command::Flow { tau, sigma, a, .. } => flow(spec, common, *tau, *sigma, a, rep),
        Command::Interval { rho, a, .. } => interval(spec, *rho, a, rep),
        Command::Verify { .. } => verify_cmd(spec, common, rep),
        Command::Reconstruct { export, .. } => reconstruct_cmd(spec, common, export.as_ref(), rep),
        Command::Autonomous { .. } => autonomous_cmd(spec, common, rep),
        Command::Decompose { tau0, export, .. } => decompose_cmd(spec, common, *tau0, export.as_ref(), rep),
        Command::Mollify { epsilon, panels, .. } => mollify_cmd(spec, common, *epsilon, *panels, rep),
    }
}

fn require_field(spec: &RunSpec) -> Result<&ExprField, Stop> {
    spec.field
        .as_ref()
        .ok_or_else(|| Stop::usage("this command needs a vector field (system.field or system.catalog)"))
}

/// The closed form when there is one and `--numeric` is off, otherwise
/// the integrated flow of the field.
fn family<'a>(spec: &'a RunSpec, common: &Common) -> Result<Box<dyn FlowFamily + 'a>, Stop> {
    match (&spec.family, common.numeric) {
        (Some(f), false) => Ok(Box::new(f.clone())),
        _ => {
            let field = require_field(spec)?;
            Ok(Box::new(numeric_family(field, spec.integrator)))
        }
    }
}

fn check_point(spec: &RunSpec, a: &[f64]) -> Result<(), Stop> {
    if a.len() == spec.n {
        Ok(())
    } else {
        Err(Stop::usage(format!("--a has {} components, the system has n = {}", a.len(), spec.n)))
    }
}

fn condition(rep: &mut Reporter, c: &ConditionReport) -> Result<(), Stop> {
    rep.condition(c).map_err(Stop::from)
}

fn summary(rep: &mut Reporter, command: &str, extra: serde_json::Value) -> Result<(), Stop> {
    let mut fields = json!({ "command": command, "pass": !rep.failed() });
    if let (Some(f), serde_json::Value::Object(extra)) = (fields.as_object_mut(), extra) {
        f.extend(extra);
    }
    rep.emit("summary", fields).map_err(Stop::from)
}

fn flow(spec: &RunSpec, common: &Common, tau: f64, sigma: f64, a: &[f64], rep: &mut Reporter) -> Result<(), Stop> {
    check_point(spec, a)?;
    let (value, source) = match (&spec.family, common.numeric) {
        (Some(f), false) => (
            f.evaluate(tau, sigma, a)
                .map_err(|v| Stop::fail(v.kind(), format!("(tau = {tau}, sigma = {sigma}) is outside the family's domain")))?,
            "closed_form",
        ),
        _ => {
            let field = require_field(spec)?;
            let x = integrate::advance(field, sigma, a, tau, &spec.integrator)
                .map_err(|ev| Stop::fail("out_of_domain", format!("{} at t = {}", ev.kind, ev.time)))?;
            (x, "numeric")
        }
    };
    rep.emit(
        "value",
        json!({ "tau": tau, "sigma": sigma, "a": a, "value": value, "source": source }),
    )?;
    Ok(())
}

fn interval(spec: &RunSpec, rho: f64, a: &[f64], rep: &mut Reporter) -> Result<(), Stop> {
    check_point(spec, a)?;
    let field = require_field(spec)?;
    let j = integrate::escape_interval(field, rho, a, &spec.integrator).map_err(|e| Stop::fail("out_of_domain", e))?;
    rep.emit(
        "interval",
        json!({
            "rho": rho,
            "a": a,
            "lower": j.lower,
            "upper": j.upper,
            "lower_kind": j.lower_kind,
            "upper_kind": j.upper_kind,
        }),
    )?;
    Ok(())
}

fn verify_cmd(spec: &RunSpec, common: &Common, rep: &mut Reporter) -> Result<(), Stop> {
    let fam = family(spec, common)?;
    let plan = spec.plan_with_seed(common.seed);
    let o = &spec.tolerances;
    let base = SuiteTolerances::for_kind(fam.kind());
    let tol = SuiteTolerances {
        identity: o.identity.unwrap_or(base.identity),
        inverse: o.inverse.unwrap_or(base.inverse),
        cocycle: o.cocycle.unwrap_or(base.cocycle),
        openness_delta: o.openness_delta.unwrap_or(base.openness_delta),
    };
    let report = verify::run_suite(&*fam, &plan, &tol);
    for c in &report.conditions {
        condition(rep, c)?;
    }
    summary(rep, "verify", json!({ "family": fam.kind() }))
}

fn reconstruct_cmd(spec: &RunSpec, common: &Common, export: Option<&PathBuf>, rep: &mut Reporter) -> Result<(), Stop> {
    let fam = family(spec, common)?;
    let params = &spec.reconstruct;
    let (time_axis, state_axes) = spec.default_axes();
    let mut cfg = ReconstructionConfig::new(
        params.time_axis.unwrap_or(time_axis),
        params.state_axes.clone().unwrap_or(state_axes),
    );
    cfg.h = params.h.unwrap_or(cfg.h);
    cfg.richardson = params.richardson.unwrap_or(cfg.richardson);
    cfg.smoothness_bound = params.smoothness_bound;
    let tab = reconstruct::field_from_family(&*fam, &cfg).map_err(|e| match e {
        reconstruct::ReconstructError::GridDimension { .. } => Stop::usage(e.to_string()),
        _ => Stop::fail("reconstruction_failed", e),
    })?;
    rep.emit(
        "tabulation",
        json!({
            "sites": tab.site_count(),
            "skipped": tab.skipped_sites(),
            "h": cfg.h,
            "richardson": cfg.richardson,
            "time_axis": cfg.time_axis,
            "state_axes": cfg.state_axes,
        }),
    )?;
    if let Some(path) = export {
        let mut w = BufWriter::new(File::create(path)?);
        formats::write_tabulated(&tab, &mut w)?;
        w.flush()?;
        rep.emit("export", json!({ "path": path.display().to_string(), "format": "tabulated-field" }))?;
    }
    if let Some(reference) = &spec.field {
        let tol = spec.tolerances.reconstruction.unwrap_or(1e-6);
        let dev = tab.max_deviation(reference);
        let valid = tab.site_count() - tab.skipped_sites();
        condition(rep, &scalar_report("reconstruction", dev, tol, valid, tab.skipped_sites()))?;
        if params.roundtrip {
            let plan = spec.plan_with_seed(common.seed);
            let tol = spec.tolerances.roundtrip.unwrap_or(1e-5);
            match reconstruct::roundtrip_with_field(&*fam, &tab, &spec.integrator, &plan, |_, _, _| true) {
                Ok(err) => condition(rep, &scalar_report("roundtrip", err, tol, 1, 0))?,
                Err(e) => return Err(Stop::fail("roundtrip_escaped", e)),
            }
        }
    }
    summary(rep, "reconstruct", json!({}))
}

fn scalar_report(name: &str, residual: f64, tol: f64, checked: usize, skipped: usize) -> ConditionReport {
    ConditionReport {
        condition_name: name.to_owned(),
        samples_checked: checked,
        samples_skipped: skipped,
        max_residual: residual,
        tolerance: tol,
        worst_case: None,
        pass: residual <= tol,
        note: None,
    }
}

/// Base point for `G_α = F_{base+α, base}`: 0 when the field's time
/// interval contains it, otherwise a point inside that interval.
fn group_base(spec: &RunSpec) -> f64 {
    let (lo, hi) = spec.time_box();
    if lo < 0.0 && 0.0 < hi {
        0.0
    } else if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo + 1.0
    } else {
        hi - 1.0
    }
}

/// Default tolerance by family kind: numeric families carry integration
/// error on both sides of every comparison.
fn tol_for(fam: &dyn FlowFamily, closed: f64, numeric: f64) -> f64 {
    if fam.kind() == FamilyKind::Numeric {
        numeric
    } else {
        closed
    }
}

/// Checks autonomy and, when it holds, returns the reduced group.
fn autonomy<'a>(
    spec: &RunSpec,
    common: &Common,
    fam: &'a dyn FlowFamily,
    rep: &mut Reporter,
) -> Result<Option<FamilyGroup<&'a dyn FlowFamily>>, Stop> {
    let plan = spec.plan_with_seed(common.seed);
    let tol = spec.tolerances.autonomy.unwrap_or_else(|| {
        tol_for(fam, autonomous::CLOSED_FORM_TOL, 50.0 * spec.integrator.tolerance_scale())
    });
    let base = group_base(spec);
    if base != 0.0 {
        rep.emit("shift", json!({ "base": base }))?;
    }
    let report = autonomous::autonomy_report(fam, &plan, tol);
    condition(rep, &report)?;
    Ok(report.pass.then(|| FamilyGroup::assume(fam).with_base(base)))
}

fn autonomous_cmd(spec: &RunSpec, common: &Common, rep: &mut Reporter) -> Result<(), Stop> {
    let fam = family(spec, common)?;
    let group = autonomy(spec, common, &*fam, rep)?;
    if let Some(g) = &group {
        let plan = spec.plan_with_seed(common.seed);
        let tol = spec
            .tolerances
            .group_law
            .unwrap_or_else(|| tol_for(&*fam, 1e-9, 1e-7));
        condition(rep, &autonomous::check_group_law(g, &plan, tol))?;
    }
    summary(rep, "autonomous", json!({ "autonomous": group.is_some() }))
}

fn decompose_cmd(
    spec: &RunSpec,
    common: &Common,
    tau0: Option<f64>,
    export: Option<&PathBuf>,
    rep: &mut Reporter,
) -> Result<(), Stop> {
    let fam = family(spec, common)?;
    let plan = spec.plan_with_seed(common.seed);
    let tol = spec
        .tolerances
        .affinity
        .unwrap_or_else(|| tol_for(&*fam, 1e-9, 1e-7));
    let affinity = linear::affinity_report(&*fam, &plan, tol);
    condition(rep, &affinity)?;
    if !affinity.pass {
        return summary(rep, "decompose", json!({ "affine": false }));
    }
    let p = &spec.decompose;
    let tau0 = tau0.or(p.tau0).unwrap_or(0.0);
    let times = match &p.times {
        Some(t) => t.clone(),
        None => {
            let lo = p.lo.unwrap_or(plan.time_grid[0]);
            let hi = p.hi.unwrap_or(plan.time_grid[plan.time_grid.len() - 1]);
            let step = p.step.unwrap_or(1e-2);
            if !(step > 0.0 && lo <= hi) {
                return Err(Stop::usage("decompose grid needs lo <= hi and step > 0"));
            }
            let count = ((hi - lo) / step).round() as usize;
            (0..=count).map(|i| lo + i as f64 * step).collect()
        }
    };
    let mut dec = linear::sincov_decompose(&*fam, tau0, &times)?;
    dec.enforce_span = p.enforce_span.unwrap_or(true);
    rep.emit(
        "decomposition",
        json!({
            "tau0": dec.tau0,
            "grid_points": dec.grid.len(),
            "span": [dec.grid[0], dec.grid[dec.grid.len() - 1]],
            "enforce_span": dec.enforce_span,
        }),
    )?;
    if let Some(path) = export {
        let mut w = BufWriter::new(File::create(path)?);
        formats::write_decomposition(&dec, &mut w)?;
        w.flush()?;
        rep.emit("export", json!({ "path": path.display().to_string(), "format": "sincov-decomposition" }))?;
    }
    if let Some(field) = &spec.field {
        if dec.grid.len() >= 3 && field.dim() == dec.dim() {
            let tol = spec.tolerances.wronski.unwrap_or(1e-3);
            condition(rep, &linear::wronski_consistency(&dec, field, tol)?)?;
        }
    }
    summary(rep, "decompose", json!({ "affine": true }))
}

fn mollify_cmd(
    spec: &RunSpec,
    common: &Common,
    epsilon: Option<f64>,
    panels: Option<usize>,
    rep: &mut Reporter,
) -> Result<(), Stop> {
    let fam = family(spec, common)?;
    let Some(group) = autonomy(spec, common, &*fam, rep)? else {
        return Err(Stop::fail("not_autonomous", "the family is not autonomous, so it has no one-parameter group"));
    };
    let p = &spec.mollify;
    let epsilon = epsilon.or(p.epsilon).unwrap_or(0.25);
    let panels = panels.or(p.panels).unwrap_or(linear::DEFAULT_PANELS);
    let m = linear::mollify(&group, epsilon, panels)?;
    rep.emit(
        "mollifier",
        json!({
            "epsilon": m.epsilon,
            "panels": m.panels,
            "matrix": m.h.matrix_rows(),
            "offset": m.h.b.as_slice(),
            "quadrature_bound": m.quadrature_bound,
            "distance_to_identity": m.h.sup_dist(&linear::AffineMap::identity(m.h.dim())),
        }),
    )?;
    let alphas = p.alphas.clone().unwrap_or_else(|| vec![-1.0, -0.3, 0.0, 0.3, 1.0]);
    let tol = spec.tolerances.smoothing.unwrap_or(1e-8);
    condition(rep, &linear::smoothing_report(&group, &m, &alphas, tol)?)?;
    summary(rep, "mollify", json!({}))
}
