use flowatlas::cli::formats::{read_decomposition, read_tabulated};
use flowatlas::cli::{run_with, EXIT_FAIL, EXIT_OK, EXIT_USAGE};
use flowatlas::field::VectorField;
use serde_json::Value;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use tempfile::TempDir;

struct Outcome {
    code: i32,
    records: Vec<Value>,
}

impl Outcome {
    fn of_kind(&self, kind: &str) -> Vec<&Value> {
        self.records.iter().filter(|r| r["kind"] == kind).collect()
    }

    fn condition(&self, name: &str) -> &Value {
        self.records
            .iter()
            .find(|r| r["kind"] == "condition" && r["name"] == name)
            .unwrap_or_else(|| panic!("no {name} condition in {:?}", self.records))
    }
}

fn run(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("flowatlas").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    let text = String::from_utf8(out).unwrap();
    let records = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    Outcome { code, records }
}

fn config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path
}

fn catalog_config(dir: &TempDir, name: &str) -> PathBuf {
    config(dir, &format!("{name}.json"), &format!(r#"{{"system": {{"catalog": "{name}"}}}}"#))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn flow_evaluates_the_riccati_family() {
    let dir = TempDir::new().unwrap();
    let cfg = catalog_config(&dir, "riccati");
    let out = run(&["flow", "--config", s(&cfg), "--tau", "1", "--sigma", "0", "--a", "0.5", "--no-timestamp"]);
    assert_eq!(out.code, EXIT_OK);
    assert_eq!(out.records[0]["kind"], "run");
    let value = out.of_kind("value")[0];
    assert_eq!(value["value"], serde_json::json!([1.0]));
    assert_eq!(value["source"], "closed_form");
    assert!(value.get("timestamp").is_none());
}

#[test]
fn numeric_flow_agrees_with_the_closed_form() {
    let dir = TempDir::new().unwrap();
    let cfg = catalog_config(&dir, "riccati");
    let out = run(&["flow", "--config", s(&cfg), "--tau", "1", "--sigma", "0", "--a", "0.5", "--numeric"]);
    assert_eq!(out.code, EXIT_OK);
    let value = out.of_kind("value")[0];
    assert_eq!(value["source"], "numeric");
    assert!((value["value"][0].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert!(value["timestamp"].as_f64().is_some());
}

#[test]
fn flow_past_blow_up_is_out_of_domain() {
    let dir = TempDir::new().unwrap();
    let cfg = catalog_config(&dir, "riccati");
    let out = run(&["flow", "--config", s(&cfg), "--tau", "3", "--sigma", "0", "--a", "0.5"]);
    assert_eq!(out.code, EXIT_FAIL);
    assert_eq!(out.of_kind("error")[0]["error"], "out_of_domain");
}

#[test]
fn negative_arguments_are_accepted() {
    let dir = TempDir::new().unwrap();
    let cfg = catalog_config(&dir, "rotation");
    let out = run(&["flow", "--config", s(&cfg), "--tau", "-1.5", "--sigma", "-1.5", "--a", "-1,2"]);
    assert_eq!(out.code, EXIT_OK);
    assert_eq!(out.of_kind("value")[0]["value"], serde_json::json!([-1.0, 2.0]));
}

#[test]
fn interval_reports_blow_up() {
    let dir = TempDir::new().unwrap();
    let cfg = catalog_config(&dir, "riccati");
    let out = run(&["interval", "--config", s(&cfg), "--rho", "0", "--a", "0.5"]);
    assert_eq!(out.code, EXIT_OK);
    let j = out.of_kind("interval")[0];
    assert!((j["upper"].as_f64().unwrap() - 2.0).abs() < 1e-3, "{j}");
    assert_eq!(j["upper_kind"], "blow_up");
    assert_eq!(j["lower_kind"], "window_limit");
}

#[test]
fn configuration_errors_exit_with_usage() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("two.json", r#"{"system": {"catalog": "riccati", "field": {"n": 1, "rhs": ["x1"]}}}"#, "system"),
        ("unknown.json", r#"{"system": {"catalog": "no_such_system"}}"#, "catalog"),
        ("bad_expr.json", r#"{"system": {"field": {"n": 1, "rhs": ["x1 +"]}}}"#, "rhs"),
        ("extra.json", r#"{"system": {"catalog": "zero"}, "bogus": 1}"#, "bogus"),
        ("integrator.json", r#"{"system": {"catalog": "zero"}, "integrator": {"rel_tol": -1}}"#, "integrator"),
    ];
    for (name, body, needle) in cases {
        let cfg = config(&dir, name, body);
        let out = run(&["verify", "--config", s(&cfg)]);
        assert_eq!(out.code, EXIT_USAGE, "{name}");
        let e = out.of_kind("error")[0];
        assert_eq!(e["error"], "config", "{name}");
        assert!(e["message"].as_str().unwrap().contains(needle), "{name}: {e}");
    }
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["verify", "--config", s(&missing)]).code, EXIT_USAGE);
}

#[test]
fn malformed_arguments_exit_with_usage() {
    assert_eq!(run(&["flow", "--tau", "1"]).code, EXIT_USAGE);
    assert_eq!(run(&["frobnicate"]).code, EXIT_USAGE);
    let dir = TempDir::new().unwrap();
    let cfg = catalog_config(&dir, "rotation");
    let out = run(&["flow", "--config", s(&cfg), "--tau", "1", "--sigma", "0", "--a", "1"]);
    assert_eq!(out.code, EXIT_USAGE);
}

#[test]
fn verify_passes_for_a_sound_family_and_fails_for_a_broken_one() {
    let dir = TempDir::new().unwrap();
    let good = catalog_config(&dir, "exp_scalar");
    let out = run(&["verify", "--config", s(&good), "--seed", "3"]);
    assert_eq!(out.code, EXIT_OK);
    assert_eq!(out.of_kind("summary")[0]["pass"], true);
    for name in ["identity", "inverse", "cocycle"] {
        assert_eq!(out.condition(name)["pass"], true);
    }

    let broken = config(
        &dir,
        "broken.json",
        r#"{"system": {"family": {"n": 1, "components": ["a1 + 0.1"]}}}"#,
    );
    let out = run(&["verify", "--config", s(&broken)]);
    assert_eq!(out.code, EXIT_FAIL);
    assert_eq!(out.condition("identity")["pass"], false);
    assert_eq!(out.of_kind("summary")[0]["pass"], false);
}

#[test]
fn report_goes_to_the_out_file() {
    let dir = TempDir::new().unwrap();
    let cfg = catalog_config(&dir, "zero");
    let target = dir.path().join("report.ndjson");
    let out = run(&["verify", "--config", s(&cfg), "--out", s(&target), "--no-timestamp"]);
    assert_eq!(out.code, EXIT_OK);
    assert!(out.records.is_empty());
    let text = fs::read_to_string(&target).unwrap();
    assert!(text.lines().all(|l| l.starts_with("{\"kind\":")));
    assert!(text.lines().count() >= 3);
}

#[test]
fn reconstruct_exports_a_readable_table() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "exp.json",
        r#"{"system": {"catalog": "exp_scalar"},
            "reconstruct": {"time_axis": {"lo": -1, "hi": 1, "count": 5},
                            "state_axes": [{"lo": -2, "hi": 2, "count": 81}]}}"#,
    );
    let csv = dir.path().join("field.csv");
    let out = run(&["reconstruct", "--config", s(&cfg), "--export", s(&csv)]);
    assert_eq!(out.code, EXIT_OK);
    assert_eq!(out.condition("reconstruction")["pass"], true);
    assert_eq!(out.condition("roundtrip")["pass"], true);
    assert_eq!(out.of_kind("export").len(), 1);

    let table = read_tabulated(BufReader::new(File::open(&csv).unwrap())).unwrap();
    assert_eq!(table.site_count(), 5 * 81);
    let f = table.eval(0.3, &[0.7]).unwrap();
    assert!((f[0] - 0.7).abs() < 1e-8, "{f:?}");
}

#[test]
fn decompose_exports_and_checks_the_wronskian() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "affine.json",
        r#"{"system": {"catalog": "affine_scalar"}, "decompose": {"lo": -1, "hi": 1, "step": 0.01}}"#,
    );
    let csv = dir.path().join("dec.csv");
    let out = run(&["decompose", "--config", s(&cfg), "--tau0", "0", "--export", s(&csv)]);
    assert_eq!(out.code, EXIT_OK, "{:?}", out.records);
    assert_eq!(out.condition("affinity")["pass"], true);
    assert_eq!(out.condition("wronski")["pass"], true);

    let dec = read_decomposition(BufReader::new(File::open(&csv).unwrap())).unwrap();
    assert_eq!(dec.tau0, 0.0);
    let w = dec.at(0.5).unwrap().0[(0, 0)];
    assert!((w - 0.5f64.exp()).abs() < 1e-3, "{w}");
}

#[test]
fn decompose_rejects_a_nonlinear_family() {
    let dir = TempDir::new().unwrap();
    let cfg = catalog_config(&dir, "riccati");
    let out = run(&["decompose", "--config", s(&cfg)]);
    assert_eq!(out.code, EXIT_FAIL);
    assert_eq!(out.condition("affinity")["pass"], false);
}

#[test]
fn autonomous_and_mollify_commands() {
    let dir = TempDir::new().unwrap();
    let rot = catalog_config(&dir, "rotation");
    let out = run(&["autonomous", "--config", s(&rot)]);
    assert_eq!(out.code, EXIT_OK);
    assert_eq!(out.condition("autonomy")["pass"], true);
    assert_eq!(out.condition("group_law")["pass"], true);

    let out = run(&["mollify", "--config", s(&rot), "--epsilon", "0.25"]);
    assert_eq!(out.code, EXIT_OK);
    assert_eq!(out.condition("smoothing")["pass"], true);
    let m = out.of_kind("mollifier")[0];
    assert_eq!(m["panels"], 256);

    let out = run(&["mollify", "--config", s(&rot), "--epsilon", "3.141592653589793"]);
    assert_eq!(out.code, EXIT_FAIL);
    assert_eq!(out.of_kind("error")[0]["error"], "not_invertible");

    let shear = catalog_config(&dir, "shear");
    let out = run(&["autonomous", "--config", s(&shear)]);
    assert_eq!(out.code, EXIT_FAIL);
    assert_eq!(out.condition("autonomy")["pass"], false);
    let out = run(&["mollify", "--config", s(&shear)]);
    assert_eq!(out.code, EXIT_FAIL);
    assert_eq!(out.of_kind("error")[0]["error"], "not_autonomous");
}
