//! Randomized invariants: parser round trip, numeric cocycle accuracy, the
//! flow solving its own field, and agreement between each catalog entry's
//! closed form and its integrated field.

use flowatlas::cli::catalog::CATALOG;
use flowatlas::cli::config::parse_config;
use flowatlas::expr::{parse, pretty_print, BinOp, Expression, Func, Var};
use flowatlas::field::{ExprField, VectorField};
use flowatlas::flow::FlowFamily;
use flowatlas::integrate::{numeric_family, IntegratorConfig};
use flowatlas::state::scaled_residual;
use flowatlas::verify::SamplePlan;
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expression> {
    prop_oneof![
        (0u32..1000).prop_map(|k| Expression::Literal(k as f64)),
        (0.0f64..1e3).prop_map(Expression::Literal),
        (1e-9f64..1e-3).prop_map(Expression::Literal),
        Just(Expression::Variable(Var::Time)),
        (0usize..3).prop_map(|k| Expression::Variable(Var::State(k))),
        Just(Expression::Variable(Var::Tau)),
        Just(Expression::Variable(Var::Sigma)),
        (0usize..3).prop_map(|k| Expression::Variable(Var::Init(k))),
    ]
}

fn expression() -> impl Strategy<Value = Expression> {
    leaf().prop_recursive(5, 48, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Expression::neg),
            (0usize..Func::ALL.len(), inner.clone()).prop_map(|(k, e)| Expression::call(Func::ALL[k], e)),
            (
                prop_oneof![
                    Just(BinOp::Add),
                    Just(BinOp::Sub),
                    Just(BinOp::Mul),
                    Just(BinOp::Div),
                    Just(BinOp::Pow)
                ],
                inner.clone(),
                inner
            )
                .prop_map(|(op, l, r)| Expression::binary(op, l, r)),
        ]
    })
}

proptest! {
    #[test]
    fn printed_expressions_parse_back(e in expression()) {
        let printed = pretty_print(&e);
        prop_assert_eq!(parse(&printed), Ok(e), "{}", printed);
    }

    #[test]
    fn printing_is_a_fixed_point(e in expression()) {
        let once = pretty_print(&e);
        let twice = pretty_print(&parse(&once).unwrap());
        prop_assert_eq!(once, twice);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Away from blow-up the integrated Riccati flow obeys the cocycle law
    /// to within fifty times the integrator tolerance.
    #[test]
    fn numeric_cocycle_is_tight_when_well_conditioned(
        tau in -1.0f64..1.5,
        sigma in -1.0f64..1.5,
        rho in -1.0f64..1.5,
        a in -1.0f64..0.5,
    ) {
        let exact = |t: f64, s: f64, x: f64| x / (1.0 + (s - t) * x);
        let denominators = [
            1.0 + (rho - sigma) * a,
            1.0 + (rho - tau) * a,
        ];
        prop_assume!(denominators.iter().all(|d| *d > 0.1));
        let mid = exact(sigma, rho, a);
        prop_assume!(1.0 + (sigma - tau) * mid > 0.1);
        prop_assume!([mid, exact(tau, rho, a)].iter().all(|v| v.abs() <= 10.0));

        let cfg = IntegratorConfig::default();
        let fam = numeric_family(ExprField::parse(&["x1^2"]).unwrap(), cfg.clone());
        let inner = fam.evaluate(sigma, rho, &[a]).unwrap();
        let lhs = fam.evaluate(tau, sigma, &inner).unwrap();
        let rhs = fam.evaluate(tau, rho, &[a]).unwrap();
        let r = scaled_residual(&lhs, &rhs);
        prop_assert!(r <= 50.0 * cfg.tolerance_scale(), "residual {:e}", r);
    }

    /// `∂F_{τρ}(a)/∂τ = f(τ, F_{τρ}(a))` for the rotation and shear flows.
    #[test]
    fn flows_solve_their_fields(
        tau in -1.0f64..1.5,
        rho in -1.0f64..1.5,
        a1 in -1.0f64..1.0,
        a2 in -1.0f64..1.0,
    ) {
        for (name, a) in [("rotation", vec![a1, a2]), ("shear", vec![a1])] {
            let spec = parse_config(&format!(r#"{{"system": {{"catalog": "{name}"}}}}"#), name).unwrap();
            let fam = spec.family.unwrap();
            let field = spec.field.unwrap();
            let h = 1e-5;
            let up = fam.evaluate(tau + h, rho, &a).unwrap();
            let down = fam.evaluate(tau - h, rho, &a).unwrap();
            let d: Vec<f64> = up.iter().zip(down.iter()).map(|(u, v)| (u - v) / (2.0 * h)).collect();
            let x = fam.evaluate(tau, rho, &a).unwrap();
            let f = field.eval(tau, &x).unwrap();
            let r = scaled_residual(&d, &f);
            prop_assert!(r <= 1e-4, "{}: residual {:e}", name, r);
        }
    }
}

#[test]
fn catalog_closed_forms_match_their_fields() {
    for entry in CATALOG {
        let spec = parse_config(&format!(r#"{{"system": {{"catalog": "{}"}}}}"#, entry.name), entry.name).unwrap();
        let closed = spec.family.unwrap();
        let numeric = numeric_family(spec.field.unwrap(), IntegratorConfig::default());
        let plan = SamplePlan::standard(spec.n);
        let mut checked = 0;
        for &tau in &plan.time_grid {
            for &sigma in &plan.time_grid {
                for a in &plan.state_grid {
                    let Ok(x) = closed.evaluate(tau, sigma, a) else { continue };
                    if x.iter().any(|v| v.abs() > 10.0) {
                        continue;
                    }
                    let y = numeric.evaluate(tau, sigma, a).unwrap();
                    let r = scaled_residual(&y, &x);
                    assert!(r <= 1e-8, "{} at ({tau}, {sigma}, {a:?}): {r:e}", entry.name);
                    checked += 1;
                }
            }
        }
        assert!(checked >= plan.time_grid.len() * plan.time_grid.len(), "{}", entry.name);
    }
}

#[test]
fn catalog_families_escape_where_their_fields_blow_up() {
    // Past the pole the closed form refuses and the integrator reports escape.
    let spec = parse_config(r#"{"system": {"catalog": "riccati"}}"#, "riccati").unwrap();
    let numeric = numeric_family(spec.field.unwrap(), IntegratorConfig::default());
    assert!(spec.family.unwrap().evaluate(2.5, 0.0, &[0.5]).is_err());
    assert!(numeric.evaluate(2.5, 0.0, &[0.5]).is_err());
}
