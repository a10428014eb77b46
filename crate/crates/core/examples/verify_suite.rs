//! Runs the condition suite on a sound family and on three broken ones.

use flowatlas::flow::{ExprFamily, FlowFamily};
use flowatlas::verify::{run_suite, SamplePlan, SuiteTolerances};

fn main() {
    let plan = SamplePlan::standard(1).with_random(200, 7);
    let cases = [
        ("riccati", "a1 / (1 + (sigma - tau) * a1)", Some("1 - (tau - sigma) * a1")),
        ("shifted identity", "a1 + 0.1", None),
        ("squaring", "a1^2 + 0 * (tau - sigma)", None),
        ("drift", "a1 + (tau - sigma) + 0.01 * (tau - sigma)^3", None),
    ];
    for (name, component, domain) in cases {
        let fam = ExprFamily::parse(&[component], domain).expect("valid family");
        let report = run_suite(&fam, &plan, &SuiteTolerances::for_kind(fam.kind()));
        println!("{name}: {}", if report.pass { "pass" } else { "FAIL" });
        for c in &report.conditions {
            println!(
                "  {:<18} {:>5} checked {:>10.2e} {}",
                c.condition_name,
                c.samples_checked,
                c.max_residual,
                if c.pass { "ok" } else { "violated" }
            );
        }
    }
}
