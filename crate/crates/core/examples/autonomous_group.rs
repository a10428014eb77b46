//! Detects time-translation invariance and reduces the family to a group.

use flowatlas::autonomous::{check_group_law, detect_autonomous, to_group, OneParamGroup, CLOSED_FORM_TOL};
use flowatlas::flow::ExprFamily;
use flowatlas::verify::SamplePlan;

fn main() {
    let plan = SamplePlan::standard(1).with_random(200, 1);
    let shear = ExprFamily::parse(&["a1 * exp((tau^2 - sigma^2) / 2)"], None).expect("valid family");
    println!("shear autonomous: {}", detect_autonomous(&shear, &plan, CLOSED_FORM_TOL));

    let riccati = ExprFamily::parse(&["a1 / (1 + (sigma - tau) * a1)"], Some("1 - (tau - sigma) * a1"))
        .expect("valid family");
    let group = to_group(riccati, &plan, CLOSED_FORM_TOL).expect("riccati is autonomous");
    let half = group.g(0.5, &[0.5]).expect("defined");
    let twice = group.g(0.5, &half).expect("defined");
    let once = group.g(1.0, &[0.5]).expect("defined");
    println!("G(0.5, 0.5) = {}, G(0.5, G(0.5, 0.5)) = {}, G(1, 0.5) = {}", half[0], twice[0], once[0]);
    let law = check_group_law(&group, &plan, 1e-9);
    println!("group law over {} triples: {:.2e}", law.samples_checked, law.max_residual);
}
