//! Integrates x' = x^2 and compares with the closed form a / (1 + (sigma - tau) a).

use flowatlas::field::ExprField;
use flowatlas::flow::FlowFamily;
use flowatlas::integrate::{numeric_family, IntegratorConfig};

fn main() {
    let field = ExprField::parse(&["x1^2"]).expect("valid field");
    let fam = numeric_family(field, IntegratorConfig::default());
    println!("{:>6} {:>6} {:>6} {:>20} {:>10}", "tau", "sigma", "a", "F(a)", "error");
    for (tau, sigma, a) in [(1.0, 0.0, 0.5), (1.5, 0.0, 0.5), (-1.0, 0.5, 0.25), (0.5, -1.0, -1.0)] {
        let x = fam.evaluate(tau, sigma, &[a]).expect("inside the domain");
        let exact = a / (1.0 + (sigma - tau) * a);
        println!("{tau:>6} {sigma:>6} {a:>6} {:>20.15} {:>10.2e}", x[0], (x[0] - exact).abs());
    }
    match fam.evaluate(2.5, 0.0, &[0.5]) {
        Ok(x) => println!("unexpected value {x:?}"),
        Err(e) => println!("F(2.5, 0)(0.5): {e}"),
    }
}
