//! Maximal existence interval of solutions to x' = x^2 through (0, a).

use flowatlas::field::ExprField;
use flowatlas::integrate::{escape_interval, IntegratorConfig};

fn main() {
    let field = ExprField::parse(&["x1^2"]).expect("valid field");
    let cfg = IntegratorConfig::default();
    for a in [0.5, 1.0, 0.0, -0.25] {
        let j = escape_interval(&field, 0.0, &[a], &cfg).expect("initial point in the domain");
        let exact = if a > 0.0 { format!("{}", 1.0 / a) } else { "none".into() };
        println!(
            "a = {a:>5}: ({:.9} {}, {:.9} {}), exact upper {exact}",
            j.lower, j.lower_kind, j.upper, j.upper_kind
        );
    }
}
