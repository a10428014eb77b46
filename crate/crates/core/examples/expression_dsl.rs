//! Parses, prints and evaluates expressions; shows error positions.

use flowatlas::expr::{evaluate_expr, parse, pretty_print};

fn main() {
    for src in ["x1^2", "-x1^2", "2^3^2", "sin(t) * x2 - exp(-x1)", "1e-3 * (x1 + 1)"] {
        let e = parse(src).expect("valid expression");
        let v = evaluate_expr(&e, 0.5, &[2.0, 3.0]).expect("finite value");
        println!("{src:<24} => {:<36} at t = 0.5, x = (2, 3): {v}", pretty_print(&e));
    }
    for src in ["x1 +", "(x1 + 2", "x1 + foo(t)"] {
        let err = parse(src).unwrap_err();
        println!("{src:<12} error at {}: {}", err.offset, err.message);
    }
}
