//! Splits the flow of x' = x + 1 into a Wronski factor and a particular
//! solution, then checks both against the field.

use flowatlas::field::ExprField;
use flowatlas::flow::ExprFamily;
use flowatlas::linear::{sincov_decompose, wronski_consistency};

fn main() {
    let fam = ExprFamily::parse(&["exp(tau - sigma) * (a1 + 1) - 1"], None).expect("valid family");
    let grid: Vec<f64> = (0..=200).map(|i| -1.0 + 0.01 * i as f64).collect();
    let dec = sincov_decompose(&fam, 0.0, &grid).expect("affine family");
    for tau in [-1.0, 0.0, std::f64::consts::LN_2, 1.0] {
        let (w, h) = dec.at(tau).expect("inside the grid");
        let p = &w * &h;
        println!("tau = {tau:.4}: W = {:.8} (e^tau = {:.8}), p = {:.8}", w[(0, 0)], tau.exp(), p[0]);
    }
    let field = ExprField::parse(&["x1 + 1"]).expect("valid field");
    let report = wronski_consistency(&dec, &field, 1e-3).expect("field is affine");
    println!("Wronski check: {:.2e} ({})", report.max_residual, report.note.unwrap_or_default());
}
