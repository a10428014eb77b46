//! Averages the rotation group over [-eps, eps] and undoes the average.

use flowatlas::autonomous::FamilyGroup;
use flowatlas::flow::ExprFamily;
use flowatlas::linear::{mollify, smooth_apply, AffineMap, DEFAULT_PANELS};

fn main() {
    let rotation = ExprFamily::parse(
        &[
            "cos(tau - sigma) * a1 - sin(tau - sigma) * a2",
            "sin(tau - sigma) * a1 + cos(tau - sigma) * a2",
        ],
        None,
    )
    .expect("valid family");
    let group = FamilyGroup::assume(rotation);
    for eps in [std::f64::consts::FRAC_PI_2, 0.4, 0.1, 0.025] {
        let m = mollify(&group, eps, DEFAULT_PANELS).expect("invertible average");
        println!(
            "eps = {eps:<8}: H = {:?}, |H - I| = {:.3e}",
            m.h.matrix_rows(),
            m.h.sup_dist(&AffineMap::identity(2))
        );
    }
    let m = mollify(&group, 0.25, DEFAULT_PANELS).expect("invertible average");
    let g = smooth_apply(&group, &m, 0.3).expect("defined");
    println!("recovered G(0.3) = {:?}", g.matrix_rows());
    match mollify(&group, std::f64::consts::PI, DEFAULT_PANELS) {
        Ok(m) => println!("unexpected average {:?}", m.h),
        Err(e) => println!("eps = pi: {e}"),
    }
}
