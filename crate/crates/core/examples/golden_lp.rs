//! Prints the LP rendering of a small reference model. The output is
//! checked into `tests/fixtures/golden_model.lp`; the acceptance suite
//! asserts the rendering stays byte-identical.

use spatel::milp::{ConstraintOp, MilpModel, VarKind};

fn main() {
    println!("{}", golden_model().write_lp().unwrap().trim_end());
}

pub fn golden_model() -> MilpModel {
    let mut m = MilpModel::new();
    let x = m.add_var("x", VarKind::Continuous, -1.5, 4.0).unwrap();
    let y = m.add_var("y", VarKind::Binary, 0.0, 1.0).unwrap();
    let n = m.add_var("n", VarKind::Integer, 0.0, 3.0).unwrap();
    m.add_constraint("cap", vec![(x, 1.0), (n, 2.0)], ConstraintOp::Le, 7.0)
        .unwrap();
    m.add_constraint("link", vec![(x, -0.25), (y, 10.0)], ConstraintOp::Ge, 0.5)
        .unwrap();
    m.add_constraint("fix", vec![(y, 1.0), (n, 1.0)], ConstraintOp::Eq, 2.0)
        .unwrap();
    m.set_objective(vec![(x, -1.0), (n, 3.0)]).unwrap();
    m.seal();
    m
}
