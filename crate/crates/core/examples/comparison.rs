//! Discrete comparison: ordered data give ordered solutions.
//!
//! ```bash
//! cargo run --release --example comparison
//! ```

use viscolab::certify::compare;
use viscolab::domain::{make_domain, Geometry};
use viscolab::fields::ScalarField;
use viscolab::operators::OperatorSpec;
use viscolab::scheme::{solve_pair, ProblemParams, ProblemSpec};

fn main() -> viscolab::Result<()> {
    let base = ScalarField::AbsPower { amplitude: 1.0, center: vec![0.5, 0.5], exponent: 0.5 };
    let dom = make_domain(Geometry::LShape { side: 1.0 })?;
    let op = OperatorSpec::pucci_minus(0.5, 1.5, -0.5)?;
    let dx = 1.0 / 16.0;
    let lower = ProblemSpec::new(op.clone(), dom.clone(), 0.05, ProblemParams::new(base.clone()).gamma(0.5), dx)?;
    let upper_psi = ScalarField::Sum { terms: vec![base, ScalarField::Constant { value: 0.05 }] };
    let upper = ProblemSpec::new(op, dom, 0.05, ProblemParams::new(upper_psi).gamma(0.5).source(ScalarField::Constant { value: 0.2 }), dx)?;
    let (u1, u2) = solve_pair(&lower, &upper, dx, 8)?;
    let r = compare(&u1, &u2, 1e-10)?;
    println!("nodes compared = {}, max(u1 - u2) = {:e}, pass = {}", r.nodes_compared, r.max_crossing, r.pass);
    Ok(())
}
