//! Hölder and boundary-attainment fits on a singular instance, compared
//! with the predicted exponents.
//!
//! ```bash
//! cargo run --release --example regularity_fits
//! ```

use viscolab::barriers::problem_exponents;
use viscolab::domain::{make_domain, Geometry};
use viscolab::fields::ScalarField;
use viscolab::operators::OperatorSpec;
use viscolab::regularity::{boundary_rate, holder_fit, lateral_modulus, Axis, RegionSel, CSV_HEADER};
use viscolab::scheme::{solve, ProblemParams, ProblemSpec};

fn main() -> viscolab::Result<()> {
    let dx = 1.0 / 64.0;
    let psi = ScalarField::AbsPower { amplitude: 1.0, center: vec![0.5], exponent: 0.5 };
    let problem = ProblemSpec::new(
        OperatorSpec::trace_with_power(-0.5, 0.0)?,
        make_domain(Geometry::Interval { lo: 0.0, hi: 1.0 })?,
        0.1,
        ProblemParams::new(psi).gamma(0.5),
        dx,
    )?;
    let u = solve(&problem, dx, 16)?;
    let exps = problem_exponents(&problem)?;
    println!("{CSV_HEADER}");
    for e in [
        boundary_rate(&u, &problem)?,
        holder_fit(&u, Axis::Space, RegionSel::Interior, Some(&exps), 3)?,
        holder_fit(&u, Axis::Time, RegionSel::Interior, Some(&exps), 3)?,
        lateral_modulus(&u, &problem)?,
    ] {
        println!("{}", e.csv_row());
    }
    Ok(())
}
