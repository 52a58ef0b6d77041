//! The linear heat equation against its exact solution under refinement.
//!
//! ```bash
//! cargo run --release --example heat_oracle
//! ```

use std::f64::consts::PI;
use viscolab::domain::{make_domain, Geometry};
use viscolab::fields::ScalarField;
use viscolab::operators::OperatorSpec;
use viscolab::scheme::{solve, ProblemParams, ProblemSpec};

fn main() -> viscolab::Result<()> {
    for dx in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        let problem = ProblemSpec::new(
            OperatorSpec::trace_with_power(0.0, 0.0)?,
            make_domain(Geometry::Interval { lo: 0.0, hi: 1.0 })?,
            0.1,
            ProblemParams::new(ScalarField::Sine { amplitude: 1.0, wavenumber: 1.0 }),
            dx,
        )?;
        let u = solve(&problem, dx, 64)?;
        let last = u.last();
        let err = u
            .grid
            .active
            .iter()
            .map(|&i| (last.values[i] - (-PI * PI * last.t).exp() * (PI * u.grid.coords(i)[0]).sin()).abs())
            .fold(0.0, f64::max);
        println!("dx = {dx:<9} dt = {:.3e} steps = {:<5} max error = {err:.3e}", u.grid.dt, u.grid.n_steps);
    }
    Ok(())
}
