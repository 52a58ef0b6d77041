//! Discrete Perron iteration between certified envelopes on the heat
//! instance; the fixed point is the scheme solution.
//!
//! ```bash
//! cargo run --release --example perron
//! ```

use viscolab::barriers::{parabolic_envelope_with, problem_exponents, EnvelopeOptions};
use viscolab::certify::{perron_iterate, PerronOptions};
use viscolab::domain::{make_domain, Geometry};
use viscolab::fields::ScalarField;
use viscolab::operators::OperatorSpec;
use viscolab::scheme::{make_grid, solve_on_grid, ProblemParams, ProblemSpec};

fn main() -> viscolab::Result<()> {
    let dx = 1.0 / 32.0;
    let problem = ProblemSpec::new(
        OperatorSpec::trace_with_power(0.0, 0.0)?,
        make_domain(Geometry::Interval { lo: 0.0, hi: 1.0 })?,
        0.1,
        ProblemParams::new(ScalarField::Sine { amplitude: 1.0, wavenumber: 1.0 }),
        dx,
    )?;
    let (grid, _) = make_grid(&problem, dx)?;
    let env = parabolic_envelope_with(&problem, &problem_exponents(&problem)?, Some(&grid), 0, &EnvelopeOptions::default())?;
    for gauss_seidel in [false, true] {
        let res = perron_iterate(&problem, &grid, &env, &PerronOptions { gauss_seidel, record_every: 8, ..Default::default() })?;
        let psi = problem.params.psi.compile(1);
        let direct = solve_on_grid(&problem, &grid, 8, &|x: &[f64], t: f64| psi.eval(x, t), None)?;
        println!(
            "gauss_seidel = {gauss_seidel:<5} sweeps = {:<4} converged = {} monotone = {} within [V, W] = {} |perron - direct| = {:e}",
            res.sweeps,
            res.converged,
            res.monotone,
            res.within_bounds,
            res.field.max_diff(&direct)?
        );
    }
    Ok(())
}
