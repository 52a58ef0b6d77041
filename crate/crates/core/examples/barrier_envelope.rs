//! Builds the barrier envelope `V ≤ W` for Lipschitz data, evaluates it on
//! the solver grid and certifies `W` as a supersolution and `V` as a
//! subsolution.
//!
//! ```bash
//! cargo run --release --example barrier_envelope
//! ```

use viscolab::barriers::{parabolic_envelope_with, problem_exponents, EnvelopeOptions};
use viscolab::certify::{certify_envelope, compare};
use viscolab::domain::{make_domain, Geometry};
use viscolab::fields::ScalarField;
use viscolab::operators::OperatorSpec;
use viscolab::scheme::{make_grid, recorded_steps, ProblemParams, ProblemSpec};

fn main() -> viscolab::Result<()> {
    let dx = 1.0 / 32.0;
    let psi = ScalarField::AbsPower { amplitude: 1.0, center: vec![0.5], exponent: 1.0 };
    let problem = ProblemSpec::new(
        OperatorSpec::trace_with_power(1.0, 0.0)?,
        make_domain(Geometry::Interval { lo: 0.0, hi: 1.0 })?,
        0.1,
        ProblemParams::new(psi).source(ScalarField::Constant { value: 0.5 }),
        dx,
    )?;
    let exps = problem_exponents(&problem)?;
    println!("q1 = {}, q = {}, K2 = {:.4}, attain = {:.4}", exps.q1, exps.q, exps.k2, exps.attain);
    let (grid, _) = make_grid(&problem, dx)?;
    let env = parabolic_envelope_with(&problem, &exps, Some(&grid), 0, &EnvelopeOptions::default())?;
    if let Some(l) = &env.lateral {
        println!("lateral barrier: c_bar = {:.4}, multiplier = {:.4}, gamma_b = {}", l.c_bar, l.multiplier, l.gamma_b);
    }
    for x in [0.0, 0.25, 0.5] {
        let (v, w) = env.point(&[x], 0.05);
        println!("x = {x:.2}: V = {v:.5}, W = {w:.5}");
    }
    let fields = env.evaluate(&grid, &recorded_steps(grid.n_steps, 16), "example");
    let order = compare(&fields.lower, &fields.upper, 0.0)?;
    let (cw, cv) = certify_envelope(&problem, &fields, 0.0)?;
    println!("max(V - W) = {:e}", order.max_crossing);
    println!("W super: pass = {}, min residual = {:e}", cw.pass, cw.worst_residual);
    println!("V sub:   pass = {}, max residual = {:e}", cv.pass, cv.worst_residual);
    Ok(())
}
