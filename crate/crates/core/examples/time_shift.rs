//! Adding `φ(t)` to a field shifts its residual by the discrete derivative of `φ`.
//!
//! ```bash
//! cargo run --release --example time_shift
//! ```

use viscolab::certify::residual;
use viscolab::domain::{make_domain, Geometry};
use viscolab::fields::ScalarField;
use viscolab::operators::OperatorSpec;
use viscolab::scheme::{solve, ProblemParams, ProblemSpec};

fn main() -> viscolab::Result<()> {
    let dx = 1.0 / 32.0;
    let problem = ProblemSpec::new(
        OperatorSpec::p_laplacian(1.0)?,
        make_domain(Geometry::Interval { lo: 0.0, hi: 1.0 })?,
        0.1,
        ProblemParams::new(ScalarField::Sine { amplitude: 1.0, wavenumber: 2.0 }),
        dx,
    )?;
    let u = solve(&problem, dx, 32)?;
    let g = &u.grid;
    for phi in [
        ScalarField::TimeLinear { rate: 2.0 },
        ScalarField::TimeSine { amplitude: 0.5, frequency: 30.0 },
        ScalarField::TimeQuadratic { coeff: -3.0 },
    ] {
        let shifted = u.map_values(|_, t, v| v + phi.eval(&[], t));
        let mut worst = 0.0f64;
        for s in u.steps().into_iter().filter(|&s| s > 0) {
            let dphi = (phi.eval(&[], g.time(s)) - phi.eval(&[], g.time(s - 1))) / g.dt;
            for &i in &g.interior {
                let d = residual(&shifted, &problem, i, s)? - residual(&u, &problem, i, s)?;
                worst = worst.max((d - dphi).abs());
            }
        }
        println!("{phi:?}: max deviation = {worst:e}");
    }
    Ok(())
}
