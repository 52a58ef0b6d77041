//! The exact radial profile `|x|^β`, `β = (α+2)/(α+1)`, is stationary for a
//! constant source; its discrete residual vanishes under refinement away
//! from the origin.
//!
//! ```bash
//! cargo run --release --example radial_profile
//! ```

use viscolab::certify::residual;
use viscolab::domain::{make_domain, Geometry, Grid, NodeClass};
use viscolab::fields::ScalarField;
use viscolab::linalg::norm;
use viscolab::operators::OperatorSpec;
use viscolab::scheme::{ProblemParams, ProblemSpec, SpaceTimeField};

fn main() -> viscolab::Result<()> {
    for (alpha, n) in [(1.0, 1usize), (1.0, 2), (-0.5, 1), (-0.5, 2)] {
        let beta: f64 = (alpha + 2.0) / (alpha + 1.0);
        let f = -beta.powf(alpha + 1.0) * (beta + n as f64 - 2.0);
        print!("alpha = {alpha:>4}, N = {n}:");
        for dx in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
            let dom = make_domain(Geometry::Box { lo: vec![-1.0; n], hi: vec![1.0; n] })?;
            let psi = ScalarField::AbsPower { amplitude: 1.0, center: vec![], exponent: beta };
            let problem = ProblemSpec::new(OperatorSpec::trace_with_power(alpha, 0.0)?, dom.clone(), 1.0, ProblemParams::new(psi).source(ScalarField::Constant { value: f }), dx * dx)?;
            let grid = Grid::new(dom, dx, 1.0, 1.0)?;
            let u = SpaceTimeField::from_fn(&grid, &[1], problem.eps, "profile", |x, _| norm(x).powf(beta));
            let worst = (0..grid.len())
                .filter(|&i| grid.classes[i] == NodeClass::Interior && norm(&grid.coords(i)) >= 0.25)
                .map(|i| residual(&u, &problem, i, 1).map(f64::abs))
                .collect::<viscolab::Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            print!("  dx = 1/{:<3} residual = {worst:.2e}", (1.0 / dx) as usize);
        }
        println!();
    }
    Ok(())
}
