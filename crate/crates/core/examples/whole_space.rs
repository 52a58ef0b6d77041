//! Whole-space problems on a truncation box with far-field data from the
//! whole-space envelope; only the central half of the box is trusted.
//!
//! ```bash
//! cargo run --release --example whole_space
//! ```

use viscolab::fields::ScalarField;
use viscolab::operators::OperatorSpec;
use viscolab::scheme::{solve_whole_space, truncation_box, ProblemParams, ProblemSpec};

fn main() -> viscolab::Result<()> {
    let psi = ScalarField::Fourier { amplitude: 0.5, modes: 3, seed: 11, max_frequency: 1.0 };
    let problem = ProblemSpec::whole_space(
        OperatorSpec::trace_with_power(1.0, 0.0)?,
        truncation_box(1, 2.0)?,
        0.1,
        ProblemParams::new(psi.clone()).source(ScalarField::Constant { value: 0.25 }),
        1.0 / 32.0,
    )?;
    let sol = solve_whole_space(&problem, 2.0, 1.0 / 32.0, 16)?;
    let last = sol.field.last();
    let trusted = sol.trusted_nodes();
    println!("box [-{0}, {0}], trusted [-{1}, {1}], {2} trusted nodes", sol.box_half_width, sol.trusted_half_width, trusted.len());
    for w in &sol.warnings {
        println!("warning: {w}");
    }
    for &i in trusted.iter().step_by(8) {
        let x = sol.field.grid.coords(i);
        println!("x = {:>6.3}  psi = {:>8.5}  u(T) = {:>8.5}", x[0], psi.eval(&x, 0.0), last.values[i]);
    }
    Ok(())
}
