//! Sampled checks of homogeneity, the Pucci sandwich, degenerate ellipticity
//! and the two structure conditions for every shipped operator kind.
//!
//! ```bash
//! cargo run --release --example operator_axioms
//! ```

use viscolab::operators::{check_all, OperatorSpec, PropertyReport};

fn main() -> viscolab::Result<()> {
    let ops = [
        OperatorSpec::pucci_plus(0.5, 2.0, 1.0)?,
        OperatorSpec::pucci_minus(0.5, 2.0, -0.5)?,
        OperatorSpec::p_laplacian(2.0)?,
        OperatorSpec::trace_with_power(0.0, 1.0)?,
    ];
    println!("{}", PropertyReport::CSV_HEADER);
    for op in &ops {
        for r in check_all(op, 10_000, 42) {
            println!("{}", r.csv_row());
        }
    }
    Ok(())
}
