//! Regularity exponents over a small parameter grid.
//!
//! ```bash
//! cargo run --release --example exponents
//! ```

use viscolab::regularity::exponent_table;

fn main() -> viscolab::Result<()> {
    println!("{:>6} {:>6} {:>6} {:>6} {:>6} {:>8} {:>8}", "alpha", "gamma", "q1", "q", "c_q", "gamma*", "attain");
    for e in exponent_table(&[-0.5, 0.0, 1.0, 2.0], &[0.5, 1.0], &[1.0])? {
        println!(
            "{:>6.2} {:>6.2} {:>6.3} {:>6.3} {:>6.3} {:>8.4} {:>8.4}",
            e.alpha, e.gamma, e.q1, e.q, e.c_q, e.gamma_star, e.attain
        );
    }
    Ok(())
}
