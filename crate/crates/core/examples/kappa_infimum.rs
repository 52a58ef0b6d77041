//! `inf_κ κ + P/(c_q^q κ^{q−1})` in closed form against a brute-force grid
//! search, with the exact constant and with the constant as printed.
//!
//! ```bash
//! cargo run --release --example kappa_infimum
//! ```

use viscolab::barriers::{kappa_infimum, KappaVariant};

fn brute(p: f64, q: f64, cq: f64) -> f64 {
    (0..200_000)
        .map(|i| 10f64.powf(-6.0 + 12.0 * i as f64 / 200_000.0))
        .map(|k| k + p / (cq.powf(q) * k.powf(q - 1.0)))
        .fold(f64::INFINITY, f64::min)
}

fn main() -> viscolab::Result<()> {
    println!("{:>6} {:>6} {:>10} {:>10} {:>10} {:>10}", "P", "q", "exact", "brute", "paper", "brute");
    for (p, q) in [(1.0, 2.0), (1.0, 3.0), (10.0, 3.0), (0.3, 4.5)] {
        let scale = f64::powf(p, 1.0 / q);
        let (_, exact) = kappa_infimum(p, q, KappaVariant::ExactCq)?;
        let (_, paper) = kappa_infimum(p, q, KappaVariant::PaperCq)?;
        let be = brute(p, q, KappaVariant::ExactCq.c_q(q));
        let bp = brute(p, q, KappaVariant::PaperCq.c_q(q));
        println!("{p:>6} {q:>6} {:>10.6} {:>10.6} {:>10.6} {:>10.6}", exact / scale, be / scale, paper / scale, bp / scale);
    }
    println!("values are divided by P^(1/q)");
    Ok(())
}
