//! Runs the command-line sweep over `dx` on the heat instance and prints the
//! aggregated CSV.
//!
//! ```bash
//! cargo run --release --example sweep
//! ```

use std::path::Path;

fn main() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/sweep_dx.toml");
    let out = std::env::temp_dir().join("viscolab_sweep_example");
    let code = viscolab::cli::run(["viscolab", "sweep", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap_or_default();
    print!("{csv}");
    println!("exit code {code}");
}
