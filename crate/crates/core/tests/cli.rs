use std::path::{Path, PathBuf};
use std::process::Command;

use viscolab::cli::{run, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_REGULARITY};
use viscolab::config::RunConfig;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(format!("{name}.toml"))
}

fn run_cmd(cfg: &Path, out: &Path, cmd: &str) -> i32 {
    run(["viscolab", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), cmd])
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("manifest.txt")).unwrap()
}

const BAD_PUCCI: &str = r#"
[operator]
kind = "pucci_plus"
a = 2.0
A = 1.0
alpha = 0.0

[domain]
kind = "interval"
lo = 0.0
hi = 1.0

[problem]
T = 0.1
psi = { family = "zero" }
"#;

#[test]
fn inverted_ellipticity_is_rejected_with_a_line() {
    let err = RunConfig::parse(BAD_PUCCI).unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");
    assert!(err.contains("[operator]"), "{err}");
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), BAD_PUCCI);
    assert_eq!(run_cmd(&p, &tmp.path().join("o"), "solve"), EXIT_CONFIG);
}

#[test]
fn missing_config_and_unknown_command() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_cmd(&tmp.path().join("nope.toml"), &tmp.path().join("o"), "solve"), EXIT_CONFIG);
    assert_eq!(run(["viscolab", "frobnicate"]), EXIT_CONFIG);
    let p = write_config(tmp.path(), "[operator]\nkind = \"trace_with_power\"\nalpha = 0.0\nbogus = 1\n");
    assert_eq!(run_cmd(&p, &tmp.path().join("o"), "solve"), EXIT_CONFIG);
}

#[test]
fn p_laplacian_operator_checks_pass() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_cmd(&config("p_laplacian_alpha2"), tmp.path(), "check-operators"), EXIT_OK);
    let csv = std::fs::read_to_string(tmp.path().join("operator_reports.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")), "{csv}");
}

#[test]
fn heat_has_no_gradient_dependence() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_cmd(&config("heat"), tmp.path(), "check-operators"), EXIT_OK);
    let csv = std::fs::read_to_string(tmp.path().join("operator_reports.csv")).unwrap();
    let h6 = csv.lines().find(|l| l.starts_with("H6,")).unwrap();
    assert_eq!(h6.split(',').nth(3), Some("0e0"), "{h6}");
}

#[test]
fn heat_and_radial_solve_cleanly() {
    for name in ["heat", "radial_alpha1"] {
        let tmp = tempfile::tempdir().unwrap();
        assert_eq!(run_cmd(&config(name), tmp.path(), "solve"), EXIT_OK, "{name}");
        let m = manifest(tmp.path());
        assert!(m.contains("oracle.pass=true"), "{name}: {m}");
        assert!(m.contains("monotonicity.pass=true"), "{name}");
    }
}

#[test]
fn zero_data_on_the_whole_space_stays_zero() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_cmd(&config("whole_space_zero"), tmp.path(), "solve"), EXIT_OK);
    let csv = std::fs::read_to_string(tmp.path().join("whole_space.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "u").unwrap();
    let mut rows = 0;
    for l in lines {
        let v: f64 = l.split(',').nth(col).unwrap().parse().unwrap();
        assert_eq!(v, 0.0, "{l}");
        rows += 1;
    }
    assert!(rows > 0);
}

#[test]
fn coarse_dx_sweep_reports_skipped_fits() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_cmd(&config("sweep_dx"), tmp.path(), "sweep"), EXIT_REGULARITY);
}

#[test]
fn non_monotone_stencil_is_a_numeric_error() {
    let text = r#"
[operator]
kind = "pucci_plus"
a = 0.1
A = 1.0
alpha = 0.0

[domain]
kind = "box"
lo = [0.0, 0.0]
hi = [1.0, 1.0]

[problem]
T = 0.01
psi = { family = "zero" }

[numerics]
dx = 0.125
"#;
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), text);
    assert_eq!(run_cmd(&p, &tmp.path().join("o"), "solve"), EXIT_NUMERIC);
}

#[test]
fn binary_reports_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_viscolab"))
        .args(["--config", config("heat").to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "exponents"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    let p = write_config(tmp.path(), BAD_PUCCI);
    let status = Command::new(env!("CARGO_BIN_EXE_viscolab"))
        .args(["--config", p.to_str().unwrap(), "solve"])
        .current_dir(tmp.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_CONFIG));
}
