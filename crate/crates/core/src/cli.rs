//! Experiment runner: subcommands, result files and manifests.
//!
//! Every command writes CSV files plus `manifest.txt` (flat `key=value`) into
//! the output directory. CSV content depends only on the configuration and
//! the build; the manifest adds wall time and a SHA-256 over the CSVs.

use crate::barriers::{parabolic_envelope_with, problem_exponents, whole_space_far_field, EnvelopeFields, ExponentSet};
use crate::certify::{certify, certify_envelope, certify_envelope_range, compare, perron_iterate, CertKind, ComparisonReport, PerronOptions, ViscosityCertificate};
use crate::config::{DomainBlock, RunConfig, SweepAxis};
use crate::domain::{Grid, NodeClass};
use crate::error::{Error, Result};
use crate::operators::{check_all, PropertyReport};
use crate::regularity::{self, Axis, HolderEstimate, RegionSel, MARGIN};
use crate::scheme::{check_drift, check_monotonicity, make_grid, solve, solve_on_grid, solve_pair, solve_whole_space, ProblemSpec, SpaceTimeField};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_CERTIFY: i32 = 4;
pub const EXIT_REGULARITY: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "viscolab", version, about = "Solve and verify singular/degenerate parabolic equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `outputs.directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides `numerics.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Sampled checks of the operator and drift hypotheses.
    CheckOperators,
    /// Exponent table `(q1, q, c_q, gamma*, attain, K2)`.
    Exponents,
    /// Evaluate and certify the barrier envelope.
    Barriers,
    /// Solve, certify, sandwich and fit regularity.
    Solve,
    /// Solve on a truncated box of the whole space.
    SolveWholeSpace,
    /// Discrete Perron iteration between the envelopes.
    Perron,
    /// Solve two ordered instances and compare them.
    Compare,
    /// Run `solve` over a parameter list.
    Sweep {
        /// One of dx, alpha, gamma, eps; overrides `[sweep]`.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values; overrides `[sweep]`.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CheckOperators => "check-operators",
            Command::Exponents => "exponents",
            Command::Barriers => "barriers",
            Command::Solve => "solve",
            Command::SolveWholeSpace => "solve-whole-space",
            Command::Perron => "perron",
            Command::Compare => "compare",
            Command::Sweep { .. } => "sweep",
        }
    }
}

/// Exit code for an error that aborts a command.
pub fn exit_code_of(e: &Error) -> i32 {
    match e {
        Error::Cfl(_) | Error::NonFinite { .. } | Error::InvalidGrid(_) | Error::GridMismatch | Error::ZeroGradient | Error::NotSymmetric(_) | Error::NotInterior(_) => EXIT_NUMERIC,
        Error::Uncertified(_) => EXIT_CERTIFY,
        _ => EXIT_CONFIG,
    }
}

/// Files and manifest entries produced by one command.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub code: i32,
    pub files: BTreeMap<String, String>,
    pub kv: Vec<String>,
}

impl Report {
    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        self.kv.push(format!("{key}={value}"));
    }

    fn block(&mut self, text: String) {
        self.kv.extend(text.lines().map(str::to_string));
    }

    /// Raises the exit code to `code` unless a more severe failure is recorded.
    fn fail(&mut self, code: i32) {
        if self.code == EXIT_OK || (code == EXIT_CERTIFY && self.code == EXIT_REGULARITY) {
            self.code = code;
        }
    }
}

/// SHA-256 over `name \0 content \0` of every file, in name order.
pub fn content_hash(files: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    for (name, body) in files {
        h.update(name.as_bytes());
        h.update([0u8]);
        h.update(body.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

fn write_atomic(path: &Path, body: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, body)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

/// Writes the report's files and the manifest into `dir`; returns the content hash.
pub fn write_report(dir: &Path, command: &str, cfg: &RunConfig, report: &Report, started: Instant) -> Result<String> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in &report.files {
        write_atomic(&dir.join(name), body)?;
    }
    let hash = content_hash(&report.files);
    let mut m = vec![format!("command={command}")];
    m.extend(cfg.echo());
    m.push(format!("build={}", git_describe()));
    m.push(format!("version={}", env!("CARGO_PKG_VERSION")));
    m.push(format!("files={}", report.files.keys().cloned().collect::<Vec<_>>().join(",")));
    m.push(format!("content_hash={hash}"));
    m.extend(report.kv.iter().cloned());
    m.push(format!("exit_code={}", report.code));
    m.push(format!("wall_time_s={:.3}", started.elapsed().as_secs_f64()));
    write_atomic(&dir.join("manifest.txt"), &(m.join("\n") + "\n"))?;
    Ok(hash)
}

fn coord_header(dim: usize) -> String {
    (0..dim).map(|k| format!("x{k},")).collect()
}

/// `x0,...,t,<names>` over the recorded steps of the first field at `nodes`.
pub fn field_csv(fields: &[(&str, &SpaceTimeField)], nodes: &[usize]) -> String {
    let grid = &fields[0].1.grid;
    let mut s = coord_header(grid.dim());
    s.push('t');
    for (name, _) in fields {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for sl in &fields[0].1.slices {
        let others: Vec<Option<&[f64]>> = fields.iter().map(|(_, f)| f.slice(sl.step).map(|x| x.values.as_slice())).collect();
        for &i in nodes {
            for c in grid.coords(i) {
                s.push_str(&format!("{c:e},"));
            }
            s.push_str(&format!("{:e}", sl.t));
            for o in &others {
                match o {
                    Some(v) => s.push_str(&format!(",{:e}", v[i])),
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
    }
    s
}

fn reports_csv(reports: &[PropertyReport]) -> String {
    let mut s = String::from(PropertyReport::CSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

const EXPONENT_HEADER: &str = "alpha,gamma,gamma_f,q1,q,c_q,c_q_exact,gamma_star,attain,K2";

fn exponent_row(e: &ExponentSet) -> String {
    format!("{},{},{},{},{},{},{},{},{},{}", e.alpha, e.gamma, e.gamma_f, e.q1, e.q, e.c_q, e.c_q_exact, e.gamma_star, e.attain, e.k2)
}

/// One regularity fit, or the reason it could not be made.
#[derive(Clone, Debug)]
pub struct RegularityRow {
    pub axis: Axis,
    pub predicted: f64,
    pub estimate: std::result::Result<HolderEstimate, String>,
}

impl RegularityRow {
    pub fn pass(&self) -> bool {
        self.estimate.as_ref().map(|e| e.pass(MARGIN)).unwrap_or(true)
    }

    pub fn fitted(&self) -> f64 {
        self.estimate.as_ref().map(|e| e.fitted_exponent).unwrap_or(f64::NAN)
    }

    fn csv_row(&self) -> String {
        match &self.estimate {
            Ok(e) => e.csv_row(),
            Err(_) => format!("{},,{},,,skipped", self.axis.name(), self.predicted),
        }
    }
}

fn regularity_csv(rows: &[RegularityRow]) -> String {
    let mut s = String::from(regularity::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

fn regularity_rows(field: &SpaceTimeField, problem: &ProblemSpec, exps: &ExponentSet, seed: u64, bounded: bool) -> Vec<RegularityRow> {
    let row = |axis: Axis, predicted: f64, r: Result<HolderEstimate>| RegularityRow { axis, predicted, estimate: r.map_err(|e| e.to_string()) };
    let mut rows = Vec::new();
    if bounded {
        rows.push(row(Axis::BoundaryAttainment, exps.attain, regularity::boundary_rate(field, problem)));
    }
    rows.push(row(Axis::Space, exps.gamma, regularity::holder_fit(field, Axis::Space, RegionSel::Interior, Some(exps), seed)));
    rows.push(row(Axis::Time, exps.gamma_star, regularity::holder_fit(field, Axis::Time, RegionSel::Interior, Some(exps), seed)));
    if bounded {
        rows.push(row(Axis::Lateral, problem.constants.gamma, regularity::lateral_modulus(field, problem)));
    }
    rows
}

/// Summary of one `solve` run, as aggregated by `sweep`.
#[derive(Clone, Debug)]
pub struct SolveSummary {
    pub dx: f64,
    pub eps: f64,
    pub dt: f64,
    pub steps: usize,
    pub oracle_error: Option<f64>,
    pub lower_crossing: f64,
    pub upper_crossing: f64,
    pub cert_sub: bool,
    pub cert_super: bool,
    pub cert_upper_envelope: bool,
    pub cert_lower_envelope: bool,
    pub exps: ExponentSet,
    pub regularity: Vec<RegularityRow>,
    pub final_slice: Vec<f64>,
    pub grid: Grid,
}

impl SolveSummary {
    pub fn row(&self, axis: Axis) -> Option<&RegularityRow> {
        self.regularity.iter().find(|r| r.axis == axis)
    }
}

fn cert_block(r: &mut Report, prefix: &str, c: &ViscosityCertificate) {
    r.block(c.to_kv(prefix));
    if !c.pass {
        r.fail(EXIT_CERTIFY);
    }
}

fn cmp_block(r: &mut Report, prefix: &str, c: &ComparisonReport) {
    r.block(c.to_kv(prefix));
    if !c.pass {
        r.fail(EXIT_CERTIFY);
    }
}

/// Max of `a − b` over `nodes` and the steps of `a`.
fn max_crossing_on(a: &SpaceTimeField, b: &SpaceTimeField, nodes: &[usize]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for s in &a.slices {
        if let Some(o) = b.slice(s.step) {
            for &i in nodes {
                m = m.max(s.values[i] - o.values[i]);
            }
        }
    }
    m
}

fn oracle_block(cfg: &RunConfig, problem: &ProblemSpec, field: &SpaceTimeField, nodes: &[usize], r: &mut Report) -> Option<f64> {
    let oracle = cfg.oracle.as_ref()?;
    let last = field.last();
    let err = nodes
        .iter()
        .map(|&i| (last.values[i] - oracle.eval(&problem.params.psi, &field.grid.coords(i), last.t)).abs())
        .fold(0.0, f64::max);
    let tol = oracle.tol(cfg.numerics.dx);
    r.kv("oracle.max_error", format!("{err:e}"));
    r.kv("oracle.tol", format!("{tol:e}"));
    r.kv("oracle.pass", err <= tol);
    if !(err <= tol) {
        r.fail(EXIT_CERTIFY);
    }
    Some(err)
}

/// The full `solve` pipeline on a bounded domain or the whole space.
pub fn run_solve(cfg: &RunConfig) -> Result<(Report, SolveSummary)> {
    if let DomainBlock::WholeSpace { half_width, .. } = cfg.domain {
        return run_whole_space(cfg, half_width);
    }
    let problem = cfg.problem()?;
    let dx = cfg.numerics.dx;
    let seed = cfg.numerics.seed;
    let mut r = Report::default();
    let u = solve(&problem, dx, cfg.outputs.record_every)?;
    let grid = u.grid.clone();
    r.kv("dx", dx);
    r.kv("eps", problem.eps);
    r.kv("dt", format!("{:e}", grid.dt));
    r.kv("steps", grid.n_steps);
    let exps = problem_exponents(&problem)?;
    let env = parabolic_envelope_with(&problem, &exps, Some(&grid), 0, &cfg.envelope)?;
    r.kv("envelope.lateral", env.lateral.is_some());
    for (k, n) in env.notes.iter().enumerate() {
        r.kv(&format!("envelope.note{k}"), n);
    }
    let ef = env.evaluate(&grid, &u.steps(), &problem.hash());
    let low = compare(&ef.lower, &u, 0.0)?;
    let up = compare(&u, &ef.upper, 0.0)?;
    cmp_block(&mut r, "sandwich.lower", &low);
    cmp_block(&mut r, "sandwich.upper", &up);
    let (cw, cv) = certify_envelope(&problem, &ef, cfg.numerics.envelope_tol)?;
    cert_block(&mut r, "envelope.upper", &cw);
    cert_block(&mut r, "envelope.lower", &cv);
    let csub = certify(&u, &problem, CertKind::Sub, cfg.numerics.cert_tol);
    let csup = certify(&u, &problem, CertKind::Super, cfg.numerics.cert_tol);
    cert_block(&mut r, "solution.sub", &csub);
    cert_block(&mut r, "solution.super", &csup);
    let mono = check_monotonicity(&problem, &grid, &u.last().values, u.last().t, 200, seed);
    r.kv("monotonicity.min_derivative", format!("{:e}", mono.min_derivative));
    r.kv("monotonicity.pass", mono.pass());
    if !mono.pass() {
        r.fail(EXIT_CERTIFY);
    }
    let oracle_error = oracle_block(cfg, &problem, &u, &grid.active, &mut r);
    let rows = regularity_rows(&u, &problem, &exps, seed, true);
    finish_regularity(&mut r, &rows);
    r.files.insert("solution.csv".into(), field_csv(&[("u", &u), ("V", &ef.lower), ("W", &ef.upper)], &grid.active));
    r.files.insert("regularity.csv".into(), regularity_csv(&rows));
    let summary = SolveSummary {
        dx,
        eps: problem.eps,
        dt: grid.dt,
        steps: grid.n_steps,
        oracle_error,
        lower_crossing: low.max_crossing,
        upper_crossing: up.max_crossing,
        cert_sub: csub.pass,
        cert_super: csup.pass,
        cert_upper_envelope: cw.pass,
        cert_lower_envelope: cv.pass,
        exps,
        regularity: rows,
        final_slice: u.last().values.clone(),
        grid,
    };
    Ok((r, summary))
}

fn finish_regularity(r: &mut Report, rows: &[RegularityRow]) {
    for row in rows {
        let key = format!("regularity.{}", row.axis.name());
        match &row.estimate {
            Ok(e) => {
                r.kv(&format!("{key}.fitted"), e.fitted_exponent);
                r.kv(&format!("{key}.predicted"), e.predicted_exponent);
                r.kv(&format!("{key}.pass"), e.pass(MARGIN));
            }
            Err(m) => r.kv(&format!("{key}.skipped"), m),
        }
        if !row.pass() {
            r.fail(EXIT_REGULARITY);
        }
    }
}

fn run_whole_space(cfg: &RunConfig, half_width: f64) -> Result<(Report, SolveSummary)> {
    let problem = cfg.problem()?;
    let dx = cfg.numerics.dx;
    let mut r = Report::default();
    let sol = solve_whole_space(&problem, half_width, dx, cfg.outputs.record_every)?;
    let u = &sol.field;
    let grid = u.grid.clone();
    r.kv("dx", dx);
    r.kv("eps", problem.eps);
    r.kv("dt", format!("{:e}", grid.dt));
    r.kv("steps", grid.n_steps);
    r.kv("box_half_width", sol.box_half_width);
    r.kv("trusted_half_width", sol.trusted_half_width);
    for (k, w) in sol.warnings.iter().enumerate() {
        r.kv(&format!("warning{k}"), w);
    }
    let far = whole_space_far_field(&sol.problem, &grid)?;
    let ef: EnvelopeFields = far.envelope.evaluate(&grid, &u.steps(), &sol.problem.hash());
    let trusted = sol.trusted_nodes();
    let low = max_crossing_on(&ef.lower, u, &trusted);
    let up = max_crossing_on(u, &ef.upper, &trusted);
    r.kv("sandwich.lower.max_crossing", format!("{low:e}"));
    r.kv("sandwich.upper.max_crossing", format!("{up:e}"));
    r.kv("sandwich.nodes", trusted.len());
    if !(low <= 0.0 && up <= 0.0) {
        r.fail(EXIT_CERTIFY);
    }
    let c = &sol.problem.constants;
    let (cw, cv) = certify_envelope_range(&sol.problem, &ef, (c.f_min, c.f_max), cfg.numerics.envelope_tol)?;
    cert_block(&mut r, "envelope.upper", &cw);
    cert_block(&mut r, "envelope.lower", &cv);
    let csub = certify(u, &sol.problem, CertKind::Sub, cfg.numerics.cert_tol);
    let csup = certify(u, &sol.problem, CertKind::Super, cfg.numerics.cert_tol);
    cert_block(&mut r, "solution.sub", &csub);
    cert_block(&mut r, "solution.super", &csup);
    let oracle_error = oracle_block(cfg, &sol.problem, u, &trusted, &mut r);
    let exps = problem_exponents(&sol.problem)?;
    let rows = regularity_rows(u, &sol.problem, &exps, cfg.numerics.seed, false);
    finish_regularity(&mut r, &rows);
    r.files.insert("whole_space.csv".into(), field_csv(&[("u", u), ("V", &ef.lower), ("W", &ef.upper)], &trusted));
    r.files.insert("regularity.csv".into(), regularity_csv(&rows));
    let summary = SolveSummary {
        dx,
        eps: problem.eps,
        dt: grid.dt,
        steps: grid.n_steps,
        oracle_error,
        lower_crossing: low,
        upper_crossing: up,
        cert_sub: csub.pass,
        cert_super: csup.pass,
        cert_upper_envelope: cw.pass,
        cert_lower_envelope: cv.pass,
        exps,
        regularity: rows,
        final_slice: u.last().values.clone(),
        grid,
    };
    Ok((r, summary))
}

pub fn run_check_operators(cfg: &RunConfig) -> Result<Report> {
    let op = cfg.operator.build()?;
    let n = cfg.numerics.samples;
    let seed = cfg.numerics.seed;
    let mut reports = check_all(&op, n, seed);
    let problem = cfg.problem()?;
    reports.push(check_drift(&problem, n.min(2000), seed.wrapping_add(5)));
    let mut r = Report::default();
    for p in &reports {
        let key = format!("{}.{}", p.hypothesis, p.label);
        r.kv(&format!("{key}.max_violation"), format!("{:e}", p.max_violation));
        r.kv(&format!("{key}.pass"), p.pass());
        if !p.pass() {
            r.fail(EXIT_CERTIFY);
        }
    }
    if !cfg.domain.is_whole_space() {
        let cone = problem.domain.verify_cone(cfg.numerics.dx.max(problem.domain.diam / 64.0));
        r.kv("cone.worst_relative_depth", format!("{:e}", cone.worst_relative_depth));
        r.kv("cone.pass", cone.pass());
        if !cone.pass() {
            r.fail(EXIT_CERTIFY);
        }
    }
    r.files.insert("operator_reports.csv".into(), reports_csv(&reports));
    Ok(r)
}

pub fn run_exponents(cfg: &RunConfig) -> Result<Report> {
    let rows: Vec<ExponentSet> = match &cfg.exponents {
        Some(b) => regularity::exponent_table(&b.alpha, &b.gamma, &b.gamma_f)?,
        None => vec![problem_exponents(&cfg.problem()?)?],
    };
    let mut s = String::from(EXPONENT_HEADER);
    s.push('\n');
    for e in &rows {
        s.push_str(&exponent_row(e));
        s.push('\n');
    }
    let mut r = Report::default();
    r.kv("rows", rows.len());
    r.files.insert("exponents.csv".into(), s);
    Ok(r)
}

pub fn run_barriers(cfg: &RunConfig) -> Result<Report> {
    let problem = cfg.problem()?;
    let mut r = Report::default();
    let (grid, info) = make_grid(&problem, cfg.numerics.dx)?;
    r.kv("dt", format!("{:e}", info.dt));
    r.kv("steps", grid.n_steps);
    let exps = problem_exponents(&problem)?;
    r.kv("exponents", format!("[{EXPONENT_HEADER}] {}", exponent_row(&exps)));
    let (env, fr) = if cfg.domain.is_whole_space() {
        let c = &problem.constants;
        (whole_space_far_field(&problem, &grid)?.envelope, (c.f_min, c.f_max))
    } else {
        let f = problem.constants.f_sup;
        (parabolic_envelope_with(&problem, &exps, Some(&grid), 0, &cfg.envelope)?, (-f, f))
    };
    r.kv("envelope.p_coeff", env.p_coeff);
    r.kv("envelope.time_coeff", env.time_coeff);
    r.kv("envelope.lateral", env.lateral.is_some());
    if let Some(l) = &env.lateral {
        r.kv("envelope.lateral.c_bar", l.c_bar);
        r.kv("envelope.lateral.multiplier", l.multiplier);
        r.kv("envelope.lateral.gamma_b", l.gamma_b);
    }
    for (k, n) in env.notes.iter().enumerate() {
        r.kv(&format!("envelope.note{k}"), n);
    }
    let steps = crate::scheme::recorded_steps(grid.n_steps, cfg.outputs.record_every);
    let fields = env.evaluate(&grid, &steps, &problem.hash());
    let order = compare(&fields.lower, &fields.upper, 0.0)?;
    cmp_block(&mut r, "envelope.order", &order);
    let (cw, cv) = certify_envelope_range(&problem, &fields, fr, cfg.numerics.envelope_tol)?;
    cert_block(&mut r, "envelope.upper", &cw);
    cert_block(&mut r, "envelope.lower", &cv);
    r.files.insert("envelope.csv".into(), field_csv(&[("V", &fields.lower), ("W", &fields.upper)], &grid.active));
    Ok(r)
}

pub fn run_perron(cfg: &RunConfig) -> Result<Report> {
    let problem = cfg.problem()?;
    if cfg.domain.is_whole_space() {
        return Err(Error::Config("perron runs on bounded domains".into()));
    }
    let dx = cfg.numerics.dx;
    let mut r = Report::default();
    let (grid, info) = make_grid(&problem, dx)?;
    let exps = problem_exponents(&problem)?;
    let env = parabolic_envelope_with(&problem, &exps, Some(&grid), 0, &cfg.envelope)?;
    let opts = PerronOptions {
        max_sweeps: cfg.perron.max_sweeps,
        tol: cfg.perron.tol,
        gauss_seidel: cfg.perron.gauss_seidel,
        cert_tol: cfg.numerics.cert_tol,
        record_every: cfg.outputs.record_every,
    };
    let res = perron_iterate(&problem, &grid, &env, &opts)?;
    let psi = problem.params.psi.compile(grid.dim());
    let bc = |x: &[f64], t: f64| psi.eval(x, t);
    let direct = solve_on_grid(&problem, &grid, cfg.outputs.record_every, &bc, info.checked_bound)?;
    let agreement = res.field.max_diff(&direct)?;
    r.kv("dt", format!("{:e}", grid.dt));
    r.kv("steps", grid.n_steps);
    r.kv("perron.sweeps", res.sweeps);
    r.kv("perron.converged", res.converged);
    r.kv("perron.monotone", res.monotone);
    r.kv("perron.within_bounds", res.within_bounds);
    r.kv("perron.agreement", format!("{agreement:e}"));
    r.kv("perron.agreement_tol", format!("{:e}", 5.0 * dx));
    cert_block(&mut r, "envelope.upper", &res.upper_certificate);
    cert_block(&mut r, "envelope.lower", &res.lower_certificate);
    if !(res.converged && res.monotone && res.within_bounds && agreement <= 5.0 * dx) {
        r.fail(EXIT_CERTIFY);
    }
    let mut hist = String::from("sweep,max_change\n");
    for (k, h) in res.history.iter().enumerate() {
        hist.push_str(&format!("{},{h:e}\n", k + 1));
    }
    r.files.insert("perron.csv".into(), field_csv(&[("u_perron", &res.field), ("u_direct", &direct)], &grid.active));
    r.files.insert("perron_history.csv".into(), hist);
    Ok(r)
}

pub fn run_compare(cfg: &RunConfig) -> Result<Report> {
    let p1 = cfg.problem()?;
    let p2 = cfg.compare_problem()?;
    let tol = cfg.compare.as_ref().map(|c| c.tol).unwrap_or(1e-10);
    let (u1, u2) = solve_pair(&p1, &p2, cfg.numerics.dx, cfg.outputs.record_every)?;
    let grid = &u1.grid;
    let mut r = Report::default();
    // data ordering on the parabolic boundary and at every node for f
    let (psi1, psi2) = (p1.params.psi.compile(grid.dim()), p2.params.psi.compile(grid.dim()));
    let (f1, f2) = (p1.params.f.compile(grid.dim()), p2.params.f.compile(grid.dim()));
    let mut data_gap = f64::NEG_INFINITY;
    for s in 0..=grid.n_steps {
        let t = grid.time(s);
        for &i in &grid.active {
            let x = grid.coords(i);
            data_gap = data_gap.max(f1.eval(&x, t) - f2.eval(&x, t));
            if s == 0 || grid.classes[i] == NodeClass::Lateral {
                data_gap = data_gap.max(psi1.eval(&x, t) - psi2.eval(&x, t));
            }
        }
    }
    r.kv("dt", format!("{:e}", grid.dt));
    r.kv("data.max_violation", format!("{data_gap:e}"));
    r.kv("data.ordered", data_gap <= 0.0);
    let cmp = compare(&u1, &u2, tol)?;
    cmp_block(&mut r, "comparison", &cmp);
    r.files.insert("compare.csv".into(), field_csv(&[("u1", &u1), ("u2", &u2)], &grid.active));
    Ok(r)
}

const SWEEP_HEADER: &str = "axis,value,exit_code,status,dx,eps,dt,steps,oracle_error,change_vs_previous,lower_crossing,upper_crossing,\
cert_sub,cert_super,cert_W,cert_V,attain_predicted,attain_fitted,space_predicted,space_fitted,time_predicted,time_fitted,lateral_predicted,lateral_fitted";

pub fn run_sweep(cfg: &RunConfig, axis: SweepAxis, values: &[f64], dir: &Path, started: Instant) -> Result<Report> {
    let points: Vec<std::result::Result<(Report, SolveSummary), (i32, String)>> = values
        .par_iter()
        .enumerate()
        .map(|(k, &v)| {
            let point = cfg.with_axis(axis, v);
            let sub = dir.join(format!("point_{k:03}"));
            let out = RunConfig::parse(&point.to_toml()).and_then(|p| run_solve(&p).map(|x| (p, x)));
            match out {
                Ok((p, (rep, sum))) => write_report(&sub, "solve", &p, &rep, started).map(|_| (rep, sum)).map_err(|e| (exit_code_of(&e), e.to_string())),
                Err(e) => Err((exit_code_of(&e), e.to_string())),
            }
        })
        .collect();
    let mut r = Report::default();
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    let mut prev: Option<&SolveSummary> = None;
    let fmt = |x: f64| if x.is_finite() { format!("{x:e}") } else { String::new() };
    for (k, (&v, p)) in values.iter().zip(&points).enumerate() {
        match p {
            Ok((rep, sum)) => {
                let change = prev
                    .filter(|q| q.grid.counts == sum.grid.counts && q.grid.lo == sum.grid.lo && q.grid.h == sum.grid.h)
                    .map(|q| sum.grid.active.iter().map(|&i| (sum.final_slice[i] - q.final_slice[i]).abs()).fold(0.0, f64::max))
                    .unwrap_or(f64::NAN);
                let reg = |a: Axis| sum.row(a).map(|x| (x.predicted, x.fitted())).unwrap_or((f64::NAN, f64::NAN));
                let (ap, af) = reg(Axis::BoundaryAttainment);
                let (sp, sf) = reg(Axis::Space);
                let (tp, tf) = reg(Axis::Time);
                let (lp, lf) = reg(Axis::Lateral);
                s.push_str(&format!(
                    "{},{v},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    axis.name(),
                    rep.code,
                    if rep.code == EXIT_OK { "ok" } else { "fail" },
                    sum.dx,
                    sum.eps,
                    fmt(sum.dt),
                    sum.steps,
                    sum.oracle_error.map(fmt).unwrap_or_default(),
                    fmt(change),
                    fmt(sum.lower_crossing),
                    fmt(sum.upper_crossing),
                    sum.cert_sub,
                    sum.cert_super,
                    sum.cert_upper_envelope,
                    sum.cert_lower_envelope,
                    fmt(ap),
                    fmt(af),
                    fmt(sp),
                    fmt(sf),
                    fmt(tp),
                    fmt(tf),
                    fmt(lp),
                    fmt(lf)
                ));
                r.kv(&format!("point{k}.exit_code"), rep.code);
                prev = Some(sum);
                if rep.code != EXIT_OK {
                    r.fail(rep.code);
                }
            }
            Err((code, msg)) => {
                let clean = msg.replace([',', '\n'], ";");
                s.push_str(&format!("{},{v},{code},error: {clean}{}\n", axis.name(), ",".repeat(20)));
                r.kv(&format!("point{k}.exit_code"), code);
                r.kv(&format!("point{k}.error"), &clean);
                prev = None;
                r.fail(*code);
            }
        }
    }
    r.kv("axis", axis.name());
    r.kv("points", values.len());
    r.files.insert("sweep.csv".into(), s);
    Ok(r)
}

fn execute(cli: &Cli, started: Instant) -> Result<(i32, PathBuf)> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.numerics.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.outputs.directory = o.clone();
    }
    let dir = cfg.outputs.directory.clone();
    let report = match &cli.command {
        Command::CheckOperators => run_check_operators(&cfg)?,
        Command::Exponents => run_exponents(&cfg)?,
        Command::Barriers => run_barriers(&cfg)?,
        Command::Solve => run_solve(&cfg)?.0,
        Command::SolveWholeSpace => {
            if !cfg.domain.is_whole_space() {
                return Err(Error::Config("solve-whole-space needs domain.kind = \"whole_space\"".into()));
            }
            run_solve(&cfg)?.0
        }
        Command::Perron => run_perron(&cfg)?,
        Command::Compare => run_compare(&cfg)?,
        Command::Sweep { axis, values } => {
            let block = cfg.sweep.clone();
            let axis = match axis {
                Some(a) => SweepAxis::parse(a)?,
                None => block.as_ref().map(|b| b.axis).ok_or_else(|| Error::Config("sweep needs [sweep] or --axis".into()))?,
            };
            let values = match values {
                Some(v) => v.clone(),
                None => block.map(|b| b.values).ok_or_else(|| Error::Config("sweep needs [sweep] or --values".into()))?,
            };
            run_sweep(&cfg, axis, &values, &dir, started)?
        }
    };
    write_report(&dir, cli.command.name(), &cfg, &report, started)?;
    Ok((report.code, dir))
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let started = Instant::now();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| execute(&cli, started)) {
        Ok((code, dir)) => {
            println!("{} -> {} (exit {code})", cli.command.name(), dir.display());
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_of(&e)
        }
    }
}
