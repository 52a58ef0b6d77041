//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so the
//! lines are printed even under `cargo test`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;
use viscolab::barriers::{kappa_infimum, parabolic_envelope_with, problem_exponents, q1_of, whole_space_profile, EnvelopeOptions, KappaVariant};
use viscolab::certify::{certify_envelope, compare, perron_iterate, residual, PerronOptions};
use viscolab::cli::{self, run_solve};
use viscolab::config::{RunConfig, SweepAxis};
use viscolab::domain::{make_domain, Geometry, Grid, NodeClass};
use viscolab::fields::ScalarField;
use viscolab::linalg::norm;
use viscolab::operators::{check_all, OperatorSpec};
use viscolab::regularity::{fit_power_law, holder_fit, Axis, RegionSel};
use viscolab::scheme::{make_grid, recorded_steps, solve, solve_on_grid, solve_pair, ProblemParams, ProblemSpec, SpaceTimeField};

type Outcome = Result<String, String>;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join("configs")
}

fn load(name: &str) -> RunConfig {
    RunConfig::load(&configs_dir().join(format!("{name}.toml"))).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn interval() -> viscolab::domain::DomainSpec {
    make_domain(Geometry::Interval { lo: 0.0, hi: 1.0 }).unwrap()
}

fn c1_operator_axioms() -> Outcome {
    let mut ops = Vec::new();
    for alpha in [-0.5, 0.0, 1.0, 2.0] {
        ops.push(OperatorSpec::trace_with_power(alpha, 0.0).unwrap());
        ops.push(OperatorSpec::trace_with_power(alpha, 1.0).unwrap());
        ops.push(OperatorSpec::pucci_plus(0.5, 2.0, alpha).unwrap());
        ops.push(OperatorSpec::pucci_minus(0.5, 2.0, alpha).unwrap());
        ops.push(OperatorSpec::p_laplacian(alpha).unwrap());
    }
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    let mut checks = 0;
    for (k, op) in ops.iter().enumerate() {
        for rep in check_all(op, 10_000, 1000 + k as u64) {
            checks += 1;
            worst = worst.max(rep.max_violation);
            if !rep.pass() || rep.samples_tested < 10_000 {
                failed.push(format!("{}:{}:{}", op.kind.name(), rep.hypothesis, rep.label));
            }
        }
    }
    ensure(failed.is_empty(), format!("{checks} suites x 1e4 samples, max violation {worst:.2e}, failures {failed:?}"))
}

/// Log-grid scan followed by golden-section refinement in `log κ`.
fn brute_kappa(p: f64, q: f64, cq: f64) -> f64 {
    let g = |lk: f64| {
        let k = lk.exp();
        k + p / (cq.powf(q) * k.powf(q - 1.0))
    };
    let (lo, hi, n) = (-30.0f64, 30.0f64, 6000);
    let mut best = 0;
    for i in 0..=n {
        if g(lo + (hi - lo) * i as f64 / n as f64) < g(lo + (hi - lo) * best as f64 / n as f64) {
            best = i;
        }
    }
    let h = (hi - lo) / n as f64;
    let (mut a, mut b) = (lo + h * (best as f64 - 1.0), lo + h * (best as f64 + 1.0));
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if g(c) < g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    g(0.5 * (a + b))
}

fn c2_kappa() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut worst_exact = 0.0f64;
    for _ in 0..1000 {
        let p: f64 = 100.0 * (1.0 - rng.gen::<f64>());
        let q: f64 = 1.0 + 5.0 * (1.0 - rng.gen::<f64>());
        for variant in [KappaVariant::ExactCq, KappaVariant::PaperCq] {
            let (_, got) = kappa_infimum(p, q, variant).map_err(|e| e.to_string())?;
            let want = brute_kappa(p, q, variant.c_q(q));
            worst = worst.max(((got - want) / want).abs());
            if variant == KappaVariant::ExactCq {
                worst_exact = worst_exact.max(((got - p.powf(1.0 / q)) / p.powf(1.0 / q)).abs());
            }
        }
    }
    let (_, e2) = kappa_infimum(1.0, 2.0, KappaVariant::ExactCq).unwrap();
    let (_, p2) = kappa_infimum(1.0, 2.0, KappaVariant::PaperCq).unwrap();
    let (_, p3) = kappa_infimum(1.0, 3.0, KappaVariant::PaperCq).unwrap();
    ensure(
        worst <= 1e-6 && worst_exact <= 1e-10 && (e2 - p2).abs() <= 1e-12,
        format!("1000 (P,q) x 2 constants, max rel err vs brute force {worst:.2e}; exact constant gives P^(1/q) to {worst_exact:.1e}; printed constant at q=3 gives {p3:.6} P^(1/3)"),
    )
}

/// Branches of the whole-space profile, transcribed independently, with hand derivatives.
fn profile_branches(r: f64, alpha: f64) -> ((f64, f64, f64), (f64, f64, f64)) {
    if alpha >= 0.0 {
        let inner = (r * r, 2.0 * r, 2.0);
        let g = |s: f64| (s - 1.0) * (3.0 - 1.0 / s) + 1.0;
        let h = 1e-4 * r;
        let d1 = (g(r + h) - g(r - h)) / (2.0 * h);
        let d2 = (g(r + h) - 2.0 * g(r) + g(r - h)) / (h * h);
        let outer = (g(r), 3.0 - 1.0 / (r * r), 2.0 / (r * r * r));
        assert!((outer.1 - d1).abs() <= 1e-6 * (1.0 + d1.abs()) && (outer.2 - d2).abs() <= 1e-4 * (1.0 + d2.abs()));
        (inner, outer)
    } else {
        let q = q1_of(alpha);
        let inner = (r.powf(q), q * r.powf(q - 1.0), q * (q - 1.0) * r.powf(q - 2.0));
        let outer = (
            q * (1.0 + q) * r / 2.0 + q * (q - 1.0) / (2.0 * r) + 1.0 - q * q,
            q * (1.0 + q) / 2.0 - q * (q - 1.0) / (2.0 * r * r),
            q * (q - 1.0) / (r * r * r),
        );
        (inner, outer)
    }
}

fn c3_profile() -> Outcome {
    let mut worst_join = 0.0f64;
    let mut worst_lib = 0.0f64;
    for alpha in [-0.5, 0.0, 1.0, 2.0] {
        let (i, o) = profile_branches(1.0, alpha);
        worst_join = worst_join.max((i.0 - o.0).abs()).max((i.1 - o.1).abs()).max((i.2 - o.2).abs());
        for r in [0.05, 0.3, 0.7, 0.999, 1.0, 1.001, 1.5, 4.0, 40.0] {
            let (i, o) = profile_branches(r, alpha);
            let want = if r < 1.0 { i } else { o };
            let got = whole_space_profile(r, alpha);
            worst_lib = worst_lib.max((got.0 - want.0).abs()).max((got.1 - want.1).abs()).max((got.2 - want.2).abs());
        }
    }
    let at1 = whole_space_profile(1.0, 1.0);
    ensure(
        worst_join <= 1e-12 && worst_lib <= 1e-12 && (at1.0 - 1.0).abs() <= 1e-12 && (at1.1 - 2.0).abs() <= 1e-12 && (at1.2 - 2.0).abs() <= 1e-12,
        format!("branch mismatch at r=1 {worst_join:.1e}, library vs transcription {worst_lib:.1e}, (G,G',G'')(1)=({:.3},{:.3},{:.3}) for alpha>=0", at1.0, at1.1, at1.2),
    )
}

fn heat_error(dx: f64) -> f64 {
    let problem = ProblemSpec::new(
        OperatorSpec::trace_with_power(0.0, 0.0).unwrap(),
        interval(),
        0.1,
        ProblemParams::new(ScalarField::Sine { amplitude: 1.0, wavenumber: 1.0 }),
        dx,
    )
    .unwrap();
    let u = solve(&problem, dx, 1 << 20).unwrap();
    let last = u.last();
    u.grid
        .active
        .iter()
        .map(|&i| (last.values[i] - (-PI * PI * last.t).exp() * (PI * u.grid.coords(i)[0]).sin()).abs())
        .fold(0.0, f64::max)
}

fn c4_heat() -> Outcome {
    let dxs = [1.0 / 32.0, 1.0 / 64.0];
    let errs: Vec<f64> = dxs.iter().map(|&dx| heat_error(dx)).collect();
    ensure(
        errs[0] <= 5.0 * dxs[0] && errs[1] <= 5.0 * dxs[1] && errs[1] < errs[0],
        format!("max error {:.3e} (dx=1/32), {:.3e} (dx=1/64)", errs[0], errs[1]),
    )
}

fn radial_residual(alpha: f64, n: usize, dx: f64) -> f64 {
    let beta: f64 = (alpha + 2.0) / (alpha + 1.0);
    let f = -beta.powf(alpha + 1.0) * (beta + n as f64 - 2.0);
    let dom = make_domain(Geometry::Box { lo: vec![-1.0; n], hi: vec![1.0; n] }).unwrap();
    let psi = ScalarField::AbsPower { amplitude: 1.0, center: vec![], exponent: beta };
    let problem = ProblemSpec::new(
        OperatorSpec::trace_with_power(alpha, 0.0).unwrap(),
        dom.clone(),
        1.0,
        ProblemParams::new(psi).source(ScalarField::Constant { value: f }),
        dx * dx,
    )
    .unwrap();
    let grid = Grid::new(dom, dx, 1.0, 1.0).unwrap();
    let u = SpaceTimeField::from_fn(&grid, &[1], problem.eps, "profile", |x, _| norm(x).powf(beta));
    (0..grid.len())
        .filter(|&i| grid.classes[i] == NodeClass::Interior && norm(&grid.coords(i)) >= 0.25)
        .map(|i| residual(&u, &problem, i, 1).unwrap().abs())
        .fold(0.0, f64::max)
}

fn c5_radial() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (alpha, n) in [(1.0, 1usize), (1.0, 2), (-0.5, 1), (-0.5, 2)] {
        let r: Vec<f64> = [16.0, 32.0, 64.0].iter().map(|m| radial_residual(alpha, n, 1.0 / m)).collect();
        ok &= r[1] < r[0] && r[2] < r[1];
        parts.push(format!("a={alpha},N={n}: {:.1e}>{:.1e}>{:.1e}", r[0], r[1], r[2]));
    }
    ensure(ok, parts.join("; "))
}

fn random_pair(k: u64) -> (ProblemSpec, ProblemSpec, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(600 + k);
    let alpha = [-0.5, 0.0, 1.0, 2.0][rng.gen_range(0..4)];
    let op = match rng.gen_range(0..4) {
        0 => OperatorSpec::trace_with_power(alpha, rng.gen_range(0.0..1.0)).unwrap(),
        1 => OperatorSpec::pucci_plus(0.5, 1.5, alpha).unwrap(),
        2 => OperatorSpec::pucci_minus(0.5, 1.5, alpha).unwrap(),
        _ => OperatorSpec::p_laplacian(alpha).unwrap(),
    };
    let (dom, dx) = match k % 4 {
        0 | 1 => (interval(), 1.0 / 32.0),
        2 => (make_domain(Geometry::Box { lo: vec![0.0; 2], hi: vec![1.0; 2] }).unwrap(), 1.0 / 16.0),
        _ => {
            if rng.gen_bool(0.5) {
                (make_domain(Geometry::Ball { center: vec![0.5, 0.5], radius: 0.5 }).unwrap(), 1.0 / 16.0)
            } else {
                (make_domain(Geometry::LShape { side: 1.0 }).unwrap(), 1.0 / 16.0)
            }
        }
    };
    let dim = dom.dim;
    let psi1 = ScalarField::Fourier { amplitude: 1.0, modes: 3, seed: rng.gen(), max_frequency: 2.0 };
    let f1 = ScalarField::Fourier { amplitude: 0.5, modes: 2, seed: rng.gen(), max_frequency: 1.0 };
    let center: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    let psi2 = ScalarField::Sum {
        terms: vec![
            psi1.clone(),
            ScalarField::Constant { value: rng.gen_range(0.0..0.2) },
            ScalarField::AbsPower { amplitude: rng.gen_range(0.0..0.5), center, exponent: rng.gen_range(0.5..1.0) },
        ],
    };
    let f2 = ScalarField::Sum { terms: vec![f1.clone(), ScalarField::Constant { value: rng.gen_range(0.0..1.0) }] };
    let a = ProblemSpec::new(op.clone(), dom.clone(), 0.05, ProblemParams::new(psi1).source(f1).gamma(0.5), dx).unwrap();
    let b = ProblemSpec::new(op, dom, 0.05, ProblemParams::new(psi2).source(f2).gamma(0.5), dx).unwrap();
    (a, b, dx)
}

fn c6_comparison() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut bad = Vec::new();
    for k in 0..20 {
        let (a, b, dx) = random_pair(k);
        let (u1, u2) = solve_pair(&a, &b, dx, 4).map_err(|e| format!("pair {k}: {e}"))?;
        let r = compare(&u1, &u2, 1e-10).map_err(|e| e.to_string())?;
        worst = worst.max(r.max_crossing);
        if !r.pass {
            bad.push(format!("{k}:{}:{}d:{:.1e}", a.operator.kind.name(), a.dim(), r.max_crossing));
        }
    }
    ensure(bad.is_empty(), format!("20 ordered pairs (10 in 1-D, 10 in 2-D), max(u1-u2) {worst:.2e}, failures {bad:?}"))
}

const SOLVE_CONFIGS: &[&str] = &[
    "heat",
    "radial_alpha1",
    "whole_space_zero",
    "p_laplacian_alpha2",
    "lipschitz",
    "holder_half",
    "singular",
    "degenerate",
    "pucci_square",
    "compare",
    "perron_heat",
    "sweep_dx",
    "sweep_alpha",
    "sweep_eps",
];

/// Smallest tolerance at which both envelope certificates pass.
fn envelope_tolerance(cfg: &RunConfig) -> f64 {
    let problem = cfg.problem().unwrap();
    let (grid, _) = make_grid(&problem, cfg.numerics.dx).unwrap();
    let env = parabolic_envelope_with(&problem, &problem_exponents(&problem).unwrap(), Some(&grid), 0, &cfg.envelope).unwrap();
    let ef = env.evaluate(&grid, &recorded_steps(grid.n_steps, 1), &problem.hash());
    let (w, v) = certify_envelope(&problem, &ef, 0.0).unwrap();
    (-w.worst_residual).max(v.worst_residual).max(0.0)
}

fn c7_envelopes() -> Outcome {
    let mut bad = Vec::new();
    for name in SOLVE_CONFIGS {
        let (_, s) = run_solve(&load(name)).map_err(|e| format!("{name}: {e}"))?;
        if !(s.lower_crossing <= 0.0 && s.upper_crossing <= 0.0 && s.cert_upper_envelope && s.cert_lower_envelope) {
            bad.push(format!("{name}: V-u {:.1e} u-W {:.1e} W {} V {}", s.lower_crossing, s.upper_crossing, s.cert_upper_envelope, s.cert_lower_envelope));
        }
    }
    let dxs = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let mut taus = Vec::new();
    for name in ["heat", "lipschitz", "holder_half", "singular", "degenerate"] {
        let cfg = load(name);
        for &dx in &dxs {
            taus.push((dx, envelope_tolerance(&cfg.with_axis(SweepAxis::Dx, dx))));
        }
    }
    let max_tau = taus.iter().map(|t| t.1).fold(0.0, f64::max);
    let rate = if max_tau == 0.0 {
        "required tolerance 0 at every dx, so c = 0 and r is unconstrained".to_string()
    } else {
        let pts: Vec<(f64, f64)> = taus.iter().filter(|t| t.1 > 0.0).copied().collect();
        match fit_power_law(&pts) {
            Some((r, c, _)) if r > 0.0 => format!("tolerance fit c={c:.2e}, r={r:.2}"),
            _ => {
                bad.push(format!("tolerance does not vanish under refinement: {taus:?}"));
                String::new()
            }
        }
    };
    ensure(bad.is_empty(), format!("{} configs sandwiched at tol 0 with certified envelopes; {rate}; {bad:?}", SOLVE_CONFIGS.len()))
}

const INSTANCES: &[&str] = &["lipschitz", "holder_half", "singular", "degenerate"];

fn c8_attainment() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in INSTANCES {
        let cfg = load(name);
        let mut prev = f64::INFINITY;
        let mut line = format!("{name}:");
        for dx in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
            let (_, s) = run_solve(&cfg.with_axis(SweepAxis::Dx, dx)).map_err(|e| e.to_string())?;
            let row = s.row(Axis::BoundaryAttainment).unwrap();
            let est = row.estimate.as_ref().map_err(|e| format!("{name} dx={dx}: {e}"))?;
            let deficit = est.deficit();
            ok &= row.pass() && deficit <= prev + 1e-12;
            prev = deficit;
            line.push_str(&format!(" {:.3}", est.fitted_exponent));
        }
        parts.push(format!("{line} (pred {:.3})", load(name).problem().map(|p| problem_exponents(&p).unwrap().attain).unwrap()));
    }
    ensure(ok, format!("fitted beta at dx=1/16,1/32,1/64: {}", parts.join("; ")))
}

fn synthetic_self_test() -> Result<String, String> {
    let mut parts = Vec::new();
    let mut ok = true;
    for dx in [1.0 / 32.0, 1.0 / 64.0] {
        let grid = Grid::new(interval(), dx, 0.1, dx * dx).unwrap();
        let steps = recorded_steps(grid.n_steps, 1);
        let u = SpaceTimeField::from_fn(&grid, &steps, dx, "synthetic", |x, t| (x[0] - 0.5).abs().sqrt() + t);
        let sp = holder_fit(&u, Axis::Space, RegionSel::Interior, None, 9).map_err(|e| e.to_string())?;
        let tm = holder_fit(&u, Axis::Time, RegionSel::Interior, None, 9).map_err(|e| e.to_string())?;
        ok &= (sp.fitted_exponent - 0.5).abs() <= 0.02 && (tm.fitted_exponent - 1.0).abs() <= 0.02;
        parts.push(format!("{:.3}/{:.3}", sp.fitted_exponent, tm.fitted_exponent));
    }
    ensure(ok, format!("synthetic |x-1/2|^(1/2)+t recovers {}", parts.join(", ")))
}

fn c9_holder() -> Outcome {
    let self_test = synthetic_self_test();
    let mut ok = self_test.is_ok();
    let mut parts = vec![self_test.unwrap_or_else(|e| e)];
    for name in INSTANCES {
        let cfg = load(name);
        let mut line = format!("{name}:");
        for dx in [1.0 / 32.0, 1.0 / 64.0] {
            let (_, s) = run_solve(&cfg.with_axis(SweepAxis::Dx, dx)).map_err(|e| e.to_string())?;
            for axis in [Axis::Space, Axis::Time] {
                let row = s.row(axis).unwrap();
                ok &= row.estimate.is_ok() && row.pass();
                line.push_str(&format!(" {}={:.3}/{:.3}", axis.name(), row.fitted(), row.predicted));
            }
        }
        parts.push(line);
    }
    ensure(ok, parts.join("; "))
}

fn c10_perron() -> Outcome {
    let cfg = load("perron_heat");
    let problem = cfg.problem().unwrap();
    let dx = cfg.numerics.dx;
    let (grid, _) = make_grid(&problem, dx).unwrap();
    let env = parabolic_envelope_with(&problem, &problem_exponents(&problem).unwrap(), Some(&grid), 0, &EnvelopeOptions::default()).unwrap();
    let opts = PerronOptions { max_sweeps: cfg.perron.max_sweeps, record_every: 8, ..Default::default() };
    let res = perron_iterate(&problem, &grid, &env, &opts).map_err(|e| e.to_string())?;
    let psi = problem.params.psi.compile(1);
    let direct = solve_on_grid(&problem, &grid, 8, &|x: &[f64], t: f64| psi.eval(x, t), None).unwrap();
    let gap = res.field.max_diff(&direct).unwrap();
    ensure(
        res.converged && res.monotone && res.within_bounds && gap <= 5.0 * dx,
        format!("sweeps {}, converged {}, monotone {}, within [V,W] {}, |perron - scheme| {gap:.1e} (dx={dx})", res.sweeps, res.converged, res.monotone, res.within_bounds),
    )
}

fn c11_time_shift() -> Outcome {
    let dx = 1.0 / 32.0;
    let mut worst = 0.0f64;
    for (k, op) in [OperatorSpec::p_laplacian(1.0).unwrap(), OperatorSpec::trace_with_power(-0.5, 0.0).unwrap(), OperatorSpec::pucci_plus(0.5, 1.5, 0.0).unwrap()]
        .into_iter()
        .enumerate()
    {
        let problem = ProblemSpec::new(op, interval(), 0.1, ProblemParams::new(ScalarField::Sine { amplitude: 1.0, wavenumber: 2.0 }), dx).unwrap();
        let u = solve(&problem, dx, 16 + k).unwrap();
        let g = &u.grid;
        for phi in [
            ScalarField::TimeLinear { rate: 2.0 },
            ScalarField::TimeSine { amplitude: 0.5, frequency: 30.0 },
            ScalarField::TimeQuadratic { coeff: -3.0 },
        ] {
            let shifted = u.map_values(|_, t, v| v + phi.eval(&[], t));
            for s in u.steps().into_iter().filter(|&s| s > 0) {
                let dphi = (phi.eval(&[], g.time(s)) - phi.eval(&[], g.time(s - 1))) / g.dt;
                for &i in &g.interior {
                    let d = residual(&shifted, &problem, i, s).unwrap() - residual(&u, &problem, i, s).unwrap();
                    worst = worst.max((d - dphi).abs());
                }
            }
        }
    }
    ensure(worst <= 1e-10, format!("3 operators x 3 shifts, max |dR - dphi| {worst:.2e}"))
}

fn csv_files(dir: &Path, out: &mut BTreeMap<String, Vec<u8>>, prefix: &str) {
    let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries {
        let name = format!("{prefix}{}", p.file_name().unwrap().to_string_lossy());
        if p.is_dir() {
            csv_files(&p, out, &format!("{name}/"));
        } else if name.ends_with(".csv") {
            out.insert(name, std::fs::read(&p).unwrap());
        } else if name.ends_with("manifest.txt") {
            let text = std::fs::read_to_string(&p).unwrap();
            let hash = text.lines().find(|l| l.starts_with("content_hash=")).unwrap_or("").to_string();
            out.insert(format!("{name}#hash"), hash.into_bytes());
        }
    }
}

fn command_for(name: &str) -> &'static str {
    match name {
        n if n.starts_with("sweep") => "sweep",
        "compare" => "compare",
        "perron_heat" => "perron",
        _ => "solve",
    }
}

fn c12_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut names: Vec<String> = std::fs::read_dir(configs_dir())
        .unwrap()
        .filter_map(|e| e.ok()?.path().file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    names.sort();
    let mut bad = Vec::new();
    let mut files = 0;
    for name in &names {
        let cfg = configs_dir().join(format!("{name}.toml"));
        let mut seen = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("{name}_{rep}"));
            let args = ["viscolab", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), command_for(name)];
            let code = cli::run(args.iter().map(std::ffi::OsString::from));
            let mut m = BTreeMap::new();
            csv_files(&out, &mut m, "");
            seen.push((code, m));
        }
        files += seen[0].1.len();
        if seen[0] != seen[1] || seen[0].1.is_empty() {
            bad.push(name.clone());
        }
    }
    ensure(bad.is_empty(), format!("{} configs run twice, {files} CSV files and hashes compared, mismatches {bad:?}", names.len()))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("operator axioms", c1_operator_axioms),
        ("kappa infimum", c2_kappa),
        ("whole-space profile", c3_profile),
        ("heat oracle", c4_heat),
        ("radial profile residual", c5_radial),
        ("discrete comparison", c6_comparison),
        ("certified envelopes", c7_envelopes),
        ("boundary attainment", c8_attainment),
        ("Hölder exponents", c9_holder),
        ("Perron iteration", c10_perron),
        ("time shift", c11_time_shift),
        ("determinism", c12_determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != k + 1) {
            continue;
        }
        let start = Instant::now();
        let res = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(d) => println!("criterion {:>2} {name}: PASS ({secs:.1}s) {d}", k + 1),
            Err(d) => {
                failures += 1;
                println!("criterion {:>2} {name}: FAIL ({secs:.1}s) {d}", k + 1)
            }
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
