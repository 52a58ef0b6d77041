use proptest::prelude::*;

use viscolab::barriers::{kappa_infimum, parabolic_envelope_with, problem_exponents, EnvelopeOptions, KappaVariant};
use viscolab::certify::{compare, perron_iterate, residual, PerronOptions};
use viscolab::domain::{make_domain, Geometry};
use viscolab::fields::{ScalarField, VectorField};
use viscolab::linalg::SymMat;
use viscolab::operators::OperatorSpec;
use viscolab::regularity::exponent_table;
use viscolab::scheme::{check_monotonicity, make_grid, solve, solve_pair, ProblemParams, ProblemSpec};

fn operator(kind: usize, alpha: f64) -> OperatorSpec {
    match kind {
        0 => OperatorSpec::trace_with_power(alpha, 1.0),
        1 => OperatorSpec::p_laplacian(alpha),
        2 => OperatorSpec::pucci_plus(0.5, 1.5, alpha),
        _ => OperatorSpec::pucci_minus(0.5, 1.5, alpha),
    }
    .unwrap()
}

fn sym(n: usize, v: &[f64]) -> SymMat {
    let mut m = SymMat::zeros(n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            m.set_sym(i, j, v[k]);
            k += 1;
        }
    }
    m
}

fn interval() -> viscolab::domain::DomainSpec {
    make_domain(Geometry::Interval { lo: 0.0, hi: 1.0 }).unwrap()
}

fn fourier(amplitude: f64, seed: u64) -> ScalarField {
    ScalarField::Fourier { amplitude, modes: 3, seed, max_frequency: 2.0 }
}

/// Brute minimum of `κ + P / (c κ^{q−1})` on a log grid refined by golden section.
fn brute_kappa(p: f64, q: f64, cq: f64) -> f64 {
    let g = |lk: f64| {
        let k = lk.exp();
        k + p / (cq.powf(q) * k.powf(q - 1.0))
    };
    let best = (0..=4000).map(|i| -20.0 + 40.0 * i as f64 / 4000.0).min_by(|a, b| g(*a).total_cmp(&g(*b))).unwrap();
    let (mut lo, mut hi) = (best - 0.01, best + 0.01);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..150 {
        let (a, b) = (hi - r * (hi - lo), lo + r * (hi - lo));
        if g(a) < g(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    g(0.5 * (lo + hi))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operators_are_homogeneous_and_elliptic(
        kind in 0usize..4,
        alpha in prop::sample::select(vec![-0.5, 0.0, 1.0, 2.0]),
        n in 1usize..4,
        x in prop::collection::vec(-1.0f64..1.0, 3),
        p in prop::collection::vec(-2.0f64..2.0, 3),
        xm in prop::collection::vec(-2.0f64..2.0, 6),
        pm in prop::collection::vec(-1.0f64..1.0, 3),
        t in 0.1f64..3.0,
        s in 0.1f64..3.0,
    ) {
        let op = operator(kind, alpha);
        let (x, p) = (&x[..n], &p[..n]);
        prop_assume!(viscolab::linalg::norm(p) > 1e-3);
        let m = sym(n, &xm);
        let base = op.eval(x, p, &m).unwrap();
        let tp: Vec<f64> = p.iter().map(|v| t * v).collect();
        let scaled = op.eval(x, &tp, &m.scale(s)).unwrap();
        prop_assert!((scaled - t.powf(alpha) * s * base).abs() <= 1e-9 * (1.0 + scaled.abs()));
        let psd = SymMat::outer(&pm[..n]);
        let up = op.eval(x, p, &m.add(&psd)).unwrap();
        prop_assert!(up >= base - 1e-9 * (1.0 + base.abs()));
    }

    #[test]
    fn kappa_matches_brute_force(p in 0.01f64..100.0, q in 1.05f64..6.0, exact in any::<bool>()) {
        let variant = if exact { KappaVariant::ExactCq } else { KappaVariant::PaperCq };
        let (_, got) = kappa_infimum(p, q, variant).unwrap();
        let want = brute_kappa(p, q, variant.c_q(q));
        prop_assert!(((got - want) / want).abs() <= 1e-8, "{got} {want}");
        if exact {
            prop_assert!((got / p.powf(1.0 / q) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn exponent_table_is_ordered(
        alpha in -0.9f64..3.0,
        gamma in 0.05f64..=1.0,
        gamma_f in 0.05f64..=1.0,
    ) {
        for e in exponent_table(&[alpha], &[gamma], &[gamma_f]).unwrap() {
            prop_assert!(e.gamma_star <= e.gamma_f && e.gamma_star <= e.attain);
            prop_assert!(e.q1 >= 2.0 && e.q >= e.q1);
            prop_assert!(e.attain > 0.0 && e.attain <= 0.5 + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ordered_data_give_ordered_solutions(
        kind in 0usize..4,
        alpha in prop::sample::select(vec![-0.5, 0.0, 1.0]),
        seed in 0u64..1000,
        lift in 0.0f64..0.3,
        push in 0.0f64..1.0,
    ) {
        let dx = 1.0 / 16.0;
        let p1 = ProblemParams::new(fourier(1.0, seed)).source(fourier(0.5, seed + 1));
        let p2 = ProblemParams::new(ScalarField::Sum { terms: vec![fourier(1.0, seed), ScalarField::Constant { value: lift }] })
            .source(ScalarField::Sum { terms: vec![fourier(0.5, seed + 1), ScalarField::Constant { value: push }] });
        let a = ProblemSpec::new(operator(kind, alpha), interval(), 0.05, p1, dx).unwrap();
        let b = ProblemSpec::new(operator(kind, alpha), interval(), 0.05, p2, dx).unwrap();
        let (u1, u2) = solve_pair(&a, &b, dx, 4).unwrap();
        let rep = compare(&u1, &u2, 1e-10).unwrap();
        prop_assert!(rep.pass, "{}", rep.max_crossing);
    }

    #[test]
    fn residual_shifts_with_the_source(seed in 0u64..1000, c in -2.0f64..2.0) {
        let dx = 1.0 / 16.0;
        let params = ProblemParams::new(fourier(1.0, seed)).source(fourier(0.5, seed + 1));
        let p = ProblemSpec::new(OperatorSpec::p_laplacian(1.0).unwrap(), interval(), 0.02, params.clone(), dx).unwrap();
        let shifted = p.with_params(params.clone().source(ScalarField::Sum { terms: vec![params.f.clone(), ScalarField::Constant { value: c }] })).unwrap();
        let u = solve(&p, dx, 1).unwrap();
        let step = u.last().step;
        for &i in &u.grid.interior {
            let r0 = residual(&u, &p, i, step).unwrap();
            let r1 = residual(&u, &shifted, i, step).unwrap();
            prop_assert!((r1 - (r0 - c)).abs() <= 1e-9 * (1.0 + r0.abs()));
        }
    }

    #[test]
    fn two_dimensional_update_is_monotone(
        kind in 0usize..4,
        alpha in prop::sample::select(vec![-0.5, 0.0, 1.0, 2.0]),
        seed in 0u64..1000,
        drift in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let dx = 1.0 / 16.0;
        let dom = make_domain(Geometry::Box { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] }).unwrap();
        let params = ProblemParams::new(fourier(1.0, seed)).drift(VectorField::Constant { value: drift });
        let p = ProblemSpec::new(operator(kind, alpha), dom, 0.05, params, dx).unwrap();
        let (grid, _) = make_grid(&p, dx).unwrap();
        let u: Vec<f64> = (0..grid.len()).map(|i| p.params.psi.eval(&grid.coords(i), 0.0)).collect();
        let rep = check_monotonicity(&p, &grid, &u, 0.0, 40, seed);
        prop_assert!(rep.pass(), "{rep:?}");
    }
}

#[test]
fn perron_sweeps_increase_inside_the_envelope() {
    let dx = 1.0 / 16.0;
    let problem = ProblemSpec::new(
        OperatorSpec::trace_with_power(0.0, 0.0).unwrap(),
        interval(),
        0.05,
        ProblemParams::new(ScalarField::AbsPower { amplitude: 1.0, center: vec![0.5], exponent: 1.0 }),
        dx,
    )
    .unwrap();
    let (grid, _) = make_grid(&problem, dx).unwrap();
    let env = parabolic_envelope_with(&problem, &problem_exponents(&problem).unwrap(), Some(&grid), 0, &EnvelopeOptions::default()).unwrap();
    let res = perron_iterate(&problem, &grid, &env, &PerronOptions { record_every: 4, ..Default::default() }).unwrap();
    assert!(res.converged && res.monotone && res.within_bounds);
}
