use viscolab::barriers::{parabolic_envelope_with, problem_exponents, EnvelopeOptions};
use viscolab::domain::{make_domain, Geometry};
use viscolab::fields::ScalarField;
use viscolab::operators::OperatorSpec;
use viscolab::regularity::{holder_fit, lateral_modulus, Axis, RegionSel};
use viscolab::scheme::{solve, ProblemParams, ProblemSpec};

fn interval() -> viscolab::domain::DomainSpec {
    make_domain(Geometry::Interval { lo: 0.0, hi: 1.0 }).unwrap()
}

fn problem(op: OperatorSpec, psi: ScalarField, gamma: f64, dx: f64) -> ProblemSpec {
    ProblemSpec::new(op, interval(), 0.1, ProblemParams::new(psi).gamma(gamma), dx).unwrap()
}

#[test]
fn lateral_constant_is_within_the_barrier_bound() {
    let dx = 1.0 / 64.0;
    let psi = ScalarField::Sum {
        terms: vec![
            ScalarField::AbsPower { amplitude: 1.0, center: vec![0.5], exponent: 1.0 },
            ScalarField::TimeLinear { rate: 0.5 },
        ],
    };
    let p = problem(OperatorSpec::trace_with_power(0.0, 0.0).unwrap(), psi, 1.0, dx);
    let u = solve(&p, dx, 4).unwrap();
    let exps = problem_exponents(&p).unwrap();
    let env = parabolic_envelope_with(&p, &exps, Some(&u.grid), 0, &EnvelopeOptions::default()).unwrap();
    let lat = env.lateral.as_ref().expect("lateral barrier in 1-D");
    let c1 = lat.multiplier * lat.c_bar;
    let est = lateral_modulus(&u, &p).unwrap();
    assert!(est.fitted_constant <= 10.0 * c1, "fitted {} vs C1 {c1}", est.fitted_constant);
    assert!(est.pass(0.1), "{est:?}");
}

#[test]
fn rippled_half_holder_data_keep_their_exponent() {
    let dx = 1.0 / 64.0;
    let psi = ScalarField::Sum {
        terms: vec![
            ScalarField::AbsPower { amplitude: 1.0, center: vec![0.5], exponent: 0.5 },
            ScalarField::Fourier { amplitude: 0.05, modes: 4, seed: 11, max_frequency: 4.0 },
        ],
    };
    let p = problem(OperatorSpec::trace_with_power(0.0, 0.0).unwrap(), psi, 0.5, dx);
    let u = solve(&p, dx, 8).unwrap();
    let exps = problem_exponents(&p).unwrap();
    let est = holder_fit(&u, Axis::Space, RegionSel::All, Some(&exps), 5).unwrap();
    assert!(est.fitted_exponent >= 0.4, "{est:?}");
}

#[test]
fn constant_data_give_a_degenerate_fit() {
    let dx = 1.0 / 32.0;
    let p = problem(OperatorSpec::p_laplacian(1.0).unwrap(), ScalarField::Constant { value: 0.3 }, 1.0, dx);
    let u = solve(&p, dx, 4).unwrap();
    let exps = problem_exponents(&p).unwrap();
    for axis in [Axis::Space, Axis::Time] {
        let est = holder_fit(&u, axis, RegionSel::Interior, Some(&exps), 1).unwrap();
        assert!(est.degenerate, "{axis:?}: {est:?}");
        assert!(est.pass(0.1) && est.deficit() == 0.0);
    }
}
