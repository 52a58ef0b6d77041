//! Discrete viscosity certification, comparison of grid functions, and the
//! discrete Perron iteration between the envelopes.
//!
//! A recorded step `n ≥ 1` is tested at interior nodes with the spatial
//! operator evaluated on level `n−1`, exactly as the scheme advances:
//! `residual = (u^n − u^{n−1})/dt − L_h[u^{n−1}] − f(·, t_{n−1})`.
//! Where the discrete gradient is at most `eps` and the node is a discrete
//! extremum of the right type, only the time branch is tested (`D_t u` against
//! `f`), together with the Pucci form of the test for `α = 0`.

use crate::barriers::BarrierEnvelope;
use crate::domain::{Grid, NodeClass};
use crate::error::{Error, Result};
use crate::operators::pucci_extremal;
use crate::scheme::{recorded_steps, Discretization, ProblemSpec, Slice, SpaceTimeField};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertKind {
    Sub,
    Super,
}

impl std::fmt::Display for CertKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CertKind::Sub => "sub",
            CertKind::Super => "super",
        })
    }
}

/// Note carried by every certificate.
pub const SIGN_NOTE: &str = "zero-gradient time branch tested as D_t u >= f (super) and D_t u <= f (sub); \
the supersolution bullet of the continuum definition is written with <=, read here as a sign typo";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViscosityCertificate {
    pub kind: CertKind,
    pub tol: f64,
    /// Max residual for `sub`, min residual for `super`, over all tests.
    pub worst_residual: f64,
    /// `(node, step)` of the worst test.
    pub worst_node: Option<(usize, usize)>,
    pub nodes_tested: usize,
    pub zero_gradient_nodes_tested: usize,
    pub time_branch_tests: usize,
    pub pucci_branch_tests: usize,
    pub pass: bool,
    pub note: String,
}

impl ViscosityCertificate {
    pub fn to_kv(&self, prefix: &str) -> String {
        let wn = self.worst_node.map(|(n, s)| format!("{n}@{s}")).unwrap_or_else(|| "none".into());
        format!(
            "{p}.kind={}\n{p}.tol={:e}\n{p}.worst_residual={:e}\n{p}.worst_node={wn}\n{p}.nodes_tested={}\n{p}.zero_gradient_nodes_tested={}\n{p}.time_branch_tests={}\n{p}.pucci_branch_tests={}\n{p}.pass={}\n{p}.note={}\n",
            self.kind,
            self.tol,
            self.worst_residual,
            self.nodes_tested,
            self.zero_gradient_nodes_tested,
            self.time_branch_tests,
            self.pucci_branch_tests,
            self.pass,
            self.note,
            p = prefix
        )
    }
}

fn slice_for(field: &SpaceTimeField, step: usize) -> Result<&Slice> {
    field.slice(step).ok_or_else(|| Error::InvalidArgument(format!("step {step} is not recorded")))
}

/// `D_t u − L_h u − f` at an interior node of a recorded step `≥ 1`.
pub fn residual(field: &SpaceTimeField, problem: &ProblemSpec, node: usize, step: usize) -> Result<f64> {
    let grid = &field.grid;
    if node >= grid.len() || grid.classes[node] != NodeClass::Interior {
        return Err(Error::NotInterior(node));
    }
    let s = slice_for(field, step)?;
    let prev = s.prev.as_ref().ok_or_else(|| Error::InvalidArgument("residual needs step >= 1".into()))?;
    let disc = Discretization::for_problem(problem, grid);
    let f = problem.params.f.compile(grid.dim());
    let t0 = grid.time(step - 1);
    Ok((s.values[node] - prev[node]) / grid.dt - disc.apply(prev, node, t0) - f.eval(disc.coords(node), t0))
}

/// Residuals at every interior node and recorded step `≥ 1`, as `(node, step, value)`.
pub fn residuals(field: &SpaceTimeField, problem: &ProblemSpec) -> Vec<(usize, usize, f64)> {
    let grid = &field.grid;
    let disc = Discretization::for_problem(problem, grid);
    let f = problem.params.f.compile(grid.dim());
    let mut out = Vec::new();
    for s in &field.slices {
        let Some(prev) = s.prev.as_ref() else { continue };
        let t0 = grid.time(s.step - 1);
        let r: Vec<(usize, usize, f64)> = grid
            .interior
            .par_iter()
            .map(|&i| (i, s.step, (s.values[i] - prev[i]) / grid.dt - disc.apply(prev, i, t0) - f.eval(disc.coords(i), t0)))
            .collect();
        out.extend(r);
    }
    out
}

fn stencil(grid: &Grid, i: usize) -> Vec<(usize, Vec<f64>)> {
    let n = grid.dim();
    (0..3usize.pow(n as u32))
        .filter_map(|mut c| {
            let mut j = i;
            let mut d = vec![0.0; n];
            let mut zero = true;
            for k in 0..n {
                let o = (c % 3) as isize - 1;
                c /= 3;
                if o != 0 {
                    zero = false;
                }
                j = grid.shift(j, k, o);
                d[k] = o as f64 * grid.h[k];
            }
            (!zero).then_some((j, d))
        })
        .collect()
}

#[derive(Default, Clone, Copy)]
struct Acc {
    worst: f64,
    at: Option<(usize, usize)>,
    tested: usize,
    zero: usize,
    time: usize,
    pucci: usize,
}

/// Certifies `field` as a discrete sub- or supersolution of `problem`.
pub fn certify(field: &SpaceTimeField, problem: &ProblemSpec, kind: CertKind, tol: f64) -> ViscosityCertificate {
    let grid = &field.grid;
    let disc = Discretization::for_problem(problem, grid);
    let f = problem.params.f.compile(grid.dim());
    let eps = problem.eps;
    let sign = match kind {
        CertKind::Sub => 1.0,
        CertKind::Super => -1.0,
    };
    let alpha_zero = problem.alpha() == 0.0;
    let (a, big_a) = {
        let (cmin, cmax) = problem.coefficient_range();
        (problem.operator.a.min(cmin), problem.operator.big_a.max(cmax))
    };
    let mut acc = Acc { worst: f64::NEG_INFINITY, ..Default::default() };
    for s in &field.slices {
        let Some(prev) = s.prev.as_ref() else { continue };
        let t0 = grid.time(s.step - 1);
        let parts: Vec<Acc> = grid
            .interior
            .par_iter()
            .map(|&i| {
                let mut local = Acc { worst: f64::NEG_INFINITY, tested: 1, ..Default::default() };
                let push = |v: f64, local: &mut Acc| {
                    // v is oriented so that larger is worse
                    if v > local.worst {
                        local.worst = v;
                        local.at = Some((i, s.step));
                    }
                };
                let x = disc.coords(i);
                let ev = disc.eval_node(prev, i, t0);
                let dtu = (s.values[i] - prev[i]) / grid.dt;
                let fx = f.eval(x, t0);
                let res = dtu - ev.total() - fx;
                if ev.grad_norm > eps {
                    push(sign * res, &mut local);
                    return local;
                }
                local.zero = 1;
                let st = stencil(grid, i);
                let u0 = prev[i];
                let extremum = st.iter().all(|(j, _)| sign * (prev[*j] - u0) <= 0.0);
                if !extremum {
                    push(sign * res, &mut local);
                    return local;
                }
                local.time = 1;
                push(sign * (dtu - fx), &mut local);
                if alpha_zero {
                    let m = &ev.hessian;
                    let touches = st.iter().all(|(j, d)| {
                        let quad = 0.5 * m.quad(d);
                        let slack = eps * crate::linalg::norm(d) + 1e-12 * (1.0 + u0.abs());
                        sign * (prev[*j] - u0 - quad) <= slack
                    });
                    if touches {
                        local.pucci = 1;
                        let pv = match kind {
                            CertKind::Super => pucci_extremal(m, a, big_a, false),
                            CertKind::Sub => pucci_extremal(m, a, big_a, true),
                        };
                        push(sign * (dtu - pv - fx), &mut local);
                    }
                }
                local
            })
            .collect();
        for p in parts {
            acc.tested += p.tested;
            acc.zero += p.zero;
            acc.time += p.time;
            acc.pucci += p.pucci;
            if p.worst > acc.worst {
                acc.worst = p.worst;
                acc.at = p.at;
            }
        }
    }
    let worst = if acc.at.is_none() { 0.0 } else { sign * acc.worst };
    let pass = match kind {
        CertKind::Sub => worst <= tol,
        CertKind::Super => worst >= -tol,
    };
    ViscosityCertificate {
        kind,
        tol,
        worst_residual: worst,
        worst_node: acc.at,
        nodes_tested: acc.tested,
        zero_gradient_nodes_tested: acc.zero,
        time_branch_tests: acc.time,
        pucci_branch_tests: acc.pucci,
        pass,
        note: SIGN_NOTE.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// `max (u − v)` over active nodes and common recorded steps.
    pub max_crossing: f64,
    /// Up to ten `(node, step, u − v)` with `u − v > tol`, largest first.
    pub crossing_nodes: Vec<(usize, usize, f64)>,
    pub nodes_compared: usize,
    pub tol: f64,
    pub pass: bool,
}

impl ComparisonReport {
    pub fn to_kv(&self, prefix: &str) -> String {
        format!(
            "{p}.max_crossing={:e}\n{p}.crossings={}\n{p}.nodes_compared={}\n{p}.tol={:e}\n{p}.pass={}\n",
            self.max_crossing,
            self.crossing_nodes.len(),
            self.nodes_compared,
            self.tol,
            self.pass,
            p = prefix
        )
    }
}

pub fn compare(u: &SpaceTimeField, v: &SpaceTimeField, tol: f64) -> Result<ComparisonReport> {
    if !u.grid.same_as(&v.grid) {
        return Err(Error::GridMismatch);
    }
    let mut max = f64::NEG_INFINITY;
    let mut cross = Vec::new();
    let mut count = 0;
    for s in &u.slices {
        let Some(o) = v.slice(s.step) else { continue };
        for &i in &u.grid.active {
            let d = s.values[i] - o.values[i];
            count += 1;
            if d > max {
                max = d;
            }
            if d > tol {
                cross.push((i, s.step, d));
            }
        }
    }
    if count == 0 {
        return Err(Error::InvalidArgument("fields share no recorded steps".into()));
    }
    cross.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.1, a.0).cmp(&(b.1, b.0))));
    cross.truncate(10);
    Ok(ComparisonReport { max_crossing: max, pass: max <= tol, crossing_nodes: cross, nodes_compared: count, tol })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerronOptions {
    pub max_sweeps: usize,
    /// Sweep-to-sweep change below which the iteration stops.
    pub tol: f64,
    /// Update level `n` from the already updated level `n−1`.
    pub gauss_seidel: bool,
    /// Tolerances for certifying `W` (super) and `V` (sub) before iterating.
    pub cert_tol: f64,
    pub record_every: usize,
}

impl Default for PerronOptions {
    fn default() -> Self {
        Self { max_sweeps: 100_000, tol: 1e-10, gauss_seidel: false, cert_tol: 1e-9, record_every: 1 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PerronResult {
    pub field: SpaceTimeField,
    pub sweeps: usize,
    pub converged: bool,
    /// Every sweep was pointwise `>=` the previous one.
    pub monotone: bool,
    /// Every iterate stayed in `[V, W]`.
    pub within_bounds: bool,
    /// Sweep-to-sweep max change.
    pub history: Vec<f64>,
    pub upper_certificate: ViscosityCertificate,
    pub lower_certificate: ViscosityCertificate,
}

/// Certificates of `W` as a supersolution with source `|f|∞` and of `V` as a
/// subsolution with source `−|f|∞`.
pub fn certify_envelope(problem: &ProblemSpec, fields: &crate::barriers::EnvelopeFields, tol: f64) -> Result<(ViscosityCertificate, ViscosityCertificate)> {
    let f = problem.constants.f_sup;
    certify_envelope_range(problem, fields, (-f, f), tol)
}

/// As [`certify_envelope`] with sources `f_max` for `W` and `f_min` for `V`.
pub fn certify_envelope_range(
    problem: &ProblemSpec,
    fields: &crate::barriers::EnvelopeFields,
    (fmin, fmax): (f64, f64),
    tol: f64,
) -> Result<(ViscosityCertificate, ViscosityCertificate)> {
    let up = problem.with_params(problem.params.clone().source(crate::fields::ScalarField::Constant { value: fmax }))?;
    let lo = problem.with_params(problem.params.clone().source(crate::fields::ScalarField::Constant { value: fmin }))?;
    Ok((certify(&fields.upper, &up, CertKind::Super, tol), certify(&fields.lower, &lo, CertKind::Sub, tol)))
}

/// Discrete Perron iteration: starting from `V`, each sweep sets level `n` to
/// `max(V, min(W, S(u^{n−1})))` at interior nodes, with `ψ` on the lateral
/// and initial nodes. Refuses envelopes that do not certify at `opts.cert_tol`.
pub fn perron_iterate(problem: &ProblemSpec, grid: &Grid, envelope: &BarrierEnvelope, opts: &PerronOptions) -> Result<PerronResult> {
    let levels = envelope.all_levels(grid);
    let all: Vec<usize> = (0..=grid.n_steps).collect();
    let as_field = |pick: &dyn Fn(&(Vec<f64>, Vec<f64>)) -> Vec<f64>| SpaceTimeField {
        grid: grid.clone(),
        slices: all
            .iter()
            .map(|&s| Slice { step: s, t: grid.time(s), values: pick(&levels[s]), prev: (s > 0).then(|| pick(&levels[s - 1])) })
            .collect(),
        eps: problem.eps,
        problem_hash: "envelope".into(),
    };
    let env_fields = crate::barriers::EnvelopeFields { lower: as_field(&|l| l.0.clone()), upper: as_field(&|l| l.1.clone()) };
    let (upper_certificate, lower_certificate) = certify_envelope(problem, &env_fields, opts.cert_tol)?;
    if !upper_certificate.pass || !lower_certificate.pass {
        return Err(Error::Uncertified(format!(
            "envelope not certified at tol {:e}: W worst {:e}, V worst {:e}",
            opts.cert_tol, upper_certificate.worst_residual, lower_certificate.worst_residual
        )));
    }
    let disc = Discretization::for_problem(problem, grid);
    let f = problem.params.f.compile(grid.dim());
    let psi = problem.params.psi.compile(grid.dim());
    let boundary: Vec<Vec<f64>> = (0..=grid.n_steps)
        .map(|s| {
            let t = grid.time(s);
            (0..grid.len())
                .map(|i| match grid.classes[i] {
                    NodeClass::Lateral => psi.eval(disc.coords(i), t),
                    NodeClass::Interior if s == 0 => psi.eval(disc.coords(i), 0.0),
                    _ => 0.0,
                })
                .collect()
        })
        .collect();
    let clip_fix = |s: usize, u: &mut Vec<f64>| {
        for i in 0..grid.len() {
            match grid.classes[i] {
                NodeClass::Interior if s > 0 => {}
                NodeClass::Outside => u[i] = 0.0,
                _ => u[i] = boundary[s][i],
            }
        }
    };
    let mut cur: Vec<Vec<f64>> = (0..=grid.n_steps)
        .map(|s| {
            let mut u = levels[s].0.clone();
            clip_fix(s, &mut u);
            u
        })
        .collect();
    let update = |s: usize, from: &[f64]| -> Vec<f64> {
        let t0 = grid.time(s - 1);
        let (v, w) = &levels[s];
        let mut new: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| match grid.classes[i] {
                NodeClass::Interior => {
                    let su = from[i] + grid.dt * (disc.apply(from, i, t0) + f.eval(disc.coords(i), t0));
                    v[i].max(w[i].min(su))
                }
                _ => 0.0,
            })
            .collect();
        clip_fix(s, &mut new);
        new
    };
    let mut monotone = true;
    let mut within = true;
    let mut history = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    let check = |u: &[f64], s: usize| -> bool {
        grid.interior.iter().all(|&i| u[i] >= levels[s].0[i] && u[i] <= levels[s].1[i]) || s == 0
    };
    for s in 1..=grid.n_steps {
        within &= check(&cur[s], s);
    }
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut change = 0.0f64;
        let mut next = cur.clone();
        for s in 1..=grid.n_steps {
            let src = if opts.gauss_seidel { &next[s - 1] } else { &cur[s - 1] };
            let new = update(s, src);
            for &i in &grid.interior {
                let d = new[i] - cur[s][i];
                if d < -1e-14 * (1.0 + cur[s][i].abs()) {
                    monotone = false;
                }
                change = change.max(d.abs());
            }
            within &= check(&new, s);
            next[s] = new;
        }
        cur = next;
        history.push(change);
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    let steps = recorded_steps(grid.n_steps, opts.record_every);
    let field = SpaceTimeField {
        grid: grid.clone(),
        slices: steps
            .iter()
            .map(|&s| Slice { step: s, t: grid.time(s), values: cur[s].clone(), prev: (s > 0).then(|| cur[s - 1].clone()) })
            .collect(),
        eps: problem.eps,
        problem_hash: problem.hash(),
    };
    Ok(PerronResult { field, sweeps, converged, monotone, within_bounds: within, history, upper_certificate, lower_certificate })
}
