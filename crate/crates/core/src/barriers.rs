//! Closed-form exponents, the κ-infimum, radial barriers and the sub/super
//! envelopes `V ≤ u ≤ W` on bounded domains and on the whole space.
//!
//! The upper envelope is `W = min(W₁, W₂)`:
//! * `W₁(x,t) = min_z ψ(z,t) + C c̄ |x − z|^{γ_b}` over a boundary net, a
//!   lateral barrier whose radial profile is calibrated so that
//!   `F + h·∇|∇|^α ≤ −1` on the domain;
//! * `W₂(x,t) = min_y ψ(y,0) + min_κ g(κ; |x−y|, t) + rate·t` with
//!   `g = κ + P κ^{1−q} ρ(|x−y|) + (P κ^{1−q})^{1+α} K t`.
//!
//! `V` is the mirrored construction.

use crate::domain::{DomainSpec, Grid, NodeClass};
use crate::error::{Error, Result};
use crate::fields::{CompiledField, ScalarField};
use crate::linalg::{dist, SymMat};
use crate::operators::OperatorSpec;
use crate::scheme::{BoundaryData, ProblemSpec, Slice, SpaceTimeField};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentSet {
    pub alpha: f64,
    pub gamma: f64,
    pub gamma_f: f64,
    pub q1: f64,
    pub q: f64,
    /// `c_q` as written: `(q−1)^{q−1} + (q−1)^{(1−q)/q}`.
    pub c_q: f64,
    /// The constant `q (q−1)^{(1−q)/q}` that makes the κ-identity exact.
    pub c_q_exact: f64,
    pub gamma_star: f64,
    pub attain: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
}

pub fn q1_of(alpha: f64) -> f64 {
    2.0f64.max((alpha + 2.0) / (alpha + 1.0))
}

pub fn c_q_paper(q: f64) -> f64 {
    (q - 1.0).powf(q - 1.0) + (q - 1.0).powf((1.0 - q) / q)
}

pub fn c_q_exact(q: f64) -> f64 {
    q * (q - 1.0).powf((1.0 - q) / q)
}

/// Exponents and constants for the Hölder and attainment estimates.
/// `K₂ = (diam·|h|∞ + A(N + q₁ − 2)) · diam^{max(α,0)}`.
pub fn exponents(alpha: f64, gamma: f64, gamma_f: f64, domain: &DomainSpec, h_bound: f64, big_a: f64) -> Result<ExponentSet> {
    if !(alpha > -1.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be > -1, got {alpha}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) || !(gamma_f > 0.0 && gamma_f <= 1.0) {
        return Err(Error::InvalidArgument(format!("gamma, gamma_f must lie in (0, 1], got {gamma}, {gamma_f}")));
    }
    if !(h_bound >= 0.0) || !(big_a > 0.0) {
        return Err(Error::InvalidArgument("need |h| >= 0 and A > 0".into()));
    }
    let q1 = q1_of(alpha);
    let q = q1 / gamma;
    let attain = 1.0 / (q * (alpha + 1.0) - alpha);
    let d = domain.diam;
    let n = domain.dim as f64;
    let k2 = (d * h_bound + big_a * (n + q1 - 2.0)) * d.powf(alpha.max(0.0));
    Ok(ExponentSet {
        alpha,
        gamma,
        gamma_f,
        q1,
        q,
        c_q: c_q_paper(q),
        c_q_exact: c_q_exact(q),
        gamma_star: gamma_f.min(attain),
        attain,
        k2,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaVariant {
    PaperCq,
    #[default]
    ExactCq,
}

impl KappaVariant {
    pub fn c_q(self, q: f64) -> f64 {
        match self {
            KappaVariant::PaperCq => c_q_paper(q),
            KappaVariant::ExactCq => c_q_exact(q),
        }
    }
}

/// Minimizes `κ ↦ κ + P / (c_q^q κ^{q−1})` over `κ > 0`.
/// Returns `(κ*, value)` with `κ* = ((q−1)P/c_q^q)^{1/q}` and `value = κ* q/(q−1)`.
pub fn kappa_infimum(p: f64, q: f64, variant: KappaVariant) -> Result<(f64, f64)> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("P must be >= 0, got {p}")));
    }
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::InvalidArgument(format!("q must be > 1, got {q}")));
    }
    let cq = variant.c_q(q);
    let k = ((q - 1.0) * p / cq.powf(q)).powf(1.0 / q);
    Ok((k, k * q / (q - 1.0)))
}

/// Value and gradient/Hessian of `|x − c|^β`. The Hessian is
/// `β r^{β−2} (I + (β−2) e eᵀ)` with `e = (x − c)/r`.
pub fn radial_power(x: &[f64], center: &[f64], beta: f64) -> Result<(f64, Vec<f64>, SymMat)> {
    let r = dist(x, center);
    if r == 0.0 {
        return Err(Error::ZeroGradient);
    }
    let n = x.len();
    let e: Vec<f64> = x.iter().zip(center).map(|(a, b)| (a - b) / r).collect();
    let g: Vec<f64> = e.iter().map(|v| beta * r.powf(beta - 1.0) * v).collect();
    let s = beta * r.powf(beta - 2.0);
    let hess = SymMat::identity(n).add(&SymMat::outer(&e).scale(beta - 2.0)).scale(s);
    Ok((r.powf(beta), g, hess))
}

/// Eigenvalues (ascending) of `D²|x|^β` at `|x| = r` in dimension `n`:
/// `β r^{β−2}` with multiplicity `n−1` and `β(β−1) r^{β−2}` radially.
pub fn radial_power_eigenvalues(r: f64, beta: f64, n: usize) -> Vec<f64> {
    let s = beta * r.powf(beta - 2.0);
    let mut v = vec![s; n.saturating_sub(1)];
    v.push(s * (beta - 1.0));
    v.sort_by(f64::total_cmp);
    v
}

/// Radial barrier `W_z(x) = c̄ |x − z|^{γ_b}` at a boundary point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationaryBarrier {
    pub z: Vec<f64>,
    pub gamma_b: f64,
    pub c_under: f64,
    pub c_over: f64,
}

impl StationaryBarrier {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.c_over * dist(x, &self.z).powf(self.gamma_b)
    }

    pub fn derivatives(&self, x: &[f64]) -> Result<(f64, Vec<f64>, SymMat)> {
        let (v, g, h) = radial_power(x, &self.z, self.gamma_b)?;
        Ok((self.c_over * v, g.iter().map(|c| c * self.c_over).collect(), h.scale(self.c_over)))
    }

    /// `F(x, ∇W, D²W) + h·∇W |∇W|^α` at `x ≠ z`.
    pub fn operator_value(&self, op: &OperatorSpec, h: &[f64], x: &[f64]) -> Result<f64> {
        let (_, g, hess) = self.derivatives(x)?;
        let gn = crate::linalg::norm(&g);
        Ok(op.eval(x, &g, &hess)? + crate::linalg::dot(h, &g) * gn.powf(op.alpha))
    }
}

/// Radial barrier at `z ∈ ∂Ω`; the shipped realization uses `c̄ = c_over`,
/// so the sandwich holds with any `c_under ≤ c_over`.
pub fn stationary_barrier(domain: &DomainSpec, z: &[f64], gamma_b: f64, c_under: f64, c_over: f64) -> Result<StationaryBarrier> {
    if z.len() != domain.dim {
        return Err(Error::Dimension { expected: domain.dim, got: z.len() });
    }
    let d = domain.boundary_distance(z);
    if d.abs() > 1e-9 * domain.diam.max(1.0) {
        return Err(Error::NotOnBoundary(d));
    }
    if !(gamma_b > 0.0 && gamma_b < 1.0) {
        return Err(Error::InvalidArgument(format!("gamma_b must lie in (0, 1), got {gamma_b}")));
    }
    if !(c_under > 0.0 && c_under <= c_over) || !c_over.is_finite() {
        return Err(Error::InvalidArgument("need 0 < c_under <= c_over".into()));
    }
    Ok(StationaryBarrier { z: z.to_vec(), gamma_b, c_under, c_over })
}

/// Radial profile for the whole-space envelope, with its first two derivatives.
pub fn whole_space_profile(r: f64, alpha: f64) -> (f64, f64, f64) {
    if alpha >= 0.0 {
        if r < 1.0 {
            (r * r, 2.0 * r, 2.0)
        } else {
            ((r - 1.0) * (3.0 - 1.0 / r) + 1.0, 3.0 - 1.0 / (r * r), 2.0 / (r * r * r))
        }
    } else {
        let q1 = (alpha + 2.0) / (alpha + 1.0);
        if r < 1.0 {
            (r.powf(q1), q1 * r.powf(q1 - 1.0), q1 * (q1 - 1.0) * r.powf(q1 - 2.0))
        } else {
            (
                q1 * (1.0 + q1) * r / 2.0 + q1 * (q1 - 1.0) / (2.0 * r) + 1.0 - q1 * q1,
                q1 * (1.0 + q1) / 2.0 - q1 * (q1 - 1.0) / (2.0 * r * r),
                q1 * (q1 - 1.0) / (r * r * r),
            )
        }
    }
}

/// Spatial profile `ρ` in the `W₂` term.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Profile {
    /// `r^{q₁}` (bounded domains).
    Power(f64),
    /// `G(r)` from [`whole_space_profile`].
    WholeSpace(f64),
}

impl Profile {
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Profile::Power(q1) => r.powf(*q1),
            Profile::WholeSpace(alpha) => whole_space_profile(r, *alpha).0,
        }
    }
}

/// Calibrated lateral barrier `W₁`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LateralBarrier {
    pub gamma_b: f64,
    /// `c̄`, valid for both the super and the sub side.
    pub c_bar: f64,
    /// Multiplier `C` in `ψ(z,t) ± C c̄ |x−z|^{γ_b}`.
    pub multiplier: f64,
    pub net: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeOptions {
    #[serde(default)]
    pub variant: KappaVariant,
    /// Exponent of the lateral barrier; defaults to `min(γ, 0.75)`.
    #[serde(default)]
    pub gamma_b: Option<f64>,
    /// Largest number of `y` points in the `W₂` net.
    #[serde(default = "default_net")]
    pub max_net: usize,
}

fn default_net() -> usize {
    2500
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self { variant: KappaVariant::ExactCq, gamma_b: None, max_net: default_net() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BarrierEnvelope {
    pub exps: ExponentSet,
    pub variant: KappaVariant,
    pub c_psi: f64,
    pub psi_t: f64,
    pub f_sup: f64,
    pub h_sup: f64,
    /// `P = c^q / c_q^q`, with `c = c_ψ` (or `c_ψ + 2|ψ|∞` on the whole space).
    pub p_coeff: f64,
    /// Coefficient of `(Pκ^{1−q})^{1+α} t`.
    pub time_coeff: f64,
    pub profile: Profile,
    /// `W` grows by `upper_rate · t`, `V` by `lower_rate · t`.
    pub upper_rate: f64,
    pub lower_rate: f64,
    pub lateral: Option<LateralBarrier>,
    pub y_net: Vec<Vec<f64>>,
    pub dim: usize,
    #[serde(skip)]
    psi: Option<CompiledField>,
    pub psi_field: ScalarField,
    pub notes: Vec<String>,
}

/// Both envelopes on a grid.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeFields {
    pub lower: SpaceTimeField,
    pub upper: SpaceTimeField,
}

/// `min_κ κ + a κ^{1−q} + b κ^{(1−q)(1+α)}` for `a, b ≥ 0`.
pub fn kappa_profile_min(a: f64, b: f64, q: f64, alpha: f64) -> f64 {
    if a <= 0.0 && b <= 0.0 {
        return 0.0;
    }
    let m = (q - 1.0) * (1.0 + alpha);
    // g'(κ) = 1 − (q−1) a κ^{−q} − m b κ^{−m−1}; the root lies in [lo, hi]
    let ca = (q - 1.0) * a;
    let cb = m * b;
    let rt = |c: f64, e: f64| if c > 0.0 { c.powf(1.0 / e) } else { 0.0 };
    let mut lo = rt(ca, q).max(rt(cb, m + 1.0));
    let mut hi = rt(2.0 * ca, q).max(rt(2.0 * cb, m + 1.0));
    let gp = |k: f64| 1.0 - ca * k.powf(-q) - cb * k.powf(-m - 1.0);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if !(mid > lo && mid < hi) {
            break;
        }
        if gp(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let g = |k: f64| k + a * k.powf(1.0 - q) + b * k.powf(-m);
    g(lo).min(g(hi))
}

/// At `t = 0` both envelopes equal `ψ(·, 0)`; a Hölder inequality that is
/// tight along a ray can leave them on the wrong side of `ψ` by rounding.
fn snap_to_data(p: f64, v: &mut f64, w: &mut f64) {
    let tol = 1e-12 * (1.0 + p.abs());
    if *w < p && p - *w <= tol {
        *w = p;
    }
    if *v > p && *v - p <= tol {
        *v = p;
    }
}

impl BarrierEnvelope {
    fn psi(&self) -> CompiledField {
        self.psi.clone().unwrap_or_else(|| self.psi_field.compile(self.dim))
    }

    /// `min_κ g(κ; r, t)`.
    pub fn spatial_term(&self, r: f64, t: f64) -> f64 {
        let q = self.exps.q;
        let rho = self.profile.eval(r);
        if t == 0.0 {
            let a = self.p_coeff * rho;
            // closed form of the κ-infimum at t = 0
            let cq = self.variant.c_q(q);
            return kappa_infimum(a * cq.powf(q), q, self.variant).map(|v| v.1).unwrap_or(f64::INFINITY);
        }
        let b = self.p_coeff.powf(1.0 + self.exps.alpha) * self.time_coeff * t;
        kappa_profile_min(self.p_coeff * rho, b, q, self.exps.alpha)
    }

    fn lateral_terms(&self, x: &[f64], psi_net: &[f64], upper: bool) -> f64 {
        let lat = self.lateral.as_ref().expect("lateral barrier present");
        let s = lat.multiplier * lat.c_bar;
        let mut best = if upper { f64::INFINITY } else { f64::NEG_INFINITY };
        for (z, pz) in lat.net.iter().zip(psi_net) {
            let w = s * dist(x, z).powf(lat.gamma_b);
            if upper {
                best = best.min(pz + w);
            } else {
                best = best.max(pz - w);
            }
        }
        best
    }

    /// `W(x, t)`.
    pub fn upper(&self, x: &[f64], t: f64) -> f64 {
        self.point(x, t).1
    }

    /// `V(x, t)`.
    pub fn lower(&self, x: &[f64], t: f64) -> f64 {
        self.point(x, t).0
    }

    /// `(V, W)` at one point, by direct minimization over the nets.
    pub fn point(&self, x: &[f64], t: f64) -> (f64, f64) {
        let psi = self.psi();
        let mut w2 = f64::INFINITY;
        let mut v2 = f64::NEG_INFINITY;
        for y in &self.y_net {
            let py = psi.eval(y, 0.0);
            let g = self.spatial_term(dist(x, y), t);
            w2 = w2.min(py + g);
            v2 = v2.max(py - g);
        }
        let (mut v, mut w) = (v2 + self.lower_rate * t, w2 + self.upper_rate * t);
        if let Some(lat) = &self.lateral {
            let pz: Vec<f64> = lat.net.iter().map(|z| psi.eval(z, t)).collect();
            w = w.min(self.lateral_terms(x, &pz, true));
            v = v.max(self.lateral_terms(x, &pz, false));
        }
        if t == 0.0 {
            snap_to_data(psi.eval(x, 0.0), &mut v, &mut w);
        }
        (v, w)
    }

    /// `(V, W)` at `nodes` of `grid` at time `t`. When the `y` net lies on the
    /// grid lattice the κ-minimization is tabulated by integer offset.
    pub fn level(&self, grid: &Grid, nodes: &[usize], t: f64) -> (Vec<f64>, Vec<f64>) {
        let n = grid.dim();
        let psi = self.psi();
        let lattice: Option<Vec<Vec<usize>>> = self
            .y_net
            .iter()
            .map(|y| {
                (0..n)
                    .map(|k| {
                        let v = (y[k] - grid.lo[k]) / grid.h[k];
                        let r = v.round();
                        ((v - r).abs() < 1e-9 && r >= 0.0 && (r as usize) < grid.counts[k]).then_some(r as usize)
                    })
                    .collect::<Option<Vec<usize>>>()
            })
            .collect();
        let psi_y: Vec<f64> = self.y_net.iter().map(|y| psi.eval(y, 0.0)).collect();
        let pz: Vec<f64> = self.lateral.as_ref().map(|l| l.net.iter().map(|z| psi.eval(z, t)).collect()).unwrap_or_default();
        let mut strides = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * grid.counts[k + 1];
        }
        let table: Option<Vec<f64>> = lattice.as_ref().map(|_| {
            let total: usize = grid.counts.iter().product();
            (0..total)
                .into_par_iter()
                .map(|i| {
                    let r2: f64 = (0..n)
                        .map(|k| {
                            let d = ((i / strides[k]) % grid.counts[k]) as f64 * grid.h[k];
                            d * d
                        })
                        .sum();
                    self.spatial_term(r2.sqrt(), t)
                })
                .collect()
        });
        let out: Vec<(f64, f64)> = nodes
            .par_iter()
            .map(|&i| {
                let x = grid.coords(i);
                let mut w2 = f64::INFINITY;
                let mut v2 = f64::NEG_INFINITY;
                match (&lattice, &table) {
                    (Some(lat), Some(tab)) => {
                        let xi = grid.multi_index(i);
                        for (yi, py) in lat.iter().zip(&psi_y) {
                            let mut off = 0;
                            for k in 0..n {
                                off += xi[k].abs_diff(yi[k]) * strides[k];
                            }
                            let g = tab[off];
                            w2 = w2.min(py + g);
                            v2 = v2.max(py - g);
                        }
                    }
                    _ => {
                        for (y, py) in self.y_net.iter().zip(&psi_y) {
                            let g = self.spatial_term(dist(&x, y), t);
                            w2 = w2.min(py + g);
                            v2 = v2.max(py - g);
                        }
                    }
                }
                let (mut v, mut w) = (v2 + self.lower_rate * t, w2 + self.upper_rate * t);
                if self.lateral.is_some() {
                    w = w.min(self.lateral_terms(&x, &pz, true));
                    v = v.max(self.lateral_terms(&x, &pz, false));
                }
                if t == 0.0 {
                    snap_to_data(psi.eval(&x, 0.0), &mut v, &mut w);
                }
                (v, w)
            })
            .collect();
        out.into_iter().unzip()
    }

    /// Evaluates `V` and `W` at the given steps (and the step before each).
    pub fn evaluate(&self, grid: &Grid, steps: &[usize], tag: &str) -> EnvelopeFields {
        let nodes = &grid.active;
        let full = |t: f64| -> (Vec<f64>, Vec<f64>) {
            let (v, w) = self.level(grid, nodes, t);
            let mut vf = vec![0.0; grid.len()];
            let mut wf = vec![0.0; grid.len()];
            for (k, &i) in nodes.iter().enumerate() {
                vf[i] = v[k];
                wf[i] = w[k];
            }
            (vf, wf)
        };
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for &s in steps {
            let (v, w) = full(grid.time(s));
            let (pv, pw) = if s > 0 {
                let (a, b) = full(grid.time(s - 1));
                (Some(a), Some(b))
            } else {
                (None, None)
            };
            lower.push(Slice { step: s, t: grid.time(s), values: v, prev: pv });
            upper.push(Slice { step: s, t: grid.time(s), values: w, prev: pw });
        }
        let mk = |slices| SpaceTimeField { grid: grid.clone(), slices, eps: 0.0, problem_hash: tag.to_string() };
        EnvelopeFields { lower: mk(lower), upper: mk(upper) }
    }

    /// Every time level `0..=n_steps`, as `(V, W)` full-grid vectors.
    pub fn all_levels(&self, grid: &Grid) -> Vec<(Vec<f64>, Vec<f64>)> {
        (0..=grid.n_steps)
            .map(|s| {
                let (v, w) = self.level(grid, &grid.active, grid.time(s));
                let mut vf = vec![0.0; grid.len()];
                let mut wf = vec![0.0; grid.len()];
                for (k, &i) in grid.active.iter().enumerate() {
                    vf[i] = v[k];
                    wf[i] = w[k];
                }
                (vf, wf)
            })
            .collect()
    }
}

/// `F(e, X)` maximized over the coefficient range of the operator.
fn worst_value(problem: &ProblemSpec, p: &[f64], x: &SymMat) -> f64 {
    let mut op = problem.operator.clone();
    op.x_modulus_scale = 0.0;
    let origin = vec![0.0; p.len()];
    let v = op.eval(&origin, p, x).unwrap_or(f64::NAN);
    let (cmin, cmax) = problem.coefficient_range();
    (cmin * v).max(cmax * v)
}

/// Calibrates `c̄` so that `c̄ |x−z|^{γ_b}` satisfies `F + h·∇|∇|^α ≤ −1` and
/// its negative the mirrored inequality, for `|x − z| ≤ R`. `None` when the
/// radial profile has the wrong sign for this operator and dimension.
pub fn calibrate_lateral(problem: &ProblemSpec, gamma_b: f64, reach: f64) -> Option<f64> {
    let n = problem.dim();
    let alpha = problem.alpha();
    let mut e = vec![0.0; n];
    e[0] = 1.0;
    let p: Vec<f64> = e.iter().map(|v| v * gamma_b).collect();
    let x = SymMat::identity(n).add(&SymMat::outer(&e).scale(gamma_b - 2.0)).scale(gamma_b);
    let f_super = worst_value(problem, &p, &x);
    let neg_p: Vec<f64> = p.iter().map(|v| -v).collect();
    let f_sub = worst_value_neg(problem, &neg_p, &x.scale(-1.0));
    let drift = problem.constants.h_sup * gamma_b.powf(1.0 + alpha);
    let expo = (gamma_b - 1.0) * (1.0 + alpha);
    let side = |fv: f64| -> Option<f64> {
        let margin = -fv / reach - drift;
        if !(margin > 0.0) || !margin.is_finite() {
            return None;
        }
        Some((1.0 / (reach.powf(expo) * margin)).powf(1.0 / (1.0 + alpha)))
    };
    Some(side(f_super)?.max(side(f_sub)?))
}

/// `−F(−p, −X)` maximized over the coefficient range.
fn worst_value_neg(problem: &ProblemSpec, p: &[f64], x: &SymMat) -> f64 {
    let mut op = problem.operator.clone();
    op.x_modulus_scale = 0.0;
    let origin = vec![0.0; p.len()];
    let v = -op.eval(&origin, p, x).unwrap_or(f64::NAN);
    let (cmin, cmax) = problem.coefficient_range();
    (cmin * v).max(cmax * v)
}

fn lattice_net(problem: &ProblemSpec, grid: Option<&Grid>, max_net: usize) -> Vec<Vec<f64>> {
    match grid {
        Some(g) => {
            let n = g.dim();
            let per_axis = (max_net as f64).powf(1.0 / n as f64).floor().max(2.0) as usize;
            let stride: Vec<usize> = g.counts.iter().map(|c| c.div_ceil(per_axis).max(1)).collect();
            g.active
                .iter()
                .copied()
                .filter(|&i| {
                    let mi = g.multi_index(i);
                    if g.classes[i] == NodeClass::Lateral && stride.iter().all(|s| *s == 1) {
                        return true;
                    }
                    mi.iter().zip(&stride).all(|(m, s)| m % s == 0)
                })
                .map(|i| g.coords(i))
                .collect()
        }
        None => {
            let (lo, hi) = problem.domain.bounding_box();
            let n = lo.len();
            let per_axis = (max_net as f64).powf(1.0 / n as f64).floor().max(2.0) as usize;
            let total = per_axis.pow(n as u32);
            (0..total)
                .map(|mut c| {
                    (0..n)
                        .map(|k| {
                            let j = c % per_axis;
                            c /= per_axis;
                            lo[k] + (hi[k] - lo[k]) * j as f64 / (per_axis - 1) as f64
                        })
                        .collect::<Vec<f64>>()
                })
                .filter(|x| problem.domain.contains_closed(x))
                .collect()
        }
    }
}

/// Envelope `V ≤ u ≤ W` for the bounded-domain problem, with nets taken
/// from `grid` when given (lateral nodes serve as barrier centers).
pub fn parabolic_envelope_with(problem: &ProblemSpec, exps: &ExponentSet, grid: Option<&Grid>, boundary_samples: usize, opts: &EnvelopeOptions) -> Result<BarrierEnvelope> {
    if problem.whole_space {
        return Err(Error::InvalidProblem("use whole_space_envelope for whole-space problems".into()));
    }
    let c = &problem.constants;
    for (name, v) in [("f_sup", c.f_sup), ("c_psi", c.c_psi), ("psi_t", c.psi_t)] {
        if !v.is_finite() {
            return Err(Error::InvalidProblem(format!("{name} is not finite")));
        }
    }
    let alpha = problem.alpha();
    let q = exps.q;
    let cq = opts.variant.c_q(q);
    let p_coeff = c.c_psi.powf(q) / cq.powf(q);
    let time_coeff = exps.q1.powf(1.0 + alpha) * exps.k2;
    let rate = c.f_sup + c.psi_t;
    let mut notes = Vec::new();
    if opts.variant == KappaVariant::PaperCq && (q - 2.0).abs() > 1e-12 {
        notes.push("kappa variant paper_cq: W(x,0) may fall below psi(x,0) away from q = 2".to_string());
    }
    let gamma_b = opts.gamma_b.unwrap_or(c.gamma.min(0.75));
    if !(gamma_b > 0.0 && gamma_b < 1.0 && gamma_b <= c.gamma) {
        return Err(Error::InvalidArgument(format!("gamma_b must lie in (0, min(1, gamma)], got {gamma_b}")));
    }
    let reach = problem.domain.diam;
    let lateral = match calibrate_lateral(problem, gamma_b, reach) {
        Some(c_bar) => {
            let mult = c.c_psi * reach.max(1.0).powf(c.gamma - gamma_b) / c_bar + (c.psi_t + c.f_sup).powf(1.0 / (1.0 + alpha));
            let spacing = match grid {
                Some(g) => g.h.iter().cloned().fold(f64::INFINITY, f64::min),
                None => problem.domain.diam / (boundary_samples.max(2) as f64),
            };
            let mut net = problem.domain.boundary_net(spacing);
            if let Some(g) = grid {
                net.extend(g.active.iter().filter(|&&i| g.classes[i] == NodeClass::Lateral).map(|&i| g.coords(i)));
            }
            Some(LateralBarrier { gamma_b, c_bar, multiplier: mult, net })
        }
        None => {
            notes.push(format!(
                "lateral barrier |x-z|^{gamma_b} is not a supersolution for {} in dimension {}; W1/V1 omitted",
                problem.operator.kind,
                problem.dim()
            ));
            None
        }
    };
    let y_net = lattice_net(problem, grid, opts.max_net.max(4));
    Ok(BarrierEnvelope {
        exps: exps.clone(),
        variant: opts.variant,
        c_psi: c.c_psi,
        psi_t: c.psi_t,
        f_sup: c.f_sup,
        h_sup: c.h_sup,
        p_coeff,
        time_coeff,
        profile: Profile::Power(exps.q1),
        upper_rate: rate,
        lower_rate: -rate,
        lateral,
        y_net,
        dim: problem.dim(),
        psi: Some(problem.params.psi.compile(problem.dim())),
        psi_field: problem.params.psi.clone(),
        notes,
    })
}

/// Envelope with sample nets built from `boundary_samples` points per axis.
pub fn parabolic_envelope(problem: &ProblemSpec, exps: &ExponentSet, boundary_samples: usize) -> Result<BarrierEnvelope> {
    let opts = EnvelopeOptions { max_net: boundary_samples.max(2).pow(problem.dim() as u32), ..Default::default() };
    parabolic_envelope_with(problem, exps, None, boundary_samples, &opts)
}

/// Exponents of a problem with its own constants.
pub fn problem_exponents(problem: &ProblemSpec) -> Result<ExponentSet> {
    let (_, cmax) = problem.coefficient_range();
    exponents(
        problem.alpha(),
        problem.constants.gamma,
        problem.constants.gamma_f,
        &problem.domain,
        problem.constants.h_sup,
        problem.operator.big_a.max(cmax),
    )
}

/// `B ≥ sup_r F(∇G, D²G) + |h|∞ |G'|^{1+α}` (and the mirrored quantity),
/// maximized over `r ∈ (0, r_max]`.
pub fn whole_space_constant(problem: &ProblemSpec, r_max: f64) -> f64 {
    let n = problem.dim();
    let alpha = problem.alpha();
    let samples = 4000;
    let mut best = 0.0f64;
    for j in 1..=samples {
        // geometric near 0, uniform further out
        let r = if j <= samples / 2 {
            1e-6 * (1e6f64).powf(j as f64 / (samples / 2) as f64)
        } else {
            1.0 + (r_max.max(1.0) - 1.0) * (j - samples / 2) as f64 / (samples / 2) as f64
        };
        let (_, g1, g2) = whole_space_profile(r, alpha);
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        let p: Vec<f64> = e.iter().map(|v| v * g1).collect();
        let hess = SymMat::outer(&e).scale(g2).add(&SymMat::identity(n).sub(&SymMat::outer(&e)).scale(g1 / r));
        let drift = problem.constants.h_sup * g1.abs().powf(1.0 + alpha);
        let up = worst_value(problem, &p, &hess);
        let neg_p: Vec<f64> = p.iter().map(|v| -v).collect();
        let down = worst_value_neg(problem, &neg_p, &hess.scale(-1.0));
        best = best.max(up + drift).max(-down + drift);
    }
    best
}

/// Envelope for the problem on `ℝᴺ` (nets over the truncation box).
/// `f_range` gives the rates for `(V, W)`; [`whole_space_envelope`] uses `∓|f|∞`.
pub fn whole_space_envelope_with(problem: &ProblemSpec, exps: &ExponentSet, big_b: f64, f_range: (f64, f64), grid: Option<&Grid>, opts: &EnvelopeOptions) -> Result<BarrierEnvelope> {
    if !problem.params.psi.is_globally_bounded() {
        return Err(Error::InvalidProblem("psi must be bounded on R^N".into()));
    }
    let c = &problem.constants;
    let q = exps.q;
    let base = c.c_psi + 2.0 * c.psi_sup;
    let cq = opts.variant.c_q(q);
    Ok(BarrierEnvelope {
        exps: exps.clone(),
        variant: opts.variant,
        c_psi: c.c_psi,
        psi_t: 0.0,
        f_sup: c.f_sup,
        h_sup: c.h_sup,
        p_coeff: base.powf(q) / cq.powf(q),
        time_coeff: big_b,
        profile: Profile::WholeSpace(problem.alpha()),
        upper_rate: f_range.1,
        lower_rate: f_range.0,
        lateral: None,
        y_net: lattice_net(problem, grid, opts.max_net.max(4)),
        dim: problem.dim(),
        psi: Some(problem.params.psi.compile(problem.dim())),
        psi_field: problem.params.psi.clone(),
        notes: vec![],
    })
}

pub fn whole_space_envelope(problem: &ProblemSpec, exps: &ExponentSet, big_b: f64) -> Result<BarrierEnvelope> {
    let f = problem.constants.f_sup;
    whole_space_envelope_with(problem, exps, big_b, (-f, f), None, &EnvelopeOptions::default())
}

/// Far-field data `(V + W)/2` of the whole-space envelope built with the
/// range `[inf f, sup f]`.
#[derive(Clone, Debug)]
pub struct FarField {
    pub envelope: BarrierEnvelope,
}

impl FarField {
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        let (v, w) = self.envelope.point(x, t);
        0.5 * (v + w)
    }
}

impl BoundaryData for FarField {
    fn values(&self, grid: &Grid, nodes: &[usize], t: f64) -> Vec<f64> {
        let (v, w) = self.envelope.level(grid, nodes, t);
        v.iter().zip(&w).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

pub fn whole_space_far_field(problem: &ProblemSpec, grid: &Grid) -> Result<FarField> {
    let exps = problem_exponents(problem)?;
    let (lo, hi) = problem.domain.bounding_box();
    let b = whole_space_constant(problem, dist(&lo, &hi));
    let c = &problem.constants;
    let envelope = whole_space_envelope_with(problem, &exps, b, (c.f_min, c.f_max), Some(grid), &EnvelopeOptions::default())?;
    Ok(FarField { envelope })
}

/// The `W₁` calibration is dimension- and kind-specific; this reports it.
pub fn lateral_barrier_available(problem: &ProblemSpec, gamma_b: f64) -> bool {
    calibrate_lateral(problem, gamma_b, problem.domain.diam).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_domain, Geometry};

    fn unit() -> DomainSpec {
        make_domain(Geometry::Interval { lo: 0.0, hi: 1.0 }).unwrap()
    }

    #[test]
    fn exponent_examples() {
        let e = exponents(0.0, 0.5, 1.0, &unit(), 0.0, 1.0).unwrap();
        assert_eq!((e.q1, e.q, e.attain, e.gamma_star), (2.0, 4.0, 0.25, 0.25));
        let e = exponents(-0.5, 1.0, 1.0, &unit(), 0.0, 1.0).unwrap();
        assert!((e.q1 - 3.0).abs() < 1e-15 && (e.attain - 0.5).abs() < 1e-15);
        let sq = make_domain(Geometry::Box { lo: vec![0.0, 0.0], hi: vec![1.0 / 2f64.sqrt(); 2] }).unwrap();
        let e = exponents(0.0, 1.0, 1.0, &sq, 0.0, 1.0).unwrap();
        assert!((e.k2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_examples() {
        let (k, v) = kappa_infimum(4.0, 2.0, KappaVariant::PaperCq).unwrap();
        assert!((k - 1.0).abs() < 1e-14 && (v - 2.0).abs() < 1e-14);
        assert_eq!(kappa_infimum(0.0, 3.0, KappaVariant::ExactCq).unwrap(), (0.0, 0.0));
        for p in [1.0, 8.0, 27.0] {
            let v = kappa_infimum(p, 3.0, KappaVariant::ExactCq).unwrap().1;
            assert!((v - p.powf(1.0 / 3.0)).abs() < 1e-12);
            assert!(kappa_infimum(p, 3.0, KappaVariant::PaperCq).unwrap().1 < v);
        }
        assert!(kappa_infimum(-1.0, 2.0, KappaVariant::ExactCq).is_err());
    }

    #[test]
    fn profile_min_matches_closed_form_at_zero_time() {
        for &(a, q) in &[(1.0, 2.0), (3.5, 3.0), (0.2, 5.5)] {
            let direct = kappa_profile_min(a, 0.0, q, 0.0);
            let cq = c_q_exact(q);
            let closed = kappa_infimum(a * cq.powf(q), q, KappaVariant::ExactCq).unwrap().1;
            assert!((direct - closed).abs() < 1e-10 * closed, "{direct} {closed}");
        }
    }

    #[test]
    fn radial_hessian_example() {
        let ev = radial_power_eigenvalues(1.0, 0.5, 2);
        assert_eq!(ev, vec![-0.25, 0.5]);
        let (_, _, h) = radial_power(&[1.0, 0.0], &[0.0, 0.0], 0.5).unwrap();
        let mut e = h.eigenvalues();
        e.sort_by(f64::total_cmp);
        assert!((e[0] + 0.25).abs() < 1e-14 && (e[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn barrier_requires_boundary_point() {
        let d = unit();
        assert!(stationary_barrier(&d, &[0.5], 0.5, 1.0, 1.0).is_err());
        let b = stationary_barrier(&d, &[0.0], 0.5, 1.0, 1.0).unwrap();
        assert_eq!(b.eval(&[0.0]), 0.0);
        assert!(b.eval(&[0.3]) > 0.0);
    }

    #[test]
    fn whole_space_profile_junction() {
        for alpha in [-0.5, 0.0, 1.0, 2.0] {
            let below = whole_space_profile(1.0 - f64::EPSILON, alpha);
            let at = whole_space_profile(1.0, alpha);
            assert!((at.0 - 1.0).abs() < 1e-12);
            assert!((below.0 - at.0).abs() < 1e-12 && (below.1 - at.1).abs() < 1e-12 && (below.2 - at.2).abs() < 1e-12, "{alpha}");
        }
        let big = whole_space_profile(1e9, 0.0);
        assert!((big.0 / 1e9 - 3.0).abs() < 1e-8);
    }
}
