//! Monotone explicit finite differences for
//! `u_t = F(x, ∇u, D²u) + h(x,t)·∇u |∇u|^α + f(x,t)` with Dirichlet data `ψ`.
//!
//! In one dimension the operator is written in flux form,
//! `σ · (Φ(D⁺u) − Φ(D⁻u)) / h` with `Φ' = max(|p|, eps)^α`, which is monotone
//! for every shipped kind. In higher dimensions the operator is
//! `G · N_h[u]`: `N_h` is a sup/inf of nonnegative-weight stencils on the
//! `3ᴺ` neighbourhood and `G = max(g, eps)^α` uses the ascent or descent
//! slope `g` chosen by the signs of `N_h` and `α`. The drift is upwinded the same way.

use crate::domain::{DomainSpec, Geometry, Grid, NodeClass};
use crate::error::{Error, Result};
use crate::fields::{CompiledField, Region, ScalarField, VectorField};
use crate::linalg::{dist, SymMat};
use crate::monotone::{Local, NdStencil, PAIRS};
use crate::operators::{Hypothesis, OperatorKind, OperatorSpec, PropertyReport, Witness};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Regularity constants of the data. Unset fields are derived from the field families.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantOverrides {
    pub c_psi: Option<f64>,
    pub psi_t: Option<f64>,
    pub psi_sup: Option<f64>,
    pub f_sup: Option<f64>,
    pub c_f: Option<f64>,
    pub h_sup: Option<f64>,
    pub c_h: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProblemConstants {
    /// Spatial Hölder constant of `ψ` for exponent `gamma`.
    pub c_psi: f64,
    pub gamma: f64,
    /// Time Lipschitz constant of `ψ`.
    pub psi_t: f64,
    pub psi_sup: f64,
    /// `|f|∞` together with the range `[f_min, f_max]`.
    pub f_sup: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub c_f: f64,
    pub gamma_f: f64,
    pub h_sup: f64,
    pub c_h: f64,
    pub omega_h: f64,
}

/// Constructor input for [`ProblemSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    #[serde(default = "zero_vector")]
    pub h: VectorField,
    #[serde(default = "zero_scalar")]
    pub f: ScalarField,
    pub psi: ScalarField,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "one")]
    pub gamma_f: f64,
    #[serde(default = "one")]
    pub omega_h: f64,
    #[serde(default)]
    pub constants: ConstantOverrides,
}

fn zero_vector() -> VectorField {
    VectorField::Zero
}
fn zero_scalar() -> ScalarField {
    ScalarField::Zero
}
fn one() -> f64 {
    1.0
}

impl ProblemParams {
    pub fn new(psi: ScalarField) -> Self {
        Self {
            h: VectorField::Zero,
            f: ScalarField::Zero,
            psi,
            gamma: 1.0,
            gamma_f: 1.0,
            omega_h: 1.0,
            constants: ConstantOverrides::default(),
        }
    }

    pub fn source(mut self, f: ScalarField) -> Self {
        self.f = f;
        self
    }

    pub fn drift(mut self, h: VectorField) -> Self {
        self.h = h;
        self
    }

    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn gamma_f(mut self, gamma_f: f64) -> Self {
        self.gamma_f = gamma_f;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub operator: OperatorSpec,
    pub domain: DomainSpec,
    pub t_final: f64,
    pub params: ProblemParams,
    pub eps: f64,
    pub constants: ProblemConstants,
    pub whole_space: bool,
    /// Fraction of the monotonicity bound used as time step.
    pub safety: f64,
}

pub const SAFETY: f64 = 0.9;

impl ProblemSpec {
    pub fn new(operator: OperatorSpec, domain: DomainSpec, t_final: f64, params: ProblemParams, eps: f64) -> Result<Self> {
        Self::build(operator, domain, t_final, params, eps, false)
    }

    /// Problem posed on `ℝᴺ`; `domain` is the truncation box used for solving.
    pub fn whole_space(operator: OperatorSpec, domain: DomainSpec, t_final: f64, params: ProblemParams, eps: f64) -> Result<Self> {
        if !params.psi.is_globally_bounded() || !params.f.is_globally_bounded() {
            return Err(Error::InvalidProblem("whole-space data must be bounded on all of R^N".into()));
        }
        Self::build(operator, domain, t_final, params, eps, true)
    }

    fn build(operator: OperatorSpec, domain: DomainSpec, t_final: f64, params: ProblemParams, eps: f64, whole_space: bool) -> Result<Self> {
        let operator = operator.validated()?;
        let bad = |m: String| Err(Error::InvalidProblem(m));
        if !(t_final > 0.0) || !t_final.is_finite() {
            return bad(format!("T must be > 0, got {t_final}"));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return bad(format!("eps must be > 0, got {eps}"));
        }
        if !(params.gamma > 0.0 && params.gamma <= 1.0) {
            return bad(format!("gamma must be in (0, 1], got {}", params.gamma));
        }
        if !(params.gamma_f > 0.0 && params.gamma_f <= 1.0) {
            return bad(format!("gamma_f must be in (0, 1], got {}", params.gamma_f));
        }
        if !(params.omega_h > 0.0 && params.omega_h <= 1.0) {
            return bad(format!("omega_h must be in (0, 1], got {}", params.omega_h));
        }
        if let VectorField::Constant { value } | VectorField::TimeSine { value, .. } = &params.h {
            if value.len() != domain.dim {
                return bad(format!("drift has {} components, domain has dimension {}", value.len(), domain.dim));
            }
        }
        let reg = region_of(&domain, t_final);
        let o = &params.constants;
        let derived_ch = {
            let th = params.h.holder_t(params.omega_h, &reg);
            let xb = if operator.alpha <= 0.0 { params.h.holder_x(1.0 + operator.alpha, &reg) } else { 0.0 };
            th.max(xb)
        };
        let constants = ProblemConstants {
            c_psi: o.c_psi.unwrap_or_else(|| params.psi.holder_x(params.gamma, &reg)),
            gamma: params.gamma,
            psi_t: o.psi_t.unwrap_or_else(|| params.psi.lip_t(&reg)),
            psi_sup: o.psi_sup.unwrap_or_else(|| params.psi.sup_abs(&reg)),
            f_sup: o.f_sup.unwrap_or_else(|| params.f.sup_abs(&reg)),
            f_min: params.f.inf(&reg),
            f_max: params.f.sup(&reg),
            c_f: o.c_f.unwrap_or_else(|| params.f.holder_t(params.gamma_f, &reg)),
            gamma_f: params.gamma_f,
            h_sup: o.h_sup.unwrap_or_else(|| params.h.sup_abs(&reg)),
            c_h: o.c_h.unwrap_or(derived_ch),
            omega_h: params.omega_h,
        };
        for (name, v) in [
            ("c_psi", constants.c_psi),
            ("psi_t", constants.psi_t),
            ("psi_sup", constants.psi_sup),
            ("f_sup", constants.f_sup),
            ("c_f", constants.c_f),
            ("h_sup", constants.h_sup),
            ("c_h", constants.c_h),
        ] {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("{name} is not a finite nonnegative bound ({v}); the data is not regular enough"));
            }
        }
        let p = Self { operator, domain, t_final, params, eps, constants, whole_space, safety: SAFETY };
        p.validate_constants()?;
        Ok(p)
    }

    pub fn region(&self) -> Region {
        region_of(&self.domain, self.t_final)
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        self.rebuild(self.operator.clone(), self.domain.clone(), self.params.clone(), eps)
    }

    pub fn with_domain(&self, domain: DomainSpec) -> Result<Self> {
        self.rebuild(self.operator.clone(), domain, self.params.clone(), self.eps)
    }

    pub fn with_params(&self, params: ProblemParams) -> Result<Self> {
        self.rebuild(self.operator.clone(), self.domain.clone(), params, self.eps)
    }

    pub fn with_operator(&self, operator: OperatorSpec) -> Result<Self> {
        self.rebuild(operator, self.domain.clone(), self.params.clone(), self.eps)
    }

    /// Safety factor in `(0, 1]` applied to the monotone step bound.
    pub fn with_safety(mut self, safety: f64) -> Result<Self> {
        if !(safety > 0.0 && safety <= 1.0) {
            return Err(Error::InvalidProblem(format!("safety must lie in (0, 1], got {safety}")));
        }
        self.safety = safety;
        Ok(self)
    }

    fn rebuild(&self, operator: OperatorSpec, domain: DomainSpec, params: ProblemParams, eps: f64) -> Result<Self> {
        let mut p = Self::build(operator, domain, self.t_final, params, eps, self.whole_space)?;
        p.safety = self.safety;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn alpha(&self) -> f64 {
        self.operator.alpha
    }

    /// sha256 of the problem's debug rendering.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(format!("{self:?}").as_bytes()))
    }

    /// Sampling cross-check of the declared constants; a declared constant
    /// below a sampled ratio is rejected.
    fn validate_constants(&self) -> Result<()> {
        let c = &self.constants;
        let reg = self.region();
        let n = self.dim();
        let psi = self.params.psi.compile(n);
        let f = self.params.f.compile(n);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let rel = 1e-9;
        let point = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|k| rng.gen_range(reg.lo[k]..=reg.hi[k])).collect()
        };
        let check = |name: &str, ratio: f64, declared: f64| -> Result<()> {
            if ratio > declared * (1.0 + rel) + 1e-12 {
                Err(Error::InvalidProblem(format!("declared {name} = {declared} is below a sampled ratio {ratio}")))
            } else {
                Ok(())
            }
        };
        for i in 0..3000 {
            let x = point(&mut rng);
            let scale = reg.diam() * 0.5f64.powi((i % 12) as i32);
            let y: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(k, v)| (v + rng.gen_range(-scale..=scale)).clamp(reg.lo[k], reg.hi[k]))
                .collect();
            let t = rng.gen_range(0.0..=self.t_final);
            let s = rng.gen_range(0.0..=self.t_final);
            let r = dist(&x, &y);
            let (px, py) = (psi.eval(&x, t), psi.eval(&y, t));
            if !px.is_finite() {
                return Err(Error::InvalidProblem(format!("psi is not finite at {x:?}")));
            }
            check("psi_sup", px.abs(), c.psi_sup)?;
            if r > 0.0 {
                check("c_psi", (px - py).abs() / r.powf(c.gamma), c.c_psi)?;
            }
            if t != s {
                check("psi_t", (px - psi.eval(&x, s)).abs() / (t - s).abs(), c.psi_t)?;
                let fx = f.eval(&x, t);
                check("c_f", (fx - f.eval(&x, s)).abs() / (t - s).abs().powf(c.gamma_f), c.c_f)?;
            }
            let fx = f.eval(&x, t);
            check("f_sup", fx.abs(), c.f_sup)?;
            let hx = self.params.h.eval(&x, t);
            check("h_sup", crate::linalg::norm(&hx), c.h_sup)?;
        }
        Ok(())
    }

    /// Range `[cmin, cmax]` of the multiplicative coefficient of the operator.
    pub fn coefficient_range(&self) -> (f64, f64) {
        if self.operator.kind == OperatorKind::TraceWithPower && self.operator.x_modulus_scale > 0.0 {
            (0.5, 1.5)
        } else {
            (1.0, 1.0)
        }
    }
}

pub(crate) fn region_of(domain: &DomainSpec, t_final: f64) -> Region {
    let (lo, hi) = domain.bounding_box();
    Region { lo, hi, t_final }
}

/// (H5): time Hölder continuity of `h`, plus the spatial branch selected by `α`
/// (Hölder-`(1+α)` for `α ≤ 0`, monotone `(h(x)−h(y))·(x−y) ≤ 0` for `α > 0`).
pub fn check_drift(problem: &ProblemSpec, n_samples: usize, seed: u64) -> PropertyReport {
    let reg = problem.region();
    let n = problem.dim();
    let c = &problem.constants;
    let alpha = problem.alpha();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut witnesses: Vec<Witness> = Vec::new();
    for i in 0..n_samples {
        let x: Vec<f64> = (0..n).map(|k| rng.gen_range(reg.lo[k]..=reg.hi[k])).collect();
        let y: Vec<f64> = (0..n).map(|k| rng.gen_range(reg.lo[k]..=reg.hi[k])).collect();
        let t = rng.gen_range(0.0..=reg.t_final);
        let s = rng.gen_range(0.0..=reg.t_final);
        let hxt = problem.params.h.eval(&x, t);
        let hxs = problem.params.h.eval(&x, s);
        let hyt = problem.params.h.eval(&y, t);
        let mut v = 0.0f64;
        if t != s {
            let ratio = dist(&hxt, &hxs) / (t - s).abs().powf(c.omega_h);
            v = v.max((ratio - c.c_h).max(0.0) / c.c_h.max(1.0));
        }
        let r = dist(&x, &y);
        if r > 0.0 {
            if alpha <= 0.0 {
                let ratio = dist(&hxt, &hyt) / r.powf(1.0 + alpha);
                v = v.max((ratio - c.c_h).max(0.0) / c.c_h.max(1.0));
            } else {
                let m: f64 = (0..n).map(|k| (hxt[k] - hyt[k]) * (x[k] - y[k])).sum();
                v = v.max(m.max(0.0) / (r * r));
            }
        }
        worst = worst.max(v);
        if v > 0.0 {
            witnesses.push(Witness { sample: i, x: x.clone(), p: y.clone(), matrix: vec![], aux: vec![t, s], violation: v });
        }
    }
    witnesses.sort_by(|a, b| b.violation.total_cmp(&a.violation).then(a.sample.cmp(&b.sample)));
    witnesses.truncate(3);
    PropertyReport {
        hypothesis: Hypothesis::H5,
        label: format!("drift:{}", if alpha <= 0.0 { "holder_branch" } else { "monotone_branch" }),
        samples_tested: n_samples,
        max_violation: worst,
        max_ratio: None,
        declared_constant: Some(c.c_h),
        tolerance: crate::operators::AXIOM_TOL,
        witnesses,
    }
}

/// One recorded time level. `prev` holds the level before it, so backward
/// time differences are available at every recorded step `> 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Slice {
    pub step: usize,
    pub t: f64,
    pub values: Vec<f64>,
    pub prev: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpaceTimeField {
    pub grid: Grid,
    pub slices: Vec<Slice>,
    pub eps: f64,
    pub problem_hash: String,
}

/// Steps kept when recording every `record_every` steps: also step 0, powers
/// of two (dyadic times for the rate fits) and the last step.
pub fn recorded_steps(n_steps: usize, record_every: usize) -> Vec<usize> {
    let every = record_every.max(1);
    (0..=n_steps).filter(|&s| s == 0 || s % every == 0 || s.is_power_of_two() || s == n_steps).collect()
}

impl SpaceTimeField {
    /// Field sampled from a function at the given steps (with `prev` levels).
    pub fn from_fn<F>(grid: &Grid, steps: &[usize], eps: f64, tag: &str, f: F) -> Self
    where
        F: Fn(&[f64], f64) -> f64 + Sync,
    {
        let coords: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.coords(i)).collect();
        let level = |step: usize| -> Vec<f64> {
            let t = grid.time(step);
            coords.par_iter().map(|x| f(x, t)).collect()
        };
        let slices = steps
            .iter()
            .map(|&s| Slice { step: s, t: grid.time(s), values: level(s), prev: if s > 0 { Some(level(s - 1)) } else { None } })
            .collect();
        Self { grid: grid.clone(), slices, eps, problem_hash: tag.to_string() }
    }

    pub fn slice(&self, step: usize) -> Option<&Slice> {
        self.slices.binary_search_by_key(&step, |s| s.step).ok().map(|i| &self.slices[i])
    }

    pub fn last(&self) -> &Slice {
        self.slices.last().expect("field has at least one slice")
    }

    pub fn steps(&self) -> Vec<usize> {
        self.slices.iter().map(|s| s.step).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.slices
            .iter()
            .flat_map(|s| self.grid.active.iter().map(move |&i| s.values[i].abs()))
            .fold(0.0, f64::max)
    }

    /// Max over active nodes of `|self − other|` at common steps.
    pub fn max_diff(&self, other: &SpaceTimeField) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let mut m = 0.0f64;
        for s in &self.slices {
            if let Some(o) = other.slice(s.step) {
                for &i in &self.grid.active {
                    m = m.max((s.values[i] - o.values[i]).abs());
                }
            }
        }
        Ok(m)
    }

    /// Applies `g` to every value (including `prev` levels).
    pub fn map_values<G: Fn(&[f64], f64, f64) -> f64>(&self, g: G) -> Self {
        let mut out = self.clone();
        for s in out.slices.iter_mut() {
            for i in 0..s.values.len() {
                let x = self.grid.coords(i);
                s.values[i] = g(&x, s.t, s.values[i]);
                if let Some(p) = s.prev.as_mut() {
                    p[i] = g(&x, self.grid.time(s.step - 1), p[i]);
                }
            }
        }
        out
    }
}

/// The spatial part `L_h u = F_h[u] + drift_h[u]` of the scheme at interior nodes.
pub struct Discretization<'a> {
    pub op: &'a OperatorSpec,
    pub grid: &'a Grid,
    pub h: &'a VectorField,
    pub eps: f64,
    pub lateral: Vec<usize>,
    coords: Vec<Vec<f64>>,
    nd: Option<NdStencil>,
}

/// Detailed evaluation at one node.
#[derive(Clone, Debug)]
pub struct NodeEval {
    pub operator_part: f64,
    pub drift_part: f64,
    pub grad_norm: f64,
    /// Monotone Hessian used by the scheme.
    pub hessian: SymMat,
}

impl NodeEval {
    pub fn total(&self) -> f64 {
        self.operator_part + self.drift_part
    }
}

impl<'a> Discretization<'a> {
    pub fn new(op: &'a OperatorSpec, grid: &'a Grid, h: &'a VectorField, eps: f64) -> Self {
        let coords = (0..grid.len()).map(|i| grid.coords(i)).collect();
        let lateral = (0..grid.len()).filter(|&i| grid.classes[i] == NodeClass::Lateral).collect();
        let nd = (grid.dim() >= 2).then(|| NdStencil::build(op, &grid.h));
        Self { op, grid, h, eps, lateral, coords, nd }
    }

    pub fn for_problem(problem: &'a ProblemSpec, grid: &'a Grid) -> Self {
        Self::new(&problem.operator, grid, &problem.params.h, problem.eps)
    }

    pub fn coords(&self, i: usize) -> &[f64] {
        &self.coords[i]
    }

    #[inline]
    fn power(&self, g: f64) -> f64 {
        let a = self.op.alpha;
        if a == 0.0 {
            1.0
        } else {
            g.max(self.eps).powf(a)
        }
    }

    /// `Φ(p) = ∫₀ᵖ max(|s|, eps)^α ds`.
    #[inline]
    fn flux(&self, p: f64) -> f64 {
        let a = self.op.alpha;
        if a == 0.0 {
            return p;
        }
        let e = self.eps;
        let ap = p.abs();
        if ap <= e {
            e.powf(a) * p
        } else {
            let ea1 = e.powf(a + 1.0);
            p.signum() * (ea1 + (ap.powf(a + 1.0) - ea1) / (a + 1.0))
        }
    }

    #[inline]
    fn drift_flux(&self, p: f64) -> f64 {
        p * self.power(p.abs())
    }

    /// `L_h u` at interior node `i`, time `t` (drift evaluated at `t`).
    pub fn apply(&self, u: &[f64], i: usize, t: f64) -> f64 {
        if self.grid.dim() == 1 {
            self.apply_1d(u, i, t).0
        } else {
            self.eval_nd(u, i, t, false).total()
        }
    }

    fn sigma(&self, x: &[f64], d: f64) -> f64 {
        match self.op.kind {
            OperatorKind::TraceWithPower => self.op.coefficient(x),
            OperatorKind::PLaplacianNonvariational => 1.0 + self.op.alpha,
            OperatorKind::PucciPlus => {
                if d > 0.0 {
                    self.op.big_a
                } else {
                    self.op.a
                }
            }
            OperatorKind::PucciMinus => {
                if d > 0.0 {
                    self.op.a
                } else {
                    self.op.big_a
                }
            }
        }
    }

    /// Returns `(L_h u, operator part, drift part, central gradient, D²u)`.
    fn apply_1d(&self, u: &[f64], i: usize, t: f64) -> (f64, f64, f64, f64, f64) {
        let h = self.grid.h[0];
        let (um, u0, up) = (u[i - 1], u[i], u[i + 1]);
        let dp = (up - u0) / h;
        let dm = (u0 - um) / h;
        let d = (self.flux(dp) - self.flux(dm)) / h;
        let x = &self.coords[i];
        let opv = self.sigma(x, d) * d;
        let hv = match self.h {
            VectorField::Zero => 0.0,
            field => {
                let mut hv = [0.0];
                field.eval_into(x, t, &mut hv);
                if hv[0] > 0.0 {
                    hv[0] * self.drift_flux(dp)
                } else if hv[0] < 0.0 {
                    hv[0] * self.drift_flux(dm)
                } else {
                    0.0
                }
            }
        };
        (opv + hv, opv, hv, 0.5 * (dp + dm), (up - 2.0 * u0 + um) / (h * h))
    }

    /// Full evaluation with the monotone Hessian.
    pub fn eval_node(&self, u: &[f64], i: usize, t: f64) -> NodeEval {
        if self.grid.dim() == 1 {
            let (_, opv, hv, p, xx) = self.apply_1d(u, i, t);
            NodeEval { operator_part: opv, drift_part: hv, grad_norm: p.abs(), hessian: SymMat::diag(&[xx]) }
        } else {
            self.eval_nd(u, i, t, true)
        }
    }

    fn local(&self, u: &[f64], i: usize) -> Local {
        let g = self.grid;
        let n = g.dim();
        let hs = &g.h;
        let u0 = u[i];
        let mut loc = Local { n, ..Default::default() };
        for k in 0..n {
            loc.fp[k] = (u[g.shift(i, k, 1)] - u0) / hs[k];
            loc.fm[k] = (u[g.shift(i, k, -1)] - u0) / hs[k];
            loc.delta[k] = (loc.fp[k] + loc.fm[k]) / hs[k];
        }
        let at2 = |k: usize, sk: isize, l: usize, sl: isize| u[g.shift(g.shift(i, k, sk), l, sl)];
        for (q, &(k, l)) in PAIRS.iter().enumerate().filter(|(_, &(_, l))| l < n) {
            loc.ep[q] = at2(k, 1, l, 1) + at2(k, -1, l, -1) - 2.0 * u0;
            loc.em[q] = at2(k, 1, l, -1) + at2(k, -1, l, 1) - 2.0 * u0;
        }
        loc
    }

    /// `max(g, eps)^α` with `g` the ascent slope when `value` and `α` share
    /// a sign and the descent slope otherwise, so `factor · value` is
    /// nondecreasing in every neighbour value.
    #[inline]
    fn upwind_power(&self, loc: &Local, value: f64) -> f64 {
        let a = self.op.alpha;
        if a == 0.0 {
            return 1.0;
        }
        let n = loc.n;
        let g = if (value >= 0.0) == (a > 0.0) {
            (0..n).map(|k| loc.fp[k].max(loc.fm[k]).max(0.0).powi(2)).sum::<f64>()
        } else {
            (0..n).map(|k| (-loc.fp[k]).max(-loc.fm[k]).max(0.0).powi(2)).sum::<f64>()
        };
        self.power(g.sqrt())
    }

    fn eval_nd(&self, u: &[f64], i: usize, t: f64, full: bool) -> NodeEval {
        let n = self.grid.dim();
        let hs = &self.grid.h;
        let loc = self.local(u, i);
        let x = &self.coords[i];
        let stencil = self.nd.as_ref().expect("stencil present in dimension >= 2");
        let l = stencil.apply(&loc, self.op.coefficient(x));
        let opv = self.upwind_power(&loc, l) * l;
        let hv = match self.h {
            VectorField::Zero => 0.0,
            field => {
                let mut hvec = [0.0f64; 3];
                field.eval_into(x, t, &mut hvec[..n]);
                let mut dd = 0.0;
                for k in 0..n {
                    if hvec[k] > 0.0 {
                        dd += hvec[k] * loc.fp[k];
                    } else if hvec[k] < 0.0 {
                        dd -= hvec[k] * loc.fm[k];
                    }
                }
                self.upwind_power(&loc, dd) * dd
            }
        };
        let (grad_norm, hessian) = if full {
            let mut xc = SymMat::zeros(n);
            let mut g2 = 0.0;
            for k in 0..n {
                g2 += (0.5 * (loc.fp[k] - loc.fm[k])).powi(2);
                xc.set_sym(k, k, loc.delta[k]);
            }
            for (q, &(k, l)) in PAIRS.iter().enumerate().filter(|(_, &(_, l))| l < n) {
                xc.set_sym(k, l, (loc.ep[q] - loc.em[q]) / (4.0 * hs[k] * hs[l]));
            }
            (g2.sqrt(), xc)
        } else {
            (0.0, SymMat::zeros(0))
        };
        NodeEval { operator_part: opv, drift_part: hv, grad_norm, hessian }
    }

    /// Central-difference gradient magnitude at an interior node.
    pub fn grad_norm(&self, u: &[f64], i: usize) -> f64 {
        let g = self.grid;
        (0..g.dim())
            .map(|k| {
                let v = (u[g.shift(i, k, 1)] - u[g.shift(i, k, -1)]) / (2.0 * g.h[k]);
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Largest `|u_j − u_i| / |x_j − x_i|₁` over interior nodes `i` and their
    /// `3ᴺ` neighbours `j` (the one-sided difference quotients in 1-D).
    pub fn max_one_sided(&self, u: &[f64]) -> f64 {
        let g = self.grid;
        let offsets = neighbour_offsets(g.dim());
        g.interior
            .par_iter()
            .map(|&i| {
                offsets
                    .iter()
                    .map(|o| {
                        let (mut j, mut len) = (i, 0.0);
                        for (k, &sk) in o.iter().enumerate() {
                            j = g.shift(j, k, sk);
                            len += sk.abs() as f64 * g.h[k];
                        }
                        if len > 0.0 {
                            (u[j] - u[i]).abs() / len
                        } else {
                            0.0
                        }
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }
}

fn neighbour_offsets(n: usize) -> Vec<Vec<isize>> {
    (0..3usize.pow(n as u32))
        .map(|mut c| {
            (0..n)
                .map(|_| {
                    let o = (c % 3) as isize - 1;
                    c /= 3;
                    o
                })
                .collect()
        })
        .collect()
}

/// Result of the step-size computation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CflInfo {
    pub dt: f64,
    /// Bound on the power factor `max(|p|, eps)^α` assumed by `dt`.
    pub power_bound: f64,
    /// Slope bound `S` behind `power_bound` (0 when unused).
    pub gradient_bound: f64,
    /// Slope bound to check at run time with [`Discretization::max_one_sided`].
    pub checked_bound: Option<f64>,
}

fn per_axis_spacing(domain: &DomainSpec, dx: f64) -> Vec<f64> {
    let (lo, hi) = domain.bounding_box();
    lo.iter().zip(&hi).map(|(a, b)| (b - a) / ((b - a) / dx).round().max(1.0)).collect()
}

/// Lateral boundary values, produced one time level at a time.
pub trait BoundaryData: Sync {
    /// Values at `nodes` at time `t`.
    fn values(&self, grid: &Grid, nodes: &[usize], t: f64) -> Vec<f64>;
}

impl<F: Fn(&[f64], f64) -> f64 + Sync> BoundaryData for F {
    fn values(&self, grid: &Grid, nodes: &[usize], t: f64) -> Vec<f64> {
        nodes.par_iter().map(|&i| self(&grid.coords(i), t)).collect()
    }
}

/// Time step for which the explicit update is monotone.
///
/// In 1-D: `dt = safety / Σ_k (2 A G / h_k² + |h|∞ max(1, 1+α) G / h_k)` with
/// `G = S^α` for `α ≥ 0` and `G = eps^α` for `α < 0`. In higher dimensions
/// the center weight of the stencil is multiplied by `G (1 + R)`, where `R`
/// bounds the change of the upwind power factor with the center value.
pub fn cfl_dt(problem: &ProblemSpec, dx: f64) -> Result<f64> {
    Ok(cfl_details(problem, dx)?.dt)
}

pub fn cfl_details(problem: &ProblemSpec, dx: f64) -> Result<CflInfo> {
    cfl_details_with(problem, dx, None)
}

/// As [`cfl_details`], with the slope bound `S` given instead of estimated from the data.
pub fn cfl_details_with(problem: &ProblemSpec, dx: f64, slope: Option<f64>) -> Result<CflInfo> {
    if !(dx > 0.0) {
        return Err(Error::InvalidGrid(format!("dx must be > 0, got {dx}")));
    }
    let alpha = problem.alpha();
    let eps = problem.eps;
    if !(eps > 0.0) {
        return Err(Error::Cfl("eps must be > 0 for the regularized operator".into()));
    }
    let h = per_axis_spacing(&problem.domain, dx);
    let n = h.len();
    let h_sup = problem.constants.h_sup;
    let (_, cmax) = problem.coefficient_range();
    let needs_slope = if n == 1 { alpha > 0.0 } else { alpha != 0.0 };
    let s = if needs_slope { slope.unwrap_or_else(|| estimate_gradient_bound(problem, &h)) } else { 0.0 };
    let checked_bound = needs_slope.then_some(s);
    let nonpositive = |denom: f64| Error::Cfl(format!("no positive monotone step (denominator {denom})"));
    if n == 1 {
        let power_bound = if alpha > 0.0 {
            s.max(eps).powf(alpha)
        } else if alpha < 0.0 {
            eps.powf(alpha)
        } else {
            1.0
        };
        let a_top = problem.operator.big_a.max(cmax);
        let drift_c = h_sup * (1.0f64).max(1.0 + alpha);
        let denom: f64 = h.iter().map(|hk| 2.0 * a_top * power_bound / (hk * hk) + drift_c * power_bound / hk).sum();
        let dt = problem.safety / denom;
        if !dt.is_finite() || dt <= 0.0 {
            return Err(nonpositive(denom));
        }
        return Ok(CflInfo { dt, power_bound, gradient_bound: s, checked_bound });
    }
    let stencil = NdStencil::build(&problem.operator, &h);
    let margin = stencil.margin();
    if margin < -1e-12 {
        return Err(Error::Cfl(format!(
            "no monotone stencil for {} with alpha = {alpha}, a = {}, A = {} on this grid (weight margin {margin:.3e})",
            problem.operator.kind.name(),
            problem.operator.a,
            problem.operator.big_a
        )));
    }
    let scale = (n as f64).sqrt() * s;
    let (power_bound, power_slope) = if alpha > 0.0 {
        let top = scale.max(eps);
        let slope = if alpha >= 1.0 { alpha * top.powf(alpha - 1.0) } else { alpha * eps.powf(alpha - 1.0) };
        (top.powf(alpha), slope)
    } else if alpha < 0.0 {
        (eps.powf(alpha), -alpha * eps.powf(alpha - 1.0))
    } else {
        (1.0, 0.0)
    };
    let center = stencil.center_bound(&problem.operator, &h) * cmax;
    let drift = h_sup * h.iter().map(|hk| 1.0 / hk).sum::<f64>();
    let inv = h.iter().map(|hk| hk.powi(-2)).sum::<f64>().sqrt();
    let r = power_slope * inv * h.iter().sum::<f64>() * s / power_bound;
    let denom = (center + drift) * power_bound * (1.0 + r);
    let dt = problem.safety / denom;
    if !dt.is_finite() || dt <= 0.0 {
        return Err(nonpositive(denom));
    }
    Ok(CflInfo { dt, power_bound, gradient_bound: s, checked_bound })
}

/// Twice the largest one-sided difference of the data on the grid (a few
/// time levels), floored by the source-driven scale `(|f|∞ diam)^{1/(1+α)}`.
fn estimate_gradient_bound(problem: &ProblemSpec, h: &[f64]) -> f64 {
    let (lo, hi) = problem.domain.bounding_box();
    let n = lo.len();
    let counts: Vec<usize> = (0..n).map(|k| ((hi[k] - lo[k]) / h[k]).round() as usize + 1).collect();
    let total: usize = counts.iter().product();
    let psi = problem.params.psi.compile(n);
    let data = |x: &[f64], t: f64| psi.eval(x, t);
    let coord = |mut i: usize| -> Vec<f64> {
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            x[k] = lo[k] + (i % counts[k]) as f64 * h[k];
            i /= counts[k];
        }
        x
    };
    let mut g = 0.0f64;
    for q in 0..=4 {
        let t = problem.t_final * q as f64 / 4.0;
        let m = (0..total)
            .into_par_iter()
            .map(|i| {
                let x = coord(i);
                if !problem.domain.contains_closed(&x) {
                    return 0.0;
                }
                let v = data(&x, t);
                let mut m = 0.0f64;
                for k in 0..n {
                    let mut y = x.clone();
                    y[k] += h[k];
                    if y[k] <= hi[k] + 1e-12 && problem.domain.contains_closed(&y) {
                        m = m.max((data(&y, t) - v).abs() / h[k]);
                    }
                }
                m
            })
            .reduce(|| 0.0, f64::max);
        g = g.max(m);
    }
    let drive = (problem.constants.f_sup * problem.domain.diam).powf(1.0 / (1.0 + problem.alpha()));
    2.0 * g.max(drive).max(1.0)
}

/// Builds the grid for `problem` at spacing `dx` with the monotone time step.
pub fn make_grid(problem: &ProblemSpec, dx: f64) -> Result<(Grid, CflInfo)> {
    let info = cfl_details(problem, dx)?;
    let grid = Grid::new(problem.domain.clone(), dx, problem.t_final, info.dt)?;
    Ok((grid, info))
}

/// One explicit step from `u` at time `t` to `t + dt`.
pub fn step(problem: &ProblemSpec, grid: &Grid, u: &[f64], t: f64) -> Result<Vec<f64>> {
    let disc = Discretization::for_problem(problem, grid);
    let f = problem.params.f.compile(grid.dim());
    let psi = problem.params.psi.compile(grid.dim());
    let bc = |x: &[f64], s: f64| psi.eval(x, s);
    step_with(&disc, &f, &bc, u, t, grid.dt, 0)
}

fn step_with(disc: &Discretization, f: &CompiledField, bc: &dyn BoundaryData, u: &[f64], t: f64, dt: f64, step_index: usize) -> Result<Vec<f64>> {
    let g = disc.grid;
    let t_new = t + dt;
    let mut new: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|i| match g.classes[i] {
            NodeClass::Interior => {
                let x = disc.coords(i);
                u[i] + dt * (disc.apply(u, i, t) + f.eval(x, t))
            }
            _ => 0.0,
        })
        .collect();
    for (&i, v) in disc.lateral.iter().zip(bc.values(g, &disc.lateral, t_new)) {
        new[i] = v;
    }
    if let Some(&i) = g.active.iter().find(|&&i| !new[i].is_finite()) {
        return Err(Error::NonFinite { step: step_index + 1, node: i, value: new[i] });
    }
    Ok(new)
}

/// Integrates from `ψ(·, 0)` to `T` on `grid`, with lateral values from `bc`.
pub fn solve_on_grid(
    problem: &ProblemSpec,
    grid: &Grid,
    record_every: usize,
    bc: &dyn BoundaryData,
    gradient_bound: Option<f64>,
) -> Result<SpaceTimeField> {
    let disc = Discretization::for_problem(problem, grid);
    let f = problem.params.f.compile(grid.dim());
    let psi = problem.params.psi.compile(grid.dim());
    let mut u: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| match grid.classes[i] {
            NodeClass::Interior => psi.eval(disc.coords(i), 0.0),
            _ => 0.0,
        })
        .collect();
    for (&i, v) in disc.lateral.iter().zip(bc.values(grid, &disc.lateral, 0.0)) {
        u[i] = v;
    }
    let record = recorded_steps(grid.n_steps, record_every);
    let mut slices = vec![Slice { step: 0, t: 0.0, values: u.clone(), prev: None }];
    let mut next_rec = 1;
    for n in 0..grid.n_steps {
        if let Some(gb) = gradient_bound {
            let m = disc.max_one_sided(&u);
            if m > gb {
                return Err(Error::Cfl(format!(
                    "one-sided gradient {m:.4e} exceeded the bound {gb:.4e} assumed by dt at step {n}"
                )));
            }
        }
        let t = grid.time(n);
        let new = step_with(&disc, &f, bc, &u, t, grid.dt, n)?;
        if next_rec < record.len() && record[next_rec] == n + 1 {
            slices.push(Slice { step: n + 1, t: grid.time(n + 1), values: new.clone(), prev: Some(u.clone()) });
            next_rec += 1;
        }
        u = new;
    }
    Ok(SpaceTimeField { grid: grid.clone(), slices, eps: problem.eps, problem_hash: problem.hash() })
}

/// Solves on `Ω × [0, T]` with Dirichlet data `ψ`.
pub fn solve(problem: &ProblemSpec, dx: f64, record_every: usize) -> Result<SpaceTimeField> {
    let (grid, info) = make_grid(problem, dx)?;
    let psi = problem.params.psi.compile(grid.dim());
    let bc = |x: &[f64], t: f64| psi.eval(x, t);
    solve_on_grid(problem, &grid, record_every, &bc, info.checked_bound)
}

/// Solves two problems on one shared grid (the smaller of the two steps), so
/// the fields can be compared node by node.
pub fn solve_pair(a: &ProblemSpec, b: &ProblemSpec, dx: f64, record_every: usize) -> Result<(SpaceTimeField, SpaceTimeField)> {
    if a.domain != b.domain || a.t_final != b.t_final {
        return Err(Error::InvalidProblem("paired problems need the same domain and horizon".into()));
    }
    let shared = cfl_details(a, dx)?.checked_bound.into_iter().chain(cfl_details(b, dx)?.checked_bound).reduce(f64::max);
    let ia = cfl_details_with(a, dx, shared)?;
    let ib = cfl_details_with(b, dx, shared)?;
    let grid = Grid::new(a.domain.clone(), dx, a.t_final, ia.dt.min(ib.dt))?;
    let run = |p: &ProblemSpec, info: &CflInfo| {
        let psi = p.params.psi.compile(grid.dim());
        let bc = |x: &[f64], t: f64| psi.eval(x, t);
        solve_on_grid(p, &grid, record_every, &bc, info.checked_bound)
    };
    Ok((run(a, &ia)?, run(b, &ib)?))
}

#[derive(Clone, Debug, Serialize)]
pub struct WholeSpaceSolution {
    pub field: SpaceTimeField,
    pub problem: ProblemSpec,
    pub box_half_width: f64,
    pub trusted_half_width: f64,
    pub warnings: Vec<String>,
}

impl WholeSpaceSolution {
    /// Whether `x` lies in the trusted sub-box `[−R/2, R/2]ᴺ`.
    pub fn is_trusted(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.abs() <= self.trusted_half_width + 1e-12)
    }

    pub fn trusted_nodes(&self) -> Vec<usize> {
        self.field.grid.active.iter().copied().filter(|&i| self.is_trusted(&self.field.grid.coords(i))).collect()
    }
}

pub fn truncation_box(dim: usize, half_width: f64) -> Result<DomainSpec> {
    crate::domain::make_domain(Geometry::Box { lo: vec![-half_width; dim], hi: vec![half_width; dim] })
}

/// Solves on `[−R, R]ᴺ` with far-field values from the midpoint of the
/// whole-space envelope built with `sup f` and `inf f`.
pub fn solve_whole_space(problem: &ProblemSpec, box_half_width: f64, dx: f64, record_every: usize) -> Result<WholeSpaceSolution> {
    if !problem.whole_space {
        return Err(Error::InvalidProblem("solve_whole_space needs a whole-space problem".into()));
    }
    if !(box_half_width > 0.0) {
        return Err(Error::InvalidArgument("box half width must be > 0".into()));
    }
    let boxed = problem.with_domain(truncation_box(problem.dim(), box_half_width)?)?;
    let info = cfl_details(&boxed, dx)?;
    let grid = Grid::new(boxed.domain.clone(), dx, boxed.t_final, info.dt)?;
    let far = crate::barriers::whole_space_far_field(&boxed, &grid)?;
    let field = solve_on_grid(&boxed, &grid, record_every, &far, info.checked_bound)?;
    let mut warnings = Vec::new();
    let (_, cmax) = boxed.coefficient_range();
    let spread = (2.0 * boxed.dim() as f64 * boxed.operator.big_a * cmax * info.power_bound * boxed.t_final).sqrt()
        + boxed.constants.h_sup * info.power_bound.max(1.0) * boxed.t_final;
    if box_half_width / 2.0 < spread {
        warnings.push(format!(
            "trusted half width {:.4} is below the propagation scale {:.4}; the far-field boundary may be felt",
            box_half_width / 2.0,
            spread
        ));
    }
    Ok(WholeSpaceSolution { field, problem: boxed, box_half_width, trusted_half_width: box_half_width / 2.0, warnings })
}

/// Sampled finite-perturbation check of the update's monotonicity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub nodes_tested: usize,
    pub pairs_tested: usize,
    /// Most negative `∂u_i^{new} / ∂u_j` found (0 if none negative).
    pub min_derivative: f64,
    pub worst_node: Option<usize>,
    pub tolerance: f64,
}

impl MonotonicityReport {
    pub fn pass(&self) -> bool {
        self.min_derivative >= -self.tolerance
    }
}

pub fn check_monotonicity(problem: &ProblemSpec, grid: &Grid, u: &[f64], t: f64, n_nodes: usize, seed: u64) -> MonotonicityReport {
    let disc = Discretization::for_problem(problem, grid);
    let n = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<usize> = (0..n_nodes).map(|_| grid.interior[rng.gen_range(0..grid.interior.len())]).collect();
    let offsets = neighbour_offsets(n);
    let results: Vec<(f64, usize, usize)> = picks
        .par_iter()
        .map(|&i| {
            let mut w = u.to_vec();
            let base = w[i] + grid.dt * disc.apply(&w, i, t);
            let mut worst = 0.0f64;
            let mut pairs = 0;
            for o in &offsets {
                let mut j = i;
                for (k, s) in o.iter().enumerate() {
                    j = grid.shift(j, k, *s);
                }
                let delta = 1e-6 * (1.0 + u[j].abs());
                for sgn in [1.0, -1.0] {
                    w[j] = u[j] + sgn * delta;
                    let new = w[i] + grid.dt * disc.apply(&w, i, t);
                    let d = sgn * (new - base) / delta;
                    worst = worst.min(d);
                    pairs += 1;
                }
                w[j] = u[j];
            }
            (worst, pairs, i)
        })
        .collect();
    let mut rep = MonotonicityReport { nodes_tested: picks.len(), pairs_tested: 0, min_derivative: 0.0, worst_node: None, tolerance: 1e-6 };
    for (w, p, i) in results {
        rep.pairs_tested += p;
        if w < rep.min_derivative {
            rep.min_derivative = w;
            rep.worst_node = Some(i);
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_domain;

    fn heat(dx: f64) -> (ProblemSpec, f64) {
        let op = OperatorSpec::trace_with_power(0.0, 0.0).unwrap();
        let dom = make_domain(Geometry::Interval { lo: 0.0, hi: 1.0 }).unwrap();
        let p = ProblemSpec::new(op, dom, 0.1, ProblemParams::new(ScalarField::Sine { amplitude: 1.0, wavenumber: 1.0 }), dx).unwrap();
        (p, dx)
    }

    #[test]
    fn heat_cfl_is_classic() {
        let (p, dx) = heat(1.0 / 32.0);
        let dt = cfl_dt(&p, dx).unwrap();
        assert!((dt - 0.45 * dx * dx).abs() < 1e-15);
        let dt2 = cfl_dt(&p, 2.0 * dx).unwrap();
        assert!((dt2 / dt - 4.0).abs() < 1e-12);
    }

    #[test]
    fn singular_cfl_shrinks_with_eps() {
        let op = OperatorSpec::trace_with_power(-0.5, 0.0).unwrap();
        let dom = make_domain(Geometry::Interval { lo: 0.0, hi: 1.0 }).unwrap();
        let base = ProblemSpec::new(op, dom, 0.1, ProblemParams::new(ScalarField::Zero), 1e-2).unwrap();
        let a = cfl_dt(&base, 0.05).unwrap();
        let b = cfl_dt(&base.with_eps(1e-4).unwrap(), 0.05).unwrap();
        assert!(b < a);
    }

    #[test]
    fn constant_and_linear_states_are_fixed() {
        let (p, dx) = heat(1.0 / 16.0);
        let (grid, _) = make_grid(&p, dx).unwrap();
        let disc = Discretization::for_problem(&p, &grid);
        let c = vec![0.7; grid.len()];
        let lin: Vec<f64> = (0..grid.len()).map(|i| grid.coords(i)[0]).collect();
        for &i in &grid.interior {
            assert_eq!(disc.apply(&c, i, 0.0), 0.0);
            assert!(disc.apply(&lin, i, 0.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_heat_step_decays() {
        let (p, dx) = heat(1.0 / 64.0);
        let (grid, _) = make_grid(&p, dx).unwrap();
        let u0: Vec<f64> = (0..grid.len()).map(|i| (std::f64::consts::PI * grid.coords(i)[0]).sin()).collect();
        let u1 = step(&p, &grid, &u0, 0.0).unwrap();
        let ratio = u1[32] / u0[32];
        let expect = 1.0 - std::f64::consts::PI.powi(2) * grid.dt;
        assert!((ratio - expect).abs() < 1e-3 * grid.dt * 100.0);
    }

    #[test]
    fn monotone_in_one_dimension() {
        let op = OperatorSpec::pucci_plus(0.5, 2.0, -0.5).unwrap();
        let dom = make_domain(Geometry::Interval { lo: 0.0, hi: 1.0 }).unwrap();
        let p = ProblemSpec::new(
            op,
            dom,
            0.05,
            ProblemParams::new(ScalarField::Fourier { amplitude: 1.0, modes: 5, seed: 2, max_frequency: 3.0 })
                .drift(VectorField::Constant { value: vec![0.7] }),
            1.0 / 32.0,
        )
        .unwrap();
        let (grid, _) = make_grid(&p, 1.0 / 32.0).unwrap();
        let u: Vec<f64> = (0..grid.len()).map(|i| p.params.psi.eval(&grid.coords(i), 0.0)).collect();
        let rep = check_monotonicity(&p, &grid, &u, 0.0, 200, 1);
        assert!(rep.pass(), "{rep:?}");
    }
}
