//! The operator class: positively homogeneous, degenerate elliptic operators
//! `F(x, p, X)` carrying a gradient power `|p|^α`.
//!
//! Four concrete kinds are shipped. Each exposes its ellipticity pair `(a, A)`
//! and exact evaluation away from `p = 0`, a regularized evaluation that is
//! finite everywhere, and a linearization `F = factor · tr(Q X)` used by the
//! monotone scheme. Sampling checkers verify the structural hypotheses.

use crate::error::{Error, Result};
use crate::linalg::{norm, SymMat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    PucciPlus,
    PucciMinus,
    PLaplacianNonvariational,
    TraceWithPower,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 4] = [
        OperatorKind::PucciPlus,
        OperatorKind::PucciMinus,
        OperatorKind::PLaplacianNonvariational,
        OperatorKind::TraceWithPower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::PucciPlus => "pucci_plus",
            OperatorKind::PucciMinus => "pucci_minus",
            OperatorKind::PLaplacianNonvariational => "p_laplacian_nonvariational",
            OperatorKind::TraceWithPower => "trace_with_power",
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A member of the operator class.
///
/// For `p_laplacian_nonvariational` the pair is `(min(1, 1+α), max(1, 1+α))`.
/// For `trace_with_power` the coefficient is `c(x) = 1 + ½ sin(s·Σx_k/√N)`
/// with `s = x_modulus_scale`, so the pair is `(1, 1)` when `s = 0` and
/// `(½, 3/2)` otherwise. Pucci kinds take `(a, A)` from the caller and are
/// x-independent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub a: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    pub alpha: f64,
    #[serde(default)]
    pub x_modulus_scale: f64,
}

impl OperatorSpec {
    /// General constructor. `a`/`A` are required for Pucci kinds and, when
    /// given for derived kinds, must match the derived pair.
    pub fn new(
        kind: OperatorKind,
        a: Option<f64>,
        big_a: Option<f64>,
        alpha: f64,
        x_modulus_scale: f64,
    ) -> Result<Self> {
        if !(alpha > -1.0) || !alpha.is_finite() {
            return Err(Error::InvalidOperator(format!("alpha must be > -1, got {alpha}")));
        }
        if !(x_modulus_scale >= 0.0) || !x_modulus_scale.is_finite() {
            return Err(Error::InvalidOperator("x_modulus_scale must be >= 0".into()));
        }
        let derived = match kind {
            OperatorKind::PLaplacianNonvariational => Some(((1.0f64).min(1.0 + alpha), (1.0f64).max(1.0 + alpha))),
            OperatorKind::TraceWithPower => Some(if x_modulus_scale > 0.0 { (0.5, 1.5) } else { (1.0, 1.0) }),
            _ => None,
        };
        if x_modulus_scale > 0.0 && kind != OperatorKind::TraceWithPower {
            return Err(Error::InvalidOperator(format!(
                "x-dependence is only available for trace_with_power, not {kind}"
            )));
        }
        let (a, big_a) = match derived {
            Some((da, db)) => {
                for (given, want, name) in [(a, da, "a"), (big_a, db, "A")] {
                    if let Some(g) = given {
                        if (g - want).abs() > 1e-12 {
                            return Err(Error::InvalidOperator(format!(
                                "{kind} derives {name} = {want}, but {g} was given"
                            )));
                        }
                    }
                }
                (da, db)
            }
            None => match (a, big_a) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::InvalidOperator(format!("{kind} needs both a and A"))),
            },
        };
        if !(a > 0.0) || !(big_a >= a) || !big_a.is_finite() {
            return Err(Error::InvalidOperator(format!("need 0 < a <= A, got a = {a}, A = {big_a}")));
        }
        Ok(Self { kind, a, big_a, alpha, x_modulus_scale })
    }

    pub fn pucci_plus(a: f64, big_a: f64, alpha: f64) -> Result<Self> {
        Self::new(OperatorKind::PucciPlus, Some(a), Some(big_a), alpha, 0.0)
    }

    pub fn pucci_minus(a: f64, big_a: f64, alpha: f64) -> Result<Self> {
        Self::new(OperatorKind::PucciMinus, Some(a), Some(big_a), alpha, 0.0)
    }

    pub fn p_laplacian(alpha: f64) -> Result<Self> {
        Self::new(OperatorKind::PLaplacianNonvariational, None, None, alpha, 0.0)
    }

    pub fn trace_with_power(alpha: f64, x_modulus_scale: f64) -> Result<Self> {
        Self::new(OperatorKind::TraceWithPower, None, None, alpha, x_modulus_scale)
    }

    /// Re-runs constructor validation, e.g. after deserialization.
    pub fn validated(&self) -> Result<Self> {
        Self::new(self.kind, Some(self.a), Some(self.big_a), self.alpha, self.x_modulus_scale)
    }

    pub fn is_x_independent(&self) -> bool {
        self.x_modulus_scale == 0.0
    }

    /// Multiplicative coefficient `c(x)` of the trace kind (1 otherwise).
    pub fn coefficient(&self, x: &[f64]) -> f64 {
        if self.x_modulus_scale == 0.0 {
            return 1.0;
        }
        let n = x.len().max(1) as f64;
        let xbar = x.iter().sum::<f64>() / n.sqrt();
        1.0 + 0.5 * (self.x_modulus_scale * xbar).sin()
    }

    #[inline]
    fn power_factor(&self, g: f64) -> f64 {
        if self.alpha == 0.0 {
            1.0
        } else {
            g.powf(self.alpha)
        }
    }

    /// `M⁺_{a,A}(X)` (or `M⁻` when `plus` is false) with near-zero eigenvalues dropped.
    pub fn pucci(&self, xmat: &SymMat, plus: bool) -> f64 {
        pucci_extremal(xmat, self.a, self.big_a, plus)
    }

    fn eval_core(&self, x: &[f64], g: f64, phat: &[f64], xmat: &SymMat) -> f64 {
        let pf = self.power_factor(g);
        match self.kind {
            OperatorKind::TraceWithPower => pf * self.coefficient(x) * xmat.trace(),
            OperatorKind::PLaplacianNonvariational => pf * (xmat.trace() + self.alpha * xmat.quad(phat)),
            OperatorKind::PucciPlus => pf * self.pucci(xmat, true),
            OperatorKind::PucciMinus => pf * self.pucci(xmat, false),
        }
    }

    fn check_inputs(&self, x: &[f64], p: &[f64], xmat: &SymMat) -> Result<()> {
        if p.len() != xmat.dim() {
            return Err(Error::Dimension { expected: xmat.dim(), got: p.len() });
        }
        if x.len() != xmat.dim() {
            return Err(Error::Dimension { expected: xmat.dim(), got: x.len() });
        }
        xmat.check_symmetric()
    }

    /// `F(x, p, X)` for `p ≠ 0`.
    pub fn eval(&self, x: &[f64], p: &[f64], xmat: &SymMat) -> Result<f64> {
        self.check_inputs(x, p, xmat)?;
        let g = norm(p);
        if g == 0.0 {
            return Err(Error::ZeroGradient);
        }
        let phat: Vec<f64> = p.iter().map(|v| v / g).collect();
        Ok(self.eval_core(x, g, &phat, xmat))
    }

    /// `F` with `|p|` capped below by `eps` in the power factor and in `p̂`.
    /// Bit-identical to [`eval`](Self::eval) when `|p| >= eps`.
    pub fn eval_regularized(&self, x: &[f64], p: &[f64], xmat: &SymMat, eps: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be > 0, got {eps}")));
        }
        self.check_inputs(x, p, xmat)?;
        Ok(self.eval_regularized_unchecked(x, p, xmat, eps))
    }

    pub(crate) fn eval_regularized_unchecked(&self, x: &[f64], p: &[f64], xmat: &SymMat, eps: f64) -> f64 {
        let g = norm(p).max(eps);
        let phat: Vec<f64> = p.iter().map(|v| v / g).collect();
        self.eval_core(x, g, &phat, xmat)
    }

    /// Linearization of the regularized operator at `(x, p, X)`:
    /// returns `(factor, Q)` with `F_eps(x, p, X) = factor · tr(Q X)` and the
    /// eigenvalues of `Q` inside `[a, A]`.
    pub fn linearize(&self, x: &[f64], p: &[f64], xmat: &SymMat, eps: f64) -> (f64, SymMat) {
        let n = xmat.dim();
        let g = norm(p).max(eps);
        let pf = self.power_factor(g);
        let q = match self.kind {
            OperatorKind::TraceWithPower => SymMat::identity(n).scale(self.coefficient(x)),
            OperatorKind::PLaplacianNonvariational => {
                let phat: Vec<f64> = p.iter().map(|v| v / g).collect();
                SymMat::identity(n).add(&SymMat::outer(&phat).scale(self.alpha))
            }
            OperatorKind::PucciPlus | OperatorKind::PucciMinus => {
                let plus = self.kind == OperatorKind::PucciPlus;
                let spec = xmat.spectrum();
                let thr = 1e-14 * xmat.max_abs();
                let (pos, neg) = if plus { (self.big_a, self.a) } else { (self.a, self.big_a) };
                let mid = 0.5 * (self.a + self.big_a);
                let w: Vec<f64> = spec
                    .values
                    .iter()
                    .map(|&l| if l > thr { pos } else if l < -thr { neg } else { mid })
                    .collect();
                SymMat::from_spectrum(&spec.vectors, &w)
            }
        };
        (pf, q)
    }

    /// Bound `C` such that `|F(x,p+q,X) − F(x,p,X)| ≤ C |p|^{α−1}|q||X|`
    /// whenever `|q| < |p|/2`, with `|X|` the spectral norm.
    pub fn lipschitz_in_gradient_constant(&self, n: usize) -> f64 {
        let al = self.alpha.abs();
        let nf = n as f64;
        let growth = (0.5f64).powf(self.alpha - 1.0).max((1.5f64).powf(self.alpha - 1.0));
        let power_part = nf * self.big_a * al * growth;
        match self.kind {
            OperatorKind::PLaplacianNonvariational => {
                power_part + 4.0 * al * (0.5f64).powf(self.alpha).max((1.5f64).powf(self.alpha))
            }
            _ => power_part,
        }
    }

    /// Bound `C` such that `|F(x,p,X) − F(y,p,X)| ≤ C·s|x−y| |p|^α |X|`.
    pub fn x_modulus_constant(&self, n: usize) -> f64 {
        if self.x_modulus_scale == 0.0 {
            0.0
        } else {
            0.5 * n as f64
        }
    }
}

/// Pucci extremal operator; eigenvalues with `|λ| ≤ 1e-14‖X‖` count as zero.
pub fn pucci_extremal(xmat: &SymMat, a: f64, big_a: f64, plus: bool) -> f64 {
    let thr = 1e-14 * xmat.max_abs();
    let (pos, neg) = if plus { (big_a, a) } else { (a, big_a) };
    xmat.eigenvalues()
        .iter()
        .map(|&l| if l > thr { pos * l } else if l < -thr { neg * l } else { 0.0 })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H1,
    H2,
    H3,
    H4,
    H5,
    H6,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub sample: usize,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub matrix: Vec<f64>,
    pub aux: Vec<f64>,
    pub violation: f64,
}

/// Outcome of a sampled hypothesis check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyReport {
    pub hypothesis: Hypothesis,
    pub label: String,
    pub samples_tested: usize,
    pub max_violation: f64,
    /// Largest observed ratio for the modulus-type checks (H4, H6); this is the
    /// smallest admissible constant found.
    pub max_ratio: Option<f64>,
    pub declared_constant: Option<f64>,
    pub tolerance: f64,
    pub witnesses: Vec<Witness>,
}

impl PropertyReport {
    pub fn pass(&self) -> bool {
        self.max_violation <= self.tolerance
    }

    pub const CSV_HEADER: &'static str =
        "hypothesis,label,samples_tested,max_violation,max_ratio,declared_constant,tolerance,pass";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        format!(
            "{},{},{},{:e},{},{},{:e},{}",
            self.hypothesis,
            self.label,
            self.samples_tested,
            self.max_violation,
            opt(self.max_ratio),
            opt(self.declared_constant),
            self.tolerance,
            self.pass()
        )
    }
}

/// Relative tolerance for the exact identities (H1, H2, monotonicity).
pub const AXIOM_TOL: f64 = 1e-12;

const CHUNK: usize = 256;
const KEEP_WITNESSES: usize = 3;

struct Sampled {
    violation: f64,
    ratio: f64,
    witness: Witness,
}

/// Runs `f` over `n` samples split into fixed chunks, each with its own
/// ChaCha stream, so results do not depend on the worker count.
fn run_sampled<F>(n: usize, seed: u64, f: F) -> (f64, f64, Vec<Witness>)
where
    F: Fn(usize, &mut ChaCha8Rng) -> Sampled + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let per_chunk: Vec<(f64, f64, Vec<Witness>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut worst = 0.0f64;
            let mut ratio = 0.0f64;
            let mut wit: Vec<Witness> = Vec::new();
            for i in (c * CHUNK)..((c + 1) * CHUNK).min(n) {
                let s = f(i, &mut rng);
                worst = worst.max(s.violation);
                ratio = ratio.max(s.ratio);
                wit.push(s.witness);
                sort_witnesses(&mut wit);
                wit.truncate(KEEP_WITNESSES);
            }
            (worst, ratio, wit)
        })
        .collect();
    let mut worst = 0.0f64;
    let mut ratio = 0.0f64;
    let mut wit = Vec::new();
    for (w, r, ws) in per_chunk {
        worst = worst.max(w);
        ratio = ratio.max(r);
        wit.extend(ws);
    }
    sort_witnesses(&mut wit);
    wit.truncate(KEEP_WITNESSES);
    (worst, ratio, wit)
}

fn sort_witnesses(w: &mut [Witness]) {
    w.sort_by(|a, b| b.violation.total_cmp(&a.violation).then(a.sample.cmp(&b.sample)));
}

fn sample_dim(i: usize) -> usize {
    1 + i % 3
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-r..r)).collect()
}

fn rand_nonzero(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v = rand_vec(rng, n, 2.0);
        if norm(&v) > 1e-3 {
            return v;
        }
    }
}

fn rand_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMat {
    let mut m = SymMat::zeros(n);
    for i in 0..n {
        for j in i..n {
            m.set_sym(i, j, rng.gen_range(-2.0..2.0));
        }
    }
    m
}

fn rand_psd(rng: &mut ChaCha8Rng, n: usize) -> SymMat {
    // B Bᵀ, or a rank-one v ⊗ v a quarter of the time.
    if rng.gen_bool(0.25) {
        return SymMat::outer(&rand_vec(rng, n, 1.5));
    }
    let b: Vec<f64> = rand_vec(rng, n * n, 1.0);
    let mut m = SymMat::zeros(n);
    for i in 0..n {
        for j in i..n {
            let s: f64 = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum();
            m.set_sym(i, j, s);
        }
    }
    m
}

fn witness(i: usize, x: &[f64], p: &[f64], m: &SymMat, aux: Vec<f64>, violation: f64) -> Witness {
    Witness { sample: i, x: x.to_vec(), p: p.to_vec(), matrix: m.as_slice().to_vec(), aux, violation }
}

/// (H1): `F(x, tp, μX) = |t|^α μ F(x, p, X)`.
pub fn check_homogeneity(spec: &OperatorSpec, n_samples: usize, seed: u64) -> PropertyReport {
    let (worst, _, witnesses) = run_sampled(n_samples, seed, |i, rng| {
        let n = sample_dim(i);
        let x = rand_vec(rng, n, 1.0);
        let p = rand_nonzero(rng, n);
        let xm = rand_sym(rng, n);
        let t = loop {
            let t: f64 = rng.gen_range(-3.0..3.0);
            if t.abs() > 1e-3 {
                break t;
            }
        };
        let mu: f64 = rng.gen_range(0.0..3.0);
        let tp: Vec<f64> = p.iter().map(|v| t * v).collect();
        let lhs = spec.eval(&x, &tp, &xm.scale(mu)).unwrap();
        let base = spec.eval(&x, &p, &xm).unwrap();
        let factor = t.abs().powf(spec.alpha) * mu;
        let rhs = factor * base;
        let scale = (factor * norm(&p).powf(spec.alpha) * spec.big_a * xm.frobenius() * n as f64)
            .max(lhs.abs())
            .max(f64::MIN_POSITIVE);
        let v = (lhs - rhs).abs() / scale;
        Sampled { violation: v, ratio: 0.0, witness: witness(i, &x, &p, &xm, vec![t, mu], v) }
    });
    PropertyReport {
        hypothesis: Hypothesis::H1,
        label: format!("{}:homogeneity", spec.kind),
        samples_tested: n_samples,
        max_violation: worst,
        max_ratio: None,
        declared_constant: None,
        tolerance: AXIOM_TOL,
        witnesses,
    }
}

/// (H2): `a|p|^α tr N ≤ F(x,p,M+N) − F(x,p,M) ≤ A|p|^α tr N` for `N ≥ 0`.
pub fn check_ellipticity_sandwich(spec: &OperatorSpec, n_samples: usize, seed: u64) -> PropertyReport {
    let (worst, _, witnesses) = run_sampled(n_samples, seed, |i, rng| {
        let n = sample_dim(i);
        let x = rand_vec(rng, n, 1.0);
        let p = rand_nonzero(rng, n);
        let m = rand_sym(rng, n);
        let nn = rand_psd(rng, n);
        let inc = spec.eval(&x, &p, &m.add(&nn)).unwrap() - spec.eval(&x, &p, &m).unwrap();
        let pa = norm(&p).powf(spec.alpha);
        let lo = spec.a * pa * nn.trace();
        let hi = spec.big_a * pa * nn.trace();
        let scale = (pa * spec.big_a * (m.frobenius() + nn.frobenius()) * n as f64).max(f64::MIN_POSITIVE);
        let v = (lo - inc).max(inc - hi).max(0.0) / scale;
        Sampled { violation: v, ratio: 0.0, witness: witness(i, &x, &p, &m, nn.as_slice().to_vec(), v) }
    });
    PropertyReport {
        hypothesis: Hypothesis::H2,
        label: format!("{}:ellipticity_sandwich", spec.kind),
        samples_tested: n_samples,
        max_violation: worst,
        max_ratio: None,
        declared_constant: None,
        tolerance: AXIOM_TOL,
        witnesses,
    }
}

/// Degenerate ellipticity: `X ≤ Y` implies `F(x,p,X) ≤ F(x,p,Y)`.
pub fn check_degenerate_ellipticity(spec: &OperatorSpec, n_samples: usize, seed: u64) -> PropertyReport {
    let (worst, _, witnesses) = run_sampled(n_samples, seed, |i, rng| {
        let n = sample_dim(i);
        let x = rand_vec(rng, n, 1.0);
        let p = rand_nonzero(rng, n);
        let xm = rand_sym(rng, n);
        let ym = xm.add(&rand_psd(rng, n));
        let fx = spec.eval(&x, &p, &xm).unwrap();
        let fy = spec.eval(&x, &p, &ym).unwrap();
        let scale = (norm(&p).powf(spec.alpha) * spec.big_a * ym.frobenius().max(xm.frobenius()) * n as f64)
            .max(f64::MIN_POSITIVE);
        let v = (fx - fy).max(0.0) / scale;
        Sampled { violation: v, ratio: 0.0, witness: witness(i, &x, &p, &xm, ym.as_slice().to_vec(), v) }
    });
    PropertyReport {
        hypothesis: Hypothesis::H2,
        label: format!("{}:degenerate_ellipticity", spec.kind),
        samples_tested: n_samples,
        max_violation: worst,
        max_ratio: None,
        declared_constant: None,
        tolerance: AXIOM_TOL,
        witnesses,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructureCheck {
    H4,
    H6,
}

/// (H4) continuity in `x` with the linear modulus `ω̃(r) = x_modulus_scale·r`,
/// or (H6) Lipschitz dependence on the gradient for `|q| < |p|/2`.
pub fn check_structure(spec: &OperatorSpec, which: StructureCheck, n_samples: usize, seed: u64) -> PropertyReport {
    match which {
        StructureCheck::H4 => {
            let (worst, ratio, witnesses) = run_sampled(n_samples, seed, |i, rng| {
                let n = sample_dim(i);
                let x = rand_vec(rng, n, 1.0);
                let y = rand_vec(rng, n, 1.0);
                let p = rand_nonzero(rng, n);
                let xm = rand_sym(rng, n);
                let num = (spec.eval(&x, &p, &xm).unwrap() - spec.eval(&y, &p, &xm).unwrap()).abs();
                let base = norm(&p).powf(spec.alpha) * xm.op_norm().max(f64::MIN_POSITIVE);
                let c = spec.x_modulus_constant(n);
                let (v, r) = if spec.x_modulus_scale == 0.0 {
                    (num / (base * spec.big_a * n as f64), 0.0)
                } else {
                    let r = num / (spec.x_modulus_scale * crate::linalg::dist(&x, &y) * base);
                    ((r - c).max(0.0) / c.max(1.0), r)
                };
                Sampled { violation: v, ratio: r, witness: witness(i, &x, &p, &xm, y.clone(), v) }
            });
            PropertyReport {
                hypothesis: Hypothesis::H4,
                label: format!("{}:x_modulus", spec.kind),
                samples_tested: n_samples,
                max_violation: worst,
                max_ratio: Some(ratio),
                declared_constant: Some(spec.x_modulus_constant(3)),
                tolerance: AXIOM_TOL,
                witnesses,
            }
        }
        StructureCheck::H6 => {
            let (worst, ratio, witnesses) = run_sampled(n_samples, seed, |i, rng| {
                let n = sample_dim(i);
                let x = rand_vec(rng, n, 1.0);
                let p = rand_nonzero(rng, n);
                let mut q = rand_vec(rng, n, 1.0);
                let qn = norm(&q).max(f64::MIN_POSITIVE);
                let target = rng.gen_range(0.0..0.5) * norm(&p);
                q.iter_mut().for_each(|v| *v *= target / qn);
                let xm = rand_sym(rng, n);
                let pq: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a + b).collect();
                let (fa, fb) = (spec.eval(&x, &pq, &xm).unwrap(), spec.eval(&x, &p, &xm).unwrap());
                let den = norm(&p).powf(spec.alpha - 1.0) * norm(&q) * xm.op_norm();
                let (r, rounding) = if den > 0.0 { ((fa - fb).abs() / den, 8.0 * f64::EPSILON * (fa.abs() + fb.abs()) / den) } else { (0.0, 0.0) };
                let c = spec.lipschitz_in_gradient_constant(n);
                // the ratio may exceed c only by the rounding of the difference quotient
                let v = (r - c - rounding).max(0.0) / c.max(1.0);
                Sampled { violation: v, ratio: r, witness: witness(i, &x, &p, &xm, q.clone(), v) }
            });
            PropertyReport {
                hypothesis: Hypothesis::H6,
                label: format!("{}:gradient_lipschitz", spec.kind),
                samples_tested: n_samples,
                max_violation: worst,
                max_ratio: Some(ratio),
                declared_constant: Some(spec.lipschitz_in_gradient_constant(3)),
                tolerance: AXIOM_TOL,
                witnesses,
            }
        }
    }
}

/// Every sampled operator suite: H1, H2 sandwich, degenerate ellipticity, H4, H6.
pub fn check_all(spec: &OperatorSpec, n_samples: usize, seed: u64) -> Vec<PropertyReport> {
    vec![
        check_homogeneity(spec, n_samples, seed),
        check_ellipticity_sandwich(spec, n_samples, seed.wrapping_add(1)),
        check_degenerate_ellipticity(spec, n_samples, seed.wrapping_add(2)),
        check_structure(spec, StructureCheck::H4, n_samples, seed.wrapping_add(3)),
        check_structure(spec, StructureCheck::H6, n_samples, seed.wrapping_add(4)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id2() -> SymMat {
        SymMat::identity(2)
    }

    #[test]
    fn trace_alpha_zero_is_laplacian_trace() {
        let f = OperatorSpec::trace_with_power(0.0, 0.0).unwrap();
        assert_eq!(f.eval(&[0.0, 0.0], &[1.0, 0.0], &id2()).unwrap(), 2.0);
    }

    #[test]
    fn pucci_minus_weights() {
        let f = OperatorSpec::pucci_minus(1.0, 2.0, 0.0).unwrap();
        let v = f.eval(&[0.0, 0.0], &[1.0, 0.0], &SymMat::diag(&[1.0, -1.0])).unwrap();
        assert_eq!(v, -1.0);
    }

    #[test]
    fn p_laplacian_alpha_two() {
        let f = OperatorSpec::p_laplacian(2.0).unwrap();
        assert_eq!((f.a, f.big_a), (1.0, 3.0));
        let v = f.eval(&[0.0, 0.0], &[1.0, 0.0], &id2()).unwrap();
        assert_eq!(v, 4.0);
    }

    #[test]
    fn zero_gradient_and_asymmetry_rejected() {
        let f = OperatorSpec::p_laplacian(0.5).unwrap();
        assert!(matches!(f.eval(&[0.0, 0.0], &[0.0, 0.0], &id2()), Err(Error::ZeroGradient)));
        let bad = SymMat::from_row_major(2, vec![1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(f.eval(&[0.0, 0.0], &[1.0, 0.0], &bad), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn regularized_cap() {
        let f = OperatorSpec::trace_with_power(-0.5, 0.0).unwrap();
        let v = f.eval_regularized(&[0.0, 0.0], &[0.0, 0.0], &id2(), 1e-3).unwrap();
        assert!((v - (1e-3f64).powf(-0.5) * 2.0).abs() < 1e-9);
        let p = [0.6, 0.8];
        let exact = f.eval(&[0.1, 0.2], &p, &id2()).unwrap();
        let reg = f.eval_regularized(&[0.1, 0.2], &p, &id2(), 1e-3).unwrap();
        assert_eq!(exact.to_bits(), reg.to_bits());

        let g = OperatorSpec::trace_with_power(0.0, 0.0).unwrap();
        assert_eq!(g.eval_regularized(&[0.0], &[0.0], &SymMat::diag(&[3.0]), 0.1).unwrap(), 3.0);
        assert!(f.eval_regularized(&[0.0], &[0.0], &SymMat::diag(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn pucci_plus_homogeneity_by_hand() {
        let f = OperatorSpec::pucci_plus(0.5, 1.5, 0.7).unwrap();
        let x = [0.0, 0.0];
        let p = [0.3, -0.4];
        let lhs = f.eval(&x, &[-0.6, 0.8], &id2().scale(3.0)).unwrap();
        let expected = 2f64.powf(0.7) * 3.0 * 1.5 * 2.0 * 0.5f64.powf(0.7);
        assert!((lhs - expected).abs() < 1e-12);
        let rhs = 2f64.powf(0.7) * 3.0 * f.eval(&x, &p, &id2()).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn identity_inputs_have_zero_violation() {
        let f = OperatorSpec::pucci_minus(0.3, 2.0, -0.4).unwrap();
        let x = [0.2];
        let p = [0.7];
        let m = SymMat::diag(&[-1.3]);
        let v1 = f.eval(&x, &p, &m).unwrap();
        let v2 = 1f64.powf(f.alpha) * 1.0 * f.eval(&x, &p, &m.scale(1.0)).unwrap();
        assert_eq!(v1, v2);
    }

    #[test]
    fn p_laplacian_rank_one_hits_both_bounds() {
        let f = OperatorSpec::p_laplacian(2.0).unwrap();
        let x = [0.0, 0.0];
        let p = [2.0, 0.0];
        let m = SymMat::diag(&[0.3, -0.2]);
        let along = SymMat::outer(&[1.0, 0.0]);
        let inc = f.eval(&x, &p, &m.add(&along)).unwrap() - f.eval(&x, &p, &m).unwrap();
        assert!((inc - 4.0 * 3.0 * along.trace()).abs() < 1e-12);
        let across = SymMat::outer(&[0.0, 1.0]);
        let inc = f.eval(&x, &p, &m.add(&across)).unwrap() - f.eval(&x, &p, &m).unwrap();
        assert!((inc - 4.0 * 1.0 * across.trace()).abs() < 1e-12);
    }

    #[test]
    fn zero_increment_sandwich() {
        let f = OperatorSpec::pucci_plus(1.0, 2.0, 1.0).unwrap();
        let m = SymMat::diag(&[0.5, -2.0]);
        let d = f.eval(&[0.0, 0.0], &[1.0, 1.0], &m.add(&SymMat::zeros(2))).unwrap() - f.eval(&[0.0, 0.0], &[1.0, 1.0], &m).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn structure_examples() {
        let f = OperatorSpec::trace_with_power(1.0, 0.0).unwrap();
        let num = (f.eval(&[0.0], &[1.4], &SymMat::diag(&[1.0])).unwrap() - f.eval(&[0.0], &[1.0], &SymMat::diag(&[1.0])).unwrap()).abs();
        assert!((num - 0.4).abs() < 1e-15);
        assert!(num <= f.lipschitz_in_gradient_constant(1) * 0.4 * 1.0 + 1e-15);

        let h4 = check_structure(&f, StructureCheck::H4, 500, 1);
        assert_eq!(h4.max_violation, 0.0);
        let t0 = OperatorSpec::trace_with_power(0.0, 0.0).unwrap();
        let h6 = check_structure(&t0, StructureCheck::H6, 500, 2);
        assert_eq!(h6.max_ratio, Some(0.0));
    }

    #[test]
    fn derived_pairs_and_validation() {
        assert!(OperatorSpec::pucci_plus(2.0, 1.0, 0.0).is_err());
        assert!(OperatorSpec::pucci_plus(1.0, 2.0, -1.0).is_err());
        assert!(OperatorSpec::new(OperatorKind::PLaplacianNonvariational, Some(0.5), None, 2.0, 0.0).is_err());
        assert!(OperatorSpec::new(OperatorKind::PucciPlus, Some(1.0), Some(2.0), 0.0, 1.0).is_err());
        let p = OperatorSpec::p_laplacian(-0.5).unwrap();
        assert_eq!((p.a, p.big_a), (0.5, 1.0));
        let t = OperatorSpec::trace_with_power(0.3, 2.0).unwrap();
        assert_eq!((t.a, t.big_a), (0.5, 1.5));
    }

    #[test]
    fn linearization_reproduces_eval() {
        let x = [0.1, -0.3];
        let p = [0.4, 0.9];
        let m = SymMat::from_rows(&[vec![0.7, -1.1], vec![-1.1, 0.2]]).unwrap();
        for spec in [
            OperatorSpec::pucci_plus(0.5, 2.0, 0.5).unwrap(),
            OperatorSpec::pucci_minus(0.5, 2.0, -0.5).unwrap(),
            OperatorSpec::p_laplacian(1.5).unwrap(),
            OperatorSpec::trace_with_power(0.5, 1.0).unwrap(),
        ] {
            let (pf, q) = spec.linearize(&x, &p, &m, 1e-3);
            let direct = spec.eval_regularized(&x, &p, &m, 1e-3).unwrap();
            assert!((pf * q.frob_dot(&m) - direct).abs() < 1e-12, "{}", spec.kind);
            for l in q.eigenvalues() {
                assert!(l >= spec.a - 1e-12 && l <= spec.big_a + 1e-12);
            }
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let f = OperatorSpec::pucci_plus(0.5, 2.0, 0.3).unwrap();
        let a = check_ellipticity_sandwich(&f, 1000, 9);
        let b = check_ellipticity_sandwich(&f, 1000, 9);
        assert_eq!(a, b);
    }
}
