//! Monotone second-order stencils on the `3^N` neighbourhood for `N = 2, 3`.
//!
//! For a coefficient matrix `Q` the stencil
//! `M(Q; u) = Σ_k w_k Δ_k u + Σ_{k<l} |q_kl| / (h_k h_l) · E^±_kl u`
//! has nonnegative neighbour weights whenever `Q` is diagonally dominant in
//! the scaled sense `w_k = q_kk − Σ_{l≠k} |q_kl| h_k / h_l ≥ 0`; `E^±` is the
//! raw second difference along `e_k ± e_l`, picked by the sign of `q_kl`.
//! Suprema and infima of such stencils over `Q` stay monotone.

use crate::linalg::SymMat;
use crate::operators::{OperatorKind, OperatorSpec};
use std::f64::consts::PI;

pub(crate) const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

fn n_pairs(n: usize) -> usize {
    if n == 2 {
        1
    } else {
        3
    }
}

/// Differences of `u` around one node.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Local {
    pub n: usize,
    /// `(u(x + h_k e_k) − u(x)) / h_k`.
    pub fp: [f64; 3],
    /// `(u(x − h_k e_k) − u(x)) / h_k`.
    pub fm: [f64; 3],
    /// `(fp + fm) / h_k`.
    pub delta: [f64; 3],
    /// `u(x + h_k e_k + h_l e_l) + u(x − h_k e_k − h_l e_l) − 2u(x)` per pair.
    pub ep: [f64; 3],
    /// `u(x + h_k e_k − h_l e_l) + u(x − h_k e_k + h_l e_l) − 2u(x)` per pair.
    pub em: [f64; 3],
}

/// Stencil weights of one coefficient matrix.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Weights {
    n: usize,
    axis: [f64; 3],
    diag: [f64; 3],
    plus: [bool; 3],
}

impl Weights {
    pub fn of(q: &SymMat, h: &[f64]) -> Self {
        let n = q.dim();
        let mut w = Weights { n, axis: [0.0; 3], diag: [0.0; 3], plus: [true; 3] };
        for k in 0..n {
            w.axis[k] = q.get(k, k);
        }
        for (p, &(k, l)) in PAIRS.iter().take(n_pairs(n)).enumerate() {
            let qkl = q.get(k, l);
            w.axis[k] -= qkl.abs() * h[k] / h[l];
            w.axis[l] -= qkl.abs() * h[l] / h[k];
            w.diag[p] = qkl.abs() / (h[k] * h[l]);
            w.plus[p] = qkl >= 0.0;
        }
        w
    }

    pub fn min_axis(&self) -> f64 {
        self.axis[..self.n].iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn n_max(&self) -> f64 {
        self.axis[..self.n].iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE)
    }

    #[inline]
    pub fn apply(&self, loc: &Local) -> f64 {
        let mut s = 0.0;
        for k in 0..loc.n {
            s += self.axis[k] * loc.delta[k];
        }
        for p in 0..n_pairs(loc.n) {
            s += self.diag[p] * if self.plus[p] { loc.ep[p] } else { loc.em[p] };
        }
        s
    }
}

/// Unit directions, one per antipodal pair, spaced about `spacing` apart.
fn directions(n: usize, spacing: f64) -> Vec<[f64; 3]> {
    if n == 2 {
        let m = (PI / spacing).ceil().max(4.0) as usize;
        (0..m)
            .map(|j| {
                let th = PI * j as f64 / m as f64;
                [th.cos(), th.sin(), 0.0]
            })
            .collect()
    } else {
        let m = (2.0 * PI / (spacing * spacing)).ceil().max(13.0) as usize;
        let golden = PI * (3.0 - 5f64.sqrt());
        (0..m)
            .map(|j| {
                let z = (j as f64 + 0.5) / m as f64;
                let r = (1.0 - z * z).sqrt();
                let ph = golden * j as f64;
                [r * ph.cos(), r * ph.sin(), z]
            })
            .collect()
    }
}

fn outer(v: &[f64; 3], n: usize) -> SymMat {
    SymMat::outer(&v[..n])
}

/// Weight of the one-sided slope terms in the direction-selecting stencil.
pub(crate) fn selection_weight(h: &[f64]) -> f64 {
    1.0 / h.iter().copied().fold(f64::INFINITY, f64::min).sqrt()
}

/// Direction spacing of the candidate sets.
fn spacing(h: &[f64]) -> f64 {
    h.iter().copied().fold(f64::INFINITY, f64::min).sqrt()
}

/// The normalized second-order part `N(x, p̂, X)` of an operator, discretized monotonically.
#[derive(Clone, Debug)]
pub(crate) enum NdStencil {
    /// `c(x) Σ_k Δ_k u`; `c ≡ 1` when `scaled` is false.
    Laplacian { scaled: bool },
    /// Exact supremum (`plus`) or infimum of `M(Q; u)` over `a I ≤ Q ≤ A I` in two dimensions.
    Pucci2 { a: f64, big_a: f64, plus: bool, h: [f64; 2] },
    /// Extremum of `M(Q; u)` over the extreme points of `a I ≤ Q ≤ A I` with directions from a finite set.
    PucciSet { cands: Vec<Weights>, plus: bool },
    /// `½ [max_v (M(Q_v) + K σ⁺_v) + min_v (M(Q_v) − K σ⁻_v)]` with `Q_v = I + α v vᵀ`
    /// and one-sided slopes `σ^±_v` along `±v`: the slope terms steer both
    /// extrema to the direction of the gradient.
    Select { cands: Vec<(Weights, [f64; 3])>, k: f64 },
}

impl NdStencil {
    pub fn build(op: &OperatorSpec, h: &[f64]) -> Self {
        let n = h.len();
        match op.kind {
            OperatorKind::TraceWithPower => NdStencil::Laplacian { scaled: true },
            OperatorKind::PLaplacianNonvariational if op.alpha == 0.0 => NdStencil::Laplacian { scaled: false },
            OperatorKind::PLaplacianNonvariational => {
                let cands = directions(n, spacing(h))
                    .into_iter()
                    .map(|v| (Weights::of(&SymMat::identity(n).add(&outer(&v, n).scale(op.alpha)), h), v))
                    .collect();
                NdStencil::Select { cands, k: selection_weight(h) }
            }
            OperatorKind::PucciPlus | OperatorKind::PucciMinus => {
                let plus = op.kind == OperatorKind::PucciPlus;
                if n == 2 {
                    NdStencil::Pucci2 { a: op.a, big_a: op.big_a, plus, h: [h[0], h[1]] }
                } else {
                    let (a, big_a) = (op.a, op.big_a);
                    let mut cands = vec![Weights::of(&SymMat::identity(n).scale(a), h), Weights::of(&SymMat::identity(n).scale(big_a), h)];
                    for v in directions(n, spacing(h)) {
                        let p = outer(&v, n).scale(big_a - a);
                        cands.push(Weights::of(&SymMat::identity(n).scale(a).add(&p), h));
                        cands.push(Weights::of(&SymMat::identity(n).scale(big_a).sub(&p), h));
                    }
                    NdStencil::PucciSet { cands, plus }
                }
            }
        }
    }

    /// Smallest axis weight over every coefficient matrix the stencil can use
    /// (relative to the largest eigenvalue); negative means not monotone.
    pub fn margin(&self) -> f64 {
        match self {
            NdStencil::Laplacian { .. } => 1.0,
            NdStencil::Pucci2 { a, big_a, h, .. } => {
                // min over θ of q_kk − r|q_kl| on a I + (A − a) v vᵀ is a + (A − a)(1 − √(1 + r²))/2
                [h[0] / h[1], h[1] / h[0]].iter().map(|r| (a + (big_a - a) * (1.0 - (1.0 + r * r).sqrt()) / 2.0) / big_a).fold(f64::INFINITY, f64::min)
            }
            NdStencil::PucciSet { cands, .. } => cands.iter().map(|w| w.min_axis() / w.n_max()).fold(f64::INFINITY, f64::min),
            NdStencil::Select { cands, .. } => cands.iter().map(|(w, _)| w.min_axis() / w.n_max()).fold(f64::INFINITY, f64::min),
        }
    }

    /// Largest center weight of the stencil, `|∂N_h / ∂u(x)|`, excluding the coefficient `c(x)`.
    pub fn center_bound(&self, op: &OperatorSpec, h: &[f64]) -> f64 {
        let lap: f64 = h.iter().map(|hk| 2.0 / (hk * hk)).sum();
        match self {
            NdStencil::Laplacian { .. } => lap,
            NdStencil::Pucci2 { big_a, .. } => big_a * lap,
            NdStencil::PucciSet { .. } => op.big_a * lap,
            NdStencil::Select { k, .. } => (1.0f64).max(1.0 + op.alpha) * lap + k * h.iter().map(|hk| 1.0 / hk).sum::<f64>(),
        }
    }

    #[inline]
    pub fn apply(&self, loc: &Local, coefficient: f64) -> f64 {
        match self {
            NdStencil::Laplacian { scaled } => {
                let s: f64 = loc.delta[..loc.n].iter().sum();
                if *scaled {
                    coefficient * s
                } else {
                    s
                }
            }
            NdStencil::Pucci2 { a, big_a, plus, h } => pucci2(loc, *a, *big_a, *plus, h),
            NdStencil::PucciSet { cands, plus } => {
                let it = cands.iter().map(|w| w.apply(loc));
                if *plus {
                    it.fold(f64::NEG_INFINITY, f64::max)
                } else {
                    it.fold(f64::INFINITY, f64::min)
                }
            }
            NdStencil::Select { cands, k } => {
                let mut hi = f64::NEG_INFINITY;
                let mut lo = f64::INFINITY;
                for (w, v) in cands {
                    let m = w.apply(loc);
                    let (mut fwd, mut bwd) = (0.0, 0.0);
                    for j in 0..loc.n {
                        let (a, b) = if v[j] >= 0.0 { (loc.fp[j], loc.fm[j]) } else { (loc.fm[j], loc.fp[j]) };
                        fwd += v[j].abs() * a;
                        bwd += v[j].abs() * b;
                    }
                    hi = hi.max(m + k * fwd.max(bwd));
                    lo = lo.min(m + k * fwd.min(bwd));
                }
                0.5 * (hi + lo)
            }
        }
    }
}

/// `sup` (or `inf`) over `a I ≤ Q ≤ A I` of `M(Q; u)` in two dimensions.
///
/// On the stencil, `M(Q) = tr(Q Y(b))` with the off-diagonal `b` equal to
/// `B⁺` or `B⁻` by the sign of `q₁₂`, so `M` is the max (if `B⁻ ≤ B⁺`) or the
/// min of two linear functions of `Q`; the extremum then reduces by minimax to
/// a Pucci value of `Y(b)`, which depends on `b` only through `|b|`.
fn pucci2(loc: &Local, a: f64, big_a: f64, plus: bool, h: &[f64; 2]) -> f64 {
    let (d1, d2) = (loc.delta[0], loc.delta[1]);
    let base = h[0] * h[0] * d1 + h[1] * h[1] * d2;
    let hh = 2.0 * h[0] * h[1];
    let bp = (loc.ep[0] - base) / hh;
    let bm = -(loc.em[0] - base) / hh;
    let m = 0.5 * (d1 + d2);
    let half = 0.5 * (d1 - d2);
    let value = |b: f64| {
        let rho = half.hypot(b);
        let s = |l: f64| {
            if plus {
                if l > 0.0 {
                    big_a * l
                } else {
                    a * l
                }
            } else if l > 0.0 {
                a * l
            } else {
                big_a * l
            }
        };
        s(m + rho) + s(m - rho)
    };
    let nearest_zero = |x: f64, y: f64| {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        0.0f64.clamp(lo, hi)
    };
    let max_type = bm <= bp;
    match (plus, max_type) {
        (true, true) => value(bp).max(value(bm)),
        (true, false) => value(nearest_zero(bp, bm)),
        (false, true) => value(nearest_zero(bp, bm)),
        (false, false) => value(bp).min(value(bm)),
    }
}
