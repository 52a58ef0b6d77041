//! Registry of closed-form scalar and vector fields used for `ψ`, `f` and `h`.
//!
//! Each family reports analytic bounds (sup norm, spatial Hölder constant,
//! time Lipschitz constant) over a bounding region; these default the
//! regularity constants of a problem and are cross-checked by sampling.

use crate::linalg::{dist, dot, norm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Axis-aligned region over which constants are computed.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub t_final: f64,
}

impl Region {
    pub fn diam(&self) -> f64 {
        dist(&self.lo, &self.hi)
    }

    fn farthest_from(&self, c: &[f64]) -> f64 {
        let far: Vec<f64> = (0..self.lo.len())
            .map(|k| (c.get(k).copied().unwrap_or(0.0) - self.lo[k]).abs().max((self.hi[k] - c.get(k).copied().unwrap_or(0.0)).abs()))
            .collect();
        norm(&far)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScalarField {
    Zero,
    Constant { value: f64 },
    /// `A Π_k sin(k π x_k)`.
    Sine {
        amplitude: f64,
        #[serde(default = "one")]
        wavenumber: f64,
    },
    /// `A |x − c|^e` (empty `center` means the origin).
    AbsPower {
        amplitude: f64,
        #[serde(default)]
        center: Vec<f64>,
        exponent: f64,
    },
    /// `Σ_j a_j sin(ω_j·x + θ_j)` with seeded modes, `Σ|a_j| = amplitude`.
    Fourier {
        amplitude: f64,
        modes: usize,
        seed: u64,
        #[serde(default = "one")]
        max_frequency: f64,
    },
    /// `r t`.
    TimeLinear { rate: f64 },
    /// `A sin(ω t)`.
    TimeSine { amplitude: f64, frequency: f64 },
    /// `c t²`.
    TimeQuadratic { coeff: f64 },
    Sum { terms: Vec<ScalarField> },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug)]
pub struct Mode {
    a: f64,
    omega: Vec<f64>,
    phase: f64,
}

fn fourier_modes(dim: usize, amplitude: f64, modes: usize, seed: u64, max_frequency: f64) -> Vec<Mode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<(f64, Vec<f64>, f64)> = (0..modes.max(1))
        .map(|_| {
            let w: f64 = rng.gen_range(0.1..1.0);
            let omega: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0) * max_frequency * PI).collect();
            let ph: f64 = rng.gen_range(0.0..2.0 * PI);
            (w, omega, ph)
        })
        .collect();
    let total: f64 = raw.iter().map(|r| r.0).sum();
    raw.into_iter().map(|(w, omega, phase)| Mode { a: amplitude * w / total, omega, phase }).collect()
}

impl ScalarField {
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            ScalarField::Zero => 0.0,
            ScalarField::Constant { value } => *value,
            ScalarField::Sine { amplitude, wavenumber } => {
                amplitude * x.iter().map(|v| (wavenumber * PI * v).sin()).product::<f64>()
            }
            ScalarField::AbsPower { amplitude, center, exponent } => {
                let r = radius(x, center);
                if r == 0.0 {
                    if *exponent > 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    amplitude * r.powf(*exponent)
                }
            }
            ScalarField::Fourier { amplitude, modes, seed, max_frequency } => {
                fourier_modes(x.len(), *amplitude, *modes, *seed, *max_frequency)
                    .iter()
                    .map(|m| m.a * (dot(&m.omega, x) + m.phase).sin())
                    .sum()
            }
            ScalarField::TimeLinear { rate } => rate * t,
            ScalarField::TimeSine { amplitude, frequency } => amplitude * (frequency * t).sin(),
            ScalarField::TimeQuadratic { coeff } => coeff * t * t,
            ScalarField::Sum { terms } => terms.iter().map(|f| f.eval(x, t)).sum(),
        }
    }

    /// Evaluator with any per-field setup (Fourier modes) hoisted out.
    pub fn compile(&self, dim: usize) -> CompiledField {
        match self {
            ScalarField::Fourier { amplitude, modes, seed, max_frequency } => {
                CompiledField::Fourier(fourier_modes(dim, *amplitude, *modes, *seed, *max_frequency))
            }
            ScalarField::Sum { terms } => CompiledField::Sum(terms.iter().map(|t| t.compile(dim)).collect()),
            other => CompiledField::Plain(other.clone()),
        }
    }

    pub fn is_time_independent(&self) -> bool {
        match self {
            ScalarField::TimeLinear { rate } => *rate == 0.0,
            ScalarField::TimeSine { amplitude, frequency } => *amplitude == 0.0 || *frequency == 0.0,
            ScalarField::TimeQuadratic { coeff } => *coeff == 0.0,
            ScalarField::Sum { terms } => terms.iter().all(|t| t.is_time_independent()),
            _ => true,
        }
    }

    pub fn is_space_independent(&self) -> bool {
        match self {
            ScalarField::Sine { amplitude, .. } => *amplitude == 0.0,
            ScalarField::AbsPower { amplitude, .. } => *amplitude == 0.0,
            ScalarField::Fourier { amplitude, .. } => *amplitude == 0.0,
            ScalarField::Sum { terms } => terms.iter().all(|t| t.is_space_independent()),
            _ => true,
        }
    }

    /// Whether the field is bounded on all of `ℝᴺ` for bounded times.
    pub fn is_globally_bounded(&self) -> bool {
        match self {
            ScalarField::AbsPower { amplitude, exponent, .. } => *amplitude == 0.0 || *exponent == 0.0,
            ScalarField::Sum { terms } => terms.iter().all(|t| t.is_globally_bounded()),
            _ => true,
        }
    }

    /// Upper bound for `sup |field|` over the region.
    pub fn sup_abs(&self, reg: &Region) -> f64 {
        match self {
            ScalarField::Zero => 0.0,
            ScalarField::Constant { value } => value.abs(),
            ScalarField::Sine { amplitude, .. } => amplitude.abs(),
            ScalarField::AbsPower { amplitude, center, exponent } => {
                if *exponent >= 0.0 {
                    amplitude.abs() * reg.farthest_from(center).powf(*exponent)
                } else {
                    f64::INFINITY
                }
            }
            ScalarField::Fourier { amplitude, .. } => amplitude.abs(),
            ScalarField::TimeLinear { rate } => rate.abs() * reg.t_final,
            ScalarField::TimeSine { amplitude, .. } => amplitude.abs(),
            ScalarField::TimeQuadratic { coeff } => coeff.abs() * reg.t_final * reg.t_final,
            ScalarField::Sum { terms } => terms.iter().map(|f| f.sup_abs(reg)).sum(),
        }
    }

    /// Upper bound for the spatial Hölder-`gamma` constant over the region
    /// (over all of `ℝᴺ` for bounded families).
    pub fn holder_x(&self, gamma: f64, reg: &Region) -> f64 {
        let lip_osc = |lip: f64, osc: f64| -> f64 {
            if lip == 0.0 || osc == 0.0 {
                0.0
            } else {
                lip.powf(gamma) * osc.powf(1.0 - gamma)
            }
        };
        let n = reg.lo.len() as f64;
        match self {
            ScalarField::Sine { amplitude, wavenumber } => {
                let a = amplitude.abs();
                lip_osc(a * wavenumber.abs() * PI * n.sqrt(), 2.0 * a)
            }
            ScalarField::AbsPower { amplitude, center, exponent } => {
                let a = amplitude.abs();
                let e = *exponent;
                let rmax = reg.farthest_from(center);
                let d = reg.diam();
                if a == 0.0 || e == 0.0 {
                    0.0
                } else if e <= 1.0 {
                    if gamma <= e {
                        a * d.powf(e - gamma)
                    } else {
                        f64::INFINITY
                    }
                } else {
                    a * e * rmax.powf(e - 1.0) * d.powf(1.0 - gamma)
                }
            }
            ScalarField::Fourier { amplitude, modes, seed, max_frequency } => {
                let ms = fourier_modes(reg.lo.len(), *amplitude, *modes, *seed, *max_frequency);
                let lip: f64 = ms.iter().map(|m| m.a.abs() * norm(&m.omega)).sum();
                lip_osc(lip, 2.0 * amplitude.abs())
            }
            ScalarField::Sum { terms } => terms.iter().map(|f| f.holder_x(gamma, reg)).sum(),
            _ => 0.0,
        }
    }

    /// Upper bound for the time Lipschitz constant over `[0, T]`.
    pub fn lip_t(&self, reg: &Region) -> f64 {
        match self {
            ScalarField::TimeLinear { rate } => rate.abs(),
            ScalarField::TimeSine { amplitude, frequency } => (amplitude * frequency).abs(),
            ScalarField::TimeQuadratic { coeff } => 2.0 * coeff.abs() * reg.t_final,
            ScalarField::Sum { terms } => terms.iter().map(|f| f.lip_t(reg)).sum(),
            _ => 0.0,
        }
    }

    /// Time Hölder-`gamma_f` constant on `[0, T]`, derived from the Lipschitz bound.
    pub fn holder_t(&self, gamma_f: f64, reg: &Region) -> f64 {
        self.lip_t(reg) * reg.t_final.powf(1.0 - gamma_f)
    }

    /// Lower bound of the field over the region (used for ordered-data checks).
    pub fn inf(&self, reg: &Region) -> f64 {
        match self {
            ScalarField::Zero => 0.0,
            ScalarField::Constant { value } => *value,
            ScalarField::AbsPower { amplitude, exponent, .. } if *amplitude >= 0.0 && *exponent > 0.0 => 0.0,
            ScalarField::TimeLinear { rate } => (rate * reg.t_final).min(0.0),
            ScalarField::TimeQuadratic { coeff } => (coeff * reg.t_final * reg.t_final).min(0.0),
            ScalarField::Sum { terms } => terms.iter().map(|f| f.inf(reg)).sum(),
            other => -other.sup_abs(reg),
        }
    }

    pub fn sup(&self, reg: &Region) -> f64 {
        match self {
            ScalarField::Zero => 0.0,
            ScalarField::Constant { value } => *value,
            ScalarField::TimeLinear { rate } => (rate * reg.t_final).max(0.0),
            ScalarField::TimeQuadratic { coeff } => (coeff * reg.t_final * reg.t_final).max(0.0),
            ScalarField::Sum { terms } => terms.iter().map(|f| f.sup(reg)).sum(),
            other => other.sup_abs(reg),
        }
    }
}

fn radius(x: &[f64], center: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(k, v)| {
            let d = v - center.get(k).copied().unwrap_or(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Pre-processed evaluator for hot loops.
#[derive(Clone, Debug)]
pub enum CompiledField {
    Plain(ScalarField),
    Fourier(Vec<Mode>),
    Sum(Vec<CompiledField>),
}

impl CompiledField {
    #[inline]
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            CompiledField::Plain(f) => f.eval(x, t),
            CompiledField::Fourier(ms) => ms.iter().map(|m| m.a * (dot(&m.omega, x) + m.phase).sin()).sum(),
            CompiledField::Sum(ts) => ts.iter().map(|f| f.eval(x, t)).sum(),
        }
    }
}

/// Drift families for `h(x, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum VectorField {
    Zero,
    Constant { value: Vec<f64> },
    /// `v sin(ω t)`.
    TimeSine { value: Vec<f64>, frequency: f64 },
    /// `−r (x − c)`: monotone in `x` for `r ≥ 0`.
    Contraction {
        rate: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
}

impl VectorField {
    pub fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        match self {
            VectorField::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            VectorField::Constant { value } => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = value.get(k).copied().unwrap_or(0.0);
                }
            }
            VectorField::TimeSine { value, frequency } => {
                let s = (frequency * t).sin();
                for (k, o) in out.iter_mut().enumerate() {
                    *o = value.get(k).copied().unwrap_or(0.0) * s;
                }
            }
            VectorField::Contraction { rate, center } => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = -rate * (x[k] - center.get(k).copied().unwrap_or(0.0));
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut v = vec![0.0; x.len()];
        self.eval_into(x, t, &mut v);
        v
    }

    pub fn is_zero(&self) -> bool {
        match self {
            VectorField::Zero => true,
            VectorField::Constant { value } | VectorField::TimeSine { value, .. } => value.iter().all(|v| *v == 0.0),
            VectorField::Contraction { rate, .. } => *rate == 0.0,
        }
    }

    pub fn sup_abs(&self, reg: &Region) -> f64 {
        match self {
            VectorField::Zero => 0.0,
            VectorField::Constant { value } | VectorField::TimeSine { value, .. } => norm(value),
            VectorField::Contraction { rate, center } => rate.abs() * reg.farthest_from(center),
        }
    }

    /// Time Hölder-`omega` constant over `[0, T]`.
    pub fn holder_t(&self, omega: f64, _reg: &Region) -> f64 {
        match self {
            VectorField::TimeSine { value, frequency } => {
                let lip = norm(value) * frequency.abs();
                let osc = 2.0 * norm(value);
                if lip == 0.0 {
                    0.0
                } else {
                    lip.powf(omega) * osc.powf(1.0 - omega)
                }
            }
            _ => 0.0,
        }
    }

    /// Spatial Hölder-`beta` constant over the region.
    pub fn holder_x(&self, beta: f64, reg: &Region) -> f64 {
        match self {
            VectorField::Contraction { rate, .. } => rate.abs() * reg.diam().powf(1.0 - beta),
            _ => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Region {
        Region { lo: vec![0.0], hi: vec![1.0], t_final: 1.0 }
    }

    #[test]
    fn families_evaluate() {
        let s = ScalarField::Sine { amplitude: 1.0, wavenumber: 1.0 };
        assert!((s.eval(&[0.5], 0.0) - 1.0).abs() < 1e-15);
        let p = ScalarField::AbsPower { amplitude: 2.0, center: vec![0.5], exponent: 0.5 };
        assert!((p.eval(&[0.75], 3.0) - 1.0).abs() < 1e-15);
        let sum = ScalarField::Sum { terms: vec![s.clone(), ScalarField::TimeLinear { rate: 2.0 }] };
        assert!((sum.eval(&[0.5], 0.25) - 1.5).abs() < 1e-15);
        assert!(!sum.is_time_independent());
    }

    #[test]
    fn declared_constants_dominate_samples() {
        let reg = Region { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0], t_final: 1.0 };
        let fields = [
            ScalarField::Sine { amplitude: 0.7, wavenumber: 2.0 },
            ScalarField::AbsPower { amplitude: 1.0, center: vec![0.2, 0.0], exponent: 0.5 },
            ScalarField::AbsPower { amplitude: 1.0, center: vec![], exponent: 1.5 },
            ScalarField::Fourier { amplitude: 1.0, modes: 4, seed: 3, max_frequency: 1.5 },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for f in &fields {
            let c = f.holder_x(0.5, &reg);
            let cf = f.compile(2);
            for _ in 0..4000 {
                let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let y = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let r = dist(&x, &y).powf(0.5);
                assert!((cf.eval(&x, 0.0) - cf.eval(&y, 0.0)).abs() <= c * r * (1.0 + 1e-12) + 1e-15, "{f:?}");
                assert!(cf.eval(&x, 0.0).abs() <= f.sup_abs(&reg) + 1e-12);
            }
        }
    }

    #[test]
    fn time_constants() {
        let f = ScalarField::TimeQuadratic { coeff: 0.5 };
        assert_eq!(f.lip_t(&unit()), 1.0);
        assert_eq!(f.holder_x(0.3, &unit()), 0.0);
        let h = VectorField::Contraction { rate: 2.0, center: vec![] };
        assert_eq!(h.eval(&[0.5], 0.0), vec![-1.0]);
    }
}
