//! Declarative run configuration (TOML).

use crate::barriers::EnvelopeOptions;
use crate::domain::{make_domain, DomainSpec, Geometry};
use crate::error::{Error, Result};
use crate::fields::{ScalarField, VectorField};
use crate::operators::{OperatorKind, OperatorSpec};
use crate::scheme::{ConstantOverrides, ProblemParams, ProblemSpec, SAFETY};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorBlock {
    pub kind: OperatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, rename = "A", skip_serializing_if = "Option::is_none")]
    pub big_a: Option<f64>,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub x_modulus_scale: f64,
}

impl OperatorBlock {
    pub fn build(&self) -> Result<OperatorSpec> {
        OperatorSpec::new(self.kind, self.a, self.big_a, self.alpha, self.x_modulus_scale)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainBlock {
    Interval { lo: f64, hi: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    LShape { side: f64 },
    /// `ℝᴺ`, solved on `[−half_width, half_width]ᴺ`.
    WholeSpace { dim: usize, half_width: f64 },
}

impl DomainBlock {
    pub fn is_whole_space(&self) -> bool {
        matches!(self, DomainBlock::WholeSpace { .. })
    }

    /// The bounded domain, or the truncation box on the whole space.
    pub fn build(&self) -> Result<DomainSpec> {
        match self.clone() {
            DomainBlock::Interval { lo, hi } => make_domain(Geometry::Interval { lo, hi }),
            DomainBlock::Box { lo, hi } => make_domain(Geometry::Box { lo, hi }),
            DomainBlock::Ball { center, radius } => make_domain(Geometry::Ball { center, radius }),
            DomainBlock::LShape { side } => make_domain(Geometry::LShape { side }),
            DomainBlock::WholeSpace { dim, half_width } => {
                if dim == 0 || dim > crate::domain::MAX_DIM || !(half_width > 0.0) {
                    return Err(Error::InvalidDomain(format!("whole_space needs dim in 1..=3 and half_width > 0, got {dim}, {half_width}")));
                }
                crate::scheme::truncation_box(dim, half_width)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub psi: ScalarField,
    #[serde(default = "zero_scalar")]
    pub f: ScalarField,
    #[serde(default = "zero_vector")]
    pub h: VectorField,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "one")]
    pub gamma_f: f64,
    #[serde(default = "one")]
    pub omega_h: f64,
    #[serde(default)]
    pub constants: ConstantOverrides,
}

impl ProblemBlock {
    pub fn params(&self) -> ProblemParams {
        ProblemParams {
            h: self.h.clone(),
            f: self.f.clone(),
            psi: self.psi.clone(),
            gamma: self.gamma,
            gamma_f: self.gamma_f,
            omega_h: self.omega_h,
            constants: self.constants.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsBlock {
    #[serde(default = "default_dx")]
    pub dx: f64,
    /// Gradient regularization; defaults to `dx`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default)]
    pub seed: u64,
    /// Samples per operator property suite.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Tolerance for certifying the scheme output.
    #[serde(default = "default_cert_tol")]
    pub cert_tol: f64,
    /// Tolerance for certifying the envelopes.
    #[serde(default)]
    pub envelope_tol: f64,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        Self {
            dx: default_dx(),
            eps: None,
            safety: default_safety(),
            seed: 0,
            samples: default_samples(),
            cert_tol: default_cert_tol(),
            envelope_tol: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsBlock {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_every")]
    pub record_every: usize,
}

impl Default for OutputsBlock {
    fn default() -> Self {
        Self { directory: default_dir(), record_every: default_every() }
    }
}

/// Closed-form reference solution for error reporting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Oracle {
    /// `A e^{−N (kπ)² t} Π sin(kπ x_i)`.
    HeatSine {
        amplitude: f64,
        #[serde(default = "one")]
        wavenumber: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
    },
    /// `u = ψ(·, 0)`.
    Stationary {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
    },
    /// `u = r t`.
    TimeLinear {
        rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
    },
}

impl Oracle {
    pub fn eval(&self, psi: &ScalarField, x: &[f64], t: f64) -> f64 {
        match self {
            Oracle::HeatSine { amplitude, wavenumber, .. } => {
                let k = wavenumber * std::f64::consts::PI;
                amplitude * (-(x.len() as f64) * k * k * t).exp() * x.iter().map(|v| (k * v).sin()).product::<f64>()
            }
            Oracle::Stationary { .. } => psi.eval(x, 0.0),
            Oracle::TimeLinear { rate, .. } => rate * t,
        }
    }

    /// Error bound; `5 dx` unless set.
    pub fn tol(&self, dx: f64) -> f64 {
        let t = match self {
            Oracle::HeatSine { tol, .. } | Oracle::Stationary { tol } | Oracle::TimeLinear { tol, .. } => *tol,
        };
        t.unwrap_or(5.0 * dx)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Dx,
    Alpha,
    Gamma,
    Eps,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Dx => "dx",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Gamma => "gamma",
            SweepAxis::Eps => "eps",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dx" => Ok(SweepAxis::Dx),
            "alpha" => Ok(SweepAxis::Alpha),
            "gamma" => Ok(SweepAxis::Gamma),
            "eps" => Ok(SweepAxis::Eps),
            _ => Err(Error::Config(format!("unknown sweep axis `{s}` (expected dx, alpha, gamma or eps)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Second instance of a comparison run; unset fields copy the first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<ScalarField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<ScalarField>,
    #[serde(default = "default_compare_tol")]
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsBlock {
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    #[serde(default = "one_list")]
    pub gamma_f: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerronBlock {
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
    #[serde(default = "default_perron_tol")]
    pub tol: f64,
    #[serde(default)]
    pub gauss_seidel: bool,
}

impl Default for PerronBlock {
    fn default() -> Self {
        Self { max_sweeps: default_sweeps(), tol: default_perron_tol(), gauss_seidel: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub operator: OperatorBlock,
    pub domain: DomainBlock,
    pub problem: ProblemBlock,
    #[serde(default)]
    pub numerics: NumericsBlock,
    #[serde(default)]
    pub outputs: OutputsBlock,
    #[serde(default)]
    pub envelope: EnvelopeOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<Oracle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<ExponentsBlock>,
    #[serde(default)]
    pub perron: PerronBlock,
}

/// 1-based line of `[section]` in `text`, if present.
fn section_line(text: &str, section: &str) -> Option<usize> {
    let header = format!("[{section}]");
    text.lines().position(|l| l.trim() == header).map(|i| i + 1)
}

impl RunConfig {
    /// Parses and validates; errors name the offending line where possible.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let at = |section: &str, e: Error| {
            let loc = section_line(text, section).map(|l| format!("line {l}, ")).unwrap_or_default();
            Error::Config(format!("{loc}[{section}]: {e}"))
        };
        cfg.operator.build().map_err(|e| at("operator", e))?;
        cfg.domain.build().map_err(|e| at("domain", e))?;
        let n = &cfg.numerics;
        if !(n.dx > 0.0) || !n.dx.is_finite() {
            return Err(at("numerics", Error::InvalidArgument(format!("dx must be > 0, got {}", n.dx))));
        }
        if !(n.safety > 0.0 && n.safety <= 1.0) {
            return Err(at("numerics", Error::InvalidArgument(format!("safety must lie in (0, 1], got {}", n.safety))));
        }
        if cfg.outputs.record_every == 0 {
            return Err(at("outputs", Error::InvalidArgument("record_every must be >= 1".into())));
        }
        if let Some(s) = &cfg.sweep {
            if s.values.is_empty() {
                return Err(at("sweep", Error::InvalidArgument("sweep needs at least one value".into())));
            }
        }
        cfg.problem().map_err(|e| at("problem", e))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn eps(&self) -> f64 {
        self.numerics.eps.unwrap_or(self.numerics.dx)
    }

    /// The problem; on the whole space its domain is the truncation box.
    pub fn problem(&self) -> Result<ProblemSpec> {
        let op = self.operator.build()?;
        let dom = self.domain.build()?;
        let params = self.problem.params();
        let p = if self.domain.is_whole_space() {
            ProblemSpec::whole_space(op, dom, self.problem.t_final, params, self.eps())?
        } else {
            ProblemSpec::new(op, dom, self.problem.t_final, params, self.eps())?
        };
        p.with_safety(self.numerics.safety)
    }

    /// The upper instance of a comparison run.
    pub fn compare_problem(&self) -> Result<ProblemSpec> {
        let c = self.compare.as_ref().ok_or_else(|| Error::Config("compare needs a [compare] block".into()))?;
        let mut params = self.problem.params();
        if let Some(f) = &c.f {
            params.f = f.clone();
        }
        if let Some(psi) = &c.psi {
            params.psi = psi.clone();
        }
        self.problem()?.with_params(params)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    /// Flat `section.key=value` lines of the full configuration.
    pub fn echo(&self) -> Vec<String> {
        let value = toml::Value::try_from(self).unwrap_or(toml::Value::Table(Default::default()));
        let mut out = Vec::new();
        flatten("config", &value, &mut out);
        out
    }

    /// Copy with the sweep axis set to `value`.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Self {
        let mut c = self.clone();
        match axis {
            SweepAxis::Dx => c.numerics.dx = value,
            SweepAxis::Eps => c.numerics.eps = Some(value),
            SweepAxis::Alpha => c.operator.alpha = value,
            SweepAxis::Gamma => c.problem.gamma = value,
        }
        c
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<String>) {
    match v {
        toml::Value::Table(t) => {
            for (k, x) in t {
                flatten(&format!("{prefix}.{k}"), x, out);
            }
        }
        other => out.push(format!("{prefix}={other}")),
    }
}

fn zero_scalar() -> ScalarField {
    ScalarField::Zero
}
fn zero_vector() -> VectorField {
    VectorField::Zero
}
fn one() -> f64 {
    1.0
}
fn one_list() -> Vec<f64> {
    vec![1.0]
}
fn default_dx() -> f64 {
    1.0 / 32.0
}
fn default_safety() -> f64 {
    SAFETY
}
fn default_samples() -> usize {
    10_000
}
fn default_cert_tol() -> f64 {
    1e-9
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_every() -> usize {
    1
}
fn default_compare_tol() -> f64 {
    1e-10
}
fn default_sweeps() -> usize {
    100_000
}
fn default_perron_tol() -> f64 {
    1e-10
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAT: &str = r#"
[operator]
kind = "trace_with_power"
alpha = 0.0

[domain]
kind = "interval"
lo = 0.0
hi = 1.0

[problem]
T = 0.1
psi = { family = "sine", amplitude = 1.0 }
"#;

    #[test]
    fn parses_minimal() {
        let c = RunConfig::parse(HEAT).unwrap();
        assert_eq!(c.eps(), 1.0 / 32.0);
        assert!(c.echo().iter().any(|l| l == "config.operator.kind=\"trace_with_power\""));
        let again = RunConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_a_above_big_a() {
        let text = HEAT.replace("kind = \"trace_with_power\"\nalpha = 0.0", "kind = \"pucci_plus\"\na = 2.0\nA = 1.0");
        let e = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("a <= A"), "{e}");
    }

    #[test]
    fn rejects_unknown_keys() {
        let e = RunConfig::parse(&format!("{HEAT}\n[numerics]\nsafty = 0.5\n")).unwrap_err().to_string();
        assert!(e.contains("safty"), "{e}");
    }
}
