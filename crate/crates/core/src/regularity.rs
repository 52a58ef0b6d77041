//! Empirical moduli of gridded fields: dyadic maxima `M(r)` fitted as `C r^β`
//! on a log-log scale, and the comparison with predicted exponents.

use crate::barriers::{exponents, ExponentSet};
use crate::domain::{make_domain, Geometry, NodeClass};
use crate::error::{Error, Result};
use crate::scheme::{ProblemSpec, SpaceTimeField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Space,
    Time,
    BoundaryAttainment,
    Lateral,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Space => "space",
            Axis::Time => "time",
            Axis::BoundaryAttainment => "boundary_attainment",
            Axis::Lateral => "lateral",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionSel {
    /// Nodes at distance `≥ max(2 dx, diam/8)` from `∂Ω`.
    Interior,
    All,
}

/// Default one-sided margin on fitted exponents.
pub const MARGIN: f64 = 0.1;
/// Seeded pairs per scale when a scale has more than [`EXHAUSTIVE_LIMIT`] candidates.
pub const MAX_PAIRS: usize = 10_000;
pub const EXHAUSTIVE_LIMIT: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub axis: Axis,
    pub fitted_exponent: f64,
    pub fitted_constant: f64,
    pub r_range: (f64, f64),
    /// Max deviation of `log M` from the fitted line.
    pub residual_of_fit: f64,
    pub predicted_exponent: f64,
    /// `(r, M(r))` used in the fit.
    pub scales: Vec<(f64, f64)>,
    /// All differences are at rounding level; the fit is not meaningful.
    pub degenerate: bool,
}

pub const CSV_HEADER: &str = "axis,fitted_exponent,predicted_exponent,fitted_constant,residual_of_fit,pass";

impl HolderEstimate {
    /// `fitted ≥ predicted − margin` (degenerate fits pass).
    pub fn pass(&self, margin: f64) -> bool {
        self.degenerate || !self.predicted_exponent.is_finite() || self.fitted_exponent >= self.predicted_exponent - margin
    }

    /// `max(0, predicted − fitted)`.
    pub fn deficit(&self) -> f64 {
        if self.degenerate {
            0.0
        } else {
            (self.predicted_exponent - self.fitted_exponent).max(0.0)
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.axis.name(),
            self.fitted_exponent,
            self.predicted_exponent,
            self.fitted_constant,
            self.residual_of_fit,
            self.pass(MARGIN)
        )
    }

    fn degenerate(axis: Axis, predicted: f64) -> Self {
        Self {
            axis,
            fitted_exponent: f64::NAN,
            fitted_constant: 0.0,
            r_range: (0.0, 0.0),
            residual_of_fit: 0.0,
            predicted_exponent: predicted,
            scales: vec![],
            degenerate: true,
        }
    }
}

/// Least-squares fit of `log m = log C + β log r`. Returns `(β, C, max deviation)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(r, m)| *r > 0.0 && *m > 0.0).map(|(r, m)| (r.ln(), m.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let beta = sxy / sxx;
    let lc = my - beta * mx;
    let dev = pts.iter().map(|p| (p.1 - lc - beta * p.0).abs()).fold(0.0, f64::max);
    Some((beta, lc.exp(), dev))
}

/// Differences below this fraction of `max|u|` are rounding noise.
pub const NOISE_FLOOR: f64 = 1e-10;

fn finish(field: &SpaceTimeField, axis: Axis, scales: Vec<(f64, f64)>, predicted: f64) -> Result<HolderEstimate> {
    if scales.len() < 4 {
        return Err(Error::InvalidGrid(format!("{} fit needs at least 4 dyadic scales, got {}", axis.name(), scales.len())));
    }
    let floor = NOISE_FLOOR * field.max_abs().max(1.0);
    if scales.iter().all(|s| s.1 <= floor) {
        return Ok(HolderEstimate::degenerate(axis, predicted));
    }
    let used: Vec<(f64, f64)> = scales.iter().copied().filter(|s| s.1 > 0.0).collect();
    let (beta, c, dev) = fit_power_law(&used).ok_or_else(|| Error::InvalidGrid("fit has fewer than 2 nonzero scales".into()))?;
    Ok(HolderEstimate {
        axis,
        fitted_exponent: beta,
        fitted_constant: c,
        r_range: (used[0].0, used[used.len() - 1].0),
        residual_of_fit: dev,
        predicted_exponent: predicted,
        scales,
        degenerate: false,
    })
}

fn in_region(field: &SpaceTimeField, sel: RegionSel) -> Vec<bool> {
    let g = &field.grid;
    let margin = (2.0 * g.dx).max(g.domain.diam / 8.0);
    (0..g.len())
        .map(|i| {
            g.classes[i] != NodeClass::Outside && (sel == RegionSel::All || g.domain.boundary_distance(&g.coords(i)) >= margin - 1e-12)
        })
        .collect()
}

/// Max of `f(pair)` over candidates, exhaustively or over seeded samples.
fn max_over<T, F: Fn(&T) -> f64>(cands: &[T], seed: u64, f: F) -> f64 {
    if cands.len() <= EXHAUSTIVE_LIMIT {
        cands.iter().map(&f).fold(0.0, f64::max)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..MAX_PAIRS).map(|_| f(&cands[rng.gen_range(0..cands.len())])).fold(0.0, f64::max)
    }
}

/// Dyadic spatial or temporal modulus fit. The prediction is `γ` (space) or
/// `γ*` (time) from `exps` when given.
pub fn holder_fit(field: &SpaceTimeField, axis: Axis, region: RegionSel, exps: Option<&ExponentSet>, seed: u64) -> Result<HolderEstimate> {
    let g = &field.grid;
    let mask = in_region(field, region);
    match axis {
        Axis::Space => {
            let predicted = exps.map(|e| e.gamma).unwrap_or(f64::NAN);
            let mut scales = Vec::new();
            // separations up to half the extent of the region
            let mut span = 0usize;
            for k in 0..g.dim() {
                let idx = (0..g.len()).filter(|&i| mask[i]).map(|i| g.multi_index(i)[k]);
                let (lo, hi) = idx.fold((usize::MAX, 0), |(a, b), v| (a.min(v), b.max(v)));
                if hi >= lo {
                    span = span.max(hi - lo);
                }
            }
            let mut j = 0u32;
            while 2 * (1usize << j) <= span {
                let off = 1usize << j;
                let mut cands: Vec<(usize, usize, usize)> = Vec::new();
                for (si, _) in field.slices.iter().enumerate() {
                    for i in 0..g.len() {
                        if !mask[i] {
                            continue;
                        }
                        let mi = g.multi_index(i);
                        for k in 0..g.dim() {
                            if mi[k] + off < g.counts[k] {
                                let jn = i + off * g.strides[k];
                                if mask[jn] {
                                    cands.push((si, i, jn));
                                }
                            }
                        }
                    }
                }
                if cands.is_empty() {
                    break;
                }
                let m = max_over(&cands, seed ^ j as u64, |&(si, a, b)| (field.slices[si].values[a] - field.slices[si].values[b]).abs());
                let r = off as f64 * g.h.iter().cloned().fold(f64::INFINITY, f64::min);
                scales.push((r, m));
                j += 1;
            }
            finish(field, axis, scales, predicted)
        }
        Axis::Time => {
            let predicted = exps.map(|e| e.gamma_star).unwrap_or(f64::NAN);
            let steps = field.steps();
            let nodes: Vec<usize> = (0..g.len()).filter(|&i| mask[i]).collect();
            let mut scales = Vec::new();
            let mut j = 0u32;
            while (1usize << j) <= g.n_steps {
                let off = 1usize << j;
                let mut cands: Vec<(usize, usize, usize)> = Vec::new();
                for (ai, &a) in steps.iter().enumerate() {
                    if let Ok(bi) = steps.binary_search(&(a + off)) {
                        for &i in &nodes {
                            cands.push((ai, bi, i));
                        }
                    }
                }
                if cands.is_empty() {
                    j += 1;
                    continue;
                }
                let m = max_over(&cands, seed ^ (j as u64) << 8, |&(a, b, i)| (field.slices[a].values[i] - field.slices[b].values[i]).abs());
                scales.push((off as f64 * g.dt, m));
                j += 1;
            }
            finish(field, axis, scales, predicted)
        }
        _ => Err(Error::InvalidArgument("holder_fit handles the space and time axes".into())),
    }
}

/// Fit of `max_x |u(x,t) − ψ(x,0)| ~ C t^β` over the recorded dyadic times.
pub fn boundary_rate(field: &SpaceTimeField, problem: &ProblemSpec) -> Result<HolderEstimate> {
    let g = &field.grid;
    let exps = crate::barriers::problem_exponents(problem)?;
    let psi = problem.params.psi.compile(g.dim());
    let psi0: Vec<f64> = g.active.iter().map(|&i| psi.eval(&g.coords(i), 0.0)).collect();
    let mut scales = Vec::new();
    let mut j = 0u32;
    while (1usize << j) <= g.n_steps {
        let s = 1usize << j;
        if let Some(sl) = field.slice(s) {
            let m = g.active.iter().zip(&psi0).map(|(&i, p)| (sl.values[i] - p).abs()).fold(0.0, f64::max);
            scales.push((g.time(s), m));
        }
        j += 1;
    }
    finish(field, Axis::BoundaryAttainment, scales, exps.attain)
}

/// Fit of `max_t |u(x,t) − u(x₀,t)|` against `|x − x₀|` for lateral nodes
/// `x₀`, moving `2^j` cells inward along each axis.
pub fn lateral_modulus(field: &SpaceTimeField, problem: &ProblemSpec) -> Result<HolderEstimate> {
    let g = &field.grid;
    let predicted = problem.constants.gamma;
    let lateral: Vec<usize> = (0..g.len()).filter(|&i| g.classes[i] == NodeClass::Lateral).collect();
    let mut scales = Vec::new();
    let max_cells = *g.counts.iter().max().unwrap_or(&1);
    let mut j = 0u32;
    while (1usize << j) < max_cells / 2 {
        let off = 1usize << j;
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for &x0 in &lateral {
            let mi = g.multi_index(x0);
            for k in 0..g.dim() {
                for dir in [1isize, -1] {
                    let target = mi[k] as isize + dir * off as isize;
                    // step inward only: the first neighbor in this direction must be active
                    if target < 0 || target as usize >= g.counts[k] {
                        continue;
                    }
                    let first = (x0 as isize + dir * g.strides[k] as isize) as usize;
                    if g.classes[first] != NodeClass::Interior {
                        continue;
                    }
                    let jn = (x0 as isize + dir * (off * g.strides[k]) as isize) as usize;
                    if g.classes[jn] != NodeClass::Outside {
                        pairs.push((x0, jn));
                    }
                }
            }
        }
        if pairs.is_empty() {
            break;
        }
        let cands: Vec<(usize, usize, usize)> =
            (0..field.slices.len()).flat_map(|s| pairs.iter().map(move |&(a, b)| (s, a, b))).collect();
        let m = max_over(&cands, 0x1a7 ^ j as u64, |&(s, a, b)| (field.slices[s].values[a] - field.slices[s].values[b]).abs());
        scales.push((off as f64 * g.h.iter().cloned().fold(f64::INFINITY, f64::min), m));
        j += 1;
    }
    finish(field, Axis::Lateral, scales, predicted)
}

/// `(q₁, q, γ*, attain)` over a parameter sweep, on the unit interval with
/// `h = 0` and `A = 1`.
pub fn exponent_table(alpha_list: &[f64], gamma_list: &[f64], gamma_f_list: &[f64]) -> Result<Vec<ExponentSet>> {
    let unit = make_domain(Geometry::Interval { lo: 0.0, hi: 1.0 })?;
    let mut out = Vec::new();
    for &a in alpha_list {
        for &g in gamma_list {
            for &gf in gamma_f_list {
                out.push(exponents(a, g, gf, &unit, 0.0, 1.0)?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Grid;

    fn synth(f: impl Fn(&[f64], f64) -> f64 + Sync, dx: f64) -> SpaceTimeField {
        let dom = make_domain(Geometry::Interval { lo: -1.0, hi: 1.0 }).unwrap();
        let grid = Grid::new(dom, dx, 1.0, 1.0 / 256.0).unwrap();
        let steps: Vec<usize> = (0..=grid.n_steps).collect();
        SpaceTimeField::from_fn(&grid, &steps, dx, "synthetic", f)
    }

    #[test]
    fn power_fit_recovers_exponents() {
        for dx in [1.0 / 64.0, 1.0 / 128.0] {
            let u = synth(|x, _| x[0].abs().sqrt(), dx);
            let e = holder_fit(&u, Axis::Space, RegionSel::Interior, None, 1).unwrap();
            assert!((e.fitted_exponent - 0.5).abs() < 0.02, "{e:?}");
            let u = synth(|_, t| t, dx);
            let e = holder_fit(&u, Axis::Time, RegionSel::All, None, 1).unwrap();
            assert!((e.fitted_exponent - 1.0).abs() < 0.01, "{e:?}");
        }
    }

    #[test]
    fn table_examples() {
        let t = exponent_table(&[0.0, 2.0], &[0.5, 1.0], &[1.0]).unwrap();
        assert_eq!(t[0].gamma_star, 0.25);
        assert_eq!((t[3].q1, t[3].q, t[3].attain, t[3].gamma_star), (2.0, 2.0, 0.25, 0.25));
    }

    #[test]
    fn fit_line() {
        let pts: Vec<(f64, f64)> = (0..6).map(|j| (2f64.powi(-j), 3.0 * 2f64.powi(-j).powf(0.7))).collect();
        let (b, c, d) = fit_power_law(&pts).unwrap();
        assert!((b - 0.7).abs() < 1e-12 && (c - 3.0).abs() < 1e-10 && d < 1e-10);
    }
}
