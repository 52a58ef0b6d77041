//! Bounded spatial domains, their exterior cone data, and space-time grids.
//!
//! Every domain is embedded in its bounding box. Grid nodes are classified
//! once spatially (interior, lateral, outside) and the space-time tag of a
//! `(node, step)` pair follows from that and the step index.

use crate::error::{Error, Result};
use crate::linalg::{dist, dot, norm};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Geometry of a shipped domain kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Interval { lo: f64, hi: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// `(0, side)²` with the closed upper-right quadrant `[side/2, side)²` removed.
    LShape { side: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainSpec {
    pub geometry: Geometry,
    pub dim: usize,
    pub diam: f64,
    /// Half-angle of the exterior cone around the outward axis.
    pub cone_angle: f64,
    pub cone_height: f64,
}

/// Largest supported dimension; nets and stencils are enumerated explicitly.
pub const MAX_DIM: usize = 3;

pub fn make_domain(geometry: Geometry) -> Result<DomainSpec> {
    let bad = |m: String| Err(Error::InvalidDomain(m));
    match &geometry {
        Geometry::Interval { lo, hi } => {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return bad(format!("interval needs lo < hi, got ({lo}, {hi})"));
            }
            let l = hi - lo;
            Ok(DomainSpec { geometry: geometry.clone(), dim: 1, diam: l, cone_angle: PI / 2.0, cone_height: l / 2.0 })
        }
        Geometry::Box { lo, hi } => {
            if lo.len() != hi.len() || lo.is_empty() || lo.len() > MAX_DIM {
                return bad(format!("box corners must share a dimension in 1..={MAX_DIM}"));
            }
            if lo.iter().zip(hi).any(|(a, b)| !(b > a) || !a.is_finite() || !b.is_finite()) {
                return bad("box is degenerate".into());
            }
            let widths: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| b - a).collect();
            let min_w = widths.iter().cloned().fold(f64::INFINITY, f64::min);
            Ok(DomainSpec {
                geometry: geometry.clone(),
                dim: lo.len(),
                diam: norm(&widths),
                cone_angle: PI / 2.0 - 0.1,
                cone_height: min_w / 2.0,
            })
        }
        Geometry::Ball { center, radius } => {
            if center.is_empty() || center.len() > MAX_DIM {
                return bad(format!("ball dimension must be in 1..={MAX_DIM}"));
            }
            if !(*radius > 0.0) || !radius.is_finite() || center.iter().any(|c| !c.is_finite()) {
                return bad(format!("ball radius must be positive, got {radius}"));
            }
            Ok(DomainSpec {
                geometry: geometry.clone(),
                dim: center.len(),
                diam: 2.0 * radius,
                cone_angle: PI / 2.0 - 0.1,
                cone_height: *radius,
            })
        }
        Geometry::LShape { side } => {
            if !(*side > 0.0) || !side.is_finite() {
                return bad(format!("l_shape side must be positive, got {side}"));
            }
            Ok(DomainSpec {
                geometry: geometry.clone(),
                dim: 2,
                diam: side * 2f64.sqrt(),
                cone_angle: 0.95 * PI / 4.0,
                cone_height: side / 4.0,
            })
        }
    }
}

/// Signed distance to a closed axis-aligned box, positive inside.
fn box_signed_distance(lo: &[f64], hi: &[f64], x: &[f64]) -> f64 {
    let mut outside = 0.0f64;
    let mut inside = f64::INFINITY;
    for k in 0..x.len() {
        let below = lo[k] - x[k];
        let above = x[k] - hi[k];
        let e = below.max(above);
        if e > 0.0 {
            outside += e * e;
        }
        inside = inside.min(-e);
    }
    if outside > 0.0 {
        -outside.sqrt()
    } else {
        inside
    }
}

impl DomainSpec {
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.geometry {
            Geometry::Interval { lo, hi } => (vec![*lo], vec![*hi]),
            Geometry::Box { lo, hi } => (lo.clone(), hi.clone()),
            Geometry::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Geometry::LShape { side } => (vec![0.0, 0.0], vec![*side, *side]),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.geometry {
            Geometry::Interval { .. } => "interval",
            Geometry::Box { .. } => "box",
            Geometry::Ball { .. } => "ball",
            Geometry::LShape { .. } => "l_shape",
        }
    }

    /// Signed distance to `∂Ω`, positive inside.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match &self.geometry {
            Geometry::Interval { lo, hi } => (x[0] - lo).min(hi - x[0]),
            Geometry::Box { lo, hi } => box_signed_distance(lo, hi, x),
            Geometry::Ball { center, radius } => radius - dist(x, center),
            Geometry::LShape { side } => {
                let s = *side;
                let m = s / 2.0;
                let d_square = box_signed_distance(&[0.0, 0.0], &[s, s], x);
                if d_square < 0.0 {
                    return d_square;
                }
                if x[0] >= m && x[1] >= m {
                    // inside the removed quadrant (or on its edges)
                    -(x[0] - m).min(x[1] - m)
                } else {
                    let d_quad = box_signed_distance(&[m, m], &[s, s], x);
                    d_square.min(-d_quad)
                }
            }
        }
    }

    pub fn tiny(&self) -> f64 {
        1e-12 * self.diam.max(1.0)
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        self.boundary_distance(x) >= -self.tiny()
    }

    pub fn is_on_boundary(&self, z: &[f64], tol: f64) -> bool {
        self.boundary_distance(z).abs() <= tol
    }

    /// Unit outward axis of the exterior cone at boundary point `z`.
    pub fn cone_axis(&self, z: &[f64]) -> Result<Vec<f64>> {
        let tol = 1e-9 * self.diam.max(1.0);
        let d = self.boundary_distance(z);
        if d.abs() > tol {
            return Err(Error::NotOnBoundary(d));
        }
        let axis = match &self.geometry {
            Geometry::Interval { lo, hi } => {
                if (z[0] - lo).abs() <= (z[0] - hi).abs() {
                    vec![-1.0]
                } else {
                    vec![1.0]
                }
            }
            Geometry::Box { lo, hi } => {
                let mut v = vec![0.0; z.len()];
                for k in 0..z.len() {
                    if (z[k] - lo[k]).abs() <= tol {
                        v[k] -= 1.0;
                    }
                    if (z[k] - hi[k]).abs() <= tol {
                        v[k] += 1.0;
                    }
                }
                v
            }
            Geometry::Ball { center, .. } => z.iter().zip(center).map(|(a, b)| a - b).collect(),
            Geometry::LShape { side } => {
                let s = *side;
                let m = s / 2.0;
                let on_inner = (z[0] >= m - tol && z[1] >= m - tol)
                    && ((z[0] - m).abs() <= tol || (z[1] - m).abs() <= tol);
                if on_inner {
                    vec![1.0, 1.0]
                } else {
                    let mut v = vec![0.0, 0.0];
                    for k in 0..2 {
                        if z[k].abs() <= tol {
                            v[k] -= 1.0;
                        }
                        if (z[k] - s).abs() <= tol {
                            v[k] += 1.0;
                        }
                    }
                    // convex corners (s, m) and (m, s) of the notch
                    if v == [1.0, 0.0] && (z[1] - m).abs() <= tol || v == [0.0, 1.0] && (z[0] - m).abs() <= tol {
                        v = vec![1.0, 1.0];
                    }
                    v
                }
            }
        };
        let n = norm(&axis);
        debug_assert!(n > 0.0);
        Ok(axis.iter().map(|v| v / n).collect())
    }

    /// Points on `∂Ω` with spacing about `spacing`, including all corners.
    pub fn boundary_net(&self, spacing: f64) -> Vec<Vec<f64>> {
        let spacing = spacing.max(1e-6 * self.diam);
        match &self.geometry {
            Geometry::Interval { lo, hi } => vec![vec![*lo], vec![*hi]],
            Geometry::Box { lo, hi } => {
                let counts: Vec<usize> =
                    lo.iter().zip(hi).map(|(a, b)| (((b - a) / spacing).ceil() as usize).max(1)).collect();
                let mut out = Vec::new();
                let total: usize = counts.iter().map(|c| c + 1).product();
                let mut idx = vec![0usize; lo.len()];
                for _ in 0..total {
                    if idx.iter().zip(&counts).any(|(i, c)| *i == 0 || i == c) {
                        out.push(
                            (0..lo.len())
                                .map(|k| lo[k] + (hi[k] - lo[k]) * idx[k] as f64 / counts[k] as f64)
                                .collect(),
                        );
                    }
                    for k in (0..lo.len()).rev() {
                        idx[k] += 1;
                        if idx[k] <= counts[k] {
                            break;
                        }
                        idx[k] = 0;
                    }
                }
                out
            }
            Geometry::Ball { center, radius } => {
                let r = *radius;
                match center.len() {
                    1 => vec![vec![center[0] - r], vec![center[0] + r]],
                    2 => {
                        let m = ((2.0 * PI * r / spacing).ceil() as usize).max(8);
                        (0..m)
                            .map(|i| {
                                let th = 2.0 * PI * i as f64 / m as f64;
                                vec![center[0] + r * th.cos(), center[1] + r * th.sin()]
                            })
                            .collect()
                    }
                    _ => {
                        let m = ((4.0 * PI * r * r / (spacing * spacing)).ceil() as usize).max(32);
                        let golden = PI * (3.0 - 5f64.sqrt());
                        (0..m)
                            .map(|i| {
                                let zc = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
                                let rho = (1.0 - zc * zc).sqrt();
                                let th = golden * i as f64;
                                vec![
                                    center[0] + r * rho * th.cos(),
                                    center[1] + r * rho * th.sin(),
                                    center[2] + r * zc,
                                ]
                            })
                            .collect()
                    }
                }
            }
            Geometry::LShape { side } => {
                let s = *side;
                let m = s / 2.0;
                let verts = [[0.0, 0.0], [s, 0.0], [s, m], [m, m], [m, s], [0.0, s]];
                let mut out = Vec::new();
                for i in 0..verts.len() {
                    let a = verts[i];
                    let b = verts[(i + 1) % verts.len()];
                    let len = dist(&a, &b);
                    let k = ((len / spacing).ceil() as usize).max(1);
                    for j in 0..k {
                        let t = j as f64 / k as f64;
                        out.push(vec![a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                    }
                }
                out
            }
        }
    }

    /// Sampled check that the exterior cone `{z + ρd : ∠(d, axis) ≤ φ, 0 < ρ ≤ r̄}`
    /// meets `Ω̄` only at `z`, for every point of a boundary net.
    pub fn verify_cone(&self, spacing: f64) -> ConeCheck {
        let net = self.boundary_net(spacing);
        let radii: Vec<f64> = (1..=12).map(|i| self.cone_height * i as f64 / 12.0).chain([1e-6 * self.cone_height]).collect();
        let mut worst = f64::NEG_INFINITY;
        let mut tested = 0usize;
        for z in &net {
            let axis = self.cone_axis(z).expect("net point lies on the boundary");
            for d in cone_directions(&axis, self.cone_angle) {
                for &rho in &radii {
                    let x: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + rho * b).collect();
                    // scale-free: compare against the distance travelled
                    worst = worst.max(self.boundary_distance(&x) / rho);
                    tested += 1;
                }
            }
        }
        ConeCheck { boundary_points: net.len(), samples: tested, worst_relative_depth: worst }
    }

    /// Points `x` whose whole `3^N` stencil lies in `Ω̄`, i.e. grid nodes the scheme updates.
    pub fn stencil_inside(&self, x: &[f64], h: &[f64]) -> bool {
        if self.boundary_distance(x) <= 0.0 {
            return false;
        }
        let n = x.len();
        let mut y = x.to_vec();
        for code in 0..3usize.pow(n as u32) {
            let mut c = code;
            for k in 0..n {
                y[k] = x[k] + h[k] * ((c % 3) as f64 - 1.0);
                c /= 3;
            }
            if !self.contains_closed(&y) {
                return false;
            }
        }
        true
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeCheck {
    pub boundary_points: usize,
    pub samples: usize,
    /// Max of `d(x)/ρ` over sampled cone points; `< 0` means every sample is outside `Ω̄`.
    pub worst_relative_depth: f64,
}

impl ConeCheck {
    pub fn pass(&self) -> bool {
        self.worst_relative_depth < 0.0
    }
}

/// Directions on and inside the cone of half-angle `phi` around `axis`.
fn cone_directions(axis: &[f64], phi: f64) -> Vec<Vec<f64>> {
    let n = axis.len();
    if n == 1 {
        return vec![axis.to_vec()];
    }
    let angles: Vec<f64> = (0..=6).map(|i| phi * i as f64 / 6.0).collect();
    let mut out = Vec::new();
    if n == 2 {
        let perp = [-axis[1], axis[0]];
        for &th in &angles {
            for sgn in [-1.0, 1.0] {
                out.push(vec![th.cos() * axis[0] + sgn * th.sin() * perp[0], th.cos() * axis[1] + sgn * th.sin() * perp[1]]);
            }
        }
        return out;
    }
    // n == 3: orthonormal frame (axis, e1, e2)
    let pick = if axis[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let pd = dot(&pick, axis);
    let mut e1: Vec<f64> = (0..3).map(|k| pick[k] - pd * axis[k]).collect();
    let l = norm(&e1);
    e1.iter_mut().for_each(|v| *v /= l);
    let e2 = [
        axis[1] * e1[2] - axis[2] * e1[1],
        axis[2] * e1[0] - axis[0] * e1[2],
        axis[0] * e1[1] - axis[1] * e1[0],
    ];
    for &th in &angles {
        for j in 0..8 {
            let om = 2.0 * PI * j as f64 / 8.0;
            let (s, c) = (th.sin(), th.cos());
            out.push((0..3).map(|k| c * axis[k] + s * (om.cos() * e1[k] + om.sin() * e2[k])).collect());
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NodeClass {
    Interior,
    Lateral,
    Outside,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum NodeTag {
    Interior,
    Lateral,
    Initial,
    Final,
}

/// Tensor grid on the bounding box together with a uniform time axis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub domain: DomainSpec,
    pub dx: f64,
    pub h: Vec<f64>,
    pub lo: Vec<f64>,
    pub counts: Vec<usize>,
    pub strides: Vec<usize>,
    pub dt: f64,
    pub t_final: f64,
    pub n_steps: usize,
    pub classes: Vec<NodeClass>,
    pub interior: Vec<usize>,
    pub active: Vec<usize>,
}

impl Grid {
    /// Builds the grid. Per-axis spacing is `L_k / round(L_k / dx)`; the time
    /// step is shrunk from `dt_max` so that an integer number of steps reaches `t_final`.
    pub fn new(domain: DomainSpec, dx: f64, t_final: f64, dt_max: f64) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidGrid(format!("dx must be > 0, got {dx}")));
        }
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidGrid(format!("T must be > 0, got {t_final}")));
        }
        if !(dt_max > 0.0) || !dt_max.is_finite() {
            return Err(Error::Cfl(format!("time step bound must be > 0, got {dt_max}")));
        }
        let (lo, hi) = domain.bounding_box();
        let n = lo.len();
        let mut cells = Vec::with_capacity(n);
        for k in 0..n {
            let c = ((hi[k] - lo[k]) / dx).round() as usize;
            if c < 8 {
                return Err(Error::InvalidGrid(format!("dx = {dx} gives {c} cells on axis {k}; need at least 8")));
            }
            cells.push(c);
        }
        let h: Vec<f64> = (0..n).map(|k| (hi[k] - lo[k]) / cells[k] as f64).collect();
        let counts: Vec<usize> = cells.iter().map(|c| c + 1).collect();
        let total: usize = counts.iter().product();
        if total > 50_000_000 {
            return Err(Error::InvalidGrid(format!("{total} nodes is too many")));
        }
        let mut strides = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * counts[k + 1];
        }
        let n_steps = ((t_final / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let dt = t_final / n_steps as f64;
        let mut g = Self {
            domain,
            dx,
            h,
            lo,
            counts,
            strides,
            dt,
            t_final,
            n_steps,
            classes: Vec::new(),
            interior: Vec::new(),
            active: Vec::new(),
        };
        g.classes = (0..total)
            .map(|i| {
                let x = g.coords(i);
                if g.on_box_edge(i) || !g.domain.stencil_inside(&x, &g.h) {
                    if g.domain.contains_closed(&x) {
                        NodeClass::Lateral
                    } else {
                        NodeClass::Outside
                    }
                } else {
                    NodeClass::Interior
                }
            })
            .collect();
        g.interior = (0..total).filter(|&i| g.classes[i] == NodeClass::Interior).collect();
        g.active = (0..total).filter(|&i| g.classes[i] != NodeClass::Outside).collect();
        if g.interior.is_empty() {
            return Err(Error::InvalidGrid("grid has no interior nodes".into()));
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn multi_index(&self, i: usize) -> Vec<usize> {
        self.strides.iter().zip(&self.counts).map(|(s, c)| (i / s) % c).collect()
    }

    pub fn coords(&self, i: usize) -> Vec<f64> {
        let mut r = i;
        let mut x = vec![0.0; self.dim()];
        for k in 0..self.dim() {
            let ik = r / self.strides[k];
            r %= self.strides[k];
            x[k] = self.lo[k] + ik as f64 * self.h[k];
        }
        x
    }

    fn on_box_edge(&self, i: usize) -> bool {
        self.multi_index(i).iter().zip(&self.counts).any(|(ik, c)| *ik == 0 || *ik + 1 == *c)
    }

    /// Neighbor of `i` shifted by `offset` (entries in {-1, 0, 1}); valid for interior nodes.
    #[inline]
    pub fn shift(&self, i: usize, k: usize, s: isize) -> usize {
        (i as isize + s * self.strides[k] as isize) as usize
    }

    pub fn time(&self, step: usize) -> f64 {
        if step == self.n_steps {
            self.t_final
        } else {
            step as f64 * self.dt
        }
    }

    /// Space-time tag of `(node, step)`, or `None` for nodes outside `Ω̄`.
    pub fn tag(&self, node: usize, step: usize) -> Option<NodeTag> {
        match self.classes[node] {
            NodeClass::Outside => None,
            _ if step == 0 => Some(NodeTag::Initial),
            NodeClass::Lateral => Some(NodeTag::Lateral),
            NodeClass::Interior if step == self.n_steps => Some(NodeTag::Final),
            NodeClass::Interior => Some(NodeTag::Interior),
        }
    }

    /// Copy of the grid with a new time step bound (spatial data unchanged).
    pub fn with_time(&self, t_final: f64, dt_max: f64) -> Result<Self> {
        if !(t_final > 0.0) || !(dt_max > 0.0) {
            return Err(Error::InvalidGrid("T and dt must be positive".into()));
        }
        let mut g = self.clone();
        g.t_final = t_final;
        g.n_steps = ((t_final / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        g.dt = t_final / g.n_steps as f64;
        Ok(g)
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.h == other.h && self.lo == other.lo && self.counts == other.counts && self.dt == other.dt && self.n_steps == other.n_steps && self.classes == other.classes
    }
}

/// Counts of each space-time tag over the full grid.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct NodeMasks {
    pub interior: usize,
    pub lateral: usize,
    pub initial: usize,
    pub final_slice: usize,
    pub outside: usize,
}

pub fn classify_nodes(grid: &Grid) -> NodeMasks {
    let mut m = NodeMasks::default();
    for node in 0..grid.len() {
        for step in 0..=grid.n_steps {
            match grid.tag(node, step) {
                None => m.outside += 1,
                Some(NodeTag::Interior) => m.interior += 1,
                Some(NodeTag::Lateral) => m.lateral += 1,
                Some(NodeTag::Initial) => m.initial += 1,
                Some(NodeTag::Final) => m.final_slice += 1,
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval() -> DomainSpec {
        make_domain(Geometry::Interval { lo: 0.0, hi: 1.0 }).unwrap()
    }

    #[test]
    fn interval_parameters() {
        let d = unit_interval();
        assert_eq!((d.dim, d.diam, d.cone_height), (1, 1.0, 0.5));
        assert_eq!(d.cone_angle, PI / 2.0);
        assert!((d.boundary_distance(&[0.3]) - 0.3).abs() < 1e-15);
        assert_eq!(d.boundary_distance(&[1.0]), 0.0);
        assert!(d.verify_cone(0.1).pass());
    }

    #[test]
    fn ball_and_lshape_cones() {
        let b = make_domain(Geometry::Ball { center: vec![0.0, 0.0], radius: 1.0 }).unwrap();
        assert_eq!(b.diam, 2.0);
        assert_eq!(b.boundary_distance(&[0.0, 0.0]), 1.0);
        assert!(b.verify_cone(0.1).pass());
        let l = make_domain(Geometry::LShape { side: 1.0 }).unwrap();
        assert!((l.cone_angle - 0.95 * PI / 4.0).abs() < 1e-15);
        let chk = l.verify_cone(0.05);
        assert!(chk.pass(), "{chk:?}");
        let ax = l.cone_axis(&[0.5, 0.5]).unwrap();
        assert!(ax.iter().all(|v| (v - 0.5f64.sqrt()).abs() < 1e-15));
        assert!(l.boundary_distance(&[0.75, 0.75]) < 0.0);
        assert!((l.boundary_distance(&[0.25, 0.75]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn degenerate_rejected() {
        assert!(make_domain(Geometry::Interval { lo: 1.0, hi: 1.0 }).is_err());
        assert!(make_domain(Geometry::Ball { center: vec![0.0], radius: 0.0 }).is_err());
        assert!(make_domain(Geometry::Box { lo: vec![0.0, 0.0], hi: vec![1.0, 0.0] }).is_err());
    }

    #[test]
    fn tags_partition_grid() {
        let g = Grid::new(unit_interval(), 1.0 / 16.0, 0.1, 0.01).unwrap();
        let interior_x = 8;
        assert_eq!(g.tag(interior_x, 0), Some(NodeTag::Initial));
        assert_eq!(g.tag(0, g.n_steps / 2), Some(NodeTag::Lateral));
        assert_eq!(g.tag(interior_x, g.n_steps), Some(NodeTag::Final));
        let m = classify_nodes(&g);
        assert_eq!(m.interior + m.lateral + m.initial + m.final_slice + m.outside, g.len() * (g.n_steps + 1));
        assert_eq!(m.outside, 0);
    }

    #[test]
    fn too_coarse_grid_rejected() {
        assert!(Grid::new(unit_interval(), 0.25, 1.0, 0.1).is_err());
    }
}
