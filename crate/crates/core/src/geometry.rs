//! Convex domains, boundary distance, slidings, the anisotropic dilations
//! `F_h` and sections of convex functions.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid, ScalarField};

type LevelFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Boundary-graph data `x_n = q(x')`, piecewise linear on a tensor grid over
/// `x'` (triangulated cells when `x'` is two-dimensional).
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFloor {
    pub axes: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub vertices: Vec<Vec<f64>>,
    /// Unit outward normals `a` and offsets `b` with `a·x ≤ b` inside.
    pub facets: Vec<(Vec<f64>, f64)>,
}

#[derive(Clone)]
pub enum LevelSetShape {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Ellipsoid {
        center: Vec<f64>,
        semi_axes: Vec<f64>,
    },
    /// `{x : |x| < radius, x_n > 0}`.
    HalfBall {
        radius: f64,
    },
    Custom {
        level: LevelFn,
        lo: Vec<f64>,
        hi: Vec<f64>,
        interior_point: Vec<f64>,
    },
}

impl fmt::Debug for LevelSetShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelSetShape::Ball { center, radius } => {
                write!(f, "Ball {{ center: {center:?}, radius: {radius} }}")
            }
            LevelSetShape::Ellipsoid { center, semi_axes } => {
                write!(
                    f,
                    "Ellipsoid {{ center: {center:?}, semi_axes: {semi_axes:?} }}"
                )
            }
            LevelSetShape::HalfBall { radius } => write!(f, "HalfBall {{ radius: {radius} }}"),
            LevelSetShape::Custom { lo, hi, .. } => {
                write!(f, "Custom {{ lo: {lo:?}, hi: {hi:?} }}")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum DomainKind {
    Graph(GraphFloor),
    Polytope(Polytope),
    LevelSet(LevelSetShape),
}

/// A bounded convex region in two or three dimensions. Immutable once built.
#[derive(Debug, Clone)]
pub struct ConvexDomain {
    dim: usize,
    kind: DomainKind,
}

const BOUNDARY_TOL: f64 = 1e-12;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn box_level(p: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    p.iter()
        .zip(lo.iter().zip(hi))
        .fold(f64::NEG_INFINITY, |m, (x, (a, b))| m.max(a - x).max(x - b))
}

fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = dot(&ab, &ab);
    let t = if len2 > 0.0 {
        (dot(&ap, &ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let c: Vec<f64> = a.iter().zip(&ab).map(|(x, d)| x + t * d).collect();
    norm(&sub(p, &c))
}

fn triangle_distance(p: &[f64], a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(&ab, &ap);
    let d2 = dot(&ac, &ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return norm(&ap);
    }
    let bp = sub(p, b);
    let d3 = dot(&ab, &bp);
    let d4 = dot(&ac, &bp);
    if d3 >= 0.0 && d4 <= d3 {
        return norm(&bp);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return segment_distance(p, a, b);
    }
    let cp = sub(p, c);
    let d5 = dot(&ab, &cp);
    let d6 = dot(&ac, &cp);
    if d6 >= 0.0 && d5 <= d6 {
        return norm(&cp);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return segment_distance(p, a, c);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return segment_distance(p, b, c);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    let q: Vec<f64> = (0..3).map(|i| a[i] + ab[i] * v + ac[i] * w).collect();
    norm(&sub(p, &q))
}

impl GraphFloor {
    fn tangential_dim(&self) -> usize {
        self.axes.len()
    }

    fn cell(axis: &[f64], x: f64) -> (usize, f64) {
        let n = axis.len();
        let x = x.clamp(axis[0], axis[n - 1]);
        let i = match axis.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
    }

    /// Piecewise-linear height; constant extension outside the data grid.
    pub fn height(&self, xp: &[f64]) -> f64 {
        if self.tangential_dim() == 1 {
            let (i, t) = Self::cell(&self.axes[0], xp[0]);
            return (1.0 - t) * self.q[i] + t * self.q[i + 1];
        }
        let (i, s) = Self::cell(&self.axes[0], xp[0]);
        let (j, t) = Self::cell(&self.axes[1], xp[1]);
        let m = self.axes[1].len();
        let q00 = self.q[i * m + j];
        let q10 = self.q[(i + 1) * m + j];
        let q01 = self.q[i * m + j + 1];
        let q11 = self.q[(i + 1) * m + j + 1];
        if s >= t {
            q00 + s * (q10 - q00) + t * (q11 - q10)
        } else {
            q00 + t * (q01 - q00) + s * (q11 - q01)
        }
    }

    fn vertex(&self, idx: &[usize]) -> Vec<f64> {
        if self.tangential_dim() == 1 {
            vec![self.axes[0][idx[0]], self.q[idx[0]]]
        } else {
            let m = self.axes[1].len();
            vec![
                self.axes[0][idx[0]],
                self.axes[1][idx[1]],
                self.q[idx[0] * m + idx[1]],
            ]
        }
    }

    fn index_range(axis: &[f64], lo: f64, hi: f64) -> (usize, usize) {
        let a = axis.partition_point(|v| *v < lo).saturating_sub(1);
        let b = axis.partition_point(|v| *v <= hi).min(axis.len() - 1);
        (a, b.max(a + 1).min(axis.len() - 1))
    }

    /// Exact Euclidean distance to the piecewise-linear floor.
    pub fn distance(&self, p: &[f64]) -> f64 {
        let n = p.len();
        let bound = (p[n - 1] - self.height(&p[..n - 1])).abs();
        if bound == 0.0 {
            return 0.0;
        }
        let r = bound * (1.0 + 1e-12);
        if self.tangential_dim() == 1 {
            let (a, b) = Self::index_range(&self.axes[0], p[0] - r, p[0] + r);
            let mut best = bound;
            for i in a..b {
                best = best.min(segment_distance(
                    p,
                    &self.vertex(&[i]),
                    &self.vertex(&[i + 1]),
                ));
            }
            best
        } else {
            let (a0, b0) = Self::index_range(&self.axes[0], p[0] - r, p[0] + r);
            let (a1, b1) = Self::index_range(&self.axes[1], p[1] - r, p[1] + r);
            let mut best = bound;
            for i in a0..b0 {
                for j in a1..b1 {
                    let v00 = self.vertex(&[i, j]);
                    let v10 = self.vertex(&[i + 1, j]);
                    let v01 = self.vertex(&[i, j + 1]);
                    let v11 = self.vertex(&[i + 1, j + 1]);
                    best = best
                        .min(triangle_distance(p, &v00, &v10, &v11))
                        .min(triangle_distance(p, &v00, &v01, &v11));
                }
            }
            best
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.tangential_dim();
        if d == 0 || d > 2 {
            return Err(Error::Geometry(
                "graph floor needs one or two tangential axes".into(),
            ));
        }
        let expected: usize = self.axes.iter().map(Vec::len).product();
        if self.q.len() != expected {
            return Err(Error::Geometry(format!(
                "graph floor has {} heights for {} grid nodes",
                self.q.len(),
                expected
            )));
        }
        for a in &self.axes {
            if a.len() < 3 || a.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Geometry(
                    "graph axes must be increasing with ≥ 3 nodes".into(),
                ));
            }
            if a[0] > 0.0 || a[a.len() - 1] < 0.0 {
                return Err(Error::Geometry("graph grid must contain x' = 0".into()));
            }
        }
        let scale = self.q.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * scale;
        // second differences along axes (and diagonals in 2D) must be ≥ 0
        let conv = |i: usize, j: usize, di: isize, dj: isize| -> Option<f64> {
            let m = if d == 2 { self.axes[1].len() } else { 1 };
            let (ii, jj) = (i as isize, j as isize);
            let n0 = self.axes[0].len() as isize;
            let n1 = if d == 2 {
                self.axes[1].len() as isize
            } else {
                1
            };
            let fits = |a: isize, b: isize| a >= 0 && b >= 0 && a < n0 && b < n1;
            if !fits(ii + di, jj + dj) || !fits(ii - di, jj - dj) {
                return None;
            }
            let at = |a: isize, b: isize| {
                let p: Vec<f64> = if d == 2 {
                    vec![self.axes[0][a as usize], self.axes[1][b as usize]]
                } else {
                    vec![self.axes[0][a as usize]]
                };
                (p, self.q[a as usize * m + b as usize])
            };
            let (pf, qf) = at(ii + di, jj + dj);
            let (pb, qb) = at(ii - di, jj - dj);
            let (p0, q0) = at(ii, jj);
            let hf = norm(&sub(&pf, &p0));
            let hb = norm(&sub(&pb, &p0));
            Some((qf - q0) / hf + (qb - q0) / hb)
        };
        let n1 = if d == 2 { self.axes[1].len() } else { 1 };
        for i in 0..self.axes[0].len() {
            for j in 0..n1 {
                let dirs: &[(isize, isize)] = if d == 2 {
                    &[(1, 0), (0, 1), (1, 1), (1, -1)]
                } else {
                    &[(1, 0)]
                };
                for &(di, dj) in dirs {
                    if let Some(v) = conv(i, j, di, dj) {
                        if v < -tol {
                            return Err(Error::Geometry(format!(
                                "graph floor is not convex near node ({i}, {j})"
                            )));
                        }
                    }
                }
            }
        }
        let origin = vec![0.0; d];
        if self.height(&origin).abs() > 1e-10 * scale {
            return Err(Error::Geometry("graph floor must satisfy q(0) = 0".into()));
        }
        for k in 0..d {
            let a = &self.axes[k];
            let (i, _) = Self::cell(a, 0.0);
            let h = (a[i + 1] - a[i]).min(if i > 0 {
                a[i] - a[i - 1]
            } else {
                f64::INFINITY
            });
            let mut e = origin.clone();
            e[k] = h;
            let qp = self.height(&e);
            e[k] = -h;
            let qm = self.height(&e);
            if ((qp - qm) / (2.0 * h)).abs() > 1e-8 * scale.max(1.0) {
                return Err(Error::Geometry("graph floor must satisfy ∇q(0) = 0".into()));
            }
        }
        Ok(())
    }
}

fn cross2(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn hull_2d(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Vec<f64>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross2(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0
        {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Vec<f64>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross2(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0
        {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

impl Polytope {
    fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vertices.first().map_or(0, Vec::len);
        if !(dim == 2 || dim == 3) || vertices.iter().any(|v| v.len() != dim) {
            return Err(Error::Geometry(
                "polytope vertices must share dimension 2 or 3".into(),
            ));
        }
        let facets = if dim == 2 {
            let hull = hull_2d(&vertices);
            if hull.len() < 3 {
                return Err(Error::Geometry("degenerate polygon".into()));
            }
            (0..hull.len())
                .map(|i| {
                    let a = &hull[i];
                    let b = &hull[(i + 1) % hull.len()];
                    let t = sub(b, a);
                    let len = norm(&t);
                    let nrm = vec![t[1] / len, -t[0] / len];
                    let off = dot(&nrm, a);
                    (nrm, off)
                })
                .collect()
        } else {
            let scale = vertices.iter().map(|v| norm(v)).fold(1.0, f64::max);
            let tol = 1e-10 * scale;
            let mut facets: Vec<(Vec<f64>, f64)> = Vec::new();
            let m = vertices.len();
            for i in 0..m {
                for j in i + 1..m {
                    for k in j + 1..m {
                        let u = sub(&vertices[j], &vertices[i]);
                        let v = sub(&vertices[k], &vertices[i]);
                        let c = [
                            u[1] * v[2] - u[2] * v[1],
                            u[2] * v[0] - u[0] * v[2],
                            u[0] * v[1] - u[1] * v[0],
                        ];
                        let len = norm(&c);
                        if len <= 1e-12 * scale * scale {
                            continue;
                        }
                        let mut nrm: Vec<f64> = c.iter().map(|x| x / len).collect();
                        let mut off = dot(&nrm, &vertices[i]);
                        let side: Vec<f64> = vertices.iter().map(|p| dot(&nrm, p) - off).collect();
                        let (neg, pos) = side
                            .iter()
                            .fold((false, false), |(n, p), s| (n || *s < -tol, p || *s > tol));
                        if neg && pos {
                            continue;
                        }
                        if pos {
                            nrm.iter_mut().for_each(|x| *x = -*x);
                            off = -off;
                        }
                        if !facets
                            .iter()
                            .any(|(n2, o2)| norm(&sub(n2, &nrm)) < 1e-9 && (o2 - off).abs() < tol)
                        {
                            facets.push((nrm, off));
                        }
                    }
                }
            }
            if facets.len() < 4 {
                return Err(Error::Geometry("degenerate polytope".into()));
            }
            facets
        };
        Ok(Polytope { vertices, facets })
    }

    fn level(&self, p: &[f64]) -> f64 {
        self.facets
            .iter()
            .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(dot(a, p) - b))
    }
}

impl ConvexDomain {
    /// Half-space chart `{x ∈ box : x_n > q(x')}` with `q` sampled on `axes`.
    pub fn graph(
        box_lo: Vec<f64>,
        box_hi: Vec<f64>,
        axes: Vec<Vec<f64>>,
        q: Vec<f64>,
    ) -> Result<Self> {
        let dim = box_lo.len();
        if !(dim == 2 || dim == 3) || box_hi.len() != dim || axes.len() != dim - 1 {
            return Err(Error::Geometry(
                "graph domain needs n ∈ {2, 3} and n−1 floor axes".into(),
            ));
        }
        let floor = GraphFloor {
            axes,
            q,
            box_lo,
            box_hi,
        };
        floor.validate()?;
        Ok(ConvexDomain {
            dim,
            kind: DomainKind::Graph(floor),
        })
    }

    /// Graph domain whose floor samples `q` on a uniform tangential grid of
    /// `nodes` points per axis spanning the box.
    pub fn graph_from_fn(
        box_lo: Vec<f64>,
        box_hi: Vec<f64>,
        nodes: usize,
        q: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let dim = box_lo.len();
        let axes: Vec<Vec<f64>> = (0..dim - 1)
            .map(|k| crate::fields::linspace(box_lo[k], box_hi[k], nodes))
            .collect();
        let values = if dim == 2 {
            axes[0].iter().map(|&x| q(&[x])).collect()
        } else {
            let mut v = Vec::with_capacity(nodes * nodes);
            for &x in &axes[0] {
                for &y in &axes[1] {
                    v.push(q(&[x, y]));
                }
            }
            v
        };
        Self::graph(box_lo, box_hi, axes, values)
    }

    /// The flat strip `[−w, w]^{n−1} × [0, height]` with floor `q ≡ 0`.
    pub fn flat_strip(dim: usize, half_width: f64, height: f64) -> Result<Self> {
        let mut lo = vec![-half_width; dim];
        let mut hi = vec![half_width; dim];
        lo[dim - 1] = 0.0;
        hi[dim - 1] = height;
        Self::graph_from_fn(lo, hi, 3, |_| 0.0)
    }

    pub fn polytope(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let poly = Polytope::new(vertices)?;
        Ok(ConvexDomain {
            dim: poly.vertices[0].len(),
            kind: DomainKind::Polytope(poly),
        })
    }

    pub fn rectangle(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        Self::polytope(vec![
            vec![lo[0], lo[1]],
            vec![hi[0], lo[1]],
            vec![hi[0], hi[1]],
            vec![lo[0], hi[1]],
        ])
    }

    pub fn level_set(dim: usize, shape: LevelSetShape) -> Result<Self> {
        let ok = match &shape {
            LevelSetShape::Ball { center, radius } => center.len() == dim && *radius > 0.0,
            LevelSetShape::Ellipsoid { center, semi_axes } => {
                center.len() == dim && semi_axes.len() == dim && semi_axes.iter().all(|a| *a > 0.0)
            }
            LevelSetShape::HalfBall { radius } => *radius > 0.0,
            LevelSetShape::Custom {
                lo,
                hi,
                interior_point,
                level,
            } => {
                lo.len() == dim
                    && hi.len() == dim
                    && interior_point.len() == dim
                    && level(interior_point) < 0.0
            }
        };
        if !ok || !(dim == 2 || dim == 3) {
            return Err(Error::Geometry("inconsistent level-set description".into()));
        }
        Ok(ConvexDomain {
            dim,
            kind: DomainKind::LevelSet(shape),
        })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let dim = center.len();
        Self::level_set(dim, LevelSetShape::Ball { center, radius })
    }

    pub fn disk(radius: f64) -> Result<Self> {
        Self::ball(vec![0.0, 0.0], radius)
    }

    pub fn half_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::level_set(dim, LevelSetShape::HalfBall { radius })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    /// Signed level: negative inside, zero on the boundary, positive outside.
    pub fn level(&self, p: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::Graph(g) => {
                let n = p.len();
                (g.height(&p[..n - 1]) - p[n - 1]).max(box_level(p, &g.box_lo, &g.box_hi))
            }
            DomainKind::Polytope(poly) => poly.level(p),
            DomainKind::LevelSet(shape) => match shape {
                LevelSetShape::Ball { center, radius } => norm(&sub(p, center)) - radius,
                LevelSetShape::Ellipsoid { center, semi_axes } => {
                    p.iter()
                        .zip(center)
                        .zip(semi_axes)
                        .map(|((x, c), a)| ((x - c) / a).powi(2))
                        .sum::<f64>()
                        - 1.0
                }
                LevelSetShape::HalfBall { radius } => (norm(p) - radius).max(-p[p.len() - 1]),
                LevelSetShape::Custom { level, .. } => level(p),
            },
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim && self.level(p) <= BOUNDARY_TOL
    }

    /// Axis-aligned bounding box.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            DomainKind::Graph(g) => (g.box_lo.clone(), g.box_hi.clone()),
            DomainKind::Polytope(p) => {
                let mut lo = vec![f64::INFINITY; self.dim];
                let mut hi = vec![f64::NEG_INFINITY; self.dim];
                for v in &p.vertices {
                    for k in 0..self.dim {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
            DomainKind::LevelSet(shape) => match shape {
                LevelSetShape::Ball { center, radius } => (
                    center.iter().map(|c| c - radius).collect(),
                    center.iter().map(|c| c + radius).collect(),
                ),
                LevelSetShape::Ellipsoid { center, semi_axes } => (
                    center.iter().zip(semi_axes).map(|(c, a)| c - a).collect(),
                    center.iter().zip(semi_axes).map(|(c, a)| c + a).collect(),
                ),
                LevelSetShape::HalfBall { radius } => {
                    let mut lo = vec![-radius; self.dim];
                    lo[self.dim - 1] = 0.0;
                    (lo, vec![*radius; self.dim])
                }
                LevelSetShape::Custom { lo, hi, .. } => (lo.clone(), hi.clone()),
            },
        }
    }

    /// Euclidean distance to `∂Ω`. For graph domains the boundary is the floor
    /// `x_n = q(x')`; the box only truncates the computational region.
    pub fn distance_to_boundary(&self, p: &[f64]) -> Result<f64> {
        if !self.contains(p) {
            return Err(Error::OutsideDomain { point: p.to_vec() });
        }
        let d = match &self.kind {
            DomainKind::Graph(g) => g.distance(p),
            DomainKind::Polytope(poly) => poly
                .facets
                .iter()
                .fold(f64::INFINITY, |m, (a, b)| m.min(b - dot(a, p)))
                .max(0.0),
            DomainKind::LevelSet(shape) => match shape {
                LevelSetShape::Ball { center, radius } => (radius - norm(&sub(p, center))).max(0.0),
                LevelSetShape::HalfBall { radius } => {
                    (radius - norm(p)).min(p[p.len() - 1]).max(0.0)
                }
                LevelSetShape::Ellipsoid { center, semi_axes } => {
                    ellipsoid_distance(&sub(p, center), semi_axes)
                }
                LevelSetShape::Custom { .. } => self.ray_distance(p),
            },
        };
        Ok(d)
    }

    /// First boundary crossing along `p + t·dir`, `t ∈ [0, t_max]`, by
    /// bisection on the level function. Returns `None` if the segment stays
    /// inside.
    pub fn ray_exit(&self, p: &[f64], dir: &[f64], t_max: f64) -> Option<f64> {
        let at = |t: f64| -> Vec<f64> { p.iter().zip(dir).map(|(x, d)| x + t * d).collect() };
        if self.level(&at(t_max)) <= 0.0 {
            return None;
        }
        let (mut a, mut b) = (0.0, t_max);
        if self.level(p) > 0.0 {
            return Some(0.0);
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if self.level(&at(m)) <= 0.0 {
                a = m;
            } else {
                b = m;
            }
            if b - a <= 1e-15 * t_max {
                break;
            }
        }
        Some(0.5 * (a + b))
    }

    fn ray_length(&self, p: &[f64], dir: &[f64]) -> f64 {
        let (lo, hi) = self.bounds();
        let diam = norm(&sub(&hi, &lo)) * 1.01 + 1e-12;
        self.ray_exit(p, dir, diam).unwrap_or(diam)
    }

    /// Interior distance as the shortest exit ray, refined around the best
    /// sampled direction.
    fn ray_distance(&self, p: &[f64]) -> f64 {
        if self.dim == 2 {
            let m = 256;
            let f = |th: f64| self.ray_length(p, &[th.cos(), th.sin()]);
            let step = 2.0 * core::f64::consts::PI / m as f64;
            let (mut bi, mut bv) = (0, f64::INFINITY);
            for i in 0..m {
                let v = f(i as f64 * step);
                if v < bv {
                    bv = v;
                    bi = i;
                }
            }
            let center = bi as f64 * step;
            golden_min(&f, center - step, center + step, 1e-13)
                .1
                .min(bv)
        } else {
            let m = 2000;
            let golden = core::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            let dir = |theta: f64, phi: f64| {
                [phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()]
            };
            let mut best = (0.0, 0.0, f64::INFINITY);
            for i in 0..m {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
                let phi = z.acos();
                let theta = golden * i as f64;
                let v = self.ray_length(p, &dir(theta, phi));
                if v < best.2 {
                    best = (theta, phi, v);
                }
            }
            let mut step = 0.1;
            while step > 1e-10 {
                let mut improved = false;
                for (dt, dp) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                    let v = self.ray_length(p, &dir(best.0 + dt, best.1 + dp));
                    if v < best.2 {
                        best = (best.0 + dt, best.1 + dp, v);
                        improved = true;
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            best.2
        }
    }

    /// Unit inner normal at a boundary point.
    pub fn inner_normal(&self, z: &[f64]) -> Result<Vec<f64>> {
        if self.level(z).abs() > 1e-8 {
            return Err(Error::Geometry(format!("{z:?} is not a boundary point")));
        }
        let grad: Vec<f64> = match &self.kind {
            DomainKind::Graph(g) => {
                let n = self.dim;
                let h = 1e-6;
                let mut v = vec![0.0; n];
                for k in 0..n - 1 {
                    let mut a = z[..n - 1].to_vec();
                    let mut b = a.clone();
                    a[k] += h;
                    b[k] -= h;
                    v[k] = (g.height(&a) - g.height(&b)) / (2.0 * h);
                }
                v[n - 1] = -1.0;
                v
            }
            DomainKind::Polytope(poly) => {
                let best = poly
                    .facets
                    .iter()
                    .min_by(|a, b| {
                        (a.1 - dot(&a.0, z))
                            .abs()
                            .total_cmp(&(b.1 - dot(&b.0, z)).abs())
                    })
                    .ok_or_else(|| Error::Geometry("polytope without facets".into()))?;
                best.0.clone()
            }
            DomainKind::LevelSet(_) => {
                let h = 1e-7;
                (0..self.dim)
                    .map(|k| {
                        let mut a = z.to_vec();
                        let mut b = z.to_vec();
                        a[k] += h;
                        b[k] -= h;
                        (self.level(&a) - self.level(&b)) / (2.0 * h)
                    })
                    .collect()
            }
        };
        let len = norm(&grad);
        if len == 0.0 || !len.is_finite() {
            return Err(Error::Geometry("boundary normal is undefined".into()));
        }
        Ok(grad.iter().map(|g| -g / len).collect())
    }

    /// Local orthonormal chart at a boundary point with the inner normal as
    /// the last axis.
    pub fn local_graph_chart(&self, z: &[f64]) -> Result<Chart> {
        let normal = self.inner_normal(z)?;
        let n = self.dim;
        let mut frame: Vec<Vec<f64>> = Vec::with_capacity(n);
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            let c = dot(&e, &normal);
            let mut v: Vec<f64> = e.iter().zip(&normal).map(|(a, b)| a - c * b).collect();
            for f in &frame {
                let c = dot(&v, f);
                v.iter_mut().zip(f).for_each(|(a, b)| *a -= c * b);
            }
            let len = norm(&v);
            if len > 1e-8 {
                frame.push(v.iter().map(|x| x / len).collect());
            }
            if frame.len() == n - 1 {
                break;
            }
        }
        if n == 2 {
            // right-handed: tangent is the normal rotated clockwise
            frame = vec![vec![normal[1], -normal[0]]];
        }
        frame.push(normal);
        Ok(Chart {
            origin: z.to_vec(),
            frame,
        })
    }

    /// The domain `M^{-1} Ω` for the linear map `M = D·A·F_h`.
    pub fn pull_back(&self, map: &AnisotropicMap) -> Result<ConvexDomain> {
        let m = map.matrix();
        let n = self.dim;
        if map.dim() != n {
            return Err(Error::param("map and domain dimensions differ"));
        }
        let minv = crate::linalg::inverse(&m, n).ok_or_else(|| Error::param("singular map"))?;
        let apply = |mat: &[f64], x: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| (0..n).map(|j| mat[i * n + j] * x[j]).sum())
                .collect()
        };
        match &self.kind {
            DomainKind::Polytope(poly) => {
                ConvexDomain::polytope(poly.vertices.iter().map(|v| apply(&minv, v)).collect())
            }
            DomainKind::LevelSet(_) => {
                let (lo, hi) = self.bounds();
                let mut blo = vec![f64::INFINITY; n];
                let mut bhi = vec![f64::NEG_INFINITY; n];
                for corner in 0..(1usize << n) {
                    let c: Vec<f64> = (0..n)
                        .map(|k| if (corner >> k) & 1 == 1 { hi[k] } else { lo[k] })
                        .collect();
                    let img = apply(&minv, &c);
                    for k in 0..n {
                        blo[k] = blo[k].min(img[k]);
                        bhi[k] = bhi[k].max(img[k]);
                    }
                }
                let base = self.clone();
                let interior = {
                    let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
                    apply(&minv, &mid)
                };
                let mm = m.clone();
                ConvexDomain::level_set(
                    n,
                    LevelSetShape::Custom {
                        level: Arc::new(move |x: &[f64]| {
                            let y: Vec<f64> = (0..n)
                                .map(|i| (0..n).map(|j| mm[i * n + j] * x[j]).sum())
                                .collect();
                            base.level(&y)
                        }),
                        lo: blo,
                        hi: bhi,
                        interior_point: interior,
                    },
                )
            }
            DomainKind::Graph(g) => {
                if map.d.is_some() {
                    return Err(Error::param(
                        "graph pull-back supports slidings and dilations only",
                    ));
                }
                let f = map.f_diagonal();
                let fn_ = f[n - 1];
                // x ∈ Ω_h ⇔ f_n x_n > q(f' x' + τ f_n x_n): solve the floor by fixed point
                let axes: Vec<Vec<f64>> = (0..n - 1)
                    .map(|k| g.axes[k].iter().map(|y| y / f[k]).collect())
                    .collect();
                let solve_floor = |xp: &[f64]| -> f64 {
                    let mut xn = 0.0;
                    for _ in 0..200 {
                        let y: Vec<f64> = (0..n - 1)
                            .map(|k| f[k] * xp[k] + map.tau[k] * fn_ * xn)
                            .collect();
                        let next = g.height(&y) / fn_;
                        if (next - xn).abs() <= 1e-15 * (1.0 + xn.abs()) {
                            xn = next;
                            break;
                        }
                        xn = next;
                    }
                    xn
                };
                let q: Vec<f64> = if n == 2 {
                    axes[0].iter().map(|&x| solve_floor(&[x])).collect()
                } else {
                    let mut v = Vec::new();
                    for &x in &axes[0] {
                        for &y in &axes[1] {
                            v.push(solve_floor(&[x, y]));
                        }
                    }
                    v
                };
                let qmin = q.iter().fold(f64::INFINITY, |a, b| a.min(*b));
                let mut lo: Vec<f64> = axes.iter().map(|a| a[0]).collect();
                let mut hi: Vec<f64> = axes.iter().map(|a| a[a.len() - 1]).collect();
                lo.push(qmin.min(g.box_lo[n - 1] / fn_));
                hi.push(g.box_hi[n - 1] / fn_);
                ConvexDomain::graph(lo, hi, axes, q)
            }
        }
    }

    /// Midpoint convexity test on random interior pairs drawn from the
    /// bounding box; returns the number of violations.
    pub fn midpoint_violations(&self, pairs: usize, seed: u64) -> usize {
        let (lo, hi) = self.bounds();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut found = 0;
        let mut violations = 0;
        let mut attempts = 0;
        while found < pairs && attempts < pairs * 1000 {
            attempts += 1;
            let p: Vec<f64> = (0..self.dim)
                .map(|k| rng.random_range(lo[k]..=hi[k]))
                .collect();
            let q: Vec<f64> = (0..self.dim)
                .map(|k| rng.random_range(lo[k]..=hi[k]))
                .collect();
            if !self.contains(&p) || !self.contains(&q) {
                continue;
            }
            found += 1;
            let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
            if !self.contains(&m) {
                violations += 1;
            }
        }
        violations
    }
}

fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Distance from an interior point `p` (centered coordinates) to the ellipsoid
/// surface, via the monotone secular equation in the Lagrange multiplier.
fn ellipsoid_distance(p: &[f64], a: &[f64]) -> f64 {
    // closest point x_i = a_i² p_i / (a_i² + s) with s ≤ 0 for interior p,
    // where Σ (a_i p_i / (a_i² + s))² = 1 and s > −min a_i².
    let amin2 = a.iter().fold(f64::INFINITY, |m, v| m.min(v * v));
    let g = |s: f64| -> f64 {
        p.iter()
            .zip(a)
            .map(|(x, ai)| (ai * x / (ai * ai + s)).powi(2))
            .sum::<f64>()
            - 1.0
    };
    if p.iter().all(|x| *x == 0.0) {
        return a.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    }
    // on (−amin², 0] g decreases from +∞ (or a finite value) to g(0) ≤ 0
    let mut lo = -amin2;
    let mut hi = 0.0;
    if g(lo * (1.0 - 1e-15)) < 0.0 {
        // the nearest axis has p_i = 0: the minimizer sits at the endpoint
        // with the free coordinate fixed by the constraint
        let s = -amin2;
        let mut x: Vec<f64> = p
            .iter()
            .zip(a)
            .map(|(xi, ai)| {
                let d = ai * ai + s;
                if d.abs() < 1e-300 {
                    0.0
                } else {
                    ai * ai * xi / d
                }
            })
            .collect();
        let rest: f64 = x.iter().zip(a).map(|(xi, ai)| (xi / ai).powi(2)).sum();
        let k = (0..a.len())
            .min_by(|&i, &j| a[i].total_cmp(&a[j]))
            .unwrap_or(0);
        x[k] = a[k] * (1.0 - rest).max(0.0).sqrt() * if p[k] < 0.0 { -1.0 } else { 1.0 };
        return norm(&sub(p, &x));
    }
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if g(m) > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    let s = 0.5 * (lo + hi);
    let x: Vec<f64> = p
        .iter()
        .zip(a)
        .map(|(xi, ai)| ai * ai * xi / (ai * ai + s))
        .collect();
    norm(&sub(p, &x))
}

/// Orthonormal frame at a boundary point; the last row is the inner normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub origin: Vec<f64>,
    pub frame: Vec<Vec<f64>>,
}

impl Chart {
    pub fn to_local(&self, x: &[f64]) -> Vec<f64> {
        let d = sub(x, &self.origin);
        self.frame.iter().map(|e| dot(e, &d)).collect()
    }

    pub fn to_global(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.origin.clone();
        for (c, e) in y.iter().zip(&self.frame) {
            x.iter_mut().zip(e).for_each(|(a, b)| *a += c * b);
        }
        x
    }
}

/// The sliding `x ↦ x + τ x_n` along `{x_n = 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sliding {
    pub tau: Vec<f64>,
}

impl Sliding {
    pub fn new(tau: Vec<f64>) -> Self {
        Sliding { tau }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut y = x.to_vec();
        for k in 0..n - 1 {
            y[k] += self.tau[k] * x[n - 1];
        }
        y
    }

    pub fn compose(&self, then: &Sliding) -> Sliding {
        Sliding {
            tau: self.tau.iter().zip(&then.tau).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn inverse(&self) -> Sliding {
        Sliding {
            tau: self.tau.iter().map(|t| -t).collect(),
        }
    }

    pub fn matrix(&self) -> Vec<f64> {
        let n = self.tau.len() + 1;
        let mut m = vec![0.0; n * n];
        for k in 0..n {
            m[k * n + k] = 1.0;
        }
        for k in 0..n - 1 {
            m[k * n + n - 1] = self.tau[k];
        }
        m
    }
}

/// The composite `D·A·F_h` of an anisotropic dilation, a sliding and an
/// optional symmetric factor with `e_n` as an eigenvector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnisotropicMap {
    pub h: f64,
    pub alpha: f64,
    pub tau: Vec<f64>,
    pub d: Option<Vec<f64>>,
}

pub fn anisotropic_dilation(h: f64, alpha: f64, n: usize) -> Result<AnisotropicMap> {
    if !(h > 0.0) || !(alpha > 0.0) {
        return Err(Error::param(format!(
            "need h > 0 and α > 0, got h = {h}, α = {alpha}"
        )));
    }
    if n < 2 {
        return Err(Error::param("dimension must be at least 2"));
    }
    Ok(AnisotropicMap {
        h,
        alpha,
        tau: vec![0.0; n - 1],
        d: None,
    })
}

impl AnisotropicMap {
    pub fn dim(&self) -> usize {
        self.tau.len() + 1
    }

    pub fn with_sliding(mut self, tau: Vec<f64>) -> Result<Self> {
        if tau.len() + 1 != self.dim() {
            return Err(Error::param("sliding vector has the wrong length"));
        }
        self.tau = tau;
        Ok(self)
    }

    pub fn with_factor(mut self, d: Vec<f64>) -> Result<Self> {
        let n = self.dim();
        if d.len() != n * n {
            return Err(Error::param("factor must be n × n"));
        }
        for i in 0..n {
            for j in 0..n {
                if (d[i * n + j] - d[j * n + i]).abs() > 1e-12 {
                    return Err(Error::param("factor must be symmetric"));
                }
            }
        }
        if (0..n - 1).any(|i| d[i * n + n - 1].abs() > 1e-12) {
            return Err(Error::param("e_n must be an eigenvector of the factor"));
        }
        self.d = Some(d);
        Ok(self)
    }

    pub fn f_diagonal(&self) -> Vec<f64> {
        let n = self.dim();
        let mut f = vec![self.h.sqrt(); n];
        f[n - 1] = self.h.powf(1.0 / (2.0 + self.alpha));
        f
    }

    /// Row-major matrix of `D·A·F_h`.
    pub fn matrix(&self) -> Vec<f64> {
        let n = self.dim();
        let f = self.f_diagonal();
        let a = Sliding::new(self.tau.clone()).matrix();
        let mut af = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                af[i * n + j] = a[i * n + j] * f[j];
            }
        }
        match &self.d {
            None => af,
            Some(d) => {
                let mut m = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        m[i * n + j] = (0..n).map(|k| d[i * n + k] * af[k * n + j]).sum();
                    }
                }
                m
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let m = self.matrix();
        (0..n)
            .map(|i| (0..n).map(|j| m[i * n + j] * x[j]).sum())
            .collect()
    }
}

/// `x ↦ u(D·A·F_h x)/h` sampled on `target`.
pub fn compose_rescale(
    map: &AnisotropicMap,
    u: &ScalarField,
    target: &Arc<Grid>,
) -> Result<ScalarField> {
    let n = target.dim();
    if map.dim() != n || u.grid().dim() != n {
        return Err(Error::param("map, field and target grid dimensions differ"));
    }
    let (lo, hi) = (target.lower(), target.upper());
    for corner in 0..(1usize << n) {
        let c: Vec<f64> = (0..n)
            .map(|k| if (corner >> k) & 1 == 1 { hi[k] } else { lo[k] })
            .collect();
        if !u.grid().contains(&map.apply(&c)) {
            return Err(Error::OutOfRange { corner: c });
        }
    }
    let mut values = Vec::with_capacity(target.len());
    for i in 0..target.len() {
        values.push(u.interpolate(&map.apply(&target.node(i)))? / map.h);
    }
    ScalarField::from_values(target, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub center: Vec<f64>,
    pub height: f64,
    pub members: Vec<bool>,
    pub count: usize,
    pub bbox_lo: Vec<f64>,
    pub bbox_hi: Vec<f64>,
}

impl Section {
    pub fn extents(&self) -> Vec<f64> {
        self.bbox_hi
            .iter()
            .zip(&self.bbox_lo)
            .map(|(a, b)| a - b)
            .collect()
    }
}

/// `S_h(x₀) = {u < u(x₀) + ∇u(x₀)·(x − x₀) + h}` as a node indicator.
pub fn section_of(u: &ScalarField, x0: &[f64], h: f64) -> Result<Section> {
    if !(h > 0.0) {
        return Err(Error::param(format!(
            "section height must be positive, got {h}"
        )));
    }
    let conv = u.discrete_convexity_check();
    if let Some(node) = conv.worst_node {
        return Err(Error::Convexity {
            node,
            value: conv.worst_value,
        });
    }
    let g = u.grid();
    let u0 = u.interpolate(x0)?;
    let grad = u.gradient_fd(x0)?;
    let n = g.dim();
    let mut members = vec![false; g.len()];
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut count = 0;
    for i in 0..g.len() {
        let p = g.node(i);
        let plane = u0
            + grad
                .iter()
                .zip(p.iter().zip(x0))
                .map(|(d, (a, b))| d * (a - b))
                .sum::<f64>();
        if u.values()[i] < plane + h {
            members[i] = true;
            count += 1;
            for k in 0..n {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
    }
    if count == 0 {
        lo = x0.to_vec();
        hi = x0.to_vec();
    }
    Ok(Section {
        center: x0.to_vec(),
        height: h,
        members,
        count,
        bbox_lo: lo,
        bbox_hi: hi,
    })
}

/// Largest difference quotient of `d_Ω(M x) / (h^{1/(2+α)} d_{Ω_h}(x))` over
/// all pairs of the sampled region, where `Ω_h = M^{-1}Ω` and `M = D·A·F_h`.
pub fn distance_ratio_lipschitz(
    domain: &ConvexDomain,
    map: &AnisotropicMap,
    region: &[Vec<f64>],
) -> Result<f64> {
    let pulled = domain.pull_back(map)?;
    let scale = map.h.powf(1.0 / (2.0 + map.alpha));
    let mut samples = Vec::new();
    for x in region {
        let dh = match pulled.distance_to_boundary(x) {
            Ok(d) if d > 0.0 => d,
            _ => continue,
        };
        let d = domain.distance_to_boundary(&map.apply(x))?;
        samples.push((x.clone(), d / (scale * dh)));
    }
    if samples.len() < 2 {
        return Err(Error::Sampling("fewer than two interior samples".into()));
    }
    let mut best: f64 = 0.0;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let dist = norm(&sub(&samples[i].0, &samples[j].0));
            if dist > 0.0 {
                best = best.max((samples[i].1 - samples[j].1).abs() / dist);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_solution;

    #[test]
    fn distance_examples() {
        let disk = ConvexDomain::disk(1.0).unwrap();
        assert_eq!(disk.distance_to_boundary(&[0.0, 0.0]).unwrap(), 1.0);
        let strip = ConvexDomain::flat_strip(2, 1.0, 1.0).unwrap();
        assert!((strip.distance_to_boundary(&[0.3, 0.2]).unwrap() - 0.2).abs() < 1e-15);
        let sq = ConvexDomain::rectangle([-1.0, -1.0], [1.0, 1.0]).unwrap();
        assert!((sq.distance_to_boundary(&[0.5, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            disk.distance_to_boundary(&[2.0, 0.0]),
            Err(Error::OutsideDomain { .. })
        ));
        assert_eq!(disk.distance_to_boundary(&[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn ellipse_and_custom_distances_agree() {
        let e = ConvexDomain::level_set(
            2,
            LevelSetShape::Ellipsoid {
                center: vec![0.0, 0.0],
                semi_axes: vec![2.0, 1.0],
            },
        )
        .unwrap();
        let custom = ConvexDomain::level_set(
            2,
            LevelSetShape::Custom {
                level: Arc::new(|p: &[f64]| (p[0] / 2.0).powi(2) + p[1] * p[1] - 1.0),
                lo: vec![-2.0, -1.0],
                hi: vec![2.0, 1.0],
                interior_point: vec![0.0, 0.0],
            },
        )
        .unwrap();
        for p in [[0.3, 0.2], [1.5, 0.1], [0.0, 0.0], [-1.0, -0.5]] {
            let a = e.distance_to_boundary(&p).unwrap();
            let b = custom.distance_to_boundary(&p).unwrap();
            assert!((a - b).abs() < 1e-9, "{p:?}: {a} vs {b}");
        }
        assert!((e.distance_to_boundary(&[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn curved_floor_distance_sandwich() {
        let eps = 0.2;
        let dom = ConvexDomain::graph_from_fn(vec![-1.0, 0.0], vec![1.0, 1.0], 4001, |x| {
            eps * x[0] * x[0]
        })
        .unwrap();
        for (x, y) in [(0.1, 0.3), (0.5, 0.4), (-0.3, 0.05), (0.0, 0.2)] {
            let d = dom.distance_to_boundary(&[x, y]).unwrap();
            assert!(d <= y + 1e-8);
            assert!(d >= (y - 2.0 * eps * x * x).max(0.0) - 1e-8, "{x} {y} {d}");
        }
    }

    #[test]
    fn three_dimensional_domains() {
        let cube = ConvexDomain::polytope(
            (0..8)
                .map(|c| {
                    (0..3)
                        .map(|k| if (c >> k) & 1 == 1 { 1.0 } else { -1.0 })
                        .collect()
                })
                .collect(),
        )
        .unwrap();
        assert!((cube.distance_to_boundary(&[0.2, 0.5, -0.1]).unwrap() - 0.5).abs() < 1e-14);
        let graph =
            ConvexDomain::graph_from_fn(vec![-1.0, -1.0, 0.0], vec![1.0, 1.0, 1.0], 41, |_| 0.0)
                .unwrap();
        assert!((graph.distance_to_boundary(&[0.1, 0.2, 0.3]).unwrap() - 0.3).abs() < 1e-14);
        let ball = ConvexDomain::ball(vec![0.0; 3], 2.0).unwrap();
        assert!((ball.distance_to_boundary(&[1.0, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dilation_examples() {
        let m = anisotropic_dilation(0.0625, 2.0, 2).unwrap();
        let f = m.f_diagonal();
        assert!((f[0] - 0.25).abs() < 1e-15 && (f[1] - 0.5).abs() < 1e-15);
        let id = anisotropic_dilation(1.0, 3.7, 3).unwrap();
        assert!(id.f_diagonal().iter().all(|v| *v == 1.0));
        let m = anisotropic_dilation(0.01, 1.0, 3).unwrap().f_diagonal();
        assert!((m[0] - 0.1).abs() < 1e-15 && (m[2] - 0.01f64.powf(1.0 / 3.0)).abs() < 1e-15);
        assert!(anisotropic_dilation(0.0, 1.0, 2).is_err());
        assert!(anisotropic_dilation(1.0, -1.0, 2).is_err());
    }

    #[test]
    fn rescale_examples() {
        let g = Arc::new(Grid::uniform(&[-1.0, 0.0], &[1.0, 1.0], &[81, 81]).unwrap());
        let u0 = ScalarField::sample(|x| model_solution(x, 1.0), &g).unwrap();
        let map = anisotropic_dilation(0.25, 1.0, 2).unwrap();
        let target = Arc::new(Grid::uniform(&[-1.0, 0.0], &[1.0, 1.0], &[11, 11]).unwrap());
        let uh = compose_rescale(&map, &u0, &target).unwrap();
        for i in 0..target.len() {
            let p = target.node(i);
            assert!((uh.values()[i] - model_solution(&p, 1.0)).abs() < 2e-3);
        }

        let lin = ScalarField::sample(|x| x[1], &g).unwrap();
        let map = anisotropic_dilation(0.25, 2.0, 2).unwrap();
        let uh = compose_rescale(&map, &lin, &target).unwrap();
        let p = target.node(target.flat(&[3, 7]));
        assert!((uh.values()[target.flat(&[3, 7])] - p[1] * 0.25f64.powf(-0.75)).abs() < 1e-12);

        let wide = Arc::new(Grid::uniform(&[-3.0, 0.0], &[3.0, 1.0], &[5, 5]).unwrap());
        let map = anisotropic_dilation(1.0, 1.0, 2).unwrap();
        match compose_rescale(&map, &u0, &wide) {
            Err(Error::OutOfRange { corner }) => assert_eq!(corner, vec![-3.0, 0.0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn section_of_paraboloid() {
        let g = Arc::new(Grid::uniform(&[-2.0, -2.0], &[2.0, 2.0], &[81, 81]).unwrap());
        let u = ScalarField::sample(|x| 0.5 * (x[0] * x[0] + x[1] * x[1]), &g).unwrap();
        let s = section_of(&u, &[0.0, 0.0], 0.5).unwrap();
        for k in 0..2 {
            assert!((s.bbox_hi[k] - 1.0).abs() <= 0.05 + 1e-12);
            assert!((s.bbox_lo[k] + 1.0).abs() <= 0.05 + 1e-12);
        }
        assert!(section_of(&u, &[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn flat_floor_ratio_is_constant() {
        let dom = ConvexDomain::flat_strip(2, 1.0, 1.0).unwrap();
        let map = anisotropic_dilation(0.1, 1.0, 2).unwrap();
        let region: Vec<Vec<f64>> = (1..8)
            .flat_map(|i| (1..6).map(move |j| vec![-0.6 + 0.15 * i as f64, 0.1 * j as f64]))
            .collect();
        let lip = distance_ratio_lipschitz(&dom, &map, &region).unwrap();
        assert!(lip < 1e-12, "{lip}");
        assert!(distance_ratio_lipschitz(&dom, &map, &region[..1]).is_err());
    }
}
