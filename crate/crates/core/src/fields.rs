//! Tensor-product grids, sampled scalar fields and finite-difference
//! Hessians.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::param("grid needs at least one axis"));
        }
        for (k, axis) in axes.iter().enumerate() {
            if axis.len() < 3 {
                return Err(Error::param(format!("axis {k} has fewer than 3 nodes")));
            }
            if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::param(format!("axis {k} is not strictly increasing")));
            }
        }
        let mut strides = vec![1; axes.len()];
        for k in (0..axes.len() - 1).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].len();
        }
        Ok(Grid { axes, strides })
    }

    pub fn uniform(lo: &[f64], hi: &[f64], counts: &[usize]) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != counts.len() {
            return Err(Error::param("bounds and counts differ in dimension"));
        }
        let axes = (0..lo.len())
            .map(|k| linspace(lo[k], hi[k], counts[k]))
            .collect();
        Grid::new(axes)
    }

    /// Uniform in the tangential axes, geometrically graded toward `lo` in the
    /// last axis with successive spacing ratio `ratio`.
    pub fn graded(lo: &[f64], hi: &[f64], counts: &[usize], ratio: f64) -> Result<Self> {
        if !(1.05..=1.2).contains(&ratio) {
            return Err(Error::param(format!(
                "grading ratio {ratio} outside [1.05, 1.2]"
            )));
        }
        let n = lo.len();
        if hi.len() != n || counts.len() != n {
            return Err(Error::param("bounds and counts differ in dimension"));
        }
        let mut axes: Vec<Vec<f64>> = (0..n - 1)
            .map(|k| linspace(lo[k], hi[k], counts[k]))
            .collect();
        let cells = counts[n - 1].saturating_sub(1);
        let total: f64 = (0..cells).map(|k| ratio.powi(k as i32)).sum();
        let h0 = (hi[n - 1] - lo[n - 1]) / total;
        let mut last = Vec::with_capacity(counts[n - 1]);
        let mut x = lo[n - 1];
        last.push(x);
        for k in 0..cells {
            x += h0 * ratio.powi(k as i32);
            last.push(x);
        }
        if let Some(end) = last.last_mut() {
            *end = hi[n - 1];
        }
        axes.push(last);
        Grid::new(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, k: usize) -> &[f64] {
        &self.axes[k]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.strides[0] * self.axes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in 0..self.dim() {
            idx[k] = flat / self.strides[k];
            flat %= self.strides[k];
        }
        idx
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.axes[k][i])
            .collect()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a[0]).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a[a.len() - 1]).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let slack = 1e-12;
        p.len() == self.dim()
            && p.iter().zip(&self.axes).all(|(x, a)| {
                let span = a[a.len() - 1] - a[0];
                *x >= a[0] - slack * span && *x <= a[a.len() - 1] + slack * span
            })
    }

    /// Uniform spacing of an axis, if the axis is uniform to 1e-9 relative.
    pub fn spacing(&self, k: usize) -> Option<f64> {
        let a = &self.axes[k];
        let h = (a[a.len() - 1] - a[0]) / (a.len() - 1) as f64;
        a.windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h)
            .then_some(h)
    }

    pub fn is_boundary_node(&self, idx: &[usize]) -> bool {
        idx.iter()
            .zip(&self.axes)
            .any(|(&i, a)| i == 0 || i + 1 == a.len())
    }

    /// Cell containing `x` along axis `k` and the local coordinate in [0, 1].
    pub fn locate(&self, k: usize, x: f64) -> Option<(usize, f64)> {
        let a = &self.axes[k];
        let n = a.len();
        let span = a[n - 1] - a[0];
        if x < a[0] - 1e-12 * span || x > a[n - 1] + 1e-12 * span {
            return None;
        }
        let x = x.clamp(a[0], a[n - 1]);
        let i = match a.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let t = (x - a[i]) / (a[i + 1] - a[i]);
        Some((i, t.clamp(0.0, 1.0)))
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo; n];
    }
    let h = (hi - lo) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
    v[n - 1] = hi;
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianSample {
    pub point: Vec<f64>,
    /// Row-major `n × n` symmetric matrix.
    pub matrix: Vec<f64>,
    pub width: usize,
    /// Set when a one-sided difference was used at the floor `x_n = 0`.
    pub one_sided: bool,
}

impl HessianSample {
    pub fn dim(&self) -> usize {
        self.point.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim() + j]
    }

    pub fn det(&self) -> f64 {
        linalg::det(&self.matrix, self.dim())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    StandardFd,
    MonotoneWidestencil,
}

/// Integer lattice frames of the 2D wide stencil, ordered by preference for
/// tie breaking.
pub const WIDE_FRAMES: [[(i64, i64); 2]; 8] = [
    [(1, 0), (0, 1)],
    [(1, 1), (-1, 1)],
    [(2, 1), (-1, 2)],
    [(1, 2), (-2, 1)],
    [(3, 1), (-1, 3)],
    [(1, 3), (-3, 1)],
    [(3, 2), (-2, 3)],
    [(2, 3), (-3, 2)],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub passed: bool,
    pub worst_node: Option<usize>,
    pub worst_value: f64,
    pub failing_nodes: usize,
    pub tolerance: f64,
}

impl ScalarField {
    pub fn sample(f: impl Fn(&[f64]) -> f64, grid: &Arc<Grid>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let v = f(&grid.node(i));
            if !v.is_finite() {
                return Err(Error::Evaluation { node: i });
            }
            values.push(v);
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation { node });
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.flat(idx)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        ScalarField::from_values(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Multilinear interpolation.
    pub fn interpolate(&self, p: &[f64]) -> Result<f64> {
        let g = &self.grid;
        if p.len() != g.dim() {
            return Err(Error::range("point dimension does not match the grid"));
        }
        let mut cells = Vec::with_capacity(g.dim());
        for (k, &x) in p.iter().enumerate() {
            cells.push(
                g.locate(k, x)
                    .ok_or_else(|| Error::range(format!("point {p:?} outside the grid")))?,
            );
        }
        let n = g.dim();
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut flat = 0;
            for (k, &(i, t)) in cells.iter().enumerate() {
                let bit = (corner >> k) & 1;
                w *= if bit == 1 { t } else { 1.0 - t };
                flat += (i + bit) * g.strides[k];
            }
            if w != 0.0 {
                acc += w * self.values[flat];
            }
        }
        Ok(acc)
    }

    fn axis_weights(
        &self,
        k: usize,
        i: usize,
        order: usize,
    ) -> Result<(Vec<isize>, Vec<f64>, bool)> {
        let a = self.grid.axis(k);
        let n = a.len();
        let last_axis = k + 1 == self.grid.dim();
        if i > 0 && i + 1 < n {
            let offs = vec![-1isize, 0, 1];
            let nodes = [a[i - 1], a[i], a[i + 1]];
            return Ok((offs, linalg::fd_weights(a[i], &nodes, order), false));
        }
        if i == 0 && last_axis && n >= 4 {
            let m = if order == 2 { 4 } else { 3 };
            let offs: Vec<isize> = (0..m as isize).collect();
            let nodes: Vec<f64> = (0..m).map(|j| a[j]).collect();
            return Ok((offs, linalg::fd_weights(a[0], &nodes, order), true));
        }
        Err(Error::range(format!(
            "node index {i} on axis {k} lacks stencil room"
        )))
    }

    fn node_hessian(&self, idx: &[usize]) -> Result<(Vec<f64>, bool)> {
        let n = self.grid.dim();
        let strides = self.grid.strides();
        let base = self.grid.flat(idx);
        let mut h = vec![0.0; n * n];
        let mut one_sided = false;
        let mut first = Vec::with_capacity(n);
        for k in 0..n {
            let (offs, w2, os) = self.axis_weights(k, idx[k], 2)?;
            one_sided |= os;
            let mut s = 0.0;
            for (o, w) in offs.iter().zip(&w2) {
                s += w * self.values[(base as isize + o * strides[k] as isize) as usize];
            }
            h[k * n + k] = s;
            let (offs1, w1, _) = self.axis_weights(k, idx[k], 1)?;
            first.push((offs1, w1));
        }
        for k in 0..n {
            for l in k + 1..n {
                let mut s = 0.0;
                for (ok, wk) in first[k].0.iter().zip(&first[k].1) {
                    for (ol, wl) in first[l].0.iter().zip(&first[l].1) {
                        let f = base as isize + ok * strides[k] as isize + ol * strides[l] as isize;
                        s += wk * wl * self.values[f as usize];
                    }
                }
                h[k * n + l] = s;
                h[l * n + k] = s;
            }
        }
        Ok((h, one_sided))
    }

    fn node_gradient(&self, idx: &[usize]) -> Vec<f64> {
        let g = &self.grid;
        let base = g.flat(idx);
        (0..g.dim())
            .map(|k| {
                let a = g.axis(k);
                let n = a.len();
                let (lo, hi) = if idx[k] == 0 {
                    (0, 2)
                } else if idx[k] + 1 == n {
                    (n - 3, n - 1)
                } else {
                    (idx[k] - 1, idx[k] + 1)
                };
                let nodes: Vec<f64> = (lo..=hi).map(|j| a[j]).collect();
                let w = linalg::fd_weights(a[idx[k]], &nodes, 1);
                (lo..=hi)
                    .zip(&w)
                    .map(|(j, c)| {
                        let f =
                            base as isize + (j as isize - idx[k] as isize) * g.strides[k] as isize;
                        c * self.values[f as usize]
                    })
                    .sum()
            })
            .collect()
    }

    fn corners(&self, p: &[f64]) -> Result<Vec<(Vec<usize>, f64)>> {
        let g = &self.grid;
        if p.len() != g.dim() {
            return Err(Error::range("point dimension does not match the grid"));
        }
        let mut cells = Vec::with_capacity(g.dim());
        for (k, &x) in p.iter().enumerate() {
            cells.push(
                g.locate(k, x)
                    .ok_or_else(|| Error::range(format!("point {p:?} outside the grid")))?,
            );
        }
        let n = g.dim();
        let mut out = Vec::new();
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = vec![0; n];
            for (k, &(i, t)) in cells.iter().enumerate() {
                let bit = (corner >> k) & 1;
                w *= if bit == 1 { t } else { 1.0 - t };
                idx[k] = i + bit;
            }
            if w > 1e-14 {
                out.push((idx, w));
            }
        }
        Ok(out)
    }

    /// Finite-difference gradient, interpolated between nodes.
    pub fn gradient_fd(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.grid.dim()];
        for (idx, w) in self.corners(p)? {
            for (g, v) in grad.iter_mut().zip(self.node_gradient(&idx)) {
                *g += w * v;
            }
        }
        Ok(grad)
    }

    /// Second differences at `p`: exact at nodes for quadratics, interpolated
    /// multilinearly between nodes.
    pub fn hessian_fd(&self, p: &[f64]) -> Result<HessianSample> {
        let n = self.grid.dim();
        let mut matrix = vec![0.0; n * n];
        let mut one_sided = false;
        for (idx, w) in self.corners(p)? {
            let (h, os) = self.node_hessian(&idx)?;
            one_sided |= os;
            for (m, v) in matrix.iter_mut().zip(h) {
                *m += w * v;
            }
        }
        Ok(HessianSample {
            point: p.to_vec(),
            matrix,
            width: 1,
            one_sided,
        })
    }

    pub fn hessian_at_node(&self, node: usize) -> Result<HessianSample> {
        let idx = self.grid.unflatten(node);
        let (matrix, one_sided) = self.node_hessian(&idx)?;
        Ok(HessianSample {
            point: self.grid.node(node),
            matrix,
            width: 1,
            one_sided,
        })
    }

    /// Discrete Monge-Ampère determinant at an interior node.
    pub fn det_hessian(&self, node: usize, scheme: Scheme) -> Result<f64> {
        let g = &self.grid;
        let idx = g.unflatten(node);
        if g.is_boundary_node(&idx) {
            return Err(Error::range(format!("node {node} is not interior")));
        }
        match scheme {
            Scheme::StandardFd => Ok(self.hessian_at_node(node)?.det()),
            Scheme::MonotoneWidestencil => self.wide_det(&idx),
        }
    }

    fn wide_det(&self, idx: &[usize]) -> Result<f64> {
        let g = &self.grid;
        if g.dim() != 2 {
            return Err(Error::param("the wide stencil is two-dimensional"));
        }
        let (hx, hy) = match (g.spacing(0), g.spacing(1)) {
            (Some(a), Some(b)) if (a - b).abs() <= 1e-9 * a => (a, b),
            _ => {
                return Err(Error::param(
                    "the wide stencil needs equal uniform spacings",
                ))
            }
        };
        let shape = g.shape();
        let base = g.flat(idx);
        let dd = |v: (i64, i64)| -> Option<f64> {
            let (i, j) = (idx[0] as i64, idx[1] as i64);
            let fits = |a: i64, b: i64| {
                a >= 0 && b >= 0 && (a as usize) < shape[0] && (b as usize) < shape[1]
            };
            if !fits(i + v.0, j + v.1) || !fits(i - v.0, j - v.1) {
                return None;
            }
            let off = v.0 * g.strides[0] as i64 + v.1;
            let f = self.values[(base as i64 + off) as usize];
            let b = self.values[(base as i64 - off) as usize];
            let len2 = (v.0 as f64 * hx).powi(2) + (v.1 as f64 * hy).powi(2);
            Some((f + b - 2.0 * self.values[base]) / len2)
        };
        let mut best: Option<f64> = None;
        for frame in WIDE_FRAMES.iter() {
            if let (Some(a), Some(b)) = (dd(frame[0]), dd(frame[1])) {
                let d = a.max(0.0) * b.max(0.0);
                if best.is_none_or(|m| d < m) {
                    best = Some(d);
                }
            }
        }
        best.ok_or_else(|| Error::range("no wide-stencil frame fits at this node"))
    }

    /// Checks that second differences along the axes (and, on uniform 2D
    /// grids, the diagonals) are bounded below by `-1e-8·‖u‖∞`.
    pub fn discrete_convexity_check(&self) -> ConvexityReport {
        self.convexity_over(|_| true)
    }

    pub(crate) fn convexity_over(&self, include: impl Fn(usize) -> bool) -> ConvexityReport {
        let g = &self.grid;
        let tol = 1e-8 * self.max_abs();
        let n = g.dim();
        let uniform = n == 2 && g.spacing(0).is_some() && g.spacing(1).is_some();
        let mut worst = (None, f64::INFINITY);
        let mut failing = 0;
        for node in 0..g.len() {
            let idx = g.unflatten(node);
            if g.is_boundary_node(&idx) || !include(node) {
                continue;
            }
            let mut node_min = f64::INFINITY;
            for k in 0..n {
                let a = g.axis(k);
                let (hm, hp) = (a[idx[k]] - a[idx[k] - 1], a[idx[k] + 1] - a[idx[k]]);
                let s = g.strides[k];
                let d = (hm * self.values[node + s] + hp * self.values[node - s]
                    - (hm + hp) * self.values[node])
                    * 2.0
                    / (hm + hp);
                node_min = node_min.min(d);
            }
            if uniform {
                let s0 = g.strides[0];
                let s1 = g.strides[1];
                let d1 = self.values[node + s0 + s1] + self.values[node - s0 - s1]
                    - 2.0 * self.values[node];
                let d2 = self.values[node + s0 - s1] + self.values[node - s0 + s1]
                    - 2.0 * self.values[node];
                node_min = node_min.min(d1).min(d2);
            }
            if node_min < -tol {
                failing += 1;
            }
            if node_min < worst.1 {
                worst = (Some(node), node_min);
            }
        }
        ConvexityReport {
            passed: failing == 0,
            worst_node: if failing > 0 { worst.0 } else { None },
            worst_value: if worst.1.is_finite() { worst.1 } else { 0.0 },
            failing_nodes: failing,
            tolerance: tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_solution;

    fn square(n: usize) -> Arc<Grid> {
        Arc::new(Grid::uniform(&[-1.0, -1.0], &[1.0, 1.0], &[n, n]).unwrap())
    }

    #[test]
    fn samples_model_solution() {
        let g = Arc::new(Grid::uniform(&[-1.0, 0.0], &[1.0, 1.0], &[5, 5]).unwrap());
        let u = ScalarField::sample(|x| model_solution(x, 1.0), &g).unwrap();
        assert!((u.at(&[2, 4]) - 1.0 / 6.0).abs() < 1e-15);
        let z = ScalarField::sample(|_| 0.0, &g).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let q = ScalarField::sample(|x| 0.5 * x[0] * x[0], &g).unwrap();
        assert!((q.at(&[4, 0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nonfinite_sample_names_node() {
        let g = square(5);
        let err = ScalarField::sample(|x| if x[0] > 0.9 { f64::NAN } else { 0.0 }, &g).unwrap_err();
        assert!(matches!(err, Error::Evaluation { node: 20 }));
    }

    #[test]
    fn hessian_examples() {
        let g = square(21);
        let u = ScalarField::sample(|x| 0.5 * (x[0] * x[0] + x[1] * x[1]), &g).unwrap();
        let h = u.hessian_fd(&[0.1, 0.2]).unwrap();
        assert!((h.entry(0, 0) - 1.0).abs() < 1e-10 && h.entry(0, 1).abs() < 1e-10);
        let xy = ScalarField::sample(|x| x[0] * x[1], &g).unwrap();
        let h = xy.hessian_fd(&[0.3, -0.2]).unwrap();
        assert!((h.entry(0, 1) - 1.0).abs() < 1e-10 && h.entry(0, 0).abs() < 1e-10);

        let gs = Arc::new(Grid::uniform(&[-1.0, 0.0], &[1.0, 1.0], &[201, 201]).unwrap());
        let u0 = ScalarField::sample(|x| model_solution(x, 2.0), &gs).unwrap();
        let h = u0.hessian_fd(&[0.0, 0.5]).unwrap();
        assert!((h.entry(0, 0) - 1.0).abs() < 1e-10);
        assert!((h.entry(1, 1) - 0.25).abs() < 1e-4);
    }

    #[test]
    fn floor_hessian_is_flagged() {
        let g = Arc::new(Grid::uniform(&[-1.0, 0.0], &[1.0, 1.0], &[11, 11]).unwrap());
        let u = ScalarField::sample(|x| x[0] * x[0] + x[0] * x[1] + 3.0 * x[1] * x[1], &g).unwrap();
        let h = u.hessian_fd(&[0.2, 0.0]).unwrap();
        assert!(h.one_sided);
        assert!((h.entry(1, 1) - 6.0).abs() < 1e-9 && (h.entry(0, 1) - 1.0).abs() < 1e-9);
        assert!(u.hessian_fd(&[1.0, 0.5]).is_err());
    }

    #[test]
    fn determinant_examples() {
        let g = square(41);
        let node = g.flat(&[20, 30]);
        let u = ScalarField::sample(|x| 0.5 * (x[0] * x[0] + x[1] * x[1]), &g).unwrap();
        for s in [Scheme::StandardFd, Scheme::MonotoneWidestencil] {
            assert!((u.det_hessian(node, s).unwrap() - 1.0).abs() < 1e-9);
        }
        let q = ScalarField::sample(|x| 0.5 * x[0] * x[0] + 2.0 * x[1] * x[1] + x[0] * x[1], &g)
            .unwrap();
        assert!((q.det_hessian(node, Scheme::StandardFd).unwrap() - 3.0).abs() < 1e-9);
        let gs = Arc::new(Grid::uniform(&[-1.0, 0.0], &[1.0, 1.0], &[41, 41]).unwrap());
        let u0 = ScalarField::sample(|x| model_solution(x, 1.0), &gs).unwrap();
        let mid = gs.flat(&[20, 20]);
        assert!((u0.det_hessian(mid, Scheme::StandardFd).unwrap() - 0.5).abs() < 1e-9);
        assert!(u0
            .det_hessian(gs.flat(&[0, 20]), Scheme::StandardFd)
            .is_err());
    }

    #[test]
    fn convexity_examples() {
        let g = square(11);
        let u = ScalarField::sample(|x| 0.5 * (x[0] * x[0] + x[1] * x[1]), &g).unwrap();
        assert!(u.discrete_convexity_check().passed);
        let c = u.map(|v| -v).unwrap().discrete_convexity_check();
        assert!(!c.passed && c.failing_nodes == 81);
        let gs = Arc::new(Grid::uniform(&[-1.0, 0.0], &[1.0, 1.0], &[11, 11]).unwrap());
        let u0 = ScalarField::sample(|x| model_solution(x, 1.0), &gs).unwrap();
        assert!(u0.discrete_convexity_check().passed);
    }

    #[test]
    fn graded_axis_is_geometric() {
        let g = Grid::graded(&[-1.0, 0.0], &[1.0, 1.0], &[5, 9], 1.1).unwrap();
        let a = g.axis(1);
        let r = (a[2] - a[1]) / (a[1] - a[0]);
        assert!((r - 1.1).abs() < 1e-12);
        assert_eq!(a[8], 1.0);
        assert!(Grid::graded(&[0.0, 0.0], &[1.0, 1.0], &[5, 5], 1.5).is_err());
    }
}
