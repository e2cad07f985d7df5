//! Lattice stencils on a uniform grid clipped to a convex domain. Arms that
//! leave the domain are cut at the boundary crossing and carry Dirichlet
//! data from the crossing point.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::Grid;
use crate::geometry::ConvexDomain;

/// Nodes closer than this fraction of a lattice step to the boundary are
/// treated as boundary nodes.
pub const SNAP_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
}

/// How a cut arm enters the second difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Closure {
    /// `2/(θf+θb)·[(uf−u0)/θf + (ub−u0)/θb]`, second order on quadratics.
    ShortleyWeller,
    /// Linear extrapolation to the ghost node: `(uf−u0)/θf + (ub−u0)/θb`.
    LinearGhost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Node(usize),
    Boundary(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub target: Target,
    pub theta: f64,
}

#[derive(Debug, Clone)]
pub struct EmbeddedGrid {
    grid: Arc<Grid>,
    domain: ConvexDomain,
    kinds: Vec<NodeKind>,
    unknowns: Vec<usize>,
    unknown_of: Vec<usize>,
    dirs: Vec<Vec<i64>>,
    arms: Vec<[Arm; 2]>,
    boundary_points: Vec<Vec<f64>>,
    closure: Closure,
}

pub const NO_UNKNOWN: usize = usize::MAX;

impl EmbeddedGrid {
    pub fn new(
        domain: &ConvexDomain,
        grid: &Arc<Grid>,
        dirs: Vec<Vec<i64>>,
        closure: Closure,
    ) -> Result<Self> {
        let n = grid.dim();
        if domain.dim() != n {
            return Err(Error::param("domain and grid dimensions differ"));
        }
        if (0..n).any(|k| grid.spacing(k).is_none()) {
            return Err(Error::param("embedded stencils need a uniform grid"));
        }
        if dirs
            .iter()
            .any(|d| d.len() != n || d.iter().all(|c| *c == 0))
        {
            return Err(Error::param("invalid stencil direction"));
        }
        let shape = grid.shape();
        let h: Vec<f64> = (0..n).map(|k| grid.spacing(k).unwrap_or(1.0)).collect();
        let neighbor = |idx: &[usize], d: &[i64], sign: i64| -> Option<usize> {
            let mut flat = 0;
            for k in 0..n {
                let j = idx[k] as i64 + sign * d[k];
                if j < 0 || j as usize >= shape[k] {
                    return None;
                }
                flat += j as usize * grid.strides()[k];
            }
            Some(flat)
        };
        let phys =
            |d: &[i64]| -> Vec<f64> { d.iter().zip(&h).map(|(c, s)| *c as f64 * s).collect() };

        let level: Vec<f64> = (0..grid.len())
            .map(|i| domain.level(&grid.node(i)))
            .collect();
        let tol = 1e-12;
        let mut kinds = vec![NodeKind::Exterior; grid.len()];
        for i in 0..grid.len() {
            let idx = grid.unflatten(i);
            kinds[i] = if level[i] > tol {
                NodeKind::Exterior
            } else if grid.is_boundary_node(&idx) || level[i] >= -tol {
                NodeKind::Boundary
            } else {
                NodeKind::Interior
            };
        }
        // snap interior nodes that sit almost on the boundary
        let inside = |j: Option<usize>| j.is_some_and(|j| level[j] <= tol);
        let mut snapped = Vec::new();
        for i in 0..grid.len() {
            if kinds[i] != NodeKind::Interior {
                continue;
            }
            let idx = grid.unflatten(i);
            let p = grid.node(i);
            for d in &dirs {
                for sign in [1i64, -1] {
                    if inside(neighbor(&idx, d, sign)) {
                        continue;
                    }
                    let v: Vec<f64> = phys(d).iter().map(|x| x * sign as f64).collect();
                    if let Some(t) = domain.ray_exit(&p, &v, 1.0) {
                        if t < SNAP_FRACTION {
                            snapped.push(i);
                        }
                    }
                }
            }
        }
        for i in snapped {
            kinds[i] = NodeKind::Boundary;
        }
        let unknowns: Vec<usize> = (0..grid.len())
            .filter(|&i| kinds[i] == NodeKind::Interior)
            .collect();
        let mut unknown_of = vec![NO_UNKNOWN; grid.len()];
        for (u, &i) in unknowns.iter().enumerate() {
            unknown_of[i] = u;
        }
        let mut arms = Vec::with_capacity(unknowns.len() * dirs.len());
        let mut boundary_points = Vec::new();
        for &i in &unknowns {
            let idx = grid.unflatten(i);
            let p = grid.node(i);
            for d in &dirs {
                let mut pair = [Arm {
                    target: Target::Node(i),
                    theta: 1.0,
                }; 2];
                for (slot, sign) in [1i64, -1].into_iter().enumerate() {
                    let nb = neighbor(&idx, d, sign);
                    if let Some(j) = nb.filter(|&j| kinds[j] != NodeKind::Exterior) {
                        pair[slot] = Arm {
                            target: Target::Node(j),
                            theta: 1.0,
                        };
                        continue;
                    }
                    let v: Vec<f64> = phys(d).iter().map(|x| x * sign as f64).collect();
                    let t = domain.ray_exit(&p, &v, 1.0).ok_or_else(|| {
                        Error::Geometry(format!(
                            "stencil arm at node {i} leaves the grid inside the domain"
                        ))
                    })?;
                    let t = t.max(SNAP_FRACTION);
                    let b: Vec<f64> = p.iter().zip(&v).map(|(x, s)| x + t * s).collect();
                    boundary_points.push(b);
                    pair[slot] = Arm {
                        target: Target::Boundary(boundary_points.len() - 1),
                        theta: t,
                    };
                }
                arms.push(pair);
            }
        }
        Ok(EmbeddedGrid {
            grid: grid.clone(),
            domain: domain.clone(),
            kinds,
            unknowns,
            unknown_of,
            dirs,
            arms,
            boundary_points,
            closure,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn domain(&self) -> &ConvexDomain {
        &self.domain
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn unknowns(&self) -> &[usize] {
        &self.unknowns
    }

    pub fn unknown_of(&self, flat: usize) -> usize {
        self.unknown_of[flat]
    }

    pub fn dirs(&self) -> &[Vec<i64>] {
        &self.dirs
    }

    pub fn boundary_points(&self) -> &[Vec<f64>] {
        &self.boundary_points
    }

    pub fn arms(&self, unknown: usize, dir: usize) -> &[Arm; 2] {
        &self.arms[unknown * self.dirs.len() + dir]
    }

    /// Physical length squared of a lattice direction.
    pub fn dir_len2(&self, dir: usize) -> f64 {
        self.dirs[dir]
            .iter()
            .enumerate()
            .map(|(k, c)| (*c as f64 * self.grid.spacing(k).unwrap_or(1.0)).powi(2))
            .sum()
    }

    /// Coefficients `(c0, cf, cb)` of the second difference along `dir`,
    /// in units of one lattice step.
    pub fn weights(&self, unknown: usize, dir: usize) -> (f64, f64, f64) {
        let [f, b] = self.arms(unknown, dir);
        let (tf, tb) = (f.theta, b.theta);
        let (cf, cb) = match self.closure {
            Closure::ShortleyWeller => (2.0 / ((tf + tb) * tf), 2.0 / ((tf + tb) * tb)),
            Closure::LinearGhost => (1.0 / tf, 1.0 / tb),
        };
        (-(cf + cb), cf, cb)
    }

    pub fn target_value(&self, t: Target, u: &[f64], bvals: &[f64]) -> f64 {
        match t {
            Target::Node(j) => u[j],
            Target::Boundary(k) => bvals[k],
        }
    }

    /// Second difference `≈ vᵀ D²u v` along the lattice vector `v` of `dir`.
    pub fn second_difference(&self, unknown: usize, dir: usize, u: &[f64], bvals: &[f64]) -> f64 {
        let (c0, cf, cb) = self.weights(unknown, dir);
        let [f, b] = self.arms(unknown, dir);
        c0 * u[self.unknowns[unknown]]
            + cf * self.target_value(f.target, u, bvals)
            + cb * self.target_value(b.target, u, bvals)
    }

    pub fn boundary_values(&self, phi: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
        self.boundary_points.iter().map(|p| phi(p)).collect()
    }

    /// Full-grid vector with `φ` on boundary and exterior nodes and `interior`
    /// values on unknowns.
    pub fn scatter(&self, interior: &[f64], phi: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
        let mut u = vec![0.0; self.grid.len()];
        for i in 0..self.grid.len() {
            u[i] = match self.unknown_of[i] {
                NO_UNKNOWN => phi(&self.grid.node(i)),
                k => interior[k],
            };
        }
        u
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.unknowns.iter().map(|&i| full[i]).collect()
    }

    /// Smallest stencil second difference over all unknowns and directions,
    /// with the node where it occurs.
    pub fn min_second_difference(&self, u: &[f64], bvals: &[f64]) -> (usize, f64) {
        let mut worst = (0, f64::INFINITY);
        for k in 0..self.unknowns.len() {
            for d in 0..self.dirs.len() {
                let s = self.second_difference(k, d, u, bvals);
                if s < worst.1 {
                    worst = (self.unknowns[k], s);
                }
            }
        }
        worst
    }

    pub fn max_second_difference(&self, u: &[f64], bvals: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for k in 0..self.unknowns.len() {
            for d in 0..self.dirs.len() {
                best = best.max(self.second_difference(k, d, u, bvals));
            }
        }
        best
    }
}

pub fn axis_directions(n: usize) -> Vec<Vec<i64>> {
    (0..n)
        .map(|k| {
            let mut d = vec![0; n];
            d[k] = 1;
            d
        })
        .collect()
}

/// Axes then the two diagonals, as used by the standard 2D Hessian.
pub fn standard_directions_2d() -> Vec<Vec<i64>> {
    vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![1, -1]]
}

pub fn wide_directions_2d() -> Vec<Vec<i64>> {
    crate::fields::WIDE_FRAMES
        .iter()
        .flat_map(|f| f.iter().map(|&(a, b)| vec![a, b]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_classification_and_quadratic_exactness() {
        let disk = ConvexDomain::disk(1.0).unwrap();
        let grid = Arc::new(Grid::uniform(&[-1.0, -1.0], &[1.0, 1.0], &[33, 33]).unwrap());
        let eg = EmbeddedGrid::new(
            &disk,
            &grid,
            standard_directions_2d(),
            Closure::ShortleyWeller,
        )
        .unwrap();
        let kinds = eg.kinds();
        assert_eq!(kinds[grid.flat(&[16, 16])], NodeKind::Interior);
        assert_eq!(kinds[grid.flat(&[32, 16])], NodeKind::Boundary);
        assert_eq!(kinds[grid.flat(&[0, 0])], NodeKind::Exterior);
        // Shortley-Weller is exact on quadratics along every arm
        let q = |p: &[f64]| 0.3 * p[0] * p[0] + 0.2 * p[0] * p[1] + 0.7 * p[1] * p[1] - p[0];
        let u = eg.scatter(&vec![0.0; eg.unknowns().len()], &q);
        let u: Vec<f64> = (0..grid.len())
            .map(|i| {
                if eg.unknown_of(i) == NO_UNKNOWN {
                    u[i]
                } else {
                    q(&grid.node(i))
                }
            })
            .collect();
        let b = eg.boundary_values(&q);
        let h = grid.spacing(0).unwrap();
        for k in 0..eg.unknowns().len() {
            let s = eg.second_difference(k, 2, &u, &b) / (h * h);
            assert!((s - 2.0 * (0.3 + 0.2 + 0.7)).abs() < 1e-8, "{s}");
        }
    }
}
