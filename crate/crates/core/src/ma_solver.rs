//! Damped Newton iteration for `det D²u = g·d^α` on 2D convex domains.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fields::{Grid, ScalarField, Scheme};
use crate::geometry::ConvexDomain;
use crate::mesh::{self, Closure, EmbeddedGrid, Target, NO_UNKNOWN};
use crate::sparse::{lu_bicgstab, CsrBuilder, CsrMatrix};

pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Rhs {
    Const(f64),
    Function(PointFn),
    Field(ScalarField),
}

impl core::fmt::Debug for Rhs {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Rhs::Const(c) => write!(f, "Const({c})"),
            Rhs::Function(_) => write!(f, "Function(..)"),
            Rhs::Field(_) => write!(f, "Field(..)"),
        }
    }
}

impl Rhs {
    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        match self {
            Rhs::Const(c) => Ok(*c),
            Rhs::Function(f) => Ok(f(p)),
            Rhs::Field(u) => u.interpolate(p),
        }
    }
}

/// `det D²u = g·d_{∂Ω}^α` in `Ω`, `u = φ` on `∂Ω`.
#[derive(Clone)]
pub struct MaProblem {
    pub domain: ConvexDomain,
    pub alpha: f64,
    pub g: Rhs,
    pub phi: PointFn,
    pub scheme: Scheme,
    pub grid: Arc<Grid>,
}

impl core::fmt::Debug for MaProblem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("MaProblem")
            .field("domain", &self.domain)
            .field("alpha", &self.alpha)
            .field("g", &self.g)
            .field("scheme", &self.scheme)
            .field("grid", &self.grid.shape())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: ScalarField,
    /// Max-norm residual before each Newton step and after the last one.
    pub residuals: Vec<f64>,
    pub final_residual: f64,
    /// Accepted step length per Newton step.
    pub damping: Vec<f64>,
    pub linear_iterations: Vec<usize>,
    pub converged: bool,
    /// Filled in by callers that own a clock.
    pub wall_time: f64,
}

impl SolveReport {
    pub fn iterations(&self) -> usize {
        self.damping.len()
    }
}

/// A discretized problem ready for Newton iterations. Reusable across solves
/// that share the domain, grid and boundary data.
#[derive(Debug, Clone)]
pub struct MaSolver {
    problem: MaProblem,
    mesh: Arc<EmbeddedGrid>,
    bvals: Vec<f64>,
    base: Vec<f64>,
    rhs: Vec<f64>,
    h: [f64; 2],
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1.0 / 1048576.0;
const CONVEXITY_SLACK: f64 = 0.25;
/// Defect tolerated in the converged solution, relative to the largest
/// second difference. Right-hand sides vanishing on the boundary leave
/// truncation-sized negative normal differences there.
const FINAL_CONVEXITY_SLACK: f64 = 0.01;

impl MaSolver {
    pub fn new(p: &MaProblem) -> Result<Self> {
        if p.grid.dim() != 2 || p.domain.dim() != 2 {
            return Err(Error::param("the Monge-Ampère solver is two-dimensional"));
        }
        if !(p.alpha >= 0.0) || !p.alpha.is_finite() {
            return Err(Error::param(format!("α must be ≥ 0, got {}", p.alpha)));
        }
        let dirs = match p.scheme {
            Scheme::StandardFd => mesh::standard_directions_2d(),
            Scheme::MonotoneWidestencil => {
                let (a, b) = (p.grid.spacing(0), p.grid.spacing(1));
                match (a, b) {
                    (Some(a), Some(b)) if (a - b).abs() <= 1e-9 * a => {}
                    _ => {
                        return Err(Error::param(
                            "the wide stencil needs equal uniform spacings",
                        ))
                    }
                }
                mesh::wide_directions_2d()
            }
        };
        let mesh = Arc::new(EmbeddedGrid::new(
            &p.domain,
            &p.grid,
            dirs,
            Closure::ShortleyWeller,
        )?);
        let phi = p.phi.clone();
        let bvals = mesh.boundary_values(&*phi);
        if let Some(k) = bvals.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "boundary data is not finite at {:?}",
                mesh.boundary_points()[k]
            )));
        }
        let base = mesh.scatter(&vec![0.0; mesh.unknowns().len()], &*phi);
        if let Some(node) = base.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation { node });
        }
        let mut rhs = Vec::with_capacity(mesh.unknowns().len());
        for &i in mesh.unknowns() {
            let x = p.grid.node(i);
            let g = p.g.eval(&x)?;
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::Input(format!(
                    "g must be positive at interior node {i}, got {g}"
                )));
            }
            let d = if p.alpha == 0.0 {
                1.0
            } else {
                p.domain.distance_to_boundary(&x)?.powf(p.alpha)
            };
            rhs.push(g * d);
        }
        let h = [
            p.grid.spacing(0).unwrap_or(1.0),
            p.grid.spacing(1).unwrap_or(1.0),
        ];
        Ok(MaSolver {
            problem: p.clone(),
            mesh,
            bvals,
            base,
            rhs,
            h,
        })
    }

    pub fn problem(&self) -> &MaProblem {
        &self.problem
    }

    pub fn mesh(&self) -> &Arc<EmbeddedGrid> {
        &self.mesh
    }

    /// Right-hand side `g·d^α` at the unknowns.
    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn set_rhs(&mut self, rhs: Vec<f64>) -> Result<()> {
        if rhs.len() != self.rhs.len() {
            return Err(Error::Input("right-hand side length mismatch".into()));
        }
        if let Some(k) = rhs.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Input(format!(
                "invalid right-hand side at unknown {k}"
            )));
        }
        self.rhs = rhs;
        Ok(())
    }

    pub fn full_from_interior(&self, interior: &[f64]) -> Vec<f64> {
        let mut u = self.base.clone();
        for (k, &i) in self.mesh.unknowns().iter().enumerate() {
            u[i] = interior[k];
        }
        u
    }

    fn hessian_parts(&self, k: usize, u: &[f64]) -> (f64, f64, f64) {
        let m = &self.mesh;
        let [hx, hy] = self.h;
        let s0 = m.second_difference(k, 0, u, &self.bvals);
        let s1 = m.second_difference(k, 1, u, &self.bvals);
        let s2 = m.second_difference(k, 2, u, &self.bvals);
        let s3 = m.second_difference(k, 3, u, &self.bvals);
        (s0 / (hx * hx), s1 / (hy * hy), (s2 - s3) / (4.0 * hx * hy))
    }

    fn wide_frame(&self, k: usize, u: &[f64]) -> (usize, f64, f64) {
        let m = &self.mesh;
        let mut best = (0, f64::INFINITY, 0.0, 0.0);
        for f in 0..m.dirs().len() / 2 {
            let a = m.second_difference(k, 2 * f, u, &self.bvals) / m.dir_len2(2 * f);
            let b = m.second_difference(k, 2 * f + 1, u, &self.bvals) / m.dir_len2(2 * f + 1);
            let d = a.max(0.0) * b.max(0.0);
            if d < best.1 {
                best = (f, d, a, b);
            }
        }
        (best.0, best.2, best.3)
    }

    /// Discrete determinant at every unknown.
    pub fn determinant(&self, u: &[f64]) -> Vec<f64> {
        (0..self.mesh.unknowns().len())
            .map(|k| match self.problem.scheme {
                Scheme::StandardFd => {
                    let (a, b, c) = self.hessian_parts(k, u);
                    a * b - c * c
                }
                Scheme::MonotoneWidestencil => {
                    let (_, a, b) = self.wide_frame(k, u);
                    a.max(0.0) * b.max(0.0)
                }
            })
            .collect()
    }

    pub fn residual_vec(&self, u: &[f64]) -> Vec<f64> {
        self.determinant(u)
            .iter()
            .zip(&self.rhs)
            .map(|(d, f)| d - f)
            .collect()
    }

    fn push_dir(&self, row: &mut Vec<(usize, f64)>, k: usize, dir: usize, scale: f64) {
        let m = &self.mesh;
        let (c0, cf, cb) = m.weights(k, dir);
        row.push((k, scale * c0));
        let [f, b] = m.arms(k, dir);
        for (arm, c) in [(f, cf), (b, cb)] {
            if let Target::Node(j) = arm.target {
                let uj = m.unknown_of(j);
                if uj != NO_UNKNOWN {
                    row.push((uj, scale * c));
                }
            }
        }
    }

    /// Jacobian of the discrete determinant (scheme-consistent).
    pub fn jacobian(&self, u: &[f64]) -> CsrMatrix {
        let n = self.mesh.unknowns().len();
        let mut b = CsrBuilder::new(n);
        let [hx, hy] = self.h;
        let mut row = Vec::with_capacity(32);
        for k in 0..n {
            row.clear();
            match self.problem.scheme {
                Scheme::StandardFd => {
                    let (h11, h22, h12) = self.hessian_parts(k, u);
                    self.push_dir(&mut row, k, 0, h22 / (hx * hx));
                    self.push_dir(&mut row, k, 1, h11 / (hy * hy));
                    let c = -2.0 * h12 / (4.0 * hx * hy);
                    self.push_dir(&mut row, k, 2, c);
                    self.push_dir(&mut row, k, 3, -c);
                }
                Scheme::MonotoneWidestencil => {
                    let (f, a, bb) = self.wide_frame(k, u);
                    let m = &self.mesh;
                    let reg = 1e-10;
                    let wa = bb.max(0.0) + reg;
                    let wb = a.max(0.0) + reg;
                    self.push_dir(&mut row, k, 2 * f, wa / m.dir_len2(2 * f));
                    self.push_dir(&mut row, k, 2 * f + 1, wb / m.dir_len2(2 * f + 1));
                }
            }
            for &(c, v) in &row {
                b.add(c, v);
            }
            b.finish_row();
        }
        b.build()
    }

    /// `Σ_k D_kk` over the axis directions, used for the initial guess.
    fn laplacian(&self) -> (CsrMatrix, Vec<f64>) {
        let n = self.mesh.unknowns().len();
        let m = &self.mesh;
        let mut b = CsrBuilder::new(n);
        let mut offset = vec![0.0; n];
        let mut row = Vec::new();
        for k in 0..n {
            row.clear();
            for (dir, h) in [(0usize, self.h[0]), (1usize, self.h[1])] {
                self.push_dir(&mut row, k, dir, 1.0 / (h * h));
                let (_, cf, cb) = m.weights(k, dir);
                let [f, bk] = m.arms(k, dir);
                for (arm, c) in [(f, cf), (bk, cb)] {
                    let known = match arm.target {
                        Target::Node(j) if m.unknown_of(j) == NO_UNKNOWN => Some(self.base[j]),
                        Target::Boundary(q) => Some(self.bvals[q]),
                        _ => None,
                    };
                    if let Some(v) = known {
                        offset[k] += c * v / (h * h);
                    }
                }
            }
            for &(c, v) in &row {
                b.add(c, v);
            }
            b.finish_row();
        }
        (b.build(), offset)
    }

    /// Poisson proxy `Δu₀ = 2·(g d^α)^{1/2}` with the boundary data.
    pub fn initial_guess(&self) -> Result<Vec<f64>> {
        let (lap, offset) = self.laplacian();
        let mean = self.rhs.iter().sum::<f64>() / self.rhs.len().max(1) as f64;
        let rhs: Vec<f64> = offset.iter().map(|o| 2.0 * mean.sqrt() - o).collect();
        let sol = lu_bicgstab(&lap, &rhs, 1e-12)?;
        Ok(self.full_from_interior(&sol.x))
    }

    fn convexity_floor(&self, u: &[f64]) -> (usize, f64) {
        self.mesh.min_second_difference(u, &self.bvals)
    }

    pub fn solve(&self, tol: f64, max_iters: usize, init: Option<&[f64]>) -> Result<SolveReport> {
        if !(tol > 0.0) {
            return Err(Error::param("tolerance must be positive"));
        }
        let mut u = match init {
            Some(v) if v.len() == self.base.len() => self.full_from_interior(&self.mesh.gather(v)),
            Some(_) => return Err(Error::Input("initial guess has the wrong length".into())),
            None => self.initial_guess()?,
        };
        let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let conv_tol = 1e-8 * scale;
        let hmin = self.h[0].min(self.h[1]);
        let roundoff = 64.0 * f64::EPSILON * scale / (hmin * hmin);
        let norm_inf = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut r = self.residual_vec(&u);
        let mut res = norm_inf(&r);
        let mut residuals = vec![res];
        let mut damping = Vec::new();
        let mut linear_iterations = Vec::new();
        let mut converged = res <= tol;
        let stalled = |history: &[f64]| {
            let k = history.len();
            k > 10 && history[k - 1] > 0.99 * history[k - 11]
        };
        // Newton iterates on degenerate problems overshoot into slight
        // nonconvexity near the floor. Trials are rejected once the defect
        // exceeds a quarter of the largest stencil second difference.
        let floor_budget =
            -CONVEXITY_SLACK * self.mesh.max_second_difference(&u, &self.bvals).max(0.0);
        while !converged && damping.len() < max_iters {
            let jac = self.jacobian(&u);
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let lin = lu_bicgstab(&jac, &neg, 1e-10)?;
            linear_iterations.push(lin.iterations);
            let current_floor = self.convexity_floor(&u).1;
            let mut step = 1.0;
            let mut accepted = None;
            while step >= MIN_STEP {
                let mut trial = u.clone();
                for (k, &i) in self.mesh.unknowns().iter().enumerate() {
                    trial[i] += step * lin.x[k];
                }
                let floor = self.convexity_floor(&trial).1;
                if floor >= -conv_tol || floor >= current_floor.min(floor_budget) {
                    let rt = self.residual_vec(&trial);
                    let rn = norm_inf(&rt);
                    if rn <= (1.0 - ARMIJO * step) * res {
                        accepted = Some((trial, rt, rn));
                        break;
                    }
                }
                step *= 0.5;
            }
            match accepted {
                Some((trial, rt, rn)) => {
                    u = trial;
                    r = rt;
                    res = rn;
                    damping.push(step);
                    residuals.push(res);
                }
                None if res <= roundoff => {
                    converged = true;
                    break;
                }
                None => {
                    damping.push(0.0);
                    residuals.push(res);
                    return Err(Error::NonConvergence {
                        report: alloc::boxed::Box::new(self.report(
                            u,
                            residuals,
                            damping,
                            linear_iterations,
                            false,
                        )?),
                    });
                }
            }
            converged = res <= tol;
            if !converged && stalled(&residuals) {
                return Err(Error::NonConvergence {
                    report: alloc::boxed::Box::new(self.report(
                        u,
                        residuals,
                        damping,
                        linear_iterations,
                        false,
                    )?),
                });
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                report: alloc::boxed::Box::new(self.report(
                    u,
                    residuals,
                    damping,
                    linear_iterations,
                    false,
                )?),
            });
        }
        let (node, floor) = self.convexity_floor(&u);
        let final_tol =
            conv_tol.max(FINAL_CONVEXITY_SLACK * self.mesh.max_second_difference(&u, &self.bvals));
        if floor < -final_tol {
            return Err(Error::Convexification { node });
        }
        self.report(u, residuals, damping, linear_iterations, true)
    }

    fn report(
        &self,
        u: Vec<f64>,
        residuals: Vec<f64>,
        damping: Vec<f64>,
        linear_iterations: Vec<usize>,
        converged: bool,
    ) -> Result<SolveReport> {
        let final_residual = *residuals.last().unwrap_or(&f64::INFINITY);
        Ok(SolveReport {
            solution: ScalarField::from_values(&self.problem.grid, u)?,
            residuals,
            final_residual,
            damping,
            linear_iterations,
            converged,
            wall_time: 0.0,
        })
    }

    /// Residual as a full-grid field, zero off the unknowns.
    pub fn residual_field(&self, u: &ScalarField) -> Result<ScalarField> {
        let full = self.full_from_interior(&self.mesh.gather(u.values()));
        let r = self.residual_vec(&full);
        let mut out = vec![0.0; self.base.len()];
        for (k, &i) in self.mesh.unknowns().iter().enumerate() {
            out[i] = r[k];
        }
        ScalarField::from_values(&self.problem.grid, out)
    }
}

pub fn solve_dirichlet(p: &MaProblem, tol: f64, max_iters: usize) -> Result<SolveReport> {
    MaSolver::new(p)?.solve(tol, max_iters, None)
}

/// Pointwise `det_h(u) − g·d^α` at interior nodes, zero elsewhere. The
/// interior values of `u` are used as given; boundary data come from `p`.
pub fn residual(u: &ScalarField, p: &MaProblem) -> Result<ScalarField> {
    MaSolver::new(p)?.residual_field(u)
}

/// The assembled linearization `v ↦ Σ cof(D²u)_{ij} v_{ij}` at the unknowns.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    pub matrix: CsrMatrix,
    mesh: Arc<EmbeddedGrid>,
    h: [f64; 2],
    scheme: Scheme,
    cof: Vec<[f64; 3]>,
}

impl LinearizedOperator {
    /// Applies the operator to a field, reading its boundary-crossing values
    /// by interpolation.
    pub fn apply_field(&self, v: &ScalarField) -> Result<Vec<f64>> {
        let m = &self.mesh;
        let mut bv = Vec::with_capacity(m.boundary_points().len());
        for p in m.boundary_points() {
            bv.push(v.interpolate(p)?);
        }
        let vals = v.values();
        let [hx, hy] = self.h;
        Ok((0..m.unknowns().len())
            .map(|k| match self.scheme {
                Scheme::StandardFd => {
                    let [c11, c22, c12] = self.cof[k];
                    let s: Vec<f64> = (0..4)
                        .map(|d| m.second_difference(k, d, vals, &bv))
                        .collect();
                    c11 * s[0] / (hx * hx)
                        + c22 * s[1] / (hy * hy)
                        + 2.0 * c12 * (s[2] - s[3]) / (4.0 * hx * hy)
                }
                Scheme::MonotoneWidestencil => {
                    let [wa, wb, f] = self.cof[k];
                    let f = f as usize;
                    wa * m.second_difference(k, 2 * f, vals, &bv) / m.dir_len2(2 * f)
                        + wb * m.second_difference(k, 2 * f + 1, vals, &bv) / m.dir_len2(2 * f + 1)
                }
            })
            .collect())
    }

    /// Cofactor coefficients `(c11, c22, c12)` at each unknown (standard
    /// scheme), i.e. `(u_22, u_11, −u_12)`.
    pub fn cofactors(&self) -> &[[f64; 3]] {
        &self.cof
    }
}

pub fn linearize_at(u: &ScalarField, p: &MaProblem) -> Result<LinearizedOperator> {
    let solver = MaSolver::new(p)?;
    let full = solver.full_from_interior(&solver.mesh.gather(u.values()));
    let scale = u.max_abs().max(1e-300);
    let (node, floor) = solver.convexity_floor(&full);
    if floor < -1e-8 * scale {
        return Err(Error::Convexity { node, value: floor });
    }
    let n = solver.mesh.unknowns().len();
    let cof = (0..n)
        .map(|k| match p.scheme {
            Scheme::StandardFd => {
                let (a, b, c) = solver.hessian_parts(k, &full);
                [b, a, -c]
            }
            Scheme::MonotoneWidestencil => {
                let (f, a, b) = solver.wide_frame(k, &full);
                [b.max(0.0), a.max(0.0), f as f64]
            }
        })
        .collect();
    Ok(LinearizedOperator {
        matrix: solver.jacobian(&full),
        mesh: solver.mesh.clone(),
        h: solver.h,
        scheme: p.scheme,
        cof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_solution;

    fn strip_problem(n: usize, alpha: f64) -> MaProblem {
        let grid = Arc::new(Grid::uniform(&[-1.0, 0.0], &[1.0, 1.0], &[n, n]).unwrap());
        MaProblem {
            domain: ConvexDomain::flat_strip(2, 1.0, 1.0).unwrap(),
            alpha,
            g: Rhs::Const(1.0),
            phi: Arc::new(move |x: &[f64]| model_solution(x, alpha)),
            scheme: Scheme::StandardFd,
            grid,
        }
    }

    #[test]
    fn manufactured_strip_solution() {
        let p = strip_problem(33, 1.0);
        let rep = solve_dirichlet(&p, 1e-10, 50).unwrap();
        let err = (0..p.grid.len())
            .map(|i| (rep.solution.values()[i] - model_solution(&p.grid.node(i), 1.0)).abs())
            .fold(0.0, f64::max);
        assert!(err < 5e-3, "{err}");
        assert!(rep.final_residual <= 1e-10);
    }

    #[test]
    fn residual_of_doubled_model() {
        let p = strip_problem(41, 1.0);
        let u = ScalarField::sample(|x| 2.0 * model_solution(x, 1.0), &p.grid).unwrap();
        let r = residual(&u, &p).unwrap();
        let i = p.grid.flat(&[20, 20]);
        let xn = p.grid.node(i)[1];
        assert!((r.values()[i] - 3.0 * xn).abs() < 1e-9);
    }

    #[test]
    fn linearization_of_paraboloid_is_laplacian() {
        let grid = Arc::new(Grid::uniform(&[-1.0, -1.0], &[1.0, 1.0], &[11, 11]).unwrap());
        let p = MaProblem {
            domain: ConvexDomain::rectangle([-1.0, -1.0], [1.0, 1.0]).unwrap(),
            alpha: 0.0,
            g: Rhs::Const(1.0),
            phi: Arc::new(|x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1])),
            scheme: Scheme::StandardFd,
            grid: grid.clone(),
        };
        let u = ScalarField::sample(|x| 0.5 * (x[0] * x[0] + x[1] * x[1]), &grid).unwrap();
        let op = linearize_at(&u, &p).unwrap();
        let h2 = 0.2f64 * 0.2;
        let k = 40;
        assert!((op.matrix.get(k, k) + 4.0 / h2).abs() < 1e-9);
        assert!((op.matrix.get(k, k + 1) - 1.0 / h2).abs() < 1e-9);
        assert!(op.matrix.get(k, k + 10).abs() < 1e-12);
        let neg = u.map(|v| -v).unwrap();
        assert!(matches!(
            linearize_at(&neg, &p),
            Err(Error::Convexity { .. })
        ));
    }
}
