//! The Monge-Ampère eigenvalue problem `(det D²u)^{1/n} = λ|u|`, `u = 0` on
//! `∂Ω`, by inverse power iteration over Dirichlet solves.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::analysis::{holder_seminorm, richardson, HolderEstimate, Metric, Samples};
use crate::error::{Error, Result};
use crate::fields::{Grid, ScalarField, Scheme};
use crate::geometry::ConvexDomain;
use crate::ma_solver::{MaProblem, MaSolver, Rhs};
use crate::mesh::NodeKind;

/// Max-norm tolerance of the inner Dirichlet solves.
const INNER_TOL: f64 = 1e-11;
const INNER_MAX_ITERS: usize = 60;
/// Outer iterations compared by the plateau test.
const PLATEAU_WINDOW: usize = 10;

#[derive(Debug, Clone)]
pub struct EigenReport {
    pub lambda: f64,
    /// Normalized so that `‖u‖∞ = 1` and `u ≤ 0`.
    pub eigenfunction: ScalarField,
    /// `‖(det D²u)^{1/n} − λ|u|‖∞` after each outer iteration.
    pub residuals: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub iterations: usize,
    /// Newton steps of each inner solve, the initial solve first.
    pub inner_iterations: Vec<usize>,
    /// Set when the residual history rises after the third outer iteration.
    pub nonmonotone_residual: bool,
    pub domain: ConvexDomain,
    pub kinds: Vec<NodeKind>,
}

impl EigenReport {
    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().unwrap_or(&f64::INFINITY)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.eigenfunction.grid()
    }

    /// Uniform spacing of the first axis.
    pub fn spacing(&self) -> f64 {
        self.grid().spacing(0).unwrap_or(f64::NAN)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// One inverse power step: the solution `v` of `det D²v = |u|^n` with the
/// solver's boundary data, and the Newton steps it took. `u` and `warm` are
/// full-grid vectors.
pub fn power_step(
    solver: &mut MaSolver,
    u: &[f64],
    warm: Option<&[f64]>,
) -> Result<(Vec<f64>, usize)> {
    let n = solver.problem().domain.dim() as i32;
    let rhs: Vec<f64> = solver
        .mesh()
        .unknowns()
        .iter()
        .map(|&i| u[i].abs().powi(n))
        .collect();
    solver.set_rhs(rhs)?;
    let rep = solver.solve(INNER_TOL, INNER_MAX_ITERS, warm)?;
    let steps = rep.iterations();
    Ok((rep.solution.into_values(), steps))
}

/// Inverse power iteration: from a normalized `u_k`, solve
/// `det D²v = |u_k|^n` with zero boundary data, then `λ_{k+1} = 1/‖v‖∞` and
/// `u_{k+1} = v/‖v‖∞`. Starts from the normalized solution of `det D²u = 1`
/// and warm-starts each inner solve from `u_k/λ_k`.
pub fn solve_eigen(
    domain: &ConvexDomain,
    grid: &Arc<Grid>,
    tol: f64,
    max_outer: usize,
) -> Result<EigenReport> {
    if domain.dim() != 2 {
        return Err(Error::param("eigenvalues are computed in two dimensions"));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tolerance must be positive"));
    }
    let n = domain.dim() as i32;
    let problem = MaProblem {
        domain: domain.clone(),
        alpha: 0.0,
        g: Rhs::Const(1.0),
        phi: Arc::new(|_: &[f64]| 0.0),
        scheme: Scheme::StandardFd,
        grid: grid.clone(),
    };
    let mut solver = MaSolver::new(&problem)?;
    let unknowns = solver.mesh().unknowns().to_vec();
    let wrap = |outer: usize, e: Error| Error::Eigen {
        outer,
        source: Box::new(e),
    };
    let first = solver
        .solve(INNER_TOL, INNER_MAX_ITERS, None)
        .map_err(|e| wrap(0, e))?;
    let mut inner_iterations = vec![first.iterations()];
    let mut v = first.solution.into_values();
    let mut lambda = 1.0 / max_abs(&v);
    let mut u: Vec<f64> = v.iter().map(|x| x * lambda).collect();
    let mut residuals = Vec::new();
    let mut lambdas = Vec::new();
    let mut converged = false;
    for outer in 1..=max_outer {
        let warm: Vec<f64> = u.iter().map(|x| x / lambda).collect();
        let (next, steps) = power_step(&mut solver, &u, Some(&warm)).map_err(|e| wrap(outer, e))?;
        inner_iterations.push(steps);
        v = next;
        lambda = 1.0 / max_abs(&v);
        u = v.iter().map(|x| x * lambda).collect();
        let det = solver.determinant(&u);
        let res = unknowns
            .iter()
            .zip(&det)
            .map(|(&i, d)| (d.max(0.0).powf(1.0 / n as f64) - lambda * u[i].abs()).abs())
            .fold(0.0f64, f64::max);
        residuals.push(res);
        lambdas.push(lambda);
        if res <= tol {
            converged = true;
            break;
        }
        let k = residuals.len();
        if k > PLATEAU_WINDOW && residuals[k - 1] > 0.99 * residuals[k - 1 - PLATEAU_WINDOW] {
            return Err(Error::EigenNonConvergence {
                iterations: outer,
                residual: res,
            });
        }
    }
    if !converged {
        return Err(Error::EigenNonConvergence {
            iterations: residuals.len(),
            residual: *residuals.last().unwrap_or(&f64::INFINITY),
        });
    }
    let nonmonotone_residual = residuals
        .iter()
        .skip(3)
        .collect::<Vec<_>>()
        .windows(2)
        .any(|w| w[1] > w[0]);
    let kinds = solver.mesh().kinds().to_vec();
    Ok(EigenReport {
        lambda,
        eigenfunction: ScalarField::from_values(grid, u)?,
        iterations: residuals.len(),
        residuals,
        lambdas,
        inner_iterations,
        nonmonotone_residual,
        domain: domain.clone(),
        kinds,
    })
}

/// Eigenvalue on two grids with the fine spacing half the coarse one,
/// extrapolated assuming second-order convergence.
pub fn extrapolated_eigenvalue(coarse: &EigenReport, fine: &EigenReport) -> Result<f64> {
    let ratio = coarse.spacing() / fine.spacing();
    if !((ratio - 2.0).abs() < 1e-6) {
        return Err(Error::param(
            "Richardson extrapolation needs a spacing ratio of 2",
        ));
    }
    Ok(richardson(coarse.lambda, fine.lambda, 2.0))
}

/// Samples of `g = |u|/d_{∂Ω}` near the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFactor {
    pub points: Vec<Vec<f64>>,
    pub distances: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest sampled difference quotient of `g`.
    pub lipschitz: f64,
}

impl BoundaryFactor {
    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `g = |u|/d` at interior nodes with `0 < d ≤ band`.
pub fn boundary_factor(report: &EigenReport, band: f64) -> Result<BoundaryFactor> {
    if !(band > 0.0) {
        return Err(Error::param("band width must be positive"));
    }
    let u = &report.eigenfunction;
    let grid = u.grid();
    let mut out = BoundaryFactor {
        points: Vec::new(),
        distances: Vec::new(),
        values: Vec::new(),
        lipschitz: 0.0,
    };
    for i in 0..grid.len() {
        if report.kinds[i] != NodeKind::Interior {
            continue;
        }
        let x = grid.node(i);
        let d = report.domain.distance_to_boundary(&x)?;
        if d > 0.0 && d <= band {
            out.points.push(x);
            out.distances.push(d);
            out.values.push(u.values()[i].abs() / d);
        }
    }
    if out.values.is_empty() {
        return Err(Error::param("no interior nodes in the boundary band"));
    }
    if out.values.len() >= 2 {
        let samples = Samples {
            points: out.points.clone(),
            values: out.values.iter().map(|v| vec![*v]).collect(),
        };
        out.lipschitz = holder_seminorm(&samples, 1.0, Metric::Euclidean, 20_000, 0)?.estimate;
    }
    Ok(out)
}

/// Relative spread `(max − min)/mean` of `|u|` on the circle of the given
/// radius about `center`, sampled at `count` angles.
pub fn angular_variation(
    u: &ScalarField,
    center: &[f64],
    radius: f64,
    count: usize,
) -> Result<f64> {
    if count == 0 || !(radius > 0.0) {
        return Err(Error::param("need a positive radius and sample count"));
    }
    let mut vals = Vec::with_capacity(count);
    for k in 0..count {
        let th = core::f64::consts::TAU * k as f64 / count as f64;
        let p = [center[0] + radius * th.cos(), center[1] + radius * th.sin()];
        vals.push(u.interpolate(&p)?.abs());
    }
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = vals.iter().sum::<f64>() / count as f64;
    Ok((hi - lo) / mean)
}

/// Width of the boundary band sampled by the regularity probe.
pub const REGULARITY_BAND: f64 = 0.25;

/// Hölder seminorm `[D²u]_{C^β}` over nodes in the band `d ≤ 0.25` whose
/// full nine-point neighborhood is interior.
pub fn regularity_probe(
    report: &EigenReport,
    beta: f64,
    budget: usize,
    seed: u64,
) -> Result<HolderEstimate> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::param("β must lie in (0, 1)"));
    }
    let u = &report.eigenfunction;
    let grid = u.grid();
    let shape = grid.shape();
    let mut samples = Samples::default();
    for i in 0..grid.len() {
        let idx = grid.unflatten(i);
        if idx[0] == 0 || idx[1] == 0 || idx[0] + 1 >= shape[0] || idx[1] + 1 >= shape[1] {
            continue;
        }
        let all_interior = (0..9).all(|c| {
            let j = grid.flat(&[idx[0] + c / 3 - 1, idx[1] + c % 3 - 1]);
            report.kinds[j] == NodeKind::Interior
        });
        if !all_interior {
            continue;
        }
        let x = grid.node(i);
        if report.domain.distance_to_boundary(&x)? > REGULARITY_BAND {
            continue;
        }
        let h = u.hessian_at_node(i)?;
        samples.push(x, h.matrix.clone());
    }
    holder_seminorm(&samples, beta, Metric::Euclidean, budget, seed)
}

/// The probe on the fine grid, with `refinement_trend` set to the ratio of
/// the fine estimate to the coarse one.
pub fn regularity_trend(
    coarse: &EigenReport,
    fine: &EigenReport,
    beta: f64,
    budget: usize,
    seed: u64,
) -> Result<HolderEstimate> {
    let c = regularity_probe(coarse, beta, budget, seed)?;
    let mut f = regularity_probe(fine, beta, budget, seed)?;
    f.refinement_trend = Some(f.estimate / c.estimate);
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_grid(radius: f64, nodes: usize) -> Arc<Grid> {
        Arc::new(Grid::uniform(&[-radius, -radius], &[radius, radius], &[nodes, nodes]).unwrap())
    }

    #[test]
    fn disk_iteration_converges() {
        let dom = ConvexDomain::disk(1.0).unwrap();
        let rep = solve_eigen(&dom, &disk_grid(1.0, 33), 1e-6, 200).unwrap();
        assert!(rep.final_residual() <= 1e-6);
        assert!(rep.eigenfunction.values().iter().all(|v| *v <= 1e-15));
        assert!((rep.eigenfunction.max_abs() - 1.0).abs() < 1e-12);
        assert!((rep.lambda - 2.7368).abs() < 0.1, "{}", rep.lambda);
    }

    #[test]
    fn scaling_law_on_similar_grids() {
        let small = solve_eigen(
            &ConvexDomain::disk(1.0).unwrap(),
            &disk_grid(1.0, 25),
            1e-7,
            200,
        )
        .unwrap();
        let big = solve_eigen(
            &ConvexDomain::disk(2.0).unwrap(),
            &disk_grid(2.0, 25),
            1e-7,
            200,
        )
        .unwrap();
        assert!((big.lambda * 4.0 / small.lambda - 1.0).abs() < 1e-5);
    }

    #[test]
    fn boundary_band_must_be_positive() {
        let rep = solve_eigen(
            &ConvexDomain::disk(1.0).unwrap(),
            &disk_grid(1.0, 17),
            1e-6,
            200,
        )
        .unwrap();
        assert!(boundary_factor(&rep, 0.0).is_err());
        let g = boundary_factor(&rep, 0.3).unwrap();
        assert!(g.min() > 0.0);
    }

    #[test]
    fn power_step_is_homogeneous() {
        let dom = ConvexDomain::disk(1.0).unwrap();
        let grid = disk_grid(1.0, 25);
        let problem = MaProblem {
            domain: dom.clone(),
            alpha: 0.0,
            g: Rhs::Const(1.0),
            phi: Arc::new(|_: &[f64]| 0.0),
            scheme: Scheme::StandardFd,
            grid: grid.clone(),
        };
        let mut solver = MaSolver::new(&problem).unwrap();
        let u: Vec<f64> = (0..grid.len())
            .map(|i| {
                let x = grid.node(i);
                (x[0] * x[0] + x[1] * x[1] - 1.0).min(0.0)
            })
            .collect();
        let (v, _) = power_step(&mut solver, &u, None).unwrap();
        let c = 3.0;
        let cu: Vec<f64> = u.iter().map(|x| c * x).collect();
        let (cv, _) = power_step(&mut solver, &cu, None).unwrap();
        let scale = max_abs(&v);
        for (a, b) in v.iter().zip(&cv) {
            assert!((c * a - b).abs() <= 1e-9 * c * scale);
        }
    }

    #[test]
    fn smaller_domains_have_larger_eigenvalues() {
        let grid = disk_grid(1.0, 33);
        let ellipse = ConvexDomain::level_set(
            2,
            crate::geometry::LevelSetShape::Ellipsoid {
                center: vec![0.0, 0.0],
                semi_axes: vec![0.95, 0.7],
            },
        )
        .unwrap();
        let nested = [
            ConvexDomain::disk(0.65).unwrap(),
            ellipse,
            ConvexDomain::disk(0.95).unwrap(),
        ];
        let lambdas: Vec<f64> = nested
            .iter()
            .map(|d| solve_eigen(d, &grid, 1e-6, 200).unwrap().lambda)
            .collect();
        assert!(
            lambdas[0] > lambdas[1] && lambdas[1] > lambdas[2],
            "{lambdas:?}"
        );
    }

    #[test]
    fn constant_hessian_has_no_seminorm() {
        let dom = ConvexDomain::disk(1.0).unwrap();
        let rep = solve_eigen(&dom, &disk_grid(1.0, 33), 1e-6, 200).unwrap();
        let grid = rep.grid().clone();
        let surrogate = EigenReport {
            eigenfunction: ScalarField::sample(|x| 0.5 * (x[0] * x[0] + x[1] * x[1]) - 0.5, &grid)
                .unwrap(),
            ..rep
        };
        for beta in [0.2, 0.45, 0.9] {
            assert!(
                regularity_probe(&surrogate, beta, 2000, 3)
                    .unwrap()
                    .estimate
                    < 1e-8
            );
        }
    }
}
