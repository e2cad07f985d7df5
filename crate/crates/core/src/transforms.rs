//! Hodograph reduction and the partial Legendre transform in two dimensions.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid, ScalarField};
use crate::geometry::ConvexDomain;
use crate::interp::MonotoneCubic;
use crate::linalg::fd_weights;

/// Cells trimmed from each end of the common gradient range.
pub const RANGE_PADDING: usize = 2;

/// Extent of the hodograph grid: tangential half width and height in
/// `y_n = −u`, both in the dilated frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HodographWindow {
    pub half_width: f64,
    pub height: f64,
    pub normal_nodes: usize,
}

/// Rotates the graph of `u` at the boundary point `z` so that `y_n = −u`
/// becomes a coordinate: `ũ(y', y_n)` is the inner-normal chart coordinate of
/// the point where `−u = y_n` on the chart line through `y'`. `u` must vanish
/// on `∂Ω` and decrease into the domain.
///
/// With `dilation = s` the result is `s·ũ(y'/s, y_n)`, the hodograph of
/// `u(·/s)` on `sΩ`; `s = √λ` normalizes the eigenvalue equation to `λ = 1`.
/// Chart lines are sampled on the lattice of `u`'s grid, so a chart aligned
/// with the grid reads node values exactly.
pub fn hodograph(
    u: &ScalarField,
    domain: &ConvexDomain,
    z: &[f64],
    dilation: f64,
    window: &HodographWindow,
) -> Result<ScalarField> {
    let grid = u.grid();
    if grid.dim() != 2 || domain.dim() != 2 {
        return Err(Error::param("the hodograph is two-dimensional"));
    }
    if !(dilation > 0.0 && window.half_width > 0.0 && window.height > 0.0)
        || window.normal_nodes < 3
    {
        return Err(Error::param("dilation and window extents must be positive"));
    }
    let h = grid
        .spacing(0)
        .filter(|hx| {
            grid.spacing(1)
                .is_some_and(|hy| (hx - hy).abs() <= 1e-9 * hx)
        })
        .ok_or_else(|| Error::param("the hodograph needs a uniform square grid"))?;
    let chart = domain.local_graph_chart(z)?;
    let normal = chart.frame[1].clone();
    let back: Vec<f64> = normal.iter().map(|v| -v).collect();
    let lattice = chart.to_local(&grid.lower())[1].rem_euclid(h);
    let half = (window.half_width / dilation / h + 1e-9).floor() as i64;
    let tangential: Vec<f64> = (-half..=half).map(|j| j as f64 * h).collect();
    let heights = crate::fields::linspace(0.0, window.height, window.normal_nodes);
    let mut values = vec![0.0; tangential.len() * heights.len()];
    for (j, &s) in tangential.iter().enumerate() {
        let bad = |reason: &str| Error::Transform {
            slice: j,
            reason: reason.into(),
        };
        // first lattice point inside, then back to the boundary
        let mut t_in = lattice;
        while !domain.contains(&chart.to_global(&[s, t_in])) {
            t_in += h;
            if t_in > 4.0 * window.height / dilation + 1.0 {
                return Err(bad("chart line misses the domain"));
            }
        }
        let exit = domain
            .ray_exit(&chart.to_global(&[s, t_in]), &back, t_in + 2.0 * h + 1.0)
            .ok_or_else(|| bad("no boundary crossing below the line"))?;
        let t_b = t_in - exit;
        let mut ts = vec![t_b];
        let mut ws = vec![0.0];
        let mut t = lattice + ((t_b + 0.25 * h - lattice) / h).ceil() * h;
        let mut beyond = 0;
        while beyond < 3 {
            let p = chart.to_global(&[s, t]);
            if !domain.contains(&p) {
                return Err(bad("window height exceeds the monotone part of the graph"));
            }
            let w = -u.interpolate(&p)?;
            if !(w > *ws.last().unwrap()) {
                return Err(bad(
                    "graph is not monotone in the rotated vertical direction",
                ));
            }
            ts.push(t);
            ws.push(w);
            if w > window.height {
                beyond += 1;
            }
            t += h;
        }
        let inverse = MonotoneCubic::new(ws, ts).map_err(|e| bad(&format!("{e}")))?;
        for (i, &y) in heights.iter().enumerate() {
            values[j * heights.len() + i] = dilation * inverse.eval(y)?;
        }
    }
    let axis0: Vec<f64> = tangential.iter().map(|s| dilation * s).collect();
    let out = Arc::new(Grid::new(vec![axis0, heights])?);
    ScalarField::from_values(&out, values)
}

fn interior_nodes(grid: &Grid) -> impl Iterator<Item = usize> + '_ {
    (0..grid.len()).filter(move |&i| !grid.is_boundary_node(&grid.unflatten(i)))
}

/// Residual of `det D²ũ = y_n^n ũ_n^{n+2}` at interior nodes, zero on the
/// grid edges.
pub fn hodograph_residual(ut: &ScalarField) -> Result<ScalarField> {
    let grid = ut.grid();
    let n = grid.dim() as i32;
    let mut out = vec![0.0; grid.len()];
    for i in interior_nodes(grid) {
        let y = grid.node(i);
        let det = ut.hessian_at_node(i)?.det();
        let un = ut.gradient_fd(&y)?[n as usize - 1];
        out[i] = det - y[n as usize - 1].powi(n) * un.powi(n + 2);
    }
    ScalarField::from_values(grid, out)
}

/// Gauss curvature `det D²u/(1 + |Du|²)^{(n+2)/2}` of the graph at a node.
pub fn gauss_curvature(u: &ScalarField, node: usize) -> Result<f64> {
    let x = u.grid().node(node);
    let g = u.gradient_fd(&x)?;
    let det = u.hessian_at_node(node)?.det();
    let n = x.len() as f64;
    Ok(det / (1.0 + g.iter().map(|v| v * v).sum::<f64>()).powf(0.5 * (n + 2.0)))
}

/// A field on an `(x', x_n)` grid and its slice-wise conjugate on a
/// `(y', y_n)` grid, with `y_n = x_n`.
#[derive(Debug, Clone)]
pub struct LegendrePair {
    pub source: ScalarField,
    pub dual: ScalarField,
    /// `∂u/∂x'` at every source node.
    pub slopes: Vec<f64>,
}

fn slice_slopes(x: &[f64], f: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1).min(n - 3);
            let nodes = [x[lo], x[lo + 1], x[lo + 2]];
            let w = fd_weights(x[i], &nodes, 1);
            w[0] * f[lo] + w[1] * f[lo + 1] + w[2] * f[lo + 2]
        })
        .collect()
}

/// Nodes of the local interpolant that refines each discrete maximizer.
const REFINE_STENCIL: usize = 5;

/// Conjugate `max_x (x·p − f(x))` of convex samples at sorted `targets`.
/// The maximizing node comes from the lower envelope; Newton steps on the
/// local interpolating polynomial then locate the continuous maximizer.
fn conjugate_slice(x: &[f64], f: &[f64], targets: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut hull: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (f[b] - f[a]) * (x[i] - x[a]) - (f[i] - f[a]) * (x[b] - x[a]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let slope = |k: usize| (f[hull[k + 1]] - f[hull[k]]) / (x[hull[k + 1]] - x[hull[k]]);
    let m = REFINE_STENCIL.min(n);
    let mut k = 0;
    targets
        .iter()
        .map(|&p| {
            while k + 1 < hull.len() && slope(k) < p {
                k += 1;
            }
            let i = hull[k];
            let best = x[i] * p - f[i];
            let lo = i.saturating_sub(m / 2).min(n - m);
            let (xs, fs) = (&x[lo..lo + m], &f[lo..lo + m]);
            let q = |t: f64, order: usize| -> f64 {
                fd_weights(t, xs, order)
                    .iter()
                    .zip(fs)
                    .map(|(w, v)| w * v)
                    .sum()
            };
            let (a, b) = (x[i.saturating_sub(1)], x[(i + 1).min(n - 1)]);
            let mut t = x[i];
            for _ in 0..8 {
                let q2 = q(t, 2);
                if !(q2 > 0.0) {
                    return best;
                }
                let step = (q(t, 1) - p) / q2;
                t = (t - step).clamp(a, b);
                if step.abs() <= 1e-15 * (b - a) {
                    break;
                }
            }
            (t * p - q(t, 0)).max(best)
        })
        .collect()
}

/// Slice-wise conjugate in `x'` of a 2D field. The dual grid spans the
/// intersection of the slices' slope ranges, trimmed by [`RANGE_PADDING`]
/// cells, with as many nodes as the source axis.
pub fn partial_legendre(u: &ScalarField) -> Result<LegendrePair> {
    let grid = u.grid();
    if grid.dim() != 2 {
        return Err(Error::param(
            "the partial Legendre transform is implemented for x' scalar",
        ));
    }
    let xs = grid.axis(0);
    let zs = grid.axis(1);
    let (nx, nz) = (xs.len(), zs.len());
    if nx < 2 * RANGE_PADDING + 3 {
        return Err(Error::param("too few nodes along x'"));
    }
    let scale = u.max_abs().max(1e-300);
    let mut slopes = vec![0.0; grid.len()];
    let mut slices = Vec::with_capacity(nz);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for j in 0..nz {
        let f: Vec<f64> = (0..nx).map(|i| u.at(&[i, j])).collect();
        for i in 1..nx - 1 {
            let hl = xs[i] - xs[i - 1];
            let hr = xs[i + 1] - xs[i];
            let dd = (f[i + 1] - f[i]) / hr - (f[i] - f[i - 1]) / hl;
            if !(dd > 1e-14 * scale) {
                return Err(Error::Input(format!(
                    "slice {j} is not strictly convex in x' (node {i})"
                )));
            }
        }
        let s = slice_slopes(xs, &f);
        lo = lo.max(s[0]);
        hi = hi.min(s[nx - 1]);
        for i in 0..nx {
            slopes[grid.flat(&[i, j])] = s[i];
        }
        slices.push(f);
    }
    let cells = (nx - 1 + 2 * RANGE_PADDING) as f64;
    let dp = (hi - lo) / cells;
    if !(dp > 0.0) {
        return Err(Error::Input("slices have disjoint slope ranges".into()));
    }
    let ps: Vec<f64> = (0..nx)
        .map(|k| lo + (k + RANGE_PADDING) as f64 * dp)
        .collect();
    let mut dual = vec![0.0; nx * nz];
    for (j, f) in slices.iter().enumerate() {
        for (k, v) in conjugate_slice(xs, f, &ps).into_iter().enumerate() {
            dual[k * nz + j] = v;
        }
    }
    let dgrid = Arc::new(Grid::new(vec![ps, zs.to_vec()])?);
    Ok(LegendrePair {
        source: u.clone(),
        dual: ScalarField::from_values(&dgrid, dual)?,
        slopes,
    })
}

impl LegendrePair {
    /// Source nodes whose slope lies inside the dual grid with
    /// [`RANGE_PADDING`] cells to spare.
    fn matched_nodes(&self) -> Vec<usize> {
        let ps = self.dual.grid().axis(0);
        let dp = ps[1] - ps[0];
        let lo = ps[0] + RANGE_PADDING as f64 * dp;
        let hi = ps[ps.len() - 1] - RANGE_PADDING as f64 * dp;
        let g = self.source.grid();
        (0..g.len())
            .filter(|&i| {
                let idx = g.unflatten(i);
                !g.is_boundary_node(&idx) && self.slopes[i] >= lo && self.slopes[i] <= hi
            })
            .collect()
    }
}

/// `‖(u*)* − u‖∞` over source nodes whose slopes lie well inside the dual
/// grid, with the second conjugate evaluated at the source abscissae.
pub fn legendre_involution_error(pair: &LegendrePair) -> Result<f64> {
    let g = pair.source.grid();
    let dg = pair.dual.grid();
    let ps = dg.axis(0);
    let xs = g.axis(0);
    let nz = g.axis(1).len();
    let nodes = pair.matched_nodes();
    if nodes.is_empty() {
        return Err(Error::range(
            "no source node has a slope inside the dual grid",
        ));
    }
    let mut err = 0.0f64;
    for j in 0..nz {
        let fs: Vec<f64> = (0..ps.len()).map(|k| pair.dual.at(&[k, j])).collect();
        let back = conjugate_slice(ps, &fs, xs);
        for &i in nodes.iter().filter(|&&i| g.unflatten(i)[1] == j) {
            let ix = g.unflatten(i)[0];
            err = err.max((back[ix] - pair.source.values()[i]).abs());
        }
    }
    Ok(err)
}

/// Piecewise-linear interpolation error estimate `h²/8·max|u_x'x'|` of both
/// conjugations.
pub fn quadratic_interpolation_bound(pair: &LegendrePair) -> Result<f64> {
    let part = |f: &ScalarField| -> Result<f64> {
        let g = f.grid();
        let h = g.axis(0)[1] - g.axis(0)[0];
        let mut m = 0.0f64;
        for i in interior_nodes(g) {
            m = m.max(f.hessian_at_node(i)?.matrix[0].abs());
        }
        Ok(h * h / 8.0 * m)
    };
    Ok(part(&pair.source)? + part(&pair.dual)?)
}

/// Largest `|D²_{y'}u*(y) − (D²_{x'}u(x))^{-1}|` over the given source
/// points, with `y' = ∇_{x'}u(x)`.
pub fn hessian_inverse_check(pair: &LegendrePair, points: &[Vec<f64>]) -> Result<f64> {
    let mut worst = 0.0f64;
    for x in points {
        let uxx = pair.source.hessian_fd(x)?.matrix[0];
        let p = pair.source.gradient_fd(x)?[0];
        let y = [p, x[1]];
        let dg = pair.dual.grid();
        let ps = dg.axis(0);
        let zs = dg.axis(1);
        let inside = p > ps[1] && p < ps[ps.len() - 2] && x[1] > zs[0] && x[1] < zs[zs.len() - 1];
        if !inside {
            return Err(Error::range(format!(
                "{x:?} has no interior preimage on the dual grid"
            )));
        }
        let dual = pair.dual.hessian_fd(&y)?.matrix[0];
        worst = worst.max((dual - 1.0 / uxx).abs());
    }
    Ok(worst)
}

/// Interior source nodes with slopes well inside the dual grid, thinned to
/// at most `count` points.
pub fn matched_points(pair: &LegendrePair, count: usize) -> Vec<Vec<f64>> {
    let nodes = pair.matched_nodes();
    let stride = (nodes.len() / count.max(1)).max(1);
    nodes
        .iter()
        .step_by(stride)
        .map(|&i| pair.source.grid().node(i))
        .collect()
}

/// `y_n^α (−u*_n)^{n+2} det D²_{y'}u* + u*_nn` at interior dual nodes, zero
/// on the grid edges.
pub fn transformed_pde_residual(pair: &LegendrePair, alpha: f64) -> Result<ScalarField> {
    let f = &pair.dual;
    let g = f.grid();
    let n = g.dim() as i32;
    let mut out = vec![0.0; g.len()];
    for i in interior_nodes(g) {
        let y = g.node(i);
        let hs = f.hessian_at_node(i)?;
        let un = f.gradient_fd(&y)?[1];
        out[i] = y[1].powf(alpha) * (-un).powi(n + 2) * hs.matrix[0] + hs.matrix[3];
    }
    ScalarField::from_values(g, out)
}

/// Largest absolute value over nodes at least `margin` nodes from the edges.
pub fn interior_max(f: &ScalarField, margin: usize) -> f64 {
    let g = f.grid();
    let shape = g.shape();
    (0..g.len())
        .filter(|&i| {
            g.unflatten(i)
                .iter()
                .zip(&shape)
                .all(|(k, n)| *k >= margin && k + margin < *n)
        })
        .map(|i| f.values()[i].abs())
        .fold(0.0, f64::max)
}

/// Stage metrics of eigenfunction → hodograph → Legendre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub point: Vec<f64>,
    pub dilation: f64,
    pub hodograph_residual: f64,
    pub min_normal_slope: f64,
    pub involution_error: f64,
    pub interpolation_bound: f64,
    pub hessian_mismatch: f64,
    pub transformed_residual: f64,
    /// `min(−u*_n)` over interior dual nodes.
    pub min_dual_normal_slope: f64,
}

/// Runs the transform chain on an eigenfunction `u` with eigenvalue
/// `lambda` at the boundary point `z`. Residual maxima skip `margin` nodes
/// along every edge.
pub fn eigen_pipeline(
    u: &ScalarField,
    domain: &ConvexDomain,
    lambda: f64,
    z: &[f64],
    window: &HodographWindow,
    margin: usize,
) -> Result<(PipelineReport, ScalarField, LegendrePair)> {
    let dilation = lambda.sqrt();
    let ut = hodograph(u, domain, z, dilation, window)?;
    let ut_res = hodograph_residual(&ut)?;
    let g = ut.grid();
    let min_normal_slope = interior_nodes(g)
        .map(|i| ut.gradient_fd(&g.node(i)).map(|d| d[1]))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let pair = partial_legendre(&ut)?;
    let points = matched_points(&pair, 200);
    let dual_res = transformed_pde_residual(&pair, 2.0)?;
    let dg = pair.dual.grid();
    let min_dual_normal_slope = interior_nodes(dg)
        .map(|i| pair.dual.gradient_fd(&dg.node(i)).map(|d| -d[1]))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let report = PipelineReport {
        point: z.to_vec(),
        dilation,
        hodograph_residual: interior_max(&ut_res, margin),
        min_normal_slope,
        involution_error: legendre_involution_error(&pair)?,
        interpolation_bound: quadratic_interpolation_bound(&pair)?,
        hessian_mismatch: hessian_inverse_check(&pair, &points)?,
        transformed_residual: interior_max(&dual_res, margin),
        min_dual_normal_slope,
    };
    Ok((report, ut, pair))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_solution;
    use proptest::prelude::*;

    fn field(lo: [f64; 2], hi: [f64; 2], n: [usize; 2], f: impl Fn(&[f64]) -> f64) -> ScalarField {
        let g = Arc::new(Grid::uniform(&lo, &hi, &n).unwrap());
        ScalarField::sample(f, &g).unwrap()
    }

    #[test]
    fn model_solution_conjugate() {
        for alpha in [0.5, 1.0, 2.0] {
            let u = field([-1.0, 0.0], [1.0, 1.0], [81, 41], |x| {
                model_solution(x, alpha)
            });
            let pair = partial_legendre(&u).unwrap();
            let c = (1.0 + alpha) * (2.0 + alpha);
            let dg = pair.dual.grid().clone();
            for i in 0..dg.len() {
                let y = dg.node(i);
                let exact = 0.5 * y[0] * y[0] - y[1].powf(2.0 + alpha) / c;
                assert!((pair.dual.values()[i] - exact).abs() < 1e-12, "{y:?}");
            }
        }
    }

    #[test]
    fn scaled_quadratic_conjugate() {
        let a = 2.0;
        let u = field([-1.0, 0.0], [1.0, 1.0], [41, 11], |x| {
            0.5 * a * x[0] * x[0] + x[1].sin()
        });
        let pair = partial_legendre(&u).unwrap();
        let dg = pair.dual.grid().clone();
        for i in 0..dg.len() {
            let y = dg.node(i);
            assert!((pair.dual.values()[i] - (y[0] * y[0] / (2.0 * a) - y[1].sin())).abs() < 1e-12);
        }
        let pts = matched_points(&pair, 50);
        assert!(hessian_inverse_check(&pair, &pts).unwrap() < 1e-9);
    }

    #[test]
    fn involution_within_interpolation_bound() {
        let u = field([-1.0, 0.0], [1.0, 1.0], [65, 17], |x| {
            (x[0] + 0.3 * x[1]).exp() + x[1] * x[1]
        });
        let pair = partial_legendre(&u).unwrap();
        let err = legendre_involution_error(&pair).unwrap();
        assert!(
            err <= quadratic_interpolation_bound(&pair).unwrap(),
            "{err}"
        );
    }

    #[test]
    fn nonconvex_slice_is_named() {
        let u = field([-1.0, 0.0], [1.0, 1.0], [21, 5], |x| {
            if x[1] > 0.6 {
                -x[0] * x[0]
            } else {
                x[0] * x[0]
            }
        });
        match partial_legendre(&u) {
            Err(Error::Input(msg)) => assert!(msg.contains("slice 3")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn residual_evaluator_arithmetic() {
        // u* = ½y₁² − c y_n²: y_n²(2c y_n)⁴ − 2c
        let c = 0.7;
        let u = field([-1.0, 0.0], [1.0, 1.0], [41, 21], |x| {
            0.5 * x[0] * x[0] + c * x[1] * x[1]
        });
        let pair = partial_legendre(&u).unwrap();
        let r = transformed_pde_residual(&pair, 2.0).unwrap();
        let g = r.grid().clone();
        for i in interior_nodes(&g) {
            let y = g.node(i);
            let exact = y[1].powi(2) * (2.0 * c * y[1]).powi(4) - 2.0 * c;
            assert!((r.values()[i] - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn plane_hodograph_is_a_plane() {
        // u = −x₂ − 1 vanishes on the chord x₂ = −1 of the square below
        let dom = ConvexDomain::rectangle([-1.0, -1.0], [1.0, 1.0]).unwrap();
        let u = field([-1.0, -1.0], [1.0, 1.0], [41, 41], |x| -(x[1] + 1.0));
        let w = HodographWindow {
            half_width: 0.5,
            height: 0.5,
            normal_nodes: 11,
        };
        let ut = hodograph(&u, &dom, &[0.0, -1.0], 1.0, &w).unwrap();
        let g = ut.grid().clone();
        for i in 0..g.len() {
            assert!((ut.values()[i] - g.node(i)[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn hodograph_preserves_gauss_curvature() {
        let dom = ConvexDomain::disk(1.0).unwrap();
        let err = |n: usize| {
            let u = field([-1.0, -1.0], [1.0, 1.0], [n, n], |x| {
                0.5 * (x[0] * x[0] + x[1] * x[1]) - 0.5
            });
            let w = HodographWindow {
                half_width: 0.3,
                height: 0.2,
                normal_nodes: (n - 1) / 8 + 1,
            };
            let ut = hodograph(&u, &dom, &[0.0, -1.0], 1.0, &w).unwrap();
            let g = ut.grid().clone();
            let mut worst = 0.0f64;
            for i in interior_nodes(&g) {
                let y = g.node(i);
                let x = [y[0], ut.values()[i] - 1.0];
                let k = 1.0 / (1.0 + x[0] * x[0] + x[1] * x[1]).powi(2);
                worst = worst.max((gauss_curvature(&ut, i).unwrap() - k).abs());
            }
            worst
        };
        let (e1, e2) = (err(65), err(129));
        assert!(e2 < 0.6 * e1 && e2 < 0.05, "{e1} {e2}");
    }

    proptest! {
        #[test]
        fn fenchel_inequality(a in 0.5f64..3.0, b in -1.0f64..1.0, c in 0.0f64..1.0) {
            let u = field([-1.0, 0.0], [1.0, 1.0], [33, 5], |x| 0.5 * a * x[0] * x[0] + b * x[0] + c * x[0].powi(4) + x[1]);
            let pair = partial_legendre(&u).unwrap();
            let g = u.grid().clone();
            let dg = pair.dual.grid().clone();
            for i in 0..g.len() {
                let x = g.node(i);
                let j = g.unflatten(i)[1];
                for k in 0..dg.axis(0).len() {
                    let p = dg.axis(0)[k];
                    prop_assert!(u.values()[i] + pair.dual.at(&[k, j]) >= x[0] * p - 1e-8);
                }
            }
        }

        #[test]
        fn order_reversal(a in 0.5f64..3.0, shift in 0.0f64..1.0) {
            let u = field([-1.0, 0.0], [1.0, 1.0], [33, 5], |x| 0.5 * a * x[0] * x[0]);
            let v = field([-1.0, 0.0], [1.0, 1.0], [33, 5], |x| 0.5 * a * x[0] * x[0] + shift);
            let (pu, pv) = (partial_legendre(&u).unwrap(), partial_legendre(&v).unwrap());
            for (a, b) in pu.dual.values().iter().zip(pv.dual.values()) {
                prop_assert!(a >= b);
            }
        }
    }
}
