//! The degenerate linear equation `x_n^α Σ a^{ij} v_ij + v_nn = x_n^α f` above
//! the flat floor `{x_n = 0}`, and tangent expansions of its solutions at
//! floor points.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid, ScalarField};
use crate::geometry::ConvexDomain;
use crate::linalg::{sym_eigenvalues, weighted_least_squares};
use crate::ma_solver::{PointFn, Rhs};
use crate::mesh::{axis_directions, Closure, EmbeddedGrid, Target, NO_UNKNOWN};
use crate::sparse::{lu_bicgstab, CsrBuilder, CsrMatrix};

/// Reported residual slope when the linear profile is exact.
pub const SLOPE_CAP: f64 = 100.0;

/// Windows with fewer off-floor nodes than this are left out of slope fits.
const MIN_WINDOW_NODES: usize = 12;

/// Dyadic windows per tangent-profile fit.
pub const PROFILE_WINDOWS: usize = 4;

#[derive(Clone)]
pub struct GrushinProblem {
    pub alpha: f64,
    pub domain: ConvexDomain,
    pub grid: Arc<Grid>,
    /// Row-major `(n−1)×(n−1)` tangential coefficient block.
    pub a: Vec<Rhs>,
    pub f: Rhs,
    /// Dirichlet data on the whole boundary, floor included.
    pub phi: PointFn,
    /// Bounds `(λ, Λ)` on the eigenvalues of the coefficient block.
    pub ellipticity: (f64, f64),
}

impl core::fmt::Debug for GrushinProblem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("GrushinProblem")
            .field("alpha", &self.alpha)
            .field("domain", &self.domain)
            .field("grid", &self.grid.shape())
            .field("a", &self.a)
            .field("f", &self.f)
            .field("ellipticity", &self.ellipticity)
            .finish()
    }
}

impl GrushinProblem {
    /// Constant coefficients `a^{ij} = δ_{ij}` and `f = 0`.
    pub fn new(alpha: f64, domain: ConvexDomain, grid: Arc<Grid>, phi: PointFn) -> Self {
        let m = domain.dim().saturating_sub(1);
        let a = (0..m * m)
            .map(|k| Rhs::Const(if k / m == k % m { 1.0 } else { 0.0 }))
            .collect();
        GrushinProblem {
            alpha,
            domain,
            grid,
            a,
            f: Rhs::Const(0.0),
            phi,
            ellipticity: (1.0, 1.0),
        }
    }

    /// The half ball `B₁⁺` on the half box `[−1, 1]^{n−1} × [0, 1]` with
    /// `nodes` grid points per axis.
    pub fn half_ball(dim: usize, alpha: f64, nodes: usize, phi: PointFn) -> Result<Self> {
        let domain = ConvexDomain::half_ball(dim, 1.0)?;
        let mut lo = vec![-1.0; dim];
        lo[dim - 1] = 0.0;
        let grid = Arc::new(Grid::uniform(&lo, &vec![1.0; dim], &vec![nodes; dim])?);
        Ok(Self::new(alpha, domain, grid, phi))
    }

    pub fn with_coefficients(mut self, a: Vec<Rhs>, ellipticity: (f64, f64)) -> Self {
        self.a = a;
        self.ellipticity = ellipticity;
        self
    }

    pub fn with_forcing(mut self, f: Rhs) -> Self {
        self.f = f;
        self
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Coefficient block at `x`, row-major.
    pub fn coefficients_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.a.iter().map(|c| c.eval(x)).collect()
    }

    /// Checks dimensions, `α > 0` and the ellipticity bounds at every node
    /// inside the domain.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n < 2 || self.domain.dim() != n {
            return Err(Error::param(
                "the Grushin problem needs matching dimensions ≥ 2",
            ));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::param(format!(
                "α must be positive, got {}",
                self.alpha
            )));
        }
        let m = n - 1;
        if self.a.len() != m * m {
            return Err(Error::param(format!(
                "expected {} coefficients, got {}",
                m * m,
                self.a.len()
            )));
        }
        let (lam, big) = self.ellipticity;
        if !(lam > 0.0 && big >= lam) {
            return Err(Error::param("ellipticity bounds need 0 < λ ≤ Λ"));
        }
        let slack = 1e-12 * big;
        for i in 0..self.grid.len() {
            let x = self.grid.node(i);
            if !self.domain.contains(&x) {
                continue;
            }
            let a = self.coefficients_at(&x)?;
            for r in 0..m {
                for c in 0..r {
                    if (a[r * m + c] - a[c * m + r]).abs() > slack {
                        return Err(Error::Input(format!(
                            "coefficients are not symmetric at node {i}"
                        )));
                    }
                }
            }
            let eig = sym_eigenvalues(&a, m);
            if eig[0] < lam - slack || eig[m - 1] > big + slack {
                return Err(Error::Input(format!(
                    "ellipticity violated at node {i}: eigenvalues {:?} outside [{lam}, {big}]",
                    eig
                )));
            }
        }
        Ok(())
    }
}

/// Assembled discrete operator with Dirichlet data folded into an offset:
/// `L_h v = A·v_int + offset`.
#[derive(Debug, Clone)]
pub struct GrushinSystem {
    mesh: EmbeddedGrid,
    matrix: CsrMatrix,
    offset: Vec<f64>,
    rhs: Vec<f64>,
    base: Vec<f64>,
}

impl GrushinSystem {
    pub fn new(p: &GrushinProblem) -> Result<Self> {
        p.validate()?;
        let n = p.dim();
        let grid = &p.grid;
        let mesh = EmbeddedGrid::new(&p.domain, grid, axis_directions(n), Closure::LinearGhost)?;
        let h: Vec<f64> = (0..n).map(|k| grid.spacing(k).unwrap_or(1.0)).collect();
        let phi = p.phi.clone();
        let bvals = mesh.boundary_values(&*phi);
        let base = mesh.scatter(&vec![0.0; mesh.unknowns().len()], &*phi);
        if let Some(node) = base.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation { node });
        }
        let count = mesh.unknowns().len();
        let mut b = CsrBuilder::new(count);
        let mut offset = vec![0.0; count];
        let mut rhs = vec![0.0; count];
        let m = n - 1;
        let shape = grid.shape();
        for k in 0..count {
            let node = mesh.unknowns()[k];
            let x = grid.node(node);
            let weight = x[n - 1].max(0.0).powf(p.alpha);
            let a = p.coefficients_at(&x)?;
            rhs[k] = weight * p.f.eval(&x)?;
            for d in 0..n {
                let scale = if d < m { weight * a[d * m + d] } else { 1.0 } / (h[d] * h[d]);
                if scale == 0.0 {
                    continue;
                }
                let (c0, cf, cb) = mesh.weights(k, d);
                b.add(k, scale * c0);
                for (arm, c) in mesh.arms(k, d).iter().zip([cf, cb]) {
                    match arm.target {
                        Target::Node(j) if mesh.unknown_of(j) != NO_UNKNOWN => {
                            b.add(mesh.unknown_of(j), scale * c)
                        }
                        Target::Node(j) => offset[k] += scale * c * base[j],
                        Target::Boundary(q) => offset[k] += scale * c * bvals[q],
                    }
                }
            }
            // mixed tangential terms by the four-point cross stencil
            let idx = grid.unflatten(node);
            for r in 0..m {
                for c in r + 1..m {
                    let coef = 2.0 * weight * a[r * m + c] / (4.0 * h[r] * h[c]);
                    if coef == 0.0 {
                        continue;
                    }
                    for (sr, sc, sign) in [
                        (1i64, 1i64, 1.0),
                        (1, -1, -1.0),
                        (-1, 1, -1.0),
                        (-1, -1, 1.0),
                    ] {
                        let (ir, ic) = (idx[r] as i64 + sr, idx[c] as i64 + sc);
                        if ir < 0 || ic < 0 || ir as usize >= shape[r] || ic as usize >= shape[c] {
                            return Err(Error::Geometry(format!(
                                "cross stencil at node {node} leaves the grid"
                            )));
                        }
                        let mut j_idx = idx.clone();
                        j_idx[r] = ir as usize;
                        j_idx[c] = ic as usize;
                        let j = grid.flat(&j_idx);
                        match mesh.unknown_of(j) {
                            NO_UNKNOWN => offset[k] += sign * coef * base[j],
                            u => b.add(u, sign * coef),
                        }
                    }
                }
            }
            b.finish_row();
        }
        Ok(GrushinSystem {
            mesh,
            matrix: b.build(),
            offset,
            rhs,
            base,
        })
    }

    pub fn mesh(&self) -> &EmbeddedGrid {
        &self.mesh
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Right-hand side `x_n^α f` at the unknowns.
    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// `L_h v − x_n^α f` at the unknowns for a full-grid vector `v`.
    pub fn residual(&self, v: &[f64]) -> Vec<f64> {
        let vi = self.mesh.gather(v);
        let mut r = self.matrix.apply(&vi);
        for k in 0..r.len() {
            r[k] += self.offset[k] - self.rhs[k];
        }
        r
    }

    /// `max_k (Σ_j |A_kj v_j| + |offset_k|)`, at least 1.
    pub fn row_scale(&self, v: &[f64]) -> f64 {
        let vi = self.mesh.gather(v);
        let mut worst = 1.0f64;
        for k in 0..self.matrix.n {
            let s: f64 = self
                .matrix
                .row(k)
                .map(|(j, a)| (a * vi[j]).abs())
                .sum::<f64>()
                + self.offset[k].abs();
            worst = worst.max(s);
        }
        worst
    }

    fn full(&self, interior: &[f64]) -> Vec<f64> {
        let mut v = self.base.clone();
        for (k, &i) in self.mesh.unknowns().iter().enumerate() {
            v[i] = interior[k];
        }
        v
    }
}

/// Solves the Dirichlet problem. The residual max-norm is checked against
/// `tol` times the largest row magnitude `Σ_j |A_kj v_j| + |offset_k|`, at
/// least 1, so cut cells with tiny arms do not trip the check on rounding.
/// The returned field holds the boundary data at boundary and exterior nodes.
pub fn solve_grushin(p: &GrushinProblem, tol: f64) -> Result<ScalarField> {
    if !(tol > 0.0) {
        return Err(Error::param("tolerance must be positive"));
    }
    let sys = GrushinSystem::new(p)?;
    let b: Vec<f64> = sys
        .rhs
        .iter()
        .zip(&sys.offset)
        .map(|(f, o)| f - o)
        .collect();
    let lin = lu_bicgstab(&sys.matrix, &b, 1e-13)?;
    let v = sys.full(&lin.x);
    let res = sys.residual(&v).iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if res > tol * sys.row_scale(&v) {
        return Err(Error::LinearSolve {
            iterations: lin.iterations,
            residual: res,
            trace: lin.trace,
        });
    }
    ScalarField::from_values(&p.grid, v)
}

/// Max-norm of the discrete residual of `v` for problem `p`.
pub fn grushin_residual(v: &ScalarField, p: &GrushinProblem) -> Result<f64> {
    let sys = GrushinSystem::new(p)?;
    if v.values().len() != p.grid.len() {
        return Err(Error::Input("field and problem grids differ".into()));
    }
    Ok(sys
        .residual(v.values())
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs())))
}

/// `ρ_α(x) = (|x'|² + x_n^{2+α})^{1/2}`.
pub fn rho_alpha(x: &[f64], alpha: f64) -> f64 {
    let n = x.len();
    let t: f64 = x[..n - 1].iter().map(|v| v * v).sum();
    (t + x[n - 1].max(0.0).powf(2.0 + alpha)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProfileFit {
    pub a0: f64,
    pub a_prime: Vec<f64>,
    /// Log-log slope of the max remainder `|w − (a₀ + a'·x')x_n|` against
    /// the window radius in `ρ_α`; `SLOPE_CAP` when the profile is exact.
    pub slope: f64,
    pub radius: f64,
    pub window_radii: Vec<f64>,
    pub window_remainders: Vec<f64>,
}

impl LinearProfileFit {
    pub fn within_bound(&self, bound: f64) -> bool {
        self.a0.abs() <= bound && self.a_prime.iter().all(|a| a.abs() <= bound)
    }
}

/// Least-squares fit of `(a₀ + a'·x')x_n` at the origin over nodes with
/// `ρ_α ≤ fit_radius`. The fit carries the next-order terms `x_n^{2+α}`,
/// `x_i x_j x_n` and `x_n^{3+α}` as nuisance columns so the profile is not
/// biased by them; the reported remainder excludes only the profile.
pub fn fit_tangent_profile(
    w: &ScalarField,
    alpha: f64,
    fit_radius: f64,
) -> Result<LinearProfileFit> {
    let grid = w.grid();
    let n = grid.dim();
    if n < 2 {
        return Err(Error::param("profile fits need dimension ≥ 2"));
    }
    if !(fit_radius > 0.0) || !(alpha > 0.0) {
        return Err(Error::param("fit radius and α must be positive"));
    }
    let m = n - 1;
    let scale = w.max_abs().max(1.0);
    let floor_tol = 1e-8 * scale;
    let mut pts = Vec::new();
    for i in 0..grid.len() {
        let x = grid.node(i);
        let rho = rho_alpha(&x, alpha);
        if rho > fit_radius || x[m] < 0.0 {
            continue;
        }
        let v = w.values()[i];
        if x[m] == 0.0 {
            if v.abs() > floor_tol {
                return Err(Error::Input(format!("w = {v:e} on the floor at {x:?}")));
            }
            continue;
        }
        pts.push((x, rho, v));
    }
    let full = profile_basis(m, alpha);
    let row = |x: &[f64], cols: usize| -> Vec<f64> {
        full[..cols]
            .iter()
            .map(|(e, tp)| {
                x[m].powf(*tp)
                    * e.iter()
                        .zip(x)
                        .map(|(k, xi)| xi.powi(*k as i32))
                        .product::<f64>()
            })
            .collect()
    };
    let rhs: Vec<f64> = pts.iter().map(|p| p.2).collect();
    // drop nuisance columns until the design has full rank
    let mut cols = full.len();
    let fit = loop {
        let design: Vec<f64> = pts.iter().flat_map(|(x, _, _)| row(x, cols)).collect();
        match weighted_least_squares(&design, cols, &rhs, None) {
            Some(f) => break Some(f),
            None if cols > 1 + m => cols -= 1,
            None => break None,
        }
    };
    let fit = fit.ok_or_else(|| Error::Fit("tangent profile design is rank deficient".into()))?;
    let a0 = fit.coefficients[0];
    let a_prime = fit.coefficients[1..1 + m].to_vec();
    let remainder: Vec<(f64, f64)> = pts
        .iter()
        .map(|(x, rho, v)| {
            let prof = (a0 + a_prime.iter().zip(x).map(|(a, xi)| a * xi).sum::<f64>()) * x[m];
            (*rho, (v - prof).abs())
        })
        .collect();
    let (window_radii, window_remainders) = dyadic_maxima(&remainder, fit_radius);
    let slope = loglog_slope(&window_radii, &window_remainders, 1e-12 * scale);
    Ok(LinearProfileFit {
        a0,
        a_prime,
        slope,
        radius: fit_radius,
        window_radii,
        window_remainders,
    })
}

/// Monomials `x'^β x_n^p` of the tangent profile followed by the nuisance
/// terms of a formal expansion of solutions vanishing on the floor, ordered by
/// increasing `ρ_α` homogeneity.
fn profile_basis(m: usize, alpha: f64) -> Vec<(Vec<u32>, f64)> {
    let mut out = vec![(vec![0; m], 1.0)];
    for i in 0..m {
        let mut e = vec![0; m];
        e[i] = 1;
        out.push((e, 1.0));
    }
    let mut rest: Vec<(Vec<u32>, f64, f64)> = Vec::new();
    let mono = |deg: u32| -> Vec<Vec<u32>> {
        let mut all = vec![vec![]];
        for _ in 0..m {
            let mut next = Vec::new();
            for e in &all {
                let used: u32 = e.iter().sum();
                for k in 0..=(deg - used) {
                    let mut f = e.clone();
                    f.push(k);
                    next.push(f);
                }
            }
            all = next;
        }
        all.into_iter()
            .filter(|e| e.iter().sum::<u32>() == deg)
            .collect()
    };
    // homogeneity of x'^β x_n^p under the anisotropic dilation, in units of ρ_α
    let hom = |deg: u32, p: f64| deg as f64 + 2.0 * p / (2.0 + alpha);
    for deg in 2..=4 {
        for e in mono(deg) {
            rest.push((e, 1.0, hom(deg, 1.0)));
        }
    }
    for deg in 0..=2 {
        for e in mono(deg) {
            rest.push((e, 3.0 + alpha, hom(deg, 3.0 + alpha)));
        }
    }
    rest.push((vec![0; m], 2.0 + alpha, hom(0, 2.0 + alpha)));
    rest.sort_by(|a, b| a.2.total_cmp(&b.2));
    out.extend(rest.into_iter().map(|(e, p, _)| (e, p)));
    out
}

/// Max of `value` over `ρ ≤ r_k` for `r_k = radius·2^{−k}`, `k < PROFILE_WINDOWS`,
/// skipping windows with too few points. The window set is fixed relative
/// to the fit radius so slopes compare across grid refinements.
fn dyadic_maxima(samples: &[(f64, f64)], radius: f64) -> (Vec<f64>, Vec<f64>) {
    let mut radii = Vec::new();
    let mut maxima = Vec::new();
    let mut r = radius;
    for _ in 0..PROFILE_WINDOWS {
        let inside: Vec<f64> = samples.iter().filter(|s| s.0 <= r).map(|s| s.1).collect();
        if inside.len() >= MIN_WINDOW_NODES {
            radii.push(r);
            maxima.push(inside.iter().fold(0.0f64, |a, b| a.max(*b)));
        }
        r *= 0.5;
    }
    (radii, maxima)
}

/// Least-squares slope of `log y` on `log r`, ignoring values at or below
/// `floor`. Returns `SLOPE_CAP` when fewer than two values survive and all are
/// negligible.
fn loglog_slope(r: &[f64], y: &[f64], floor: f64) -> f64 {
    let pts: Vec<(f64, f64)> = r
        .iter()
        .zip(y)
        .filter(|(_, v)| **v > floor)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return if y.iter().all(|v| *v <= floor) {
            SLOPE_CAP
        } else {
            f64::NAN
        };
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxy / sxx).min(SLOPE_CAP)
}

/// `P₀(x) = q(x') + (a₀ + a'·x')x_n + b₀ x_n^{2+α}/((1+α)(2+α))` in
/// coordinates centered at a floor point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentPolynomial {
    pub center: Vec<f64>,
    pub q0: f64,
    pub q_grad: Vec<f64>,
    /// Row-major Hessian of `q`.
    pub q_hess: Vec<f64>,
    pub a0: f64,
    pub a_prime: Vec<f64>,
    pub b0: f64,
    /// `a^{ij}(x₀) q_ij + b₀ − f(x₀)`.
    pub compatibility_residual: f64,
    /// Largest window remainder divided by the squared window radius.
    pub fit_residual: f64,
    /// False when the compatibility residual exceeds ten times the fit
    /// residual.
    pub compatible: bool,
}

impl TangentPolynomial {
    pub fn eval(&self, x: &[f64], alpha: f64) -> f64 {
        let n = x.len();
        let m = n - 1;
        let y: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let t = x[m];
        let mut q = self.q0;
        for i in 0..m {
            q += self.q_grad[i] * y[i];
            for j in 0..m {
                q += 0.5 * self.q_hess[i * m + j] * y[i] * y[j];
            }
        }
        let lin = self.a0 + self.a_prime.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        q + lin * t + self.b0 * t.max(0.0).powf(2.0 + alpha) / ((1.0 + alpha) * (2.0 + alpha))
    }
}

/// Window radii `2^{−k}`, `k = 2..6`, used by the tangent polynomial fit.
pub const SCHAUDER_WINDOWS: [f64; 5] = [0.25, 0.125, 0.0625, 0.03125, 0.015625];

/// Fits the tangent polynomial of `v` at the floor point `x0`. Windows are
/// stacked and each row is weighted by `ρ_α^{−2}`.
pub fn fit_tangent_polynomial(
    v: &ScalarField,
    p: &GrushinProblem,
    x0: &[f64],
) -> Result<TangentPolynomial> {
    let grid = v.grid();
    let n = grid.dim();
    let m = n - 1;
    if x0.len() != n || x0[m].abs() > 1e-12 {
        return Err(Error::param("the probe point must lie on the floor"));
    }
    let alpha = p.alpha;
    let c_b = 1.0 / ((1.0 + alpha) * (2.0 + alpha));
    let basis = |x: &[f64]| -> Vec<f64> {
        let y: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
        let t = x[m];
        let mut r = vec![1.0];
        r.extend_from_slice(&y[..m]);
        for i in 0..m {
            for j in i..m {
                r.push(if i == j {
                    0.5 * y[i] * y[i]
                } else {
                    y[i] * y[j]
                });
            }
        }
        r.push(t);
        r.extend(y[..m].iter().map(|yi| yi * t));
        r.push(c_b * t.powf(2.0 + alpha));
        r
    };
    let cols = 1 + m + m * (m + 1) / 2 + 1 + m + 1;
    let rmin = SCHAUDER_WINDOWS[SCHAUDER_WINDOWS.len() - 1];
    let mut design = Vec::new();
    let mut rhs = Vec::new();
    let mut weights = Vec::new();
    let mut samples = Vec::new();
    for i in 0..grid.len() {
        let x = grid.node(i);
        if x[m] < 0.0 || !p.domain.contains(&x) && p.domain.level(&x) > 1e-12 {
            continue;
        }
        let y: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
        let rho = rho_alpha(&y, alpha);
        if rho > SCHAUDER_WINDOWS[0] {
            continue;
        }
        samples.push((x.clone(), rho, v.values()[i]));
        let copies = SCHAUDER_WINDOWS.iter().filter(|r| rho <= **r).count();
        let wt = rho.max(rmin).powi(-2);
        for _ in 0..copies {
            design.extend(basis(&x));
            rhs.push(v.values()[i]);
            weights.push(wt);
        }
    }
    let fit = weighted_least_squares(&design, cols, &rhs, Some(&weights))
        .ok_or_else(|| Error::Fit("tangent polynomial design is rank deficient".into()))?;
    let c = &fit.coefficients;
    let q0 = c[0];
    let q_grad = c[1..1 + m].to_vec();
    let mut q_hess = vec![0.0; m * m];
    let mut k = 1 + m;
    for i in 0..m {
        for j in i..m {
            q_hess[i * m + j] = c[k];
            q_hess[j * m + i] = c[k];
            k += 1;
        }
    }
    let a0 = c[k];
    let a_prime = c[k + 1..k + 1 + m].to_vec();
    let b0 = c[k + 1 + m];
    let a = p.coefficients_at(x0)?;
    let trace: f64 = (0..m * m).map(|e| a[e] * q_hess[e]).sum();
    let compatibility_residual = trace + b0 - p.f.eval(x0)?;
    let mut poly = TangentPolynomial {
        center: x0.to_vec(),
        q0,
        q_grad,
        q_hess,
        a0,
        a_prime,
        b0,
        compatibility_residual,
        fit_residual: 0.0,
        compatible: true,
    };
    let mut fit_residual = 0.0f64;
    for r in SCHAUDER_WINDOWS {
        let worst = samples
            .iter()
            .filter(|s| s.1 <= r)
            .map(|s| (s.2 - poly.eval(&s.0, alpha)).abs())
            .fold(0.0f64, f64::max);
        fit_residual = fit_residual.max(worst / (r * r));
    }
    poly.fit_residual = fit_residual;
    poly.compatible = compatibility_residual.abs() <= 10.0 * fit_residual.max(1e-12);
    Ok(poly)
}

/// Solves `p` and fits the tangent polynomial at the floor point `x0`.
pub fn schauder_probe(p: &GrushinProblem, x0: &[f64], tol: f64) -> Result<TangentPolynomial> {
    let v = solve_grushin(p, tol)?;
    fit_tangent_polynomial(&v, p, x0)
}

/// Smooth boundary data `x_n·P(x)` with `P` a cubic whose coefficients are
/// drawn uniformly from `[−1, 1]`. Vanishes on the floor.
pub fn random_boundary_data(dim: usize, seed: u64) -> PointFn {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms: Vec<(Vec<u32>, f64)> = Vec::new();
    let mut push = |e: Vec<u32>| {
        let c = rng.random_range(-1.0..1.0);
        terms.push((e, c));
    };
    let mut stack = vec![(Vec::<u32>::new(), 0u32)];
    while let Some((e, deg)) = stack.pop() {
        if e.len() == dim {
            push(e);
            continue;
        }
        for k in 0..=(3 - deg) {
            let mut next = e.clone();
            next.push(k);
            stack.push((next, deg + k));
        }
    }
    Arc::new(move |x: &[f64]| {
        let n = x.len();
        let p: f64 = terms
            .iter()
            .map(|(e, c)| {
                c * e
                    .iter()
                    .zip(x)
                    .map(|(k, xi)| xi.powi(*k as i32))
                    .product::<f64>()
            })
            .sum();
        x[n - 1] * p
    })
}

/// Tangential coefficient block `I + ε·S(x)` with a smooth symmetric
/// perturbation whose eigenvalues stay within `[1 − ε, 1 + ε]`. For tests of
/// variable coefficients.
pub fn perturbed_coefficients(dim: usize, eps: f64, seed: u64) -> Vec<Rhs> {
    let m = dim - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut freq = Vec::new();
    for _ in 0..m * m {
        let f: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ph: f64 = rng.random_range(0.0..core::f64::consts::TAU);
        freq.push((f, ph));
    }
    let freq = Arc::new(freq);
    let scale = eps / m as f64;
    let mut out = Vec::with_capacity(m * m);
    for r in 0..m {
        for c in 0..m {
            let (i, j) = (r.min(c), r.max(c));
            let fr = freq.clone();
            let diag = r == c;
            out.push(Rhs::Function(Arc::new(move |x: &[f64]| {
                let (f, ph) = &fr[i * m + j];
                let s = (f.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + ph).sin();
                if diag {
                    1.0 + scale * s
                } else {
                    scale * s
                }
            })));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> PointFn {
        Arc::new(f)
    }

    #[test]
    fn linear_in_normal_is_exact() {
        let p = GrushinProblem::half_ball(2, 1.0, 33, data(|x| x[1])).unwrap();
        let v = solve_grushin(&p, 1e-8).unwrap();
        let grid = v.grid().clone();
        for i in 0..grid.len() {
            let x = grid.node(i);
            if p.domain.contains(&x) {
                assert!((v.values()[i] - x[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cubic_manufactured_converges() {
        let alpha = 0.5;
        let mut errs = Vec::new();
        for nodes in [33, 65] {
            let p = GrushinProblem::half_ball(2, alpha, nodes, data(|x| x[0] * x[0] * x[1]))
                .unwrap()
                .with_forcing(Rhs::Function(Arc::new(|x: &[f64]| 2.0 * x[1])));
            let v = solve_grushin(&p, 1e-8).unwrap();
            let mut e = 0.0f64;
            for i in 0..p.grid.len() {
                let x = p.grid.node(i);
                e = e.max((v.values()[i] - x[0] * x[0] * x[1]).abs());
            }
            errs.push(e);
        }
        assert!(errs[1] < errs[0] / 2.5, "{errs:?}");
    }

    #[test]
    fn exact_profile_reports_slope_cap() {
        let grid = Arc::new(Grid::uniform(&[-1.0, 0.0], &[1.0, 1.0], &[33, 33]).unwrap());
        let w = ScalarField::sample(|x| 0.7 * x[1], &grid).unwrap();
        let fit = fit_tangent_profile(&w, 1.0, 0.5).unwrap();
        assert!((fit.a0 - 0.7).abs() < 1e-12);
        assert!(fit.a_prime[0].abs() < 1e-12);
        assert_eq!(fit.slope, SLOPE_CAP);
    }

    #[test]
    fn profile_with_model_term() {
        let alpha = 1.0;
        let c = 1.0 / ((1.0 + alpha) * (2.0 + alpha));
        let grid = Arc::new(Grid::uniform(&[-1.0, 0.0], &[1.0, 1.0], &[65, 65]).unwrap());
        let w = ScalarField::sample(
            |x| (0.2 + 0.5 * x[0]) * x[1] + c * x[1].powf(2.0 + alpha),
            &grid,
        )
        .unwrap();
        let fit = fit_tangent_profile(&w, alpha, 0.5).unwrap();
        assert!((fit.a0 - 0.2).abs() < 1e-10);
        assert!((fit.a_prime[0] - 0.5).abs() < 1e-10);
        for (r, m) in fit.window_radii.iter().zip(&fit.window_remainders) {
            // the remainder is the model term, largest at x' = 0
            assert!(*m <= c * r * r * (1.0 + 1e-9));
        }
    }

    #[test]
    fn floor_data_must_vanish() {
        let grid = Arc::new(Grid::uniform(&[-1.0, 0.0], &[1.0, 1.0], &[9, 9]).unwrap());
        let w = ScalarField::sample(|x| 1.0 + x[1], &grid).unwrap();
        assert!(matches!(
            fit_tangent_profile(&w, 1.0, 0.5),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn tangent_polynomial_recovers_model() {
        let alpha = 1.0;
        let c = 1.0 / ((1.0 + alpha) * (2.0 + alpha));
        let q = |y: f64| 0.3 + 0.1 * y + 0.5 * 0.8 * y * y;
        let p =
            GrushinProblem::half_ball(2, alpha, 65, data(move |x| q(x[0]) + c * x[1].powf(3.0)))
                .unwrap()
                .with_forcing(Rhs::Const(1.8));
        let v = ScalarField::sample(|x| q(x[0]) + c * x[1].powf(3.0), &p.grid).unwrap();
        let t = fit_tangent_polynomial(&v, &p, &[0.0, 0.0]).unwrap();
        assert!((t.q_hess[0] - 0.8).abs() < 1e-8);
        assert!((t.b0 - 1.0).abs() < 1e-8);
        assert!(t.compatibility_residual.abs() < 1e-8);
        assert!(t.compatible);
    }

    #[test]
    fn ellipticity_is_checked() {
        let p = GrushinProblem::half_ball(2, 1.0, 9, data(|_| 0.0))
            .unwrap()
            .with_coefficients(vec![Rhs::Const(3.0)], (0.5, 2.0));
        assert!(matches!(p.validate(), Err(Error::Input(_))));
    }

    #[test]
    fn boundary_data_vanishes_on_floor() {
        let phi = random_boundary_data(3, 7);
        assert_eq!(phi(&[0.3, -0.2, 0.0]), 0.0);
        assert!(phi(&[0.3, -0.2, 0.5]).is_finite());
    }
}
