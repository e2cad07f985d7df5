//! Measurements on computed fields: the anisotropic quasi-distance `d_α`,
//! Hölder seminorm estimates, boundary expansion fits and convergence orders.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::geometry::ConvexDomain;
use crate::linalg::{solve, weighted_least_squares};

/// `d_α(y, z) = |y' − z'| + |y_n^{(2+α)/2} − z_n^{(2+α)/2}|`.
pub fn d_alpha(y: &[f64], z: &[f64], alpha: f64) -> Result<f64> {
    let n = y.len();
    if n == 0 || z.len() != n {
        return Err(Error::param("points must share a positive dimension"));
    }
    if y[n - 1] < 0.0 {
        return Err(Error::OutsideDomain { point: y.to_vec() });
    }
    if z[n - 1] < 0.0 {
        return Err(Error::OutsideDomain { point: z.to_vec() });
    }
    let p = 0.5 * (2.0 + alpha);
    let t: f64 = y[..n - 1]
        .iter()
        .zip(&z[..n - 1])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(t.sqrt() + (y[n - 1].powf(p) - z[n - 1].powf(p)).abs())
}

fn euclid(y: &[f64], z: &[f64]) -> f64 {
    y.iter()
        .zip(z)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// `γ = β(2+α)/2`, the Hölder exponent in `d_α` matching a `C^{2,β}` remainder.
pub fn gamma_from_beta(beta: f64, alpha: f64) -> f64 {
    beta * (2.0 + alpha) / 2.0
}

/// Region `[lo, hi]` inside the closed half space `x_n ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    /// `[−1, 1]^{n−1} × [0, 1]`.
    pub fn unit_half_box(n: usize) -> Self {
        let mut lo = vec![-1.0; n];
        lo[n - 1] = 0.0;
        BoxRegion {
            lo,
            hi: vec![1.0; n],
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.lo.len();
        if n == 0 || self.hi.len() != n || self.lo.iter().zip(&self.hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::param("invalid region"));
        }
        if self.lo[n - 1] < 0.0 {
            return Err(Error::param("region must lie in x_n ≥ 0"));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| if a < b { rng.random_range(*a..*b) } else { *a })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScan {
    pub alpha: f64,
    /// Largest `c` with `c|y−z|^{(2+α)/2} ≤ d_α(y,z)` on the sample.
    pub c_low: f64,
    /// Smallest `C` with `d_α(y,z) ≤ C|y−z|` on the sample.
    pub c_high: f64,
    pub pairs: usize,
    pub seed: u64,
}

/// Empirical constants of the two-sided comparison between `d_α` and the
/// Euclidean distance. Half of the pairs are drawn at short range (scales
/// down to 10⁻⁴ of the region) so both ends of the distance range are seen.
pub fn metric_equivalence_scan(
    alpha: f64,
    region: &BoxRegion,
    samples: usize,
    seed: u64,
) -> Result<MetricScan> {
    region.validate()?;
    if samples == 0 {
        return Err(Error::Sampling("no pairs requested".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = 0.5 * (2.0 + alpha);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut count = 0;
    for k in 0..samples {
        let y = region.sample(&mut rng);
        let z = if k % 2 == 0 {
            region.sample(&mut rng)
        } else {
            let scale = 10f64.powf(-rng.random_range(0.0..4.0));
            y.iter()
                .zip(region.lo.iter().zip(&region.hi))
                .map(|(v, (a, b))| (v + scale * rng.random_range(-1.0..1.0)).clamp(*a, *b))
                .collect()
        };
        let e = euclid(&y, &z);
        if e == 0.0 {
            continue;
        }
        let d = d_alpha(&y, &z, alpha)?;
        lo = lo.min(d / e.powf(p));
        hi = hi.max(d / e);
        count += 1;
    }
    if count == 0 {
        return Err(Error::Sampling("all sampled pairs coincide".into()));
    }
    Ok(MetricScan {
        alpha,
        c_low: lo,
        c_high: hi,
        pairs: count,
        seed,
    })
}

/// Largest ratio `d_α(x,z) / (d_α(x,y) + d_α(y,z))` over random triples.
pub fn quasi_triangle_constant(
    alpha: f64,
    region: &BoxRegion,
    triples: usize,
    seed: u64,
) -> Result<f64> {
    region.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..triples {
        let x = region.sample(&mut rng);
        let y = region.sample(&mut rng);
        let z = region.sample(&mut rng);
        let denom = d_alpha(&x, &y, alpha)? + d_alpha(&y, &z, alpha)?;
        if denom > 0.0 {
            worst = worst.max(d_alpha(&x, &z, alpha)? / denom);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "metric")]
pub enum Metric {
    Euclidean,
    DAlpha { alpha: f64 },
}

impl Metric {
    pub fn distance(&self, y: &[f64], z: &[f64]) -> Result<f64> {
        match self {
            Metric::Euclidean => Ok(euclid(y, z)),
            Metric::DAlpha { alpha } => d_alpha(y, z, *alpha),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub gamma: f64,
    pub metric: Metric,
    pub estimate: f64,
    pub pairs: usize,
    pub seed: u64,
    /// Ratio to the estimate on the next coarser grid, when known.
    pub refinement_trend: Option<f64>,
}

/// Points with vector values; the difference of two values is measured in
/// the Euclidean (Frobenius) norm.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Samples {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
}

impl Samples {
    pub fn push(&mut self, point: Vec<f64>, value: Vec<f64>) {
        self.points.push(point);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nodal values of a scalar field, optionally filtered by position.
    pub fn from_field(u: &ScalarField, keep: impl Fn(&[f64]) -> bool) -> Self {
        let mut s = Samples::default();
        for i in 0..u.grid().len() {
            let x = u.grid().node(i);
            if keep(&x) {
                s.push(x, vec![u.values()[i]]);
            }
        }
        s
    }
}

/// Uniform buckets over the sample bounding box for nearest-point queries.
struct Buckets {
    lo: Vec<f64>,
    cell: f64,
    dims: Vec<usize>,
    heads: Vec<Vec<usize>>,
}

impl Buckets {
    fn new(points: &[Vec<f64>]) -> Self {
        let n = points[0].len();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for p in points {
            for k in 0..n {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let extent: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| (b - a).max(1e-12))
            .collect();
        let vol: f64 = extent.iter().product();
        let cell = (vol / points.len() as f64).powf(1.0 / n as f64).max(1e-12);
        let dims: Vec<usize> = extent
            .iter()
            .map(|e| ((e / cell).floor() as usize + 1).min(1 << 12))
            .collect();
        let total: usize = dims.iter().product();
        let mut b = Buckets {
            lo,
            cell,
            dims,
            heads: vec![Vec::new(); total],
        };
        for (i, p) in points.iter().enumerate() {
            let k = b.key(p);
            b.heads[k].push(i);
        }
        b
    }

    fn coords(&self, p: &[f64]) -> Vec<i64> {
        p.iter()
            .zip(&self.lo)
            .zip(&self.dims)
            .map(|((x, l), d)| (((x - l) / self.cell).floor() as i64).clamp(0, *d as i64 - 1))
            .collect()
    }

    fn key(&self, p: &[f64]) -> usize {
        let c = self.coords(p);
        let mut k = 0;
        for (ci, d) in c.iter().zip(&self.dims) {
            k = k * d + *ci as usize;
        }
        k
    }

    /// Nearest point to `p` within the 3^n bucket block around it.
    fn nearest(&self, points: &[Vec<f64>], p: &[f64], exclude: usize) -> Option<usize> {
        let c = self.coords(p);
        let n = c.len();
        let mut best: Option<(f64, usize)> = None;
        let total = 3usize.pow(n as u32);
        for code in 0..total {
            let mut rem = code;
            let mut key = 0usize;
            let mut ok = true;
            for k in 0..n {
                let off = (rem % 3) as i64 - 1;
                rem /= 3;
                let j = c[k] + off;
                if j < 0 || j >= self.dims[k] as i64 {
                    ok = false;
                    break;
                }
                key = key * self.dims[k] + j as usize;
            }
            if !ok {
                continue;
            }
            for &i in &self.heads[key] {
                if i == exclude {
                    continue;
                }
                let d = euclid(&points[i], p);
                if best.is_none_or(|b| d < b.0) {
                    best = Some((d, i));
                }
            }
        }
        best.map(|b| b.1)
    }
}

/// Lower estimate of `[f]_{C^γ} = sup |f(x)−f(y)| / dist(x,y)^γ` from a
/// stratified random pair sample. Pairs cycle through distance decades from
/// the sample diameter down to the sample spacing, so estimates with a larger
/// budget extend the pair set of smaller ones under the same seed.
pub fn holder_seminorm(
    samples: &Samples,
    gamma: f64,
    metric: Metric,
    budget: usize,
    seed: u64,
) -> Result<HolderEstimate> {
    let n_pts = samples.len();
    if n_pts < 2 {
        return Err(Error::Sampling(format!(
            "need at least 2 samples, got {n_pts}"
        )));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::param(format!("γ must lie in (0, 1], got {gamma}")));
    }
    let pts = &samples.points;
    let dim = pts[0].len();
    let buckets = Buckets::new(pts);
    let diam = buckets
        .dims
        .iter()
        .map(|d| (*d as f64 * buckets.cell).powi(2))
        .sum::<f64>()
        .sqrt();
    let strata = ((diam / buckets.cell).log10().ceil() as usize).max(1) + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    let mut pairs = 0;
    for t in 0..budget {
        let stratum = t % strata;
        let i = rng.random_range(0..n_pts);
        let j = if stratum == 0 {
            // far pairs: uniform partner
            let j = rng.random_range(0..n_pts - 1);
            if j >= i {
                j + 1
            } else {
                j
            }
        } else {
            let hi = diam * 10f64.powi(-(stratum as i32 - 1));
            let r = hi * 10f64.powf(-rng.random_range(0.0..1.0));
            let mut dir: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            dir.iter_mut().for_each(|v| *v *= r / norm);
            let target: Vec<f64> = pts[i].iter().zip(&dir).map(|(a, b)| a + b).collect();
            match buckets.nearest(pts, &target, i) {
                Some(j) => j,
                None => continue,
            }
        };
        let d = metric.distance(&pts[i], &pts[j])?;
        if d <= 0.0 {
            continue;
        }
        let diff = samples.values[i]
            .iter()
            .zip(&samples.values[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        best = best.max(diff / d.powf(gamma));
        pairs += 1;
    }
    Ok(HolderEstimate {
        gamma,
        metric,
        estimate: best,
        pairs,
        seed,
        refinement_trend: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceOrder {
    pub slope: f64,
    /// False when errors do not decrease with `h`.
    pub monotone: bool,
}

/// Least-squares slope of `log err` against `log h`.
pub fn convergence_order(errors: &[(f64, f64)]) -> Result<ConvergenceOrder> {
    if errors.len() < 3 {
        return Err(Error::param(
            "convergence orders need at least 3 grid levels",
        ));
    }
    if errors.iter().any(|(h, e)| !(*h > 0.0) || !(*e > 0.0)) {
        return Err(Error::param("spacings and errors must be positive"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let monotone = sorted.windows(2).all(|w| w[1].1 <= w[0].1);
    let k = sorted.len() as f64;
    let xs: Vec<f64> = sorted.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = sorted.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(ConvergenceOrder {
        slope: sxy / sxx,
        monotone,
    })
}

/// `Q₀(x') + a x_n^{2+α}/((1+α)(2+α))` after the sliding `x' ↦ x' + τ x_n`,
/// in the local chart at a boundary point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub point: Vec<f64>,
    pub alpha: f64,
    pub q_const: f64,
    pub q_linear: Vec<f64>,
    /// Row-major Hessian of `Q₀`.
    pub q_matrix: Vec<f64>,
    /// Coefficient of `x_n` in the tangent plane.
    pub normal_slope: f64,
    pub a: f64,
    pub tau: Vec<f64>,
    /// Log-log slope of the max remainder over the fit windows.
    pub slope: f64,
    /// Smallest and largest slope between consecutive windows.
    pub slope_range: (f64, f64),
    pub radius: f64,
    pub residual: f64,
}

impl ExpansionFit {
    pub fn det_q(&self) -> f64 {
        crate::linalg::det(&self.q_matrix, self.tau.len())
    }
}

fn monomials(m: usize, deg: u32) -> Vec<Vec<u32>> {
    let mut all = vec![Vec::new()];
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
}

/// Fits the boundary expansion of `u` at the boundary point `z` in the local
/// chart `(x', x_n)` with `x_n` along the inner normal. The model is the
/// tangent plane, `Q₀`, the mixed terms `x_i x_n`, `x_n²`, the
/// `x_n^{2+α}` term and polynomial corrections of degree 3 to 6 (monomials
/// equal to `x_n^{2+α}` are left out). Rows are weighted by `ρ_α^{−2}`. The
/// largest radius bounds the fit; every radius is a remainder window.
pub fn fit_boundary_expansion(
    u: &ScalarField,
    domain: &ConvexDomain,
    z: &[f64],
    alpha: f64,
    radii: &[f64],
) -> Result<ExpansionFit> {
    let n = domain.dim();
    if u.grid().dim() != n || z.len() != n {
        return Err(Error::param("field, domain and point dimensions differ"));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::param("fit radii must be positive"));
    }
    if !(alpha >= 0.0) {
        return Err(Error::param("α must be nonnegative"));
    }
    let chart = domain.local_graph_chart(z)?;
    let m = n - 1;
    let rmax = radii.iter().cloned().fold(0.0, f64::max);
    let rmin = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_a = 1.0 / ((1.0 + alpha) * (2.0 + alpha));
    let p = 2.0 + alpha;
    let mut corrections = Vec::new();
    for deg in 3..=6u32 {
        for e in monomials(n, deg) {
            let pure_normal = e[..m].iter().all(|k| *k == 0);
            if pure_normal && (e[m] as f64 - p).abs() < 1e-9 {
                continue;
            }
            corrections.push(e);
        }
    }
    let main_cols = 1 + m + 1 + m * (m + 1) / 2 + m + 1 + 1;
    let cols = main_cols + corrections.len();
    let row = |y: &[f64]| -> Vec<f64> {
        let s = &y[..m];
        let t = y[m];
        let mut r = Vec::with_capacity(cols);
        r.push(1.0);
        r.extend_from_slice(s);
        r.push(t);
        for i in 0..m {
            for j in i..m {
                r.push(if i == j {
                    0.5 * s[i] * s[i]
                } else {
                    s[i] * s[j]
                });
            }
        }
        r.extend(s.iter().map(|si| si * t));
        r.push(t * t);
        r.push(c_a * t.powf(p));
        for e in &corrections {
            r.push(e.iter().zip(y).map(|(k, v)| v.powi(*k as i32)).product());
        }
        r
    };
    let mut samples = Vec::new();
    let mut design = Vec::new();
    let mut rhs = Vec::new();
    let mut weights = Vec::new();
    for i in 0..u.grid().len() {
        let x = u.grid().node(i);
        if !domain.contains(&x) {
            continue;
        }
        let y = chart.to_local(&x);
        if y[m] < 0.0 {
            continue;
        }
        let rho = crate::grushin::rho_alpha(&y, alpha);
        if rho > rmax {
            continue;
        }
        design.extend(row(&y));
        rhs.push(u.values()[i]);
        weights.push(rho.max(0.5 * rmin).powi(-2));
        samples.push((y, rho, u.values()[i]));
    }
    if samples.len() < cols {
        return Err(Error::Fit(format!(
            "{} samples for {} unknowns",
            samples.len(),
            cols
        )));
    }
    let fit = weighted_least_squares(&design, cols, &rhs, Some(&weights))
        .ok_or_else(|| Error::Fit("expansion design is rank deficient".into()))?;
    let c = &fit.coefficients;
    let q_const = c[0];
    let q_linear = c[1..1 + m].to_vec();
    let normal_slope = c[1 + m];
    let mut q_matrix = vec![0.0; m * m];
    let mut k = 2 + m;
    for i in 0..m {
        for j in i..m {
            q_matrix[i * m + j] = c[k];
            q_matrix[j * m + i] = c[k];
            k += 1;
        }
    }
    let mixed = c[k..k + m].to_vec();
    let a = c[k + m + 1];
    let tau = solve(&q_matrix, &mixed, m)
        .ok_or_else(|| Error::Fit("singular tangential Hessian".into()))?;
    let model = |y: &[f64]| -> f64 {
        let t = y[m];
        let w: Vec<f64> = (0..m).map(|i| y[i] + tau[i] * t).collect();
        let mut v = q_const + normal_slope * t;
        for i in 0..m {
            v += q_linear[i] * y[i];
            for j in 0..m {
                v += 0.5 * q_matrix[i * m + j] * w[i] * w[j];
            }
        }
        v + a * c_a * t.powf(p)
    };
    let mut sorted_radii = radii.to_vec();
    sorted_radii.sort_by(|x, y| y.total_cmp(x));
    let maxima: Vec<f64> = sorted_radii
        .iter()
        .map(|r| {
            samples
                .iter()
                .filter(|s| s.1 <= *r)
                .map(|s| (s.2 - model(&s.0)).abs())
                .fold(0.0f64, f64::max)
        })
        .collect();
    let logs: Vec<(f64, f64)> = sorted_radii
        .iter()
        .zip(&maxima)
        .filter(|(_, v)| **v > 0.0)
        .map(|(r, v)| (r.ln(), v.ln()))
        .collect();
    let (slope, slope_range) = if logs.len() >= 2 {
        let k = logs.len() as f64;
        let mx = logs.iter().map(|l| l.0).sum::<f64>() / k;
        let my = logs.iter().map(|l| l.1).sum::<f64>() / k;
        let sxy: f64 = logs.iter().map(|l| (l.0 - mx) * (l.1 - my)).sum();
        let sxx: f64 = logs.iter().map(|l| (l.0 - mx) * (l.0 - mx)).sum();
        let local: Vec<f64> = logs
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        let lo = local.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = local.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (sxy / sxx, (lo, hi))
    } else {
        (f64::NAN, (f64::NAN, f64::NAN))
    };
    Ok(ExpansionFit {
        point: z.to_vec(),
        alpha,
        q_const,
        q_linear,
        q_matrix,
        normal_slope,
        a,
        tau,
        slope,
        slope_range,
        radius: rmax,
        residual: fit.residual_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalExponentFit {
    pub exponent: f64,
    /// Coefficients of `1, t, t^p, t^{p+1}`.
    pub coefficients: [f64; 4],
    pub residual: f64,
}

/// Fits `c₀ + c₁t + A t^p + B t^{p+1}` to a profile along the inner normal,
/// minimizing the least-squares residual over `p ∈ [p_lo, p_hi]` by a coarse
/// scan followed by golden-section refinement.
pub fn fit_normal_exponent(
    t: &[f64],
    values: &[f64],
    p_lo: f64,
    p_hi: f64,
) -> Result<NormalExponentFit> {
    if t.len() != values.len() || t.len() < 6 {
        return Err(Error::Fit("need at least 6 profile samples".into()));
    }
    if !(p_lo > 1.0 && p_hi > p_lo) {
        return Err(Error::param(
            "exponent bracket must satisfy 1 < p_lo < p_hi",
        ));
    }
    let tmax = t.iter().cloned().fold(0.0, f64::max);
    // scaled abscissa keeps the columns comparable
    let eval = |p: f64| -> Option<(f64, [f64; 4])> {
        let design: Vec<f64> = t
            .iter()
            .flat_map(|&ti| {
                let s = ti / tmax;
                [1.0, s, s.powf(p), s.powf(p + 1.0)]
            })
            .collect();
        let f = weighted_least_squares(&design, 4, values, None)?;
        let c = &f.coefficients;
        Some((
            f.residual_norm,
            [
                c[0],
                c[1] / tmax,
                c[2] / tmax.powf(p),
                c[3] / tmax.powf(p + 1.0),
            ],
        ))
    };
    let steps = 60;
    let mut best = (f64::INFINITY, p_lo);
    for k in 0..=steps {
        let p = p_lo + (p_hi - p_lo) * k as f64 / steps as f64;
        if let Some((r, _)) = eval(p) {
            if r < best.0 {
                best = (r, p);
            }
        }
    }
    let dp = (p_hi - p_lo) / steps as f64;
    let (mut a, mut b) = ((best.1 - dp).max(p_lo), (best.1 + dp).min(p_hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let f = |p: f64| eval(p).map_or(f64::INFINITY, |e| e.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
        if b - a < 1e-10 {
            break;
        }
    }
    let p = 0.5 * (a + b);
    let (residual, coefficients) =
        eval(p).ok_or_else(|| Error::Fit("exponent design is rank deficient".into()))?;
    Ok(NormalExponentFit {
        exponent: p,
        coefficients,
        residual,
    })
}

/// Two-level Richardson extrapolation for a quantity converging at `order`
/// when the spacing is halved.
pub fn richardson(coarse: f64, fine: f64, order: f64) -> f64 {
    let r = 2f64.powf(order);
    (r * fine - coarse) / (r - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use alloc::sync::Arc;

    #[test]
    fn d_alpha_examples() {
        assert_eq!(d_alpha(&[0.3, 0.2], &[0.3, 0.2], 1.0).unwrap(), 0.0);
        let d0 = d_alpha(&[0.1, 0.5], &[0.4, 0.1], 0.0).unwrap();
        assert!((d0 - 0.7).abs() < 1e-15);
        assert_eq!(d_alpha(&[0.0, 1.0], &[0.0, 0.0], 2.0).unwrap(), 1.0);
        assert!(matches!(
            d_alpha(&[0.0, -0.1], &[0.0, 0.0], 1.0),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn single_axis_ratio_tends_to_one() {
        let alpha = 1.0;
        let t: f64 = 1e-6;
        let r = d_alpha(&[0.0, t], &[0.0, 0.0], alpha).unwrap() / t.powf(1.5);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn euclidean_scan_at_alpha_zero() {
        let s = metric_equivalence_scan(0.0, &BoxRegion::unit_half_box(2), 4000, 3).unwrap();
        assert!(s.c_low >= 1.0 - 1e-12 && s.c_high <= 2f64.sqrt() + 1e-12);
        assert!(s.c_low < 1.01 && s.c_high > 1.40);
    }

    #[test]
    fn holder_examples() {
        let grid = Arc::new(Grid::uniform(&[0.0], &[1.0], &[101]).unwrap());
        let gamma = 0.5;
        let f = ScalarField::sample(|x| x[0].powf(gamma), &grid).unwrap();
        let est = holder_seminorm(
            &Samples::from_field(&f, |_| true),
            gamma,
            Metric::Euclidean,
            5000,
            1,
        )
        .unwrap();
        assert!(
            est.estimate <= 1.0 + 1e-12 && est.estimate > 0.999,
            "{est:?}"
        );
        let c = ScalarField::sample(|_| 2.0, &grid).unwrap();
        let est = holder_seminorm(
            &Samples::from_field(&c, |_| true),
            gamma,
            Metric::Euclidean,
            500,
            1,
        )
        .unwrap();
        assert_eq!(est.estimate, 0.0);
        let one = Samples {
            points: vec![vec![0.0]],
            values: vec![vec![0.0]],
        };
        assert!(matches!(
            holder_seminorm(&one, 0.5, Metric::Euclidean, 10, 0),
            Err(Error::Sampling(_))
        ));
    }

    #[test]
    fn holder_budget_is_monotone() {
        let grid = Arc::new(Grid::uniform(&[0.0, 0.0], &[1.0, 1.0], &[21, 21]).unwrap());
        let f = ScalarField::sample(|x| (x[0] * 7.0).sin() * x[1], &grid).unwrap();
        let s = Samples::from_field(&f, |_| true);
        let a = holder_seminorm(&s, 0.7, Metric::Euclidean, 200, 9).unwrap();
        let b = holder_seminorm(&s, 0.7, Metric::Euclidean, 2000, 9).unwrap();
        assert!(b.estimate >= a.estimate);
    }

    #[test]
    fn convergence_order_examples() {
        let e: Vec<(f64, f64)> = [0.1, 0.05, 0.025].iter().map(|h| (*h, h * h)).collect();
        assert!((convergence_order(&e).unwrap().slope - 2.0).abs() < 1e-12);
        let c: Vec<(f64, f64)> = [0.1, 0.05, 0.025].iter().map(|h| (*h, 0.3)).collect();
        assert!(convergence_order(&c).unwrap().slope.abs() < 1e-12);
        assert!(convergence_order(&e[..2]).is_err());
    }

    #[test]
    fn expansion_recovers_sheared_model() {
        let alpha = 1.0;
        let tau = 0.3;
        let grid = Arc::new(Grid::uniform(&[-1.0, 0.0], &[1.0, 1.0], &[81, 81]).unwrap());
        let dom = ConvexDomain::flat_strip(2, 1.0, 1.0).unwrap();
        let u = ScalarField::sample(
            |x| crate::model_solution(&[x[0] + tau * x[1], x[1]], alpha),
            &grid,
        )
        .unwrap();
        let fit =
            fit_boundary_expansion(&u, &dom, &[0.0, 0.0], alpha, &[0.5, 0.25, 0.125]).unwrap();
        assert!((fit.q_matrix[0] - 1.0).abs() < 1e-8, "{fit:?}");
        assert!((fit.a - 1.0).abs() < 1e-7);
        assert!((fit.tau[0] - tau).abs() < 1e-8);
    }

    #[test]
    fn normal_exponent_on_exact_profile() {
        let t: Vec<f64> = (1..40).map(|k| k as f64 / 100.0).collect();
        let v: Vec<f64> = t
            .iter()
            .map(|s| 0.1 - 0.4 * s + 2.0 * s.powf(2.5) + 0.3 * s.powf(3.5))
            .collect();
        let f = fit_normal_exponent(&t, &v, 2.0, 3.5).unwrap();
        assert!((f.exponent - 2.5).abs() < 1e-5, "{f:?}");
    }

    #[test]
    fn richardson_removes_second_order() {
        let exact = 2.0;
        let c = exact + 0.4 * 0.01;
        let f = exact + 0.4 * 0.0025;
        assert!((richardson(c, f, 2.0) - exact).abs() < 1e-14);
    }
}
