//! Closed-form barrier functions for the half-space model problem, the
//! determinant identities they satisfy, and the matrix inequality
//! `det(A+λI) ≥ det A + nλ(det A)^{(n−1)/n}`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::linalg;

/// Default for the smallness threshold `ε₀` on the perturbation size.
pub const DEFAULT_EPS0: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarrierKind {
    UpperStep1,
    LowerStep1,
    LowerStep3,
    UpperStep3,
    GrushinWbar,
}

impl BarrierKind {
    pub const ALL: [BarrierKind; 5] = [
        BarrierKind::UpperStep1,
        BarrierKind::LowerStep1,
        BarrierKind::LowerStep3,
        BarrierKind::UpperStep3,
        BarrierKind::GrushinWbar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BarrierKind::UpperStep1 => "upper-step1",
            BarrierKind::LowerStep1 => "lower-step1",
            BarrierKind::LowerStep3 => "lower-step3",
            BarrierKind::UpperStep3 => "upper-step3",
            BarrierKind::GrushinWbar => "grushin-wbar",
        }
    }
}

impl FromStr for BarrierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BarrierKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Spec(s.to_string()))
    }
}

/// Parameters of a barrier. `x0` and `a` are tangential vectors of length
/// `n − 1`; parameters a kind does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub kind: BarrierKind,
    pub n: usize,
    pub alpha: f64,
    pub eps: f64,
    pub delta0: f64,
    pub c: f64,
    pub c_prime: f64,
    pub c_double_prime: f64,
    pub theta0: f64,
    pub x0: Vec<f64>,
    pub a: Vec<f64>,
    pub a0: f64,
    #[serde(default = "default_eps0")]
    pub eps0: f64,
}

fn default_eps0() -> f64 {
    DEFAULT_EPS0
}

/// Which smallness conditions the parameters satisfy. Recorded only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regime {
    pub eps_small: bool,
    /// Every scaling factor in the formula is positive, so the barrier is
    /// convex on the half-space.
    pub convex: bool,
}

impl BarrierSpec {
    /// All scalar parameters zero, `x0 = a = 0`.
    pub fn new(kind: BarrierKind, n: usize, alpha: f64) -> Self {
        BarrierSpec {
            kind,
            n,
            alpha,
            eps: 0.0,
            delta0: 0.0,
            c: 0.0,
            c_prime: 0.0,
            c_double_prime: 0.0,
            theta0: 0.0,
            x0: vec![0.0; n.saturating_sub(1)],
            a: vec![0.0; n.saturating_sub(1)],
            a0: 0.0,
            eps0: DEFAULT_EPS0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param("barriers need n ≥ 2"));
        }
        if self.x0.len() != self.n - 1 || self.a.len() != self.n - 1 {
            return Err(Error::param(format!(
                "x0 and a need {} components",
                self.n - 1
            )));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::param("alpha must be non-negative"));
        }
        Ok(())
    }

    /// `θ₀^{1/(2+α)}`.
    fn theta_root(&self) -> f64 {
        self.theta0.max(0.0).powf(1.0 / (2.0 + self.alpha))
    }

    pub fn regime(&self) -> Regime {
        let k = self.theta_root();
        let ce = self.eps * k;
        let convex = match self.kind {
            BarrierKind::UpperStep1 => 1.0 - self.delta0 * self.eps > 0.0,
            BarrierKind::LowerStep1 => 1.0 - 16.0 * self.eps > 0.0,
            BarrierKind::LowerStep3 => 1.0 - 2.0 * self.c_prime * ce > 0.0,
            BarrierKind::UpperStep3 => 1.0 - self.c_double_prime * ce > 0.0,
            BarrierKind::GrushinWbar => false,
        };
        Regime {
            eps_small: self.eps <= self.eps0,
            convex,
        }
    }
}

/// Value, gradient and row-major Hessian at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierValue {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl BarrierValue {
    pub fn det(&self) -> f64 {
        linalg::det(&self.hessian, self.gradient.len())
    }
}

/// `(t^{2+α}/((1+α)(2+α)), t^{1+α}/(1+α), t^α)` for `t ≥ 0`.
fn model_power(t: f64, alpha: f64) -> (f64, f64, f64) {
    let t = t.max(0.0);
    let p = t.powf(alpha);
    (
        t * t * p / ((1.0 + alpha) * (2.0 + alpha)),
        t * p / (1.0 + alpha),
        p,
    )
}

pub fn eval_barrier(spec: &BarrierSpec, x: &[f64]) -> Result<BarrierValue> {
    spec.validate()?;
    let n = spec.n;
    if x.len() != n {
        return Err(Error::param(format!(
            "point has {} components, expected {n}",
            x.len()
        )));
    }
    if !(x[n - 1] >= 0.0) {
        return Err(Error::OutsideDomain { point: x.to_vec() });
    }
    let (eps, d0, alpha) = (spec.eps, spec.delta0, spec.alpha);
    let xn = x[n - 1];
    let mut gradient = vec![0.0; n];
    let mut hessian = vec![0.0; n * n];
    let value = match spec.kind {
        BarrierKind::UpperStep1 | BarrierKind::LowerStep1 => {
            let (sign, t) = match spec.kind {
                BarrierKind::UpperStep1 => (1.0, xn - d0 * eps),
                _ => (-1.0, xn),
            };
            let scale = (1.0 + sign * 16.0 * eps).powi(n as i32 - 1);
            let coef = (1.0 - sign * d0 * eps) / scale;
            let mut value = 0.0;
            for i in 0..n - 1 {
                let r = x[i] - spec.x0[i];
                value += 0.5 * x[i] * x[i] + sign * 8.0 * eps * r * r;
                gradient[i] = x[i] + sign * 16.0 * eps * r;
                hessian[i * n + i] = 1.0 + sign * 16.0 * eps;
            }
            let (f, df, ddf) = model_power(t, alpha);
            value += coef * f + sign * (spec.c * eps * xn + 2.0 * d0 * eps);
            gradient[n - 1] = coef * df + sign * spec.c * eps;
            hessian[n * n - 1] = coef * ddf;
            value
        }
        BarrierKind::LowerStep3 | BarrierKind::UpperStep3 => {
            let k = spec.theta_root();
            let (q, coef, t) = match spec.kind {
                BarrierKind::LowerStep3 => (
                    0.5 - eps * spec.c_prime * k,
                    1.0 + eps * spec.c_double_prime * k * (1.0 + alpha) * (2.0 + alpha),
                    xn,
                ),
                _ => (
                    0.5 + eps * spec.c_prime * k,
                    1.0 - spec.c_double_prime * eps * k,
                    xn - d0 * eps,
                ),
            };
            let (f, df, ddf) = model_power(t, alpha);
            let mut value = coef * f + 0.5 * eps * spec.a0 * xn;
            let mut gn = coef * df + 0.5 * eps * spec.a0;
            let mut hnn = coef * ddf;
            for i in 0..n - 1 {
                let y = x[i] + eps * spec.a[i] * xn;
                let ea = eps * spec.a[i];
                value += q * y * y;
                gradient[i] = 2.0 * q * y;
                gn += 2.0 * q * y * ea;
                hessian[i * n + i] = 2.0 * q;
                hessian[i * n + n - 1] = 2.0 * q * ea;
                hessian[(n - 1) * n + i] = 2.0 * q * ea;
                hnn += 2.0 * q * ea * ea;
            }
            gradient[n - 1] = gn;
            hessian[n * n - 1] = hnn;
            value
        }
        BarrierKind::GrushinWbar => {
            let mut value = spec.c * xn;
            for i in 0..n - 1 {
                value += 4.0 * x[i] * x[i];
                gradient[i] = 8.0 * x[i];
                hessian[i * n + i] = 8.0;
            }
            let m = 8.0 * n as f64;
            let p = xn.powf(alpha);
            value -= m * xn * xn * p;
            gradient[n - 1] = spec.c - m * (2.0 + alpha) * xn * p;
            hessian[n * n - 1] = -m * (2.0 + alpha) * (1.0 + alpha) * p;
            value
        }
    };
    Ok(BarrierValue {
        value,
        gradient,
        hessian,
    })
}

/// The closed-form value of `det D²` for the Monge-Ampère barriers. For the
/// step 1 kinds these are `(1−δ₀ε)((x_n−δ₀ε)⁺)^α` and `(1+δ₀ε)x_n^α`.
pub fn claimed_determinant(spec: &BarrierSpec, x: &[f64]) -> Result<f64> {
    spec.validate()?;
    let n = spec.n;
    let (eps, d0, alpha) = (spec.eps, spec.delta0, spec.alpha);
    let xn = x[n - 1];
    let shifted = (xn - d0 * eps).max(0.0).powf(alpha);
    let k = spec.theta_root();
    let m = (n - 1) as i32;
    Ok(match spec.kind {
        BarrierKind::UpperStep1 => (1.0 - d0 * eps) * shifted,
        BarrierKind::LowerStep1 => (1.0 + d0 * eps) * xn.powf(alpha),
        BarrierKind::LowerStep3 => {
            (1.0 - 2.0 * eps * spec.c_prime * k).powi(m)
                * (1.0 + eps * spec.c_double_prime * k * (1.0 + alpha) * (2.0 + alpha))
                * xn.powf(alpha)
        }
        BarrierKind::UpperStep3 => {
            (1.0 + 2.0 * eps * spec.c_prime * k).powi(m)
                * (1.0 - spec.c_double_prime * eps * k)
                * shifted
        }
        BarrierKind::GrushinWbar => {
            return Err(Error::param(
                "grushin-wbar is checked through the Grushin operator",
            ));
        }
    })
}

/// Hadamard bound `∏ᵢ |rowᵢ|`, the roundoff scale of a determinant.
fn hadamard(m: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|i| {
            m[i * n..(i + 1) * n]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
        })
        .product()
}

/// Largest `|det D²ū − claimed| / ∏|rows of D²ū|` over the points.
pub fn verify_barrier_determinant(spec: &BarrierSpec, points: &[Vec<f64>]) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in points {
        let b = eval_barrier(spec, p)?;
        let claimed = claimed_determinant(spec, p)?;
        let scale = hadamard(&b.hessian, spec.n)
            .max(claimed.abs())
            .max(f64::MIN_POSITIVE);
        worst = worst.max((b.det() - claimed).abs() / scale);
    }
    Ok(worst)
}

/// Slack in the comparison the proof draws from the barrier, non-negative
/// when it holds:
///
/// * step 1 and step 3 lower: `det D²u̲ − (1+δ₀ε)x_n^α`;
/// * step 1 and step 3 upper: `(1−δ₀ε)((x_n−δ₀ε)⁺)^α − det D²ū`;
/// * `grushin-wbar`: `−L w̄` with the identity tangential coefficients.
pub fn comparison_margin(spec: &BarrierSpec, x: &[f64]) -> Result<f64> {
    let b = eval_barrier(spec, x)?;
    let n = spec.n;
    let (eps, d0, alpha) = (spec.eps, spec.delta0, spec.alpha);
    let xn = x[n - 1];
    Ok(match spec.kind {
        BarrierKind::LowerStep1 | BarrierKind::LowerStep3 => {
            b.det() - (1.0 + d0 * eps) * xn.powf(alpha)
        }
        BarrierKind::UpperStep1 | BarrierKind::UpperStep3 => {
            (1.0 - d0 * eps) * (xn - d0 * eps).max(0.0).powf(alpha) - b.det()
        }
        BarrierKind::GrushinWbar => {
            let mut id = vec![0.0; (n - 1) * (n - 1)];
            for i in 0..n - 1 {
                id[i * (n - 1) + i] = 1.0;
            }
            -grushin_operator(&b, &id, xn, alpha)
        }
    })
}

/// `x_n^α Σ a^{ij} ∂_ij w + ∂_nn w` applied to a closed-form Hessian, with
/// `a` the row-major tangential coefficient block.
pub fn grushin_operator(w: &BarrierValue, a: &[f64], xn: f64, alpha: f64) -> f64 {
    let n = w.gradient.len();
    let m = n - 1;
    let mut tangential = 0.0;
    for i in 0..m {
        for j in 0..m {
            tangential += a[i * m + j] * w.hessian[i * n + j];
        }
    }
    xn.max(0.0).powf(alpha) * tangential + w.hessian[n * n - 1]
}

/// `det(A+λI) − det A − nλ(det A)^{(n−1)/n}` for a symmetric positive
/// semidefinite `A` (row-major, `n × n`).
pub fn matrix_lower_bound_check(a: &[f64], n: usize, lambda: f64) -> Result<f64> {
    if n == 0 || a.len() != n * n {
        return Err(Error::Input(format!("expected a {n}×{n} matrix")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::param("lambda must be non-negative"));
    }
    let norm: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    for i in 0..n {
        for j in 0..i {
            if (a[i * n + j] - a[j * n + i]).abs() > 1e-12 * norm {
                return Err(Error::Input("matrix is not symmetric".into()));
            }
        }
    }
    let min_eig = linalg::sym_eigenvalues(a, n)[0];
    if min_eig < -1e-12 * norm {
        return Err(Error::NotPsd(min_eig));
    }
    let mut shifted = a.to_vec();
    for i in 0..n {
        shifted[i * n + i] += lambda;
    }
    let d = linalg::det(a, n);
    let root = d.max(0.0).powf((n - 1) as f64 / n as f64);
    Ok(linalg::det(&shifted, n) - d - n as f64 * lambda * root)
}

/// Nodal comparison of a solution against the step 1 barrier pair centred
/// at `x0`, on the grid nodes with `x_n ≥ 0` and `U_0 < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub nodes: usize,
    pub upper_violations: usize,
    pub lower_violations: usize,
    /// `min (ū − u)`.
    pub upper_margin: f64,
    /// `min (u − u̲)`.
    pub lower_margin: f64,
    /// Smaller of the two margins over nodes on `x_n = 0`.
    pub floor_margin: f64,
    /// `max |v|` with `v = (u − U_0)/ε` (unscaled when `ε = 0`).
    pub max_abs_v: f64,
    /// Smallest `C ≥ 0` with `|v| ≤ 2δ₀ + C x_n` at the sampled nodes.
    pub measured_c: f64,
}

impl DominationReport {
    pub fn holds(&self) -> bool {
        self.upper_violations == 0 && self.lower_violations == 0
    }
}

pub fn barrier_domination_probe(u: &ScalarField, spec: &BarrierSpec) -> Result<DominationReport> {
    if !matches!(spec.kind, BarrierKind::UpperStep1 | BarrierKind::LowerStep1) {
        return Err(Error::param("domination probe uses the step 1 barriers"));
    }
    let grid = u.grid();
    if grid.dim() != spec.n {
        return Err(Error::param(format!(
            "field is {}-dimensional, spec has n = {}",
            grid.dim(),
            spec.n
        )));
    }
    let upper = BarrierSpec {
        kind: BarrierKind::UpperStep1,
        ..spec.clone()
    };
    let lower = BarrierSpec {
        kind: BarrierKind::LowerStep1,
        ..spec.clone()
    };
    let scale = if spec.eps > 0.0 { spec.eps } else { 1.0 };
    let mut report = DominationReport {
        nodes: 0,
        upper_violations: 0,
        lower_violations: 0,
        upper_margin: f64::INFINITY,
        lower_margin: f64::INFINITY,
        floor_margin: f64::INFINITY,
        max_abs_v: 0.0,
        measured_c: 0.0,
    };
    let n = spec.n;
    for (node, &value) in u.values().iter().enumerate() {
        let x = grid.node(node);
        let xn = x[n - 1];
        let base = crate::model_solution(&x, spec.alpha);
        if xn < 0.0 || base >= 1.0 {
            continue;
        }
        report.nodes += 1;
        let up = eval_barrier(&upper, &x)?.value - value;
        let lo = value - eval_barrier(&lower, &x)?.value;
        report.upper_violations += (up < 0.0) as usize;
        report.lower_violations += (lo < 0.0) as usize;
        report.upper_margin = report.upper_margin.min(up);
        report.lower_margin = report.lower_margin.min(lo);
        if xn == 0.0 {
            report.floor_margin = report.floor_margin.min(up.min(lo));
        }
        let v = ((value - base) / scale).abs();
        report.max_abs_v = report.max_abs_v.max(v);
        if xn > 0.0 {
            report.measured_c = report.measured_c.max((v - 2.0 * spec.delta0) / xn);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    All,
    Determinant,
    Step3,
    Matrix,
    Grushin,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "determinant" => Suite::Determinant,
            "step3" => Suite::Step3,
            "matrix" => Suite::Matrix,
            "grushin" => Suite::Grushin,
            _ => return Err(Error::Input(format!("unknown suite `{s}`"))),
        })
    }
}

/// One line of the property suite: the worst value of a check over its
/// samples against the tolerance it must meet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub check: String,
    pub n: usize,
    pub alpha: f64,
    pub params: String,
    pub samples: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub const SUITE_ALPHAS: [f64; 3] = [0.5, 1.0, 2.0];
pub const SUITE_DIMS: [usize; 2] = [2, 3];
pub const SUITE_POINTS: usize = 1000;
pub const SUITE_MATRICES: usize = 10_000;
/// `(ε, δ₀)` grid covering `[0, 0.2]²`.
pub const SUITE_PARAMS: [f64; 5] = [0.0, 0.05, 0.1, 0.15, 0.2];

/// Random points in `[−1, 1]^{n−1} × [0, 1]`.
pub fn half_space_samples(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let mut p: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
            p.push(rng.random_range(0.0..1.0));
            p
        })
        .collect()
}

/// Random points in the half ball `B_1 ∩ {x_n > 0}`.
fn half_ball_samples(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut p: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
        p.push(rng.random_range(0.0..1.0));
        if p.iter().map(|v| v * v).sum::<f64>() < 1.0 {
            out.push(p);
        }
    }
    out
}

/// `G Gᵀ` with a random `n × m` factor, `m ∈ [1, n+2]`, and a random scale,
/// so rank-deficient and ill-conditioned samples occur.
pub fn wishart_sample(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = rng.random_range(1..=n + 2);
    let g: Vec<f64> = (0..n * m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = scale * (0..m).map(|k| g[i * m + k] * g[j * m + k]).sum::<f64>();
        }
    }
    a
}

pub const DETERMINANT_TOL: f64 = 1e-12;
pub const MATRIX_TOL: f64 = 1e-12;

/// Step 3 constants used by the suite: `C' = 4`, `C'' = 30`, `θ₀ = 0.01`,
/// `a0 = 1` and a fixed tilt `a'`.
pub fn step3_spec(kind: BarrierKind, n: usize, alpha: f64, eps: f64, delta0: f64) -> BarrierSpec {
    let mut spec = BarrierSpec::new(kind, n, alpha);
    spec.eps = eps;
    spec.delta0 = delta0;
    spec.c_prime = 4.0;
    spec.c_double_prime = 30.0;
    spec.theta0 = 0.01;
    spec.a0 = 1.0;
    spec.a = (0..n - 1).map(|i| 0.5 - 0.75 * i as f64).collect();
    spec
}

pub fn run_suite(suite: Suite, seed: u64, eps0: f64) -> Result<Vec<SuiteRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let wants = |s: Suite| suite == Suite::All || suite == s;
    if wants(Suite::Determinant) {
        for kind in [BarrierKind::UpperStep1, BarrierKind::LowerStep1] {
            for &n in &SUITE_DIMS {
                for &alpha in &SUITE_ALPHAS {
                    let points = half_space_samples(n, SUITE_POINTS, &mut rng);
                    let mut worst = 0.0f64;
                    let mut checked = 0;
                    for &eps in &SUITE_PARAMS {
                        for &delta0 in &SUITE_PARAMS {
                            let mut spec = BarrierSpec::new(kind, n, alpha);
                            spec.eps = eps;
                            spec.delta0 = delta0;
                            spec.c = 1.0;
                            spec.eps0 = eps0;
                            spec.x0 = (0..n - 1).map(|i| 0.25 * (i as f64 + 1.0)).collect();
                            worst = worst.max(verify_barrier_determinant(&spec, &points)?);
                            checked += points.len();
                        }
                    }
                    rows.push(SuiteRow {
                        check: format!("{}-determinant", kind.name()),
                        n,
                        alpha,
                        params: "eps,delta0 in [0,0.2]^2".into(),
                        samples: checked,
                        worst,
                        tolerance: DETERMINANT_TOL,
                        pass: worst <= DETERMINANT_TOL,
                    });
                }
            }
        }
    }
    if wants(Suite::Step3) {
        for kind in [BarrierKind::LowerStep3, BarrierKind::UpperStep3] {
            for &n in &SUITE_DIMS {
                for &alpha in &SUITE_ALPHAS {
                    let points = half_space_samples(n, SUITE_POINTS, &mut rng);
                    let mut identity = 0.0f64;
                    let mut margin = f64::INFINITY;
                    let mut checked = 0;
                    for eps in [0.01, 0.02, 0.03, 0.04, 0.05]
                        .into_iter()
                        .filter(|e| *e <= eps0)
                    {
                        for delta0 in [0.0, 0.05, 0.1] {
                            let mut spec = step3_spec(kind, n, alpha, eps, delta0);
                            spec.eps0 = eps0;
                            identity = identity.max(verify_barrier_determinant(&spec, &points)?);
                            for p in &points {
                                let b = eval_barrier(&spec, p)?;
                                let s = hadamard(&b.hessian, n).max(1.0);
                                margin = margin.min(comparison_margin(&spec, p)? / s);
                            }
                            checked += points.len();
                        }
                    }
                    rows.push(SuiteRow {
                        check: format!("{}-determinant", kind.name()),
                        n,
                        alpha,
                        params: "eps<=eps0, delta0 in {0,0.05,0.1}".into(),
                        samples: checked,
                        worst: identity,
                        tolerance: DETERMINANT_TOL,
                        pass: identity <= DETERMINANT_TOL,
                    });
                    rows.push(SuiteRow {
                        check: format!("{}-comparison", kind.name()),
                        n,
                        alpha,
                        params: "C'=4, C''=30, theta0=0.01".into(),
                        samples: checked,
                        worst: -margin,
                        tolerance: DETERMINANT_TOL,
                        pass: checked > 0 && -margin <= DETERMINANT_TOL,
                    });
                }
            }
        }
    }
    if wants(Suite::Matrix) {
        for n in 2..=4 {
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..SUITE_MATRICES {
                let a = wishart_sample(n, &mut rng);
                let lambda = rng.random_range(0.0..10.0);
                let margin = matrix_lower_bound_check(&a, n, lambda)?;
                let mut shifted = a.clone();
                for i in 0..n {
                    shifted[i * n + i] += lambda;
                }
                let scale = hadamard(&shifted, n).max(f64::MIN_POSITIVE);
                worst = worst.max(-margin / scale);
            }
            rows.push(SuiteRow {
                check: "matrix-lower-bound".into(),
                n,
                alpha: 0.0,
                params: "wishart, lambda in [0,10]".into(),
                samples: SUITE_MATRICES,
                worst,
                tolerance: MATRIX_TOL,
                pass: worst <= MATRIX_TOL,
            });
        }
    }
    if wants(Suite::Grushin) {
        for &n in &SUITE_DIMS {
            for &alpha in &SUITE_ALPHAS {
                let points = half_ball_samples(n, SUITE_POINTS, &mut rng);
                let mut spec = BarrierSpec::new(BarrierKind::GrushinWbar, n, alpha);
                spec.c = 16.0 * n as f64;
                let mut worst = f64::NEG_INFINITY;
                for p in &points {
                    worst = worst.max(-comparison_margin(&spec, p)?);
                }
                rows.push(SuiteRow {
                    check: "grushin-wbar-supersolution".into(),
                    n,
                    alpha,
                    params: format!("C={}", spec.c),
                    samples: points.len(),
                    worst,
                    tolerance: 0.0,
                    pass: worst <= 0.0,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use alloc::sync::Arc;
    use proptest::prelude::*;

    fn step1(kind: BarrierKind, n: usize, alpha: f64, eps: f64, delta0: f64) -> BarrierSpec {
        let mut s = BarrierSpec::new(kind, n, alpha);
        s.eps = eps;
        s.delta0 = delta0;
        s.c = 2.0;
        s.x0 = vec![0.3; n - 1];
        s
    }

    fn fd_check(spec: &BarrierSpec, x: &[f64]) {
        let n = spec.n;
        let h = 1e-4;
        let b = eval_barrier(spec, x).unwrap();
        let at = |p: &[f64]| eval_barrier(spec, p).unwrap();
        for i in 0..n {
            let mut p = x.to_vec();
            p[i] += h;
            let plus = at(&p);
            p[i] -= 2.0 * h;
            let minus = at(&p);
            let g = (plus.value - minus.value) / (2.0 * h);
            assert!(
                (g - b.gradient[i]).abs() < 1e-6 * (1.0 + g.abs()),
                "{:?} grad {i}: {g} vs {}",
                spec.kind,
                b.gradient[i]
            );
            for j in 0..n {
                let hij = (plus.gradient[j] - minus.gradient[j]) / (2.0 * h);
                assert!(
                    (hij - b.hessian[i * n + j]).abs() < 1e-6 * (1.0 + b.hessian[i * n + j].abs()),
                    "{:?} hess {i}{j}: {hij} vs {}",
                    spec.kind,
                    b.hessian[i * n + j]
                );
            }
        }
    }

    #[test]
    fn closed_forms_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in BarrierKind::ALL {
            for n in [2, 3] {
                for alpha in [0.5, 1.0, 2.0] {
                    let mut spec = step3_spec(kind, n, alpha, 0.04, 0.1);
                    spec.c = 2.0;
                    spec.x0 = vec![-0.2; n - 1];
                    for mut p in half_space_samples(n, 20, &mut rng) {
                        // keep the stencil off the kinks at x_n = 0 and x_n = δ₀ε
                        p[n - 1] = 0.05 + 0.9 * p[n - 1];
                        if (p[n - 1] - 0.004).abs() < 1e-3 {
                            continue;
                        }
                        fd_check(&spec, &p);
                    }
                }
            }
        }
    }

    #[test]
    fn upper_step1_collapses_to_model() {
        let spec = BarrierSpec::new(BarrierKind::UpperStep1, 2, 1.0);
        for x in [[0.0, 0.0], [0.7, 0.2], [-0.4, 0.9]] {
            let v = eval_barrier(&spec, &x).unwrap().value;
            assert_eq!(v, crate::model_solution(&x, 1.0));
        }
    }

    #[test]
    fn upper_step1_reference_value() {
        // ε = 0.01, δ₀ = 0.1, C = 1, x₀' = 0, x = (0.1, 0.3), α = 1, n = 2
        let mut spec = BarrierSpec::new(BarrierKind::UpperStep1, 2, 1.0);
        spec.eps = 0.01;
        spec.delta0 = 0.1;
        spec.c = 1.0;
        let v = eval_barrier(&spec, &[0.1, 0.3]).unwrap().value;
        assert!((v - 0.01463680576163793).abs() < 1e-15, "{v}");
    }

    #[test]
    fn grushin_barrier_vanishes_at_origin() {
        let mut spec = BarrierSpec::new(BarrierKind::GrushinWbar, 3, 1.0);
        spec.c = 48.0;
        assert_eq!(eval_barrier(&spec, &[0.0, 0.0, 0.0]).unwrap().value, 0.0);
        for x in [[0.5, -0.5, 0.0], [0.1, 0.9, 0.0]] {
            assert!(eval_barrier(&spec, &x).unwrap().value >= 0.0);
        }
    }

    #[test]
    fn grushin_operator_closed_form() {
        for (n, alpha) in [(2, 0.5), (3, 2.0)] {
            let spec = BarrierSpec::new(BarrierKind::GrushinWbar, n, alpha);
            let mut x = vec![0.2; n];
            x[n - 1] = 0.6;
            let p = 0.6f64.powf(alpha);
            let expected = 8.0 * p * ((n - 1) as f64 - n as f64 * (1.0 + alpha) * (2.0 + alpha));
            assert!((comparison_margin(&spec, &x).unwrap() + expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_eps_determinant_is_model() {
        let spec = BarrierSpec::new(BarrierKind::UpperStep1, 2, 1.5);
        for xn in [0.0, 0.3, 1.0] {
            let b = eval_barrier(&spec, &[0.4, xn]).unwrap();
            assert_eq!(b.det(), xn.powf(1.5));
        }
    }

    #[test]
    fn determinant_identities_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points = half_space_samples(2, 1000, &mut rng);
        for kind in [BarrierKind::UpperStep1, BarrierKind::LowerStep1] {
            let v = verify_barrier_determinant(&step1(kind, 2, 1.0, 0.01, 0.1), &points).unwrap();
            assert!(v <= 1e-12, "{v}");
        }
    }

    #[test]
    fn unknown_kind_is_spec_error() {
        assert!(matches!(
            "upper-step2".parse::<BarrierKind>(),
            Err(Error::Spec(_))
        ));
        for k in BarrierKind::ALL {
            assert_eq!(k.name().parse::<BarrierKind>().unwrap(), k);
        }
    }

    #[test]
    fn matrix_examples() {
        let id = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(matrix_lower_bound_check(&id, 2, 1.0).unwrap(), 1.0);
        assert_eq!(matrix_lower_bound_check(&id, 2, 0.0).unwrap(), 0.0);
        let d = [1.0, 0.0, 0.0, 4.0];
        assert!((matrix_lower_bound_check(&d, 2, 0.5).unwrap() - 0.75).abs() < 1e-14);
        assert!(matches!(
            matrix_lower_bound_check(&[1.0, 0.0, 0.0, -1.0], 2, 1.0),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn model_solution_is_dominated() {
        let grid = Arc::new(Grid::uniform(&[-1.5, 0.0], &[1.5, 1.5], &[31, 16]).unwrap());
        let u = ScalarField::sample(|x| crate::model_solution(x, 1.0), &grid).unwrap();
        let mut spec = step1(BarrierKind::UpperStep1, 2, 1.0, 0.01, 0.1);
        spec.x0 = vec![0.0];
        spec.c = 20.0;
        let r = barrier_domination_probe(&u, &spec).unwrap();
        assert!(r.holds(), "{r:?}");
        assert!(r.floor_margin >= 2.0 * 0.1 * 0.01 - 1e-15);
        assert_eq!(r.measured_c, 0.0);
    }

    #[test]
    fn violation_is_detected() {
        let grid = Arc::new(Grid::uniform(&[-1.5, 0.0], &[1.5, 1.5], &[31, 16]).unwrap());
        let u = ScalarField::sample(|x| crate::model_solution(x, 1.0) + 0.2 * x[1], &grid).unwrap();
        let spec = step1(BarrierKind::UpperStep1, 2, 1.0, 0.05, 0.1);
        let r = barrier_domination_probe(&u, &spec).unwrap();
        assert!(r.upper_violations > 0);
        assert!(r.measured_c > 3.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn matrix_inequality_on_wishart(seed in any::<u64>(), n in 2usize..=4, lambda in 0.0f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = wishart_sample(n, &mut rng);
            let margin = matrix_lower_bound_check(&a, n, lambda).unwrap();
            let mut shifted = a.clone();
            for i in 0..n {
                shifted[i * n + i] += lambda;
            }
            prop_assert!(margin >= -1e-12 * hadamard(&shifted, n));
        }
    }

    proptest! {
        #[test]
        fn step1_identity_over_parameters(
            eps in 0.0f64..0.2,
            delta0 in 0.0f64..0.2,
            alpha in prop::sample::select(vec![0.5, 1.0, 2.0]),
            n in 2usize..=3,
            seed in any::<u64>(),
        ) {
            prop_assume!((16.0 * eps - 1.0).abs() > 1e-6);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points = half_space_samples(n, 50, &mut rng);
            for kind in [BarrierKind::UpperStep1, BarrierKind::LowerStep1] {
                let v = verify_barrier_determinant(&step1(kind, n, alpha, eps, delta0), &points).unwrap();
                prop_assert!(v <= 1e-12, "{:?} {}", kind, v);
            }
        }
    }
}
