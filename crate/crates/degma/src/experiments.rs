//! The computation behind each experiment kind. Every experiment returns its
//! summary metrics, tables and field snapshots; the runner persists them.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;
use std::time::Instant;

use degma_core::analysis::{
    convergence_order, fit_boundary_expansion, fit_normal_exponent, metric_equivalence_scan,
    quasi_triangle_constant, BoxRegion,
};
use degma_core::barriers::run_suite;
use degma_core::eigen::{
    boundary_factor, extrapolated_eigenvalue, regularity_trend, solve_eigen, EigenReport,
};
use degma_core::fields::{Grid, ScalarField, Scheme};
use degma_core::geometry::ConvexDomain;
use degma_core::grushin::{
    fit_tangent_profile, grushin_residual, random_boundary_data, solve_grushin, GrushinProblem,
};
use degma_core::ma_solver::{solve_dirichlet, MaProblem, PointFn, Rhs};
use degma_core::model_solution;
use degma_core::transforms::{eigen_pipeline, HodographWindow, PipelineReport};

use crate::config::*;
use crate::error::{Result, StageExt};
use crate::io::{number, Table};
use crate::plot::PlotKind;

#[derive(Debug, Default)]
pub struct Outcome {
    pub summary: BTreeMap<String, f64>,
    pub wall_times: BTreeMap<String, f64>,
    /// File stem, table and the plot to draw from it.
    pub tables: Vec<(String, Table, Option<PlotKind>)>,
    pub fields: Vec<(String, ScalarField)>,
}

impl Outcome {
    /// Non-finite values are left out of the summary.
    fn metric(&mut self, key: impl Into<String>, value: f64) {
        let key = key.into();
        if value.is_finite() {
            self.summary.insert(key, value);
        } else {
            log::warn!("metric `{key}` is not finite ({value})");
        }
    }

    fn table(&mut self, stem: &str, table: Table, plot: Option<PlotKind>) {
        self.tables.push((stem.to_string(), table, plot));
    }
}

/// Runs `f` on every ladder entry, on up to `threads` threads, returning the
/// results in ladder order.
fn map_ladder<T: Send>(
    ladder: &[usize],
    threads: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    if threads <= 1 || ladder.len() <= 1 {
        return ladder.iter().map(|&n| f(n)).collect();
    }
    let mut out: Vec<Option<Result<T>>> = ladder.iter().map(|_| None).collect();
    for (chunk_in, chunk_out) in ladder.chunks(threads).zip(out.chunks_mut(threads)) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk_in
                .iter()
                .map(|&n| {
                    let f = &f;
                    s.spawn(move || f(n))
                })
                .collect();
            for (slot, h) in chunk_out.iter_mut().zip(handles) {
                *slot = Some(h.join().expect("ladder worker panicked"));
            }
        });
    }
    out.into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

fn square_grid(domain: &ConvexDomain, n: usize) -> degma_core::Result<Arc<Grid>> {
    let (lo, hi) = domain.bounds();
    Ok(Arc::new(Grid::uniform(&lo, &hi, &vec![n; lo.len()])?))
}

fn spacing(grid: &Grid) -> f64 {
    grid.spacing(0).unwrap_or(f64::NAN)
}

/// Subsamples a 2D field so that a heatmap has at most `max_nodes` per axis.
fn heatmap_table(u: &ScalarField, max_nodes: usize) -> Table {
    let grid = u.grid();
    let shape = grid.shape();
    let step = shape
        .iter()
        .map(|s| s.div_ceil(max_nodes))
        .max()
        .unwrap_or(1)
        .max(1);
    let mut t = Table::new(&["x", "y", "value"]);
    for j in (0..shape[1]).step_by(step) {
        for i in (0..shape[0]).step_by(step) {
            let p = [grid.axis(0)[i], grid.axis(1)[j]];
            t.push_numbers(&[p[0], p[1], u.at(&[i, j])]);
        }
    }
    t
}

fn record_order(out: &mut Outcome, key: &str, pairs: &[(f64, f64)]) -> Result<()> {
    if pairs.len() >= 3 {
        let order = convergence_order(pairs).stage(|| format!("{key} order"))?;
        out.metric(key, order.slope);
    }
    Ok(())
}

pub fn ma_solve(c: &ExperimentConfig, p: &MaSolvePayload, threads: usize) -> Result<Outcome> {
    let domain = p.domain.build().stage(|| "domain".into())?;
    let alpha = p.alpha;
    let exact = p.boundary == BoundaryData::Model
        && matches!(p.domain, DomainConfig::Strip { .. })
        && p.g == 1.0;
    let phi: PointFn = match p.boundary {
        BoundaryData::Model => Arc::new(move |x: &[f64]| model_solution(x, alpha)),
        BoundaryData::Zero => Arc::new(|_: &[f64]| 0.0),
    };
    let runs = map_ladder(&c.ladder, threads, |n| {
        let grid = square_grid(&domain, n).stage(|| format!("grid {n}"))?;
        let problem = MaProblem {
            domain: domain.clone(),
            alpha,
            g: Rhs::Const(p.g),
            phi: phi.clone(),
            scheme: p.scheme,
            grid: grid.clone(),
        };
        let clock = Instant::now();
        let mut rep =
            solve_dirichlet(&problem, p.tol, p.max_iters).stage(|| format!("solve {n}"))?;
        rep.wall_time = clock.elapsed().as_secs_f64();
        Ok((n, rep))
    })?;
    let mut out = Outcome::default();
    let mut conv = Table::new(&["h", "max_error"]);
    let mut levels = Table::new(&["nodes", "h", "iterations", "final_residual", "max_error"]);
    let mut pairs = Vec::new();
    for (n, rep) in &runs {
        let grid = rep.solution.grid();
        let h = spacing(grid);
        let err = if exact {
            (0..grid.len())
                .map(|i| (rep.solution.values()[i] - model_solution(&grid.node(i), alpha)).abs())
                .fold(0.0, f64::max)
        } else {
            f64::NAN
        };
        out.wall_times.insert(format!("solve_{n}"), rep.wall_time);
        out.metric(format!("iterations_{n}"), rep.iterations() as f64);
        out.metric(format!("residual_{n}"), rep.final_residual);
        levels.push_numbers(&[
            *n as f64,
            h,
            rep.iterations() as f64,
            rep.final_residual,
            err,
        ]);
        if exact {
            out.metric(format!("error_{n}"), err);
            conv.push_numbers(&[h, err]);
            pairs.push((h, err));
        }
    }
    record_order(&mut out, "slope", &pairs)?;
    out.table("levels", levels, None);
    if exact && pairs.len() >= 2 {
        out.table("convergence", conv, Some(PlotKind::Loglog));
    }
    if let Some((_, finest)) = runs.last() {
        let u = &finest.solution;
        let grid = u.grid();
        let shape = grid.shape();
        let i = shape[0] / 2;
        let mut profile = Table::new(&["x_n", "u", "model"]);
        for j in 0..shape[1] {
            let x = [grid.axis(0)[i], grid.axis(1)[j]];
            profile.push_numbers(&[x[1], u.at(&[i, j]), model_solution(&x, alpha)]);
        }
        out.table("profile", profile, Some(PlotKind::Profile));
        out.fields.push(("solution".into(), u.clone()));
    }
    Ok(out)
}

/// Largest `|w|/x_n` over `B_{1/2}⁺` relative to `‖w‖_∞`.
fn linear_bound_constant(w: &ScalarField) -> f64 {
    let grid = w.grid();
    let sup = w.max_abs();
    if sup == 0.0 {
        return 0.0;
    }
    let mut c = 0.0f64;
    for (i, v) in w.values().iter().enumerate() {
        let x = grid.node(i);
        let xn = x[x.len() - 1];
        if xn > 0.0 && x.iter().map(|t| t * t).sum::<f64>() <= 0.25 {
            c = c.max(v.abs() / sup / xn);
        }
    }
    c
}

pub fn grushin(c: &ExperimentConfig, p: &GrushinPayload, threads: usize) -> Result<Outcome> {
    let alpha = p.alpha;
    let exact: Option<fn(&[f64]) -> f64> = match p.case {
        GrushinCase::X1Xn => Some(|x| x[0] * x[1]),
        GrushinCase::X1sqXn => Some(|x| x[0] * x[0] * x[1]),
        GrushinCase::Random => None,
    };
    let seed = c.seed;
    let runs = map_ladder(&c.ladder, threads, |n| {
        let phi: PointFn = match exact {
            Some(f) => Arc::new(f),
            None => random_boundary_data(2, seed),
        };
        let mut problem =
            GrushinProblem::half_ball(2, alpha, n, phi).stage(|| format!("grushin problem {n}"))?;
        if p.case == GrushinCase::X1sqXn {
            problem = problem.with_forcing(Rhs::Function(Arc::new(|x: &[f64]| 2.0 * x[1])));
        }
        let clock = Instant::now();
        let v = solve_grushin(&problem, p.tol).stage(|| format!("grushin solve {n}"))?;
        let time = clock.elapsed().as_secs_f64();
        let residual = grushin_residual(&v, &problem).stage(|| format!("grushin residual {n}"))?;
        let fit = match p.case {
            GrushinCase::Random => Some(
                fit_tangent_profile(&v, alpha, p.fit_radius)
                    .stage(|| format!("tangent fit {n}"))?,
            ),
            _ => None,
        };
        Ok((n, v, residual, fit, time))
    })?;
    let mut out = Outcome::default();
    let mut levels = Table::new(&[
        "nodes",
        "h",
        "residual",
        "max_error",
        "tangent_slope",
        "a0",
        "bound_c",
    ]);
    let mut pairs = Vec::new();
    for (n, v, residual, fit, time) in &runs {
        let grid = v.grid();
        let h = spacing(grid);
        out.wall_times.insert(format!("solve_{n}"), *time);
        out.metric(format!("residual_{n}"), *residual);
        let bound_c = linear_bound_constant(v);
        out.metric(format!("bound_c_{n}"), bound_c);
        let err = match exact {
            Some(f) => {
                let e = (0..grid.len())
                    .map(|i| (v.values()[i] - f(&grid.node(i))).abs())
                    .fold(0.0, f64::max);
                out.metric(format!("error_{n}"), e);
                pairs.push((h, e));
                e
            }
            None => f64::NAN,
        };
        let (slope, a0) = match fit {
            Some(f) => {
                out.metric(format!("tangent_slope_{n}"), f.slope);
                out.metric(format!("a0_{n}"), f.a0);
                out.metric(format!("a1_{n}"), f.a_prime[0]);
                (f.slope, f.a0)
            }
            None => (f64::NAN, f64::NAN),
        };
        levels.push_numbers(&[*n as f64, h, *residual, err, slope, a0, bound_c]);
    }
    if pairs.iter().all(|(_, e)| *e > 0.0) {
        record_order(&mut out, "slope", &pairs)?;
        if pairs.len() >= 2 {
            let mut conv = Table::new(&["h", "max_error"]);
            pairs.iter().for_each(|(h, e)| conv.push_numbers(&[*h, *e]));
            out.table("convergence", conv, Some(PlotKind::Loglog));
        }
    }
    out.table("levels", levels, None);
    if let Some((_, v, ..)) = runs.last() {
        out.fields.push(("solution".into(), v.clone()));
    }
    Ok(out)
}

fn disk_eigen(radius: f64, n: usize, tol: f64, max_outer: usize) -> Result<(EigenReport, f64)> {
    let domain = ConvexDomain::disk(radius).stage(|| "domain".into())?;
    let grid = square_grid(&domain, n).stage(|| format!("grid {n}"))?;
    let clock = Instant::now();
    let rep = solve_eigen(&domain, &grid, tol, max_outer)
        .stage(|| format!("eigen {n} on radius {radius}"))?;
    Ok((rep, clock.elapsed().as_secs_f64()))
}

pub fn eigen(c: &ExperimentConfig, p: &EigenPayload, threads: usize) -> Result<Outcome> {
    let mut jobs: Vec<(f64, usize)> = c.ladder.iter().map(|&n| (p.radius, n)).collect();
    let finest = *c.ladder.last().expect("validated ladder");
    if p.scaling_check {
        jobs.push((2.0 * p.radius, finest));
    }
    let indices: Vec<usize> = (0..jobs.len()).collect();
    let mut runs = map_ladder(&indices, threads, |k| {
        disk_eigen(jobs[k].0, jobs[k].1, p.tol, p.max_outer)
    })?;
    let mut out = Outcome::default();
    let scaled = if p.scaling_check { runs.pop() } else { None };
    let mut levels = Table::new(&["nodes", "h", "lambda", "residual", "iterations"]);
    for ((rep, time), n) in runs.iter().zip(&c.ladder) {
        out.wall_times.insert(format!("eigen_{n}"), *time);
        out.metric(format!("lambda_{n}"), rep.lambda);
        out.metric(format!("residual_{n}"), rep.final_residual());
        out.metric(format!("iterations_{n}"), rep.iterations as f64);
        levels.push_numbers(&[
            *n as f64,
            rep.spacing(),
            rep.lambda,
            rep.final_residual(),
            rep.iterations as f64,
        ]);
    }
    out.table("levels", levels, None);
    let (fine, _) = runs.last().expect("validated ladder");
    if runs.len() >= 2 {
        let (coarse, _) = &runs[runs.len() - 2];
        if let Ok(l) = extrapolated_eigenvalue(coarse, fine) {
            out.metric("lambda_extrapolated", l);
        }
        let trend = regularity_trend(coarse, fine, p.beta, p.holder_budget, c.seed)
            .stage(|| "regularity probe".into())?;
        out.metric("seminorm_fine", trend.estimate);
        out.metric("seminorm_trend", trend.refinement_trend.unwrap_or(f64::NAN));
    }
    if let Some((rep, time)) = scaled {
        out.wall_times
            .insert(format!("eigen_{finest}_scaled"), time);
        out.metric("lambda_scaled", rep.lambda);
        out.metric("residual_scaled", rep.final_residual());
        out.metric(
            "scaling_rel_error",
            (4.0 * rep.lambda / fine.lambda - 1.0).abs(),
        );
    }
    let factor = boundary_factor(fine, p.factor_band).stage(|| "boundary factor".into())?;
    out.metric("factor_min", factor.min());
    out.metric("factor_max", factor.max());
    let domain = ConvexDomain::disk(p.radius).stage(|| "domain".into())?;
    let mut identity = Table::new(&["theta", "a", "det_q", "g", "rel_error"]);
    let mut worst = 0.0f64;
    for k in 0..p.identity_points {
        let theta = TAU * k as f64 / p.identity_points as f64 + p.identity_phase;
        let z = [p.radius * theta.cos(), p.radius * theta.sin()];
        let fit = fit_boundary_expansion(&fine.eigenfunction, &domain, &z, 2.0, &p.identity_radii)
            .stage(|| format!("expansion fit at theta = {theta}"))?;
        let g = fine.lambda * fine.lambda * fit.normal_slope * fit.normal_slope;
        let rel = (fit.a * fit.det_q() - g) / g;
        worst = worst.max(rel.abs());
        identity.push_numbers(&[theta, fit.a, fit.det_q(), g, rel]);
    }
    if p.identity_points > 0 {
        out.metric("identity_max_rel_error", worst);
        out.table("identity", identity, None);
    }
    out.table(
        "eigenfunction",
        heatmap_table(&fine.eigenfunction, 65),
        Some(PlotKind::FieldHeatmap),
    );
    out.fields
        .push(("eigenfunction".into(), fine.eigenfunction.clone()));
    Ok(out)
}

pub fn pipeline(c: &ExperimentConfig, p: &PipelinePayload, threads: usize) -> Result<Outcome> {
    let domain = ConvexDomain::disk(p.radius).stage(|| "domain".into())?;
    let runs = map_ladder(&c.ladder, threads, |n| {
        let (rep, time) = disk_eigen(p.radius, n, p.tol, p.max_outer)?;
        let h = rep.spacing();
        let window = HodographWindow {
            half_width: p.half_width,
            height: p.height,
            normal_nodes: (p.height / h).round() as usize + 1,
        };
        let clock = Instant::now();
        let (report, ut, _) = eigen_pipeline(
            &rep.eigenfunction,
            &domain,
            rep.lambda,
            &p.z,
            &window,
            p.margin,
        )
        .stage(|| format!("transform pipeline {n}"))?;
        Ok((n, h, report, ut, time, clock.elapsed().as_secs_f64()))
    })?;
    let mut out = Outcome::default();
    let mut levels = Table::new(&[
        "h",
        "involution",
        "interpolation_bound",
        "hessian_mismatch",
        "transformed_residual",
        "hodograph_residual",
        "min_normal_slope",
    ]);
    let mut transformed = Table::new(&["h", "transformed_residual"]);
    let (mut hess, mut trans) = (Vec::new(), Vec::new());
    let mut ratio = 0.0f64;
    for (n, h, r, _, t_eigen, t_pipe) in &runs {
        let r: &PipelineReport = r;
        out.wall_times.insert(format!("eigen_{n}"), *t_eigen);
        out.wall_times.insert(format!("pipeline_{n}"), *t_pipe);
        for (key, v) in [
            ("involution", r.involution_error),
            ("interpolation_bound", r.interpolation_bound),
            ("hessian_mismatch", r.hessian_mismatch),
            ("transformed_residual", r.transformed_residual),
            ("hodograph_residual", r.hodograph_residual),
            ("min_normal_slope", r.min_normal_slope),
        ] {
            out.metric(format!("{key}_{n}"), v);
        }
        ratio = ratio.max(r.involution_error / r.interpolation_bound);
        hess.push((*h, r.hessian_mismatch));
        trans.push((*h, r.transformed_residual));
        levels.push_numbers(&[
            *h,
            r.involution_error,
            r.interpolation_bound,
            r.hessian_mismatch,
            r.transformed_residual,
            r.hodograph_residual,
            r.min_normal_slope,
        ]);
        transformed.push_numbers(&[*h, r.transformed_residual]);
    }
    out.metric("involution_ratio_max", ratio);
    record_order(&mut out, "hessian_order", &hess)?;
    record_order(&mut out, "transformed_order", &trans)?;
    out.table("levels", levels, None);
    if runs.len() >= 2 {
        out.table("transformed", transformed, Some(PlotKind::Loglog));
    }
    if let Some((.., ut, _, _)) = runs.last() {
        out.fields.push(("hodograph".into(), ut.clone()));
    }
    Ok(out)
}

fn key_alpha(prefix: &str, alpha: f64) -> String {
    format!("{prefix}_a{alpha}")
}

pub fn expansion_fit(
    c: &ExperimentConfig,
    p: &ExpansionFitPayload,
    threads: usize,
) -> Result<Outcome> {
    let domain = ConvexDomain::disk(p.radius).stage(|| "domain".into())?;
    let n = *c.ladder.last().expect("validated ladder");
    let grid = square_grid(&domain, n).stage(|| format!("grid {n}"))?;
    let normal = domain.inner_normal(&p.z).stage(|| "inner normal".into())?;
    let h = spacing(&grid);
    let runs = map_ladder(&(0..p.alphas.len()).collect::<Vec<_>>(), threads, |k| {
        let alpha = p.alphas[k];
        let problem = MaProblem {
            domain: domain.clone(),
            alpha,
            g: Rhs::Const(1.0),
            phi: Arc::new(|_: &[f64]| 0.0),
            scheme: Scheme::StandardFd,
            grid: grid.clone(),
        };
        let clock = Instant::now();
        let rep = solve_dirichlet(&problem, p.tol, p.max_iters)
            .stage(|| format!("disk solve alpha = {alpha}"))?;
        let time = clock.elapsed().as_secs_f64();
        let (mut ts, mut vs) = (Vec::new(), Vec::new());
        let mut k = 1;
        while k as f64 * h <= p.tmax + 1e-12 {
            let t = k as f64 * h;
            let x: Vec<f64> = p.z.iter().zip(&normal).map(|(z, v)| z + t * v).collect();
            ts.push(t);
            vs.push(
                rep.solution
                    .interpolate(&x)
                    .stage(|| format!("profile sample t = {t}"))?,
            );
            k += 1;
        }
        let [lo, hi] = p.exponent_bracket;
        let exp = fit_normal_exponent(&ts, &vs, lo, hi)
            .stage(|| format!("exponent fit alpha = {alpha}"))?;
        let fit = fit_boundary_expansion(&rep.solution, &domain, &p.z, alpha, &p.radii)
            .stage(|| format!("expansion fit alpha = {alpha}"))?;
        Ok((alpha, exp, fit, ts, vs, time))
    })?;
    let mut out = Outcome::default();
    let mut table = Table::new(&[
        "alpha",
        "exponent",
        "rel_error",
        "a",
        "det_q",
        "identity_error",
    ]);
    for (alpha, exp, fit, ts, vs, time) in runs {
        let rel = exp.exponent / (2.0 + alpha) - 1.0;
        let identity = fit.a * fit.det_q() - 1.0;
        out.wall_times.insert(key_alpha("solve", alpha), time);
        out.metric(key_alpha("exponent", alpha), exp.exponent);
        out.metric(key_alpha("exponent_rel_error", alpha), rel.abs());
        out.metric(key_alpha("a", alpha), fit.a);
        out.metric(key_alpha("identity_error", alpha), identity);
        table.push_numbers(&[alpha, exp.exponent, rel, fit.a, fit.det_q(), identity]);
        let mut profile = Table::new(&["t", "u"]);
        ts.iter()
            .zip(&vs)
            .for_each(|(t, v)| profile.push_numbers(&[*t, *v]));
        out.table(
            &format!("profile_a{alpha}"),
            profile,
            Some(PlotKind::Profile),
        );
    }
    out.table("exponents", table, None);
    Ok(out)
}

pub fn barriers(c: &ExperimentConfig, p: &BarriersPayload) -> Result<Outcome> {
    let clock = Instant::now();
    let rows = run_suite(p.suite, c.seed, p.eps0).stage(|| "barrier suite".into())?;
    let mut out = Outcome::default();
    out.wall_times
        .insert("suite".into(), clock.elapsed().as_secs_f64());
    let mut table = Table::new(&[
        "check",
        "n",
        "alpha",
        "params",
        "samples",
        "worst",
        "tolerance",
        "pass",
    ]);
    for r in &rows {
        table.push(vec![
            r.check.clone(),
            r.n.to_string(),
            r.alpha.to_string(),
            r.params.clone(),
            r.samples.to_string(),
            number(r.worst),
            number(r.tolerance),
            r.pass.to_string(),
        ]);
    }
    out.metric("checks", rows.len() as f64);
    out.metric("failures", rows.iter().filter(|r| !r.pass).count() as f64);
    out.table("barriers", table, None);
    Ok(out)
}

pub fn metric_scan(c: &ExperimentConfig, p: &MetricScanPayload) -> Result<Outcome> {
    let region = BoxRegion::unit_half_box(2);
    let mut out = Outcome::default();
    let mut table = Table::new(&["alpha", "c_low", "c_high", "quasi_triangle", "quasi_bound"]);
    let clock = Instant::now();
    for &alpha in &p.alphas {
        let scan = metric_equivalence_scan(alpha, &region, p.samples, c.seed)
            .stage(|| format!("scan alpha = {alpha}"))?;
        let quasi = quasi_triangle_constant(alpha, &region, p.triples, c.seed)
            .stage(|| format!("triangle alpha = {alpha}"))?;
        let bound = 2f64.powf(alpha / 2.0);
        out.metric(key_alpha("c_low", alpha), scan.c_low);
        out.metric(key_alpha("c_high", alpha), scan.c_high);
        out.metric(key_alpha("quasi_triangle", alpha), quasi);
        out.metric(key_alpha("quasi_bound", alpha), bound);
        table.push_numbers(&[alpha, scan.c_low, scan.c_high, quasi, bound]);
    }
    out.wall_times
        .insert("scan".into(), clock.elapsed().as_secs_f64());
    out.table("metric", table, None);
    Ok(out)
}

pub fn execute(c: &ExperimentConfig, threads: usize) -> Result<Outcome> {
    match &c.payload {
        Payload::MaSolve(p) => ma_solve(c, p, threads),
        Payload::Grushin(p) => grushin(c, p, threads),
        Payload::Eigen(p) => eigen(c, p, threads),
        Payload::Pipeline(p) => pipeline(c, p, threads),
        Payload::ExpansionFit(p) => expansion_fit(c, p, threads),
        Payload::Barriers(p) => barriers(c, p),
        Payload::MetricScan(p) => metric_scan(c, p),
    }
}
