//! Acceptance suite: one line per criterion, non-zero exit when any fails.

use std::path::Path;
use std::time::Instant;

use degma::config::*;
use degma::runner::same_summary;
use degma::{run, ExperimentConfig, RunOptions, RunRecord};
use degma_core::barriers::Suite;

/// Errors below this on every level mean the discrete solution reproduces
/// the exact one, so no convergence order can be measured.
const EXACT_FLOOR: f64 = 1e-10;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn go(config: &ExperimentConfig, root: &Path, threads: usize) -> RunRecord {
    let opts = RunOptions {
        out_root: root.to_path_buf(),
        threads,
        deterministic: false,
    };
    run(config, &opts).unwrap_or_else(|e| panic!("{} run failed: {e}", config.kind.name()))
}

fn m(r: &RunRecord, key: &str) -> f64 {
    r.metric(key).unwrap_or(f64::NAN)
}

fn errors_exact(r: &RunRecord, ladder: &[usize]) -> bool {
    ladder
        .iter()
        .all(|n| m(r, &format!("error_{n}")) <= EXACT_FLOOR)
}

/// Radial profile of the eigenfunction with `λ = 1`: `u'' u'/r = u²`,
/// `u(0) = −1`, integrated by RK4 until `u` vanishes at `R₁`. The disk of
/// radius one then has `λ = R₁²`.
fn radial_oracle() -> f64 {
    let rhs = |r: f64, y: [f64; 2]| [y[1], r * y[0] * y[0] / y[1]];
    let r0: f64 = 1e-3;
    let mut r = r0;
    let mut y = [
        -1.0 + r0 * r0 / 2.0 - r0.powi(4) / 16.0,
        r0 - r0.powi(3) / 4.0,
    ];
    let h = 1e-5;
    loop {
        let k1 = rhs(r, y);
        let k2 = rhs(
            r + h / 2.0,
            [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]],
        );
        let k3 = rhs(
            r + h / 2.0,
            [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]],
        );
        let k4 = rhs(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        let next = [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if next[0] >= 0.0 {
            // cubic Hermite root on the last step
            let (u0, u1, d0, d1) = (y[0], next[0], h * y[1], h * next[1]);
            let mut s = -u0 / (u1 - u0);
            for _ in 0..50 {
                let s2 = s * s;
                let s3 = s2 * s;
                let f = (2.0 * s3 - 3.0 * s2 + 1.0) * u0
                    + (s3 - 2.0 * s2 + s) * d0
                    + (-2.0 * s3 + 3.0 * s2) * u1
                    + (s3 - s2) * d1;
                let df = (6.0 * s2 - 6.0 * s) * u0
                    + (3.0 * s2 - 4.0 * s + 1.0) * d0
                    + (-6.0 * s2 + 6.0 * s) * u1
                    + (3.0 * s2 - 2.0 * s) * d1;
                s -= f / df;
            }
            let radius = r + s * h;
            return radius * radius;
        }
        y = next;
        r += h;
    }
}

/// Frozen output of [`radial_oracle`].
const ORACLE_LAMBDA: f64 = 2.73679363465621;

fn criterion_1(root: &Path) -> Verdict {
    let ladder = vec![33, 65, 129];
    let mut parts = Vec::new();
    let mut pass = true;
    for alpha in [0.5, 1.0, 2.0] {
        let mut c = ExperimentConfig::new(ExperimentKind::MaSolve);
        c.ladder = ladder.clone();
        c.payload = Payload::MaSolve(MaSolvePayload {
            alpha,
            ..Default::default()
        });
        let r = go(&c, root, 1);
        let err = m(&r, "error_129");
        let exact = errors_exact(&r, &ladder);
        let slope = m(&r, "slope");
        let time = r.wall_times["total"];
        pass &= err <= 5e-3 && (exact || slope >= 1.0) && time < 60.0;
        let order = if exact {
            "exact".to_string()
        } else {
            format!("slope {slope:.2}")
        };
        parts.push(format!("α={alpha}: err {err:.2e}, {order}, {time:.1}s"));
    }
    verdict(pass, parts.join("; "))
}

fn criterion_2(root: &Path) -> Verdict {
    let ladder = vec![33, 65, 129];
    let mut parts = Vec::new();
    let mut pass = true;
    for case in [GrushinCase::X1Xn, GrushinCase::X1sqXn] {
        for alpha in [0.5, 1.0, 2.0] {
            let mut c = ExperimentConfig::new(ExperimentKind::Grushin);
            c.ladder = ladder.clone();
            c.payload = Payload::Grushin(GrushinPayload {
                alpha,
                case,
                ..Default::default()
            });
            let r = go(&c, root, 1);
            let err = m(&r, "error_129");
            let exact = errors_exact(&r, &ladder);
            let slope = m(&r, "slope");
            pass &= err <= 1e-3 && (exact || (slope - 2.0).abs() <= 0.3);
            let order = if exact {
                "exact".to_string()
            } else {
                format!("slope {slope:.2}")
            };
            let name = if case == GrushinCase::X1Xn {
                "x1·xn"
            } else {
                "|x'|²xn"
            };
            parts.push(format!("{name} α={alpha}: err {err:.1e}, {order}"));
        }
    }
    verdict(pass, parts.join("; "))
}

fn criterion_3(root: &Path) -> Verdict {
    let ladder = vec![65, 129, 257];
    let mut c = ExperimentConfig::new(ExperimentKind::Grushin);
    c.seed = 1;
    c.ladder = ladder.clone();
    c.payload = Payload::Grushin(GrushinPayload {
        alpha: 1.0,
        case: GrushinCase::Random,
        ..Default::default()
    });
    let r = go(&c, root, 1);
    let target = 2.0 * 4.0 / 3.0 - 0.2;
    let slopes: Vec<f64> = ladder
        .iter()
        .map(|n| m(&r, &format!("tangent_slope_{n}")))
        .collect();
    let pass = slopes.iter().all(|s| *s >= target);
    verdict(
        pass,
        format!("remainder slopes {slopes:.3?} on {ladder:?}, need ≥ {target:.2}"),
    )
}

fn eigen_run(root: &Path) -> RunRecord {
    let mut c = ExperimentConfig::new(ExperimentKind::Eigen);
    c.seed = 1;
    c.ladder = vec![129, 257];
    c.payload = Payload::Eigen(EigenPayload {
        scaling_check: true,
        ..Default::default()
    });
    go(&c, root, 1)
}

fn criterion_4(r: &RunRecord) -> Verdict {
    let rel = m(r, "scaling_rel_error");
    let res = m(r, "residual_257").max(m(r, "residual_scaled"));
    verdict(
        rel <= 0.02 && res <= 1e-6,
        format!(
            "λ(B1) {:.7}, λ(B2) {:.7}, |4λ(B2)/λ(B1) − 1| = {rel:.1e}, residual {res:.1e}",
            m(r, "lambda_257"),
            m(r, "lambda_scaled")
        ),
    )
}

fn criterion_5(r: &RunRecord) -> Verdict {
    let oracle = radial_oracle();
    let frozen = (oracle - ORACLE_LAMBDA).abs() <= 1e-9;
    let extrapolated = m(r, "lambda_extrapolated");
    let rel = (extrapolated / ORACLE_LAMBDA - 1.0).abs();
    verdict(
        frozen && rel <= 0.01,
        format!("Richardson 129/257 {extrapolated:.8} vs radial oracle {oracle:.8}: rel {rel:.1e}"),
    )
}

fn criterion_6(root: &Path) -> Verdict {
    let c = ExperimentConfig::new(ExperimentKind::ExpansionFit);
    let r = go(&c, root, 1);
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.5, 1.0, 2.0] {
        let p = m(&r, &format!("exponent_a{alpha}"));
        let rel = m(&r, &format!("exponent_rel_error_a{alpha}"));
        pass &= rel <= 0.05;
        parts.push(format!("α={alpha}: p {p:.4} (rel {rel:.3})"));
    }
    verdict(pass, parts.join("; "))
}

fn criterion_7(r: &RunRecord) -> Verdict {
    let rel = m(r, "identity_max_rel_error");
    verdict(
        rel <= 0.05,
        format!("max |a·det D²x'u − g|/g over 8 points = {rel:.4}"),
    )
}

fn criterion_8(r: &RunRecord) -> Verdict {
    let trend = m(r, "seminorm_trend");
    verdict(
        (trend - 1.0).abs() <= 0.2,
        format!(
            "[D²u]_C^0.45 at 257: {:.4}, ratio to 129: {trend:.4}",
            m(r, "seminorm_fine")
        ),
    )
}

fn criterion_9(root: &Path) -> Verdict {
    let c = ExperimentConfig::new(ExperimentKind::Pipeline);
    let r = go(&c, root, 1);
    let ratio = m(&r, "involution_ratio_max");
    let hess = m(&r, "hessian_order");
    let trans = m(&r, "transformed_order");
    verdict(
        ratio <= 5.0 && hess >= 1.0 && trans >= 1.0,
        format!(
            "involution/bound ≤ {ratio:.1e}; Hessian mismatch {:.1e} → {:.1e} (order {hess:.2}); transformed residual {:.1e} → {:.1e} (order {trans:.2})",
            m(&r, "hessian_mismatch_65"),
            m(&r, "hessian_mismatch_257"),
            m(&r, "transformed_residual_65"),
            m(&r, "transformed_residual_257"),
        ),
    )
}

fn criterion_10(root: &Path) -> Verdict {
    let mut c = ExperimentConfig::new(ExperimentKind::Barriers);
    c.payload = Payload::Barriers(BarriersPayload {
        suite: Suite::All,
        ..Default::default()
    });
    let r = go(&c, root, 1);
    let failures = m(&r, "failures");
    verdict(
        failures == 0.0,
        format!("{} checks, {failures} failures", m(&r, "checks")),
    )
}

fn criterion_11(root: &Path) -> Verdict {
    let c = ExperimentConfig::new(ExperimentKind::MetricScan);
    let r = go(&c, root, 1);
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.5, 1.0, 2.0] {
        let key = |k: &str| m(&r, &format!("{k}_a{alpha}"));
        let (lo, hi, q, bound) = (
            key("c_low"),
            key("c_high"),
            key("quasi_triangle"),
            key("quasi_bound"),
        );
        pass &= lo > 0.0 && hi.is_finite() && lo <= hi && q <= bound + 1e-9;
        parts.push(format!(
            "α={alpha}: c {lo:.3}..{hi:.3}, K {q:.4} ≤ {bound:.4}"
        ));
    }
    verdict(pass, parts.join("; "))
}

fn criterion_12(root: &Path) -> Verdict {
    let mut configs = Vec::new();
    let mut c = ExperimentConfig::new(ExperimentKind::Grushin);
    c.seed = 5;
    c.ladder = vec![33, 65, 129];
    c.payload = Payload::Grushin(GrushinPayload {
        case: GrushinCase::Random,
        ..Default::default()
    });
    configs.push(c);
    let mut c = ExperimentConfig::new(ExperimentKind::MaSolve);
    c.payload = Payload::MaSolve(MaSolvePayload {
        alpha: 0.5,
        ..Default::default()
    });
    configs.push(c);
    let mut c = ExperimentConfig::new(ExperimentKind::Barriers);
    c.seed = 9;
    configs.push(c);
    let mut c = ExperimentConfig::new(ExperimentKind::MetricScan);
    c.seed = 3;
    configs.push(c);
    let mut pass = true;
    let mut parts = Vec::new();
    for c in &configs {
        let a = go(c, &root.join("first"), 1);
        let svgs = |r: &RunRecord| -> Vec<Vec<u8>> {
            r.artifacts
                .iter()
                .filter(|f| f.ends_with(".svg"))
                .map(|f| std::fs::read(r.dir.join(f)).unwrap())
                .collect()
        };
        let first_svgs = svgs(&a);
        let b = go(c, &root.join("second"), 3);
        let same = same_summary(&a, &b) && first_svgs == svgs(&b) && a.artifacts == b.artifacts;
        pass &= same && !a.summary.is_empty();
        parts.push(format!(
            "{} {}: {} metrics {}",
            c.kind.name(),
            a.config_hash,
            a.summary.len(),
            if same { "identical" } else { "DIFFER" }
        ));
    }
    verdict(pass, parts.join("; "))
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary output directory");
    let root = dir.path();
    let mut failures = 0;
    let mut report = |id: usize, name: &str, clock: Instant, v: Verdict| {
        let status = if v.pass { "PASS" } else { "FAIL" };
        failures += usize::from(!v.pass);
        println!(
            "criterion {id:>2} [{status}] {name} ({:.1}s): {}",
            clock.elapsed().as_secs_f64(),
            v.detail
        );
    };
    let t = Instant::now();
    report(1, "manufactured U_0 on the strip", t, criterion_1(root));
    let t = Instant::now();
    report(2, "Grushin manufactured solutions", t, criterion_2(root));
    let t = Instant::now();
    report(3, "tangent profile remainder", t, criterion_3(root));
    let t = Instant::now();
    let eigen = eigen_run(root);
    report(4, "eigenvalue scaling law", t, criterion_4(&eigen));
    let t = Instant::now();
    report(
        5,
        "disk eigenvalue vs radial oracle",
        t,
        criterion_5(&eigen),
    );
    let t = Instant::now();
    report(6, "normal exponent 2+α", t, criterion_6(root));
    let t = Instant::now();
    report(7, "boundary coefficient identity", t, criterion_7(&eigen));
    let t = Instant::now();
    report(
        8,
        "Hessian Hölder seminorm stability",
        t,
        criterion_8(&eigen),
    );
    let t = Instant::now();
    report(9, "Legendre pipeline", t, criterion_9(root));
    let t = Instant::now();
    report(10, "barrier and matrix suites", t, criterion_10(root));
    let t = Instant::now();
    report(11, "quasi-distance constants", t, criterion_11(root));
    let t = Instant::now();
    report(12, "determinism", t, criterion_12(root));
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all 12 criteria passed");
}
