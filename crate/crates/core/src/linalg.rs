//! Small dense linear algebra: determinants, symmetric eigenvalues,
//! weighted least squares and finite-difference weights.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

/// LU factorization with partial pivoting of a row-major `n × n` matrix.
/// Returns the packed factors, the pivot order and the permutation sign,
/// or `None` when a pivot vanishes exactly.
fn lu(a: &[f64], n: usize) -> Option<(Vec<f64>, Vec<usize>, f64)> {
    let mut m = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if m[i * n + k].abs() > m[p * n + k].abs() {
                p = i;
            }
        }
        if m[p * n + k] == 0.0 {
            return None;
        }
        if p != k {
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let piv = m[k * n + k];
        for i in k + 1..n {
            let f = m[i * n + k] / piv;
            m[i * n + k] = f;
            for j in k + 1..n {
                m[i * n + j] -= f * m[k * n + j];
            }
        }
    }
    Some((m, perm, sign))
}

pub fn det(a: &[f64], n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => match lu(a, n) {
            Some((m, _, sign)) => (0..n).fold(sign, |acc, k| acc * m[k * n + k]),
            None => 0.0,
        },
    }
}

pub fn solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let (m, perm, _) = lu(a, n)?;
    let mut x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for j in 0..i {
            x[i] -= m[i * n + j] * x[j];
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            x[i] -= m[i * n + j] * x[j];
        }
        x[i] /= m[i * n + i];
    }
    Some(x)
}

pub fn inverse(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = solve(a, &e, n)?;
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    Some(inv)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn sym_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = s;
            m[j * n + i] = s;
        }
    }
    let scale: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    /// Weighted residual 2-norm.
    pub residual_norm: f64,
}

/// Weighted least squares `min Σ w_i (row_i·c − b_i)²` by Householder QR on
/// column-equilibrated data. `design` is row-major with `cols` columns.
/// Returns `None` when the design is numerically rank deficient.
pub fn weighted_least_squares(
    design: &[f64],
    cols: usize,
    rhs: &[f64],
    weights: Option<&[f64]>,
) -> Option<LeastSquares> {
    let rows = rhs.len();
    if rows < cols || design.len() != rows * cols {
        return None;
    }
    let mut a = design.to_vec();
    let mut b = rhs.to_vec();
    if let Some(w) = weights {
        for i in 0..rows {
            let sw = w[i].max(0.0).sqrt();
            b[i] *= sw;
            for j in 0..cols {
                a[i * cols + j] *= sw;
            }
        }
    }
    let mut colscale = vec![1.0; cols];
    for j in 0..cols {
        let norm = (0..rows)
            .map(|i| a[i * cols + j].powi(2))
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            return None;
        }
        colscale[j] = norm;
        for i in 0..rows {
            a[i * cols + j] /= norm;
        }
    }
    let mut diag = vec![0.0; cols];
    for k in 0..cols {
        let norm = (k..rows)
            .map(|i| a[i * cols + k].powi(2))
            .sum::<f64>()
            .sqrt();
        let alpha = if a[k * cols + k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| a[i * cols + k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        diag[k] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..cols {
            let dot: f64 = (k..rows).map(|i| v[i - k] * a[i * cols + j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..rows {
                a[i * cols + j] -= f * v[i - k];
            }
        }
        let dot: f64 = (k..rows).map(|i| v[i - k] * b[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in k..rows {
            b[i] -= f * v[i - k];
        }
    }
    let rmax = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if diag.iter().any(|d| d.abs() <= 1e-12 * rmax) {
        return None;
    }
    let mut x = vec![0.0; cols];
    for i in (0..cols).rev() {
        let mut s = b[i];
        for j in i + 1..cols {
            s -= a[i * cols + j] * x[j];
        }
        x[i] = s / a[i * cols + i];
    }
    let residual_norm = (cols..rows).map(|i| b[i] * b[i]).sum::<f64>().sqrt();
    for j in 0..cols {
        x[j] /= colscale[j];
    }
    Some(LeastSquares {
        coefficients: x,
        residual_norm,
    })
}

/// Fornberg's finite-difference weights for the `order`-th derivative at `x0`
/// from arbitrary distinct nodes.
pub fn fd_weights(x0: f64, nodes: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    let m = order;
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinants_match_cofactor_expansion() {
        let a = [2.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 4.0];
        let d3 = det(&a, 3);
        let (m, _, s) = lu(&a, 3).unwrap();
        let dl = s * m[0] * m[4] * m[8];
        assert!((d3 - dl).abs() < 1e-12);
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        let a = [2.0, 1.0, 1.0, 2.0];
        let ev = sym_eigenvalues(&a, 2);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn least_squares_fits_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let design: Vec<f64> = xs.iter().flat_map(|&x| [1.0, x]).collect();
        let rhs: Vec<f64> = xs.iter().map(|x| 0.5 + 2.0 * x).collect();
        let fit = weighted_least_squares(&design, 2, &rhs, None).unwrap();
        assert!((fit.coefficients[0] - 0.5).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(fit.residual_norm < 1e-12);
    }

    #[test]
    fn rank_deficiency_detected() {
        let design = [1.0, 2.0, 2.0, 4.0, 3.0, 6.0];
        assert!(weighted_least_squares(&design, 2, &[1.0, 2.0, 3.0], None).is_none());
    }

    #[test]
    fn fornberg_second_derivative_nonuniform() {
        let nodes = [-0.1, 0.0, 0.3];
        let w = fd_weights(0.0, &nodes, 2);
        let val: f64 = nodes.iter().zip(&w).map(|(x, c)| c * x * x).sum();
        assert!((val - 2.0).abs() < 1e-12);
        let lin: f64 = nodes.iter().zip(&w).map(|(x, c)| c * (1.0 + x)).sum();
        assert!(lin.abs() < 1e-12);
    }
}
