//! One-dimensional interpolation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Nodes in the Lagrange stencil behind each node slope.
const STENCIL: usize = 5;

/// Piecewise cubic Hermite interpolant of monotone data. Node slopes come
/// from five-point Lagrange differentiation and are clipped by the Hyman
/// filter, so the interpolant is monotone, and fourth-order accurate where
/// the data is strictly monotone and smooth.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    /// `x` strictly increasing, `y` monotone (either direction).
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::Input("need at least two matching samples".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Input("abscissae must be strictly increasing".into()));
        }
        let delta: Vec<f64> = (0..n - 1)
            .map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i]))
            .collect();
        let increasing = y[n - 1] >= y[0];
        if delta
            .iter()
            .any(|s| if increasing { *s < 0.0 } else { *s > 0.0 })
        {
            return Err(Error::Input("data is not monotone".into()));
        }
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            let m = STENCIL.min(n);
            for i in 0..n {
                let lo = i.saturating_sub(m / 2).min(n - m);
                let w = crate::linalg::fd_weights(x[i], &x[lo..lo + m], 1);
                d[i] = w.iter().zip(&y[lo..lo + m]).map(|(a, b)| a * b).sum();
            }
            for i in 0..n {
                let lo = if i == 0 { delta[0] } else { delta[i - 1] };
                let hi = if i == n - 1 { delta[n - 2] } else { delta[i] };
                if lo * hi <= 0.0 && i > 0 && i < n - 1 {
                    d[i] = 0.0;
                    continue;
                }
                let bound = 3.0 * lo.abs().min(hi.abs());
                if d[i] * lo < 0.0 {
                    d[i] = 0.0;
                } else if d[i].abs() > bound {
                    d[i] = bound.copysign(lo);
                }
            }
        }
        Ok(MonotoneCubic { x, y, d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// Value at `t`; `t` outside the data range is an error.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return Err(Error::range(alloc::format!("{t} outside [{lo}, {hi}]")));
        }
        let i = match self.x.partition_point(|v| *v <= t) {
            0 => 0,
            k => (k - 1).min(self.x.len() - 2),
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Ok(h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fourth_order_on_smooth_data() {
        let f = |x: f64| x.exp();
        let err = |n: usize| {
            let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            let y = x.iter().map(|v| f(*v)).collect();
            let c = MonotoneCubic::new(x, y).unwrap();
            (0..997)
                .map(|k| {
                    let t = k as f64 / 996.0;
                    (c.eval(t).unwrap() - f(t)).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(21) / err(41);
        assert!(ratio > 14.0, "{ratio}");
    }

    #[test]
    fn rejects_non_monotone() {
        assert!(MonotoneCubic::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.5]).is_err());
        assert!(MonotoneCubic::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn preserves_monotonicity(steps in proptest::collection::vec((0.01f64..1.0, 0.0f64..5.0), 2..30)) {
            let mut x = vec![0.0];
            let mut y = vec![0.0];
            for (dx, dy) in &steps {
                x.push(x.last().unwrap() + dx);
                y.push(y.last().unwrap() + dy);
            }
            let c = MonotoneCubic::new(x.clone(), y).unwrap();
            let end = *x.last().unwrap();
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=500 {
                let v = c.eval((end * k as f64 / 500.0).min(end)).unwrap();
                prop_assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
    }
}
