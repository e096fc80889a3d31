//! Natural cubic spline through sampled values.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    curvature: Vec<f64>,
}

impl CubicSpline {
    /// Knots must be strictly increasing; at least two are required.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Grid(format!(
                "{} knots but {} values",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::Grid("spline needs at least two knots".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Grid("spline knots must be strictly increasing".into()));
        }
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::Grid("spline values must be finite".into()));
        }
        let curvature = natural_curvature(&xs, &ys);
        Ok(CubicSpline { xs, ys, curvature })
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.xs[0] && x <= self.xs[self.xs.len() - 1]
    }

    /// Evaluates the spline; outside the knot range the nearest end value is
    /// held constant.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        // first knot strictly greater than x
        let hi = self.xs.partition_point(|&k| k <= x).min(n - 1);
        let lo = hi - 1;
        let h = self.xs[hi] - self.xs[lo];
        let a = (self.xs[hi] - x) / h;
        let b = (x - self.xs[lo]) / h;
        a * self.ys[lo]
            + b * self.ys[hi]
            + ((a * a * a - a) * self.curvature[lo] + (b * b * b - b) * self.curvature[hi]) * h * h
                / 6.0
    }
}

/// Solves the tridiagonal system for knot second derivatives with zero
/// curvature at both ends.
fn natural_curvature(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = xs[i] - xs[i - 1];
        let h1 = xs[i + 1] - xs[i];
        let lower = h0 / 6.0;
        diag[i] = (h0 + h1) / 3.0;
        upper[i] = h1 / 6.0;
        rhs[i] = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
        if i > 1 {
            let w = lower / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
    }
    for i in (1..n - 1).rev() {
        let next = if i + 1 < n - 1 { m[i + 1] } else { 0.0 };
        m[i] = (rhs[i] - upper[i] * next) / diag[i];
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_knot_values() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x * 1.7).sin()).collect();
        let s = CubicSpline::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((s.eval(*x) - y).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_for_straight_lines() {
        let xs = vec![0.0, 0.5, 2.0, 2.5, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let s = CubicSpline::new(xs, ys).unwrap();
        for i in 0..=40 {
            let x = i as f64 * 0.1;
            assert!((s.eval(x) - (3.0 * x - 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn converges_on_smooth_function() {
        let f = |x: f64| (-x * x).exp();
        let mut previous = f64::INFINITY;
        for n in [21, 41, 81] {
            let xs: Vec<f64> = (0..n).map(|i| -3.0 + 6.0 * i as f64 / (n - 1) as f64).collect();
            let ys = xs.iter().map(|&x| f(x)).collect();
            let s = CubicSpline::new(xs, ys).unwrap();
            let err = (0..997)
                .map(|i| -2.5 + 5.0 * i as f64 / 996.0)
                .map(|x| (s.eval(x) - f(x)).abs())
                .fold(0.0, f64::max);
            // fourth order away from the ends
            assert!(err < previous / 10.0, "{err} vs {previous}");
            previous = err;
        }
    }

    #[test]
    fn holds_end_values_outside() {
        let s = CubicSpline::new(vec![0.0, 1.0, 2.0], vec![1.0, 4.0, 2.0]).unwrap();
        assert_eq!(s.eval(-5.0), 1.0);
        assert_eq!(s.eval(9.0), 2.0);
        assert!(!s.contains(2.5));
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(CubicSpline::new(vec![0.0], vec![1.0]).is_err());
        assert!(CubicSpline::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(CubicSpline::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(CubicSpline::new(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn interpolates_any_data(ys in proptest::collection::vec(-10.0f64..10.0, 2..30)) {
            let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64 * 0.7 - 3.0).collect();
            let s = CubicSpline::new(xs.clone(), ys.clone()).unwrap();
            for (x, y) in xs.iter().zip(&ys) {
                prop_assert!((s.eval(*x) - y).abs() < 1e-9);
            }
        }
    }
}
