//! Uniform periodic grids on `[0, 2π)` and functions sampled on them.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `[0, 2π)`.
#[inline]
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Distance on the circle of circumference `2π`.
#[inline]
pub fn torus_distance(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(TAU - d)
}

/// Fractional node coordinate of `x` on an `n`-node grid: `(i, θ)` with `x = (i + θ)Δx`.
#[inline]
fn locate(n: usize, x: f64) -> (usize, f64) {
    let s = wrap_angle(x) / TAU * n as f64;
    let r = s.round();
    if (s - r).abs() < 1e-11 {
        return ((r as usize) % n, 0.0);
    }
    let i = (s.floor() as usize).min(n - 1);
    (i, s - i as f64)
}

/// Periodic piecewise-linear interpolation of uniform samples on `[0, 2π)`.
#[inline]
pub fn interp_linear(values: &[f64], x: f64) -> f64 {
    let n = values.len();
    let (i, t) = locate(n, x);
    if t == 0.0 {
        return values[i];
    }
    values[i] + t * (values[(i + 1) % n] - values[i])
}

/// Periodic Catmull-Rom interpolation of uniform samples on `[0, 2π)`.
pub fn interp_cubic(values: &[f64], x: f64) -> f64 {
    let n = values.len();
    let (i, t) = locate(n, x);
    if t == 0.0 {
        return values[i];
    }
    let p0 = values[(i + n - 1) % n];
    let p1 = values[i];
    let p2 = values[(i + 1) % n];
    let p3 = values[(i + 2) % n];
    let t2 = t * t;
    let t3 = t2 * t;
    0.5 * (2.0 * p1
        + (p2 - p0) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2
        + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t3)
}

/// Formats a float with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    n: usize,
    dim: usize,
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidInput(format!("grid needs at least 8 nodes, got {n}")));
        }
        Ok(Self { n, dim: 1 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dx(&self) -> f64 {
        TAU / self.n as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    /// Index of the node nearest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        ((wrap_angle(x) / self.dx()).round() as usize) % self.n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Interpolation {
    #[default]
    Linear,
    Cubic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl GridFn {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch { left: grid.n(), right: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid function value"));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: PeriodicGrid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.n()] }
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn interpolate(&self, x: f64, order: Interpolation) -> f64 {
        match order {
            Interpolation::Linear => interp_linear(&self.values, x),
            Interpolation::Cubic => interp_cubic(&self.values, x),
        }
    }

    /// Centered periodic differences `(f_{i+1} − f_{i−1}) / 2Δx`.
    pub fn gradient(&self) -> GridFn {
        let n = self.grid.n();
        let h = 2.0 * self.grid.dx();
        let values = (0..n)
            .map(|i| (self.values[(i + 1) % n] - self.values[(i + n - 1) % n]) / h)
            .collect();
        Self { grid: self.grid, values }
    }

    /// Centered second differences `(f_{i+1} − 2f_i + f_{i−1}) / Δx²`.
    pub fn second_difference(&self) -> GridFn {
        let n = self.grid.n();
        let h2 = self.grid.dx() * self.grid.dx();
        let values = (0..n)
            .map(|i| (self.values[(i + 1) % n] - 2.0 * self.values[i] + self.values[(i + n - 1) % n]) / h2)
            .collect();
        Self { grid: self.grid, values }
    }

    pub fn sup_distance(&self, other: &GridFn) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch { left: self.grid.n(), right: other.grid.n() });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFn {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn shifted(&self, k: f64) -> GridFn {
        self.map(|v| v + k)
    }

    pub fn negated(&self) -> GridFn {
        self.map(|v| -v)
    }

    /// `α·self + β·other`
    pub fn combine(&self, alpha: f64, other: &GridFn, beta: f64) -> Result<GridFn> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch { left: self.grid.n(), right: other.grid.n() });
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| alpha * a + beta * b).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// CSV with header `x,value`.
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = String::with_capacity(self.values.len() * 48);
        out.push_str(header);
        out.push('\n');
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{}", fmt_float(self.grid.node(i)), fmt_float(*v));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<GridFn> {
        let mut values = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (k == 0 && line.starts_with('x')) {
                continue;
            }
            let field = line
                .split(',')
                .nth(1)
                .ok_or_else(|| Error::Parse(format!("line {}: expected two columns", k + 1)))?;
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", k + 1)))?;
            values.push(v);
        }
        Self::new(PeriodicGrid::new(values.len())?, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sin_on(n: usize) -> GridFn {
        GridFn::from_fn(PeriodicGrid::new(n).unwrap(), f64::sin).unwrap()
    }

    #[test]
    fn small_grids_rejected() {
        assert!(PeriodicGrid::new(7).is_err());
        assert_eq!(PeriodicGrid::new(8).unwrap().dim(), 1);
    }

    #[test]
    fn interpolation_examples() {
        let g = PeriodicGrid::new(256).unwrap();
        let f = GridFn::constant(g, 3.5);
        for x in [-7.0, 0.0, 1.3, 6.2, 100.0] {
            assert_eq!(f.interpolate(x, Interpolation::Linear), 3.5);
            assert_abs_diff_eq!(f.interpolate(x, Interpolation::Cubic), 3.5, epsilon = 1e-14);
        }
        let s = sin_on(256);
        assert_eq!(s.interpolate(g.node(10), Interpolation::Linear), g.node(10).sin());
        let dx = g.dx();
        let mut worst: f64 = 0.0;
        for i in 0..256 {
            let x = g.node(i) + 0.5 * dx;
            worst = worst.max((s.interpolate(x, Interpolation::Linear) - x.sin()).abs());
        }
        assert!(worst <= dx * dx / 8.0, "{worst}");
    }

    #[test]
    fn interpolation_wraps() {
        let s = sin_on(64);
        let x = 1.234;
        assert_abs_diff_eq!(
            s.interpolate(x, Interpolation::Linear),
            s.interpolate(x + 3.0 * TAU, Interpolation::Linear),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            s.interpolate(x, Interpolation::Cubic),
            s.interpolate(x - TAU, Interpolation::Cubic),
            epsilon = 1e-12
        );
    }

    #[test]
    fn gradient_examples() {
        let g = PeriodicGrid::new(256).unwrap();
        assert!(GridFn::constant(g, 2.0).gradient().values().iter().all(|&v| v == 0.0));
        let d = sin_on(256).gradient();
        let err = g.nodes().zip(d.values()).fold(0.0f64, |m, (x, v)| m.max((x.cos() - v).abs()));
        assert!(err < 1e-3);

        // sawtooth |x − π| kinks at π; slopes −1 and +1 average to 0
        let g = PeriodicGrid::new(16).unwrap();
        let f = GridFn::from_fn(g, |x| (x - PI).abs()).unwrap();
        assert_abs_diff_eq!(f.gradient().values()[8], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sup_distance_examples() {
        let g = PeriodicGrid::new(256).unwrap();
        let s = sin_on(256);
        assert_eq!(s.sup_distance(&s).unwrap(), 0.0);
        assert_eq!(GridFn::constant(g, 1.0).sup_distance(&GridFn::constant(g, -2.0)).unwrap(), 3.0);
        let d = s.sup_distance(&GridFn::constant(g, 0.0)).unwrap();
        assert!((d - 1.0).abs() <= g.dx() * g.dx());
        assert!(s.sup_distance(&sin_on(128)).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = sin_on(32);
        let text = s.to_csv("x,value");
        assert!(text.starts_with("x,value\n"));
        let back = GridFn::from_csv(&text).unwrap();
        assert_eq!(back, s);
    }

    fn arb_fn(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, n)
    }

    proptest! {
        #[test]
        fn nodes_are_exact(v in arb_fn(24)) {
            let f = GridFn::new(PeriodicGrid::new(24).unwrap(), v.clone()).unwrap();
            for (i, x) in f.grid().nodes().enumerate() {
                prop_assert_eq!(f.interpolate(x, Interpolation::Linear), v[i]);
                prop_assert_eq!(f.interpolate(x, Interpolation::Cubic), v[i]);
            }
        }

        #[test]
        fn gradient_is_linear(a in arb_fn(16), b in arb_fn(16), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let g = PeriodicGrid::new(16).unwrap();
            let (fa, fb) = (GridFn::new(g, a).unwrap(), GridFn::new(g, b).unwrap());
            let lhs = fa.combine(alpha, &fb, beta).unwrap().gradient();
            let rhs = fa.gradient().combine(alpha, &fb.gradient(), beta).unwrap();
            prop_assert!(lhs.sup_distance(&rhs).unwrap() < 1e-10);
        }

        #[test]
        fn sup_distance_is_a_metric(a in arb_fn(12), b in arb_fn(12), c in arb_fn(12)) {
            let g = PeriodicGrid::new(12).unwrap();
            let (fa, fb, fc) = (GridFn::new(g, a).unwrap(), GridFn::new(g, b).unwrap(), GridFn::new(g, c).unwrap());
            let ab = fa.sup_distance(&fb).unwrap();
            prop_assert_eq!(ab, fb.sup_distance(&fa).unwrap());
            prop_assert!(ab <= fa.sup_distance(&fc).unwrap() + fc.sup_distance(&fb).unwrap() + 1e-12);
            prop_assert_eq!(fa.sup_distance(&fa).unwrap(), 0.0);
        }
    }
}
