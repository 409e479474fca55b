//! Tonelli Hamiltonians, discount factors and the assembled contact
//! Hamiltonian `H(x, p, u) = λ(x) u + h(x, p) − c` on the circle `[0, 2π)`.
//!
//! Every type here is immutable after construction. Sampled tables sit behind
//! `Arc` so that changing `c` or reflecting a model is cheap.

use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::grid::{interp_cubic, wrap_angle};

/// Node count used when caching sampled constants.
pub const CONSTANT_SAMPLES: usize = 4096;
/// Momentum samples per node used when caching sampled constants.
const MOMENTUM_SAMPLES: usize = 257;
/// Default half-width of the sampled momentum window.
pub const DEFAULT_P_RANGE: f64 = 16.0;
/// Centered finite-difference step for derivatives of tabulated data.
pub const FD_STEP: f64 = 1e-6;

/// Trigonometric polynomial `mean + Σ_k cos_k cos(kx) + sin_k sin(kx)`, `k ≥ 1`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FourierSeries {
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl FourierSeries {
    pub fn constant(value: f64) -> Self {
        Self { mean: value, ..Self::default() }
    }

    pub fn new(mean: f64, cos: Vec<f64>, sin: Vec<f64>) -> Self {
        Self { mean, cos, sin }
    }

    /// `cos x − 1`.
    pub fn cos_minus_one() -> Self {
        Self::new(-1.0, vec![1.0], vec![])
    }

    /// `1 − cos x`.
    pub fn one_minus_cos() -> Self {
        Self::new(1.0, vec![-1.0], vec![])
    }

    /// `(1 − cos x)² = 3/2 − 2 cos x + ½ cos 2x`.
    pub fn one_minus_cos_squared() -> Self {
        Self::new(1.5, vec![-2.0, 0.5], vec![])
    }

    /// `(1 + cos x)² = 3/2 + 2 cos x + ½ cos 2x`.
    pub fn one_plus_cos_squared() -> Self {
        Self::new(1.5, vec![2.0, 0.5], vec![])
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = self.mean;
        for (k, a) in self.cos.iter().enumerate() {
            acc += a * ((k + 1) as f64 * x).cos();
        }
        for (k, b) in self.sin.iter().enumerate() {
            acc += b * ((k + 1) as f64 * x).sin();
        }
        acc
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, a) in self.cos.iter().enumerate() {
            let m = (k + 1) as f64;
            acc -= a * m * (m * x).sin();
        }
        for (k, b) in self.sin.iter().enumerate() {
            let m = (k + 1) as f64;
            acc += b * m * (m * x).cos();
        }
        acc
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            mean: self.mean * k,
            cos: self.cos.iter().map(|a| a * k).collect(),
            sin: self.sin.iter().map(|b| b * k).collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let add = |a: &[f64], b: &[f64]| -> Vec<f64> {
            (0..a.len().max(b.len()))
                .map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0))
                .collect()
        };
        Self {
            mean: self.mean + other.mean,
            cos: add(&self.cos, &other.cos),
            sin: add(&self.sin, &other.sin),
        }
    }
}

/// Uniform periodic samples on `[0, 2π)`, evaluated by periodic cubic
/// interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSamples {
    values: Arc<[f64]>,
}

impl PeriodicSamples {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 4 {
            return Err(Error::InvalidInput("tabulated periodic data needs at least 4 samples".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tabulated periodic data"));
        }
        Ok(Self { values: values.into() })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let dx = TAU / n as f64;
        Self::new((0..n).map(|i| f(i as f64 * dx)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        interp_cubic(&self.values, x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.eval(x + FD_STEP) - self.eval(x - FD_STEP)) / (2.0 * FD_STEP)
    }
}

/// A smooth periodic function of position.
#[derive(Debug, Clone, PartialEq)]
pub enum PeriodicFn {
    Fourier(FourierSeries),
    Samples(PeriodicSamples),
}

impl PeriodicFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Fourier(f) => f.eval(x),
            Self::Samples(s) => s.eval(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::Fourier(f) => f.derivative(x),
            Self::Samples(s) => s.derivative(x),
        }
    }

    /// `self + k · other`.
    pub fn plus_scaled(&self, k: f64, other: &PeriodicFn) -> Result<PeriodicFn> {
        match (self, other) {
            (Self::Fourier(a), Self::Fourier(b)) => Ok(Self::Fourier(a.plus(&b.scaled(k)))),
            (a, b) => {
                // fall back to samples at the resolution of the tabulated side
                let n = match (a, b) {
                    (Self::Samples(s), _) | (_, Self::Samples(s)) => s.values().len(),
                    _ => unreachable!(),
                };
                let dx = TAU / n as f64;
                let values = (0..n)
                    .map(|i| {
                        let x = i as f64 * dx;
                        a.eval(x) + k * b.eval(x)
                    })
                    .collect();
                Ok(Self::Samples(PeriodicSamples::new(values)?))
            }
        }
    }
}

/// Sign class of a discount factor, following the `(+)`, `(−)` and `(±)`
/// assumptions on `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignClass {
    Plus,
    Minus,
    PlusMinus,
    IdenticallyZero,
}

impl SignClass {
    pub fn from_range(lambda_minus: f64, lambda_plus: f64) -> Self {
        if lambda_minus >= 0.0 && lambda_plus > 0.0 {
            Self::Plus
        } else if lambda_plus <= 0.0 && lambda_minus < 0.0 {
            Self::Minus
        } else if lambda_minus < 0.0 && lambda_plus > 0.0 {
            Self::PlusMinus
        } else {
            Self::IdenticallyZero
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiscountKind {
    Constant(f64),
    /// `λ(x) = sin x`
    Sine,
    /// `λ(x) = (1 − cos x)²`
    OneMinusCosSquared,
    Fourier(FourierSeries),
    Tabulated(PeriodicSamples),
}

impl DiscountKind {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Sine => x.sin(),
            Self::OneMinusCosSquared => {
                let s = 1.0 - x.cos();
                s * s
            }
            Self::Fourier(f) => f.eval(x),
            Self::Tabulated(t) => t.eval(x),
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::Constant(_) => 0.0,
            Self::Sine => x.cos(),
            Self::OneMinusCosSquared => 2.0 * (1.0 - x.cos()) * x.sin(),
            Self::Fourier(f) => f.derivative(x),
            Self::Tabulated(t) => t.derivative(x),
        }
    }

    fn as_periodic_fn(&self) -> PeriodicFn {
        match self {
            Self::Constant(v) => PeriodicFn::Fourier(FourierSeries::constant(*v)),
            Self::Sine => PeriodicFn::Fourier(FourierSeries::new(0.0, vec![], vec![1.0])),
            Self::OneMinusCosSquared => PeriodicFn::Fourier(FourierSeries::one_minus_cos_squared()),
            Self::Fourier(f) => PeriodicFn::Fourier(f.clone()),
            Self::Tabulated(t) => PeriodicFn::Samples(t.clone()),
        }
    }
}

/// Discount factor `λ(x)` with cached range constants.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountSpec {
    kind: DiscountKind,
    negated: bool,
    lambda_plus: f64,
    lambda_minus: f64,
    sign_class: SignClass,
}

impl DiscountSpec {
    pub fn new(kind: DiscountKind) -> Result<Self> {
        if let DiscountKind::Constant(v) = kind {
            ensure_finite(v, "constant discount")?;
        }
        let mut spec = Self {
            kind,
            negated: false,
            lambda_plus: 0.0,
            lambda_minus: 0.0,
            sign_class: SignClass::IdenticallyZero,
        };
        let dx = TAU / CONSTANT_SAMPLES as f64;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..CONSTANT_SAMPLES {
            let v = spec.value(i as f64 * dx);
            ensure_finite(v, "discount sample")?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        spec.lambda_plus = hi;
        spec.lambda_minus = lo;
        spec.sign_class = SignClass::from_range(lo, hi);
        Ok(spec)
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(DiscountKind::Constant(value))
    }

    pub fn sine() -> Self {
        Self::new(DiscountKind::Sine).expect("closed form")
    }

    pub fn one_minus_cos_squared() -> Self {
        Self::new(DiscountKind::OneMinusCosSquared).expect("closed form")
    }

    pub fn kind(&self) -> &DiscountKind {
        &self.kind
    }

    pub fn is_negated(&self) -> bool {
        self.negated
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.kind, DiscountKind::Tabulated(_))
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let v = self.kind.eval(x);
        if self.negated {
            -v
        } else {
            v
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        let d = self.kind.derivative(x);
        if self.negated {
            -d
        } else {
            d
        }
    }

    /// `λ` as a plain periodic function (used to build `h + aλ`).
    pub fn as_periodic_fn(&self) -> PeriodicFn {
        let f = self.kind.as_periodic_fn();
        if !self.negated {
            return f;
        }
        match f {
            PeriodicFn::Fourier(s) => PeriodicFn::Fourier(s.scaled(-1.0)),
            PeriodicFn::Samples(s) => PeriodicFn::Samples(
                PeriodicSamples::new(s.values().iter().map(|v| -v).collect()).expect("finite"),
            ),
        }
    }

    /// `max λ`
    pub fn lambda_plus(&self) -> f64 {
        self.lambda_plus
    }

    /// `min λ`
    pub fn lambda_minus(&self) -> f64 {
        self.lambda_minus
    }

    /// `Λ = ‖λ‖_∞`
    pub fn lambda_abs_max(&self) -> f64 {
        self.lambda_plus.abs().max(self.lambda_minus.abs())
    }

    pub fn sign_class(&self) -> SignClass {
        self.sign_class
    }

    /// `−λ`; an involution.
    pub fn negated(&self) -> Self {
        Self {
            kind: self.kind.clone(),
            negated: !self.negated,
            lambda_plus: -self.lambda_minus,
            lambda_minus: -self.lambda_plus,
            sign_class: SignClass::from_range(-self.lambda_plus, -self.lambda_minus),
        }
    }
}

/// Hamiltonian sampled on a uniform `(x, p)` lattice and evaluated by
/// bilinear interpolation (periodic in `x`, linearly extrapolated in `p`).
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedHamiltonian {
    nx: usize,
    np: usize,
    p_max: f64,
    values: Arc<[f64]>,
}

impl TabulatedHamiltonian {
    /// `values[i * np + j] = h(x_i, p_j)` with `x_i = 2πi/nx`, `p_j = −p_max + 2 p_max j/(np − 1)`.
    pub fn new(nx: usize, np: usize, p_max: f64, values: Vec<f64>) -> Result<Self> {
        if nx < 4 || np < 5 || !(p_max > 0.0) {
            return Err(Error::InvalidInput("tabulated Hamiltonian lattice too small".into()));
        }
        if values.len() != nx * np {
            return Err(Error::InvalidInput(format!(
                "tabulated Hamiltonian expects {} values, got {}",
                nx * np,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tabulated Hamiltonian"));
        }
        let table = Self { nx, np, p_max, values: values.into() };
        table.check_convexity()?;
        Ok(table)
    }

    pub fn from_fn(nx: usize, np: usize, p_max: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let dx = TAU / nx as f64;
        let dp = 2.0 * p_max / (np - 1) as f64;
        let mut values = Vec::with_capacity(nx * np);
        for i in 0..nx {
            for j in 0..np {
                values.push(f(i as f64 * dx, -p_max + j as f64 * dp));
            }
        }
        Self::new(nx, np, p_max, values)
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn dp(&self) -> f64 {
        2.0 * self.p_max / (self.np - 1) as f64
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[(i % self.nx) * self.np + j]
    }

    fn check_convexity(&self) -> Result<()> {
        for i in 0..self.nx {
            for j in 1..self.np - 1 {
                let d2 = self.at(i, j + 1) - 2.0 * self.at(i, j) + self.at(i, j - 1);
                if !(d2 > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "tabulated Hamiltonian not strictly convex in p at lattice ({i}, {j})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `max over samples of K|p| − h(x, p)` for `K ∈ {1, 2}`.
    pub fn superlinearity_witness(&self) -> [f64; 2] {
        let dp = self.dp();
        let mut out = [f64::NEG_INFINITY; 2];
        for i in 0..self.nx {
            for j in 0..self.np {
                let p = -self.p_max + j as f64 * dp;
                for (k, o) in out.iter_mut().enumerate() {
                    *o = o.max((k + 1) as f64 * p.abs() - self.at(i, j));
                }
            }
        }
        out
    }

    pub fn eval(&self, x: f64, p: f64) -> f64 {
        let s = wrap_angle(x) / TAU * self.nx as f64;
        let i0 = (s.floor() as usize).min(self.nx - 1);
        let fx = s - i0 as f64;
        let dp = self.dp();
        let t = ((p + self.p_max) / dp).clamp(0.0, (self.np - 1) as f64);
        let j0 = (t.floor() as usize).min(self.np - 2);
        let along = |i: usize| {
            let base = self.at(i, j0) + (self.at(i, j0 + 1) - self.at(i, j0)) * (t - j0 as f64);
            if p.abs() > self.p_max {
                // linear extrapolation with the edge slope
                let (ja, jb) = if p > 0.0 { (self.np - 2, self.np - 1) } else { (0, 1) };
                let slope = (self.at(i, jb) - self.at(i, ja)) / dp;
                let edge = if p > 0.0 { self.p_max } else { -self.p_max };
                base + slope * (p - edge)
            } else {
                base
            }
        };
        along(i0) * (1.0 - fx) + along(i0 + 1) * fx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianKind {
    /// `h(x, p) = |p|²`
    QuadraticP2,
    /// `h(x, p) = ½ p² + V(x)`
    Mechanical(PeriodicFn),
    Tabulated(TabulatedHamiltonian),
}

/// Tonelli Hamiltonian `h(x, p)`, optionally mirrored (`p ↦ −p`) and shifted by
/// a potential, with cached `E₀ = max_x h(x, 0)` and `e₀ = min h`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    kind: HamiltonianKind,
    extra: Option<PeriodicFn>,
    mirrored: bool,
    p_range: f64,
    max_h_at_zero: f64,
    min_h: f64,
}

impl HamiltonianSpec {
    pub fn new(kind: HamiltonianKind) -> Result<Self> {
        Self::with_p_range(kind, DEFAULT_P_RANGE)
    }

    pub fn with_p_range(kind: HamiltonianKind, p_range: f64) -> Result<Self> {
        if !(p_range > 0.0) || !p_range.is_finite() {
            return Err(Error::InvalidInput("momentum range must be positive".into()));
        }
        let mut spec = Self {
            kind,
            extra: None,
            mirrored: false,
            p_range,
            max_h_at_zero: 0.0,
            min_h: 0.0,
        };
        spec.refresh_constants()?;
        Ok(spec)
    }

    pub fn quadratic() -> Self {
        Self::new(HamiltonianKind::QuadraticP2).expect("closed form")
    }

    pub fn mechanical(potential: FourierSeries) -> Self {
        Self::new(HamiltonianKind::Mechanical(PeriodicFn::Fourier(potential))).expect("closed form")
    }

    /// `½p² + cos x − 1`
    pub fn pendulum() -> Self {
        Self::mechanical(FourierSeries::cos_minus_one())
    }

    fn refresh_constants(&mut self) -> Result<()> {
        let dx = TAU / CONSTANT_SAMPLES as f64;
        let dp = 2.0 * self.p_range / (MOMENTUM_SAMPLES - 1) as f64;
        let (mut big, mut small) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..CONSTANT_SAMPLES {
            let x = i as f64 * dx;
            big = big.max(ensure_finite(self.eval(x, 0.0), "Hamiltonian sample")?);
            for j in 0..MOMENTUM_SAMPLES {
                let p = -self.p_range + j as f64 * dp;
                small = small.min(ensure_finite(self.eval(x, p), "Hamiltonian sample")?);
            }
        }
        self.max_h_at_zero = big;
        self.min_h = small;
        Ok(())
    }

    pub fn kind(&self) -> &HamiltonianKind {
        &self.kind
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.kind, HamiltonianKind::Tabulated(_))
    }

    pub fn is_mirrored(&self) -> bool {
        self.mirrored
    }

    pub fn p_range(&self) -> f64 {
        self.p_range
    }

    /// `E₀ = max_x h(x, 0)`
    pub fn max_h_at_zero(&self) -> f64 {
        self.max_h_at_zero
    }

    /// `e₀ = min_{(x,p)} h(x, p)`
    pub fn min_h(&self) -> f64 {
        self.min_h
    }

    /// `h + k·f`, re-sampling the cached constants.
    pub fn plus_potential(&self, k: f64, f: &PeriodicFn) -> Result<Self> {
        let extra = match &self.extra {
            None => match f {
                PeriodicFn::Fourier(s) => PeriodicFn::Fourier(s.scaled(k)),
                PeriodicFn::Samples(_) => PeriodicFn::Fourier(FourierSeries::constant(0.0)).plus_scaled(k, f)?,
            },
            Some(e) => e.plus_scaled(k, f)?,
        };
        let mut spec = Self { extra: Some(extra), ..self.clone() };
        spec.refresh_constants()?;
        Ok(spec)
    }

    /// `h(x, −p)`; an involution. Even kinds are returned unchanged.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        if self.is_tabulated() {
            out.mirrored = !self.mirrored;
        }
        out
    }

    fn extra_at(&self, x: f64) -> f64 {
        self.extra.as_ref().map_or(0.0, |e| e.eval(x))
    }

    fn extra_derivative(&self, x: f64) -> f64 {
        self.extra.as_ref().map_or(0.0, |e| e.derivative(x))
    }

    #[inline]
    fn orient(&self, p: f64) -> f64 {
        if self.mirrored {
            -p
        } else {
            p
        }
    }

    #[inline]
    pub fn eval(&self, x: f64, p: f64) -> f64 {
        let p = self.orient(p);
        let base = match &self.kind {
            HamiltonianKind::QuadraticP2 => p * p,
            HamiltonianKind::Mechanical(v) => 0.5 * p * p + v.eval(x),
            HamiltonianKind::Tabulated(t) => t.eval(x, p),
        };
        base + self.extra_at(x)
    }

    /// `∂h/∂p`
    pub fn dp(&self, x: f64, p: f64) -> f64 {
        let q = self.orient(p);
        let d = match &self.kind {
            HamiltonianKind::QuadraticP2 => 2.0 * q,
            HamiltonianKind::Mechanical(_) => q,
            HamiltonianKind::Tabulated(t) => (t.eval(x, q + FD_STEP) - t.eval(x, q - FD_STEP)) / (2.0 * FD_STEP),
        };
        if self.mirrored {
            -d
        } else {
            d
        }
    }

    /// `∂h/∂x`
    pub fn dx(&self, x: f64, p: f64) -> f64 {
        let q = self.orient(p);
        let d = match &self.kind {
            HamiltonianKind::QuadraticP2 => 0.0,
            HamiltonianKind::Mechanical(v) => v.derivative(x),
            HamiltonianKind::Tabulated(t) => (t.eval(x + FD_STEP, q) - t.eval(x - FD_STEP, q)) / (2.0 * FD_STEP),
        };
        d + self.extra_derivative(x)
    }

    /// Coefficient `α` when the Lagrangian has the form `l(x, v) = α v² + l(x, 0)`.
    pub fn quadratic_velocity_coef(&self) -> Option<f64> {
        match self.kind {
            HamiltonianKind::QuadraticP2 => Some(0.25),
            HamiltonianKind::Mechanical(_) => Some(0.5),
            HamiltonianKind::Tabulated(_) => None,
        }
    }

    /// `l(x, v) = sup_p { p v − h(x, p) }`.
    pub fn lagrangian(&self, x: f64, v: f64) -> Result<f64> {
        let w = self.orient(v);
        let base = match &self.kind {
            HamiltonianKind::QuadraticP2 => 0.25 * w * w,
            HamiltonianKind::Mechanical(pot) => 0.5 * w * w - pot.eval(x),
            HamiltonianKind::Tabulated(t) => tabulated_legendre(t, x, w)?,
        };
        Ok(base - self.extra_at(x))
    }
}

/// Golden-section maximization of the concave map `p ↦ p v − h(x, p)`.
fn tabulated_legendre(t: &TabulatedHamiltonian, x: f64, v: f64) -> Result<f64> {
    let objective = |p: f64| p * v - t.eval(x, p);
    let p_star = crate::optim::golden_max(objective, -t.p_max, t.p_max, 1e-10, 200);
    if p_star.abs() >= t.p_max - 0.5 * t.dp() {
        return Err(Error::MomentumRangeTooSmall { x, v, p_bound: t.p_max });
    }
    Ok(objective(p_star))
}

/// Constants derived from a contact model by dense sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    /// `E₀`
    pub max_h_at_zero: f64,
    /// `e₀`
    pub min_h: f64,
    /// `Λ`
    pub lambda_abs_max: f64,
    /// `λ₊`
    pub lambda_plus: f64,
    /// `λ₋`
    pub lambda_minus: f64,
    pub sign_class: SignClass,
}

/// The triple `(h, λ, c)` defining `H(x, p, u) = λ(x) u + h(x, p) − c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactModel {
    pub h: HamiltonianSpec,
    pub lambda: DiscountSpec,
    pub c: f64,
}

impl ContactModel {
    pub fn new(h: HamiltonianSpec, lambda: DiscountSpec, c: f64) -> Result<Self> {
        ensure_finite(c, "c")?;
        Ok(Self { h, lambda, c })
    }

    pub fn with_c(&self, c: f64) -> Self {
        Self { c, ..self.clone() }
    }

    pub fn eval_hamiltonian(&self, x: f64, p: f64, u: f64) -> Result<f64> {
        ensure_finite(x, "x")?;
        ensure_finite(p, "p")?;
        ensure_finite(u, "u")?;
        ensure_finite(self.hamiltonian(x, p, u), "H")
    }

    /// Unchecked `H(x, p, u)`.
    #[inline]
    pub fn hamiltonian(&self, x: f64, p: f64, u: f64) -> f64 {
        self.lambda.value(x) * u + self.h.eval(x, p) - self.c
    }

    pub fn eval_lagrangian(&self, x: f64, v: f64) -> Result<f64> {
        ensure_finite(x, "x")?;
        ensure_finite(v, "v")?;
        self.h.lagrangian(x, v)
    }

    pub fn constants(&self) -> ModelConstants {
        ModelConstants {
            max_h_at_zero: self.h.max_h_at_zero(),
            min_h: self.h.min_h(),
            lambda_abs_max: self.lambda.lambda_abs_max(),
            lambda_plus: self.lambda.lambda_plus(),
            lambda_minus: self.lambda.lambda_minus(),
            sign_class: self.lambda.sign_class(),
        }
    }

    /// `H̆(x, p, u) = H(x, −p, −u)`: discount `−λ`, Hamiltonian `h(x, −p)`, same `c`.
    pub fn reflect(&self) -> Self {
        Self {
            h: self.h.mirrored(),
            lambda: self.lambda.negated(),
            c: self.c,
        }
    }

    /// A position maximizing `λ` on the constant-sampling lattice.
    pub fn argmax_lambda(&self) -> f64 {
        let dx = TAU / CONSTANT_SAMPLES as f64;
        (0..CONSTANT_SAMPLES)
            .map(|i| i as f64 * dx)
            .fold((0.0, f64::NEG_INFINITY), |(bx, bv), x| {
                let v = self.lambda.value(x);
                if v > bv {
                    (x, v)
                } else {
                    (bx, bv)
                }
            })
            .0
    }
}

/// Built-in model families.
pub mod presets {
    use super::*;

    /// `h = |p|²`, `λ = sin x`
    pub fn quadratic_sine(c: f64) -> ContactModel {
        ContactModel { h: HamiltonianSpec::quadratic(), lambda: DiscountSpec::sine(), c }
    }

    /// `h = ½p² + cos x − 1`, `λ = sin x`
    pub fn pendulum_sine(c: f64) -> ContactModel {
        ContactModel { h: HamiltonianSpec::pendulum(), lambda: DiscountSpec::sine(), c }
    }

    /// `h = ½p² + 1 − cos x`, `λ = (1 − cos x)²`: no subsolution at the critical value.
    pub fn appendix_c(c: f64) -> ContactModel {
        ContactModel {
            h: HamiltonianSpec::mechanical(FourierSeries::one_minus_cos()),
            lambda: DiscountSpec::one_minus_cos_squared(),
            c,
        }
    }

    /// `h = ½p²`, `λ ≡ 1`
    pub fn homogeneous(c: f64) -> ContactModel {
        ContactModel {
            h: HamiltonianSpec::mechanical(FourierSeries::constant(0.0)),
            lambda: DiscountSpec::constant(1.0).expect("finite"),
            c,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::presets::*;
    use super::*;
    use std::f64::consts::PI;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hamiltonian_examples() {
        let m = quadratic_sine(0.0);
        assert_eq!(m.eval_hamiltonian(PI / 2.0, 0.0, 1.0).unwrap(), 1.0);

        let m = pendulum_sine(1.0);
        let h = m.eval_hamiltonian(PI / 3.0, 0.0, 3f64.sqrt()).unwrap();
        assert_abs_diff_eq!(h, 0.0, epsilon = 1e-14);

        for &(x, p) in &[(0.3, -1.2), (2.0, 0.7), (5.5, 3.0)] {
            let m = appendix_c(0.25);
            assert_eq!(m.eval_hamiltonian(x, p, 0.0).unwrap(), m.h.eval(x, p) - 0.25);
        }
    }

    #[test]
    fn non_finite_rejected() {
        let m = pendulum_sine(1.0);
        assert!(m.eval_hamiltonian(f64::NAN, 0.0, 0.0).is_err());
        assert!(m.eval_hamiltonian(0.0, f64::INFINITY, 0.0).is_err());
        assert!(m.eval_lagrangian(0.0, f64::NAN).is_err());
    }

    #[test]
    fn lagrangian_examples() {
        let m = pendulum_sine(0.0);
        assert_eq!(m.eval_lagrangian(0.0, 0.0).unwrap(), 0.0);
        let m = quadratic_sine(0.0);
        assert_eq!(m.eval_lagrangian(1.234, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn tabulated_legendre_matches_closed_form() {
        // p lattice spacing 1/64 puts p = 1.5 on a node
        let t = TabulatedHamiltonian::from_fn(64, 2049, 16.0, |_, p| 0.5 * p * p).unwrap();
        let h = HamiltonianSpec::new(HamiltonianKind::Tabulated(t)).unwrap();
        let l = h.lagrangian(0.7, 1.5).unwrap();
        assert_abs_diff_eq!(l, 1.125, epsilon = 1e-8);
    }

    #[test]
    fn tabulated_legendre_boundary_is_an_error() {
        let t = TabulatedHamiltonian::from_fn(16, 65, 2.0, |_, p| 0.5 * p * p).unwrap();
        let h = HamiltonianSpec::new(HamiltonianKind::Tabulated(t)).unwrap();
        assert!(matches!(h.lagrangian(0.0, 5.0), Err(Error::MomentumRangeTooSmall { .. })));
    }

    #[test]
    fn tabulated_must_be_convex() {
        let r = TabulatedHamiltonian::from_fn(16, 33, 2.0, |_, p| p.abs());
        assert!(r.is_err());
        let t = TabulatedHamiltonian::from_fn(16, 33, 2.0, |_, p| p * p).unwrap();
        let w = t.superlinearity_witness();
        assert!(w.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn constants_pendulum_sine() {
        let k = pendulum_sine(1.0).constants();
        assert_abs_diff_eq!(k.max_h_at_zero, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k.min_h, -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k.lambda_abs_max, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k.lambda_plus, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k.lambda_minus, -1.0, epsilon = 1e-12);
        assert_eq!(k.sign_class, SignClass::PlusMinus);
    }

    #[test]
    fn constants_other_discounts() {
        let k = homogeneous(0.0).constants();
        assert_eq!((k.lambda_plus, k.lambda_minus, k.lambda_abs_max), (1.0, 1.0, 1.0));
        assert_eq!(k.sign_class, SignClass::Plus);

        let k = appendix_c(0.0).constants();
        assert_eq!(k.lambda_minus, 0.0);
        assert_abs_diff_eq!(k.lambda_plus, 4.0, epsilon = 1e-12);
        assert_eq!(k.sign_class, SignClass::Plus);
    }

    #[test]
    fn reflect_examples() {
        let m = pendulum_sine(1.0);
        let r = m.reflect();
        assert_eq!(r.c, m.c);
        for i in 0..64 {
            let x = i as f64 * 0.1;
            assert_eq!(r.lambda.value(x), -x.sin());
            assert_eq!(r.h.eval(x, 0.4), m.h.eval(x, 0.4));
        }
        assert_eq!(r.constants().sign_class, SignClass::PlusMinus);
        assert_eq!(homogeneous(0.0).reflect().constants().sign_class, SignClass::Minus);
    }

    #[test]
    fn reflect_is_an_involution() {
        let t = TabulatedHamiltonian::from_fn(32, 65, 4.0, |x, p| 0.5 * (p - 0.3 * x.sin()).powi(2)).unwrap();
        let models = [
            pendulum_sine(1.0),
            appendix_c(-0.3),
            ContactModel::new(
                HamiltonianSpec::new(HamiltonianKind::Tabulated(t)).unwrap(),
                DiscountSpec::sine(),
                0.5,
            )
            .unwrap(),
        ];
        for m in &models {
            let rr = m.reflect().reflect();
            assert_eq!(&rr, m);
            let r = m.reflect();
            let (k, kr) = (m.constants(), r.constants());
            assert_eq!(kr.lambda_plus, -k.lambda_minus);
            assert_eq!(kr.max_h_at_zero, k.max_h_at_zero);
            assert_eq!(kr.min_h, k.min_h);
            for i in 0..50 {
                let x = 0.13 * i as f64;
                let p = -2.0 + 0.08 * i as f64;
                assert_eq!(r.h.eval(x, p), m.h.eval(x, -p));
            }
        }
    }

    #[test]
    fn lipschitz_in_u_is_exact() {
        let m = pendulum_sine(0.7);
        for i in 0..100 {
            let x = 0.0628 * i as f64;
            let (u, w) = (0.3 * i as f64 - 10.0, -0.17 * i as f64);
            let d = (m.hamiltonian(x, 0.5, u) - m.hamiltonian(x, 0.5, w)).abs();
            let lam = m.lambda.value(x).abs();
            assert_abs_diff_eq!(d, lam * (u - w).abs(), epsilon = 1e-12 * (1.0 + u.abs() + w.abs()));
            assert!(lam <= m.constants().lambda_abs_max);
        }
    }

    #[test]
    fn legendre_duality_on_samples() {
        let m = pendulum_sine(0.0);
        let vs: Vec<f64> = (0..=4000).map(|k| -20.0 + 0.01 * k as f64).collect();
        for i in 0..16 {
            let x = 0.39 * i as f64;
            for &p in &[-3.0, -0.5, 0.0, 1.25, 4.0] {
                let best = vs
                    .iter()
                    .map(|&v| p * v - m.h.lagrangian(x, v).unwrap())
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_abs_diff_eq!(best, m.h.eval(x, p), epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn potential_shift_family() {
        let h = HamiltonianSpec::mechanical(FourierSeries::one_minus_cos());
        let lam = DiscountSpec::one_minus_cos_squared();
        let shifted = h.plus_potential(-1.0, &lam.as_periodic_fn()).unwrap();
        let x: f64 = 1.1;
        let s = 1.0 - x.cos();
        assert_abs_diff_eq!(shifted.eval(x, 0.0), s - s * s, epsilon = 1e-12);
        assert_abs_diff_eq!(shifted.lagrangian(x, 0.0).unwrap(), -(s - s * s), epsilon = 1e-12);
    }
}
