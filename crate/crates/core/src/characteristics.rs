//! Contact characteristics
//!
//! ```text
//! ẋ = h_p,   ṗ = −λ'(x)u − h_x − λ(x)p,   u̇ = p·h_p − h − λ(x)u + c
//! ```
//!
//! fixed points, Mather averages of `λ` on the 1-graph of `u_-`, the Lyapunov
//! test-function margin and calibration errors.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::grid::{fmt_float, interp_linear, torus_distance, wrap_angle, GridFn, Interpolation};
use crate::model::ContactModel;
use crate::semigroup::{Direction, StationarySolution};

/// Orbits whose state norm exceeds this are truncated and flagged as escaped.
pub const ESCAPE_NORM: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactState {
    pub x: f64,
    pub p: f64,
    pub u: f64,
}

impl ContactState {
    pub fn new(x: f64, p: f64, u: f64) -> Self {
        Self { x: wrap_angle(x), p, u }
    }

    fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.p, self.u)
    }

    fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    /// Distance with `x` measured on the circle.
    pub fn distance(&self, other: &ContactState) -> f64 {
        let dx = torus_distance(self.x, other.x);
        (dx * dx + (self.p - other.p).powi(2) + (self.u - other.u).powi(2)).sqrt()
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.p.is_finite() && self.u.is_finite()
    }
}

/// The vector field at `(x, p, u)`; `x` is not wrapped.
pub fn field(model: &ContactModel, x: f64, p: f64, u: f64) -> [f64; 3] {
    let hp = model.h.dp(x, p);
    let lam = model.lambda.value(x);
    [
        hp,
        -model.lambda.derivative(x) * u - model.h.dx(x, p) - lam * p,
        p * hp - model.h.eval(x, p) - lam * u + model.c,
    ]
}

fn rk4(model: &ContactModel, y: [f64; 3], dt: f64, sign: f64) -> [f64; 3] {
    let f = |y: [f64; 3]| {
        let d = field(model, y[0], y[1], y[2]);
        [sign * d[0], sign * d[1], sign * d[2]]
    };
    let add = |y: [f64; 3], k: [f64; 3], s: f64| [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]];
    let k1 = f(y);
    let k2 = f(add(y, k1, 0.5 * dt));
    let k3 = f(add(y, k2, 0.5 * dt));
    let k4 = f(add(y, k3, dt));
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OrbitRecord {
    pub times: Vec<f64>,
    pub states: Vec<ContactState>,
    /// `(1/t)∫₀ᵗ λ(x(s)) ds` by the trapezoid rule; `λ(x₀)` at `t = 0`
    pub lambda_avg: Vec<f64>,
    pub escaped: bool,
}

impl OrbitRecord {
    pub fn last(&self) -> &ContactState {
        self.states.last().expect("orbit has at least its initial state")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,p,u,lambda_avg\n");
        for k in 0..self.times.len() {
            let s = self.states[k];
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_float(self.times[k]),
                fmt_float(s.x),
                fmt_float(s.p),
                fmt_float(s.u),
                fmt_float(self.lambda_avg[k])
            );
        }
        out
    }
}

/// Classical RK4 on the characteristic field; `Backward` integrates the
/// negated field. Every step is recorded.
pub fn integrate(
    model: &ContactModel,
    start: ContactState,
    t_final: f64,
    dt: f64,
    direction: Direction,
) -> Result<OrbitRecord> {
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::InvalidInput("integration needs dt > 0 and t ≥ 0".into()));
    }
    if !start.is_finite() {
        return Err(Error::NonFinite("initial contact state"));
    }
    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let steps = ((t_final / dt) - 1e-9).ceil().max(0.0) as usize;
    let mut rec = OrbitRecord::default();
    let mut y = [start.x, start.p, start.u];
    let mut lam_prev = model.lambda.value(y[0]);
    let mut integral = 0.0;
    rec.times.push(0.0);
    rec.states.push(ContactState::new(y[0], y[1], y[2]));
    rec.lambda_avg.push(lam_prev);
    for k in 1..=steps {
        let t_prev = (k - 1) as f64 * dt;
        let t = if k == steps { t_final } else { k as f64 * dt };
        let h = t - t_prev;
        y = rk4(model, y, h, sign);
        let norm = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        if !norm.is_finite() || norm > ESCAPE_NORM {
            rec.escaped = true;
            break;
        }
        y[0] = wrap_angle(y[0]);
        let lam = model.lambda.value(y[0]);
        integral += 0.5 * (lam_prev + lam) * h;
        lam_prev = lam;
        rec.times.push(t);
        rec.states.push(ContactState::new(y[0], y[1], y[2]));
        rec.lambda_avg.push(integral / t);
    }
    Ok(rec)
}

fn residual_vector(model: &ContactModel, v: &Vector3<f64>) -> Vector3<f64> {
    let f = field(model, v[0], v[1], v[2]);
    Vector3::new(f[0], f[1], f[2])
}

/// Newton iteration on the characteristic field with a central-difference
/// Jacobian (step `1e−6`). The linear solve uses the SVD pseudo-inverse, so
/// degenerate Jacobians (continua of fixed points) still produce steps.
pub fn find_fixed_point(model: &ContactModel, seed: ContactState, tol: f64) -> Result<ContactState> {
    const MAX_ITER: usize = 100;
    const STEP: f64 = 1e-6;
    let mut v = seed.as_vector();
    let mut f = residual_vector(model, &v);
    for _ in 0..MAX_ITER {
        // keep going past `tol` while steps still reduce the residual; at
        // degenerate zeros the residual is quadratic in the offset
        let converged = f.norm() < tol;
        let mut jac = Matrix3::zeros();
        for j in 0..3 {
            let mut e = Vector3::zeros();
            e[j] = STEP;
            let col = (residual_vector(model, &(v + e)) - residual_vector(model, &(v - e))) / (2.0 * STEP);
            jac.set_column(j, &col);
        }
        let svd = jac.svd(true, true);
        let eps = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
        let pinv = svd.pseudo_inverse(eps).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let delta = pinv * f;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = v - alpha * delta;
            let ft = residual_vector(model, &trial);
            if ft.norm() < f.norm() {
                v = trial;
                f = ft;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted || (converged && f.norm() == 0.0) {
            break;
        }
    }
    if f.norm() < tol {
        return Ok(ContactState::from_vector(&v));
    }
    Err(Error::NewtonFailed { iterations: MAX_ITER, residual: f.norm() })
}

/// `max_t |u(t) − u_-(x(t))|` along an orbit.
pub fn calibration_error(u_minus: &StationarySolution, orbit: &OrbitRecord) -> f64 {
    orbit
        .states
        .iter()
        .map(|s| (s.u - u_minus.u.interpolate(s.x, Interpolation::Linear)).abs())
        .fold(0.0, f64::max)
}

/// Jets `(x_i, Du_i, u_i)` at every `stride`-th node, skipping kinks:
/// nodes whose centered second difference exceeds `10·max(median, 1)` in
/// absolute value.
pub fn graph_seeds(u: &GridFn, stride: usize) -> Vec<ContactState> {
    let grad = u.gradient();
    let d2 = u.second_difference();
    let mut abs: Vec<f64> = d2.values().iter().map(|v| v.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let median = abs[abs.len() / 2];
    let cut = 10.0 * median.max(1.0);
    let g = u.grid();
    (0..g.n())
        .step_by(stride.max(1))
        .filter(|&i| d2.values()[i].abs() <= cut)
        .map(|i| ContactState::new(g.node(i), grad.values()[i], u.values()[i]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatherConfig {
    pub stride: usize,
    /// length of the graph flow whose second half is averaged
    pub horizon: f64,
    pub dt: f64,
    /// calibration error beyond which a seed counts as escaped
    pub escape_tol: f64,
    /// longest backward characteristic run used for the escape test
    pub check_time: f64,
    /// the escape run is also cut once it has covered this distance in `x`
    pub check_travel: f64,
    /// on-graph tolerance for fixed points
    pub graph_tol: f64,
    pub newton_tol: f64,
    pub execution: Execution,
}

impl Default for MatherConfig {
    fn default() -> Self {
        Self {
            stride: 8,
            horizon: 200.0,
            dt: 1e-3,
            escape_tol: 0.1,
            check_time: 1.0,
            check_travel: 0.5,
            graph_tol: 0.05,
            newton_tol: 1e-12,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAverage {
    pub seed: ContactState,
    pub average: f64,
    pub escaped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub state: ContactState,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatherEstimate {
    pub a_hat: f64,
    pub seeds: Vec<SeedAverage>,
    pub fixed_points: Vec<FixedPoint>,
}

impl MatherEstimate {
    pub fn to_json(&self) -> serde_json::Value {
        let seeds: Vec<_> = self
            .seeds
            .iter()
            .map(|s| json!({"x0": s.seed.x, "p0": s.seed.p, "u0": s.seed.u, "avg": s.average, "escaped": s.escaped}))
            .collect();
        let fps: Vec<_> = self
            .fixed_points
            .iter()
            .map(|f| json!({"x": f.state.x, "p": f.state.p, "u": f.state.u, "lambda": f.lambda}))
            .collect();
        json!({"a_hat": self.a_hat, "seeds": seeds, "fixed_points": fps})
    }
}

/// Tail average of `λ` along the backward flow restricted to the graph,
/// `ẋ = −h_p(x, Du(x))`, over `[T/2, T]`, and the end point of the flow.
fn graph_flow_average(model: &ContactModel, grad: &[f64], x0: f64, cfg: &MatherConfig) -> (f64, f64) {
    let speed = |x: f64| -model.h.dp(x, interp_linear(grad, x));
    let steps = (cfg.horizon / cfg.dt).ceil() as usize;
    let dt = cfg.dt;
    let mut x = x0;
    let (mut integral, mut span) = (0.0, 0.0);
    let mut lam_prev = model.lambda.value(x);
    for k in 1..=steps {
        let k1 = speed(x);
        let k2 = speed(x + 0.5 * dt * k1);
        let k3 = speed(x + 0.5 * dt * k2);
        let k4 = speed(x + dt * k3);
        x = wrap_angle(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
        let lam = model.lambda.value(x);
        if 2 * k > steps {
            integral += 0.5 * (lam_prev + lam) * dt;
            span += dt;
        }
        lam_prev = lam;
    }
    (integral / span, x)
}

/// Estimates `a(c) = inf ∫λ dμ` over invariant measures on the 1-graph of
/// `u_-`.
///
/// Each graph seed is followed along the graph backward in time, where the
/// graph is invariant and orbits settle onto its invariant set; the tail
/// average of `λ` is recorded. Seeds whose short backward characteristic run
/// (at most `check_time`, and no longer than it takes to move `check_travel`
/// in `x`) leaves the graph by more than `escape_tol` are flagged as escaped
/// and ignored. Newton is started from the end of each graph flow; fixed
/// points it finds contribute `λ(x*)` when they lie on the graph.
pub fn estimate_mather_average(
    model: &ContactModel,
    u_minus: &StationarySolution,
    cfg: &MatherConfig,
) -> Result<MatherEstimate> {
    if u_minus.direction != Direction::Backward {
        return Err(Error::InvalidInput("Mather estimate needs a backward stationary solution".into()));
    }
    let seeds = graph_seeds(&u_minus.u, cfg.stride);
    let grad = u_minus.u.gradient();
    let results = map_slice(&seeds, cfg.execution, |s| -> Result<(SeedAverage, Option<ContactState>)> {
        let speed = model.h.dp(s.x, s.p).abs();
        let t_check = cfg.check_time.min(cfg.check_travel / speed.max(1e-12)).max(10.0 * cfg.dt);
        let check = integrate(model, *s, t_check, cfg.dt, Direction::Backward)?;
        let escaped = check.escaped || calibration_error(u_minus, &check) > cfg.escape_tol;
        let (average, x_end) = graph_flow_average(model, grad.values(), s.x, cfg);
        let fixed = if escaped {
            None
        } else {
            let end = ContactState::new(x_end, grad.interpolate(x_end, Interpolation::Linear), u_minus.u.interpolate(x_end, Interpolation::Linear));
            find_fixed_point(model, end, cfg.newton_tol).ok()
        };
        Ok((SeedAverage { seed: *s, average, escaped }, fixed))
    });
    let mut per_seed = Vec::with_capacity(results.len());
    let mut fixed_points: Vec<FixedPoint> = Vec::new();
    for r in results {
        let (avg, fixed) = r?;
        per_seed.push(avg);
        if let Some(f) = fixed {
            let on_graph = (f.u - u_minus.u.interpolate(f.x, Interpolation::Linear)).abs() < cfg.graph_tol;
            if on_graph && fixed_points.iter().all(|g| g.state.distance(&f) > 1e-6) {
                fixed_points.push(FixedPoint { state: f, lambda: model.lambda.value(f.x) });
            }
        }
    }
    let mut a_hat = f64::INFINITY;
    for s in per_seed.iter().filter(|s| !s.escaped) {
        a_hat = a_hat.min(s.average);
    }
    if !a_hat.is_finite() {
        return Err(Error::NoInvariantSample(format!("all {} seeds escaped the graph", per_seed.len())));
    }
    for f in &fixed_points {
        a_hat = a_hat.min(f.lambda);
    }
    Ok(MatherEstimate { a_hat, seeds: per_seed, fixed_points })
}

/// `min_j λ(x) + 𝔏G` for `G = ln(u − ψ(x))` over the given jets, where
/// `λ + 𝔏G = (c − λψ − ψ'h_p − [h − p h_p]) / (u − ψ)`.
pub fn lyapunov_margin(model: &ContactModel, psi: &GridFn, jets: &[ContactState]) -> Result<f64> {
    let dpsi = psi.gradient();
    let mut margin = f64::INFINITY;
    for j in jets {
        let ps = psi.interpolate(j.x, Interpolation::Linear);
        if j.u <= ps + 1e-9 {
            return Err(Error::TestFunctionUndefined { x: j.x });
        }
        let dps = dpsi.interpolate(j.x, Interpolation::Linear);
        let lam = model.lambda.value(j.x);
        let hp = model.h.dp(j.x, j.p);
        let h = model.h.eval(j.x, j.p);
        let value = (model.c - lam * ps - dps * hp - (h - j.p * hp)) / (j.u - ps);
        margin = margin.min(value);
    }
    Ok(margin)
}

/// Lower bound `(c − c')/max_j(u − ψ)` with `c' = max_i λψ + h(x, Dψ)`.
pub fn lyapunov_lower_bound(model: &ContactModel, psi: &GridFn, jets: &[ContactState]) -> f64 {
    let c_prime = crate::semigroup::subsolution_residual(model, psi) + model.c;
    let spread = jets
        .iter()
        .map(|j| j.u - psi.interpolate(j.x, Interpolation::Linear))
        .fold(f64::NEG_INFINITY, f64::max);
    (model.c - c_prime) / spread
}

/// Points sampled uniformly in `[0, 2π)`.
pub fn uniform_angles(count: usize) -> Vec<f64> {
    (0..count).map(|k| k as f64 * TAU / count as f64).collect()
}
