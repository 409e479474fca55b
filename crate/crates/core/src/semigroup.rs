//! Semi-Lagrangian discretization of the backward solution semigroup
//!
//! ```text
//! (T_Δt φ)(x) = min_v { e^{−λ(x)Δt} φ(x − vΔt) + w(x)·(l(x, v) + c) },   w = (1 − e^{−λΔt})/λ
//! ```
//!
//! and everything built on top of it: the forward semigroup by duality,
//! stationary solutions, long-time classification and action functions.

use std::cell::RefCell;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::grid::{fmt_float, interp_linear, torus_distance, GridFn, PeriodicGrid};
use crate::model::ContactModel;
use crate::optim::golden_min;

/// Time direction of a semigroup or of a characteristic integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Backward,
    Forward,
}

/// How the per-node velocity minimization is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum VelocitySearch {
    /// Minimize exactly on every interpolation cell crossed by the foot point
    /// (closed form for quadratic-in-velocity Lagrangians, golden section otherwise).
    #[default]
    Piecewise,
    /// `n_v` uniform samples followed by `refine_iters` golden-section steps.
    CoarseGolden,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupConfig {
    /// grid nodes
    pub n: usize,
    pub dt: f64,
    pub v_max: f64,
    pub n_v: usize,
    pub refine_iters: usize,
    pub t_max: f64,
    /// stationarity threshold on the one-step change per unit time
    pub tol: f64,
    pub m_div: f64,
    pub search: VelocitySearch,
    pub execution: Execution,
}

impl Default for SemigroupConfig {
    fn default() -> Self {
        Self {
            n: 512,
            dt: 2e-3,
            v_max: 12.0,
            n_v: 25,
            refine_iters: 30,
            t_max: 200.0,
            tol: 1e-6,
            m_div: 1e3,
            search: VelocitySearch::Piecewise,
            execution: Execution::Parallel,
        }
    }
}

impl SemigroupConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.n < 8 {
            return bad("grid.n must be at least 8");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return bad("v_max must be positive");
        }
        if self.n_v < 9 {
            return bad("n_v must be at least 9");
        }
        if !(self.m_div > 0.0) {
            return bad("m_div must be positive");
        }
        if !(self.t_max > 0.0) || !(self.tol > 0.0) {
            return bad("t_max and tol must be positive");
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.n)
    }

    /// Copy with `v_max` raised to cover the optimal velocities of `model`.
    pub fn with_velocity_window_for(&self, model: &ContactModel) -> Self {
        let mut cfg = self.clone();
        cfg.v_max = cfg.v_max.max(velocity_bound(model));
        cfg
    }
}

/// Rough bound on optimal velocities: the speed `|h_p|` at the first momentum
/// whose energy exceeds what a solution bounded by the backward start level can
/// balance, with a 25% margin.
pub fn velocity_bound(model: &ContactModel) -> f64 {
    let k = backward_start_level(model).unwrap_or(0.0).abs();
    let energy = model.c.abs() + model.lambda.lambda_abs_max() * k + model.h.max_h_at_zero().abs();
    let xs: Vec<f64> = (0..64).map(|i| i as f64 * std::f64::consts::TAU / 64.0).collect();
    let mut p: f64 = 0.25;
    while p < 1e4 {
        let low = xs
            .iter()
            .map(|&x| model.h.eval(x, p).min(model.h.eval(x, -p)))
            .fold(f64::INFINITY, f64::min);
        if low > energy {
            break;
        }
        p *= 1.1;
    }
    let speed = xs
        .iter()
        .map(|&x| model.h.dp(x, p).abs().max(model.h.dp(x, -p).abs()))
        .fold(0.0, f64::max);
    1.25 * speed
}

#[derive(Debug, Clone, Copy)]
struct NodeCoef {
    x: f64,
    decay: f64,
    weight: f64,
    /// `l(x, 0) + c`, quadratic path only
    running0: f64,
}

/// One backward step of fixed length on a fixed grid.
pub struct BackwardScheme<'a> {
    model: &'a ContactModel,
    grid: PeriodicGrid,
    dt: f64,
    v_max: f64,
    n_v: usize,
    refine_iters: usize,
    search: VelocitySearch,
    execution: Execution,
    bound: f64,
    alpha: Option<f64>,
    /// foot-point reach in cells
    reach: f64,
    nodes: Vec<NodeCoef>,
}

/// `(1 − e^{−λΔt})/λ`, continuous through `λ = 0`.
fn step_weight(lambda: f64, dt: f64) -> f64 {
    if lambda == 0.0 {
        dt
    } else {
        -(-lambda * dt).exp_m1() / lambda
    }
}

impl<'a> BackwardScheme<'a> {
    pub fn new(model: &'a ContactModel, cfg: &SemigroupConfig) -> Result<Self> {
        Self::with_dt(model, cfg, cfg.dt)
    }

    pub fn with_dt(model: &'a ContactModel, cfg: &SemigroupConfig, dt: f64) -> Result<Self> {
        cfg.validate()?;
        if !(dt > 0.0) {
            return Err(Error::InvalidInput("step must be positive".into()));
        }
        let grid = cfg.grid()?;
        let alpha = match cfg.search {
            VelocitySearch::Piecewise => model.h.quadratic_velocity_coef(),
            VelocitySearch::CoarseGolden => None,
        };
        let mut nodes = Vec::with_capacity(grid.n());
        for x in grid.nodes() {
            let lam = model.lambda.value(x);
            let running0 = if alpha.is_some() { model.h.lagrangian(x, 0.0)? + model.c } else { 0.0 };
            nodes.push(NodeCoef { x, decay: (-lam * dt).exp(), weight: step_weight(lam, dt), running0 });
        }
        Ok(Self {
            model,
            grid,
            dt,
            v_max: cfg.v_max,
            n_v: cfg.n_v,
            refine_iters: cfg.refine_iters,
            search: cfg.search,
            execution: cfg.execution,
            bound: 10.0 * cfg.m_div,
            alpha,
            reach: cfg.v_max * dt / grid.dx(),
            nodes,
        })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    /// Applies one step; also returns how many nodes had their minimizer on the
    /// velocity window boundary.
    pub fn apply(&self, phi: &GridFn) -> Result<(GridFn, usize)> {
        if phi.grid() != self.grid {
            return Err(Error::GridMismatch { left: self.grid.n(), right: phi.grid().n() });
        }
        let values = phi.values();
        let out = map_indices(self.grid.n(), self.execution, |i| self.node_min(i, values));
        let mut next = Vec::with_capacity(out.len());
        let mut saturated = 0;
        for r in out {
            let (v, sat) = r?;
            if !v.is_finite() || v.abs() > self.bound {
                return Err(Error::NonFinite("semigroup step left the divergence bound"));
            }
            saturated += sat as usize;
            next.push(v);
        }
        Ok((GridFn::new(self.grid, next)?, saturated))
    }

    fn node_min(&self, i: usize, phi: &[f64]) -> Result<(f64, bool)> {
        match (self.search, self.alpha) {
            (VelocitySearch::Piecewise, Some(alpha)) => Ok(self.node_min_quadratic(i, phi, alpha)),
            (VelocitySearch::Piecewise, None) => self.node_min_cells(i, phi),
            (VelocitySearch::CoarseGolden, _) => self.node_min_coarse(i, phi),
        }
    }

    /// Cells are parametrized by the foot offset `ζ = (y − x_i)/Δx ∈ [−r, r]`,
    /// velocity `v = −ζΔx/Δt`.
    fn cell_range(&self) -> (i64, i64) {
        let k = self.reach.floor() as i64;
        (-k - 1, k)
    }

    fn node_min_quadratic(&self, i: usize, phi: &[f64], alpha: f64) -> (f64, bool) {
        let node = self.nodes[i];
        let n = phi.len() as i64;
        let r = self.reach;
        let s = self.grid.dx() / self.dt;
        let kappa = node.weight * alpha * s * s;
        let base = node.weight * node.running0;
        let (m_lo, m_hi) = self.cell_range();
        let mut best = (f64::INFINITY, 0.0);
        for m in m_lo..=m_hi {
            let a = (m as f64).max(-r);
            let b = ((m + 1) as f64).min(r);
            if a > b {
                continue;
            }
            let fa = phi[(i as i64 + m).rem_euclid(n) as usize];
            let fb = phi[(i as i64 + m + 1).rem_euclid(n) as usize];
            let d = fb - fa;
            let z = (-node.decay * d / (2.0 * kappa)).clamp(a, b);
            let val = node.decay * (fa + (z - m as f64) * d) + kappa * z * z + base;
            if val < best.0 {
                best = (val, z);
            }
        }
        (best.0, best.1.abs() >= r * (1.0 - 1e-12))
    }

    fn objective(&self, i: usize, phi: &[f64], v: f64, err: &RefCell<Option<Error>>) -> f64 {
        let node = self.nodes[i];
        let l = match self.model.h.lagrangian(node.x, v) {
            Ok(l) => l,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                return f64::INFINITY;
            }
        };
        node.decay * interp_linear(phi, node.x - v * self.dt) + node.weight * (l + self.model.c)
    }

    fn node_min_cells(&self, i: usize, phi: &[f64]) -> Result<(f64, bool)> {
        let err = RefCell::new(None);
        let r = self.reach;
        let s = self.grid.dx() / self.dt;
        let (m_lo, m_hi) = self.cell_range();
        let mut best = (f64::INFINITY, 0.0);
        for m in m_lo..=m_hi {
            let a = (m as f64).max(-r);
            let b = ((m + 1) as f64).min(r);
            if a > b {
                continue;
            }
            let f = |z: f64| self.objective(i, phi, -z * s, &err);
            let z = golden_min(f, a, b, 1e-12, 60);
            let val = f(z);
            if val < best.0 {
                best = (val, z);
            }
        }
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        Ok((best.0, best.1.abs() >= r * (1.0 - 1e-9)))
    }

    fn node_min_coarse(&self, i: usize, phi: &[f64]) -> Result<(f64, bool)> {
        let err = RefCell::new(None);
        let f = |v: f64| self.objective(i, phi, v, &err);
        let h = 2.0 * self.v_max / (self.n_v - 1) as f64;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..self.n_v {
            let v = -self.v_max + k as f64 * h;
            let val = f(v);
            if val < best.0 {
                best = (val, v);
            }
        }
        let lo = (best.1 - h).max(-self.v_max);
        let hi = (best.1 + h).min(self.v_max);
        let v = golden_min(f, lo, hi, 0.0, self.refine_iters);
        let val = f(v);
        if val < best.0 {
            best = (val, v);
        }
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        Ok((best.0, best.1.abs() >= self.v_max * (1.0 - 1e-9)))
    }
}

/// One backward step `T_Δt φ`.
pub fn step_backward(model: &ContactModel, phi: &GridFn, cfg: &SemigroupConfig) -> Result<GridFn> {
    Ok(BackwardScheme::new(model, cfg)?.apply(phi)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Divergence {
    Down,
    Up,
}

/// Time series of an evolution.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    /// sup distance to the reference; empty when no reference was given
    pub dist: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub diverged: Option<Divergence>,
    /// worst fraction of nodes with a saturated velocity window over all steps
    pub saturation: f64,
}

impl EvolutionTrace {
    fn record(&mut self, t: f64, phi: &GridFn, reference: Option<&GridFn>) -> Result<()> {
        self.times.push(t);
        self.min.push(phi.min());
        self.max.push(phi.max());
        if let Some(r) = reference {
            self.dist.push(phi.sup_distance(r)?);
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,dist,min,max\n");
        for k in 0..self.times.len() {
            let dist = self.dist.get(k).map(|d| fmt_float(*d)).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_float(self.times[k]),
                dist,
                fmt_float(self.min[k]),
                fmt_float(self.max[k])
            );
        }
        out
    }

    fn mirrored(mut self) -> Self {
        std::mem::swap(&mut self.min, &mut self.max);
        self.min.iter_mut().for_each(|v| *v = -*v);
        self.max.iter_mut().for_each(|v| *v = -*v);
        self.diverged = self.diverged.map(|d| match d {
            Divergence::Down => Divergence::Up,
            Divergence::Up => Divergence::Down,
        });
        self
    }
}

fn divergence_of(phi: &GridFn, m_div: f64) -> Option<Divergence> {
    if phi.min() < -m_div {
        Some(Divergence::Down)
    } else if phi.max() > m_div {
        Some(Divergence::Up)
    } else {
        None
    }
}

fn warn_saturation(fraction: f64) {
    if fraction > 0.01 {
        log::warn!(
            "velocity window saturated on {:.1}% of nodes; raise v_max",
            100.0 * fraction
        );
    }
}

/// Evolves `φ` to `t_final`. The forward semigroup is `T⁺_t φ = −T̆⁻_t(−φ)`
/// with `T̆` the backward semigroup of the reflected model.
///
/// If the values leave `[−m_div, m_div]` the evolution stops there and the
/// trace carries the divergence flag.
pub fn evolve(
    model: &ContactModel,
    phi: &GridFn,
    t_final: f64,
    direction: Direction,
    cfg: &SemigroupConfig,
    reference: Option<&GridFn>,
) -> Result<(GridFn, EvolutionTrace)> {
    match direction {
        Direction::Backward => evolve_backward(model, phi, t_final, cfg, reference),
        Direction::Forward => {
            let reflected = model.reflect();
            let neg_ref = reference.map(GridFn::negated);
            let (u, trace) = evolve_backward(&reflected, &phi.negated(), t_final, cfg, neg_ref.as_ref())?;
            Ok((u.negated(), trace.mirrored()))
        }
    }
}

fn evolve_backward(
    model: &ContactModel,
    phi: &GridFn,
    t_final: f64,
    cfg: &SemigroupConfig,
    reference: Option<&GridFn>,
) -> Result<(GridFn, EvolutionTrace)> {
    if !(t_final > 0.0) {
        return Err(Error::InvalidInput("evolution time must be positive".into()));
    }
    let scheme = BackwardScheme::new(model, cfg)?;
    let steps = ((t_final / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
    let last = t_final - (steps - 1) as f64 * cfg.dt;
    let tail = if (last - cfg.dt).abs() > 1e-12 * cfg.dt {
        Some(BackwardScheme::with_dt(model, cfg, last)?)
    } else {
        None
    };
    let n = phi.grid().n() as f64;
    let mut trace = EvolutionTrace::default();
    trace.record(0.0, phi, reference)?;
    let mut cur = phi.clone();
    for k in 1..=steps {
        let s = if k == steps { tail.as_ref().unwrap_or(&scheme) } else { &scheme };
        let (next, sat) = s.apply(&cur)?;
        cur = next;
        trace.saturation = trace.saturation.max(sat as f64 / n);
        let t = if k == steps { t_final } else { k as f64 * cfg.dt };
        trace.record(t, &cur, reference)?;
        if let Some(d) = divergence_of(&cur, cfg.m_div) {
            trace.diverged = Some(d);
            break;
        }
    }
    warn_saturation(trace.saturation);
    Ok((cur, trace))
}

/// A numerically stationary point of the backward (or forward) semigroup.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarySolution {
    pub u: GridFn,
    pub c: f64,
    pub direction: Direction,
    /// sup of the one-step change of `u` per unit time
    pub residual: f64,
    pub iterations: usize,
    pub dt: f64,
    pub saturation: f64,
}

impl StationarySolution {
    pub fn to_csv(&self) -> String {
        self.u.to_csv("x,u")
    }

    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "c": self.c,
            "direction": self.direction,
            "residual": self.residual,
            "iterations": self.iterations,
            "n": self.u.grid().n(),
            "dt": self.dt,
        })
    }

    fn mirrored(self) -> Self {
        Self { u: self.u.negated(), direction: Direction::Forward, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LongTime {
    Converged(StationarySolution),
    DivergedDown,
    DivergedUp,
    Undetermined,
}

impl LongTime {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Converged(_) => "converged",
            Self::DivergedDown => "diverged_down",
            Self::DivergedUp => "diverged_up",
            Self::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongTimeOutcome {
    pub class: LongTime,
    /// time at which the classification was decided
    pub t_end: f64,
    pub min: f64,
    pub max: f64,
    /// one-step change per unit time at the last step taken
    pub last_change: f64,
}

/// Runs the backward semigroup from `φ` until it becomes stationary, leaves
/// `[−m_div, m_div]`, or reaches `t_max`.
pub fn classify_longtime(model: &ContactModel, phi: &GridFn, cfg: &SemigroupConfig) -> Result<LongTimeOutcome> {
    let scheme = BackwardScheme::new(model, cfg)?;
    let n = phi.grid().n() as f64;
    let max_steps = (cfg.t_max / cfg.dt).ceil() as usize;
    let mut cur = phi.clone();
    let mut saturation: f64 = 0.0;
    let mut change = f64::INFINITY;
    for k in 0..max_steps {
        let (next, sat) = scheme.apply(&cur)?;
        saturation = saturation.max(sat as f64 / n);
        change = next.sup_distance(&cur)? / cfg.dt;
        let t = k as f64 * cfg.dt;
        if change < cfg.tol {
            warn_saturation(saturation);
            let (min, max) = (cur.min(), cur.max());
            let sol = StationarySolution {
                u: cur,
                c: model.c,
                direction: Direction::Backward,
                residual: change,
                iterations: k,
                dt: cfg.dt,
                saturation,
            };
            return Ok(LongTimeOutcome { class: LongTime::Converged(sol), t_end: t, min, max, last_change: change });
        }
        cur = next;
        if let Some(d) = divergence_of(&cur, cfg.m_div) {
            let class = match d {
                Divergence::Down => LongTime::DivergedDown,
                Divergence::Up => LongTime::DivergedUp,
            };
            return Ok(LongTimeOutcome { class, t_end: t + cfg.dt, min: cur.min(), max: cur.max(), last_change: change });
        }
    }
    warn_saturation(saturation);
    log::debug!("classification undetermined at t = {}, last change rate {change:e}", cfg.t_max);
    Ok(LongTimeOutcome {
        class: LongTime::Undetermined,
        t_end: cfg.t_max,
        min: cur.min(),
        max: cur.max(),
        last_change: change,
    })
}

/// Constant start for the backward stationary solve: `(c − e₀)/λ₊ + 1 + E₀`.
pub fn backward_start_level(model: &ContactModel) -> Result<f64> {
    let k = model.constants();
    if !(k.lambda_plus > 0.0) {
        return Err(Error::InvalidInput(
            "backward stationary solve needs a discount with positive maximum".into(),
        ));
    }
    Ok((model.c - k.min_h) / k.lambda_plus + 1.0 + k.max_h_at_zero)
}

/// Backward: the maximal stationary solution `u_-`, reached from above.
/// Forward: the minimal forward solution `v_+`, by duality from the reflected model.
pub fn solve_stationary(model: &ContactModel, direction: Direction, cfg: &SemigroupConfig) -> Result<StationarySolution> {
    match direction {
        Direction::Forward => Ok(solve_stationary(&model.reflect(), Direction::Backward, cfg)?.mirrored()),
        Direction::Backward => {
            let start = GridFn::constant(cfg.grid()?, backward_start_level(model)?);
            let outcome = classify_longtime(model, &start, cfg)?;
            match outcome.class {
                LongTime::Converged(sol) => Ok(sol),
                LongTime::DivergedDown | LongTime::DivergedUp => Err(Error::NoStationarySolution(format!(
                    "c = {}: {} at t = {}",
                    model.c,
                    outcome.class.label(),
                    outcome.t_end
                ))),
                LongTime::Undetermined => Err(Error::NotConverged { t_max: cfg.t_max, residual: outcome.last_change }),
            }
        }
    }
}

/// `max_i λ(x_i)φ_i + h(x_i, Dφ_i) − c` with centered gradients.
pub fn subsolution_residual(model: &ContactModel, phi: &GridFn) -> f64 {
    let grad = phi.gradient();
    let g = phi.grid();
    (0..g.n())
        .map(|i| model.hamiltonian(g.node(i), grad.values()[i], phi.values()[i]))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Backward action function `h_{x₀,u₀}(·, t)`: the backward semigroup applied
/// to `u₀ + M·dist(x, x₀)` with `M = 100(1 + v_max)`. `x₀` is snapped to the
/// nearest grid node.
pub fn action_function(model: &ContactModel, x0: f64, u0: f64, t: f64, cfg: &SemigroupConfig) -> Result<GridFn> {
    if t < cfg.dt * (1.0 - 1e-12) {
        return Err(Error::InvalidInput("action function needs t ≥ dt".into()));
    }
    let grid = cfg.grid()?;
    let anchor = grid.node(grid.nearest(x0));
    let penalty = 100.0 * (1.0 + cfg.v_max);
    let datum = GridFn::from_fn(grid, |x| u0 + penalty * torus_distance(x, anchor))?;
    let wide = SemigroupConfig { m_div: f64::MAX / 100.0, ..cfg.clone() };
    Ok(evolve(model, &datum, t, Direction::Backward, &wide, None)?.0)
}

/// Sup distance between evolutions at step `dt` and `dt/2`; the yardstick for
/// the composition and Markov checks.
pub fn scheme_error(model: &ContactModel, phi: &GridFn, t: f64, cfg: &SemigroupConfig) -> Result<f64> {
    let coarse = evolve(model, phi, t, Direction::Backward, cfg, None)?.0;
    let half = SemigroupConfig { dt: 0.5 * cfg.dt, ..cfg.clone() };
    let fine = evolve(model, phi, t, Direction::Backward, &half, None)?.0;
    coarse.sup_distance(&fine)
}
