//! Exponential convergence rates of the backward semigroup and their
//! comparison with Mather averages.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::characteristics::{estimate_mather_average, MatherConfig};
use crate::critical::least_squares;
use crate::error::{Error, Result};
use crate::exec::map_slice;
use crate::grid::{fmt_float, GridFn};
use crate::model::ContactModel;
use crate::semigroup::{
    evolve, solve_stationary, BackwardScheme, Direction, EvolutionTrace, SemigroupConfig, StationarySolution,
};

/// Distances at or below this are treated as fully converged.
pub const DIST_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub fit_residual: f64,
    pub r_hat: f64,
}

/// Least-squares slope of `ln dist` against `t` over the last
/// `window_fraction` of the trace.
pub fn fit_rate(trace: &EvolutionTrace, window_fraction: f64) -> Result<RateFit> {
    if trace.dist.is_empty() {
        return Err(Error::InvalidInput("rate fit needs a trace with a reference".into()));
    }
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::InvalidInput("window fraction must lie in (0, 1]".into()));
    }
    let t_end = *trace.times.last().unwrap();
    let t_start = t_end * (1.0 - window_fraction);
    let (mut ts, mut ys) = (Vec::new(), Vec::new());
    for (t, d) in trace.times.iter().zip(&trace.dist) {
        if *t < t_start {
            continue;
        }
        if !d.is_finite() {
            return Err(Error::NonFinite("distance in rate window"));
        }
        if *d <= DIST_FLOOR {
            return Err(Error::WindowSaturated(format!("distance {d:e} at t = {t}")));
        }
        ts.push(*t);
        ys.push(d.ln());
    }
    if ts.len() < 10 {
        return Err(Error::InvalidInput(format!("rate window holds {} points, need 10", ts.len())));
    }
    let (slope, intercept, fit_residual) = least_squares(&ts, &ys)?;
    Ok(RateFit { slope, intercept, window: (ts[0], *ts.last().unwrap()), fit_residual, r_hat: -slope })
}

/// Backward evolution of `φ` with distances to `reference`, stopped once the
/// distance drops below `stop_dist` or at `t_max`.
pub fn evolve_until(
    model: &ContactModel,
    phi: &GridFn,
    reference: &GridFn,
    stop_dist: f64,
    cfg: &SemigroupConfig,
) -> Result<EvolutionTrace> {
    let scheme = BackwardScheme::new(model, cfg)?;
    let n = phi.grid().n() as f64;
    let mut trace = EvolutionTrace::default();
    let mut cur = phi.clone();
    let record = |t: f64, f: &GridFn, trace: &mut EvolutionTrace| -> Result<f64> {
        let d = f.sup_distance(reference)?;
        trace.times.push(t);
        trace.dist.push(d);
        trace.min.push(f.min());
        trace.max.push(f.max());
        Ok(d)
    };
    record(0.0, &cur, &mut trace)?;
    let steps = (cfg.t_max / cfg.dt).ceil() as usize;
    for k in 1..=steps {
        let (next, sat) = scheme.apply(&cur)?;
        cur = next;
        trace.saturation = trace.saturation.max(sat as f64 / n);
        if record(k as f64 * cfg.dt, &cur, &mut trace)? < stop_dist {
            break;
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    pub semigroup: SemigroupConfig,
    pub mather: MatherConfig,
    /// offset of the initial datum above `u_-`
    pub delta: f64,
    pub window_fraction: f64,
    /// stationarity threshold for the reference solution
    pub reference_tol: f64,
    pub stop_dist: f64,
    pub asymptote_tol: f64,
    /// also fit the growth of `v_+ − δ` away from `v_+`
    pub divergence_check: bool,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            semigroup: SemigroupConfig::default(),
            mather: MatherConfig::default(),
            delta: 0.3,
            window_fraction: 0.5,
            reference_tol: 1e-10,
            stop_dist: 1e-7,
            asymptote_tol: 0.02,
            divergence_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub c: f64,
    pub a_hat: f64,
    pub r_hat: f64,
    pub gap: f64,
    pub lambda_plus: f64,
    pub fit: Option<RateFit>,
    pub v_max: f64,
    pub saturation: f64,
    /// fitted growth rate of `|T_t(v_+ − δ) − v_+|`
    pub growth_rate: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub monotone_nondecreasing: bool,
    pub a_hat_nondecreasing: bool,
    pub approaching_lambda_plus: bool,
}

impl RateReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("c,a_hat,R_hat,gap,lambda_plus,flags\n");
        for (k, r) in self.rows.iter().enumerate() {
            let mut flags = Vec::new();
            if let Some(f) = &r.failure {
                flags.push(format!("failed: {}", f.replace([',', '\n'], " ")));
            }
            if r.saturation > 0.01 {
                flags.push("window_saturated".to_string());
            }
            if let Some(g) = r.growth_rate {
                flags.push(format!("growth_rate={}", fmt_float(g)));
            }
            if k + 1 == self.rows.len() {
                flags.push(format!("monotone_nondecreasing={}", self.monotone_nondecreasing));
                flags.push(format!("approaching_lambda_plus={}", self.approaching_lambda_plus));
            }
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_float(r.c),
                fmt_float(r.a_hat),
                fmt_float(r.r_hat),
                fmt_float(r.gap),
                fmt_float(r.lambda_plus),
                flags.join(";")
            );
        }
        out
    }
}

/// Solves `u_-` with the reference tolerance and measures the rate from
/// `u_- + δ`.
pub fn measure_rate(
    model: &ContactModel,
    cfg: &RateConfig,
) -> Result<(StationarySolution, RateFit, EvolutionTrace)> {
    let sg = SemigroupConfig { tol: cfg.reference_tol, ..cfg.semigroup.with_velocity_window_for(model) };
    let u = solve_stationary(model, Direction::Backward, &sg)?;
    let trace = evolve_until(model, &u.u.shifted(cfg.delta), &u.u, cfg.stop_dist, &sg)?;
    let fit = fit_rate(&trace, cfg.window_fraction)?;
    Ok((u, fit, trace))
}

fn growth_rate(model: &ContactModel, cfg: &RateConfig) -> Result<f64> {
    let sg = cfg.semigroup.with_velocity_window_for(model);
    let v = solve_stationary(model, Direction::Forward, &sg)?;
    let horizon = SemigroupConfig { m_div: 1e3, ..sg.clone() };
    let (_, trace) = evolve(
        model,
        &v.u.shifted(-cfg.delta),
        sg.t_max.min(50.0),
        Direction::Backward,
        &horizon,
        Some(&v.u),
    )?;
    Ok(-fit_rate(&trace, cfg.window_fraction)?.slope)
}

fn rate_row(model: &ContactModel, cfg: &RateConfig) -> RateRow {
    let lambda_plus = model.lambda.lambda_plus();
    let v_max = cfg.semigroup.with_velocity_window_for(model).v_max;
    let mut row = RateRow {
        c: model.c,
        a_hat: f64::NAN,
        r_hat: f64::NAN,
        gap: f64::NAN,
        lambda_plus,
        fit: None,
        v_max,
        saturation: 0.0,
        growth_rate: None,
        failure: None,
    };
    let (u, fit, trace) = match measure_rate(model, cfg) {
        Ok(r) => r,
        Err(e) => {
            row.failure = Some(e.to_string());
            return row;
        }
    };
    row.saturation = trace.saturation.max(u.saturation);
    row.r_hat = fit.r_hat;
    row.fit = Some(fit);
    match estimate_mather_average(model, &u, &cfg.mather) {
        Ok(est) => {
            row.a_hat = est.a_hat;
            row.gap = (est.a_hat - row.r_hat).abs();
        }
        Err(e) => row.failure = Some(e.to_string()),
    }
    if cfg.divergence_check {
        match growth_rate(model, cfg) {
            Ok(g) => row.growth_rate = Some(g),
            Err(e) => log::warn!("divergence check at c = {}: {e}", model.c),
        }
    }
    row
}

fn nondecreasing(values: impl Iterator<Item = f64>, slack: f64) -> bool {
    let v: Vec<f64> = values.collect();
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[1] >= w[0] - slack)
}

/// One row per `c`: `a(c)` estimate, measured rate `R`, their gap and `λ₊`,
/// with table flags for monotonicity in `c` and approach to `λ₊`.
///
/// Monotonicity is judged with a slack of `0.005`, the resolution of the
/// measured quantities at reference settings.
pub fn rate_report(model: &ContactModel, c_list: &[f64], cfg: &RateConfig) -> Result<RateReport> {
    if c_list.is_empty() {
        return Err(Error::InvalidInput("rate report needs at least one c".into()));
    }
    let rows = map_slice(c_list, cfg.semigroup.execution, |&c| rate_row(&model.with_c(c), cfg));
    let last = rows.last().unwrap();
    let approaching = (last.lambda_plus - last.a_hat).abs() <= cfg.asymptote_tol
        || (last.lambda_plus - last.r_hat).abs() <= cfg.asymptote_tol;
    Ok(RateReport {
        monotone_nondecreasing: nondecreasing(rows.iter().map(|r| r.r_hat), 0.005),
        a_hat_nondecreasing: nondecreasing(rows.iter().map(|r| r.a_hat), 0.005),
        approaching_lambda_plus: approaching,
        rows,
    })
}
