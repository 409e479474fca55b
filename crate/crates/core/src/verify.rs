//! Named property checks run against one model, for batch verification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::characteristics::{calibration_error, find_fixed_point, graph_seeds, integrate, MatherConfig};
use crate::critical::mane_value;
use crate::error::Result;
use crate::grid::{torus_distance, GridFn, PeriodicGrid};
use crate::model::{ContactModel, SignClass};
use crate::optim::golden_max;
use crate::rates::fit_rate;
use crate::semigroup::{
    action_function, evolve, scheme_error, solve_stationary, step_backward, subsolution_residual, Direction,
    EvolutionTrace, SemigroupConfig, StationarySolution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// the property does not apply to this model
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl PropertyCheck {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        let status = if passed { Status::Pass } else { Status::Fail };
        Self { name: name.to_string(), status, detail }
    }

    fn skipped(name: &str, detail: &str) -> Self {
        Self { name: name.to_string(), status: Status::Skipped, detail: detail.to_string() }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub semigroup: SemigroupConfig,
    pub mather: MatherConfig,
    /// random pairs drawn for the monotonicity and contraction checks
    pub pairs: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            semigroup: SemigroupConfig::default(),
            mather: MatherConfig::default(),
            pairs: 3,
            seed: 7,
        }
    }
}

/// Random trigonometric polynomial of degree 3 with coefficients in `[−1, 1]`.
fn random_smooth(rng: &mut ChaCha8Rng, grid: PeriodicGrid) -> Result<GridFn> {
    let coef: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..=1.0)).collect();
    GridFn::from_fn(grid, |x| {
        coef[0] + (1..=3).map(|k| coef[2 * k - 1] * (k as f64 * x).cos() + coef[2 * k] * (k as f64 * x).sin()).sum::<f64>()
    })
}

fn check_reflect(model: &ContactModel) -> (bool, String) {
    let back = model.reflect().reflect();
    let mut worst: f64 = 0.0;
    for i in 0..16 {
        let x = i as f64 * 0.39;
        for p in [-2.0, -0.5, 0.0, 0.7, 3.0] {
            worst = worst.max((back.hamiltonian(x, p, 0.4) - model.hamiltonian(x, p, 0.4)).abs());
        }
    }
    (worst < 1e-12, format!("max |H − H̆̆| = {worst:e}"))
}

fn check_legendre(model: &ContactModel) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for i in 0..8 {
        let x = i as f64 * 0.785;
        for p in [-1.5, -0.3, 0.0, 0.8, 2.0] {
            // the maximizing velocity is h_p, well inside ±(|h_p| + 4)
            let reach = model.h.dp(x, p).abs() + 4.0;
            let lag = |v: f64| model.h.lagrangian(x, v).unwrap_or(f64::INFINITY);
            let v_star = golden_max(|v| p * v - lag(v), -reach, reach, 1e-10, 200);
            let dual = p * v_star - lag(v_star);
            worst = worst.max((dual - model.h.eval(x, p)).abs());
        }
    }
    let tol = if model.h.is_tabulated() { 1e-2 } else { 1e-6 };
    Ok((worst < tol, format!("max |h − l*| = {worst:e}")))
}

fn check_monotone(model: &ContactModel, cfg: &SemigroupConfig, rng: &mut ChaCha8Rng, pairs: usize) -> Result<(bool, String)> {
    let grid = cfg.grid()?;
    let mut violations = 0;
    for _ in 0..pairs {
        let phi = random_smooth(rng, grid)?;
        let bump = random_smooth(rng, grid)?;
        let psi = phi.combine(1.0, &bump.map(f64::abs), 1.0)?;
        let a = step_backward(model, &phi, cfg)?;
        let b = step_backward(model, &psi, cfg)?;
        violations += a.values().iter().zip(b.values()).filter(|(a, b)| a > b).count();
    }
    Ok((violations == 0, format!("{violations} node violations over {pairs} pairs")))
}

fn check_contraction(model: &ContactModel, cfg: &SemigroupConfig, rng: &mut ChaCha8Rng, pairs: usize) -> Result<(bool, String)> {
    let grid = cfg.grid()?;
    let big = model.lambda.lambda_abs_max();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let phi = random_smooth(rng, grid)?;
        let psi = random_smooth(rng, grid)?;
        let d0 = phi.sup_distance(&psi)?;
        let (mut a, mut b) = (phi, psi);
        for _ in 0..3 {
            a = evolve(model, &a, 1.0, Direction::Backward, cfg, None)?.0;
            b = evolve(model, &b, 1.0, Direction::Backward, cfg, None)?.0;
        }
        // only the final t = 3 is compared; the bound grows monotonically in t
        worst = worst.max(a.sup_distance(&b)? - (big * 3.0).exp() * d0);
    }
    Ok((worst <= 5.0 * cfg.dt, format!("max excess over e^(Λt)‖φ−ψ‖ = {worst:e}")))
}

fn check_composition(model: &ContactModel, cfg: &SemigroupConfig, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let phi = random_smooth(rng, cfg.grid()?)?;
    let (s, t) = (0.5 + cfg.dt / 3.0, 0.7 + cfg.dt / 4.0);
    let whole = evolve(model, &phi, s + t, Direction::Backward, cfg, None)?.0;
    let first = evolve(model, &phi, t, Direction::Backward, cfg, None)?.0;
    let split = evolve(model, &first, s, Direction::Backward, cfg, None)?.0;
    let gap = whole.sup_distance(&split)?;
    let yardstick = scheme_error(model, &phi, s + t, cfg)?;
    Ok((gap <= 2.0 * yardstick + 1e-12, format!("gap {gap:e}, scheme error {yardstick:e}")))
}

/// Needs one action function per node; the gap shrinks quickly with `n` and
/// is well above the time-step error on coarse grids.
fn check_markov(model: &ContactModel, cfg: &SemigroupConfig) -> Result<(bool, String)> {
    let grid = cfg.grid()?;
    let (x0, u0, t, s) = (1.0, 0.5, 0.4, 0.3);
    let direct = action_function(model, x0, u0, t + s, cfg)?;
    let mid = action_function(model, x0, u0, t, cfg)?;
    let mut composed = vec![f64::INFINITY; grid.n()];
    for j in 0..grid.n() {
        let later = action_function(model, grid.node(j), mid.values()[j], s, cfg)?;
        for (c, v) in composed.iter_mut().zip(later.values()) {
            *c = c.min(*v);
        }
    }
    let composed = GridFn::new(grid, composed)?;
    let gap = direct.sup_distance(&composed)?;
    let penalty_datum = GridFn::from_fn(grid, |x| u0 + 100.0 * (1.0 + cfg.v_max) * torus_distance(x, grid.node(grid.nearest(x0))))?;
    let wide = SemigroupConfig { m_div: f64::MAX / 100.0, ..cfg.clone() };
    let yardstick = scheme_error(model, &penalty_datum, t + s, &wide)?;
    Ok((gap <= 3.0 * yardstick + 1e-12, format!("gap {gap:e}, scheme error {yardstick:e}")))
}

fn check_subsolution(model: &ContactModel, cfg: &SemigroupConfig) -> Option<Result<(bool, String)>> {
    let grid = cfg.grid().ok()?;
    let zero = GridFn::constant(grid, 0.0);
    if subsolution_residual(model, &zero) > 1e-12 {
        return None;
    }
    Some((|| {
        let mut worst: f64 = 0.0;
        let mut cur = zero.clone();
        for _ in 0..4 {
            cur = evolve(model, &cur, 0.5, Direction::Backward, cfg, None)?.0;
            worst = worst.min(cur.min());
        }
        Ok((worst >= -1e-12, format!("min T_t 0 over t ≤ 2 = {worst:e}")))
    })())
}

fn check_stationary(cfg: &SemigroupConfig, model: &ContactModel, u: &StationarySolution) -> Result<(bool, String)> {
    let next = step_backward(model, &u.u, cfg)?;
    let change = next.sup_distance(&u.u)?;
    Ok((change <= cfg.tol * cfg.dt, format!("one-step change {change:e}, bound {:e}", cfg.tol * cfg.dt)))
}

fn check_fixed_points(model: &ContactModel, u: &StationarySolution, mather: &MatherConfig) -> (bool, String) {
    let mut found = 0;
    let mut worst: f64 = 0.0;
    for s in graph_seeds(&u.u, 4 * mather.stride) {
        if let Ok(f) = find_fixed_point(model, s, mather.newton_tol) {
            found += 1;
            worst = worst.max(model.hamiltonian(f.x, f.p, f.u).abs());
        }
    }
    (worst < mather.newton_tol.max(1e-12) * 10.0, format!("{found} fixed points, max |H| = {worst:e}"))
}

fn check_calibration(model: &ContactModel, u: &StationarySolution, mather: &MatherConfig) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for s in graph_seeds(&u.u, mather.stride) {
        let speed = model.h.dp(s.x, s.p).abs();
        let t = mather.check_time.min(mather.check_travel / speed.max(1e-12));
        let orbit = integrate(model, s, t, mather.dt, Direction::Backward)?;
        worst = worst.max(calibration_error(u, &orbit));
    }
    Ok((worst < 1e-2, format!("max calibration error {worst:e}")))
}

fn check_synthetic_rate() -> Result<(bool, String)> {
    let rate = 0.37;
    let mut trace = EvolutionTrace::default();
    for k in 0..200 {
        let t = k as f64 * 0.05;
        trace.times.push(t);
        trace.dist.push(2.0 * (-rate * t).exp());
        trace.min.push(0.0);
        trace.max.push(0.0);
    }
    let fit = fit_rate(&trace, 0.5)?;
    let err = (fit.r_hat - rate).abs();
    Ok((err < 1e-12, format!("planted {rate}, fitted {}", fit.r_hat)))
}

fn check_mane_shift(model: &ContactModel, cfg: &SemigroupConfig) -> Result<(bool, String)> {
    let coarse = SemigroupConfig { n: 128, dt: 0.01, t_max: 40.0, ..cfg.clone() };
    let k = 0.75;
    let base = mane_value(&model.h, &coarse)?.value;
    let constant = crate::model::PeriodicFn::Fourier(crate::model::FourierSeries::constant(1.0));
    let shifted = mane_value(&model.h.plus_potential(k, &constant)?, &coarse)?.value;
    let err = (shifted - base - k).abs();
    Ok((err < 1e-3, format!("c(h) = {base}, c(h + {k}) = {shifted}")))
}

/// Runs every property check on `model`, in a fixed order.
pub fn run_suite(model: &ContactModel, vcfg: &VerifyConfig) -> Vec<PropertyCheck> {
    let cfg = vcfg.semigroup.with_velocity_window_for(model);
    let mut rng = ChaCha8Rng::seed_from_u64(vcfg.seed);
    let mut out = Vec::new();
    let (reflect_ok, reflect_detail) = check_reflect(model);
    out.push(PropertyCheck::new("model.reflect_involution", reflect_ok, reflect_detail));
    out.push(PropertyCheck::from_result("model.legendre_duality", check_legendre(model)));
    out.push(PropertyCheck::from_result("semigroup.monotonicity", check_monotone(model, &cfg, &mut rng, vcfg.pairs)));
    out.push(PropertyCheck::from_result("semigroup.contraction", check_contraction(model, &cfg, &mut rng, vcfg.pairs)));
    out.push(PropertyCheck::from_result("semigroup.composition", check_composition(model, &cfg, &mut rng)));
    out.push(PropertyCheck::from_result("semigroup.markov", check_markov(model, &cfg)));
    out.push(match check_subsolution(model, &cfg) {
        Some(r) => PropertyCheck::from_result("semigroup.subsolution_monotone", r),
        None => PropertyCheck::skipped("semigroup.subsolution_monotone", "φ ≡ 0 is not a subsolution"),
    });
    let solved = match model.lambda.sign_class() {
        SignClass::Plus | SignClass::PlusMinus => Some(solve_stationary(model, Direction::Backward, &cfg)),
        _ => None,
    };
    let names = ["semigroup.stationary_fixed_point", "characteristics.fixed_point_identity", "characteristics.backward_calibration"];
    match solved {
        Some(Ok(u)) => {
            out.push(PropertyCheck::from_result(names[0], check_stationary(&cfg, model, &u)));
            let (ok, detail) = check_fixed_points(model, &u, &vcfg.mather);
            out.push(PropertyCheck::new(names[1], ok, detail));
            out.push(PropertyCheck::from_result(names[2], check_calibration(model, &u, &vcfg.mather)));
        }
        Some(Err(e)) => {
            let why = format!("no stationary solution at c = {}: {e}", model.c);
            names.iter().for_each(|n| out.push(PropertyCheck::skipped(n, &why)));
        }
        None => names.iter().for_each(|n| out.push(PropertyCheck::skipped(n, "max λ ≤ 0"))),
    }
    out.push(PropertyCheck::from_result("rates.synthetic_exact", check_synthetic_rate()));
    out.push(PropertyCheck::from_result("critical.mane_shift", check_mane_shift(model, &cfg)));
    out
}
