//! End-to-end acceptance checks on the built-in scenarios at reference
//! resolution. Prints one PASS/FAIL line per criterion and exits non-zero if
//! any criterion fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI, TAU};
use std::process::ExitCode;
use std::time::Instant;

use hjdisc_core::characteristics::{
    estimate_mather_average, find_fixed_point, graph_seeds, lyapunov_lower_bound, lyapunov_margin, ContactState,
    MatherConfig,
};
use hjdisc_core::critical::{bisect_critical, nonneg_critical, probe_config};
use hjdisc_core::grid::{torus_distance, GridFn, Interpolation};
use hjdisc_core::model::presets::{appendix_c, homogeneous, pendulum_sine, quadratic_sine};
use hjdisc_core::model::ContactModel;
use hjdisc_core::rates::{fit_rate, rate_report, RateConfig};
use hjdisc_core::semigroup::{
    action_function, classify_longtime, evolve, scheme_error, solve_stationary, step_backward, Direction, LongTime,
    SemigroupConfig, StationarySolution,
};

type Check = Result<(bool, String), String>;

fn reference() -> SemigroupConfig {
    SemigroupConfig::default()
}

fn solve(model: &ContactModel, direction: Direction) -> Result<StationarySolution, String> {
    solve_stationary(model, direction, &reference().with_velocity_window_for(model)).map_err(|e| e.to_string())
}

/// Pendulum fixed point with `p = 0`: `cos x = 1/(c+1)`, `u = tan x`.
fn pendulum_fixed_point(c: f64) -> (f64, f64) {
    let x = (1.0 / (c + 1.0)).acos();
    (x, x.tan())
}

fn near_zero(v: f64, tol: f64) -> bool {
    v.abs() <= tol
}

fn criterion_1() -> Check {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, model) in [
        ("quadratic-sine", quadratic_sine(0.0)),
        ("pendulum-sine", pendulum_sine(0.0)),
        ("appendix-c", appendix_c(0.0)),
    ] {
        let r = bisect_critical(&model, (-0.5, 0.5), 0.02, &probe_config()).map_err(|e| format!("{name}: {e}"))?;
        ok &= near_zero(r.c0, 0.02);
        detail.push(format!("{name} c0={:.4}", r.c0));
    }
    let nn = nonneg_critical(&appendix_c(0.0), &reference()).map_err(|e| e.to_string())?;
    ok &= near_zero(nn.c0, 0.05);
    detail.push(format!("appendix-c nonneg c0={:.4}", nn.c0));
    Ok((ok, detail.join(", ")))
}

fn criterion_2() -> Check {
    let pend = pendulum_sine(1.0);
    let u = solve(&pend, Direction::Backward)?;
    let (xs, us) = pendulum_fixed_point(1.0);
    let at = u.u.interpolate(FRAC_PI_3, Interpolation::Cubic);
    let fp = find_fixed_point(&pend, ContactState::new(1.0, 0.1, 1.6), 1e-12).map_err(|e| e.to_string())?;
    let fp_err = torus_distance(fp.x, xs).max(fp.p.abs()).max((fp.u - us).abs());
    let quad = quadratic_sine(1.0);
    let q = solve(&quad, Direction::Backward)?;
    let at_q = q.u.interpolate(FRAC_PI_2, Interpolation::Cubic);
    let ok = (at - us).abs() <= 5e-2 && fp_err <= 1e-8 && (at_q - 1.0).abs() <= 5e-2;
    Ok((ok, format!("pendulum u(pi/3)={at:.6}, fixed point error {fp_err:.2e}; quadratic u(pi/2)={at_q:.6}")))
}

fn criterion_3() -> Check {
    let cfg = RateConfig::default();
    let pend = rate_report(&pendulum_sine(1.0), &[1.0], &cfg).map_err(|e| e.to_string())?;
    let quad = rate_report(&quadratic_sine(1.0), &[0.5, 1.0, 5.0], &cfg).map_err(|e| e.to_string())?;
    let (_, lam) = {
        let (x, _) = pendulum_fixed_point(1.0);
        (x, x.sin())
    };
    let p = &pend.rows[0];
    let mut ok = p.failure.is_none() && (p.r_hat - lam).abs() <= 0.1 * lam && (p.a_hat - lam).abs() <= 0.02;
    let agree = |a: f64, r: f64| (a - r).abs() <= 0.1 * a + 0.02;
    ok &= agree(p.a_hat, p.r_hat);
    let mut detail = vec![format!("pendulum c=1 R={:.4} a={:.4}", p.r_hat, p.a_hat)];
    for r in &quad.rows {
        ok &= r.failure.is_none() && (r.a_hat - 1.0).abs() <= 0.01 && agree(r.a_hat, r.r_hat);
        detail.push(format!("quadratic c={} R={:.4} a={:.4}", r.c, r.r_hat, r.a_hat));
    }
    Ok((ok, detail.join(", ")))
}

fn criterion_4() -> Check {
    let mut values = Vec::new();
    for c in [1.0, 3.0, 10.0, 100.0] {
        let model = pendulum_sine(c);
        let u = solve(&model, Direction::Backward)?;
        let est = estimate_mather_average(&model, &u, &MatherConfig::default()).map_err(|e| format!("c={c}: {e}"))?;
        values.push(est.a_hat);
    }
    let monotone = values.windows(2).all(|w| w[1] >= w[0]);
    let ok = monotone && *values.last().unwrap() >= 0.99;
    let closed: Vec<String> = [1.0f64, 3.0, 10.0, 100.0].iter().map(|c| format!("{:.5}", (c * (c + 2.0)).sqrt() / (c + 1.0))).collect();
    Ok((ok, format!("a = {values:.5?} (closed form [{}])", closed.join(", "))))
}

fn criterion_5() -> Check {
    let model = appendix_c(-0.05);
    let cfg = SemigroupConfig { m_div: 20.0, t_max: 1e3, ..reference() }.with_velocity_window_for(&model);
    let grid = cfg.grid().map_err(|e| e.to_string())?;
    let data = [
        GridFn::constant(grid, 0.0),
        GridFn::from_fn(grid, |x| 2.0 + x.sin()).map_err(|e| e.to_string())?,
        GridFn::from_fn(grid, |x| -1.0 + 0.5 * (2.0 * x).cos()).map_err(|e| e.to_string())?,
    ];
    let mut ok = true;
    let mut labels = Vec::new();
    for phi in &data {
        let o = classify_longtime(&model, phi, &cfg).map_err(|e| e.to_string())?;
        ok &= o.class == LongTime::DivergedDown;
        labels.push(format!("{}@{:.0}", o.class.label(), o.t_end));
    }
    let pend = pendulum_sine(1.0);
    let pcfg = reference().with_velocity_window_for(&pend);
    let u = solve(&pend, Direction::Backward)?;
    let v = solve(&pend, Direction::Forward)?;
    let below = classify_longtime(&pend, &v.u.shifted(-0.2), &pcfg).map_err(|e| e.to_string())?;
    let above = classify_longtime(&pend, &u.u.shifted(0.2), &pcfg).map_err(|e| e.to_string())?;
    ok &= below.class == LongTime::DivergedDown;
    let back = match &above.class {
        LongTime::Converged(s) => s.u.sup_distance(&u.u).map_err(|e| e.to_string())?,
        _ => f64::INFINITY,
    };
    ok &= back <= 1e-3;
    Ok((
        ok,
        format!(
            "appendix-c c=-0.05: {}; pendulum v+ - 0.2: {}, u- + 0.2: {} (distance to u- {back:.2e})",
            labels.join(" "),
            below.class.label(),
            above.class.label()
        ),
    ))
}

/// Deterministic smooth test data.
fn trig(grid: hjdisc_core::grid::PeriodicGrid, seed: f64) -> GridFn {
    let coef: Vec<f64> = (1..=7).map(|k| (seed * 12.9898 + k as f64 * 78.233).sin()).collect();
    GridFn::from_fn(grid, |x| {
        coef[0] + (1..=3).map(|k| coef[2 * k - 1] * (k as f64 * x).cos() + coef[2 * k] * (k as f64 * x).sin()).sum::<f64>()
    })
    .unwrap()
}

fn criterion_6() -> Check {
    let model = pendulum_sine(1.0);
    let cfg = reference().with_velocity_window_for(&model);
    let grid = cfg.grid().map_err(|e| e.to_string())?;
    let err = |e: hjdisc_core::Error| e.to_string();
    let mut detail = Vec::new();

    let mut violations = 0;
    for s in 0..4 {
        let phi = trig(grid, s as f64);
        let psi = phi.combine(1.0, &trig(grid, 10.0 + s as f64).map(f64::abs), 1.0).map_err(err)?;
        let a = step_backward(&model, &phi, &cfg).map_err(err)?;
        let b = step_backward(&model, &psi, &cfg).map_err(err)?;
        violations += a.values().iter().zip(b.values()).filter(|(a, b)| a > b).count();
    }
    detail.push(format!("monotonicity violations {violations}"));
    let mut ok = violations == 0;

    let big = model.lambda.lambda_abs_max();
    let mut excess = f64::NEG_INFINITY;
    for s in 0..3 {
        let (mut a, mut b) = (trig(grid, 20.0 + s as f64), trig(grid, 30.0 + s as f64));
        let d0 = a.sup_distance(&b).map_err(err)?;
        for k in 1..=6 {
            a = evolve(&model, &a, 0.5, Direction::Backward, &cfg, None).map_err(err)?.0;
            b = evolve(&model, &b, 0.5, Direction::Backward, &cfg, None).map_err(err)?.0;
            let t = 0.5 * k as f64;
            excess = excess.max(a.sup_distance(&b).map_err(err)? - (big * t).exp() * d0);
        }
    }
    ok &= excess <= 5.0 * cfg.dt;
    detail.push(format!("contraction excess {excess:.2e}"));

    let phi = trig(grid, 40.0);
    let (s, t) = (0.5 + cfg.dt / 3.0, 0.7 + cfg.dt / 4.0);
    let whole = evolve(&model, &phi, s + t, Direction::Backward, &cfg, None).map_err(err)?.0;
    let first = evolve(&model, &phi, t, Direction::Backward, &cfg, None).map_err(err)?.0;
    let split = evolve(&model, &first, s, Direction::Backward, &cfg, None).map_err(err)?.0;
    let gap = whole.sup_distance(&split).map_err(err)?;
    let yard = scheme_error(&model, &phi, s + t, &cfg).map_err(err)?;
    ok &= gap <= 2.0 * yard;
    detail.push(format!("composition gap {gap:.2e} vs scheme error {yard:.2e}"));

    let (x0, u0, t, s) = (2.0, 1.0, 0.4, 0.3);
    let direct = action_function(&model, x0, u0, t + s, &cfg).map_err(err)?;
    let mid = action_function(&model, x0, u0, t, &cfg).map_err(err)?;
    let mut composed = vec![f64::INFINITY; grid.n()];
    for j in 0..grid.n() {
        let later = action_function(&model, grid.node(j), mid.values()[j], s, &cfg).map_err(err)?;
        composed.iter_mut().zip(later.values()).for_each(|(c, v)| *c = c.min(*v));
    }
    let composed = GridFn::new(grid, composed).map_err(err)?;
    let markov = direct.sup_distance(&composed).map_err(err)?;
    let anchor = grid.node(grid.nearest(x0));
    let datum = GridFn::from_fn(grid, |x| u0 + 100.0 * (1.0 + cfg.v_max) * torus_distance(x, anchor)).map_err(err)?;
    let wide = SemigroupConfig { m_div: 1e300, ..cfg.clone() };
    let yard = scheme_error(&model, &datum, t + s, &wide).map_err(err)?;
    ok &= markov <= 3.0 * yard;
    detail.push(format!("markov gap {markov:.2e} vs scheme error {yard:.2e}"));

    let crit = pendulum_sine(0.0);
    let ccfg = reference().with_velocity_window_for(&crit);
    let mut cur = GridFn::constant(grid, 0.0);
    let mut low = 0.0f64;
    for _ in 0..6 {
        cur = evolve(&crit, &cur, 0.5, Direction::Backward, &ccfg, None).map_err(err)?.0;
        low = low.min(cur.min());
    }
    ok &= low >= 0.0;
    detail.push(format!("min T_t 0 at c=0: {low:.2e}"));
    Ok((ok, detail.join(", ")))
}

fn criterion_7() -> Check {
    let model = homogeneous(3.0);
    let cfg = reference().with_velocity_window_for(&model);
    let grid = cfg.grid().map_err(|e| e.to_string())?;
    let target = GridFn::constant(grid, 3.0);
    let mut ok = true;
    let mut detail = Vec::new();
    for t in [0.5, 1.0, 2.0] {
        let (u, _) = evolve(&model, &GridFn::constant(grid, 0.0), t, Direction::Backward, &cfg, None).map_err(|e| e.to_string())?;
        let d = u.sup_distance(&target).map_err(|e| e.to_string())?;
        let exact = 3.0 * (-t).exp();
        ok &= (d - exact).abs() <= 5.0 * cfg.dt;
        detail.push(format!("t={t}: {:.2e}", (d - exact).abs()));
    }
    let (_, trace) = evolve(&model, &GridFn::constant(grid, 0.0), 20.0, Direction::Backward, &cfg, Some(&target))
        .map_err(|e| e.to_string())?;
    let fit = fit_rate(&trace, 0.5).map_err(|e| e.to_string())?;
    ok &= (fit.r_hat - 1.0).abs() <= 1e-3;
    detail.push(format!("rate {:.6}", fit.r_hat));
    Ok((ok, detail.join(", ")))
}

fn criterion_8() -> Check {
    let critical_solve = |model: &ContactModel| {
        let cfg = SemigroupConfig { t_max: 2000.0, ..reference() }.with_velocity_window_for(model);
        solve_stationary(model, Direction::Backward, &cfg).map_err(|e| e.to_string())
    };
    let quad = quadratic_sine(0.0);
    let u = critical_solve(&quad)?;
    let est = estimate_mather_average(&quad, &u, &MatherConfig::default()).map_err(|e| e.to_string())?;
    let in_arc = |x: f64| x <= PI + 0.05 || x >= TAU - 0.05;
    let arc_point = est
        .fixed_points
        .iter()
        .any(|f| in_arc(f.state.x) && f.state.p.abs() < 1e-8 && f.state.u.abs() < 1e-8);
    let pend = pendulum_sine(0.0);
    let v = critical_solve(&pend)?;
    let pest = estimate_mather_average(&pend, &v, &MatherConfig::default()).map_err(|e| e.to_string())?;
    let origin = ContactState::new(0.0, 0.0, 0.0);
    let closest = pest.fixed_points.iter().map(|f| f.state.distance(&origin)).fold(f64::INFINITY, f64::min);
    let ok = near_zero(est.a_hat, 0.02) && arc_point && closest <= 1e-6;
    Ok((
        ok,
        format!(
            "quadratic a={:.4}, {} fixed points, one on [0, pi]: {arc_point}; pendulum closest fixed point to origin {closest:.2e}",
            est.a_hat,
            est.fixed_points.len()
        ),
    ))
}

fn criterion_9() -> Check {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, model) in [("quadratic", quadratic_sine(1.0)), ("pendulum", pendulum_sine(1.0))] {
        let u = solve(&model, Direction::Backward)?;
        let psi = GridFn::constant(u.u.grid(), 0.0);
        let jets = graph_seeds(&u.u, 1);
        let margin = lyapunov_margin(&model, &psi, &jets).map_err(|e| e.to_string())?;
        let bound = lyapunov_lower_bound(&model, &psi, &jets);
        ok &= margin >= 0.2 && margin >= bound - 1e-9;
        detail.push(format!("{name} margin {margin:.4} (bound {bound:.4})"));
    }
    Ok((ok, detail.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("critical values", criterion_1),
        ("stationary solutions", criterion_2),
        ("rates", criterion_3),
        ("asymptote", criterion_4),
        ("divergence and basins", criterion_5),
        ("semigroup properties", criterion_6),
        ("homogeneous exactness", criterion_7),
        ("critical-case Mather check", criterion_8),
        ("Lyapunov margin", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {} ({name}): {} [{:.1}s] {detail}",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
