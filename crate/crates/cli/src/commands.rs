//! Command dispatch: resolve the configuration, run, collect artifacts.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use hjdisc_core::characteristics::{
    calibration_error, estimate_mather_average, find_fixed_point, integrate, ContactState, MatherConfig,
};
use hjdisc_core::critical::{bisect_critical, nonneg_critical, probe_config};
use hjdisc_core::exec::{map_slice, Execution};
use hjdisc_core::grid::{fmt_float, GridFn, Interpolation};
use hjdisc_core::model::ContactModel;
use hjdisc_core::rates::{rate_report, RateConfig};
use hjdisc_core::semigroup::{
    backward_start_level, classify_longtime, solve_stationary, subsolution_residual, Direction, SemigroupConfig,
    StationarySolution, VelocitySearch,
};
use hjdisc_core::verify::{run_suite, Status, VerifyConfig};
use serde_json::{json, Value};

use crate::config::{RawConfig, Resolver};
use crate::output::Outputs;
use crate::scenarios::resolve_model;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Critical,
    Rate,
    Orbit,
    Scan,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::Critical => "critical",
            Self::Rate => "rate",
            Self::Orbit => "orbit",
            Self::Scan => "scan",
            Self::Verify => "verify",
        }
    }
}

/// What a finished command hands back.
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    /// human-readable lines for stdout
    pub lines: Vec<String>,
    /// numerical or verification failure; files were still written
    pub failure: Option<CliError>,
}

struct Produced {
    outputs: Outputs,
    results: Value,
    lines: Vec<String>,
    /// set when files are written but the run still fails
    failure: Option<CliError>,
}

impl Produced {
    fn new() -> Self {
        Self { outputs: Outputs::default(), results: Value::Null, lines: Vec::new(), failure: None }
    }
}

fn numerical(e: hjdisc_core::Error) -> CliError {
    match e {
        hjdisc_core::Error::InvalidInput(m) => CliError::Config(m),
        other => CliError::Numerical(other.to_string()),
    }
}

fn semigroup_config(r: &mut Resolver, base: SemigroupConfig) -> Result<SemigroupConfig, CliError> {
    let cfg = SemigroupConfig {
        n: r.usize("grid.n", base.n, 8)?,
        dt: r.positive("semigroup.dt", base.dt)?,
        v_max: r.positive("semigroup.v_max", base.v_max)?,
        n_v: r.usize("semigroup.n_v", base.n_v, 9)?,
        refine_iters: r.usize("semigroup.refine_iters", base.refine_iters, 0)?,
        t_max: r.positive("semigroup.t_max", base.t_max)?,
        tol: r.positive("semigroup.tol", base.tol)?,
        m_div: r.positive("semigroup.m_div", base.m_div)?,
        search: match r.choice("semigroup.search", &["piecewise", "coarse_golden"])? {
            "piecewise" => VelocitySearch::Piecewise,
            _ => VelocitySearch::CoarseGolden,
        },
        execution: match r.choice("semigroup.execution", &["parallel", "sequential"])? {
            "parallel" => Execution::Parallel,
            _ => Execution::Sequential,
        },
    };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn mather_config(r: &mut Resolver, execution: Execution) -> Result<MatherConfig, CliError> {
    let d = MatherConfig::default();
    Ok(MatherConfig {
        stride: r.usize("mather.stride", d.stride, 1)?,
        horizon: r.positive("mather.horizon", d.horizon)?,
        dt: r.positive("mather.dt", d.dt)?,
        escape_tol: r.positive("mather.escape_tol", d.escape_tol)?,
        check_time: r.positive("mather.check_time", d.check_time)?,
        check_travel: r.positive("mather.check_travel", d.check_travel)?,
        graph_tol: r.positive("mather.graph_tol", d.graph_tol)?,
        newton_tol: r.positive("mather.newton_tol", d.newton_tol)?,
        execution,
    })
}

fn direction(r: &mut Resolver, key: &str) -> Result<Direction, CliError> {
    Ok(match r.choice(key, &["backward", "forward"])? {
        "backward" => Direction::Backward,
        _ => Direction::Forward,
    })
}

fn solve(model: &ContactModel, r: &mut Resolver) -> Result<Produced, CliError> {
    let cfg = semigroup_config(r, SemigroupConfig::default())?;
    let dir = direction(r, "solve.direction")?;
    let effective = cfg.with_velocity_window_for(model);
    let mut p = Produced::new();
    let sol = solve_stationary(model, dir, &effective).map_err(numerical)?;
    let stem = match dir {
        Direction::Backward => "u_minus",
        Direction::Forward => "v_plus",
    };
    p.outputs.add(&format!("{stem}.csv"), sol.to_csv());
    p.outputs.add_json(&format!("{stem}.json"), &sol.sidecar());
    let residual = subsolution_residual(model, &sol.u);
    p.lines.push(format!(
        "{stem}: residual {:e} after {} steps, range [{}, {}]",
        sol.residual,
        sol.iterations,
        sol.u.min(),
        sol.u.max()
    ));
    p.results = json!({
        "solution": sol.sidecar(),
        "min": sol.u.min(),
        "max": sol.u.max(),
        "subsolution_residual": residual,
        "v_max_effective": effective.v_max,
        "saturation": sol.saturation,
    });
    Ok(p)
}

fn critical(model: &ContactModel, r: &mut Resolver) -> Result<Produced, CliError> {
    let method = r.choice("critical.method", &["bisection", "nonneg"])?;
    let base = if method == "bisection" { probe_config() } else { SemigroupConfig::default() };
    let cfg = semigroup_config(r, base)?;
    let report = if method == "bisection" {
        let bracket = r.f64_list("critical.bracket", &[-1.0, 1.0])?;
        let tol = r.positive("critical.tol", 0.02)?;
        if bracket.len() != 2 {
            return Err(CliError::Config("critical.bracket needs exactly two values".into()));
        }
        bisect_critical(model, (bracket[0], bracket[1]), tol, &cfg).map_err(numerical)?
    } else {
        nonneg_critical(model, &cfg).map_err(numerical)?
    };
    let mut p = Produced::new();
    let mut csv = String::from("c,class\n");
    for probe in &report.probes {
        let _ = writeln!(csv, "{},{}", fmt_float(probe.c), probe.class);
    }
    p.outputs.add("probes.csv", csv);
    p.outputs.add_json("critical.json", &report.to_json());
    p.lines.push(format!("c0 = {} ({:?}), bracket [{}, {}]", report.c0, report.method, report.bracket.0, report.bracket.1));
    p.results = report.to_json();
    Ok(p)
}

fn rate(model: &ContactModel, r: &mut Resolver) -> Result<Produced, CliError> {
    let sg = semigroup_config(r, SemigroupConfig::default())?;
    let d = RateConfig::default();
    let c_list = r.f64_list("rate.c_list", &[model.c])?;
    if c_list.is_empty() {
        return Err(CliError::Config("rate.c_list is empty".into()));
    }
    let cfg = RateConfig {
        mather: mather_config(r, sg.execution)?,
        semigroup: sg,
        delta: r.positive("rate.delta", d.delta)?,
        window_fraction: r.positive("rate.window_fraction", d.window_fraction)?,
        reference_tol: r.positive("rate.reference_tol", d.reference_tol)?,
        stop_dist: r.positive("rate.stop_dist", d.stop_dist)?,
        asymptote_tol: r.positive("rate.asymptote_tol", d.asymptote_tol)?,
        divergence_check: r.bool("rate.divergence_check", d.divergence_check)?,
    };
    let report = rate_report(model, &c_list, &cfg).map_err(numerical)?;
    let mut p = Produced::new();
    p.outputs.add("rates.csv", report.to_csv());
    let results = serde_json::to_value(&report).expect("rate report serializes");
    p.outputs.add_json("rates.json", &results);
    for row in &report.rows {
        p.lines.push(match &row.failure {
            None => format!("c = {}: a_hat {:.6}, R_hat {:.6}, gap {:.2e}", row.c, row.a_hat, row.r_hat, row.gap),
            Some(f) => format!("c = {}: failed: {f}", row.c),
        });
    }
    let failed: Vec<_> = report.rows.iter().filter(|row| row.failure.is_some()).map(|row| row.c).collect();
    if !failed.is_empty() {
        p.failure = Some(CliError::Numerical(format!("rate rows failed at c = {failed:?}")));
    }
    p.results = results;
    Ok(p)
}

fn orbit(model: &ContactModel, r: &mut Resolver) -> Result<Produced, CliError> {
    let sg = semigroup_config(r, SemigroupConfig::default())?;
    let x0 = r.f64("orbit.x0", 1.0)?;
    let p0 = r.optional_f64("orbit.p0")?;
    let u0 = r.optional_f64("orbit.u0")?;
    let t = r.positive("orbit.t", 10.0)?;
    let dt = r.positive("orbit.dt", 1e-3)?;
    let dir = direction(r, "orbit.direction")?;
    let with_mather = r.bool("orbit.mather", true)?;
    let mather = mather_config(r, sg.execution)?;
    let needs_solution = with_mather || p0.is_none() || u0.is_none();
    let u_minus: Option<StationarySolution> = if needs_solution {
        Some(solve_stationary(model, Direction::Backward, &sg.with_velocity_window_for(model)).map_err(numerical)?)
    } else {
        None
    };
    let seed = {
        let on_graph = |f: &dyn Fn(&StationarySolution) -> f64| u_minus.as_ref().map(f).unwrap_or(0.0);
        let p = p0.unwrap_or_else(|| on_graph(&|u| u.u.gradient().interpolate(x0, Interpolation::Linear)));
        let v = u0.unwrap_or_else(|| on_graph(&|u| u.u.interpolate(x0, Interpolation::Linear)));
        ContactState::new(x0, p, v)
    };
    let record = integrate(model, seed, t, dt, dir).map_err(numerical)?;
    let mut p = Produced::new();
    p.outputs.add("orbit.csv", record.to_csv());
    let end = *record.last();
    let newton = find_fixed_point(model, end, mather.newton_tol).ok();
    let mut results = json!({
        "seed": seed,
        "end": end,
        "escaped": record.escaped,
        "lambda_avg": record.lambda_avg.last(),
        "fixed_point_from_end": newton,
    });
    p.lines.push(format!("orbit end ({}, {}, {}), escaped: {}", end.x, end.p, end.u, record.escaped));
    if let Some(u) = &u_minus {
        results["calibration_error"] = json!(calibration_error(u, &record));
        if with_mather {
            let est = estimate_mather_average(model, u, &mather).map_err(numerical)?;
            p.outputs.add_json("mather.json", &est.to_json());
            p.lines.push(format!("a_hat = {} from {} fixed points", est.a_hat, est.fixed_points.len()));
            results["a_hat"] = json!(est.a_hat);
        }
    }
    p.results = results;
    Ok(p)
}

fn scan(model: &ContactModel, r: &mut Resolver) -> Result<Produced, CliError> {
    let cfg = semigroup_config(r, probe_config())?;
    let c_list = r.f64_list("scan.c_list", &[-0.5, -0.25, 0.0, 0.25, 0.5])?;
    let outcomes = map_slice(&c_list, cfg.execution, |&c| {
        let m = model.with_c(c);
        let start = GridFn::constant(cfg.grid()?, backward_start_level(&m)?);
        classify_longtime(&m, &start, &cfg)
    });
    let mut p = Produced::new();
    let mut csv = String::from("c,class,t_end,min,max\n");
    let mut rows = Vec::new();
    for (c, o) in c_list.iter().zip(outcomes) {
        let o = o.map_err(numerical)?;
        let label = o.class.label();
        let _ = writeln!(csv, "{},{},{},{},{}", fmt_float(*c), label, fmt_float(o.t_end), fmt_float(o.min), fmt_float(o.max));
        p.lines.push(format!("c = {c}: {label} at t = {}", o.t_end));
        rows.push(json!({"c": c, "class": label, "t_end": o.t_end, "min": o.min, "max": o.max}));
    }
    p.outputs.add("scan.csv", csv);
    p.results = json!({ "rows": rows });
    Ok(p)
}

fn verify(model: &ContactModel, r: &mut Resolver) -> Result<Produced, CliError> {
    let semigroup = semigroup_config(r, SemigroupConfig::default())?;
    let vcfg = VerifyConfig {
        mather: mather_config(r, semigroup.execution)?,
        semigroup,
        pairs: r.usize("verify.pairs", 3, 1)?,
        seed: r.u64("verify.seed", 7)?,
    };
    let checks = run_suite(model, &vcfg);
    let mut p = Produced::new();
    let mut failed = Vec::new();
    for c in &checks {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        p.lines.push(format!("{tag} {}: {}", c.name, c.detail));
        if c.status == Status::Fail {
            failed.push(c.name.clone());
        }
    }
    let results = json!({ "properties": checks, "failed": failed });
    p.outputs.add_json("verify.json", &results);
    if !failed.is_empty() {
        p.failure = Some(CliError::Verification(failed));
    }
    p.results = results;
    Ok(p)
}

/// Runs `command` and writes its artifacts plus `report.json` into the
/// output directory. Numerical and verification failures still leave a report
/// carrying the error and come back in [`RunSummary::failure`]; configuration
/// and I/O errors are returned as `Err` and write nothing.
pub fn run(command: Command, raw: &RawConfig, out_override: Option<PathBuf>) -> Result<RunSummary, CliError> {
    let start = Instant::now();
    let mut r = Resolver::new(raw);
    let model = resolve_model(&mut r)?;
    let out_dir = match out_override {
        Some(dir) => dir,
        None => PathBuf::from(r.string("outputs.dir", Some("out"))?),
    };
    let produced = match command {
        Command::Solve => solve(&model, &mut r),
        Command::Critical => critical(&model, &mut r),
        Command::Rate => rate(&model, &mut r),
        Command::Orbit => orbit(&model, &mut r),
        Command::Scan => scan(&model, &mut r),
        Command::Verify => verify(&model, &mut r),
    };
    let mut p = match produced {
        Ok(p) => p,
        Err(CliError::Numerical(msg)) => {
            let mut p = Produced::new();
            p.failure = Some(CliError::Numerical(msg));
            p
        }
        Err(e) => return Err(e),
    };
    let mut echo = r.into_echo();
    echo.insert("outputs.dir".into(), Value::from(out_dir.to_string_lossy().into_owned()));
    let mut report = json!({
        "command": command.name(),
        "config": echo,
        "results": p.results,
        "files": p.outputs.names().collect::<Vec<_>>(),
        "wall_time": start.elapsed().as_secs_f64(),
    });
    if let Some(f) = &p.failure {
        report["error"] = json!(f.to_string());
    }
    p.outputs.add_json("report.json", &report);
    let files = p.outputs.commit(&out_dir)?;
    Ok(RunSummary { out_dir, files, lines: p.lines, failure: p.failure })
}
