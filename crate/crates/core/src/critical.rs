//! Critical values: `c₀` by behavioral bisection, the Mañé value `c(h)` by
//! ergodic slope, and the zero-set formula for non-negative discounts.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::exec::map_slice;
use crate::grid::{GridFn, PeriodicGrid};
use crate::model::{ContactModel, DiscountSpec, HamiltonianSpec, SignClass};
use crate::semigroup::{backward_start_level, classify_longtime, BackwardScheme, LongTime, SemigroupConfig};

/// Coarse configuration used for bisection probes. Near `c₀` both convergence
/// and divergence are slow, so the horizon is long and the grid small.
pub fn probe_config() -> SemigroupConfig {
    SemigroupConfig { n: 128, dt: 0.02, t_max: 1e4, tol: 1e-4, m_div: 50.0, ..Default::default() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalMethod {
    Bisection,
    NonNegFormula,
    ManeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub c: f64,
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCrossCheck {
    pub a: Vec<f64>,
    pub values: Vec<f64>,
    /// `c∞` from fitting `c∞ + k/|a|` through the last two values
    pub extrapolated: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalReport {
    /// `f64::NEG_INFINITY` when `c₀ = −∞`
    pub c0: f64,
    pub bracket: (f64, f64),
    pub method: CriticalMethod,
    pub probes: Vec<Probe>,
    pub cross_check: Option<ScanCrossCheck>,
}

impl CriticalReport {
    pub fn to_json(&self) -> serde_json::Value {
        let c0 = if self.c0.is_finite() { json!(self.c0) } else { json!("-inf") };
        json!({
            "c0": c0,
            "method": self.method,
            "bracket": [self.bracket.0, self.bracket.1],
            "probes": self.probes,
            "cross_check": self.cross_check,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Below,
    Above,
}

/// Classifies `c` from the backward start level. Undetermined probes are
/// re-run at `c + tol_c/10`; if that is still undetermined the probe counts as
/// not below `c₀`.
fn probe(model: &ContactModel, c: f64, tol_c: f64, cfg: &SemigroupConfig) -> Result<(Side, Vec<Probe>)> {
    let mut log = Vec::new();
    for (k, cc) in [c, c + 0.1 * tol_c].into_iter().enumerate() {
        let m = model.with_c(cc);
        let start = GridFn::constant(cfg.grid()?, backward_start_level(&m)?);
        let outcome = classify_longtime(&m, &start, cfg)?;
        log.push(Probe { c: cc, class: outcome.class.label().to_string() });
        match outcome.class {
            LongTime::DivergedDown => return Ok((Side::Below, log)),
            LongTime::Converged(_) | LongTime::DivergedUp => return Ok((Side::Above, log)),
            LongTime::Undetermined if k == 1 => return Ok((Side::Above, log)),
            LongTime::Undetermined => {}
        }
    }
    unreachable!("second probe always returns")
}

/// Bisection on the boundary between divergence to `−∞` (below `c₀`) and
/// convergence (above `c₀`). Discounts with `max λ ≤ 0` are bisected on the
/// reflected model, which has the same critical value.
pub fn bisect_critical(
    model: &ContactModel,
    bracket: (f64, f64),
    tol_c: f64,
    cfg: &SemigroupConfig,
) -> Result<CriticalReport> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !(tol_c > 0.0) {
        return Err(Error::InvalidInput("bracket must satisfy c_lo < c_hi and tol_c > 0".into()));
    }
    let model = match model.lambda.sign_class() {
        SignClass::Minus => model.reflect(),
        SignClass::IdenticallyZero => {
            return Err(Error::InvalidInput("λ ≡ 0 has no critical value; use the Mañé value".into()))
        }
        _ => model.clone(),
    };
    let ends = map_slice(&[lo, hi], cfg.execution, |&c| {
        let m = model.with_c(c);
        let start = GridFn::constant(cfg.grid()?, backward_start_level(&m)?);
        classify_longtime(&m, &start, cfg)
    });
    let mut probes = Vec::new();
    let mut outcomes = Vec::new();
    for (c, r) in [lo, hi].into_iter().zip(ends) {
        let o = r?;
        probes.push(Probe { c, class: o.class.label().to_string() });
        outcomes.push(o.class);
    }
    if outcomes[0] != LongTime::DivergedDown || !matches!(outcomes[1], LongTime::Converged(_)) {
        return Err(Error::BadBracket(format!(
            "c_lo = {lo} is {}, c_hi = {hi} is {}",
            outcomes[0].label(),
            outcomes[1].label()
        )));
    }
    let mut sides = vec![(lo, Side::Below), (hi, Side::Above)];
    while hi - lo > tol_c {
        let mid = 0.5 * (lo + hi);
        let (side, log) = probe(&model, mid, tol_c, cfg)?;
        log::debug!("probe c = {mid}: {side:?}");
        probes.extend(log);
        sides.push((mid, side));
        match side {
            Side::Below => lo = mid,
            Side::Above => hi = mid,
        }
    }
    let highest_below = sides.iter().filter(|s| s.1 == Side::Below).map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let lowest_above = sides.iter().filter(|s| s.1 == Side::Above).map(|s| s.0).fold(f64::INFINITY, f64::min);
    if highest_below >= lowest_above {
        return Err(Error::NonMonotone(format!(
            "divergence at c = {highest_below} but convergence at c = {lowest_above}"
        )));
    }
    Ok(CriticalReport {
        c0: 0.5 * (lo + hi),
        bracket: (lo, hi),
        method: CriticalMethod::Bisection,
        probes,
        cross_check: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManeEstimate {
    pub value: f64,
    pub fit_residual: f64,
    pub warning: Option<String>,
}

/// RMS residual above which the tail of a Mañé slope fit is reported as non-linear.
pub const MANE_FIT_THRESHOLD: f64 = 1e-3;

/// `c(h)` as minus the long-time slope of the node mean of `T_t 0` for the
/// undiscounted semigroup (`λ ≡ 0`, `c = 0`), fitted over the last half of
/// `[0, t_max]`.
pub fn mane_value(h: &HamiltonianSpec, cfg: &SemigroupConfig) -> Result<ManeEstimate> {
    let model = ContactModel::new(h.clone(), DiscountSpec::constant(0.0)?, 0.0)?;
    let cfg = SemigroupConfig { m_div: f64::MAX / 100.0, ..cfg.with_velocity_window_for(&model) };
    let scheme = BackwardScheme::new(&model, &cfg)?;
    let steps = (cfg.t_max / cfg.dt).ceil() as usize;
    let mut cur = GridFn::constant(cfg.grid()?, 0.0);
    let (mut ts, mut means) = (Vec::new(), Vec::new());
    for k in 1..=steps {
        cur = scheme.apply(&cur)?.0;
        if 2 * k >= steps {
            ts.push(k as f64 * cfg.dt);
            means.push(cur.mean());
        }
    }
    let (slope, _, residual) = least_squares(&ts, &means)?;
    let warning = (residual > MANE_FIT_THRESHOLD)
        .then(|| format!("non-linear tail in Mañé slope fit (RMS residual {residual:e})"));
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok(ManeEstimate { value: -slope, fit_residual: residual, warning })
}

/// Least-squares line; returns `(slope, intercept, rms residual)`.
pub fn least_squares(t: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if t.len() != y.len() || t.len() < 2 {
        return Err(Error::InvalidInput("line fit needs at least two points".into()));
    }
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let (mut stt, mut sty) = (0.0, 0.0);
    for (a, b) in t.iter().zip(y) {
        stt += (a - tm) * (a - tm);
        sty += (a - tm) * (b - ym);
    }
    if !(stt > 0.0) {
        return Err(Error::InvalidInput("line fit needs distinct abscissae".into()));
    }
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let ss = t.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum::<f64>();
    Ok((slope, intercept, (ss / n).sqrt()))
}

/// Default `a` values of the `c(h + aλ)` scan.
pub const A_SCAN: [f64; 4] = [-1.0, -4.0, -16.0, -64.0];

/// `c(h + aλ)` for each `a`, extrapolated as `c∞ + k/|a|` through the last two.
pub fn a_scan(model: &ContactModel, a_values: &[f64], cfg: &SemigroupConfig) -> Result<(Vec<f64>, f64)> {
    if a_values.len() < 2 {
        return Err(Error::InvalidInput("a-scan needs at least two values".into()));
    }
    let lam = model.lambda.as_periodic_fn();
    let values = map_slice(a_values, cfg.execution, |&a| -> Result<f64> {
        Ok(mane_value(&model.h.plus_potential(a, &lam)?, cfg)?.value)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let k = values.len();
    let (a1, a2) = (a_values[k - 2].abs(), a_values[k - 1].abs());
    let extrapolated = (a2 * values[k - 1] - a1 * values[k - 2]) / (a2 - a1);
    Ok((values, extrapolated))
}

/// Near-zero clusters of `λ` on the grid, as (first node, length) runs on the circle.
fn zero_clusters(lambda: &DiscountSpec, grid: PeriodicGrid, zero_tol: f64) -> Vec<(usize, usize)> {
    let n = grid.n();
    let zero: Vec<bool> = grid.nodes().map(|x| lambda.value(x).abs() < zero_tol).collect();
    if zero.iter().all(|&z| z) {
        return vec![(0, n)];
    }
    // rotate so the scan starts at a non-zero node
    let start = zero.iter().position(|&z| !z).unwrap_or(0);
    let mut out = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    for k in 1..=n {
        let i = (start + k) % n;
        match (zero[i], run.as_mut()) {
            (true, Some(r)) => r.1 += 1,
            (true, None) => run = Some((i, 1)),
            (false, Some(_)) => out.push(run.take().unwrap()),
            (false, None) => {}
        }
    }
    if let Some(r) = run {
        out.push(r);
    }
    out
}

/// `c₀` for a non-negative discount: the largest `−l(x*, 0)` over isolated
/// zeros `x*` of `λ`, cross-checked against the `c(h + aλ)` scan. With no
/// zeros `c₀ = −∞`; with a zero cluster wider than 5 nodes only the scan is used.
pub fn nonneg_critical(model: &ContactModel, cfg: &SemigroupConfig) -> Result<CriticalReport> {
    let tabulated = model.lambda.is_tabulated() || model.h.is_tabulated();
    let zero_tol = if tabulated { 1e-4 } else { 1e-8 };
    if model.lambda.lambda_minus() < -zero_tol || !(model.lambda.lambda_plus() > 0.0) {
        return Err(Error::InvalidInput("non-negative discount with positive maximum required".into()));
    }
    let grid = cfg.grid()?;
    let clusters = zero_clusters(&model.lambda, grid, zero_tol);
    if clusters.is_empty() {
        return Ok(CriticalReport {
            c0: f64::NEG_INFINITY,
            bracket: (f64::NEG_INFINITY, f64::NEG_INFINITY),
            method: CriticalMethod::NonNegFormula,
            probes: Vec::new(),
            cross_check: None,
        });
    }
    let (values, extrapolated) = a_scan(model, &A_SCAN, cfg)?;
    if clusters.iter().any(|c| c.1 > 5) {
        return Ok(CriticalReport {
            c0: extrapolated,
            bracket: (extrapolated, *values.last().unwrap()),
            method: CriticalMethod::ManeLimit,
            probes: Vec::new(),
            cross_check: Some(ScanCrossCheck { a: A_SCAN.to_vec(), values, extrapolated, gap: 0.0 }),
        });
    }
    let mut c0 = f64::NEG_INFINITY;
    for &(first, len) in &clusters {
        let center = grid.node(first) + 0.5 * (len - 1) as f64 * grid.dx();
        c0 = c0.max(-model.h.lagrangian(center, 0.0)?);
    }
    Ok(CriticalReport {
        c0,
        bracket: (c0, c0),
        method: CriticalMethod::NonNegFormula,
        probes: Vec::new(),
        cross_check: Some(ScanCrossCheck {
            a: A_SCAN.to_vec(),
            values,
            extrapolated,
            gap: (extrapolated - c0).abs(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::*;
    use crate::model::FourierSeries;
    use approx::assert_abs_diff_eq;

    #[test]
    fn line_fit_is_exact_on_lines() {
        let t: Vec<f64> = (0..20).map(|k| k as f64 * 0.5).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 - 0.25 * t).collect();
        let (s, i, r) = least_squares(&t, &y).unwrap();
        assert_abs_diff_eq!(s, -0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(i, 3.0, epsilon = 1e-13);
        assert!(r < 1e-13);
        assert!(least_squares(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn clusters_wrap_around() {
        let g = PeriodicGrid::new(512).unwrap();
        let c = zero_clusters(&DiscountSpec::one_minus_cos_squared(), g, 1e-8);
        assert_eq!(c.len(), 1);
        let (first, len) = c[0];
        assert!(len <= 5);
        assert!(first > 256, "cluster should start just below 2π, got {first}");
        assert!(zero_clusters(&DiscountSpec::constant(1.0).unwrap(), g, 1e-8).is_empty());
    }

    #[test]
    fn no_zeros_means_minus_infinity() {
        let r = nonneg_critical(&homogeneous(0.0), &probe_config()).unwrap();
        assert_eq!(r.c0, f64::NEG_INFINITY);
        assert_eq!(r.to_json()["c0"], "-inf");
    }

    #[test]
    fn sign_violation_is_rejected() {
        assert!(nonneg_critical(&pendulum_sine(0.0), &probe_config()).is_err());
    }

    #[test]
    fn mane_of_mechanical_is_max_potential() {
        let cfg = SemigroupConfig { n: 128, dt: 0.02, t_max: 100.0, ..Default::default() };
        let h = HamiltonianSpec::mechanical(FourierSeries::cos_minus_one());
        let m = mane_value(&h, &cfg).unwrap();
        assert_abs_diff_eq!(m.value, 0.0, epsilon = 0.02);
        let shifted = HamiltonianSpec::mechanical(FourierSeries::new(-0.5, vec![1.0], vec![]));
        let ms = mane_value(&shifted, &cfg).unwrap();
        assert_abs_diff_eq!(ms.value, m.value + 0.5, epsilon = 1e-3);
    }

    #[test]
    fn bracket_must_straddle() {
        let cfg = SemigroupConfig { t_max: 200.0, ..probe_config() };
        let r = bisect_critical(&quadratic_sine(0.0), (0.5, 1.0), 0.02, &cfg);
        assert!(matches!(r, Err(Error::BadBracket(_))));
    }
}
