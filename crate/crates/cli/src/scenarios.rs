//! Built-in scenarios and inline model specifications.

use hjdisc_core::model::presets;
use hjdisc_core::model::{ContactModel, DiscountKind, DiscountSpec, FourierSeries, HamiltonianSpec};

use crate::config::Resolver;
use crate::CliError;

pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    pub default_c: f64,
    build: fn(f64) -> ContactModel,
}

impl Scenario {
    pub fn model(&self, c: f64) -> ContactModel {
        (self.build)(c)
    }
}

pub const SCENARIOS: &[Scenario] = &[
    Scenario {
        name: "quadratic-sine",
        description: "h = p^2, lambda = sin x",
        default_c: 1.0,
        build: presets::quadratic_sine,
    },
    Scenario {
        name: "pendulum-sine",
        description: "h = p^2/2 + cos x - 1, lambda = sin x",
        default_c: 1.0,
        build: presets::pendulum_sine,
    },
    Scenario {
        name: "appendix-c",
        description: "h = p^2/2 + 1 - cos x, lambda = (1 - cos x)^2; no subsolution at the critical value 0",
        default_c: 0.5,
        build: presets::appendix_c,
    },
    Scenario {
        name: "homogeneous",
        description: "h = p^2/2, lambda = 1",
        default_c: 3.0,
        build: presets::homogeneous,
    },
];

pub fn find(name: &str) -> Option<&'static Scenario> {
    SCENARIOS.iter().find(|s| s.name == name)
}

fn series(r: &mut Resolver, prefix: &str) -> Result<FourierSeries, CliError> {
    let mean = r.f64(&format!("{prefix}.mean"), 0.0)?;
    let cos = r.f64_list(&format!("{prefix}.cos"), &[])?;
    let sin = r.f64_list(&format!("{prefix}.sin"), &[])?;
    Ok(FourierSeries::new(mean, cos, sin))
}

/// `scenario = inline` builds the model from `hamiltonian.*` and `lambda.*` keys.
fn inline(r: &mut Resolver, c: f64) -> Result<ContactModel, CliError> {
    let h = match r.choice("hamiltonian.kind", &["quadratic", "mechanical"])? {
        "quadratic" => HamiltonianSpec::quadratic(),
        _ => HamiltonianSpec::mechanical(series(r, "hamiltonian.v")?),
    };
    let kind = match r.choice("lambda.kind", &["sine", "one_minus_cos_squared", "constant", "fourier"])? {
        "sine" => DiscountKind::Sine,
        "one_minus_cos_squared" => DiscountKind::OneMinusCosSquared,
        "constant" => DiscountKind::Constant(r.f64("lambda.value", 1.0)?),
        _ => DiscountKind::Fourier(series(r, "lambda")?),
    };
    let lambda = DiscountSpec::new(kind).map_err(|e| CliError::Config(format!("lambda: {e}")))?;
    ContactModel::new(h, lambda, c).map_err(|e| CliError::Config(e.to_string()))
}

/// Resolves `scenario` and `c` into a model.
pub fn resolve_model(r: &mut Resolver) -> Result<ContactModel, CliError> {
    let name = r.string("scenario", None)?;
    if name == "inline" {
        let c = r.f64("c", 0.0)?;
        return inline(r, c);
    }
    let scenario = find(&name).ok_or_else(|| {
        let names: Vec<_> = SCENARIOS.iter().map(|s| s.name).collect();
        CliError::Config(format!("unknown scenario `{name}` (available: {}, inline)", names.join(", ")))
    })?;
    let c = r.f64("c", scenario.default_c)?;
    Ok(scenario.model(c))
}
