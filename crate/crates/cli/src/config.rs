//! Flat `key = value` configuration files.
//!
//! Keys are dotted (`semigroup.dt`), `#` starts a comment, blank lines are
//! ignored. Keys outside [`KNOWN_KEYS`] are rejected.

use std::collections::BTreeMap;

use serde_json::Value;

use crate::CliError;

pub const KNOWN_KEYS: &[&str] = &[
    "scenario",
    "c",
    "grid.n",
    "outputs.dir",
    "semigroup.dt",
    "semigroup.v_max",
    "semigroup.n_v",
    "semigroup.refine_iters",
    "semigroup.t_max",
    "semigroup.tol",
    "semigroup.m_div",
    "semigroup.search",
    "semigroup.execution",
    "hamiltonian.kind",
    "hamiltonian.v.mean",
    "hamiltonian.v.cos",
    "hamiltonian.v.sin",
    "lambda.kind",
    "lambda.value",
    "lambda.mean",
    "lambda.cos",
    "lambda.sin",
    "solve.direction",
    "critical.method",
    "critical.bracket",
    "critical.tol",
    "rate.c_list",
    "rate.delta",
    "rate.window_fraction",
    "rate.reference_tol",
    "rate.stop_dist",
    "rate.asymptote_tol",
    "rate.divergence_check",
    "mather.stride",
    "mather.horizon",
    "mather.dt",
    "mather.escape_tol",
    "mather.check_time",
    "mather.check_travel",
    "mather.graph_tol",
    "mather.newton_tol",
    "orbit.x0",
    "orbit.p0",
    "orbit.u0",
    "orbit.t",
    "orbit.dt",
    "orbit.direction",
    "orbit.mather",
    "scan.c_list",
    "verify.pairs",
    "verify.seed",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

fn config_error(msg: String) -> CliError {
    CliError::Config(msg)
}

fn split_entry(line: &str) -> Result<(String, String), String> {
    let (key, value) = line.split_once('=').ok_or_else(|| format!("expected `key = value`, got `{line}`"))?;
    let (key, value) = (key.trim(), value.trim());
    if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
        return Err(format!("malformed key `{key}`"));
    }
    if value.is_empty() {
        return Err(format!("empty value for `{key}`"));
    }
    if !KNOWN_KEYS.contains(&key) {
        return Err(format!("unknown key `{key}`"));
    }
    Ok((key.to_string(), value.to_string()))
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = split_entry(line).map_err(|e| config_error(format!("line {}: {e}", k + 1)))?;
            if entries.insert(key.clone(), value).is_some() {
                return Err(config_error(format!("line {}: duplicate key `{key}`", k + 1)));
            }
        }
        Ok(Self { entries })
    }

    /// Applies a `--set key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = split_entry(assignment).map_err(|e| config_error(format!("--set: {e}")))?;
        self.entries.insert(key, value);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

/// Typed access to a [`RawConfig`] that records every resolved value,
/// defaults included, for the report echo.
#[derive(Debug)]
pub struct Resolver<'a> {
    raw: &'a RawConfig,
    echo: BTreeMap<String, Value>,
}

fn parse_f64(key: &str, text: &str) -> Result<f64, CliError> {
    let v: f64 = text.trim().parse().map_err(|_| config_error(format!("`{key}`: `{text}` is not a number")))?;
    if !v.is_finite() {
        return Err(config_error(format!("`{key}` must be finite")));
    }
    Ok(v)
}

impl<'a> Resolver<'a> {
    pub fn new(raw: &'a RawConfig) -> Self {
        Self { raw, echo: BTreeMap::new() }
    }

    pub fn into_echo(self) -> BTreeMap<String, Value> {
        self.echo
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.raw.get(key).is_some()
    }

    fn record(&mut self, key: &str, value: Value) {
        self.echo.insert(key.to_string(), value);
    }

    pub fn f64(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = match self.raw.get(key) {
            Some(text) => parse_f64(key, text)?,
            None => default,
        };
        self.record(key, Value::from(v));
        Ok(v)
    }

    pub fn optional_f64(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        match self.raw.get(key) {
            Some(text) => {
                let v = parse_f64(key, text)?;
                self.record(key, Value::from(v));
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }

    pub fn positive(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = self.f64(key, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(config_error(format!("`{key}` must be positive, got {v}")))
        }
    }

    pub fn usize(&mut self, key: &str, default: usize, min: usize) -> Result<usize, CliError> {
        let v = match self.raw.get(key) {
            Some(text) => text
                .parse::<usize>()
                .map_err(|_| config_error(format!("`{key}`: `{text}` is not a non-negative integer")))?,
            None => default,
        };
        if v < min {
            return Err(config_error(format!("`{key}` must be at least {min}, got {v}")));
        }
        self.record(key, Value::from(v));
        Ok(v)
    }

    pub fn u64(&mut self, key: &str, default: u64) -> Result<u64, CliError> {
        let v = match self.raw.get(key) {
            Some(text) => text
                .parse::<u64>()
                .map_err(|_| config_error(format!("`{key}`: `{text}` is not a non-negative integer")))?,
            None => default,
        };
        self.record(key, Value::from(v));
        Ok(v)
    }

    pub fn bool(&mut self, key: &str, default: bool) -> Result<bool, CliError> {
        let v = match self.raw.get(key) {
            Some("true") => true,
            Some("false") => false,
            Some(other) => return Err(config_error(format!("`{key}`: expected true or false, got `{other}`"))),
            None => default,
        };
        self.record(key, Value::from(v));
        Ok(v)
    }

    /// One of `choices`; the first is the default.
    pub fn choice(&mut self, key: &str, choices: &[&'static str]) -> Result<&'static str, CliError> {
        let v = match self.raw.get(key) {
            Some(text) => *choices
                .iter()
                .find(|c| **c == text)
                .ok_or_else(|| config_error(format!("`{key}`: expected one of {}, got `{text}`", choices.join(", "))))?,
            None => choices[0],
        };
        self.record(key, Value::from(v));
        Ok(v)
    }

    pub fn string(&mut self, key: &str, default: Option<&str>) -> Result<String, CliError> {
        let v = self
            .raw
            .get(key)
            .or(default)
            .ok_or_else(|| config_error(format!("missing required key `{key}`")))?
            .to_string();
        self.record(key, Value::from(v.clone()));
        Ok(v)
    }

    /// Comma-separated numbers.
    pub fn f64_list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        let v = match self.raw.get(key) {
            Some(text) => text.split(',').map(|t| parse_f64(key, t)).collect::<Result<Vec<_>, _>>()?,
            None => default.to_vec(),
        };
        self.record(key, Value::from(v.clone()));
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_dotted_keys() {
        let raw = RawConfig::parse("# header\nscenario = pendulum-sine  # inline\n\n grid.n=128\nc = 1.5\n").unwrap();
        assert_eq!(raw.get("scenario"), Some("pendulum-sine"));
        assert_eq!(raw.get("grid.n"), Some("128"));
        let mut r = Resolver::new(&raw);
        assert_eq!(r.f64("c", 0.0).unwrap(), 1.5);
        assert_eq!(r.usize("grid.n", 512, 8).unwrap(), 128);
        assert_eq!(r.f64("semigroup.dt", 2e-3).unwrap(), 2e-3);
        let echo = r.into_echo();
        assert_eq!(echo.len(), 3);
        assert_eq!(echo["semigroup.dt"], Value::from(2e-3));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RawConfig::parse("gird.n = 4"), Err(CliError::Config(_))));
        assert!(RawConfig::parse("c = 1\nc = 2").is_err());
        assert!(RawConfig::parse("c").is_err());
        assert!(RawConfig::parse("c =").is_err());
        let raw = RawConfig::parse("c = abc\ngrid.n = 4").unwrap();
        let mut r = Resolver::new(&raw);
        assert!(r.f64("c", 0.0).is_err());
        assert!(r.usize("grid.n", 512, 8).is_err());
    }

    #[test]
    fn overrides_replace_values() {
        let mut raw = RawConfig::parse("c = 1").unwrap();
        raw.set("c=2.5").unwrap();
        assert_eq!(raw.get("c"), Some("2.5"));
        assert!(raw.set("bogus=1").is_err());
    }

    #[test]
    fn lists_and_choices() {
        let raw = RawConfig::parse("rate.c_list = 1, 3,10\nsolve.direction = forward").unwrap();
        let mut r = Resolver::new(&raw);
        assert_eq!(r.f64_list("rate.c_list", &[]).unwrap(), vec![1.0, 3.0, 10.0]);
        assert_eq!(r.choice("solve.direction", &["backward", "forward"]).unwrap(), "forward");
        assert_eq!(r.choice("orbit.direction", &["backward", "forward"]).unwrap(), "backward");
    }
}
