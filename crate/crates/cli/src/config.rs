//! Flat `key = value` run configuration. Command-line flags use the same
//! keys and override file values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use countimpute_core::missingness::{Mechanism, ResponseKind};
use countimpute_core::regression::ZeroModel;
use countimpute_core::simulation::{Dispersion, Method, ScenarioConfig};
use sha2::{Digest, Sha256};

use crate::error::ConfigError;

pub const KEYS: &[&str] = &[
    "command",
    "response_kind",
    "dispersion",
    "mechanism",
    "missing_fraction",
    "missing_levels",
    "beta",
    "population_size",
    "sample_size",
    "replicates",
    "methods",
    "m",
    "level",
    "seed",
    "dataset",
    "reference",
    "output",
    "zero_model",
    "hermite_order",
    "strict_paper",
    "repeats",
];

/// Missing fractions studied in the simulation grid and the lung analysis.
pub const SIMULATION_GRID: [f64; 4] = [0.05, 0.10, 0.20, 0.30];
pub const ANALYSIS_GRID: [f64; 4] = [0.10, 0.20, 0.30, 0.40];
pub const ANALYSIS_METHODS: [Method; 5] =
    [Method::Listwise, Method::Poisson, Method::NegBin, Method::Hermite, Method::ComPoisson];

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: Option<usize>,
}

/// Raw key/value pairs with the line each came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, Entry>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = ConfigMap::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax { line, message: format!("expected 'key = value', found '{content}'") });
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey { key: key.to_string(), line: Some(line) });
            }
            if map.entries.contains_key(key) {
                return Err(ConfigError::Syntax { line, message: format!("duplicate key '{key}'") });
            }
            map.entries.insert(key.to_string(), Entry { value: value.trim().to_string(), line: Some(line) });
        }
        Ok(map)
    }

    /// Sets `key` from the command line, replacing any file value.
    pub fn set_flag(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey { key: key.to_string(), line: None });
        }
        self.entries.insert(key.to_string(), Entry { value: value.trim().to_string(), line: None });
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn get<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => parse(&e.value)
                .map(Some)
                .map_err(|message| ConfigError::Value { key: key.to_string(), line: e.line, message }),
        }
    }

    fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Value { key: key.to_string(), line: self.raw(key).and_then(|e| e.line), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Impute,
    Analyze,
    Gof,
}

impl Command {
    pub fn tag(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Impute => "impute",
            Command::Analyze => "analyze",
            Command::Gof => "gof",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        [Command::Simulate, Command::Impute, Command::Analyze, Command::Gof].into_iter().find(|c| c.tag() == tag)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// Scenario settings; `missing_fraction` is overwritten per level.
    pub scenario: ScenarioConfig,
    pub missing_levels: Vec<f64>,
    pub dataset: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub repeats: usize,
    pub strict_paper: bool,
    pub warnings: Vec<String>,
}

fn parse_number<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse '{s}'"))
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(item).collect()
}

fn parse_kind(s: &str) -> Result<ResponseKind, String> {
    match s {
        "binary" => Ok(ResponseKind::Binary),
        "continuous" => Ok(ResponseKind::Continuous),
        "discrete" => Ok(ResponseKind::Discrete),
        _ => Err(format!("expected binary, continuous or discrete, got '{s}'")),
    }
}

fn parse_mechanism(s: &str) -> Result<Mechanism, String> {
    match s.to_ascii_lowercase().as_str() {
        "mcar" => Ok(Mechanism::Mcar),
        "mar" => Ok(Mechanism::Mar),
        _ => Err(format!("expected mcar or mar, got '{s}'")),
    }
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected true or false, got '{s}'")),
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::from_tag(s).ok_or_else(|| format!("unknown method '{s}' (expected lw, pois, nb, herm, cmp, zpois, znb)"))
}

impl RunConfig {
    pub fn from_map(command: Command, map: &ConfigMap) -> Result<Self, ConfigError> {
        if let Some(c) = map.get("command", |s| Command::from_tag(s).ok_or_else(|| format!("unknown command '{s}'")))? {
            if c != command {
                return Err(map.error("command", format!("file is for '{}' but '{}' was requested", c.tag(), command.tag())));
            }
        }
        let defaults = ScenarioConfig::default();
        let dispersion = map
            .get("dispersion", |s| Dispersion::from_tag(s).ok_or_else(|| format!("unknown dispersion '{s}'")))?
            .unwrap_or(defaults.dispersion);
        let methods = match map.get("methods", |s| parse_list(s, parse_method))? {
            Some(m) if m.is_empty() => return Err(map.error("methods", "empty method list")),
            Some(m) => m,
            None => default_methods(command, dispersion),
        };

        let fraction = map.get("missing_fraction", parse_number::<f64>)?;
        let levels = map.get("missing_levels", |s| parse_list(s, parse_number::<f64>))?;
        let missing_levels = match (fraction, levels) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid("give either missing_fraction or missing_levels, not both".into()))
            }
            (Some(f), None) => vec![f],
            (None, Some(l)) if l.is_empty() => return Err(map.error("missing_levels", "empty list")),
            (None, Some(l)) => l,
            (None, None) => match command {
                Command::Analyze => ANALYSIS_GRID.to_vec(),
                _ => vec![defaults.missing_fraction],
            },
        };

        let scenario = ScenarioConfig {
            response_kind: map.get("response_kind", parse_kind)?.unwrap_or(defaults.response_kind),
            dispersion,
            beta: map.get("beta", parse_number)?.unwrap_or(defaults.beta),
            mechanism: map.get("mechanism", parse_mechanism)?.unwrap_or(defaults.mechanism),
            missing_fraction: missing_levels[0],
            population_size: map.get("population_size", parse_number)?.unwrap_or(defaults.population_size),
            sample_size: map.get("sample_size", parse_number)?.unwrap_or(defaults.sample_size),
            replicates: map.get("replicates", parse_number)?.unwrap_or(defaults.replicates),
            methods,
            m: map.get("m", parse_number)?.unwrap_or(defaults.m),
            level: map.get("level", parse_number)?.unwrap_or(defaults.level),
            seed: map.get("seed", parse_number)?.unwrap_or(defaults.seed),
            zero_model: map
                .get("zero_model", |s| match s {
                    "regressed" => Ok(ZeroModel::Regressed),
                    "constant" => Ok(ZeroModel::Constant),
                    _ => Err(format!("expected regressed or constant, got '{s}'")),
                })?
                .unwrap_or(defaults.zero_model),
            hermite_order: map.get("hermite_order", parse_number)?.unwrap_or(defaults.hermite_order),
        };
        let path = |key: &str| map.get(key, |s| Ok(PathBuf::from(s)));
        let mut config = RunConfig {
            command,
            scenario,
            missing_levels,
            dataset: path("dataset")?,
            reference: path("reference")?,
            output: path("output")?,
            repeats: map.get("repeats", parse_number)?.unwrap_or(1),
            strict_paper: map.get("strict_paper", parse_bool)?.unwrap_or(false),
            warnings: Vec::new(),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&mut self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.repeats == 0 {
            return invalid("repeats must be at least 1".into());
        }
        let allow_zero = self.command == Command::Analyze;
        for &f in &self.missing_levels {
            let ok = if allow_zero { (0.0..1.0).contains(&f) } else { f > 0.0 && f < 1.0 };
            if !ok {
                return invalid(format!("missing fraction {f} is outside {}", if allow_zero { "[0, 1)" } else { "(0, 1)" }));
            }
        }
        match self.command {
            Command::Simulate => {
                for &f in &self.missing_levels {
                    let mut s = self.scenario.clone();
                    s.missing_fraction = f;
                    s.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
                }
            }
            Command::Analyze | Command::Impute => {
                if self.dataset.is_none() {
                    return Err(ConfigError::Missing("dataset"));
                }
                self.check_imputation_settings()?;
                if self.command == Command::Impute {
                    let families: Vec<_> = self.scenario.methods.iter().filter(|m| **m != Method::Listwise).collect();
                    if families.len() != 1 || self.scenario.methods.len() != 1 {
                        return invalid("impute needs exactly one imputation method in 'methods'".into());
                    }
                }
            }
            Command::Gof => {
                if self.dataset.is_none() {
                    return Err(ConfigError::Missing("dataset"));
                }
                if self.reference.is_none() {
                    return Err(ConfigError::Missing("reference"));
                }
            }
        }
        if self.strict_paper {
            let (grid, label) = match self.command {
                Command::Analyze => (&ANALYSIS_GRID[..], "10-40%"),
                _ => (&SIMULATION_GRID[..], "5-30%"),
            };
            let lo = grid[0] - 1e-12;
            let hi = grid[grid.len() - 1] + 1e-12;
            for &f in &self.missing_levels {
                if f > 0.0 && !(lo..=hi).contains(&f) {
                    self.warnings.push(format!("missing fraction {f} is outside the standard {label} grid"));
                }
            }
        }
        Ok(())
    }

    fn check_imputation_settings(&self) -> Result<(), ConfigError> {
        let s = &self.scenario;
        if s.m == 0 {
            return Err(ConfigError::Invalid("m must be at least 1".into()));
        }
        if !(s.level > 0.0 && s.level < 1.0) {
            return Err(ConfigError::Invalid(format!("level must be in (0, 1), got {}", s.level)));
        }
        if s.hermite_order < 2 {
            return Err(ConfigError::Invalid("hermite_order must be at least 2".into()));
        }
        Ok(())
    }

    /// Resolved settings, one `key = value` per line in key order.
    pub fn canonical(&self) -> String {
        let s = &self.scenario;
        let mut pairs: BTreeMap<&str, String> = BTreeMap::new();
        pairs.insert("command", self.command.tag().into());
        pairs.insert("response_kind", format!("{:?}", s.response_kind).to_lowercase());
        pairs.insert("dispersion", s.dispersion.tag().into());
        pairs.insert("mechanism", format!("{:?}", s.mechanism).to_lowercase());
        pairs.insert("missing_levels", join(&self.missing_levels));
        pairs.insert("beta", s.beta.to_string());
        pairs.insert("population_size", s.population_size.to_string());
        pairs.insert("sample_size", s.sample_size.to_string());
        pairs.insert("replicates", s.replicates.to_string());
        pairs.insert("methods", s.methods.iter().map(|m| m.tag()).collect::<Vec<_>>().join(","));
        pairs.insert("m", s.m.to_string());
        pairs.insert("level", s.level.to_string());
        pairs.insert("seed", s.seed.to_string());
        pairs.insert("zero_model", format!("{:?}", s.zero_model).to_lowercase());
        pairs.insert("hermite_order", s.hermite_order.to_string());
        pairs.insert("repeats", self.repeats.to_string());
        for (key, path) in [("dataset", &self.dataset), ("reference", &self.reference)] {
            if let Some(p) = path {
                pairs.insert(key, p.display().to_string());
            }
        }
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// SHA-256 of [`RunConfig::canonical`], hex encoded.
    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// The scenario at one missing level.
    pub fn scenario_at(&self, fraction: f64) -> ScenarioConfig {
        ScenarioConfig { missing_fraction: fraction, ..self.scenario.clone() }
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn default_methods(command: Command, dispersion: Dispersion) -> Vec<Method> {
    match command {
        Command::Analyze => ANALYSIS_METHODS.to_vec(),
        Command::Impute => vec![Method::Poisson],
        Command::Simulate | Command::Gof => match dispersion {
            Dispersion::Under => vec![Method::Listwise, Method::Poisson, Method::NegBin, Method::ComPoisson],
            _ => Method::ALL.to_vec(),
        },
    }
}
