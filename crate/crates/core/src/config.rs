//! Experiment configuration: a plain `key = value` document.
//!
//! ```text
//! # passive tracers in the shear flow
//! model = passive
//! field = shear
//! sigma = 1
//! dt = 0.01
//! T = 100
//! paths = 100
//! seed = 7
//! ```
//!
//! Keys: `model`, `integrator`, `field`, `sigma`, `tau`, `corr_time`, `dt`,
//! `T`, `paths`, `seed`, `snapshots`, `initial`. Anything else is rejected.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fields::{field_by_name, parse_field_description, parse_real, SplittableField};

pub const KEYS: [&str; 12] =
    ["model", "integrator", "field", "sigma", "tau", "corr_time", "dt", "T", "paths", "seed", "snapshots", "initial"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Passive,
    Inertial,
    Colored,
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Splitting,
    Euler,
}

/// Times at which positions are recorded. The final time is always included.
#[derive(Debug, Clone, PartialEq)]
pub enum Snapshots {
    Geometric { per_decade: usize },
    Linear { count: usize },
    Explicit(Vec<f64>),
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Uniform on the period cell `[0, 2π)^dim`.
    Uniform,
    Origin,
    /// Path `p` starts at `points[p % points.len()]`.
    Points(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Model,
    pub integrator: Integrator,
    /// Built-in name, or `@path` to a field description file.
    pub field: String,
    pub sigma: f64,
    pub tau: Option<f64>,
    pub corr_time: Option<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub snapshots: Snapshots,
    pub initial: InitialCondition,
}

macro_rules! keyword_enum {
    ($ty:ident, $key:literal, $($variant:ident => $text:literal),+) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($ty::$variant),)+
                    other => Err(Error::Config {
                        field: $key.into(),
                        message: format!("unknown value `{other}`"),
                    }),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $text,)+ })
            }
        }
    };
}

keyword_enum!(Model, "model", Passive => "passive", Inertial => "inertial", Colored => "colored", Modified => "modified");
keyword_enum!(Integrator, "integrator", Splitting => "splitting", Euler => "euler");

fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

fn real(field: &str, s: &str) -> Result<f64> {
    parse_real(s).ok_or_else(|| config_err(field, format!("`{s}` is not a number")))
}

fn join_reals(v: &[f64], sep: &str) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

impl FromStr for Snapshots {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let count = |n: &str| -> Result<usize> {
            match n.trim().parse::<usize>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(config_err("snapshots", format!("`{n}` is not a positive count"))),
            }
        };
        match s {
            "none" => Ok(Snapshots::None),
            "geometric" => Ok(Snapshots::Geometric { per_decade: 32 }),
            _ => {
                if let Some(n) = s.strip_prefix("geometric:") {
                    Ok(Snapshots::Geometric { per_decade: count(n)? })
                } else if let Some(n) = s.strip_prefix("linear:") {
                    Ok(Snapshots::Linear { count: count(n)? })
                } else {
                    let times = s.split(',').map(|t| real("snapshots", t.trim())).collect::<Result<Vec<_>>>()?;
                    Ok(Snapshots::Explicit(times))
                }
            }
        }
    }
}

impl fmt::Display for Snapshots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Snapshots::Geometric { per_decade } => write!(f, "geometric:{per_decade}"),
            Snapshots::Linear { count } => write!(f, "linear:{count}"),
            Snapshots::Explicit(t) => f.write_str(&join_reals(t, ", ")),
            Snapshots::None => f.write_str("none"),
        }
    }
}

impl FromStr for InitialCondition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(InitialCondition::Uniform),
            "origin" => Ok(InitialCondition::Origin),
            other => {
                let list = other.strip_prefix("points:").ok_or_else(|| {
                    config_err("initial", format!("expected uniform, origin or points:, got `{other}`"))
                })?;
                let points = list
                    .split(';')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| p.split(',').map(|c| real("initial", c.trim())).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                if points.is_empty() {
                    return Err(config_err("initial", "empty point list"));
                }
                Ok(InitialCondition::Points(points))
            }
        }
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::Uniform => f.write_str("uniform"),
            InitialCondition::Origin => f.write_str("origin"),
            InitialCondition::Points(p) => {
                let pts: Vec<String> = p.iter().map(|x| join_reals(x, ", ")).collect();
                write!(f, "points: {}", pts.join("; "))
            }
        }
    }
}

impl ExperimentConfig {
    /// A passive splitting run with default snapshots and uniform starts.
    pub fn new(field: &str, sigma: f64, dt: f64, horizon: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            model: Model::Passive,
            integrator: Integrator::Splitting,
            field: field.to_string(),
            sigma,
            tau: None,
            corr_time: None,
            dt,
            horizon,
            n_paths,
            seed,
            snapshots: Snapshots::Geometric { per_decade: 32 },
            initial: InitialCondition::Uniform,
        }
    }

    pub fn inertial(mut self, tau: f64) -> Self {
        self.model = Model::Inertial;
        self.tau = Some(tau);
        self
    }

    pub fn colored(mut self, corr_time: f64) -> Self {
        self.model = Model::Colored;
        self.corr_time = Some(corr_time);
        self
    }

    /// The modified tracers model; its noise amplitude is `√τ`.
    pub fn modified(mut self, tau: f64) -> Self {
        self.model = Model::Modified;
        self.tau = Some(tau);
        self.sigma = tau.sqrt();
        self
    }

    pub fn euler(mut self) -> Self {
        self.integrator = Integrator::Euler;
        self
    }

    pub fn with_snapshots(mut self, snapshots: Snapshots) -> Self {
        self.snapshots = snapshots;
        self
    }

    pub fn with_initial(mut self, initial: InitialCondition) -> Self {
        self.initial = initial;
        self
    }

    /// Number of steps `T / dt`.
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Assigns one key from its textual value. Does not validate
    /// cross-field constraints; see [`ExperimentConfig::validate`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "model" => self.model = value.parse()?,
            "integrator" => self.integrator = value.parse()?,
            "field" => self.field = value.to_string(),
            "sigma" => self.sigma = real(key, value)?,
            "tau" => self.tau = Some(real(key, value)?),
            "corr_time" => self.corr_time = Some(real(key, value)?),
            "dt" => self.dt = real(key, value)?,
            "T" => self.horizon = real(key, value)?,
            "paths" => {
                self.n_paths = value.parse().map_err(|_| config_err(key, format!("`{value}` is not a count")))?
            }
            "seed" => {
                self.seed = value.parse().map_err(|_| config_err(key, format!("`{value}` is not a 64-bit seed")))?
            }
            "snapshots" => self.snapshots = value.parse()?,
            "initial" => self.initial = value.parse()?,
            other => return Err(config_err(other, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let needs_tau = matches!(self.model, Model::Inertial | Model::Modified);
        match (needs_tau, self.tau) {
            (true, None) => return Err(config_err("tau", format!("required by model {}", self.model))),
            (false, Some(_)) => return Err(config_err("tau", format!("not used by model {}", self.model))),
            (true, Some(t)) if !(t > 0.0 && t.is_finite()) => return Err(config_err("tau", "must be positive")),
            _ => {}
        }
        let needs_corr = self.model == Model::Colored;
        match (needs_corr, self.corr_time) {
            (true, None) => return Err(config_err("corr_time", "required by model colored")),
            (false, Some(_)) => return Err(config_err("corr_time", format!("not used by model {}", self.model))),
            (true, Some(d)) if !(d > 0.0 && d.is_finite()) => return Err(config_err("corr_time", "must be positive")),
            _ => {}
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(config_err("sigma", "must be non-negative"));
        }
        if let (Model::Modified, Some(tau)) = (self.model, self.tau) {
            let s = tau.sqrt();
            if (self.sigma - s).abs() > 1e-12 * s {
                return Err(config_err("sigma", format!("the modified model has noise sqrt(tau) = {s}")));
            }
        }
        if self.integrator == Integrator::Euler && matches!(self.model, Model::Colored | Model::Modified) {
            return Err(config_err("integrator", format!("model {} has no euler integrator", self.model)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(config_err("dt", "must be positive"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(config_err("T", "must be positive"));
        }
        if self.dt >= self.horizon {
            return Err(config_err("dt", format!("must be smaller than T = {}", self.horizon)));
        }
        let steps = self.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.round() {
            return Err(config_err("dt", format!("T = {} is not a whole number of steps", self.horizon)));
        }
        if self.n_paths == 0 {
            return Err(config_err("paths", "must be at least 1"));
        }
        if let Snapshots::Explicit(t) = &self.snapshots {
            if t.iter().any(|&s| !(s > 0.0 && s <= self.horizon)) {
                return Err(config_err("snapshots", "explicit times must lie in (0, T]"));
            }
        }
        if self.field.is_empty() {
            return Err(config_err("field", "missing"));
        }
        if !self.field.starts_with('@') {
            field_by_name(&self.field).map_err(|e| config_err("field", e.to_string()))?;
        }
        Ok(())
    }

    /// Resolves the velocity field, reading `@path` descriptions from disk.
    pub fn load_field(&self) -> Result<SplittableField> {
        match self.field.strip_prefix('@') {
            Some(path) => parse_field_description(&std::fs::read_to_string(path)?),
            None => field_by_name(&self.field),
        }
    }

    /// Key/value pairs in canonical order, omitting unused optional keys.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("model", self.model.to_string()),
            ("integrator", self.integrator.to_string()),
            ("field", self.field.clone()),
            ("sigma", self.sigma.to_string()),
        ];
        if let Some(t) = self.tau {
            out.push(("tau", t.to_string()));
        }
        if let Some(d) = self.corr_time {
            out.push(("corr_time", d.to_string()));
        }
        out.extend([
            ("dt", self.dt.to_string()),
            ("T", self.horizon.to_string()),
            ("paths", self.n_paths.to_string()),
            ("seed", self.seed.to_string()),
            ("snapshots", self.snapshots.to_string()),
            ("initial", self.initial.to_string()),
        ]);
        out
    }

    pub fn to_text(&self) -> String {
        self.to_pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Positive snapshot times as whole step counts, sorted, deduplicated and
    /// always ending with the final step.
    pub fn snapshot_steps(&self) -> Vec<usize> {
        let n = self.n_steps();
        let to_step = |t: f64| ((t / self.dt).round() as usize).clamp(1, n);
        let mut steps: Vec<usize> = match &self.snapshots {
            Snapshots::None => Vec::new(),
            Snapshots::Explicit(t) => t.iter().map(|&t| to_step(t)).collect(),
            Snapshots::Linear { count } => {
                (1..=*count).map(|k| to_step(self.horizon * k as f64 / *count as f64)).collect()
            }
            Snapshots::Geometric { per_decade } => {
                let mut v = Vec::new();
                let mut k = 0;
                loop {
                    let t = self.horizon * 10f64.powf(-(k as f64) / *per_decade as f64);
                    if t < self.dt * (1.0 - 1e-9) {
                        break;
                    }
                    v.push(to_step(t));
                    k += 1;
                }
                v
            }
        };
        steps.push(n);
        steps.sort_unstable();
        steps.dedup();
        steps
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let (cfg, extra) = parse_config_with(text, &[])?;
    debug_assert!(extra.is_empty());
    Ok(cfg)
}

/// Like [`parse_config`], but also accepts keys starting with one of
/// `extra_prefixes`; those are returned as `(line, key, value)` triples.
pub fn parse_config_with(
    text: &str,
    extra_prefixes: &[&str],
) -> Result<(ExperimentConfig, Vec<(usize, String, String)>)> {
    let mut cfg = ExperimentConfig::new("", f64::NAN, f64::NAN, f64::NAN, 0, 0);
    let mut seen: Vec<&str> = Vec::new();
    let mut extra = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| Error::Syntax { line, message: format!("expected `key = value`, got `{body}`") })?;
        let (key, value) = (key.trim(), value.trim());
        if extra_prefixes.iter().any(|p| key.starts_with(p)) {
            extra.push((line, key.to_string(), value.to_string()));
            continue;
        }
        let known = KEYS
            .iter()
            .copied()
            .find(|k| *k == key)
            .ok_or_else(|| Error::Syntax { line, message: format!("unknown key `{key}`") })?;
        if seen.contains(&known) {
            return Err(Error::Syntax { line, message: format!("duplicate key `{key}`") });
        }
        if value.is_empty() {
            return Err(Error::Syntax { line, message: format!("missing value for `{key}`") });
        }
        seen.push(known);
        cfg.set(known, value)?;
    }
    let required: &[&str] = match cfg.model {
        Model::Modified => &["model", "field", "dt", "T", "paths"],
        _ => &["model", "field", "sigma", "dt", "T", "paths"],
    };
    if let Some(missing) = required.iter().find(|k| !seen.contains(k)) {
        return Err(config_err(missing, "required key is missing"));
    }
    if cfg.model == Model::Modified && !seen.contains(&"sigma") {
        cfg.sigma = cfg.tau.map_or(f64::NAN, f64::sqrt);
    }
    cfg.validate()?;
    Ok((cfg, extra))
}
