//! Experiment configuration: a flat `key = value` TOML file, with an
//! optional `include = "other.toml"` whose values act as defaults.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use fedwire_core::analog::{tx_delay_analog, ZetaMode};
use fedwire_core::channel::PowerConvention;
use fedwire_core::digital::OutageMode;
use thiserror::Error;
use toml::{Table, Value};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("include chain deeper than {0} files")]
    IncludeDepth(usize),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Self::Invalid {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Paradigm {
    Digital,
    Analog,
    Both,
    Ideal,
}

impl Paradigm {
    /// The single-transport paradigms a run expands to.
    pub fn expand(self) -> &'static [Paradigm] {
        match self {
            Paradigm::Both => &[Paradigm::Digital, Paradigm::Analog],
            Paradigm::Digital => &[Paradigm::Digital],
            Paradigm::Analog => &[Paradigm::Analog],
            Paradigm::Ideal => &[Paradigm::Ideal],
        }
    }

    pub fn includes_analog(self) -> bool {
        matches!(self, Paradigm::Analog | Paradigm::Both)
    }

    pub fn includes_digital(self) -> bool {
        matches!(self, Paradigm::Digital | Paradigm::Both)
    }
}

impl fmt::Display for Paradigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Paradigm::Digital => "digital",
            Paradigm::Analog => "analog",
            Paradigm::Both => "both",
            Paradigm::Ideal => "ideal",
        })
    }
}

impl std::str::FromStr for Paradigm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "digital" => Ok(Paradigm::Digital),
            "analog" => Ok(Paradigm::Analog),
            "both" => Ok(Paradigm::Both),
            "ideal" => Ok(Paradigm::Ideal),
            _ => Err(format!("expected digital|analog|both|ideal, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskFamily {
    Quadratic,
    Logistic,
}

/// How `E|h|²` is normalised for each paradigm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConventionChoice {
    /// Digital `E|h|² = 2`, analog `E|h|² = 1`.
    Split,
    Single(PowerConvention),
}

impl ConventionChoice {
    pub fn digital(self) -> PowerConvention {
        match self {
            ConventionChoice::Split => PowerConvention::Mean2,
            ConventionChoice::Single(c) => c,
        }
    }

    pub fn analog(self) -> PowerConvention {
        match self {
            ConventionChoice::Split => PowerConvention::Mean1,
            ConventionChoice::Single(c) => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskConfig {
    pub family: TaskFamily,
    pub heterogeneity: f64,
    pub conditioning: f64,
    pub init_distance: f64,
    pub samples_per_device: usize,
    pub holdout_samples: usize,
    pub regularization: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub num_devices: usize,
    pub participants: usize,
    pub subbands: usize,
    pub dim: usize,
    pub bits: u32,
    pub side_bits: u64,
    /// Hz.
    pub bandwidth: f64,
    /// W/Hz.
    pub noise_density: f64,
    /// W.
    pub p_max: f64,
    pub rho: f64,
    pub gamma_th: f64,
    pub eta: f64,
    /// Seconds; `None` means `T_A = d M / B`.
    pub t_max: Option<f64>,
    /// Fixed SNR threshold; `None` means the smallest feasible one.
    pub theta: Option<f64>,
    /// Common path-loss amplitude, or one per device.
    pub path_loss: Vec<f64>,
    pub task: TaskConfig,
    pub paradigm: Paradigm,
    pub rounds: usize,
    pub seeds: Vec<u64>,
    pub sweep: Option<Sweep>,
    pub zeta_mode: ZetaMode,
    pub outage_mode: OutageMode,
    pub power_convention: ConventionChoice,
    pub receiver_noise: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            num_devices: 20,
            participants: 10,
            subbands: 20,
            dim: 32,
            bits: 8,
            side_bits: fedwire_core::digital::DEFAULT_SIDE_BITS,
            bandwidth: 1e6,
            noise_density: dbm_to_watts(-80.0),
            p_max: dbm_to_watts(0.0),
            rho: 0.9,
            gamma_th: 0.5,
            eta: 0.01,
            t_max: None,
            theta: None,
            path_loss: vec![0.22],
            task: TaskConfig {
                family: TaskFamily::Quadratic,
                heterogeneity: 1.0,
                conditioning: 4.0,
                init_distance: 1.0,
                samples_per_device: 50,
                holdout_samples: 1000,
                regularization: 0.1,
                seed: 0,
            },
            paradigm: Paradigm::Both,
            rounds: 300,
            seeds: (0..10).collect(),
            sweep: None,
            zeta_mode: ZetaMode::Adaptive,
            outage_mode: OutageMode::Empirical,
            power_convention: ConventionChoice::Split,
            receiver_noise: true,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

/// Every key [`ExperimentConfig::set`] accepts.
pub const KEYS: &[&str] = &[
    "num_devices",
    "participants",
    "subbands",
    "dim",
    "bits",
    "side_bits",
    "bandwidth",
    "noise_density",
    "p_max",
    "rho",
    "gamma_th",
    "eta",
    "t_max",
    "theta",
    "path_loss",
    "task_family",
    "heterogeneity",
    "conditioning",
    "init_distance",
    "samples_per_device",
    "holdout_samples",
    "regularization",
    "task_seed",
    "paradigm",
    "rounds",
    "seeds",
    "sweep_param",
    "sweep_values",
    "zeta_mode",
    "outage_mode",
    "power_convention",
    "receiver_noise",
];

const MAX_INCLUDE_DEPTH: usize = 16;

/// Parses `"<number> <unit>"` for the given unit table. A bare number is
/// taken in the first (base) unit.
fn with_unit(key: &str, v: &Value, units: &[(&str, fn(f64) -> f64)]) -> Result<f64, ConfigError> {
    match v {
        Value::Integer(i) => Ok(*i as f64),
        Value::Float(x) => Ok(*x),
        Value::String(s) => {
            let s = s.trim();
            let split = s
                .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
                .or_else(|| s.find(' '))
                .unwrap_or(s.len());
            let (num, unit) = s.split_at(split);
            let x: f64 = num
                .trim()
                .parse()
                .map_err(|_| ConfigError::invalid(key, format!("bad number in `{s}`")))?;
            let unit = unit.trim();
            if unit.is_empty() {
                return Ok(x);
            }
            units
                .iter()
                .find(|(u, _)| u.eq_ignore_ascii_case(unit))
                .map(|(_, f)| f(x))
                .ok_or_else(|| {
                    let known: Vec<&str> = units.iter().map(|(u, _)| *u).collect();
                    ConfigError::invalid(key, format!("unit `{unit}` not one of {known:?}"))
                })
        }
        _ => Err(ConfigError::invalid(key, "expected a number or a string with unit")),
    }
}

const POWER_UNITS: &[(&str, fn(f64) -> f64)] = &[
    ("W", |x| x),
    ("mW", |x| x * 1e-3),
    ("dBm", dbm_to_watts),
    ("dBW", |x| 10f64.powf(x / 10.0)),
];

const DENSITY_UNITS: &[(&str, fn(f64) -> f64)] = &[
    ("W/Hz", |x| x),
    ("dBm/Hz", dbm_to_watts),
    ("dBW/Hz", |x| 10f64.powf(x / 10.0)),
];

const FREQ_UNITS: &[(&str, fn(f64) -> f64)] = &[
    ("Hz", |x| x),
    ("kHz", |x| x * 1e3),
    ("MHz", |x| x * 1e6),
];

const TIME_UNITS: &[(&str, fn(f64) -> f64)] = &[("s", |x| x), ("ms", |x| x * 1e-3), ("us", |x| x * 1e-6)];

fn float(key: &str, v: &Value) -> Result<f64, ConfigError> {
    match v {
        Value::Integer(i) => Ok(*i as f64),
        Value::Float(x) => Ok(*x),
        Value::String(s) => s
            .trim()
            .parse()
            .map_err(|_| ConfigError::invalid(key, "expected a number")),
        _ => Err(ConfigError::invalid(key, "expected a number")),
    }
}

fn uint(key: &str, v: &Value) -> Result<u64, ConfigError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        Value::String(s) => s
            .trim()
            .parse()
            .map_err(|_| ConfigError::invalid(key, "expected a nonnegative integer")),
        _ => Err(ConfigError::invalid(key, "expected a nonnegative integer")),
    }
}

fn string<'a>(key: &str, v: &'a Value) -> Result<&'a str, ConfigError> {
    v.as_str()
        .ok_or_else(|| ConfigError::invalid(key, "expected a string"))
}

fn boolean(key: &str, v: &Value) -> Result<bool, ConfigError> {
    match v {
        Value::Boolean(b) => Ok(*b),
        Value::String(s) => s
            .trim()
            .parse()
            .map_err(|_| ConfigError::invalid(key, "expected true or false")),
        _ => Err(ConfigError::invalid(key, "expected true or false")),
    }
}

fn optional(key: &str, v: &Value, parse: impl Fn(&str, &Value) -> Result<f64, ConfigError>) -> Result<Option<f64>, ConfigError> {
    match v {
        Value::String(s) if s.trim() == "auto" => Ok(None),
        _ => parse(key, v).map(Some),
    }
}

fn list<T>(key: &str, v: &Value, item: impl Fn(&str, &Value) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
    match v {
        Value::Array(a) => a.iter().map(|x| item(key, x)).collect(),
        Value::String(s) if s.contains(',') => s
            .split(',')
            .map(|p| item(key, &Value::String(p.trim().to_string())))
            .collect(),
        other => Ok(vec![item(key, other)?]),
    }
}

impl ExperimentConfig {
    /// Reads a config file, resolving `include` chains relative to each
    /// including file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let table = read_chain(path, 0)?;
        let mut cfg = Self::default();
        cfg.apply(&table)?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let table: Table = text.parse().map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<string>"),
            source: Box::new(e),
        })?;
        if table.contains_key("include") {
            return Err(ConfigError::invalid("include", "not available for in-memory configs"));
        }
        let mut cfg = Self::default();
        cfg.apply(&table)?;
        Ok(cfg)
    }

    fn apply(&mut self, table: &Table) -> Result<(), ConfigError> {
        let mut sweep_param = self.sweep.as_ref().map(|s| s.param.clone());
        let mut sweep_values = self.sweep.as_ref().map(|s| s.values.clone());
        for (key, value) in table {
            match key.as_str() {
                "sweep_param" => sweep_param = Some(string(key, value)?.to_string()),
                "sweep_values" => {
                    sweep_values = Some(list(key, value, |k, v| match v {
                        Value::String(s) => Ok(s.trim().to_string()),
                        Value::Integer(i) => Ok(i.to_string()),
                        Value::Float(x) => Ok(format!("{x:e}")),
                        _ => Err(ConfigError::invalid(k, "expected scalars")),
                    })?)
                }
                _ => self.set_value(key, value)?,
            }
        }
        self.sweep = match (sweep_param, sweep_values) {
            (Some(param), Some(values)) => Some(Sweep { param, values }),
            (None, None) => None,
            _ => {
                return Err(ConfigError::invalid(
                    "sweep_param",
                    "sweep_param and sweep_values go together",
                ))
            }
        };
        Ok(())
    }

    /// Sets one key from its textual form, as a sweep does.
    pub fn set(&mut self, key: &str, text: &str) -> Result<(), ConfigError> {
        let value = match text.parse::<i64>() {
            Ok(i) => Value::Integer(i),
            Err(_) => match text.parse::<f64>() {
                Ok(x) => Value::Float(x),
                Err(_) => Value::String(text.to_string()),
            },
        };
        self.set_value(key, &value)
    }

    fn set_value(&mut self, key: &str, v: &Value) -> Result<(), ConfigError> {
        match key {
            "num_devices" => self.num_devices = uint(key, v)? as usize,
            "participants" => self.participants = uint(key, v)? as usize,
            "subbands" => self.subbands = uint(key, v)? as usize,
            "dim" => self.dim = uint(key, v)? as usize,
            "bits" => {
                self.bits = u32::try_from(uint(key, v)?)
                    .map_err(|_| ConfigError::invalid(key, "out of range"))?
            }
            "side_bits" => self.side_bits = uint(key, v)?,
            "bandwidth" => self.bandwidth = with_unit(key, v, FREQ_UNITS)?,
            "noise_density" => self.noise_density = with_unit(key, v, DENSITY_UNITS)?,
            "p_max" => self.p_max = with_unit(key, v, POWER_UNITS)?,
            "rho" => self.rho = float(key, v)?,
            "gamma_th" => self.gamma_th = float(key, v)?,
            "eta" => self.eta = float(key, v)?,
            "t_max" => self.t_max = optional(key, v, |k, v| with_unit(k, v, TIME_UNITS))?,
            "theta" => self.theta = optional(key, v, float)?,
            "path_loss" => self.path_loss = list(key, v, float)?,
            "task_family" => {
                self.task.family = match string(key, v)? {
                    "quadratic" => TaskFamily::Quadratic,
                    "logistic" => TaskFamily::Logistic,
                    other => return Err(ConfigError::invalid(key, format!("unknown family `{other}`"))),
                }
            }
            "heterogeneity" => self.task.heterogeneity = float(key, v)?,
            "conditioning" => self.task.conditioning = float(key, v)?,
            "init_distance" => self.task.init_distance = float(key, v)?,
            "samples_per_device" => self.task.samples_per_device = uint(key, v)? as usize,
            "holdout_samples" => self.task.holdout_samples = uint(key, v)? as usize,
            "regularization" => self.task.regularization = float(key, v)?,
            "task_seed" => self.task.seed = uint(key, v)?,
            "paradigm" => {
                self.paradigm = string(key, v)?
                    .parse()
                    .map_err(|e: String| ConfigError::invalid(key, e))?
            }
            "rounds" => self.rounds = uint(key, v)? as usize,
            "seeds" => {
                self.seeds = match v {
                    // a bare count means seeds 0..count
                    Value::Integer(n) if *n >= 0 => (0..*n as u64).collect(),
                    _ => list(key, v, uint)?,
                }
            }
            "zeta_mode" => {
                self.zeta_mode = match string(key, v)? {
                    "adaptive" => ZetaMode::Adaptive,
                    "static" => ZetaMode::Static,
                    other => return Err(ConfigError::invalid(key, format!("unknown mode `{other}`"))),
                }
            }
            "outage_mode" => {
                self.outage_mode = match string(key, v)? {
                    "empirical" => OutageMode::Empirical,
                    "analytic" => OutageMode::Analytic,
                    other => return Err(ConfigError::invalid(key, format!("unknown mode `{other}`"))),
                }
            }
            "power_convention" => {
                self.power_convention = match string(key, v)? {
                    "split" => ConventionChoice::Split,
                    "mean1" => ConventionChoice::Single(PowerConvention::Mean1),
                    "mean2" => ConventionChoice::Single(PowerConvention::Mean2),
                    other => {
                        return Err(ConfigError::invalid(key, format!("unknown convention `{other}`")))
                    }
                }
            }
            "receiver_noise" => self.receiver_noise = boolean(key, v)?,
            "include" => return Err(ConfigError::invalid(key, "only valid at file level")),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// `T_max`, resolving `auto` to the analog delay `d M / B`.
    pub fn t_max(&self) -> f64 {
        self.t_max
            .unwrap_or_else(|| tx_delay_analog(self.dim, self.subbands, self.bandwidth))
    }

    /// Per-device path losses.
    pub fn path_losses(&self) -> Vec<f64> {
        if self.path_loss.len() == 1 {
            vec![self.path_loss[0]; self.num_devices]
        } else {
            self.path_loss.clone()
        }
    }

    /// Uniform inclusion probabilities `N / K`.
    pub fn inclusion(&self) -> Vec<f64> {
        vec![self.participants as f64 / self.num_devices as f64; self.num_devices]
    }

    /// Structural checks that do not need the task. Infeasibility found
    /// here is a user error, not an internal failure.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::invalid(key, format!("must be positive and finite, got {x}")))
            }
        };
        if self.num_devices == 0 {
            return Err(ConfigError::invalid("num_devices", "must be at least 1"));
        }
        if self.participants == 0 || self.participants > self.num_devices {
            return Err(ConfigError::invalid("participants", "need 1 <= N <= K"));
        }
        if self.participants > self.subbands {
            return Err(ConfigError::invalid("participants", "need N <= M subbands"));
        }
        if self.dim == 0 {
            return Err(ConfigError::invalid("dim", "must be at least 1"));
        }
        if !(1..=32).contains(&self.bits) {
            return Err(ConfigError::invalid("bits", "need 1 <= b <= 32"));
        }
        positive("bandwidth", self.bandwidth)?;
        positive("noise_density", self.noise_density)?;
        positive("p_max", self.p_max)?;
        positive("eta", self.eta)?;
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(ConfigError::invalid("rho", "need 0 < rho <= 1"));
        }
        if !(self.gamma_th.is_finite() && self.gamma_th >= 0.0) {
            return Err(ConfigError::invalid("gamma_th", "need gamma_th >= 0"));
        }
        if let Some(t) = self.t_max {
            positive("t_max", t)?;
        }
        if let Some(t) = self.theta {
            positive("theta", t)?;
        }
        if self.path_loss.len() != 1 && self.path_loss.len() != self.num_devices {
            return Err(ConfigError::invalid("path_loss", "give one value or one per device"));
        }
        for &l in &self.path_loss {
            positive("path_loss", l)?;
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::invalid("seeds", "need at least one seed"));
        }
        let unique: BTreeSet<_> = self.seeds.iter().collect();
        if unique.len() != self.seeds.len() {
            return Err(ConfigError::invalid("seeds", "seeds must be distinct"));
        }
        positive("heterogeneity", self.task.heterogeneity + f64::MIN_POSITIVE)?;
        if self.task.conditioning < 1.0 {
            return Err(ConfigError::invalid("conditioning", "must be >= 1"));
        }
        if self.paradigm.includes_analog() {
            let t_a = tx_delay_analog(self.dim, self.subbands, self.bandwidth);
            if self.t_max() < t_a {
                return Err(ConfigError::invalid(
                    "t_max",
                    format!("below the analog delay dM/B = {t_a:e} s"),
                ));
            }
            if self.zeta_mode == ZetaMode::Static && self.gamma_th == 0.0 {
                return Err(ConfigError::invalid("gamma_th", "static scaling needs gamma_th > 0"));
            }
            if self.gamma_th == 0.0 && self.rho < 1.0 {
                return Err(ConfigError::invalid("gamma_th", "needs gamma_th > 0 when rho < 1"));
            }
        }
        Ok(())
    }
}

fn read_chain(path: &Path, depth: usize) -> Result<Table, ConfigError> {
    if depth > MAX_INCLUDE_DEPTH {
        return Err(ConfigError::IncludeDepth(MAX_INCLUDE_DEPTH));
    }
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut table: Table = text.parse().map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        source: Box::new(e),
    })?;
    for (key, value) in &table {
        if matches!(value, Value::Table(_)) {
            return Err(ConfigError::invalid(key, "nested tables are not supported"));
        }
    }
    match table.remove("include") {
        None => Ok(table),
        Some(Value::String(inc)) => {
            let base = path.parent().unwrap_or(Path::new("."));
            let mut merged = read_chain(&base.join(inc), depth + 1)?;
            merged.extend(table);
            Ok(merged)
        }
        Some(_) => Err(ConfigError::invalid("include", "expected a path string")),
    }
}
