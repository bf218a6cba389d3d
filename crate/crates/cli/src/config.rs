//! Flat `key = value` configuration with `#` comments.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use rmviab::{EpiParams, ModelRates};

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_MEDIUM_BOUNDARY: i32 = 3;
pub const EXIT_NOT_MEDIUM_FEEDBACK: i32 = 4;
pub const EXIT_BAD_CSV: i32 = 5;

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn config(key: &str, reason: impl fmt::Display) -> Self {
        Self::new(EXIT_CONFIG, format!("invalid config key `{key}`: {reason}"))
    }

    /// Maps a library error, renaming parameters to their config keys.
    pub fn from_core(e: rmviab::Error) -> Self {
        use rmviab::Error;
        match e {
            Error::InvalidParameter { name, reason } => {
                let key = match name {
                    "m" => "m0",
                    "h" => "h0",
                    "breakpoints" => "schedule",
                    other => other,
                };
                Self::config(key, reason)
            }
            Error::ControlOutOfBounds { u, u_min, u_max } => {
                Self::config("u", format!("{u} outside [{u_min}, {u_max}]"))
            }
            Error::Parse { line, reason } => Self::new(
                EXIT_BAD_CSV,
                format!("malformed CSV at line {line}: {reason}"),
            ),
            other => Self::new(EXIT_FAILURE, other.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, CliError>;

const KNOWN_KEYS: &[&str] = &[
    "a_m",
    "a_h",
    "alpha",
    "p_h",
    "p_m",
    "xi",
    "delta",
    "gamma",
    "u_min",
    "u_max",
    "h_bar",
    "step",
    "tol",
    "out",
    "m0",
    "h0",
    "policy",
    "u",
    "schedule",
    "horizon",
    "dt_out",
    "u_grid",
    "h_grid",
    "incidence",
    "prevalence",
    "population",
    "window",
    "prevalence_rule",
    "theta0",
    "days",
];

const RAW_KEYS: [&str; 5] = ["alpha", "p_h", "p_m", "xi", "delta"];

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::new(
                    EXIT_CONFIG,
                    format!("config line {}: expected `key = value`", i + 1),
                ));
            };
            let key = key.trim();
            if cfg.values.contains_key(key) {
                return Err(CliError::config(
                    key,
                    format!("duplicate at line {}", i + 1),
                ));
            }
            cfg.set(key, value.trim())?;
        }
        Ok(cfg)
    }

    /// Inserts or overrides one key.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::config(key, "unknown key"));
        }
        if value.is_empty() {
            return Err(CliError::config(key, "empty value"));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require_str(&self, key: &str) -> CliResult<&str> {
        self.str(key)
            .ok_or_else(|| CliError::config(key, "missing"))
    }

    pub fn f64(&self, key: &str) -> CliResult<Option<f64>> {
        self.str(key).map(|v| parse_f64(key, v)).transpose()
    }

    pub fn require_f64(&self, key: &str) -> CliResult<f64> {
        self.f64(key)?
            .ok_or_else(|| CliError::config(key, "missing"))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> CliResult<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn u64(&self, key: &str) -> CliResult<Option<u64>> {
        self.str(key)
            .map(|v| {
                v.parse::<u64>().map_err(|_| {
                    CliError::config(key, format!("`{v}` is not a nonnegative integer"))
                })
            })
            .transpose()
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.str(key).map(PathBuf::from)
    }

    /// Fixed-size comma-separated list.
    pub fn f64_list(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        self.str(key)
            .map(|v| v.split(',').map(|s| parse_f64(key, s.trim())).collect())
            .transpose()
    }

    /// `a:b:n` (inclusive, `n` points) or a comma-separated list.
    pub fn grid(&self, key: &str) -> CliResult<Vec<f64>> {
        let v = self.require_str(key)?;
        let parts: Vec<&str> = v.split(':').map(str::trim).collect();
        let grid = match parts.as_slice() {
            [a, b, n] => {
                let (a, b) = (parse_f64(key, a)?, parse_f64(key, b)?);
                let n: usize = n.parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
                    CliError::config(key, "point count must be a positive integer")
                })?;
                if n == 1 {
                    vec![a]
                } else {
                    (0..n)
                        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                        .collect()
                }
            }
            [_] => self.f64_list(key)?.unwrap_or_default(),
            _ => {
                return Err(CliError::config(
                    key,
                    "expected `start:stop:count` or a list",
                ))
            }
        };
        Ok(grid)
    }

    /// Raw epidemiological parameters, each defaulting to `fallback`.
    pub fn epi_params(&self, fallback: &EpiParams) -> CliResult<EpiParams> {
        let params = EpiParams {
            alpha: self.f64_or("alpha", fallback.alpha)?,
            p_h: self.f64_or("p_h", fallback.p_h)?,
            p_m: self.f64_or("p_m", fallback.p_m)?,
            xi: self.f64_or("xi", fallback.xi)?,
            delta: self.f64_or("delta", fallback.delta)?,
            gamma: self.f64_or("gamma", fallback.gamma)?,
        };
        params.validate().map_err(CliError::from_core)?;
        Ok(params)
    }

    /// Model rates from either `a_m, a_h` or the raw parameters.
    ///
    /// `u_max_fallback` is used when the config has no `u_max` key.
    pub fn rates(&self, u_max_fallback: Option<f64>) -> CliResult<ModelRates> {
        let gamma = self.f64_or("gamma", 0.1)?;
        let reduced = self.has("a_m") || self.has("a_h");
        let raw = RAW_KEYS.iter().find(|k| self.has(k));
        let (a_m, a_h, default_u_min) = match (reduced, raw) {
            (true, Some(k)) => {
                return Err(CliError::config(k, "cannot be combined with a_m/a_h"));
            }
            (true, None) => (self.require_f64("a_m")?, self.require_f64("a_h")?, 0.0),
            (false, Some(_)) => {
                for k in RAW_KEYS {
                    self.require_f64(k)?;
                }
                let p = self.epi_params(&EpiParams::CALI_2013_ESTIMATE)?;
                (p.a_m(), p.a_h(), p.delta)
            }
            (false, None) => {
                return Err(CliError::config(
                    "a_m",
                    "missing (give a_m and a_h, or alpha, p_h, p_m, xi and delta)",
                ));
            }
        };
        let u_max = match (self.f64("u_max")?, u_max_fallback) {
            (Some(u), _) | (None, Some(u)) => u,
            (None, None) => return Err(CliError::config("u_max", "missing")),
        };
        let u_min = self.f64_or("u_min", default_u_min.min(u_max))?;
        ModelRates::new(a_m, a_h, gamma, u_min, u_max).map_err(CliError::from_core)
    }
}

fn parse_f64(key: &str, v: &str) -> CliResult<f64> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(CliError::config(
            key,
            format!("`{v}` is not a finite number"),
        )),
    }
}
