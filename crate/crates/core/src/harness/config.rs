//! Plain-text `key = value` suite configuration.

use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Checks the suite knows how to run.
pub const KNOWN_CHECKS: &[&str] = &[
    "moser",
    "solution",
    "theorem_a",
    "green_lower_bound",
    "kernel_identities",
    "weak_form",
    "poincare",
    "cstar_sweep",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CstarPolicy {
    /// Maximum of the applicable estimators.
    Auto,
    Fixed(f64),
}

impl FromStr for CstarPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(CstarPolicy::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(CstarPolicy::Fixed(v)),
            _ => Err(Error::Usage(format!("cstar must be `auto` or a positive number, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub models: Vec<ModelSpec>,
    pub checks: Vec<String>,
    pub trials: usize,
    pub seed: u64,
    pub exponents: Vec<f64>,
    pub cstar: CstarPolicy,
    /// Number of nonconstant modes in random fields.
    pub band: usize,
    /// Factor applied to `C*` when triaging a failure.
    pub inflation: f64,
    pub ascent_restarts: usize,
    pub ascent_iters: usize,
    /// Worker threads; 0 uses the global pool.
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            models: Vec::new(),
            checks: ["moser", "solution", "theorem_a"].iter().map(|s| s.to_string()).collect(),
            trials: 10,
            seed: 0,
            exponents: vec![2.0],
            cstar: CstarPolicy::Auto,
            band: 20,
            inflation: 1.5,
            ascent_restarts: 20,
            ascent_iters: 200,
            threads: 0,
            out: None,
            cache: None,
        }
    }
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

impl SuiteConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unknown keys are
    /// usage errors, malformed lines are parse errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SuiteConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("config line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |what: &str| -> Result<f64> {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("config line {}: {what} must be a number", lineno + 1)))
            };
            let count = |what: &str| -> Result<usize> {
                value
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("config line {}: {what} must be a count", lineno + 1)))
            };
            match key {
                "models" => cfg.models = list(value).iter().map(|s| s.parse()).collect::<Result<_>>()?,
                "checks" => cfg.checks = list(value),
                "trials" => cfg.trials = count("trials")?,
                "seed" => {
                    cfg.seed = value
                        .parse()
                        .map_err(|_| Error::Parse(format!("config line {}: seed must be an integer", lineno + 1)))?
                }
                "p" => {
                    cfg.exponents = list(value)
                        .iter()
                        .map(|s| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad exponent {s:?}"))))
                        .collect::<Result<_>>()?
                }
                "cstar" => cfg.cstar = value.parse()?,
                "band" => cfg.band = count("band")?,
                "inflation" => cfg.inflation = num("inflation")?,
                "ascent_restarts" => cfg.ascent_restarts = count("ascent_restarts")?,
                "ascent_iters" => cfg.ascent_iters = count("ascent_iters")?,
                "threads" => cfg.threads = count("threads")?,
                "out" => cfg.out = Some(PathBuf::from(value)),
                "cache" => cfg.cache = Some(PathBuf::from(value)),
                other => return Err(Error::Usage(format!("unknown config key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Usage("trials must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Usage("config lists no models".into()));
        }
        if self.exponents.is_empty() {
            return Err(Error::Usage("config lists no exponents".into()));
        }
        if let Some(c) = self.checks.iter().find(|c| !KNOWN_CHECKS.contains(&c.as_str())) {
            return Err(Error::Usage(format!("unknown check {c:?}; known: {}", KNOWN_CHECKS.join(", "))));
        }
        if !(self.inflation > 1.0) {
            return Err(Error::Usage(format!("inflation must exceed 1, got {}", self.inflation)));
        }
        if self.band == 0 {
            return Err(Error::Usage("band must be at least 1".into()));
        }
        Ok(())
    }
}
