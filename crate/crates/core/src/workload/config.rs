//! Scenario configuration: TOML file, environment, and key=value overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::SLICE_TYPES;
use crate::ordering::OrdererConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid override {key:?}: {reason}")]
    BadOverride { key: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Environment variable prefix for config overrides. Nested keys use a double
/// underscore: `SLICECHAIN_CONSENSUS__SERVICE=raft` sets `consensus.service`.
pub const ENV_PREFIX: &str = "SLICECHAIN_";

/// Bounded right-skewed demand law: a Beta(alpha, beta) sample scaled onto
/// `[low_pct, high_pct]`. Right skew requires `alpha < beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemandConfig {
    pub low_pct: f64,
    pub high_pct: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for DemandConfig {
    fn default() -> Self {
        DemandConfig {
            low_pct: 0.1,
            high_pct: 4.0,
            alpha: 2.0,
            beta: 5.0,
        }
    }
}

/// How the broker admits acquire requests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdmissionPolicy {
    /// Requests execute as they arrive (the default pipeline).
    FirstCome,
    /// Acquires queue per epoch and the broker admits a revenue-maximizing
    /// subset against the current pool. An extension mode, off by default.
    Batch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exact,
    Greedy,
}

/// Full scenario configuration. Every field has a default and a CLI override.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Independent broker channels.
    pub num_ibs: usize,
    /// Tenants per broker channel.
    pub consortium_size: usize,
    /// Platform-wide slice-request rate, requests per second.
    pub sr_rate_per_s: f64,
    /// Transfer-phase length, seconds.
    pub duration_s: f64,
    pub demand: DemandConfig,
    /// Upper bound of the opening intent draw, percent of the initial
    /// allocation.
    pub intent_fraction_max_pct: f64,
    /// Registry capacity per resource type, micro-units.
    pub pool_units_per_type: u64,
    /// Simulated contract-execution service time per request, milliseconds.
    pub exec_service_ms: f64,
    /// Simulated per-block validation time, milliseconds.
    pub validation_ms: f64,
    /// Idle period before the transfer phase so consensus can elect a leader.
    pub warmup_ms: f64,
    /// Extra time after the transfer phase to let in-flight requests settle.
    pub drain_grace_ms: f64,
    /// Delay before retrying a submission that found no leader, milliseconds.
    pub resubmit_delay_ms: f64,
    /// Draw exponential inter-arrivals instead of a fixed spacing.
    pub poisson_arrivals: bool,
    pub admission_mode: AdmissionPolicy,
    /// Epoch length for batch admission, milliseconds.
    pub admission_epoch_ms: f64,
    pub admission_solver: SolverKind,
    /// Collect and export the ordering-layer event trace.
    pub trace: bool,
    pub consensus: OrdererConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            num_ibs: 3,
            consortium_size: 1000,
            sr_rate_per_s: 150.0,
            duration_s: 10.0,
            demand: DemandConfig::default(),
            intent_fraction_max_pct: 30.0,
            pool_units_per_type: 1_000_000,
            exec_service_ms: 2.0,
            validation_ms: 1.0,
            warmup_ms: 3000.0,
            drain_grace_ms: 2000.0,
            resubmit_delay_ms: 50.0,
            poisson_arrivals: false,
            admission_mode: AdmissionPolicy::FirstCome,
            admission_epoch_ms: 500.0,
            admission_solver: SolverKind::Exact,
            trace: false,
            consensus: OrdererConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.num_ibs == 0 {
            return fail("num_ibs must be >= 1".into());
        }
        if self.consortium_size == 0 {
            return fail("consortium_size must be >= 1".into());
        }
        if self.sr_rate_per_s <= 0.0 {
            return fail("sr_rate_per_s must be positive".into());
        }
        if self.duration_s <= 0.0 {
            return fail("duration_s must be positive".into());
        }
        if self.pool_units_per_type < self.consortium_size as u64 {
            return fail(format!(
                "pool_units_per_type ({}) cannot allocate {} tenants at least one unit each",
                self.pool_units_per_type, self.consortium_size
            ));
        }
        let d = &self.demand;
        if d.low_pct <= 0.0 || d.high_pct <= d.low_pct {
            return fail("demand range must satisfy 0 < low_pct < high_pct".into());
        }
        if d.alpha <= 0.0 || d.beta <= 0.0 || d.alpha >= d.beta {
            return fail("right-skewed demand requires 0 < alpha < beta".into());
        }
        if self.intent_fraction_max_pct <= 0.0 || self.intent_fraction_max_pct > 100.0 {
            return fail("intent_fraction_max_pct must be in (0, 100]".into());
        }
        if self.exec_service_ms < 0.0 || self.validation_ms < 0.0 {
            return fail("service times cannot be negative".into());
        }
        if self.admission_epoch_ms <= 0.0 {
            return fail("admission_epoch_ms must be positive".into());
        }
        self.consensus
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Registry capacities for one channel: the same pool per resource type.
    pub fn capacities(&self) -> Vec<u64> {
        vec![self.pool_units_per_type; SLICE_TYPES]
    }

    /// Loads a TOML file, then applies environment and explicit overrides in
    /// that order (explicit wins).
    pub fn load(
        path: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<ScenarioConfig, ConfigError> {
        let mut value: toml::Value = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                text.parse()
                    .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?
            }
            None => toml::Value::Table(Default::default()),
        };

        for (key, raw) in env_overrides() {
            apply_override(&mut value, &key, &raw)?;
        }
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }

        let cfg: ScenarioConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn env_overrides() -> Vec<(String, String)> {
    let mut found: Vec<(String, String)> = std::env::vars()
        .filter_map(|(name, value)| {
            let rest = name.strip_prefix(ENV_PREFIX)?;
            let key = rest.to_ascii_lowercase().replace("__", ".");
            Some((key, value))
        })
        .collect();
    found.sort();
    found
}

/// Sets one dotted-path key in a TOML value tree. The raw value is parsed as
/// a TOML literal when possible and falls back to a string.
pub fn apply_override(root: &mut toml::Value, key: &str, raw: &str) -> Result<(), ConfigError> {
    let parsed = parse_raw_value(raw);
    let mut current = root;
    let segments: Vec<&str> = key.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(ConfigError::BadOverride {
            key: key.into(),
            reason: "empty path segment".into(),
        });
    }
    for (i, segment) in segments.iter().enumerate() {
        let table = current
            .as_table_mut()
            .ok_or_else(|| ConfigError::BadOverride {
                key: key.into(),
                reason: format!("{} is not a table", segments[..i].join(".")),
            })?;
        if i + 1 == segments.len() {
            table.insert(segment.to_string(), parsed);
            return Ok(());
        }
        current = table
            .entry(segment.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    unreachable!("segments is non-empty")
}

fn parse_raw_value(raw: &str) -> toml::Value {
    let doc = format!("x = {raw}");
    match doc.parse::<toml::Value>() {
        Ok(toml::Value::Table(mut t)) => t.remove("x").unwrap_or(toml::Value::String(raw.into())),
        _ => toml::Value::String(raw.to_string()),
    }
}
