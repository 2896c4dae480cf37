//! Scenario configuration files.
//!
//! A scenario is a flat TOML document:
//!
//! ```toml
//! n = 500
//! topology = "homogeneous"     # homogeneous | heterogeneous | external
//! # topology_file = "net.txt"  # external only
//! p = 0.005
//! Q = 0.1
//! # s = 0.0, t = 0.0           # default 2.0 for heterogeneous, else 0.0
//! # E = 1.0
//! r_grid = { start = 0.01, stop = 0.1, step = 0.01 }   # or an explicit list
//! # replications = 10000
//! seed = 42
//! # loss_rule = "paper_max"    # paper_max | capped_min
//! # initial_bank = "uniform_random"   # or a bank index
//!
//! [surcharge]                  # optional
//! ratio = 0.025
//! biggest_fraction = 0.1
//! ```
//!
//! Unknown keys are rejected. Relative `topology_file` paths are resolved
//! against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cascade::LossRule;
use crate::error::ConfigError;
use crate::experiment::{InitialBankPolicy, ScenarioConfig, Surcharge};
use crate::netgen::TopologyKind;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n: usize,
    topology: TopologyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    topology_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(rename = "Q", alias = "q")]
    q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[serde(
        rename = "E",
        alias = "e",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    e: Option<f64>,
    r_grid: RawGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    replications: Option<u64>,
    #[serde(alias = "master_seed")]
    seed: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    loss_rule: Option<LossRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_bank: Option<RawInitialBank>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    surcharge: Option<Surcharge>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawInitialBank {
    Index(usize),
    Policy(String),
}

/// Expands an inclusive `start..=stop` grid. Values are rounded to 12 decimals
/// so that e.g. the sixth step of 0.01 is exactly `0.06`.
pub fn expand_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, ConfigError> {
    if !(step > 0.0 && step.is_finite() && start.is_finite() && stop.is_finite()) {
        return Err(ConfigError::Invalid {
            field: "r_grid",
            message: format!("bad range start = {start}, stop = {stop}, step = {step}"),
        });
    }
    let count = ((stop - start) / step + 1e-9).floor();
    if !(0.0..=1e6).contains(&count) {
        return Err(ConfigError::Invalid {
            field: "r_grid",
            message: format!(
                "range start = {start}, stop = {stop}, step = {step} is empty or huge"
            ),
        });
    }
    Ok((0..=count as usize)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses a scenario from TOML text. Relative topology paths stay relative.
pub fn parse_config_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().trim().to_string(),
    })?;

    let needs_p = raw.topology != TopologyKind::External;
    let p = match (raw.p, needs_p) {
        (Some(p), _) => p,
        (None, false) => 0.0,
        (None, true) => {
            return Err(ConfigError::Invalid {
                field: "p",
                message: format!("required for {} topologies", raw.topology),
            })
        }
    };
    let r_grid = match raw.r_grid {
        RawGrid::List(v) => v,
        RawGrid::Range { start, stop, step } => expand_grid(start, stop, step)?,
    };
    let initial_bank = match raw.initial_bank {
        None => InitialBankPolicy::UniformRandom,
        Some(RawInitialBank::Index(b)) => InitialBankPolicy::Fixed(b),
        Some(RawInitialBank::Policy(name)) if name == "uniform_random" => {
            InitialBankPolicy::UniformRandom
        }
        Some(RawInitialBank::Policy(name)) => {
            return Err(ConfigError::Invalid {
                field: "initial_bank",
                message: format!("unknown policy `{name}`, expected `uniform_random` or an index"),
            })
        }
    };
    if raw.seed < 0 {
        return Err(ConfigError::Invalid {
            field: "seed",
            message: format!("{} must be non-negative", raw.seed),
        });
    }

    let mut cfg = ScenarioConfig::new(raw.n, raw.topology, p, raw.q, r_grid);
    if let Some(s) = raw.s {
        cfg.s = s;
    }
    if let Some(t) = raw.t {
        cfg.t = t;
    }
    cfg.topology_file = raw.topology_file;
    cfg.e_total = raw.e.unwrap_or(ScenarioConfig::DEFAULT_E_TOTAL);
    cfg.replications = raw
        .replications
        .unwrap_or(ScenarioConfig::DEFAULT_REPLICATIONS);
    cfg.master_seed = raw.seed as u64;
    cfg.loss_rule = raw.loss_rule.unwrap_or_default();
    cfg.initial_bank = initial_bank;
    cfg.surcharge = raw.surcharge;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a scenario file, resolving a relative `topology_file` against the
/// file's directory.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let mut cfg = parse_config_str(&text)?;
    if let Some(file) = &cfg.topology_file {
        if file.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.topology_file = Some(dir.join(file));
            }
        }
    }
    Ok(cfg)
}

/// Serializes a scenario with every field explicit.
pub fn emit_config(cfg: &ScenarioConfig) -> Result<String, ConfigError> {
    let seed = i64::try_from(cfg.master_seed).map_err(|_| ConfigError::Invalid {
        field: "seed",
        message: format!("{} does not fit a TOML integer", cfg.master_seed),
    })?;
    let raw = RawConfig {
        n: cfg.n,
        topology: cfg.topology,
        topology_file: cfg.topology_file.clone(),
        p: Some(cfg.p),
        q: cfg.q,
        s: Some(cfg.s),
        t: Some(cfg.t),
        e: Some(cfg.e_total),
        r_grid: RawGrid::List(cfg.r_grid.clone()),
        replications: Some(cfg.replications),
        seed,
        loss_rule: Some(cfg.loss_rule),
        initial_bank: Some(match cfg.initial_bank {
            InitialBankPolicy::UniformRandom => RawInitialBank::Policy("uniform_random".into()),
            InitialBankPolicy::Fixed(b) => RawInitialBank::Index(b),
        }),
        surcharge: cfg.surcharge,
    };
    toml::to_string(&raw).map_err(|e| ConfigError::Invalid {
        field: "config",
        message: e.to_string(),
    })
}
