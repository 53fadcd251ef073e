//! JSON run configuration.

use std::path::{Path, PathBuf};

use market_geometry::backtest::{reference_scenarios, Scenario, DEFAULT_WINDOW_MONTHS};
use market_geometry::dimension::{
    SurrogateMethod, SurrogateSettings, DEFAULT_DIMENSION_CAP, DEFAULT_QUANTILE, DEFAULT_REPLICAS,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DEFAULT_FRONTIER_POINTS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub method: SurrogateMethod,
    pub replicas: usize,
    pub quantile: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            method: SurrogateMethod::TimePermute,
            replicas: DEFAULT_REPLICAS,
            quantile: DEFAULT_QUANTILE,
        }
    }
}

/// Config file as written by the user. Paths are relative to the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub panel: Option<PathBuf>,
    pub index: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_window")]
    pub window_months: u32,
    #[serde(default = "default_cap")]
    pub dimension_cap: usize,
    #[serde(default = "yes")]
    pub estimate_dimension: bool,
    #[serde(default = "yes")]
    pub write_eigen_coords: bool,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_points")]
    pub frontier_points: usize,
    /// Absent means the eleven reference scenarios.
    #[serde(default)]
    pub scenarios: Option<Vec<Scenario>>,
}

fn default_window() -> u32 {
    DEFAULT_WINDOW_MONTHS
}
fn default_cap() -> usize {
    DEFAULT_DIMENSION_CAP
}
fn default_points() -> usize {
    DEFAULT_FRONTIER_POINTS
}
fn yes() -> bool {
    true
}

/// Validated configuration with resolved paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub panel: PathBuf,
    pub index: Option<PathBuf>,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    pub window_months: u32,
    pub dimension_cap: usize,
    pub estimate_dimension: bool,
    pub write_eigen_coords: bool,
    pub surrogate: SurrogateConfig,
    pub seed: u64,
    pub frontier_points: usize,
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let raw: RawConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::resolve(raw, base, overrides)
    }

    pub fn resolve(raw: RawConfig, base: &Path, overrides: &Overrides) -> Result<Self> {
        let panel = raw
            .panel
            .ok_or_else(|| CliError::Config("`panel` path is required".into()))?;
        let panel = existing(base.join(panel), "panel")?;
        let index = raw
            .index
            .map(|p| existing(base.join(p), "index"))
            .transpose()?;
        let seed = overrides.seed.or(raw.seed).ok_or_else(|| {
            CliError::Config("`seed` is required (in the config or via --seed)".into())
        })?;
        let output = overrides
            .output
            .clone()
            .or_else(|| raw.output.map(|p| base.join(p)));
        let scenarios = match raw.scenarios {
            None => reference_scenarios(),
            Some(s) if s.is_empty() => {
                return Err(CliError::Config("scenario list is empty".into()));
            }
            Some(s) => s,
        };
        for s in &scenarios {
            s.spec
                .validate()
                .map_err(|e| CliError::Config(format!("scenario {}: {e}", s.label)))?;
        }
        let mut labels: Vec<&str> = scenarios.iter().map(|s| s.label.as_str()).collect();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::Config(format!(
                "duplicate scenario label {}",
                w[0]
            )));
        }
        if let Some(s) = scenarios.iter().find(|s| !valid_label(&s.label)) {
            return Err(CliError::Config(format!(
                "scenario label {:?} must be non-empty and use only letters, digits, '.', '-' and '_'",
                s.label
            )));
        }
        if raw.frontier_points < 2 {
            return Err(CliError::Config(format!(
                "frontier_points must be at least 2, got {}",
                raw.frontier_points
            )));
        }
        let config = Self {
            panel,
            index,
            output,
            window_months: raw.window_months,
            dimension_cap: raw.dimension_cap,
            estimate_dimension: raw.estimate_dimension,
            write_eigen_coords: raw.write_eigen_coords,
            surrogate: raw.surrogate,
            seed,
            frontier_points: raw.frontier_points,
            scenarios,
        };
        config.surrogate_settings(0).validate()?;
        Ok(config)
    }

    /// Surrogate settings for one window. Each window gets its own seed so
    /// replicas are not shared between windows.
    pub fn surrogate_settings(&self, window_id: usize) -> SurrogateSettings {
        SurrogateSettings {
            method: self.surrogate.method,
            replicas: self.surrogate.replicas,
            quantile: self.surrogate.quantile,
            seed: self.seed.wrapping_add(window_id as u64),
        }
    }

    pub fn require_index(&self) -> Result<&Path> {
        self.index
            .as_deref()
            .ok_or_else(|| CliError::Config("`index` path is required for backtests".into()))
    }
}

fn existing(path: PathBuf, what: &str) -> Result<PathBuf> {
    if path.is_file() {
        path.canonicalize().map_err(|e| CliError::io(&path, e))
    } else {
        Err(CliError::Config(format!(
            "{what} file not found: {}",
            path.display()
        )))
    }
}

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && label != "."
        && label != ".."
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_'))
}
