//! Experiment configuration: JSON file plus CLI overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    ConfigError(String),
    #[error("usage error: {0}")]
    UsageError(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Failed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum ExperimentKind {
    Fig1Table,
    Fig2Sweep,
    Fig4Valley,
    Fig5Bounds,
    Fig7SweepCont,
    HardInstance,
    Envelopes,
    LemmaSuite,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Fig1Table,
        ExperimentKind::Fig2Sweep,
        ExperimentKind::Fig4Valley,
        ExperimentKind::Fig5Bounds,
        ExperimentKind::Fig7SweepCont,
        ExperimentKind::HardInstance,
        ExperimentKind::Envelopes,
        ExperimentKind::LemmaSuite,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Fig1Table => "fig1-table",
            ExperimentKind::Fig2Sweep => "fig2-sweep",
            ExperimentKind::Fig4Valley => "fig4-valley",
            ExperimentKind::Fig5Bounds => "fig5-bounds",
            ExperimentKind::Fig7SweepCont => "fig7-sweep-cont",
            ExperimentKind::HardInstance => "hard-instance",
            ExperimentKind::Envelopes => "envelopes",
            ExperimentKind::LemmaSuite => "lemma-suite",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| CliError::UsageError(format!("unknown experiment `{s}`")))
    }
}

pub const MIN_GRID_RESOLUTION: usize = 100;
pub const DEFAULT_GRID_RESOLUTION: usize = 100_000;

/// Fully resolved experiment configuration.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    /// One-dimensional grid budget; two-dimensional scans square up a
    /// ten-fold budget (1e5 -> 1e6 points) to match the reference grids.
    pub grid_resolution: usize,
    pub out_dir: PathBuf,
    pub overrides: BTreeMap<String, String>,
    pub check: bool,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, out_dir: PathBuf) -> Self {
        ExperimentConfig {
            experiment,
            seed: 0,
            grid_resolution: DEFAULT_GRID_RESOLUTION,
            out_dir,
            overrides: BTreeMap::new(),
            check: false,
        }
    }

    /// Points per axis for a 2-D scan with the same refinement philosophy as
    /// the 1-D budget (`sqrt(10 * budget)`).
    pub fn axis_points_2d(&self) -> usize {
        ((10.0 * self.grid_resolution as f64).sqrt().round() as usize).max(MIN_GRID_RESOLUTION / 10)
    }

    pub fn override_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.overrides.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| CliError::ConfigError(format!("override `{key}` = `{v}` is not a number"))),
        }
    }

    pub fn override_usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        match self.overrides.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<usize>().map(Some).map_err(|_| {
                CliError::ConfigError(format!("override `{key}` = `{v}` is not an integer"))
            }),
        }
    }

    pub fn override_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.overrides.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map(Some)
                .map_err(|_| CliError::ConfigError(format!("override `{key}` = `{v}` is not a list"))),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.grid_resolution < MIN_GRID_RESOLUTION {
            return Err(CliError::ConfigError(format!(
                "grid_resolution {} below the floor {MIN_GRID_RESOLUTION}",
                self.grid_resolution
            )));
        }
        Ok(())
    }
}

/// On-disk shape: every field optional, CLI flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub grid_resolution: Option<usize>,
    pub out_dir: Option<String>,
    #[serde(default)]
    pub overrides: BTreeMap<String, String>,
}

/// Parses a JSON config file; malformed JSON is reported with line/column.
pub fn parse_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let file: ConfigFile = serde_json::from_str(&text).map_err(|e| {
        CliError::ConfigError(format!(
            "{} at line {} column {}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    if let Some(res) = file.grid_resolution {
        if res < MIN_GRID_RESOLUTION {
            return Err(CliError::ConfigError(format!(
                "grid_resolution {res} below the floor {MIN_GRID_RESOLUTION}"
            )));
        }
    }
    Ok(file)
}

/// Merges file values with CLI-level settings (CLI wins), applying defaults.
pub fn resolve_config(
    file: Option<ConfigFile>,
    experiment: Option<&str>,
    seed: Option<u64>,
    grid_resolution: Option<usize>,
    out_dir: Option<PathBuf>,
    check: bool,
) -> Result<ExperimentConfig, CliError> {
    let file = file.unwrap_or_default();
    let experiment_name = experiment
        .map(str::to_string)
        .or(file.experiment)
        .ok_or_else(|| CliError::UsageError("no experiment selected".into()))?;
    let cfg = ExperimentConfig {
        experiment: ExperimentKind::parse(&experiment_name)?,
        seed: seed.or(file.seed).unwrap_or(0),
        grid_resolution: grid_resolution
            .or(file.grid_resolution)
            .unwrap_or(DEFAULT_GRID_RESOLUTION),
        out_dir: out_dir
            .or(file.out_dir.map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("plaim-out")),
        overrides: file.overrides,
        check,
    };
    cfg.validate()?;
    Ok(cfg)
}
