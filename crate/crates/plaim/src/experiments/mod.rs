//! The experiment runner behind the `plaim` binary: each subcommand maps to
//! one reproducible experiment emitting CSV files plus a plain-text summary.
//! Outputs are byte-identical for identical (config, seed).

mod config;
mod figures;
mod hard;
mod suites;
mod valley;

pub use config::{
    parse_config, resolve_config, CliError, ConfigFile, ExperimentConfig, ExperimentKind,
    DEFAULT_GRID_RESOLUTION, MIN_GRID_RESOLUTION,
};

use std::fmt::Write as _;
use std::path::PathBuf;

/// What an experiment produced: the summary text (also written to
/// `summary.txt`), the files it wrote, and the acceptance checks that failed
/// (empty unless `--check`).
#[derive(Debug, Default)]
pub struct ExperimentOutcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
    pub check_failures: Vec<String>,
}

impl ExperimentOutcome {
    pub(crate) fn line(&mut self, text: impl AsRef<str>) {
        self.summary.push_str(text.as_ref());
        self.summary.push('\n');
    }

    /// Records a checked quantity; registers a failure when `ok` is false and
    /// checking is on.
    pub(crate) fn check(&mut self, check_on: bool, label: &str, ok: bool, detail: String) {
        let verdict = if ok { "pass" } else { "FAIL" };
        self.line(format!("[{verdict}] {label}: {detail}"));
        if check_on && !ok {
            self.check_failures.push(format!("{label}: {detail}"));
        }
    }

    pub(crate) fn write_file(
        &mut self,
        dir: &std::path::Path,
        name: &str,
        contents: &[u8],
    ) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(name);
        std::fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }
}

/// Checks a value against a target within a symmetric relative tolerance.
pub(crate) fn within(value: f64, target: f64, rel: f64) -> bool {
    value >= target * (1.0 - rel) && value <= target * (1.0 + rel)
}

/// Runs one experiment, writing its outputs under `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, CliError> {
    cfg.validate()?;
    let mut outcome = match cfg.experiment {
        ExperimentKind::Fig1Table => figures::fig1_table(cfg)?,
        ExperimentKind::Fig2Sweep => figures::fig2_sweep(cfg)?,
        ExperimentKind::Fig5Bounds => figures::fig5_bounds(cfg)?,
        ExperimentKind::Fig7SweepCont => figures::fig7_sweep_cont(cfg)?,
        ExperimentKind::Fig4Valley => valley::fig4_valley(cfg)?,
        ExperimentKind::HardInstance => hard::hard_instance(cfg)?,
        ExperimentKind::Envelopes => suites::envelopes(cfg)?,
        ExperimentKind::LemmaSuite => suites::lemma_suite(cfg)?,
    };
    let mut header = String::new();
    let _ = writeln!(header, "experiment: {}", cfg.experiment.as_str());
    let _ = writeln!(header, "seed: {}", cfg.seed);
    let _ = writeln!(header, "grid_resolution: {}", cfg.grid_resolution);
    outcome.summary = format!("{header}{}", outcome.summary);
    let summary_bytes = outcome.summary.clone().into_bytes();
    outcome.write_file(&cfg.out_dir, "summary.txt", &summary_bytes)?;
    Ok(outcome)
}
