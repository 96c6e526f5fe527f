//! Experiment harness: configured runs that write CSV artifacts plus a
//! manifest, shared by the CLI, the examples and the acceptance suite.
//!
//! Every run is deterministic given its config and seed; sweep points and
//! Monte Carlo trials run on the rayon pool and are collected in order.

mod config;
mod runs;
mod verify;

pub use config::{
    AnalysisConfig, CalibrationConfig, DesignConfig, EstimatorConfig, EstimatorKind, ExperimentConfig, FrontendKind,
    GbwpConfig, InputConfig, MonteCarloConfig, ReferenceFilter,
};
pub use runs::{
    calibrate, calibrated_snr, gbwp_point, measure, reference_h0, run_calibrate, run_gbwp_sweep, run_montecarlo,
    run_nominal, run_psd, snap_to_bin, test_tone, CalibrationReport, GbwpPoint, GbwpReport, Measurement,
    MonteCarloReport, NominalReport, NominalRow, PointStatus, TrialResult,
};
pub use verify::{run_verify, rotation_identity_suite, stability_condition_suite, CheckResult, VerifyReport};

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::Result;

/// Written as `manifest.json` next to every run's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    /// SHA-256 of the normalized config.
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub versions: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub config: Option<ExperimentConfig>,
}

impl Manifest {
    pub fn new(command: &str, config: Option<&ExperimentConfig>, seed: u64, outputs: &[PathBuf]) -> Result<Self> {
        let normalized = serde_json::to_string(&config)?;
        let digest = Sha256::digest(normalized.as_bytes());
        let mut versions = BTreeMap::new();
        versions.insert("cbadc".to_string(), env!("CARGO_PKG_VERSION").to_string());
        versions.insert("control_trace_format".to_string(), "1".to_string());
        versions.insert("fir_bank_format".to_string(), "1".to_string());
        Ok(Manifest {
            command: command.to_string(),
            config_hash: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed,
            threads: rayon::current_num_threads(),
            versions,
            outputs: outputs
                .iter()
                .map(|p| p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned()))
                .collect(),
            config: config.cloned(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

/// Writes a CSV table (LF line endings, shortest round-trip floats).
pub(crate) fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn num(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
