//! TOML experiment configuration.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use crate::analysis::DEFAULT_NFFT;
use crate::estimator::Window;
use crate::system::{LeapfrogDesign, ParamClass};
use crate::{Error, Result};

/// A complete experiment description. Every section but `design` has defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub design: DesignConfig,
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub montecarlo: MonteCarloConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub gbwp: GbwpConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub order: usize,
    pub osr: usize,
    /// Hz; give either this or `omega_b`.
    #[serde(default)]
    pub f_s: Option<f64>,
    /// rad/s
    #[serde(default)]
    pub omega_b: Option<f64>,
    /// Notch frequencies (Hz). Defaults to `(j + ½)·f_s/(2·OSR)`, `j < OSR`.
    #[serde(default)]
    pub notches: Option<Vec<f64>>,
    /// Also run the low-pass leapfrog in nominal sweeps.
    #[serde(default = "yes")]
    pub lowpass_baseline: bool,
    /// rad
    #[serde(default)]
    pub phi_kappa: f64,
    /// s
    #[serde(default)]
    pub tau_dc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// Test-tone amplitude (V).
    #[serde(default = "one")]
    pub amplitude: f64,
    /// rad
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Wiener,
    Calibrated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default = "wiener")]
    pub kind: EstimatorKind,
    /// Taps per filter.
    #[serde(default = "default_length")]
    pub length: usize,
    #[serde(default = "default_aliases")]
    pub aliases: usize,
    #[serde(default = "rectangular")]
    pub window: Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_nfft")]
    pub nfft: usize,
    /// Welch segments per spectrum (50 % overlap).
    #[serde(default = "default_segments")]
    pub segments: usize,
    /// V
    #[serde(default = "one")]
    pub full_scale: f64,
    /// Estimate samples dropped before the PSD.
    #[serde(default)]
    pub warmup: usize,
    /// Grid size for analytic notch estimation.
    #[serde(default = "default_notch_points")]
    pub notch_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontendKind {
    Lowpass,
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_bound")]
    pub relative_bound: f64,
    /// Hz; defaults to `f_s/8`.
    #[serde(default)]
    pub notch: Option<f64>,
    #[serde(default = "both_frontends")]
    pub frontends: Vec<FrontendKind>,
    #[serde(default = "all_classes")]
    pub targets: Vec<ParamClass>,
}

/// How the fixed reference filter `h₀` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceFilter {
    /// Band-pass FIR: 0 dB at `f_n`, −3 dB at `f_n ± f_B/2`, −20 dB at
    /// `f_n ± 0.525·f_B`, stopbands at 0 and `f_s/2`.
    Design,
    /// The reference-channel filter of the model's own Wiener bank.
    Wiener,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Reference injection gain relative to the first-stage control gain.
    #[serde(default = "default_ratio")]
    pub reference_ratio: f64,
    #[serde(default = "default_lms_length")]
    pub length: usize,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_iterations")]
    pub iterations: u64,
    #[serde(default = "default_training")]
    pub training_periods: usize,
    #[serde(default = "default_test_amplitude")]
    pub test_amplitude: f64,
    #[serde(default = "design_filter")]
    pub reference_filter: ReferenceFilter,
    /// Hz; defaults to `5·f_s/16`.
    #[serde(default)]
    pub notch: Option<f64>,
    #[serde(default)]
    pub multiplication_free: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbwpConfig {
    /// Op-amp DC gains in multiples of `OSR/π`.
    #[serde(default = "default_dc_gains")]
    pub dc_gains: Vec<f64>,
    /// Gain–bandwidth products in multiples of `f_n + ω_B/(4π)`.
    #[serde(default = "default_gbwp_ratios")]
    pub gbwp_ratios: Vec<f64>,
}

fn yes() -> bool {
    true
}
fn one() -> f64 {
    1.0
}
fn wiener() -> EstimatorKind {
    EstimatorKind::Wiener
}
fn default_length() -> usize {
    1 << 12
}
fn default_aliases() -> usize {
    2
}
fn rectangular() -> Window {
    Window::Rectangular
}
fn default_nfft() -> usize {
    DEFAULT_NFFT
}
fn default_segments() -> usize {
    15
}
fn default_notch_points() -> usize {
    4001
}
fn default_trials() -> usize {
    64
}
fn default_bound() -> f64 {
    0.1
}
fn both_frontends() -> Vec<FrontendKind> {
    vec![FrontendKind::Quadrature, FrontendKind::Lowpass]
}
fn all_classes() -> Vec<ParamClass> {
    ParamClass::ALL.to_vec()
}
fn default_ratio() -> f64 {
    0.1
}
fn default_lms_length() -> usize {
    1 << 9
}
fn default_step() -> f64 {
    1e-4
}
fn default_iterations() -> u64 {
    1 << 22
}
fn default_training() -> usize {
    1 << 18
}
fn default_test_amplitude() -> f64 {
    0.9
}
fn design_filter() -> ReferenceFilter {
    ReferenceFilter::Design
}
fn default_dc_gains() -> Vec<f64> {
    vec![20.0, 500.0, 1e4]
}
fn default_gbwp_ratios() -> Vec<f64> {
    vec![18.0, 100.0, 750.0]
}

macro_rules! section_default {
    ($($t:ty),*) => {$(
        impl Default for $t {
            fn default() -> Self {
                toml::from_str("").expect("all fields have defaults")
            }
        }
    )*};
}
section_default!(InputConfig, EstimatorConfig, AnalysisConfig, MonteCarloConfig, CalibrationConfig, GbwpConfig);

impl ExperimentConfig {
    /// Parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::ConfigNotFound(path.display().to_string()))
            }
            Err(e) => return Err(Error::Config(format!("{}: {e}", path.display()))),
        };
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// A config for the given order and OSR at unit clock.
    pub fn new(order: usize, osr: usize) -> Self {
        toml::from_str(&format!("[design]\norder = {order}\nosr = {osr}\nf_s = 1.0\n")).expect("valid template")
    }

    pub fn design(&self) -> Result<LeapfrogDesign> {
        let d = &self.design;
        match (d.f_s, d.omega_b) {
            (Some(f_s), None) => LeapfrogDesign::from_sample_rate(d.order, d.osr, f_s),
            (None, Some(w)) => LeapfrogDesign::new(d.order, d.osr, w),
            _ => Err(Error::Config("give exactly one of design.f_s and design.omega_b".into())),
        }
    }

    /// Notch positions (Hz) for nominal sweeps.
    pub fn notches(&self) -> Result<Vec<f64>> {
        let d = self.design()?;
        Ok(match &self.design.notches {
            Some(v) => v.clone(),
            None => (0..d.osr).map(|j| (j as f64 + 0.5) * d.f_s / (2.0 * d.osr as f64)).collect(),
        })
    }

    pub fn montecarlo_notch(&self) -> Result<f64> {
        Ok(self.montecarlo.notch.unwrap_or(self.design()?.f_s / 8.0))
    }

    pub fn calibration_notch(&self) -> Result<f64> {
        Ok(self.calibration.notch.unwrap_or(5.0 * self.design()?.f_s / 16.0))
    }

    /// Simulated periods for a spectrum estimated with `taps`-long filters.
    pub fn periods(&self, taps: usize) -> usize {
        let a = &self.analysis;
        (a.segments + 1) * a.nfft / 2 + a.warmup + taps
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let d = self.design()?;
        let nyquist = d.f_s / 2.0;
        let in_range = |f: f64| f > 0.0 && f < nyquist;
        if let Some(v) = &self.design.notches {
            if v.is_empty() && !self.design.lowpass_baseline {
                return bad("no notch positions and no low-pass baseline".into());
            }
            if let Some(f) = v.iter().find(|&&f| !in_range(f)) {
                return bad(format!("notch {f} Hz must lie in (0, f_s/2 = {nyquist})"));
            }
        }
        for (name, f) in [("montecarlo.notch", self.montecarlo.notch), ("calibration.notch", self.calibration.notch)] {
            if let Some(f) = f {
                if !in_range(f) {
                    return bad(format!("{name} = {f} Hz must lie in (0, f_s/2 = {nyquist})"));
                }
            }
        }
        if !(self.design.tau_dc >= 0.0 && self.design.tau_dc < d.t_s) {
            return bad("design.tau_dc must lie in [0, T_s)".into());
        }
        if !(self.input.amplitude > 0.0) || !(self.analysis.full_scale > 0.0) {
            return bad("amplitudes must be positive".into());
        }
        let a = &self.analysis;
        if !a.nfft.is_power_of_two() || a.nfft < 64 || a.segments == 0 {
            return bad("analysis.nfft must be a power of two ≥ 64 and segments ≥ 1".into());
        }
        let e = &self.estimator;
        if !e.length.is_power_of_two() || e.length < 8 {
            return bad("estimator.length must be a power of two ≥ 8".into());
        }
        if self.montecarlo.trials == 0 {
            return bad("montecarlo.trials must be at least 1".into());
        }
        if !(0.0..0.5).contains(&self.montecarlo.relative_bound) {
            return bad("montecarlo.relative_bound must lie in [0, 0.5)".into());
        }
        let c = &self.calibration;
        if !(c.reference_ratio > 0.0 && c.reference_ratio <= 1.0) {
            return bad("calibration.reference_ratio must lie in (0, 1]".into());
        }
        if !c.length.is_power_of_two() || c.length < 8 || c.training_periods < c.length {
            return bad("calibration.length must be a power of two ≥ 8 and ≤ training_periods".into());
        }
        if !(c.step > 0.0 && c.step.is_finite()) || !(c.test_amplitude > 0.0) {
            return bad("calibration.step and test_amplitude must be positive".into());
        }
        let g = &self.gbwp;
        if g.dc_gains.is_empty() || g.gbwp_ratios.is_empty() {
            return bad("op-amp grid must be non-empty".into());
        }
        if g.dc_gains.iter().chain(&g.gbwp_ratios).any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("op-amp grid values must be positive".into());
        }
        Ok(())
    }

    /// Op-amp DC gain from a multiple of `OSR/π`.
    pub fn dc_gain(&self, multiple: f64) -> f64 {
        multiple * self.design.osr as f64 / PI
    }
}
