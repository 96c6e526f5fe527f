use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use super::config::{EstimatorKind, ExperimentConfig, FrontendKind, ReferenceFilter};
use super::{num, opt, write_csv};
use crate::analysis::{
    conversion_band, estimate_notch, estimate_notch_from_spectrum, psd_of, snr_in_band, NotchStrategy, Spectrum,
};
use crate::estimator::{
    estimate_full_rate, eta_squared, lms_calibrate, reference_filter_h0, wiener_filter_bank, FirFilterBank, LmsOptions,
    WienerOptions,
};
use crate::numerics::AmplitudePoint;
use crate::simulator::{simulate, ControlTrace, InputSpec, SimulationOptions};
use crate::system::{perturb, Frontend, OpAmp, PerturbationSpec};
use crate::{Error, Result};

/// Snaps `f` to the nearest multiple of `df`; returns `(snapped, snapped − f)`.
pub fn snap_to_bin(f: f64, df: f64) -> (f64, f64) {
    let s = (f / df).round() * df;
    (s, s - f)
}

/// Default test tone (Hz) before snapping: `ω_B/(4π)` low-pass,
/// `f_n − ω_B/(8π)` quadrature.
pub fn test_tone(frontend: &Frontend) -> f64 {
    let w_b = frontend.design().omega_b;
    if frontend.is_quadrature() {
        frontend.omega_n() / (2.0 * PI) - w_b / (8.0 * PI)
    } else {
        w_b / (4.0 * PI)
    }
}

fn wiener_options(cfg: &ExperimentConfig) -> WienerOptions {
    WienerOptions {
        length: cfg.estimator.length,
        aliases: cfg.estimator.aliases,
        window: cfg.estimator.window,
        eta_squared: None,
    }
}

fn frontend_at(cfg: &ExperimentConfig, notch: Option<f64>) -> Result<Frontend> {
    let d = cfg.design()?;
    match notch {
        None => Frontend::lowpass(&d),
        Some(f_n) => Frontend::quadrature(&d, 2.0 * PI * f_n, cfg.design.phi_kappa, cfg.design.tau_dc),
    }
}

/// Spectrum and in-band SNR of one estimate.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub spectrum: Spectrum,
    pub snr_db: f64,
    /// Hz, after snapping.
    pub tone: f64,
}

/// Simulates `frontend` with a tone of `amplitude` at `tone` Hz (snapped to
/// the analysis grid), filters with `bank` at full rate and measures the SNR.
pub fn measure(
    cfg: &ExperimentConfig,
    frontend: &Frontend,
    bank: &FirFilterBank,
    amplitude: f64,
    tone: f64,
    seed: u64,
) -> Result<Measurement> {
    let a = &cfg.analysis;
    let df = frontend.design().f_s / a.nfft as f64;
    let (tone, _) = snap_to_bin(tone, df);
    let input = InputSpec::tone_for(frontend, amplitude, tone).with_phase(cfg.input.phase);
    let run = simulate(frontend, &input, cfg.periods(bank.len()), &SimulationOptions::with_seed(seed))?;
    measure_trace(cfg, frontend, &run.trace, bank, tone)
}

fn measure_trace(
    cfg: &ExperimentConfig,
    frontend: &Frontend,
    trace: &ControlTrace,
    bank: &FirFilterBank,
    tone: f64,
) -> Result<Measurement> {
    let a = &cfg.analysis;
    let est = estimate_full_rate(trace, bank)?.skip(a.warmup);
    let spectrum = psd_of(&est, a.nfft, a.full_scale)?;
    let snr_db = snr_in_band(&spectrum, conversion_band(frontend), tone)?;
    Ok(Measurement { spectrum, snr_db, tone })
}

// ---------------------------------------------------------------- calibration

/// Fixed reference filter `h₀` for a frontend that carries reference channels.
///
/// Designed filters are scaled by the reference ratio so the calibrated
/// estimate lands near the input's scale.
pub fn reference_h0(cfg: &ExperimentConfig, frontend: &Frontend) -> Result<Vec<Complex64>> {
    let c = &cfg.calibration;
    let ratio = frontend
        .reference_ratio()
        .ok_or_else(|| Error::InvalidArgument("frontend has no reference channels".into()))?;
    match c.reference_filter {
        ReferenceFilter::Wiener => {
            let bank = wiener_filter_bank(
                frontend,
                &WienerOptions {
                    length: c.length,
                    ..wiener_options(cfg)
                },
            )?;
            let t = &bank.taps[0];
            Ok((0..c.length)
                .map(|j| Complex64::new(t[0][j], if t.len() > 1 { t[1][j] } else { 0.0 }))
                .collect())
        }
        ReferenceFilter::Design => {
            let d = frontend.design();
            let f_b = d.f_b();
            let center = frontend.omega_n() / (2.0 * PI);
            let mut spec = vec![AmplitudePoint::new(center, 0.0)];
            for (off, db) in [(0.5 * f_b, -3.0), (0.525 * f_b, -20.0)] {
                spec.push(AmplitudePoint::new(center + off, db));
                if frontend.is_quadrature() {
                    spec.push(AmplitudePoint::new(center - off, db));
                }
            }
            if frontend.is_quadrature() {
                spec.push(AmplitudePoint::new(0.0, f64::NEG_INFINITY));
            }
            spec.push(AmplitudePoint::new(d.f_s / 2.0, f64::NEG_INFINITY));
            let fir = reference_filter_h0(&spec, c.length, d.f_s)?;
            Ok(fir.taps.iter().map(|t| t * ratio).collect())
        }
    }
}

/// Trains the filters of `frontend` (which must carry reference channels)
/// on a reference-only run seeded with `seed`.
pub fn calibrate(cfg: &ExperimentConfig, frontend: &Frontend, seed: u64) -> Result<(FirFilterBank, f64)> {
    let c = &cfg.calibration;
    let h0 = reference_h0(cfg, frontend)?;
    let train = simulate(frontend, &InputSpec::reference_only(), c.training_periods, &SimulationOptions::with_seed(seed))?;
    let mut opts = LmsOptions::new(c.length, c.step, c.iterations);
    opts.multiplication_free = c.multiplication_free;
    let res = lms_calibrate(&train.trace, &h0, &opts)?;
    let mut bank = res.bank;
    bank.osr = frontend.design().osr;
    Ok((bank, res.mse))
}

/// Calibrates and then measures on a test tone of `calibration.test_amplitude`
/// at `center + ω_B/(8π)`, with the reference still running.
pub fn calibrated_snr(cfg: &ExperimentConfig, frontend: &Frontend, seed: u64) -> Result<(FirFilterBank, f64, Measurement)> {
    let (bank, mse) = calibrate(cfg, frontend, seed)?;
    let tone = frontend.omega_n() / (2.0 * PI) + frontend.design().omega_b / (8.0 * PI);
    let m = measure(cfg, frontend, &bank, cfg.calibration.test_amplitude, tone, seed.wrapping_add(1))?;
    Ok((bank, mse, m))
}

// ---------------------------------------------------------------- nominal

#[derive(Debug, Clone)]
pub struct NominalRow {
    /// `lowpass` or `q<j>`.
    pub position: String,
    /// Hz; `None` for the low-pass baseline.
    pub f_n: Option<f64>,
    pub snap_offset: f64,
    pub measurement: Measurement,
    pub notch_estimate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct NominalReport {
    pub rows: Vec<NominalRow>,
    pub outputs: Vec<PathBuf>,
}

fn nominal_position(cfg: &ExperimentConfig, position: String, notch: Option<f64>) -> Result<NominalRow> {
    let plain = frontend_at(cfg, notch)?;
    let df = plain.design().f_s / cfg.analysis.nfft as f64;
    let (_, snap_offset) = snap_to_bin(test_tone(&plain), df);
    let measurement = match cfg.estimator.kind {
        EstimatorKind::Wiener => {
            let bank = wiener_filter_bank(&plain, &wiener_options(cfg))?;
            measure(cfg, &plain, &bank, cfg.input.amplitude, test_tone(&plain), cfg.seed)?
        }
        EstimatorKind::Calibrated => {
            let f = plain.with_reference(cfg.calibration.reference_ratio)?;
            let (bank, _) = calibrate(cfg, &f, cfg.seed)?;
            measure(cfg, &f, &bank, cfg.input.amplitude, test_tone(&f), cfg.seed.wrapping_add(1))?
        }
    };
    let notch_estimate = match notch {
        Some(_) => Some(estimate_notch(&plain, cfg.analysis.notch_points)?.frequency),
        None => None,
    };
    Ok(NominalRow {
        position,
        f_n: notch,
        snap_offset,
        measurement,
        notch_estimate,
    })
}

/// Nominal SNR at every notch position (plus the low-pass baseline).
/// Writes `psd.csv` and `snr.csv`; any instability fails the run.
pub fn run_nominal(cfg: &ExperimentConfig, out: &Path) -> Result<NominalReport> {
    let mut positions: Vec<(String, Option<f64>)> = Vec::new();
    if cfg.design.lowpass_baseline {
        positions.push(("lowpass".into(), None));
    }
    for (j, f) in cfg.notches()?.into_iter().enumerate() {
        positions.push((format!("q{j}"), Some(f)));
    }
    let rows = positions
        .into_par_iter()
        .map(|(p, f)| nominal_position(cfg, p, f))
        .collect::<Result<Vec<_>>>()?;

    std::fs::create_dir_all(out)?;
    let mut psd_rows = Vec::new();
    for r in &rows {
        let s = &r.measurement.spectrum;
        for (f, p) in s.freqs.iter().zip(&s.psd_db) {
            psd_rows.push(vec![num(*f), num(*p), r.position.clone(), opt(r.f_n)]);
        }
    }
    let psd_path = out.join("psd.csv");
    write_csv(&psd_path, &["f", "psd_dbfs", "position", "f_n"], &psd_rows)?;
    let snr_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.position.clone(),
                opt(r.f_n),
                num(r.measurement.tone),
                num(r.snap_offset),
                num(r.measurement.snr_db),
                opt(r.notch_estimate),
            ]
        })
        .collect();
    let snr_path = out.join("snr.csv");
    write_csv(
        &snr_path,
        &["position", "f_n", "f_signal", "snap_offset", "snr_db", "notch_estimate"],
        &snr_rows,
    )?;
    Ok(NominalReport {
        rows,
        outputs: vec![psd_path, snr_path],
    })
}

// ---------------------------------------------------------------- Monte Carlo

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub frontend: FrontendKind,
    pub trial: usize,
    pub seed: u64,
    pub stable: bool,
    pub snr_db: Option<f64>,
    pub snr_delta_db: Option<f64>,
    pub notch_ratio: Option<f64>,
    pub notch_strategy: Option<NotchStrategy>,
    /// Any non-instability failure, recorded rather than raised.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub nominal_snr: Vec<(FrontendKind, f64)>,
    pub trials: Vec<TrialResult>,
    pub outputs: Vec<PathBuf>,
}

impl MonteCarloReport {
    pub fn of(&self, kind: FrontendKind) -> impl Iterator<Item = &TrialResult> {
        self.trials.iter().filter(move |t| t.frontend == kind)
    }

    pub fn unstable(&self, kind: FrontendKind) -> usize {
        self.of(kind).filter(|t| !t.stable).count()
    }
}

fn mc_trial(cfg: &ExperimentConfig, nominal: &Frontend, nominal_snr: f64, kind: FrontendKind, trial: usize) -> TrialResult {
    let seed = cfg.seed ^ trial as u64;
    let mut r = TrialResult {
        frontend: kind,
        trial,
        seed,
        stable: true,
        snr_db: None,
        snr_delta_db: None,
        notch_ratio: None,
        notch_strategy: None,
        error: None,
    };
    let spec = PerturbationSpec {
        relative_bound: cfg.montecarlo.relative_bound,
        targets: cfg.montecarlo.targets.iter().copied().collect(),
        seed,
    };
    let outcome = (|| -> Result<Measurement> {
        let f = perturb(nominal, &spec)?;
        // true-model filter, but the bandwidth (η) stays at its design value
        let opts = WienerOptions {
            eta_squared: Some(eta_squared(nominal)?),
            ..wiener_options(cfg)
        };
        let bank = wiener_filter_bank(&f, &opts)?;
        let m = measure(cfg, &f, &bank, cfg.input.amplitude, test_tone(nominal), seed)?;
        if kind == FrontendKind::Quadrature {
            let f_n = nominal.omega_n() / (2.0 * PI);
            let est = estimate_notch(&f, cfg.analysis.notch_points).or_else(|_| {
                let band = conversion_band(nominal);
                estimate_notch_from_spectrum(&m.spectrum, band, Some(m.tone), 3)
            })?;
            r.notch_ratio = Some(est.frequency / f_n);
            r.notch_strategy = Some(est.strategy);
        }
        Ok(m)
    })();
    match outcome {
        Ok(m) => {
            r.snr_db = Some(m.snr_db);
            r.snr_delta_db = Some(m.snr_db - nominal_snr);
        }
        Err(Error::Unstable { .. }) => r.stable = false,
        Err(e) => r.error = Some(e.to_string()),
    }
    r
}

/// Component-mismatch Monte Carlo with true-model Wiener filters.
/// Writes `snr_hist.csv`, `notch_hist.csv` and `instability.csv`.
pub fn run_montecarlo(cfg: &ExperimentConfig, out: &Path) -> Result<MonteCarloReport> {
    let mut nominal_snr = Vec::new();
    let mut trials = Vec::new();
    for &kind in &cfg.montecarlo.frontends {
        let notch = match kind {
            FrontendKind::Lowpass => None,
            FrontendKind::Quadrature => Some(cfg.montecarlo_notch()?),
        };
        let nominal = frontend_at(cfg, notch)?;
        let bank = wiener_filter_bank(&nominal, &wiener_options(cfg))?;
        let snr = measure(cfg, &nominal, &bank, cfg.input.amplitude, test_tone(&nominal), cfg.seed)?.snr_db;
        nominal_snr.push((kind, snr));
        let mut results: Vec<TrialResult> = (0..cfg.montecarlo.trials)
            .into_par_iter()
            .map(|t| mc_trial(cfg, &nominal, snr, kind, t))
            .collect();
        trials.append(&mut results);
    }

    std::fs::create_dir_all(out)?;
    let kind_name = |k: FrontendKind| match k {
        FrontendKind::Lowpass => "lowpass",
        FrontendKind::Quadrature => "quadrature",
    };
    let snr_rows: Vec<Vec<String>> = trials
        .iter()
        .map(|t| {
            vec![
                t.trial.to_string(),
                kind_name(t.frontend).into(),
                t.seed.to_string(),
                t.stable.to_string(),
                opt(t.snr_db),
                opt(t.snr_delta_db),
                t.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let notch_rows: Vec<Vec<String>> = trials
        .iter()
        .filter(|t| t.frontend == FrontendKind::Quadrature)
        .map(|t| {
            vec![
                t.trial.to_string(),
                t.seed.to_string(),
                opt(t.notch_ratio),
                t.notch_strategy
                    .map(|s| match s {
                        NotchStrategy::NtfBandAverage => "ntf_band_average",
                        NotchStrategy::Spectrum => "spectrum",
                    })
                    .unwrap_or_default()
                    .into(),
            ]
        })
        .collect();
    let report = MonteCarloReport {
        nominal_snr,
        trials,
        outputs: vec![],
    };
    let inst_rows: Vec<Vec<String>> = cfg
        .montecarlo
        .frontends
        .iter()
        .map(|&k| {
            let n = report.of(k).count();
            let u = report.unstable(k);
            vec![kind_name(k).into(), n.to_string(), u.to_string(), num(u as f64 / n as f64)]
        })
        .collect();
    let paths = [out.join("snr_hist.csv"), out.join("notch_hist.csv"), out.join("instability.csv")];
    write_csv(
        &paths[0],
        &["trial", "frontend", "seed", "stable", "snr_db", "snr_delta_db", "error"],
        &snr_rows,
    )?;
    write_csv(&paths[1], &["trial", "seed", "notch_ratio", "strategy"], &notch_rows)?;
    write_csv(&paths[2], &["frontend", "trials", "unstable", "rate"], &inst_rows)?;
    Ok(MonteCarloReport {
        outputs: paths.to_vec(),
        ..report
    })
}

// ---------------------------------------------------------------- GBWP sweep

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Ok,
    Diverged,
    Unstable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbwpPoint {
    /// Multiple of `OSR/π`; `None` for ideal integrators.
    pub dc_gain: Option<f64>,
    /// Multiple of `f_n + ω_B/(4π)`.
    pub gbwp_ratio: Option<f64>,
    pub status: PointStatus,
    pub mse: Option<f64>,
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GbwpReport {
    pub points: Vec<GbwpPoint>,
    pub outputs: Vec<PathBuf>,
}

/// Calibrated SNR for one op-amp grid point (`None` = ideal integrators) at
/// the calibration notch.
pub fn gbwp_point(cfg: &ExperimentConfig, grid: Option<(f64, f64)>) -> Result<GbwpPoint> {
    let f_n = cfg.calibration_notch()?;
    let mut f = frontend_at(cfg, Some(f_n))?;
    if let Some((dc, ratio)) = grid {
        // the ratio multiplies a frequency in Hz; the op-amp takes rad/s
        let gbwp = 2.0 * PI * ratio * (f_n + f.design().omega_b / (4.0 * PI));
        f = f.with_opamp(OpAmp::from_gbwp(cfg.dc_gain(dc), gbwp)?)?;
    }
    let f = f.with_reference(cfg.calibration.reference_ratio)?;
    let mut p = GbwpPoint {
        dc_gain: grid.map(|g| g.0),
        gbwp_ratio: grid.map(|g| g.1),
        status: PointStatus::Ok,
        mse: None,
        snr_db: None,
    };
    match calibrated_snr(cfg, &f, cfg.seed) {
        Ok((_, mse, m)) => {
            p.mse = Some(mse);
            p.snr_db = Some(m.snr_db);
        }
        Err(Error::Diverged { .. }) => p.status = PointStatus::Diverged,
        Err(Error::Unstable { .. }) => p.status = PointStatus::Unstable,
        Err(e) => return Err(e),
    }
    Ok(p)
}

/// Calibrated SNR over the op-amp grid plus an ideal-integrator reference
/// row. Writes `snr_vs_gbwp.csv`.
pub fn run_gbwp_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<GbwpReport> {
    let mut grid: Vec<Option<(f64, f64)>> = vec![None];
    for &dc in &cfg.gbwp.dc_gains {
        for &g in &cfg.gbwp.gbwp_ratios {
            grid.push(Some((dc, g)));
        }
    }
    let points = grid
        .into_par_iter()
        .map(|g| gbwp_point(cfg, g))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out)?;
    let f_n = cfg.calibration_notch()?;
    let unit = f_n + cfg.design()?.omega_b / (4.0 * PI);
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                opt(p.dc_gain),
                opt(p.dc_gain.map(|d| cfg.dc_gain(d))),
                opt(p.gbwp_ratio),
                opt(p.gbwp_ratio.map(|g| g * unit)),
                match p.status {
                    PointStatus::Ok => "ok",
                    PointStatus::Diverged => "diverged",
                    PointStatus::Unstable => "unstable",
                }
                .into(),
                opt(p.mse),
                opt(p.snr_db),
            ]
        })
        .collect();
    let path = out.join("snr_vs_gbwp.csv");
    write_csv(
        &path,
        &["dc_gain_osr_over_pi", "k_a", "gbwp_ratio", "gbwp_hz", "status", "mse", "snr_db"],
        &rows,
    )?;
    Ok(GbwpReport {
        points,
        outputs: vec![path],
    })
}

// ---------------------------------------------------------------- calibrate / psd

#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub bank: FirFilterBank,
    pub mse: f64,
    pub calibrated: Measurement,
    /// Same-length Wiener bank on the same test run.
    pub wiener: Measurement,
    pub outputs: Vec<PathBuf>,
}

/// LMS calibration of the ideal quadrature frontend at the calibration
/// notch, compared with the same-length Wiener bank on the same test run.
/// Writes `filters.fir`, `calibrated_psd.csv` and `calibration.csv`.
pub fn run_calibrate(cfg: &ExperimentConfig, out: &Path) -> Result<CalibrationReport> {
    let f = frontend_at(cfg, Some(cfg.calibration_notch()?))?.with_reference(cfg.calibration.reference_ratio)?;
    let (bank, mse) = calibrate(cfg, &f, cfg.seed)?;
    let c = &cfg.calibration;
    let df = f.design().f_s / cfg.analysis.nfft as f64;
    let (tone, _) = snap_to_bin(f.omega_n() / (2.0 * PI) + f.design().omega_b / (8.0 * PI), df);
    let input = InputSpec::tone_for(&f, c.test_amplitude, tone);
    let test = simulate(&f, &input, cfg.periods(c.length), &SimulationOptions::with_seed(cfg.seed.wrapping_add(1)))?;
    let calibrated = measure_trace(cfg, &f, &test.trace, &bank, tone)?;
    let wb = wiener_filter_bank(
        &f,
        &WienerOptions {
            length: c.length,
            ..wiener_options(cfg)
        },
    )?;
    let wiener = measure_trace(cfg, &f, &test.trace, &wb, tone)?;

    std::fs::create_dir_all(out)?;
    let bank_path = out.join("filters.fir");
    bank.save(&bank_path)?;
    let psd_path = out.join("calibrated_psd.csv");
    let s = &calibrated.spectrum;
    let rows: Vec<Vec<String>> = s
        .freqs
        .iter()
        .zip(&s.psd_db)
        .zip(&wiener.spectrum.psd_db)
        .map(|((f, p), w)| vec![num(*f), num(*p), num(*w)])
        .collect();
    write_csv(&psd_path, &["f", "psd_dbfs", "wiener_psd_dbfs"], &rows)?;
    let sum_path = out.join("calibration.csv");
    write_csv(
        &sum_path,
        &["estimator", "length", "step", "iterations", "mse", "snr_db"],
        &[
            vec![
                "calibrated".into(),
                c.length.to_string(),
                num(c.step),
                c.iterations.to_string(),
                num(mse),
                num(calibrated.snr_db),
            ],
            vec![
                "wiener".into(),
                c.length.to_string(),
                String::new(),
                String::new(),
                String::new(),
                num(wiener.snr_db),
            ],
        ],
    )?;
    Ok(CalibrationReport {
        bank,
        mse,
        calibrated,
        wiener,
        outputs: vec![bank_path, psd_path, sum_path],
    })
}

/// PSD of a stored trace filtered by a stored bank. Writes `psd.csv`.
pub fn run_psd(cfg: &ExperimentConfig, trace: &Path, bank: &Path, out: &Path) -> Result<(Spectrum, Vec<PathBuf>)> {
    let trace = ControlTrace::load(trace)?;
    let bank = FirFilterBank::load(bank)?;
    let a = &cfg.analysis;
    let est = estimate_full_rate(&trace, &bank)?.skip(a.warmup);
    let spectrum = psd_of(&est, a.nfft, a.full_scale)?;
    std::fs::create_dir_all(out)?;
    let path = out.join("psd.csv");
    let rows: Vec<Vec<String>> = spectrum
        .freqs
        .iter()
        .zip(&spectrum.psd_db)
        .map(|(f, p)| vec![num(*f), num(*p)])
        .collect();
    write_csv(&path, &["f", "psd_dbfs"], &rows)?;
    Ok((spectrum, vec![path]))
}
