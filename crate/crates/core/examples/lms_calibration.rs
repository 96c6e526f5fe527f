//! Trains the estimator from a reference sequence and compares it with the
//! Wiener filters of the same length.

use cbadc::harness::{calibrated_snr, measure, test_tone};
use cbadc::prelude::*;
use std::f64::consts::PI;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::from_toml(
        r#"
        seed = 3

        [design]
        order = 4
        osr = 8
        f_s = 1.0

        [analysis]
        nfft = 8192
        segments = 4

        [calibration]
        length = 256
        step = 1e-4
        iterations = 1048576
        training_periods = 65536
        reference_filter = "wiener"
        "#,
    )?;
    let d = cfg.design()?;
    let plain = Frontend::quadrature(&d, 2.0 * PI * d.f_s / 8.0, 0.0, 0.0)?;
    let f = plain.with_reference(cfg.calibration.reference_ratio)?;

    let (bank, mse, m) = calibrated_snr(&cfg, &f, cfg.seed)?;
    println!("calibrated: {} taps, final mse {mse:.3e}, SNR {:.2} dB", bank.len(), m.snr_db);

    let wiener = wiener_filter_bank(&plain, &WienerOptions::new(cfg.calibration.length))?;
    let w = measure(&cfg, &plain, &wiener, cfg.calibration.test_amplitude, test_tone(&plain), cfg.seed)?;
    println!("wiener:     {} taps, SNR {:.2} dB", wiener.len(), w.snr_db);
    Ok(())
}
