//! End to end: simulate, reconstruct with Wiener filters and measure the
//! in-band SNR for the low-pass baseline and one quadrature notch.

use cbadc::harness::test_tone;
use cbadc::prelude::*;
use std::f64::consts::PI;

fn run(f: &Frontend, label: &str) -> Result<(), Error> {
    let nfft = 1 << 14;
    let bank = wiener_filter_bank(f, &WienerOptions::new(1 << 10))?;
    let df = f.design().f_s / nfft as f64;
    let tone = (test_tone(f) / df).round() * df;
    let input = InputSpec::tone_for(f, 0.5, tone);
    let sim = simulate(f, &input, 8 * nfft + bank.len(), &SimulationOptions::default())?;
    let est = estimate_full_rate(&sim.trace, &bank)?.skip(bank.len());
    let spec = psd_of(&est, nfft, 1.0)?;
    let band = conversion_band(f);
    let snr = snr_in_band(&spec, band, tone)?;
    let peak = spec.psd_db[spec.bin_of(tone)];
    println!("{label:>10}: band [{:.4}, {:.4}] Hz, tone {tone:.5} Hz at {peak:.1} dBFS, SNR {snr:.1} dB", band.0, band.1);
    Ok(())
}

fn main() -> Result<(), Error> {
    let d = LeapfrogDesign::from_sample_rate(6, 8, 1.0)?;
    run(&Frontend::lowpass(&d)?, "low-pass")?;
    run(&Frontend::quadrature(&d, 2.0 * PI * 3.0 * d.f_s / 32.0, 0.0, 0.0)?, "quadrature")?;
    Ok(())
}
