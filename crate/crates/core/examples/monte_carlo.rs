//! A small Monte Carlo over component mismatch, using the harness with a
//! reduced trial count.

use cbadc::harness::{run_montecarlo, FrontendKind};
use cbadc::prelude::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::from_toml(
        r#"
        seed = 11

        [design]
        order = 6
        osr = 8
        f_s = 1.0

        [estimator]
        length = 1024

        [analysis]
        nfft = 8192
        segments = 4

        [montecarlo]
        trials = 8
        relative_bound = 0.05
        "#,
    )?;
    let out = std::env::temp_dir().join("cbadc_montecarlo");
    let report = run_montecarlo(&cfg, &out)?;
    for kind in [FrontendKind::Quadrature, FrontendKind::Lowpass] {
        println!("{kind:?}: {} of {} unstable", report.unstable(kind), report.of(kind).count());
        for t in report.of(kind) {
            let fmt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |x| format!("{x:.p$}"));
            println!(
                "  trial {:>2}: SNR {} dB (Δ {} dB), notch ratio {}",
                t.trial,
                fmt(t.snr_db, 2),
                fmt(t.snr_delta_db, 2),
                fmt(t.notch_ratio, 4)
            );
        }
    }
    println!("artifacts in {}", out.display());
    Ok(())
}
