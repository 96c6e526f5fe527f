//! Calibrated SNR with finite op-amp gain and bandwidth at a few grid points.

use cbadc::harness::{gbwp_point, PointStatus};
use cbadc::prelude::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::from_toml(
        r#"
        seed = 7

        [design]
        order = 4
        osr = 8
        f_s = 1.0
        notches = [0.3125]

        [analysis]
        nfft = 8192
        segments = 4

        [calibration]
        reference_ratio = 0.1
        length = 256
        step = 1e-4
        iterations = 1048576
        training_periods = 65536
        test_amplitude = 0.9
        "#,
    )?;
    let mut grid = vec![None];
    for dc in [20.0, 1e4] {
        for ratio in [18.0, 750.0] {
            grid.push(Some((dc, ratio)));
        }
    }
    println!("{:>10} {:>8} {:>10}", "DC gain", "GBWP", "SNR dB");
    for g in grid {
        let p = gbwp_point(&cfg, g)?;
        let label = |v: Option<f64>| v.map_or("ideal".to_string(), |x| format!("{x}"));
        let snr = match p.status {
            PointStatus::Ok => format!("{:.2}", p.snr_db.unwrap_or(f64::NAN)),
            s => format!("{s:?}"),
        };
        println!("{:>10} {:>8} {:>10}", label(p.dc_gain), label(p.gbwp_ratio), snr);
    }
    Ok(())
}
