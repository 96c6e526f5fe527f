//! Simulates a quadrature frontend with a full-scale tone, reports the state
//! suprema and stores the control trace.

use cbadc::prelude::*;
use cbadc::simulator::max_state_norm;
use std::f64::consts::PI;

fn main() -> Result<(), Error> {
    let d = LeapfrogDesign::from_sample_rate(6, 8, 1.0)?;
    let f_n = d.f_s / 8.0;
    let f = Frontend::quadrature(&d, 2.0 * PI * f_n, 0.0, 0.0)?;
    let input = InputSpec::quadrature_tone(1.0, f_n - d.f_b() / 4.0);
    let periods = 1 << 16;
    let run = simulate(&f, &input, periods, &SimulationOptions::default().recording(16))?;

    let states = run.states.expect("recording enabled");
    let sup = max_state_norm(&states)?;
    println!("{periods} periods, {} channels", run.trace.n_channels());
    for (i, s) in sup.iter().enumerate() {
        println!("pair {i}: sup |x| = {s:.4} (full scale 1)");
    }

    let path = std::env::temp_dir().join("cbadc_quadrature.trace");
    run.trace.save(&path)?;
    let back = ControlTrace::load(&path)?;
    assert_eq!(back, run.trace);
    println!("trace written to {}", path.display());
    Ok(())
}
