//! Locates the notch from the analytic transfer functions, nominally and
//! under component mismatch.

use cbadc::prelude::*;
use cbadc::system::{perturb, PerturbationSpec};
use std::f64::consts::PI;

fn main() -> Result<(), Error> {
    let d = LeapfrogDesign::from_sample_rate(6, 8, 1.0)?;
    let f_n = 3.0 * d.f_s / 32.0;
    let nominal = Frontend::quadrature(&d, 2.0 * PI * f_n, 0.0, 0.0)?;
    let e = estimate_notch(&nominal, 4001)?;
    println!("nominal: f_n = {f_n:.6}, estimate {:.6} (grid step {:.2e})", e.frequency, e.grid_step);

    for seed in 0..5 {
        let f = perturb(&nominal, &PerturbationSpec::all(0.05, seed))?;
        let e = estimate_notch(&f, 4001)?;
        println!("mismatch seed {seed}: estimate / f_n = {:.4}", e.frequency / f_n);
    }
    Ok(())
}
