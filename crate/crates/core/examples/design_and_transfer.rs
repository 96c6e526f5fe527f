//! Leapfrog design, quadrature control constants, component values and the
//! signal/noise transfer of the nominal quadrature frontend.

use cbadc::estimator::eta_frequency;
use cbadc::prelude::*;
use std::f64::consts::PI;

fn main() -> Result<(), Error> {
    let d = LeapfrogDesign::from_sample_rate(6, 4, 2f64.powi(31))?;
    println!("N = {}, OSR = {}, f_s = {:.4e} Hz, f_B = {:.4e} Hz", d.order, d.osr, d.f_s, d.f_b());
    println!("β = {:.4e} 1/s, α = {:.4e} 1/s", d.beta, d.alpha);

    let f_n = 5.0 / 16.0 * d.f_s;
    let w_n = 2.0 * PI * f_n;
    let p = derive_control_params(d.beta, w_n, 0.0, 0.0)?;
    println!("κφ = {:.4e}, κ̄φ = {:.4e}, κ̃φ = {:.4}, κ̄̃φ = {:.4}", p.kappa_phi, p.bar_kappa_phi, p.tilde_kappa_phi, p.bar_tilde_kappa_phi);

    // integrating capacitors of 1 pF
    let c = 1e-12;
    println!(
        "R_β = {:.1} Ω, R_κ = {:.1} Ω, R_ωn = {:.1} Ω",
        1.0 / (d.beta * c),
        1.0 / (p.control_gain() * c),
        1.0 / (w_n * c)
    );

    let f = Frontend::quadrature(&d, w_n, 0.0, 0.0)?;
    let f_b = d.f_b();
    let freqs: Vec<f64> = (0..=8).map(|i| f_n - f_b + 0.25 * f_b * i as f64).collect();
    let shapes = stf_ntf(&f, &freqs)?;
    println!("\n{:>14}  {:>9}  {:>9}", "f (Hz)", "STF dB", "NTF dB");
    for ((f, s), n) in shapes.freqs.iter().zip(&shapes.stf_db).zip(&shapes.ntf_db) {
        println!("{f:>14.5e}  {s:>9.3}  {n:>9.3}");
    }
    let edge = stf_ntf(&f, &[eta_frequency(&f) / (2.0 * PI)])?;
    println!("STF at the band edge: {:.3} dB", edge.stf_db[0]);
    Ok(())
}
