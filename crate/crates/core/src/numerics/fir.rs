//! Linear-phase FIR design from a list of amplitude points.
//!
//! The desired amplitude is interpolated (in dB) between the given points and
//! fitted with a zero-phase cosine series by weighted least squares on a dense
//! grid, with the points themselves carrying a large weight. Specifications
//! whose peak sits away from 0 Hz are designed as a low-pass prototype on the
//! folded offsets and then modulated to the peak frequency, which yields
//! complex taps.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{Error, Result};

/// Finite targets must be met within this many dB.
pub const FINITE_TOLERANCE_DB: f64 = 2.0;
/// `-∞` targets must be at or below this level.
pub const STOPBAND_CEILING_DB: f64 = -40.0;

// dB level standing in for -∞ while interpolating the desired response
const FLOOR_DB: f64 = -150.0;
const POINT_WEIGHT: f64 = 200.0;
const GRID_FACTOR: usize = 8;

/// One point of an amplitude specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudePoint {
    /// Hz
    pub frequency: f64,
    /// dB; `f64::NEG_INFINITY` requests a stopband.
    pub gain_db: f64,
}

impl AmplitudePoint {
    pub fn new(frequency: f64, gain_db: f64) -> Self {
        AmplitudePoint { frequency, gain_db }
    }
}

/// Result of [`design_fir`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirDesign {
    /// `length` taps; tap `lag` is the zero-phase center.
    pub taps: Vec<Complex64>,
    pub lag: usize,
    /// Modulation frequency (Hz); 0 for real low-pass designs.
    pub center: f64,
    pub sample_rate: f64,
    pub spec: Vec<AmplitudePoint>,
}

impl FirDesign {
    /// Complex frequency response at `f` Hz, phase referenced to the center tap.
    pub fn response(&self, f: f64) -> Complex64 {
        frequency_response(&self.taps, self.lag, f, self.sample_rate)
    }

    pub fn response_db(&self, f: f64) -> f64 {
        20.0 * self.response(f).norm().log10()
    }

    pub fn real_taps(&self) -> Vec<f64> {
        self.taps.iter().map(|t| t.re).collect()
    }

    pub fn imag_taps(&self) -> Vec<f64> {
        self.taps.iter().map(|t| t.im).collect()
    }
}

/// `Σ_j taps[j]·e^{-i2πf(j-lag)/fs}`.
pub fn frequency_response(taps: &[Complex64], lag: usize, f: f64, sample_rate: f64) -> Complex64 {
    let w = -2.0 * PI * f / sample_rate;
    taps.iter()
        .enumerate()
        .map(|(j, t)| t * Complex64::from_polar(1.0, w * (j as f64 - lag as f64)))
        .sum()
}

fn interpolate_db(points: &[(f64, f64)], f: f64) -> f64 {
    let db = |g: f64| if g.is_finite() { g } else { FLOOR_DB };
    if f <= points[0].0 {
        return db(points[0].1);
    }
    for w in points.windows(2) {
        let ((f0, g0), (f1, g1)) = (w[0], w[1]);
        if f <= f1 {
            if f1 == f0 {
                return db(g1);
            }
            let t = (f - f0) / (f1 - f0);
            return db(g0) + t * (db(g1) - db(g0));
        }
    }
    db(points[points.len() - 1].1)
}

/// Designs `length` taps meeting `spec` at `sample_rate`.
///
/// Fails with [`Error::InfeasibleFilter`] when the fitted response misses a
/// finite target by more than 2 dB or a `-∞` target is above -40 dB.
pub fn design_fir(spec: &[AmplitudePoint], length: usize, sample_rate: f64) -> Result<FirDesign> {
    if length < 8 {
        return Err(Error::InvalidArgument(format!("need at least 8 taps, got {length}")));
    }
    if spec.is_empty() {
        return Err(Error::InvalidArgument("empty amplitude specification".into()));
    }
    if !(sample_rate > 0.0) {
        return Err(Error::InvalidArgument("sample rate must be positive".into()));
    }
    if spec.iter().any(|p| !p.frequency.is_finite() || p.gain_db.is_nan() || p.gain_db == f64::INFINITY) {
        return Err(Error::InvalidArgument("amplitude points must be finite (gain may be -inf)".into()));
    }
    let peak = spec
        .iter()
        .filter(|p| p.gain_db.is_finite())
        .max_by(|a, b| a.gain_db.total_cmp(&b.gain_db))
        .ok_or_else(|| Error::InfeasibleFilter("specification has no finite gain".into()))?;
    let center = peak.frequency;
    let nyquist = sample_rate / 2.0;

    // fold offsets from the center into [0, fs/2]
    let mut folded: Vec<(f64, f64)> = spec
        .iter()
        .map(|p| {
            let off = (p.frequency - center + nyquist).rem_euclid(sample_rate) - nyquist;
            (off.abs().min(nyquist), p.gain_db)
        })
        .collect();
    folded.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    folded.dedup_by(|later, earlier| {
        // keep the lower gain for coincident offsets
        (later.0 - earlier.0).abs() <= 1e-9 * sample_rate
    });

    let lag = length / 2;
    let half = lag - 1;
    let nbasis = half + 1;
    let grid = GRID_FACTOR * length;

    let basis_row = |omega: f64| -> Vec<f64> {
        (0..nbasis)
            .map(|k| if k == 0 { 1.0 } else { 2.0 * (k as f64 * omega).cos() })
            .collect()
    };

    let nrows = grid + 1 + folded.len();
    let mut a = DMatrix::<f64>::zeros(nrows, nbasis);
    let mut d = DVector::<f64>::zeros(nrows);
    for i in 0..=grid {
        let omega = PI * i as f64 / grid as f64;
        let f = omega / (2.0 * PI) * sample_rate;
        let row = basis_row(omega);
        for (k, v) in row.into_iter().enumerate() {
            a[(i, k)] = v;
        }
        d[i] = 10f64.powf(interpolate_db(&folded, f) / 20.0);
    }
    for (j, &(f, g)) in folded.iter().enumerate() {
        let i = grid + 1 + j;
        let omega = 2.0 * PI * f / sample_rate;
        for (k, v) in basis_row(omega).into_iter().enumerate() {
            a[(i, k)] = POINT_WEIGHT * v;
        }
        d[i] = POINT_WEIGHT * if g.is_finite() { 10f64.powf(g / 20.0) } else { 0.0 };
    }

    let ata = a.transpose() * &a;
    let atd = a.transpose() * d;
    let coeffs = ata
        .cholesky()
        .map(|c| c.solve(&atd))
        .ok_or_else(|| Error::InfeasibleFilter("least-squares system is singular".into()))?;

    let mut taps = vec![Complex64::new(0.0, 0.0); length];
    taps[lag] = Complex64::new(coeffs[0], 0.0);
    for k in 1..=half {
        taps[lag + k] = Complex64::new(coeffs[k], 0.0);
        taps[lag - k] = Complex64::new(coeffs[k], 0.0);
    }
    if center != 0.0 {
        for (j, t) in taps.iter_mut().enumerate() {
            let phase = 2.0 * PI * center * (j as f64 - lag as f64) / sample_rate;
            *t *= Complex64::from_polar(1.0, phase);
        }
    }

    let design = FirDesign {
        taps,
        lag,
        center,
        sample_rate,
        spec: spec.to_vec(),
    };
    for p in spec {
        let got = design.response_db(p.frequency);
        let ok = if p.gain_db.is_finite() {
            (got - p.gain_db).abs() <= FINITE_TOLERANCE_DB
        } else {
            got <= STOPBAND_CEILING_DB
        };
        if !ok {
            return Err(Error::InfeasibleFilter(format!(
                "response at {} Hz is {:.2} dB, target {} dB with {} taps",
                p.frequency, got, p.gain_db, length
            )));
        }
    }
    Ok(design)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_spec_gives_impulse() {
        let d = design_fir(&[AmplitudePoint::new(0.0, 0.0)], 64, 1.0).unwrap();
        for (j, t) in d.taps.iter().enumerate() {
            let want = if j == d.lag { 1.0 } else { 0.0 };
            assert!((t - Complex64::new(want, 0.0)).norm() < 1e-6, "tap {j}: {t}");
        }
    }

    #[test]
    fn lowpass_half_power_point() {
        let fs = 1.0;
        let spec = [
            AmplitudePoint::new(0.0, 0.0),
            AmplitudePoint::new(0.25 * fs, -3.0),
            AmplitudePoint::new(0.3 * fs, f64::NEG_INFINITY),
        ];
        let d = design_fir(&spec, 257, fs).unwrap();
        // dense DFT grid evaluation of the designed taps
        let nfft = 1 << 14;
        let k = nfft / 4;
        let h: Complex64 = d
            .taps
            .iter()
            .enumerate()
            .map(|(j, t)| t * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / nfft as f64))
            .sum();
        let db = 20.0 * h.norm().log10();
        assert!((db + 3.0).abs() <= 0.5, "{db}");
        assert!(d.taps.iter().all(|t| t.im == 0.0));
    }

    #[test]
    fn too_few_taps() {
        assert!(design_fir(&[AmplitudePoint::new(0.0, 0.0)], 4, 1.0).is_err());
    }

    #[test]
    fn infeasible_transition() {
        let spec = [
            AmplitudePoint::new(0.0, 0.0),
            AmplitudePoint::new(0.1, -3.0),
            AmplitudePoint::new(0.1005, f64::NEG_INFINITY),
        ];
        assert!(matches!(design_fir(&spec, 16, 1.0), Err(Error::InfeasibleFilter(_))));
    }
}
