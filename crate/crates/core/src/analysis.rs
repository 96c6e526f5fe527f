//! Spectral analysis: Welch PSD in dBFS, in-band SNR and notch estimation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::estimator::{input_gain, EstimateSequence};
use crate::numerics::fft;
use crate::system::Frontend;
use crate::{Error, Result};

pub const DEFAULT_NFFT: usize = 1 << 14;

/// Averaged periodogram in dB relative to a full-scale tone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Hz; `[0, f_rate)` for complex input, `[0, f_rate/2]` for real input.
    pub freqs: Vec<f64>,
    pub psd_db: Vec<f64>,
    pub nfft: usize,
    pub window: String,
    /// volts
    pub full_scale: f64,
    pub sample_rate: f64,
    pub segments: usize,
    pub complex: bool,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.nfft as f64
    }

    /// Nearest bin to `f`, wrapping complex grids modulo the sample rate.
    pub fn bin_of(&self, f: f64) -> usize {
        let k = (f / self.bin_width()).round();
        if self.complex {
            k.rem_euclid(self.nfft as f64) as usize
        } else {
            (k.max(0.0) as usize).min(self.freqs.len() - 1)
        }
    }
}

fn hann(n: usize) -> Vec<f64> {
    // periodic: a bin-centered tone occupies exactly three bins
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Welch PSD (periodic Hann, 50 % overlap) of `x` sampled at `sample_rate`.
///
/// A bin-centered tone of amplitude `full_scale` peaks at 0 dB: `A·e^{iωt}`
/// for complex input, `A·cos(ωt)` for real input.
pub fn psd(x: &[Complex64], complex: bool, sample_rate: f64, nfft: usize, full_scale: f64) -> Result<Spectrum> {
    if nfft < 8 || !nfft.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(nfft));
    }
    if x.len() < nfft {
        return Err(Error::TooShort { len: x.len(), need: nfft });
    }
    if !(full_scale > 0.0 && sample_rate > 0.0) {
        return Err(Error::InvalidArgument("full scale and sample rate must be positive".into()));
    }
    let w = hann(nfft);
    let wsum: f64 = w.iter().sum();
    let hop = nfft / 2;
    let segments = (x.len() - nfft) / hop + 1;
    let mut acc = vec![0.0; nfft];
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    for s in 0..segments {
        let seg = &x[s * hop..s * hop + nfft];
        for ((b, v), wi) in buf.iter_mut().zip(seg).zip(&w) {
            *b = if complex { v * wi } else { Complex64::new(v.re * wi, 0.0) };
        }
        for (a, v) in acc.iter_mut().zip(fft(&buf)?) {
            *a += v.norm_sqr();
        }
    }
    let scale = if complex { 1.0 } else { 4.0 } / (wsum * wsum * full_scale * full_scale * segments as f64);
    let bins = if complex { nfft } else { nfft / 2 + 1 };
    let df = sample_rate / nfft as f64;
    Ok(Spectrum {
        freqs: (0..bins).map(|k| k as f64 * df).collect(),
        psd_db: acc[..bins].iter().map(|p| 10.0 * (p * scale).log10()).collect(),
        nfft,
        window: "hann".into(),
        full_scale,
        sample_rate,
        segments,
        complex,
    })
}

/// [`psd`] of an estimator output at its own sample rate.
pub fn psd_of(est: &EstimateSequence, nfft: usize, full_scale: f64) -> Result<Spectrum> {
    psd(&est.values, est.complex, est.sample_rate, nfft, full_scale)
}

/// Bin indices covering `[f_lo, f_hi]`, wrapping on complex grids.
fn band_bins(spec: &Spectrum, f_lo: f64, f_hi: f64) -> Vec<usize> {
    let df = spec.bin_width();
    let k_lo = (f_lo / df).ceil() as i64;
    let k_hi = (f_hi / df).floor() as i64;
    let n = spec.nfft as i64;
    let mut out = Vec::new();
    for k in k_lo..=k_hi {
        if spec.complex {
            out.push(k.rem_euclid(n) as usize);
        } else if k >= 0 && (k as usize) < spec.freqs.len() {
            out.push(k as usize);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// `10·log10(P_signal/P_noise)` inside `[f_lo, f_hi]`; the signal occupies
/// its bin and both neighbors, every other in-band bin counts as noise.
pub fn snr_in_band(spec: &Spectrum, band: (f64, f64), signal_freq: f64) -> Result<f64> {
    let (f_lo, f_hi) = band;
    if !(f_hi > f_lo) {
        return Err(Error::InvalidArgument("band must satisfy f_lo < f_hi".into()));
    }
    if signal_freq < f_lo || signal_freq > f_hi {
        return Err(Error::InvalidArgument(format!("signal at {signal_freq} Hz lies outside the band")));
    }
    let bins = band_bins(spec, f_lo, f_hi);
    let k0 = spec.bin_of(signal_freq) as i64;
    let n = spec.nfft as i64;
    let is_signal = |k: usize| {
        let d = k as i64 - k0;
        let d = if spec.complex { (d + n / 2).rem_euclid(n) - n / 2 } else { d };
        d.abs() <= 1
    };
    let lin = |k: usize| 10f64.powf(spec.psd_db[k] / 10.0);
    let (mut sig, mut noise, mut n_noise) = (0.0, 0.0, 0);
    for &k in &bins {
        if is_signal(k) {
            sig += lin(k);
        } else {
            noise += lin(k);
            n_noise += 1;
        }
    }
    if n_noise == 0 {
        return Err(Error::EmptyNoiseBand);
    }
    Ok(10.0 * (sig / noise).log10())
}

/// Conversion band of a frontend (Hz): `[0, f_B]` low-pass, `f_n ± f_B` quadrature.
pub fn conversion_band(frontend: &Frontend) -> (f64, f64) {
    let f_b = frontend.design().f_b();
    if frontend.is_quadrature() {
        let f_n = frontend.omega_n() / (2.0 * PI);
        (f_n - f_b, f_n + f_b)
    } else {
        (0.0, f_b)
    }
}

/// How [`estimate_notch`] locates the notch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotchStrategy {
    /// Center of the `2f_B` window with the lowest mean log-NTF,
    /// i.e. where the analytic noise shaping is deepest on average.
    NtfBandAverage,
    /// Argmin of a 32-bin median-smoothed noise floor of a measured spectrum.
    Spectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotchEstimate {
    /// Hz
    pub frequency: f64,
    pub strategy: NotchStrategy,
    /// Hz
    pub grid_step: f64,
}

/// Notch (band center) of a quadrature frontend from its analytic transfer function.
///
/// The grid spans the nominal `f_n ± 2f_B` with `points` samples and a
/// `2f_B` window slides over it. The raw NTF argmin is not used: every
/// undamped resonance is an exact NTF zero, so it would land on whichever
/// resonance the grid happens to hit.
pub fn estimate_notch(frontend: &Frontend, points: usize) -> Result<NotchEstimate> {
    if !frontend.is_quadrature() {
        return Err(Error::InvalidArgument("notch estimation needs a quadrature frontend".into()));
    }
    if points < 16 {
        return Err(Error::InvalidArgument("need at least 16 grid points".into()));
    }
    let f_b = frontend.design().f_b();
    let f_n = frontend.omega_n() / (2.0 * PI);
    let lo = f_n - 2.0 * f_b;
    let step = 4.0 * f_b / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
    let gain = input_gain(frontend, &grid)?;
    // the modulator shapes noise by 1/|G|; resonances are integrable log zeros
    let log_ntf: Vec<f64> = gain.iter().map(|&g| -g.max(f64::MIN_POSITIVE).ln()).collect();
    let mut prefix = vec![0.0; points + 1];
    for (i, v) in log_ntf.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let half = ((points - 1) / 4).max(1);
    let (best, _) = (half..points - half)
        .map(|c| (c, prefix[c + half + 1] - prefix[c - half]))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::NoNotch("empty grid".into()))?;
    if !log_ntf.iter().all(|v| v.is_finite()) {
        return Err(Error::NoNotch("non-finite NTF on the grid".into()));
    }
    if best == half || best == points - half - 1 {
        return Err(Error::NoNotch("band-average minimum at the edge of the search grid".into()));
    }
    Ok(NotchEstimate {
        frequency: grid[best],
        strategy: NotchStrategy::NtfBandAverage,
        grid_step: step,
    })
}

/// Notch from a measured spectrum: argmin of the median-smoothed floor
/// inside `search` (Hz), skipping `exclude` bins around `signal_freq`.
pub fn estimate_notch_from_spectrum(
    spec: &Spectrum,
    search: (f64, f64),
    signal_freq: Option<f64>,
    exclude: usize,
) -> Result<NotchEstimate> {
    const SMOOTH: usize = 32;
    let bins = band_bins(spec, search.0, search.1);
    if bins.len() < 2 * SMOOTH {
        return Err(Error::NoNotch("search band too narrow".into()));
    }
    // keep band order for wrapped complex grids
    let df = spec.bin_width();
    let k_lo = (search.0 / df).ceil() as i64;
    let n = spec.nfft as i64;
    let ordered: Vec<i64> = (0..bins.len() as i64).map(|i| k_lo + i).collect();
    let idx = |k: i64| if spec.complex { k.rem_euclid(n) as usize } else { k as usize };
    let skip = |k: i64| {
        signal_freq.is_some_and(|f| {
            let k0 = (f / df).round() as i64;
            (k - k0).abs() <= exclude as i64
        })
    };
    let vals: Vec<(i64, f64)> = ordered.iter().filter(|&&k| !skip(k)).map(|&k| (k, spec.psd_db[idx(k)])).collect();
    if vals.len() < SMOOTH {
        return Err(Error::NoNotch("search band too narrow".into()));
    }
    let meds: Vec<f64> = (SMOOTH / 2..vals.len() - SMOOTH / 2)
        .map(|c| {
            let mut win: Vec<f64> = vals[c - SMOOTH / 2..c + SMOOTH / 2].iter().map(|v| v.1).collect();
            win.sort_by(f64::total_cmp);
            0.5 * (win[SMOOTH / 2 - 1] + win[SMOOTH / 2])
        })
        .collect();
    let min = meds.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::NoNotch("no floor minimum".into()));
    }
    // median smoothing flattens the bottom; take the middle of the tied run
    let ties: Vec<usize> = (0..meds.len()).filter(|&i| meds[i] <= min + 1e-9).collect();
    let mid = (ties[0] + ties[ties.len() - 1]) / 2 + SMOOTH / 2;
    let f = vals[mid].0 as f64 * df;
    Ok(NotchEstimate {
        frequency: f,
        strategy: NotchStrategy::Spectrum,
        grid_step: df,
    })
}
