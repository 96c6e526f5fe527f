//! LMS calibration of the control filters against a fixed reference filter.
//!
//! The reference channels carry a known pseudo-random sequence injected into
//! the first integrator. With no input, the best estimate is zero, so the
//! filters of the remaining channels are trained to cancel the reference
//! filter's output:
//! `e[k] = (h₀⋆s₀)[k] + Σ_ℓ (h_ℓ⋆s_ℓ)[k]`, `h_ℓ ← h_ℓ − μ·e[k]·s_ℓ[k+lag−·]`.
//! Each output (in-phase, quadrature) is an independent real problem.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::FirFilterBank;
use crate::numerics::{design_fir, AmplitudePoint, FirDesign};
use crate::simulator::ControlTrace;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmsOptions {
    pub step: f64,
    pub iterations: u64,
    /// Taps per filter.
    pub length: usize,
    /// Use the sign-select update, which only adds and subtracts.
    pub multiplication_free: bool,
    /// Steps per MSE window for the divergence check.
    pub divergence_window: u64,
}

impl LmsOptions {
    pub fn new(length: usize, step: f64, iterations: u64) -> Self {
        LmsOptions {
            step,
            iterations,
            length,
            multiplication_free: false,
            divergence_window: 1 << 16,
        }
    }

    pub fn lag(&self) -> usize {
        self.length / 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmsResult {
    pub bank: FirFilterBank,
    /// Mean `Σ_o e_o²` over the last window (or the whole run if shorter).
    pub mse: f64,
    pub iterations: u64,
}

/// Reference filter `h₀` designed from an amplitude specification.
pub fn reference_filter_h0(spec: &[AmplitudePoint], length: usize, sample_rate: f64) -> Result<FirDesign> {
    design_fir(spec, length, sample_rate)
}

/// Reference-channel taps `[channel][output][k]` for a (possibly complex) `h₀`.
///
/// A quadrature reference pair `(s₀, s̄₀)` forms `s₀ + i·s̄₀`, so complex
/// filtering maps `s₀` through `(Re h₀, Im h₀)` and `s̄₀` through `(−Im h₀, Re h₀)`.
pub fn reference_taps(h0: &[Complex64], reference_channels: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    let re: Vec<f64> = h0.iter().map(|h| h.re).collect();
    let im: Vec<f64> = h0.iter().map(|h| h.im).collect();
    match reference_channels {
        1 => Ok(vec![vec![re]]),
        2 => Ok(vec![vec![re.clone(), im.clone()], vec![im.iter().map(|v| -v).collect(), re]]),
        n => Err(Error::InvalidArgument(format!("expected 1 or 2 reference channels, trace has {n}"))),
    }
}

/// Trains all non-reference filters of `trace` with LMS.
pub fn lms_calibrate(trace: &ControlTrace, h0: &[Complex64], opts: &LmsOptions) -> Result<LmsResult> {
    let l = opts.length;
    if l < 2 {
        return Err(Error::InvalidArgument("filters need at least two taps".into()));
    }
    if h0.len() != l {
        return Err(Error::DimensionMismatch(format!("h0 has {} taps, filters {}", h0.len(), l)));
    }
    if !(opts.step.is_finite() && opts.step >= 0.0) {
        return Err(Error::InvalidArgument("step must be finite and non-negative".into()));
    }
    if opts.divergence_window == 0 {
        return Err(Error::InvalidArgument("divergence window must be positive".into()));
    }
    let refs = trace.reference_channels();
    let ref_taps = reference_taps(h0, refs)?;
    let outputs = ref_taps[0].len();
    let m = trace.n_channels();
    let k_len = trace.len();
    let lag = opts.lag();
    if k_len < l {
        return Err(Error::TooShort { len: k_len, need: l });
    }

    let signals: Vec<Vec<f64>> = (0..m).map(|c| trace.channel_f64(c)).collect();
    // training instants k with s[k+lag-L+1 ..= k+lag] inside the trace
    let k0 = l - 1 - lag;
    let k1 = k_len - 1 - lag;
    let n_valid = k1 - k0 + 1;

    // reference output r_o[k] at each valid instant
    let mut r = vec![vec![0.0; n_valid]; outputs];
    for (c, taps) in ref_taps.iter().enumerate() {
        for (o, h) in taps.iter().enumerate() {
            let rev: Vec<f64> = h.iter().rev().copied().collect();
            for (i, k) in (k0..=k1).enumerate() {
                r[o][i] += dot(&rev, &signals[c][k + lag + 1 - l..=k + lag]);
            }
        }
    }

    // weights stored reversed: w[ℓ][o][i] multiplies s_ℓ[k+lag-L+1+i]
    let trained = m - refs;
    let mut w = vec![vec![vec![0.0; l]; outputs]; trained];
    let mu = opts.step;
    let window = opts.divergence_window;
    let (mut win_sum, mut win_n) = (0.0, 0u64);
    let mut prev_window: Option<f64> = None;
    let mut last_window_mse = None;
    let mut e = vec![0.0; outputs];

    for it in 0..opts.iterations {
        let i = (it % n_valid as u64) as usize;
        let k = k0 + i;
        let lo = k + lag + 1 - l;
        for o in 0..outputs {
            e[o] = r[o][i];
        }
        for (c, wc) in w.iter().enumerate() {
            let s = &signals[refs + c][lo..lo + l];
            for o in 0..outputs {
                e[o] += if opts.multiplication_free {
                    signed_sum(&wc[o], s)
                } else {
                    dot(&wc[o], s)
                };
            }
        }
        let err2: f64 = e.iter().map(|v| v * v).sum();
        if !err2.is_finite() {
            return Err(Error::Diverged { iteration: it, mse: err2 });
        }
        for (c, wc) in w.iter_mut().enumerate() {
            let s = &signals[refs + c][lo..lo + l];
            for o in 0..outputs {
                let g = mu * e[o];
                if opts.multiplication_free {
                    sign_select_update(&mut wc[o], s, g);
                } else {
                    for (wi, si) in wc[o].iter_mut().zip(s) {
                        *wi -= g * si;
                    }
                }
            }
        }
        win_sum += err2;
        win_n += 1;
        if win_n == window {
            let mse = win_sum / window as f64;
            if let Some(p) = prev_window {
                if mse > 10.0 * p {
                    return Err(Error::Diverged { iteration: it, mse });
                }
            }
            prev_window = Some(mse);
            last_window_mse = Some(mse);
            win_sum = 0.0;
            win_n = 0;
        }
    }

    let mse = if opts.iterations == 0 {
        r.iter().map(|ro| ro.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / n_valid as f64
    } else {
        last_window_mse.unwrap_or(win_sum / win_n.max(1) as f64)
    };

    let mut taps = ref_taps;
    for wc in w {
        taps.push(wc.into_iter().map(|mut v| {
            v.reverse();
            v
        }).collect());
    }
    let bank = FirFilterBank {
        taps,
        lag,
        t_s: trace.t_s(),
        osr: 1,
        labels: trace.labels().to_vec(),
        reference_channels: refs,
    };
    Ok(LmsResult {
        bank,
        mse,
        iterations: opts.iterations,
    })
}

const LANES: usize = 8;

// Both reductions share the lane layout, so for ±1 data they agree bit for bit.
fn reduce(a: &[f64], b: &[f64], term: impl Fn(f64, f64) -> f64) -> f64 {
    let mut acc = [0.0; LANES];
    let (ca, ra) = (a.chunks_exact(LANES), a.chunks_exact(LANES).remainder());
    let rb = b.chunks_exact(LANES).remainder();
    for (x, y) in ca.zip(b.chunks_exact(LANES)) {
        for j in 0..LANES {
            acc[j] += term(x[j], y[j]);
        }
    }
    let mut tail = 0.0;
    for (&x, &y) in ra.iter().zip(rb) {
        tail += term(x, y);
    }
    acc.iter().sum::<f64>() + tail
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    reduce(a, b, |x, y| x * y)
}

/// `Σ ±w_i`, selecting the sign from the decision.
fn signed_sum(w: &[f64], s: &[f64]) -> f64 {
    reduce(w, s, |wi, si| if si > 0.0 { wi } else { -wi })
}

fn sign_select_update(w: &mut [f64], s: &[f64], g: f64) {
    for (wi, &si) in w.iter_mut().zip(s) {
        if si > 0.0 {
            *wi -= g;
        } else {
            *wi += g;
        }
    }
}
