//! Wiener-filter estimator synthesis.
//!
//! With `y` the observed output (`x_N`, or `(x_N, x̄_N)` for quadrature
//! frontends) the analog system satisfies `y = G·u + Σ_ℓ G_ℓ·S_ℓ`, where
//! `S_ℓ` is the held DAC waveform of channel `ℓ`. Filtering the control part
//! with `G̃ = Gᴴ(G·Gᴴ + η²I)⁻¹` and flipping its sign gives
//! `G̃·G·u − G̃·y`, a band-limited estimate of `u` plus shaped conversion
//! error. Tap `h_ℓ[k]` is the continuous-time response `−(g̃ ∗ g_ℓ ∗ θ)`
//! sampled at `kT_s`, computed here by sampling its aliased spectrum on an
//! `L`-point grid.
//!
//! When both quadrature branches match, `G` acts on `u + iū` as the scalar
//! `G_c` and the bank reduces to `G̃ = conj(G_c)/(|G_c|² + η²)` acting on
//! `x_N + i·x̄_N`. Mismatched branches also map each frequency onto its
//! mirror image, which only the full 2×2 form accounts for.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::FirFilterBank;
use crate::numerics::ifft;
use crate::system::{Frontend, StateSpaceModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WienerOptions {
    /// Taps per filter; a power of two.
    pub length: usize,
    /// Spectral images `|a| ≤ aliases` summed per frequency.
    pub aliases: usize,
    pub window: Window,
    /// Regularizer override; `None` uses the model's own band-edge gain.
    pub eta_squared: Option<f64>,
}

impl WienerOptions {
    pub fn new(length: usize) -> Self {
        WienerOptions {
            length,
            aliases: 2,
            window: Window::Rectangular,
            eta_squared: None,
        }
    }
}

/// Output responses of a model at one frequency.
pub(crate) struct Responses {
    /// Input to observed output, `outputs × inputs`.
    pub g: DMatrix<Complex64>,
    /// Control channels to observed output, `outputs × channels`.
    pub g_s: DMatrix<Complex64>,
}

impl Responses {
    /// Gain from the complex input `u + iū = e^{iωt}` to `x_N + i·x̄_N`
    /// (plain `G` for low-pass models).
    pub fn g_u(&self) -> Complex64 {
        if self.g.nrows() == 2 {
            let i = Complex64::i();
            (self.g[(0, 0)] - i * self.g[(0, 1)] + i * self.g[(1, 0)] + self.g[(1, 1)]) * 0.5
        } else {
            self.g[(0, 0)]
        }
    }

    /// Largest eigenvalue of `G·Gᴴ`.
    pub fn peak_power_gain(&self) -> f64 {
        let k = &self.g * self.g.adjoint();
        if k.nrows() == 1 {
            return k[(0, 0)].re;
        }
        let (a, d) = (k[(0, 0)].re, k[(1, 1)].re);
        let tr = a + d;
        let det = a * d - k[(0, 1)].norm_sqr();
        0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt())
    }
}

/// Evaluates `G` and all `G_ℓ` with one factorization per frequency.
pub(crate) struct ResponseSolver<'a> {
    model: &'a StateSpaceModel,
    rhs: DMatrix<Complex64>,
    offset: f64,
}

impl<'a> ResponseSolver<'a> {
    /// `offset` is the nudge applied when a frequency hits an undamped pole.
    pub fn new(model: &'a StateSpaceModel, offset: f64) -> Result<Self> {
        model.validate()?;
        let n = model.n_states();
        let (q, m) = (model.n_inputs(), model.n_controls());
        match (q, model.output_rows.len()) {
            (1, 1) | (2, 2) => {}
            (i, o) => {
                return Err(Error::DimensionMismatch(format!("unsupported model with {i} inputs and {o} outputs")));
            }
        }
        let mut rhs = DMatrix::zeros(n, q + m);
        for i in 0..n {
            for j in 0..q {
                rhs[(i, j)] = Complex64::new(model.b[(i, j)], 0.0);
            }
            for j in 0..m {
                rhs[(i, q + j)] = Complex64::new(model.gamma[(i, j)], 0.0);
            }
        }
        Ok(ResponseSolver { model, rhs, offset })
    }

    pub fn at(&self, omega: f64) -> Result<Responses> {
        let sol = match self.model.resolvent_solve(omega, &self.rhs) {
            Err(Error::Pole { .. }) => self.model.resolvent_solve(omega + self.offset, &self.rhs)?,
            other => other?,
        };
        Ok(self.pick(&sol))
    }

    fn pick(&self, sol: &DMatrix<Complex64>) -> Responses {
        let rows = &self.model.output_rows;
        let q = self.model.n_inputs();
        let m = self.model.n_controls();
        Responses {
            g: DMatrix::from_fn(rows.len(), q, |r, c| sol[(rows[r], c)]),
            g_s: DMatrix::from_fn(rows.len(), m, |r, c| sol[(rows[r], q + c)]),
        }
    }
}

/// `G̃·G_s = (GᴴG + η²I)⁻¹GᴴG_s`, solved as the least-squares problem
/// `[G; ηI]·X ≈ [G_s; 0]` by QR. Next to an undamped pole `G` is huge and
/// nearly rank one, and forming `G·Gᴴ` (or an SVD of `G`) loses the small
/// direction that the estimate depends on.
fn wiener_solve(g: &DMatrix<Complex64>, g_s: &DMatrix<Complex64>, eta2: f64) -> Result<DMatrix<Complex64>> {
    let (p, q, m) = (g.nrows(), g.ncols(), g_s.ncols());
    if q == 1 && p == 1 {
        let v = g[(0, 0)];
        return Ok(g_s * (v.conj() / (v.norm_sqr() + eta2)));
    }
    let eta = Complex64::new(eta2.sqrt(), 0.0);
    let a = DMatrix::from_fn(p + q, q, |r, c| if r < p { g[(r, c)] } else if r - p == c { eta } else { Complex64::new(0.0, 0.0) });
    let rhs = DMatrix::from_fn(p + q, m, |r, c| if r < p { g_s[(r, c)] } else { Complex64::new(0.0, 0.0) });
    let qr = a.qr();
    let qtb = qr.q().adjoint() * rhs;
    qr.r()
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::InvalidArgument("singular Wiener system".into()))
}

/// `e^{−iωτ}(1 − e^{−iωT})/(iω)`, the spectrum of a unit pulse held on `(τ, τ+T]`.
pub(crate) fn hold_spectrum(omega: f64, t: f64, tau: f64) -> Complex64 {
    let x = omega * t;
    let pulse = if x.abs() < 1e-6 {
        Complex64::new(t, -x * t / 2.0)
    } else {
        (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -x)) / Complex64::new(0.0, omega)
    };
    pulse * Complex64::from_polar(1.0, -omega * tau)
}

/// Frequency (rad/s) at which `η = |G_c|` is evaluated: the upper band edge.
pub fn eta_frequency(frontend: &Frontend) -> f64 {
    frontend.omega_n() + frontend.design().omega_b
}

/// `η²`: the largest eigenvalue of `G·Gᴴ` at `ω_η`, which is `|G_c(iω_η)|²`
/// when the two quadrature branches match.
pub fn eta_squared(frontend: &Frontend) -> Result<f64> {
    let s = ResponseSolver::new(frontend.model(), pole_offset(frontend))?;
    Ok(s.at(eta_frequency(frontend))?.peak_power_gain())
}

pub(crate) fn pole_offset(frontend: &Frontend) -> f64 {
    1e-9 * frontend.design().omega_b
}

/// Synthesizes the Wiener filter bank of `frontend`.
pub fn wiener_filter_bank(frontend: &Frontend, opts: &WienerOptions) -> Result<FirFilterBank> {
    let l = opts.length;
    if l < 2 || !l.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(l));
    }
    let model = frontend.model();
    let law = frontend.control_law();
    let t = law.t_s;
    let solver = ResponseSolver::new(model, pole_offset(frontend))?;
    let eta2 = match opts.eta_squared {
        Some(e) if e > 0.0 && e.is_finite() => e,
        Some(e) => return Err(Error::InvalidArgument(format!("η² must be positive, got {e}"))),
        None => solver.at(eta_frequency(frontend))?.peak_power_gain(),
    };
    let m = model.n_controls();
    let outputs = frontend.n_outputs();
    let a = opts.aliases as i64;

    // spectra[channel][output][bin]
    let mut spectra = vec![vec![vec![Complex64::new(0.0, 0.0); l]; outputs]; m];
    for j in 0..l {
        let mut big_omega = 2.0 * PI * j as f64 / l as f64;
        if big_omega > PI {
            big_omega -= 2.0 * PI;
        }
        for img in -a..=a {
            let w = (big_omega + 2.0 * PI * img as f64) / t;
            let r = solver.at(w)?;
            let h = wiener_solve(&r.g, &r.g_s, eta2)? * (hold_spectrum(w, t, law.tau_dc) / t);
            for (c, chan) in spectra.iter_mut().enumerate() {
                for (o, spec) in chan.iter_mut().enumerate() {
                    spec[j] -= h[(o, c)];
                }
            }
        }
    }

    let lag = l / 2;
    let window: Vec<f64> = (0..l)
        .map(|k| match opts.window {
            Window::Rectangular => 1.0,
            Window::Hann => {
                let x = (k as f64 - lag as f64) / (lag as f64 + 1.0);
                0.5 * (1.0 + (PI * x).cos())
            }
        })
        .collect();
    let mut taps = Vec::with_capacity(m);
    for chan_spectra in &spectra {
        let mut chan = Vec::with_capacity(outputs);
        for spec in chan_spectra {
            // real system: the impulse response is real up to rounding
            let h = ifft(spec)?;
            chan.push((0..l).map(|k| h[(k + l - lag) % l].re * window[k]).collect());
        }
        taps.push(chan);
    }
    Ok(FirFilterBank {
        taps,
        lag,
        t_s: t,
        osr: frontend.design().osr,
        labels: model.control_labels.clone(),
        reference_channels: law.reference_channels,
    })
}

/// Signal and noise transfer magnitudes on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralShapes {
    /// Hz
    pub freqs: Vec<f64>,
    pub stf_db: Vec<f64>,
    pub ntf_db: Vec<f64>,
}

/// `|STF| = |G_c|²/(|G_c|²+η²)` and `|NTF| = |G_c|/(|G_c|²+η²)` in dB.
///
/// Grid points on an undamped pole fail with [`Error::Pole`].
pub fn stf_ntf(frontend: &Frontend, freqs: &[f64]) -> Result<SpectralShapes> {
    if freqs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("frequency grid must be strictly increasing".into()));
    }
    let model = frontend.model();
    let solver = ResponseSolver::new(model, pole_offset(frontend))?;
    let eta2 = solver.at(eta_frequency(frontend))?.peak_power_gain();
    let mut stf_db = Vec::with_capacity(freqs.len());
    let mut ntf_db = Vec::with_capacity(freqs.len());
    for &f in freqs {
        let w = 2.0 * PI * f;
        let g = transfer_at(model, w)?;
        let den = g.norm_sqr() + eta2;
        stf_db.push(20.0 * (g.norm_sqr() / den).log10());
        ntf_db.push(20.0 * (g.norm() / den).log10());
    }
    Ok(SpectralShapes {
        freqs: freqs.to_vec(),
        stf_db,
        ntf_db,
    })
}

/// `G_c(iω)` without pole nudging.
fn transfer_at(model: &StateSpaceModel, omega: f64) -> Result<Complex64> {
    let s = ResponseSolver::new(model, 0.0)?;
    Ok(s.pick(&model.resolvent_solve(omega, &s.rhs)?).g_u())
}

/// `|G_c(i2πf)|` on a grid, nudging pole hits.
pub fn input_gain(frontend: &Frontend, freqs: &[f64]) -> Result<Vec<f64>> {
    let solver = ResponseSolver::new(frontend.model(), pole_offset(frontend))?;
    freqs.iter().map(|&f| Ok(solver.at(2.0 * PI * f)?.g_u().norm())).collect()
}
