//! Control-bounded analog-to-digital conversion toolkit.
//!
//! The crate models leapfrog analog frontends (low-pass and quadrature), the
//! local digital controls that keep their states bounded, and the digital
//! estimators that turn the resulting control bit-streams into an estimate of
//! the input signal.
//!
//! The pieces fit together as follows:
//!
//! ```text
//!  system      ─ LeapfrogDesign, Realization, StateSpaceModel, transfer functions
//!  control     ─ QuadratureControlParams, observation / quantizer / DAC maps
//!  simulator   ─ exact piecewise-LTI simulation, bit-packed ControlTrace
//!  estimator   ─ Wiener FIR banks, filtering, STF/NTF, LMS calibration
//!  analysis    ─ Welch PSD in dBFS, in-band SNR, notch estimation
//!  harness     ─ TOML-configured experiments writing CSV artifacts
//! ```
//!
//! A minimal end-to-end run:
//!
//! ```no_run
//! use cbadc::prelude::*;
//!
//! let design = LeapfrogDesign::new(6, 8, 2.0 * std::f64::consts::PI * 1e6).unwrap();
//! let f_n = design.f_s / 8.0;
//! let frontend = Frontend::quadrature(&design, 2.0 * std::f64::consts::PI * f_n, 0.0, 0.0).unwrap();
//! let input = InputSpec::quadrature_tone(1.0, f_n - design.omega_b / (8.0 * std::f64::consts::PI));
//! let run = simulate(&frontend, &input, 1 << 16, &SimulationOptions::default()).unwrap();
//! let bank = wiener_filter_bank(&frontend, &WienerOptions::new(1 << 12)).unwrap();
//! let estimate = estimate_full_rate(&run.trace, &bank).unwrap();
//! # let _ = estimate;
//! ```

pub mod analysis;
pub mod control;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod numerics;
pub mod simulator;
pub mod system;

pub use error::{Error, Result};

/// Commonly used items.
pub mod prelude {
    pub use crate::analysis::{conversion_band, estimate_notch, psd_of, snr_in_band, Spectrum};
    pub use crate::control::{derive_control_params, QuadratureControlParams};
    pub use crate::estimator::{
        estimate, estimate_full_rate, lms_calibrate, stf_ntf, wiener_filter_bank, FirFilterBank, LmsOptions,
        WienerOptions,
    };
    pub use crate::harness::ExperimentConfig;
    pub use crate::simulator::{simulate, ControlTrace, InputSpec, SimulationOptions};
    pub use crate::system::{Frontend, LeapfrogDesign, StateSpaceModel};
    pub use crate::Error;
}
