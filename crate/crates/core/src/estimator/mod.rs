//! Digital estimation: Wiener filter banks, filtering and decimation,
//! signal/noise transfer shapes and LMS calibration.

mod bank;
mod lms;
mod wiener;

pub use bank::{estimate, estimate_full_rate, EstimateSequence, FirFilterBank};
pub use lms::{lms_calibrate, reference_filter_h0, reference_taps, LmsOptions, LmsResult};
pub use wiener::{
    eta_frequency, eta_squared, input_gain, stf_ntf, wiener_filter_bank, SpectralShapes, WienerOptions, Window,
};
