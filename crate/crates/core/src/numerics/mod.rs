//! Shared numerical kernels.

mod expm;
mod fft;
mod fir;
mod rotation;

pub use expm::{discretize, expm, expm_capped, DiscretizedSystem, DEFAULT_DIMENSION_CAP};
pub use fft::{fft, ifft};
pub use fir::{
    design_fir, frequency_response, AmplitudePoint, FirDesign, FINITE_TOLERANCE_DB,
    STOPBAND_CEILING_DB,
};
pub use rotation::{rotation, rotation_integral, scaled_rotation_polar, wrap_angle, Mat2};
