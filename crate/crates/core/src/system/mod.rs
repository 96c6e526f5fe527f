//! Analog-system models: low-pass and quadrature leapfrog frontends,
//! finite-gain op-amp variants, transfer functions and mismatch.

mod frontend;
mod leapfrog;
mod model;
mod opamp;
mod perturb;

pub use frontend::{ControlLaw, Frontend, Realization};
pub use leapfrog::{leapfrog_lowpass, predicted_snr_db, snr_gain_constant, LeapfrogDesign};
pub use model::{quadrature_extend, transfer_function, Channel, StateSpaceModel};
pub use opamp::{opamp_augment, OpAmp};
pub use perturb::{perturb, perturb_realization, ParamClass, PerturbationSpec};
