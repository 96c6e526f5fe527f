//! Finite-gain op-amp integrators.
//!
//! Each ideal integrator `ẋ = d` is replaced by an inverting RC integrator
//! around an op-amp with `A(s) = k_A·ω_A/(s + ω_A)`. Writing `v` for the
//! virtual-ground node and `g` for the total input conductance normalized by
//! the feedback capacitor, nodal analysis gives
//!
//! ```text
//! ẋ = −ω_A x − k_A ω_A v
//! v̇ = ẋ − d − g v
//! ```
//!
//! so the transfer from `d` to `x` is `k_Aω_A / ((s+ω_A)(s+g) + k_Aω_A s)`,
//! which tends to `1/s` as `k_A, ω_A → ∞`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::StateSpaceModel;
use crate::{Error, Result};

/// Op-amp DC gain and dominant pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpAmp {
    pub k_a: f64,
    /// rad/s
    pub omega_a: f64,
}

impl OpAmp {
    pub fn new(k_a: f64, omega_a: f64) -> Result<Self> {
        if !(k_a > 0.0 && omega_a > 0.0) || !k_a.is_finite() || !omega_a.is_finite() {
            return Err(Error::InvalidArgument("op-amp gain and pole must be positive".into()));
        }
        Ok(OpAmp { k_a, omega_a })
    }

    /// Op-amp with the given DC gain and gain–bandwidth product `k_A·ω_A` (rad/s).
    pub fn from_gbwp(k_a: f64, gbwp: f64) -> Result<Self> {
        OpAmp::new(k_a, gbwp / k_a)
    }

    /// rad/s
    pub fn gbwp(&self) -> f64 {
        self.k_a * self.omega_a
    }
}

/// Doubles the state: `[x; v]`, with the original states first so output
/// rows, inputs and controls keep their meaning.
pub fn opamp_augment(model: &StateSpaceModel, opamp: OpAmp) -> Result<StateSpaceModel> {
    model.validate()?;
    let n = model.n_states();
    let (k_a, w_a) = (opamp.k_a, opamp.omega_a);
    let gbw = k_a * w_a;
    let g: Vec<f64> = (0..n)
        .map(|i| {
            model.a.row(i).iter().map(|v| v.abs()).sum::<f64>()
                + model.b.row(i).iter().map(|v| v.abs()).sum::<f64>()
                + model.gamma.row(i).iter().map(|v| v.abs()).sum::<f64>()
        })
        .collect();

    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, i)] = -w_a;
        a[(i, n + i)] = -gbw;
        a[(n + i, n + i)] = -gbw - g[i];
        for j in 0..n {
            a[(n + i, j)] = -model.a[(i, j)];
        }
        a[(n + i, i)] -= w_a;
    }
    let mut b = DMatrix::zeros(2 * n, model.n_inputs());
    b.view_mut((n, 0), (n, model.n_inputs())).copy_from(&(-&model.b));
    let mut gamma = DMatrix::zeros(2 * n, model.n_controls());
    gamma.view_mut((n, 0), (n, model.n_controls())).copy_from(&(-&model.gamma));

    Ok(StateSpaceModel {
        a,
        b,
        gamma,
        output_rows: model.output_rows.clone(),
        input_labels: model.input_labels.clone(),
        control_labels: model.control_labels.clone(),
    })
}
