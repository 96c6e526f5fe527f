use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{opamp_augment, LeapfrogDesign, OpAmp, StateSpaceModel};
use crate::control::{derive_control_params, QuadratureControlParams};
use crate::{Error, Result};

/// Every component value of a frontend, one entry per occurrence.
///
/// All tables are indexed `[branch][stage]`; low-pass frontends have one
/// branch, quadrature frontends two (`x` then `x̄`). Stage 0 of `beta` is the
/// input gain, `alpha[b][ℓ]` couples `x_{ℓ+1}` into `ẋ_ℓ` (so only `N−1`
/// stages carry one). For low-pass frontends `kappa_phi` holds the control
/// gain `κ` and `tilde_kappa_phi` the comparator gain (1), and the
/// cross terms and `omega_n` are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub omega_n: Vec<Vec<f64>>,
    pub kappa_phi: Vec<Vec<f64>>,
    pub bar_kappa_phi: Vec<Vec<f64>>,
    pub tilde_kappa_phi: Vec<Vec<f64>>,
    pub bar_tilde_kappa_phi: Vec<Vec<f64>>,
}

impl Realization {
    fn nominal(design: &LeapfrogDesign, quad: Option<(f64, &QuadratureControlParams)>) -> Self {
        let n = design.order;
        let branches = if quad.is_some() { 2 } else { 1 };
        let table = |v: f64, len: usize| vec![vec![v; len]; branches];
        let (omega_n, k, kb, kt, kbt) = match quad {
            Some((w, p)) => (w, p.kappa_phi, p.bar_kappa_phi, p.tilde_kappa_phi, p.bar_tilde_kappa_phi),
            None => (0.0, design.kappa, 0.0, 1.0, 0.0),
        };
        Realization {
            alpha: table(design.alpha, n - 1),
            beta: table(design.beta, n),
            omega_n: table(omega_n, n),
            kappa_phi: table(k, n),
            bar_kappa_phi: table(kb, n),
            tilde_kappa_phi: table(kt, n),
            bar_tilde_kappa_phi: table(kbt, n),
        }
    }

    pub fn branches(&self) -> usize {
        self.beta.len()
    }

    pub fn order(&self) -> usize {
        self.beta.first().map_or(0, |b| b.len())
    }
}

/// How the comparators observe the state and when decisions take effect.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlLaw {
    /// One row per comparator-driven channel, over the model's state vector.
    pub observation: DMatrix<f64>,
    /// Leading control channels driven by the reference generator instead.
    pub reference_channels: usize,
    /// s
    pub t_s: f64,
    /// s
    pub tau_dc: f64,
}

impl ControlLaw {
    pub fn n_channels(&self) -> usize {
        self.reference_channels + self.observation.nrows()
    }
}

/// A complete analog frontend: leapfrog (or quadrature leapfrog) model plus
/// its local digital controls, optionally with reference injection and
/// finite-gain op-amps.
#[derive(Debug, Clone)]
pub struct Frontend {
    design: LeapfrogDesign,
    quadrature: Option<(f64, QuadratureControlParams)>,
    realization: Realization,
    reference_ratio: Option<f64>,
    opamp: Option<OpAmp>,
    model: StateSpaceModel,
    law: ControlLaw,
}

impl Frontend {
    /// Low-pass leapfrog with `s_ℓ = sign(x_ℓ)` and `Γ = κI`.
    pub fn lowpass(design: &LeapfrogDesign) -> Result<Self> {
        Frontend::assemble(*design, None, Realization::nominal(design, None), None, None)
    }

    /// Quadrature leapfrog with notch `omega_n` (rad/s).
    pub fn quadrature(design: &LeapfrogDesign, omega_n: f64, phi_kappa: f64, tau_dc: f64) -> Result<Self> {
        let limit = std::f64::consts::PI * design.f_s;
        if !(omega_n >= 0.0) || omega_n >= limit {
            return Err(Error::NotchOutOfRange { omega_n, limit });
        }
        let p = derive_control_params(design.beta, omega_n, phi_kappa, tau_dc)?;
        let r = Realization::nominal(design, Some((omega_n, &p)));
        Frontend::assemble(*design, Some((omega_n, p)), r, None, None)
    }

    /// Adds broadband reference channels at the first stage with gain
    /// `ratio` times the first-stage control gain.
    pub fn with_reference(&self, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidArgument(format!("reference ratio must be in (0, 1], got {ratio}")));
        }
        Frontend::assemble(self.design, self.quadrature, self.realization.clone(), Some(ratio), self.opamp)
    }

    pub fn with_opamp(&self, opamp: OpAmp) -> Result<Self> {
        Frontend::assemble(self.design, self.quadrature, self.realization.clone(), self.reference_ratio, Some(opamp))
    }

    /// Same frontend built from different component values.
    pub fn with_realization(&self, realization: Realization) -> Result<Self> {
        let n = self.design.order;
        let b = self.realization.branches();
        let shape_ok = |t: &Vec<Vec<f64>>, len: usize| t.len() == b && t.iter().all(|r| r.len() == len);
        let r = &realization;
        if !(shape_ok(&r.alpha, n - 1)
            && shape_ok(&r.beta, n)
            && shape_ok(&r.omega_n, n)
            && shape_ok(&r.kappa_phi, n)
            && shape_ok(&r.bar_kappa_phi, n)
            && shape_ok(&r.tilde_kappa_phi, n)
            && shape_ok(&r.bar_tilde_kappa_phi, n))
        {
            return Err(Error::DimensionMismatch("realization does not match the frontend".into()));
        }
        Frontend::assemble(self.design, self.quadrature, realization, self.reference_ratio, self.opamp)
    }

    fn assemble(
        design: LeapfrogDesign,
        quadrature: Option<(f64, QuadratureControlParams)>,
        realization: Realization,
        reference_ratio: Option<f64>,
        opamp: Option<OpAmp>,
    ) -> Result<Self> {
        let n = design.order;
        let r = &realization;
        let branches = r.branches();
        let n_states = branches * n;
        let n_ref = if reference_ratio.is_some() { branches } else { 0 };
        let n_ctrl = n_ref + n_states;
        let mut m = StateSpaceModel::zeros(n_states, branches, n_ctrl);
        let mut obs = DMatrix::zeros(n_states, n_states);

        for b in 0..branches {
            let off = b * n;
            for l in 0..n {
                if l + 1 < n {
                    m.a[(off + l, off + l + 1)] = r.alpha[b][l];
                }
                if l > 0 {
                    m.a[(off + l, off + l - 1)] = r.beta[b][l];
                }
            }
            m.b[(off, b)] = r.beta[b][0];
        }
        if branches == 1 {
            for l in 0..n {
                m.gamma[(l, n_ref + l)] = r.kappa_phi[0][l];
                obs[(l, l)] = r.tilde_kappa_phi[0][l];
            }
            if let Some(ratio) = reference_ratio {
                m.gamma[(0, 0)] = ratio * r.kappa_phi[0][0];
            }
        } else {
            for l in 0..n {
                let (x, xb) = (l, n + l);
                let (s, sb) = (n_ref + l, n_ref + n + l);
                m.a[(x, xb)] = -r.omega_n[0][l];
                m.a[(xb, x)] = r.omega_n[1][l];
                m.gamma[(x, s)] = r.kappa_phi[0][l];
                m.gamma[(x, sb)] = -r.bar_kappa_phi[0][l];
                m.gamma[(xb, s)] = r.bar_kappa_phi[1][l];
                m.gamma[(xb, sb)] = r.kappa_phi[1][l];
                obs[(l, x)] = r.tilde_kappa_phi[0][l];
                obs[(l, xb)] = -r.bar_tilde_kappa_phi[0][l];
                obs[(n + l, x)] = r.bar_tilde_kappa_phi[1][l];
                obs[(n + l, xb)] = r.tilde_kappa_phi[1][l];
            }
            if let Some(ratio) = reference_ratio {
                m.gamma[(0, 0)] = ratio * r.kappa_phi[0][0];
                m.gamma[(0, 1)] = -ratio * r.bar_kappa_phi[0][0];
                m.gamma[(n, 0)] = ratio * r.bar_kappa_phi[1][0];
                m.gamma[(n, 1)] = ratio * r.kappa_phi[1][0];
            }
        }

        m.output_rows = if branches == 1 { vec![n - 1] } else { vec![n - 1, 2 * n - 1] };
        m.input_labels = if branches == 1 { vec!["u".into()] } else { vec!["u".into(), "ubar".into()] };
        let mut labels: Vec<String> = Vec::with_capacity(n_ctrl);
        if n_ref > 0 {
            labels.push("s0".into());
            if branches == 2 {
                labels.push("sbar0".into());
            }
        }
        labels.extend((1..=n).map(|l| format!("s{l}")));
        if branches == 2 {
            labels.extend((1..=n).map(|l| format!("sbar{l}")));
        }
        m.control_labels = labels;

        if let Some(op) = opamp {
            m = opamp_augment(&m, op)?;
            let mut padded = DMatrix::zeros(n_states, 2 * n_states);
            padded.view_mut((0, 0), (n_states, n_states)).copy_from(&obs);
            obs = padded;
        }
        m.validate()?;

        let tau_dc = quadrature.map_or(0.0, |(_, p)| p.tau_dc);
        Ok(Frontend {
            design,
            quadrature,
            realization,
            reference_ratio,
            opamp,
            model: m,
            law: ControlLaw {
                observation: obs,
                reference_channels: n_ref,
                t_s: design.t_s,
                tau_dc,
            },
        })
    }

    pub fn design(&self) -> &LeapfrogDesign {
        &self.design
    }

    pub fn model(&self) -> &StateSpaceModel {
        &self.model
    }

    pub fn control_law(&self) -> &ControlLaw {
        &self.law
    }

    pub fn realization(&self) -> &Realization {
        &self.realization
    }

    pub fn is_quadrature(&self) -> bool {
        self.quadrature.is_some()
    }

    /// Nominal notch (rad/s); 0 for low-pass frontends.
    pub fn omega_n(&self) -> f64 {
        self.quadrature.map_or(0.0, |(w, _)| w)
    }

    /// Nominal control constants of quadrature frontends.
    pub fn params(&self) -> Option<&QuadratureControlParams> {
        self.quadrature.as_ref().map(|(_, p)| p)
    }

    pub fn reference_ratio(&self) -> Option<f64> {
        self.reference_ratio
    }

    pub fn opamp(&self) -> Option<OpAmp> {
        self.opamp
    }

    pub fn n_reference_channels(&self) -> usize {
        self.law.reference_channels
    }

    /// Number of output channels of the estimate: 1 (real) or 2 (I/Q).
    pub fn n_outputs(&self) -> usize {
        self.realization.branches()
    }
}
