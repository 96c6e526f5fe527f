//! Local quadrature digital control.
//!
//! Each quadrature state pair `(x_ℓ, x̄_ℓ)` is observed through a scaled
//! rotation, quantized by two clocked comparators and fed back through a
//! second scaled rotation held constant over one clock period (NRZ DAC):
//!
//! ```text
//! (s̃, s̄̃)ᵀ = [[κ̃_φ, −κ̄̃_φ], [κ̄̃_φ, κ̃_φ]] (x, x̄)ᵀ
//! (s, s̄)[k] = (sign s̃, sign s̄̃)(kT_s)
//! DAC(t)   = [[κ_φ, −κ̄_φ], [κ̄_φ, κ_φ]] (s, s̄)[k]   on [kT_s + τ_DC, (k+1)T_s + τ_DC)
//! ```
//!
//! [`derive_control_params`] picks the five constants so that a pair driven
//! by a worst-case oscillating input stays bounded; [`verify_stability_conditions`]
//! re-checks the three underlying conditions for any parameter set.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::numerics::{wrap_angle, Mat2};
use crate::{Error, Result};

/// `sin(x)/x` with its series near zero.
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0 + x.powi(4) / 120.0
    } else {
        x.sin() / x
    }
}

/// The derived constants of one local quadrature digital control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureControlParams {
    /// 1/s
    pub kappa_phi: f64,
    /// 1/s
    pub bar_kappa_phi: f64,
    pub tilde_kappa_phi: f64,
    pub bar_tilde_kappa_phi: f64,
    /// Hz
    pub f_s: f64,
    /// s
    pub t_s: f64,
    /// s
    pub tau_dc: f64,
    /// rad, in `[0, 2π)`
    pub phi_kappa: f64,
}

impl QuadratureControlParams {
    pub fn dac_matrix(&self) -> Mat2 {
        Mat2::scaled_rotation(self.kappa_phi, self.bar_kappa_phi)
    }

    pub fn observation_matrix(&self) -> Mat2 {
        Mat2::scaled_rotation(self.tilde_kappa_phi, self.bar_tilde_kappa_phi)
    }

    /// `√(κ_φ² + κ̄_φ²)`
    pub fn control_gain(&self) -> f64 {
        self.kappa_phi.hypot(self.bar_kappa_phi)
    }

    /// `√(κ̃_φ² + κ̄̃_φ²)`
    pub fn observation_gain(&self) -> f64 {
        self.tilde_kappa_phi.hypot(self.bar_tilde_kappa_phi)
    }
}

/// Derives the control constants for a pair with forward gain `beta` (1/s)
/// oscillating at `omega_n` (rad/s), with free rotation `phi_kappa` and
/// comparator-to-DAC delay `tau_dc`.
///
/// The clock follows as `f_s = 2β`.
pub fn derive_control_params(
    beta: f64,
    omega_n: f64,
    phi_kappa: f64,
    tau_dc: f64,
) -> Result<QuadratureControlParams> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    if !omega_n.is_finite() || !phi_kappa.is_finite() || !(tau_dc >= 0.0) || !tau_dc.is_finite() {
        return Err(Error::InvalidArgument(
            "omega_n and phi_kappa must be finite, tau_dc finite and non-negative".into(),
        ));
    }
    let f_s = 2.0 * beta;
    let t_s = 1.0 / f_s;
    if omega_n.abs() * t_s >= 2.0 * PI {
        return Err(Error::NotchOutOfRange {
            omega_n,
            limit: 2.0 * PI * f_s,
        });
    }
    let phi_kappa = phi_kappa.rem_euclid(2.0 * PI);
    let half = omega_n * t_s / 2.0;
    let gain = beta / sinc(half);
    let obs = -1.0 / (beta * t_s);
    let angle = omega_n * (t_s / 2.0 + tau_dc) - phi_kappa;
    Ok(QuadratureControlParams {
        kappa_phi: gain * phi_kappa.cos(),
        bar_kappa_phi: gain * phi_kappa.sin(),
        tilde_kappa_phi: obs * angle.cos(),
        bar_tilde_kappa_phi: obs * angle.sin(),
        f_s,
        t_s,
        tau_dc,
        phi_kappa,
    })
}

/// `(s̃, s̄̃)` for a state pair.
pub fn control_observation(x: f64, x_bar: f64, p: &QuadratureControlParams) -> (f64, f64) {
    let [s, sb] = p.observation_matrix().apply([x, x_bar]);
    (s, sb)
}

/// One-bit quantizer; exact zero maps to `+1`.
pub fn quantize(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// A pair of binary control decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlDecisionPair {
    s: i8,
    s_bar: i8,
}

impl ControlDecisionPair {
    pub fn new(s: i8, s_bar: i8) -> Result<Self> {
        if s.abs() != 1 || s_bar.abs() != 1 {
            return Err(Error::InvalidArgument(format!("decisions must be ±1, got ({s}, {s_bar})")));
        }
        Ok(ControlDecisionPair { s, s_bar })
    }

    /// Quantizes an observation pair.
    pub fn from_observation(s_tilde: f64, s_bar_tilde: f64) -> Self {
        ControlDecisionPair {
            s: quantize(s_tilde),
            s_bar: quantize(s_bar_tilde),
        }
    }

    pub fn s(&self) -> i8 {
        self.s
    }

    pub fn s_bar(&self) -> i8 {
        self.s_bar
    }
}

/// DAC output (1/s) held over one period for decision pair `d`.
pub fn dac_contribution(d: ControlDecisionPair, p: &QuadratureControlParams) -> [f64; 2] {
    p.dac_matrix().apply([d.s as f64, d.s_bar as f64])
}

/// Signed residuals of the three boundedness conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Relative mismatch between control and worst-case input strength.
    pub norm_match: f64,
    /// Relative mismatch of the observation gain.
    pub tilde_norm: f64,
    /// Observation angle error, wrapped to `(-π, π]`.
    pub tilde_angle: f64,
    /// `1 − 2βT_s`; negative means the superposition bound is violated.
    pub superposition_slack: f64,
}

impl StabilityReport {
    pub fn max_abs_residual(&self) -> f64 {
        self.norm_match
            .abs()
            .max(self.tilde_norm.abs())
            .max(self.tilde_angle.abs())
            .max(self.superposition_slack.abs())
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.norm_match.abs() <= tol
            && self.tilde_norm.abs() <= tol
            && self.tilde_angle.abs() <= tol
            && self.superposition_slack >= -tol
    }
}

/// Checks a parameter set against the matched-strength, self-stability and
/// worst-case superposition conditions for forward gain `beta` and notch `omega_n`.
pub fn verify_stability_conditions(
    p: &QuadratureControlParams,
    beta: f64,
    omega_n: f64,
) -> StabilityReport {
    let t_s = p.t_s;
    let half = omega_n * t_s / 2.0;
    let required_gain = beta / sinc(half);
    let gain = p.control_gain();
    let required_obs = 1.0 / (gain * t_s * sinc(half));
    let angle = p.bar_tilde_kappa_phi.atan2(p.tilde_kappa_phi);
    let required_angle = omega_n * (t_s / 2.0 + p.tau_dc) - p.phi_kappa + PI;
    StabilityReport {
        norm_match: (gain - required_gain) / required_gain,
        tilde_norm: (p.observation_gain() - required_obs) / required_obs,
        tilde_angle: wrap_angle(angle - required_angle),
        superposition_slack: 1.0 - 2.0 * beta / p.f_s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_notch_limit() {
        let beta = 1e6;
        let p = derive_control_params(beta, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(p.kappa_phi, beta);
        assert_eq!(p.bar_kappa_phi, 0.0);
        assert!((p.tilde_kappa_phi + 1.0 / (beta * p.t_s)).abs() < 1e-15);
        assert_eq!(p.bar_tilde_kappa_phi, 0.0);
        assert_eq!(p.f_s, 2.0 * beta);
    }

    #[test]
    fn circuit_values_at_2_gs() {
        let f_s = 2f64.powi(31);
        let beta = f_s / 2.0;
        let omega_n = 2.0 * PI * 5.0 / 16.0 * f_s;
        let p = derive_control_params(beta, omega_n, 0.0, 0.0).unwrap();
        assert!((p.kappa_phi / 1.2678e9 - 1.0).abs() < 1e-4, "{}", p.kappa_phi);
        let r = 1.0 / (p.kappa_phi * 1e-12);
        assert!((r - 788.7).abs() < 0.5, "{r}");
        // βT_s = 1/2, so the observation constants are -2cos / -2sin of ω_nT_s/2
        let half = 5.0 * PI / 16.0;
        assert!((p.tilde_kappa_phi + 2.0 * half.cos()).abs() < 1e-12);
        assert!((p.bar_tilde_kappa_phi + 2.0 * half.sin()).abs() < 1e-12);
        assert!((p.tilde_kappa_phi + 1.1111).abs() < 1e-4);
        assert!((p.bar_tilde_kappa_phi + 1.6629).abs() < 1e-4);
    }

    #[test]
    fn notch_out_of_range() {
        let beta = 1.0;
        let f_s = 2.0;
        assert!(matches!(
            derive_control_params(beta, 2.0 * PI * f_s, 0.0, 0.0),
            Err(Error::NotchOutOfRange { .. })
        ));
        assert!(derive_control_params(-1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn quantizer_ties_to_plus_one() {
        assert_eq!(quantize(0.3), 1);
        assert_eq!(quantize(-1e-12), -1);
        assert_eq!(quantize(0.0), 1);
        assert_eq!(quantize(-0.0), 1);
    }

    #[test]
    fn observation_of_origin_and_decoupled_limit() {
        let p = derive_control_params(1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(control_observation(0.0, 0.0, &p), (0.0, 0.0));
        let (s, sb) = control_observation(0.4, -0.2, &p);
        assert!((s - p.tilde_kappa_phi * 0.4).abs() < 1e-15);
        assert!((sb + p.tilde_kappa_phi * 0.2).abs() < 1e-15);
    }

    #[test]
    fn dac_linear_map() {
        let p = derive_control_params(1.0, 1.3, 0.7, 0.0).unwrap();
        let d = ControlDecisionPair::new(1, -1).unwrap();
        let [a, b] = dac_contribution(d, &p);
        assert!((a - (p.kappa_phi + p.bar_kappa_phi)).abs() < 1e-15);
        assert!((b - (p.bar_kappa_phi - p.kappa_phi)).abs() < 1e-15);
        let q = derive_control_params(1.0, 1.3, 0.0, 0.0).unwrap();
        let [a, b] = dac_contribution(ControlDecisionPair::new(1, 1).unwrap(), &q);
        assert_eq!((a, b), (q.kappa_phi, q.kappa_phi));
        assert!(ControlDecisionPair::new(0, 1).is_err());
    }

    #[test]
    fn derived_params_have_zero_residuals() {
        let p = derive_control_params(3.0, 5.0, 1.0, 0.02).unwrap();
        let r = verify_stability_conditions(&p, 3.0, 5.0);
        assert!(r.max_abs_residual() <= 1e-12, "{r:?}");
        assert_eq!(r.superposition_slack, 0.0);
    }

    #[test]
    fn scaled_dac_gain_shows_up_in_residuals() {
        let (beta, omega_n) = (1.0, 2.0);
        let mut p = derive_control_params(beta, omega_n, 0.0, 0.0).unwrap();
        p.kappa_phi *= 1.05;
        let r = verify_stability_conditions(&p, beta, omega_n);
        assert!((r.norm_match - 0.05).abs() < 1e-12);
        assert!(r.tilde_norm.abs() > 1e-3);
    }

    #[test]
    fn unadjusted_delay_shows_up_as_angle_error() {
        let (beta, omega_n) = (1.0, 2.0);
        let mut p = derive_control_params(beta, omega_n, 0.0, 0.0).unwrap();
        p.tau_dc = 0.1 * p.t_s;
        let r = verify_stability_conditions(&p, beta, omega_n);
        assert!((r.tilde_angle.abs() - 0.1 * omega_n * p.t_s).abs() < 1e-12);
    }
}
