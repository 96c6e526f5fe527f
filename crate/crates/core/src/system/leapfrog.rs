use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::StateSpaceModel;
use crate::{Error, Result};

/// Nominal parameters of an N-th order low-pass leapfrog frontend.
///
/// `|β| = ω_B·OSR/(2π)`, `κ = −β`, `α = ω_B²/(4κ)` and the control clock
/// runs at `f_s = 2β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeapfrogDesign {
    pub order: usize,
    pub osr: usize,
    /// rad/s
    pub omega_b: f64,
    /// 1/s
    pub beta: f64,
    /// 1/s
    pub alpha: f64,
    /// 1/s
    pub kappa: f64,
    /// Hz
    pub f_s: f64,
    /// s
    pub t_s: f64,
}

impl LeapfrogDesign {
    pub fn new(order: usize, osr: usize, omega_b: f64) -> Result<Self> {
        if order == 0 || osr == 0 {
            return Err(Error::InvalidArgument("order and OSR must be at least 1".into()));
        }
        if !(omega_b > 0.0) || !omega_b.is_finite() {
            return Err(Error::InvalidArgument(format!("omega_B must be positive, got {omega_b}")));
        }
        let beta = omega_b * osr as f64 / (2.0 * PI);
        let kappa = -beta;
        let f_s = 2.0 * beta;
        Ok(LeapfrogDesign {
            order,
            osr,
            omega_b,
            beta,
            alpha: omega_b * omega_b / (4.0 * kappa),
            kappa,
            f_s,
            t_s: 1.0 / f_s,
        })
    }

    /// Design whose clock is `f_s`, i.e. `ω_B = π·f_s/OSR`.
    pub fn from_sample_rate(order: usize, osr: usize, f_s: f64) -> Result<Self> {
        LeapfrogDesign::new(order, osr, PI * f_s / osr.max(1) as f64)
    }

    /// Band edge in Hz.
    pub fn f_b(&self) -> f64 {
        self.omega_b / (2.0 * PI)
    }

    pub fn lowpass_model(&self) -> StateSpaceModel {
        let n = self.order;
        let mut m = StateSpaceModel::zeros(n, 1, n);
        for l in 0..n {
            if l + 1 < n {
                m.a[(l, l + 1)] = self.alpha;
            }
            if l > 0 {
                m.a[(l, l - 1)] = self.beta;
            }
            m.gamma[(l, l)] = self.kappa;
        }
        m.b[(0, 0)] = self.beta;
        m.output_rows = vec![n - 1];
        m.input_labels = vec!["u".into()];
        m.control_labels = (1..=n).map(|l| format!("s{l}")).collect();
        m
    }

    pub fn predicted_snr_db(&self, xi: f64) -> f64 {
        predicted_snr_db(self.order, self.osr, xi)
    }
}

/// Builds the nominal design and its state-space model.
pub fn leapfrog_lowpass(order: usize, osr: usize, omega_b: f64) -> Result<(LeapfrogDesign, StateSpaceModel)> {
    let d = LeapfrogDesign::new(order, osr, omega_b)?;
    let m = d.lowpass_model();
    Ok((d, m))
}

/// `2^{2N−1}`, the order-dependent gain constant of the SNR prediction.
pub fn snr_gain_constant(order: usize) -> f64 {
    2f64.powi(2 * order as i32 - 1)
}

/// Analytic SNR estimate `10·log10(g(N)·(OSR/2π)^{2N}/ξ)`.
///
/// `xi` is an empirical constant; only differences between predictions are
/// meaningful unless it has been fitted.
pub fn predicted_snr_db(order: usize, osr: usize, xi: f64) -> f64 {
    let n = order as f64;
    10.0 * (snr_gain_constant(order) * (osr as f64 / (2.0 * PI)).powf(2.0 * n) / xi).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circuit_resistor_from_beta() {
        let (d, _) = leapfrog_lowpass(6, 4, 2.0 * PI * 268435456.0).unwrap();
        assert!((d.beta - 2f64.powi(30)).abs() / d.beta < 1e-12);
        let r_beta = 1.0 / (d.beta * 1e-12);
        assert!((r_beta - 931.3).abs() < 0.5, "{r_beta}");
        assert_eq!(d.f_s, 2f64.powi(31));
    }

    #[test]
    fn sign_convention_and_round_trip() {
        let d = LeapfrogDesign::new(4, 16, 3.7e5).unwrap();
        assert!(d.beta > 0.0 && d.alpha < 0.0);
        assert_eq!(d.kappa, -d.beta);
        assert!((d.alpha * 4.0 * d.kappa / (d.omega_b * d.omega_b) - 1.0).abs() < 1e-15);
        let back = d.beta * 2.0 * PI / d.osr as f64;
        assert!((back - d.omega_b).abs() / d.omega_b < 1e-12);
        assert_eq!(d.t_s, 1.0 / d.f_s);
    }

    #[test]
    fn hand_built_tridiagonal() {
        let (d, m) = leapfrog_lowpass(3, 8, 1.0).unwrap();
        let beta = 8.0 / (2.0 * PI);
        let alpha = -1.0 / (4.0 * beta);
        #[rustfmt::skip]
        let want = [
            0.0,  alpha, 0.0,
            beta, 0.0,   alpha,
            0.0,  beta,  0.0,
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m.a[(i, j)] - want[3 * i + j]).abs() < 1e-15);
            }
        }
        assert_eq!(m.b[(0, 0)], d.beta);
        assert_eq!(m.gamma, nalgebra::DMatrix::identity(3, 3) * d.kappa);
        assert_eq!(m.output_rows, vec![2]);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(LeapfrogDesign::new(0, 4, 1.0).is_err());
        assert!(LeapfrogDesign::new(2, 0, 1.0).is_err());
        assert!(LeapfrogDesign::new(2, 4, -1.0).is_err());
    }

    #[test]
    fn snr_prediction() {
        assert_eq!(snr_gain_constant(1), 2.0);
        let diff = predicted_snr_db(6, 8, 3.3) - predicted_snr_db(6, 4, 3.3);
        assert!((diff - 120.0 * 2f64.log10()).abs() < 1e-10);
        let direct = 10.0 * (8.0 * (4.0 / (2.0 * PI)).powi(4)).log10();
        assert!((predicted_snr_db(2, 4, 1.0) - direct).abs() < 1e-12);
        assert!((direct - 1.2).abs() < 0.1);
    }
}
