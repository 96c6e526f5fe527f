//! Matrix exponential and exact zero-order-hold discretization.
//!
//! `expm` uses scaling and squaring around a degree-13 Padé approximant with
//! the standard 1-norm based choice of the scaling power.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Default largest matrix dimension accepted by [`expm`].
pub const DEFAULT_DIMENSION_CAP: usize = 64;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which the degree-13 approximant is accurate to unit roundoff.
const THETA13: f64 = 5.371920351148152;

fn check_finite(a: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Matrix exponential with the default dimension cap.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    expm_capped(a, DEFAULT_DIMENSION_CAP)
}

/// Matrix exponential of a square matrix of dimension at most `cap`.
pub fn expm_capped(a: &DMatrix<f64>, cap: usize) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expm needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if n > cap {
        return Err(Error::DimensionCap { dim: n, cap });
    }
    check_finite(a, "expm input")?;
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }

    let norm = a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * 2f64.powi(-squarings);

    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &ident * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &ident * b[0];

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::InvalidArgument("singular Padé denominator".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    check_finite(&r, "expm result")?;
    Ok(r)
}

/// Exact one-interval propagation blocks of `ẋ = A x + B w` with `w` held constant.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedSystem {
    /// `exp(A·interval)`
    pub phi: DMatrix<f64>,
    /// `∫₀^interval exp(Aτ) dτ · B`
    pub gamma: DMatrix<f64>,
    pub interval: f64,
}

/// Zero-order-hold discretization through the block-augmented exponential
/// `exp([[A, B], [0, 0]]·dt)`, which needs no inverse of `A`.
pub fn discretize(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64) -> Result<DiscretizedSystem> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("interval must be positive, got {dt}")));
    }
    discretize_interval(a, b, dt)
}

fn discretize_interval(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    dt: f64,
) -> Result<DiscretizedSystem> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    check_finite(a, "discretize A")?;
    check_finite(b, "discretize B")?;
    let m = b.ncols();
    let mut aug = DMatrix::<f64>::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * dt));
    let e = expm_capped(&aug, DEFAULT_DIMENSION_CAP.max(n + m))?;
    Ok(DiscretizedSystem {
        phi: e.view((0, 0), (n, n)).into_owned(),
        gamma: e.view((0, n), (n, m)).into_owned(),
        interval: dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rotation;

    fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn zero_matrix_gives_identity() {
        let z = DMatrix::<f64>::zeros(5, 5);
        assert_eq!(expm(&z).unwrap(), DMatrix::identity(5, 5));
    }

    #[test]
    fn skew_generator_is_rotation() {
        let phi = 1.1;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -phi, phi, 0.0]);
        let e = expm(&a).unwrap();
        let r = rotation(phi);
        let r = DMatrix::from_row_slice(2, 2, &[r.a11, r.a12, r.a21, r.a22]);
        assert!((e - r).amax() < 1e-12);
    }

    #[test]
    fn large_norm_uses_squaring() {
        // diagonal: exact answer known
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-30.0, 2.5, -0.1]));
        let e = expm(&a).unwrap();
        let want = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            (-30f64).exp(),
            2.5f64.exp(),
            (-0.1f64).exp(),
        ]));
        assert!(rel_frobenius(&e, &want) < 1e-13);
    }

    #[test]
    fn dimension_cap_and_non_finite() {
        let a = DMatrix::<f64>::zeros(3, 3);
        assert!(matches!(expm_capped(&a, 2), Err(Error::DimensionCap { dim: 3, cap: 2 })));
        let mut b = DMatrix::<f64>::zeros(2, 2);
        b[(0, 1)] = f64::NAN;
        assert!(matches!(expm(&b), Err(Error::NonFinite(_))));
    }

    #[test]
    fn pure_integrator() {
        let a = DMatrix::from_element(1, 1, 0.0);
        let b = DMatrix::from_element(1, 1, 3.0);
        let d = discretize(&a, &b, 0.25).unwrap();
        assert!((d.phi[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((d.gamma[(0, 0)] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_positive_interval() {
        let a = DMatrix::<f64>::zeros(1, 1);
        assert!(discretize(&a, &a, 0.0).is_err());
        assert!(discretize(&a, &a, -1.0).is_err());
    }

    #[test]
    fn oscillator_hold_gain_matches_rotation_integral() {
        let (omega, t) = (3.0, 0.7);
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -omega, omega, 0.0]);
        let d = discretize(&a, &DMatrix::identity(2, 2), t).unwrap();
        let want = rotation(omega * t / 2.0).scale(2.0 / omega * (omega * t / 2.0).sin());
        let got = crate::numerics::Mat2::new(d.gamma[(0, 0)], d.gamma[(0, 1)], d.gamma[(1, 0)], d.gamma[(1, 1)]);
        assert!(got.max_abs_diff(&want) < 1e-13);
    }
}
