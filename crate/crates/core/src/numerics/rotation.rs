use std::ops::{Add, Mul, Neg, Sub};

/// A real 2×2 matrix, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2 { a11, a12, a21, a22 }
    }

    /// `[[a, -b], [b, a]]`, the real form of the complex scalar `a + ib`.
    pub const fn scaled_rotation(a: f64, b: f64) -> Self {
        Mat2::new(a, -b, b, a)
    }

    pub fn transpose(&self) -> Self {
        Mat2::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn scale(&self, k: f64) -> Self {
        Mat2::new(k * self.a11, k * self.a12, k * self.a21, k * self.a22)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a21 * v[0] + self.a22 * v[1],
        ]
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        [
            self.a11 - other.a11,
            self.a12 - other.a12,
            self.a21 - other.a21,
            self.a22 - other.a22,
        ]
        .iter()
        .fold(0.0_f64, |m, d| m.max(d.abs()))
    }

    /// Decomposes `[[a, -b], [b, a]]` into `(r, phi)` with `r·Θ(phi)`.
    ///
    /// Returns `None` when the matrix does not have the scaled-rotation shape.
    pub fn as_scaled_rotation(&self) -> Option<(f64, f64)> {
        let tol = 1e-12 * (self.a11.abs() + self.a21.abs()).max(f64::MIN_POSITIVE);
        if (self.a11 - self.a22).abs() > tol || (self.a12 + self.a21).abs() > tol {
            return None;
        }
        Some((self.a11.hypot(self.a21), self.a21.atan2(self.a11)))
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, r: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 * r.a11 + self.a12 * r.a21,
            self.a11 * r.a12 + self.a12 * r.a22,
            self.a21 * r.a11 + self.a22 * r.a21,
            self.a21 * r.a12 + self.a22 * r.a22,
        )
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, r: Mat2) -> Mat2 {
        Mat2::new(self.a11 + r.a11, self.a12 + r.a12, self.a21 + r.a21, self.a22 + r.a22)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, r: Mat2) -> Mat2 {
        Mat2::new(self.a11 - r.a11, self.a12 - r.a12, self.a21 - r.a21, self.a22 - r.a22)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-1.0)
    }
}

/// The rotation matrix `Θ(φ) = [[cos φ, −sin φ], [sin φ, cos φ]]`.
pub fn rotation(phi: f64) -> Mat2 {
    let (s, c) = phi.sin_cos();
    Mat2::new(c, -s, s, c)
}

/// `√(a² + b²)·Θ(atan2(b, a))`, valid in every quadrant.
pub fn scaled_rotation_polar(a: f64, b: f64) -> Mat2 {
    rotation(b.atan2(a)).scale(a.hypot(b))
}

/// Closed form of `∫_{-Δ}^{Δ} Θ(φτ) dτ = (2/φ)·sin(φΔ)·I`, with the `φ → 0` limit `2Δ·I`.
pub fn rotation_integral(phi: f64, delta: f64) -> Mat2 {
    let x = phi * delta;
    let k = if x.abs() < 1e-8 {
        2.0 * delta * (1.0 - x * x / 6.0)
    } else {
        2.0 * x.sin() / phi
    };
    Mat2::IDENTITY.scale(k)
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(phi: f64) -> f64 {
    use std::f64::consts::PI;
    let mut r = phi.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}
