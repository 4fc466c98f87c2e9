//! Rotation-group primitives.
//!
//! Attitude is kept as a plain rotation matrix. Integration of
//! `R' = R S(w)` uses the closed-form exponential map, so every update is
//! itself a rotation and no re-orthonormalisation is ever needed.

use nalgebra::{Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;
pub type Vec6 = Vector6<f64>;
pub type Mat3 = Matrix3<f64>;

/// Skew-symmetric matrix `S(v)` with `S(v) w = v x w`.
#[inline]
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Element of SO(3). Columns are the source frame axes expressed in the
/// target frame, i.e. `R^b_a` maps body coordinates to base coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rotation(Mat3);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Wraps a matrix without checking it. Use [`orthonormality_defect`] when
    /// the source is untrusted.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    /// Rotation about a unit axis by `angle` radians.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        Self::exp(&(axis * (angle / n)))
    }

    /// Exponential map `exp(S(phi))` via Rodrigues' formula.
    pub fn exp(phi: &Vec3) -> Self {
        let theta2 = phi.norm_squared();
        let (a, b) = if theta2 < 1e-8 {
            // Taylor series of sin(t)/t and (1 - cos t)/t^2; truncation error
            // is below 1e-24 in this range.
            (
                1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
                0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
            )
        } else {
            let theta = theta2.sqrt();
            (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
        };
        let s = skew(phi);
        Rotation(Mat3::identity() + s * a + s * s * b)
    }

    #[inline]
    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    #[inline]
    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    #[inline]
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }

    #[inline]
    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Applies the inverse rotation.
    #[inline]
    pub fn apply_inverse(&self, v: &Vec3) -> Vec3 {
        self.0.tr_mul(v)
    }

    /// Row-major flattening `r11, r12, ..., r33`.
    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }
}

/// One exact step of `R' = R S(omega)` over `dt` seconds for constant `omega`.
pub fn integrate_rotation(r: &Rotation, omega: &Vec3, dt: f64) -> Rotation {
    r.compose(&Rotation::exp(&(omega * dt)))
}

/// Frobenius norm of `R^T R - I`.
pub fn orthonormality_defect(r: &Rotation) -> f64 {
    (r.0.transpose() * r.0 - Mat3::identity()).norm()
}
