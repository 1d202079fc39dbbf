//! Frame algebra: rotations, rigid transforms and the Z-Y-X Euler convention.
//!
//! World frame is z-up with its origin at a tank corner, so underwater depths
//! are negative z. Angles are radians throughout.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Point or direction in ℝ³.
pub type Vec3 = Vector3<f64>;

/// Orthonormality / determinant tolerance for [`RotMat3`].
pub const ROT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("rotation is at gimbal lock (|r20| = {0})")]
    GimbalLock(f64),
    #[error("matrix is not a proper rotation (orthonormality error {ortho:e}, det {det})")]
    NotARotation { ortho: f64, det: f64 },
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// A member of SO(3), stored as a 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix3<f64>", into = "Matrix3<f64>")]
pub struct RotMat3(Matrix3<f64>);

impl RotMat3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality and det = +1 within [`ROT_TOL`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let ortho = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if !m.iter().all(|v| v.is_finite()) || ortho > ROT_TOL || (det - 1.0).abs() > ROT_TOL {
            return Err(GeometryError::NotARotation { ortho, det });
        }
        Ok(Self(m))
    }

    /// Rotation about x by `a`.
    pub fn rx(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    /// Rotation about y by `a`.
    pub fn ry(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    /// Rotation about z by `a`.
    pub fn rz(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Largest elementwise deviation of RᵀR from I.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity())
            .abs()
            .max()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    /// Decomposes into Z-Y-X Euler angles.
    pub fn to_euler_zyx(&self) -> Result<EulerZYX, GeometryError> {
        let m = &self.0;
        let r20 = m[(2, 0)];
        if r20.abs() >= 1.0 - ROT_TOL {
            return Err(GeometryError::GimbalLock(r20.abs()));
        }
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        let pitch = (-r20).atan2(m[(0, 0)].hypot(m[(1, 0)]));
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        Ok(EulerZYX {
            yaw: wrap_angle(yaw),
            pitch,
            roll: wrap_angle(roll),
        })
    }
}

impl Mul for RotMat3 {
    type Output = RotMat3;

    fn mul(self, rhs: RotMat3) -> RotMat3 {
        RotMat3(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for RotMat3 {
    type Output = Vec3;

    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl TryFrom<Matrix3<f64>> for RotMat3 {
    type Error = GeometryError;

    fn try_from(m: Matrix3<f64>) -> Result<Self, Self::Error> {
        Self::from_matrix(m)
    }
}

impl From<RotMat3> for Matrix3<f64> {
    fn from(r: RotMat3) -> Self {
        r.0
    }
}

/// Z-Y-X (yaw, pitch, roll) Euler angles: R = Rz(yaw)·Ry(pitch)·Rx(roll).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerZYX {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl EulerZYX {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self { yaw, pitch, roll }
    }

    pub fn from_degrees(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self::new(yaw.to_radians(), pitch.to_radians(), roll.to_radians())
    }

    /// |pitch| < π/2, yaw and roll in (−π, π], everything finite.
    pub fn is_valid(&self) -> bool {
        let in_range = |a: f64| a.is_finite() && a > -PI && a <= PI;
        in_range(self.yaw) && in_range(self.roll) && self.pitch.abs() < PI / 2.0
    }

    pub fn to_rot(&self) -> RotMat3 {
        RotMat3::rz(self.yaw) * RotMat3::ry(self.pitch) * RotMat3::rx(self.roll)
    }
}

/// A rigid transform `[rot | trans]` mapping points of a child frame into a parent frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose3 {
    pub rot: RotMat3,
    pub trans: Vec3,
}

impl Default for Pose3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose3 {
    pub fn new(rot: RotMat3, trans: Vec3) -> Self {
        Self { rot, trans }
    }

    pub fn identity() -> Self {
        Self::new(RotMat3::identity(), Vec3::zeros())
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(RotMat3::identity(), t)
    }

    pub fn from_euler(e: EulerZYX, trans: Vec3) -> Self {
        Self::new(e.to_rot(), trans)
    }

    /// `self ∘ other`: first apply `other`, then `self`.
    pub fn compose(&self, other: &Pose3) -> Pose3 {
        Pose3 {
            rot: self.rot * other.rot,
            trans: self.rot * other.trans + self.trans,
        }
    }

    pub fn inverse(&self) -> Pose3 {
        let rt = self.rot.transpose();
        Pose3 {
            rot: rt,
            trans: -(rt * self.trans),
        }
    }

    pub fn transform_point(&self, v: &Vec3) -> Vec3 {
        self.rot * *v + self.trans
    }

    pub fn transform_direction(&self, v: &Vec3) -> Vec3 {
        self.rot * *v
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut h = Matrix4::identity();
        h.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rot.matrix());
        h.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.trans);
        h
    }
}

impl Mul for Pose3 {
    type Output = Pose3;

    fn mul(self, rhs: Pose3) -> Pose3 {
        self.compose(&rhs)
    }
}
