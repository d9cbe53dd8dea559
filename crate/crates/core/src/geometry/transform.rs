use nalgebra::{Matrix4, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{Mat3, Vec3};
use crate::{Error, Result};

/// Rigid motion acting as `p ↦ R·p + T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Rotation3<f64>,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Rotation3<f64>, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Rotation3::identity(), Vec3::zeros())
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(Rotation3::identity(), t)
    }

    pub fn from_rotation(r: Rotation3<f64>) -> Self {
        Self::new(r, Vec3::zeros())
    }

    pub fn from_quaternion(q: UnitQuaternion<f64>, t: Vec3) -> Self {
        Self::new(q.to_rotation_matrix(), t)
    }

    /// Active z-y-z Euler rotation `Rz(alpha)·Ry(beta)·Rz(gamma)`.
    pub fn rotation_zyz(alpha: f64, beta: f64, gamma: f64) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), alpha)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), beta)
            * Rotation3::from_axis_angle(&Vector3::z_axis(), gamma)
    }

    /// Validates and wraps a 3×3 matrix; fails unless it is a proper rotation to 1e-9.
    pub fn checked_rotation(m: Mat3) -> Result<Rotation3<f64>> {
        let orth = (m.transpose() * m - Mat3::identity()).abs().max();
        let det = m.determinant();
        if orth > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "not a rotation (orthogonality residual {orth:e}, det {det})"
            )));
        }
        Ok(Rotation3::from_matrix_unchecked(m))
    }

    /// Parses a homogeneous row-major 4×4 matrix, re-orthonormalizing rotations
    /// that are within 1e-4 of orthonormal (values printed at limited precision).
    pub fn from_matrix4(m: &Matrix4<f64>) -> Result<Self> {
        let r: Mat3 = m.fixed_view::<3, 3>(0, 0).into_owned();
        let t: Vec3 = m.fixed_view::<3, 1>(0, 3).into_owned();
        let orth = (r.transpose() * r - Mat3::identity()).abs().max();
        if orth > 1e-4 || (r.determinant() - 1.0).abs() > 1e-4 {
            return Err(Error::InvalidParameter("matrix is not a rigid transform".into()));
        }
        let q = UnitQuaternion::from_matrix_eps(&r, 1e-12, 100, UnitQuaternion::identity());
        Ok(Self::new(q.to_rotation_matrix(), t))
    }

    pub fn to_matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let inv = self.rotation.inverse();
        RigidTransform::new(inv, -(inv * self.translation))
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&self.rotation)
    }

    /// Geodesic angle between the two rotations, in [0, π].
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        rotation_distance(&self.rotation, &other.rotation)
    }

    pub fn translation_distance_to(&self, other: &RigidTransform) -> f64 {
        (self.translation - other.translation).norm()
    }
}

impl std::ops::Mul for RigidTransform {
    type Output = RigidTransform;
    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

/// Geodesic distance on SO(3).
pub fn rotation_distance(a: &Rotation3<f64>, b: &Rotation3<f64>) -> f64 {
    let rel = UnitQuaternion::from_rotation_matrix(&(a.inverse() * b));
    let q = rel.quaternion();
    2.0 * q.imag().norm().atan2(q.w.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix4_round_trip_and_validation() {
        let t = RigidTransform::new(
            RigidTransform::rotation_zyz(0.4, 1.2, -2.0),
            Vec3::new(0.1, -0.2, 0.3),
        );
        let back = RigidTransform::from_matrix4(&t.to_matrix4()).unwrap();
        assert!(t.rotation_angle_to(&back) < 1e-9);
        assert!(t.translation_distance_to(&back) < 1e-12);
        let mut bad = t.to_matrix4();
        bad[(0, 0)] = 3.0;
        assert!(RigidTransform::from_matrix4(&bad).is_err());
        assert!(RigidTransform::checked_rotation(Mat3::identity() * 2.0).is_err());
    }

    #[test]
    fn zyz_matches_axis_products() {
        let r = RigidTransform::rotation_zyz(std::f64::consts::FRAC_PI_2, 0.0, 0.0);
        let x = r * Vec3::x();
        assert!((x - Vec3::y()).norm() < 1e-12);
        let r = RigidTransform::rotation_zyz(0.0, std::f64::consts::FRAC_PI_2, 0.0);
        assert!((r * Vec3::z() - Vec3::x()).norm() < 1e-12);
    }

    #[test]
    fn compose_inverse_is_identity() {
        let t = RigidTransform::new(
            RigidTransform::rotation_zyz(-1.0, 0.5, 3.0),
            Vec3::new(1.0, 2.0, 3.0),
        );
        let id = t.compose(&t.inverse());
        assert!(id.rotation_angle_to(&RigidTransform::identity()) < 1e-9);
        assert!(id.translation.norm() < 1e-12);
    }
}
