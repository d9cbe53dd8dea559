use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::{RigidTransform, Vec3};

/// Unit dual quaternion `p + ε·q`, with `p` the rotation and `q = ½·t·p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitDualQuaternion {
    pub real: Quaternion<f64>,
    pub dual: Quaternion<f64>,
}

/// Screw-style error between two poses, as used for grasp re-ranking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqError {
    /// Translation of the relative pose.
    pub translation: Vec3,
    /// Screw axis of the relative pose. For a pure translation this is the
    /// translation direction, and `+z` for the identity.
    pub axis: Vec3,
    /// Rotation angle in [0, π].
    pub angle: f64,
}

impl UnitDualQuaternion {
    pub fn identity() -> Self {
        Self {
            real: Quaternion::identity(),
            dual: Quaternion::new(0.0, 0.0, 0.0, 0.0),
        }
    }

    pub fn from_rotation_translation(rotation: &UnitQuaternion<f64>, translation: &Vec3) -> Self {
        let p = *rotation.quaternion();
        let t = Quaternion::from_imag(*translation);
        Self { real: p, dual: t * p * 0.5 }
    }

    pub fn from_transform(t: &RigidTransform) -> Self {
        Self::from_rotation_translation(&t.quaternion(), &t.translation)
    }

    /// Rebuilds a unit dual quaternion from 8 raw numbers
    /// `(w, x, y, z ; w', x', y', z')`, projecting onto the unit constraints.
    pub fn from_array(v: [f64; 8]) -> Option<Self> {
        let real = Quaternion::new(v[0], v[1], v[2], v[3]);
        let norm = real.norm();
        if !(norm.is_finite() && norm > 1e-12) {
            return None;
        }
        let real = real / norm;
        let dual = Quaternion::new(v[4], v[5], v[6], v[7]) / norm;
        let dual = dual - real * real.dot(&dual);
        Some(Self { real, dual })
    }

    pub fn to_array(&self) -> [f64; 8] {
        let (p, q) = (self.real, self.dual);
        [p.w, p.i, p.j, p.k, q.w, q.i, q.j, q.k]
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::new_normalize(self.real)
    }

    /// `t = 2·q·p*`.
    pub fn translation(&self) -> Vec3 {
        (self.dual * self.real.conjugate() * 2.0).imag()
    }

    pub fn to_transform(&self) -> RigidTransform {
        RigidTransform::from_quaternion(self.rotation(), self.translation())
    }

    /// Dual-quaternion conjugate `p* + ε·q*`; the inverse for unit elements.
    pub fn conjugate(&self) -> Self {
        Self {
            real: self.real.conjugate(),
            dual: self.dual.conjugate(),
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        Self {
            real: self.real * rhs.real,
            dual: self.real * rhs.dual + self.dual * rhs.real,
        }
    }

    /// Same pose with the real part's scalar made non-negative.
    pub fn canonical(&self) -> Self {
        if self.real.w < 0.0 {
            Self { real: -self.real, dual: -self.dual }
        } else {
            *self
        }
    }

    /// Relative pose `q_e = self* · hand` split into translation and
    /// angle-axis parts.
    pub fn error_to(&self, hand: &Self) -> DqError {
        dq_error_components(self, hand)
    }
}

impl std::ops::Mul for UnitDualQuaternion {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        UnitDualQuaternion::mul(&self, &rhs)
    }
}

pub fn dq_from_transform(t: &RigidTransform) -> UnitDualQuaternion {
    UnitDualQuaternion::from_transform(t)
}

pub fn transform_from_dq(q: &UnitDualQuaternion) -> RigidTransform {
    q.to_transform()
}

/// Error components of `q_e = q_g* · q_hand`.
///
/// The rotational part is canonicalized to a non-negative scalar so the angle
/// stays in [0, π]. Below an angle of 1e-12 the motion is a pure translation
/// and the axis follows it (`+z` if there is none).
pub fn dq_error_components(q_g: &UnitDualQuaternion, q_hand: &UnitDualQuaternion) -> DqError {
    let e = q_g.conjugate().mul(q_hand).canonical();
    let translation = e.translation();
    let v = e.real.imag();
    let s = v.norm();
    let angle = 2.0 * s.atan2(e.real.w);
    if angle < 1e-12 || s < 1e-15 {
        let t = translation.norm();
        let axis = if t > 1e-15 { translation / t } else { Vec3::z() };
        return DqError { translation, axis, angle: 0.0 };
    }
    DqError { translation, axis: v / s, angle }
}
