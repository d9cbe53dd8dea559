use nalgebra::{Rotation3, Unit};
use serde::{Deserialize, Serialize};

use crate::geometry::{rotation_distance, RigidTransform, Vec3};

/// Rotational symmetry of an object in its own frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Symmetry {
    /// Finite group; should include the identity.
    Discrete { rotations: Vec<Rotation3<f64>> },
    /// Invariant under any spin about `axis`; with `flip`, also under a
    /// half-turn that reverses the axis.
    Axial { axis: Unit<Vec3>, flip: bool },
}

impl Symmetry {
    pub fn none() -> Self {
        Symmetry::Discrete { rotations: vec![Rotation3::identity()] }
    }

    /// Identity plus half-turns about the three frame axes (a box with three
    /// distinct edge lengths).
    pub fn box_d2() -> Self {
        let pi = std::f64::consts::PI;
        Symmetry::Discrete {
            rotations: vec![
                Rotation3::identity(),
                Rotation3::from_axis_angle(&Vec3::x_axis(), pi),
                Rotation3::from_axis_angle(&Vec3::y_axis(), pi),
                Rotation3::from_axis_angle(&Vec3::z_axis(), pi),
            ],
        }
    }

    /// Smallest rotation angle between `a` and `b` modulo the symmetry.
    pub fn rotation_error(&self, a: &Rotation3<f64>, b: &Rotation3<f64>) -> f64 {
        match self {
            Symmetry::Discrete { rotations } => rotations
                .iter()
                .map(|s| rotation_distance(a, &(b * s)))
                .fold(f64::INFINITY, f64::min)
                .min(rotation_distance(a, b)),
            Symmetry::Axial { axis, flip } => {
                let (u, v) = (a * axis.into_inner(), b * axis.into_inner());
                let angle = u.cross(&v).norm().atan2(u.dot(&v));
                if *flip {
                    angle.min(std::f64::consts::PI - angle)
                } else {
                    angle
                }
            }
        }
    }
}

/// `(rotation error modulo symmetry, translation error)`.
pub fn pose_error(estimate: &RigidTransform, truth: &RigidTransform, symmetry: &Symmetry) -> (f64, f64) {
    (
        symmetry.rotation_error(&estimate.rotation, &truth.rotation),
        (estimate.translation - truth.translation).norm(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axial_ignores_spin() {
        let s = Symmetry::Axial { axis: Vec3::z_axis(), flip: false };
        let a = Rotation3::from_axis_angle(&Vec3::x_axis(), 0.3);
        let b = a * Rotation3::from_axis_angle(&Vec3::z_axis(), 1.7);
        assert!(s.rotation_error(&a, &b) < 1e-9);
        let c = a * Rotation3::from_axis_angle(&Vec3::y_axis(), 0.2);
        assert!((s.rotation_error(&a, &c) - 0.2).abs() < 1e-9);
        let flipped = a * Rotation3::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI);
        assert!((s.rotation_error(&a, &flipped) - std::f64::consts::PI).abs() < 1e-9);
        let sf = Symmetry::Axial { axis: Vec3::z_axis(), flip: true };
        assert!(sf.rotation_error(&a, &flipped) < 1e-9);
    }

    #[test]
    fn discrete_group() {
        let s = Symmetry::box_d2();
        let a = Rotation3::from_axis_angle(&Vec3::y_axis(), 0.4);
        let b = a * Rotation3::from_axis_angle(&Vec3::z_axis(), std::f64::consts::PI - 0.1);
        assert!((s.rotation_error(&a, &b) - 0.1).abs() < 1e-9);
        assert!((Symmetry::none().rotation_error(&a, &b) - (std::f64::consts::PI - 0.1)).abs() < 1e-9);
    }
}
