use nalgebra::{UnitQuaternion, Vector6};
use serde::{Deserialize, Serialize};
use telegrasp_core::geometry::Vec3;

use crate::device::{DevicePose, Jacobian, Wrench};
use crate::{Error, Result};

/// Stiffness and damping for one block (translational or rotational).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainBlock {
    pub stiffness: f64,
    pub damping: f64,
}

impl GainBlock {
    /// Damping `2·√(k·m)`.
    pub fn critical(stiffness: f64, mass: f64) -> Self {
        Self { stiffness, damping: 2.0 * (stiffness * mass).sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingGains {
    /// N/m and N·s/m.
    pub linear: GainBlock,
    /// Nm/rad and Nm·s/rad.
    pub angular: GainBlock,
}

impl CouplingGains {
    pub fn critical(k_lin: f64, k_ang: f64, mass: f64, inertia: f64) -> Self {
        Self { linear: GainBlock::critical(k_lin, mass), angular: GainBlock::critical(k_ang, inertia) }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.linear.stiffness, self.linear.damping, self.angular.stiffness, self.angular.damping];
        if all.iter().all(|g| g.is_finite() && *g >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("gains must be finite and non-negative".into()))
        }
    }

    /// `K_p·(X_a − X_b) + K_d·(Ẋ_a − Ẋ_b)` on both blocks.
    fn wrench(&self, a: &DevicePose, b: &DevicePose) -> Wrench {
        Wrench {
            force: (a.position - b.position) * self.linear.stiffness
                + (a.linear_velocity - b.linear_velocity) * self.linear.damping,
            torque: orientation_error(&a.orientation, &b.orientation) * self.angular.stiffness
                + (a.angular_velocity - b.angular_velocity) * self.angular.damping,
        }
    }
}

/// Rotation vector of `target · current⁻¹` along the shorter arc: the
/// world-frame axis·angle that turns `current` into `target`.
pub fn orientation_error(target: &UnitQuaternion<f64>, current: &UnitQuaternion<f64>) -> Vec3 {
    let mut q = (target * current.inverse()).into_inner();
    if q.w < 0.0 {
        q = -q;
    }
    let v = q.imag();
    let s = v.norm();
    if s < 1e-15 {
        return Vec3::zeros();
    }
    v * (2.0 * s.atan2(q.w) / s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub f_r: Wrench,
    pub tau_r: Vector6<f64>,
    pub tau_h: Vector6<f64>,
}

/// Virtual spring-damper from robot to device: the robot is pulled toward
/// the device by `F_r`, the device receives the reaction.
pub fn bilateral_step(
    h: &DevicePose,
    r: &DevicePose,
    gains: &CouplingGains,
    j_r: &Jacobian,
    j_h: &Jacobian,
) -> ControlOutput {
    let f_r = gains.wrench(h, r);
    ControlOutput { f_r, tau_r: j_r.transpose_apply(&f_r), tau_h: -j_h.transpose_apply(&f_r) }
}

/// Restoring wrench toward the trajectory pose `target` (with its
/// finite-difference velocity).
pub fn guidance_wrench(target: &DevicePose, r: &DevicePose, gains: &CouplingGains) -> Wrench {
    gains.wrench(target, r)
}

/// Assisted-mode torques. The robot gets the operator's force plus the
/// guidance torque; the device gets the force reaction plus the guidance
/// force, and no torque.
///
/// The guidance force enters the device side with a positive sign so it pulls
/// the operator toward the path.
pub fn hybrid_torques(f_r: &Wrench, f_star: &Wrench, j_r: &Jacobian, j_h: &Jacobian) -> (Vector6<f64>, Vector6<f64>) {
    let robot = Wrench::new(f_r.force, f_star.torque);
    let device = Wrench::force_only(-f_r.force + f_star.force);
    (j_r.transpose_apply(&robot), j_h.transpose_apply(&device))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_error_is_shortest_arc() {
        let a = UnitQuaternion::from_euler_angles(0.0, 0.0, 0.3);
        let e = orientation_error(&a, &UnitQuaternion::identity());
        assert!((e - Vec3::new(0.0, 0.0, 0.3)).norm() < 1e-12);
        let b = UnitQuaternion::from_euler_angles(0.0, 0.0, 3.0);
        let c = UnitQuaternion::from_euler_angles(0.0, 0.0, -3.0);
        let e = orientation_error(&b, &c);
        assert!((e.z - (6.0 - std::f64::consts::TAU)).abs() < 1e-12, "{e}");
        // sign of the quaternion does not matter
        let neg = UnitQuaternion::new_unchecked(-a.into_inner());
        assert!(orientation_error(&neg, &UnitQuaternion::identity()).norm() - 0.3 < 1e-12);
    }

    #[test]
    fn gains_validate() {
        assert!(CouplingGains::critical(200.0, 2.0, 1.0, 0.01).validate().is_ok());
        let mut g = CouplingGains::critical(200.0, 2.0, 1.0, 0.01);
        g.linear.damping = -1.0;
        assert!(g.validate().is_err());
    }
}
