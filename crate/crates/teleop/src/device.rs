use nalgebra::{Matrix6, UnitQuaternion, Vector6};
use serde::{Deserialize, Serialize};
use telegrasp_core::geometry::Vec3;

use crate::{Error, Result};

/// Cartesian state of a device end effector. Angular velocity is expressed
/// in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DevicePose {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
    pub linear_velocity: Vec3,
    pub angular_velocity: Vec3,
}

impl Default for DevicePose {
    fn default() -> Self {
        Self::at(Vec3::zeros(), UnitQuaternion::identity())
    }
}

impl DevicePose {
    pub fn at(position: Vec3, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation, linear_velocity: Vec3::zeros(), angular_velocity: Vec3::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.linear_velocity.iter()).chain(self.angular_velocity.iter()).all(|v| v.is_finite())
            && self.orientation.coords.iter().all(|v| v.is_finite())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::InvalidParameter("non-finite device state".into()));
        }
        if (self.orientation.coords.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("orientation is not a unit quaternion".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl Wrench {
    pub const ZERO: Wrench = Wrench { force: Vec3::new(0.0, 0.0, 0.0), torque: Vec3::new(0.0, 0.0, 0.0) };

    pub fn new(force: Vec3, torque: Vec3) -> Self {
        Self { force, torque }
    }

    pub fn force_only(force: Vec3) -> Self {
        Self { force, torque: Vec3::zeros() }
    }

    pub fn as_vector(&self) -> Vector6<f64> {
        Vector6::new(self.force.x, self.force.y, self.force.z, self.torque.x, self.torque.y, self.torque.z)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self { force: v.fixed_rows::<3>(0).into(), torque: v.fixed_rows::<3>(3).into() }
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.torque.iter()).all(|v| v.is_finite())
    }
}

impl std::ops::Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench { force: self.force + rhs.force, torque: self.torque + rhs.torque }
    }
}

impl std::ops::Neg for Wrench {
    type Output = Wrench;
    fn neg(self) -> Wrench {
        Wrench { force: -self.force, torque: -self.torque }
    }
}

/// Maps a Cartesian wrench to joint torques, `τ = Jᵀ·F`. The simulated
/// devices are Cartesian, so the default is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jacobian(pub Matrix6<f64>);

impl Default for Jacobian {
    fn default() -> Self {
        Jacobian(Matrix6::identity())
    }
}

impl Jacobian {
    pub fn transpose_apply(&self, w: &Wrench) -> Vector6<f64> {
        self.0.transpose() * w.as_vector()
    }

    /// The Cartesian wrench producing joint torques `tau`.
    pub fn wrench_from_torques(&self, tau: &Vector6<f64>) -> Result<Wrench> {
        let jt = self.0.transpose();
        let w = jt.lu().solve(tau).ok_or_else(|| Error::InvalidParameter("singular Jacobian".into()))?;
        Ok(Wrench::from_vector(&w))
    }
}

/// Point mass with isotropic rotational inertia and viscous damping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDevice {
    pub mass: f64,
    pub inertia: f64,
    pub linear_damping: f64,
    pub angular_damping: f64,
    pub jacobian: Jacobian,
    pub state: DevicePose,
}

impl SimDevice {
    pub fn new(mass: f64, inertia: f64, linear_damping: f64, angular_damping: f64, state: DevicePose) -> Result<Self> {
        if !(mass > 0.0 && inertia > 0.0) || !(linear_damping >= 0.0 && angular_damping >= 0.0) {
            return Err(Error::InvalidParameter("mass and inertia must be positive, damping non-negative".into()));
        }
        state.validate()?;
        Ok(Self { mass, inertia, linear_damping, angular_damping, jacobian: Jacobian::default(), state })
    }

    /// One semi-implicit Euler step under the Cartesian wrench `w`; the
    /// orientation advances through the exponential map.
    pub fn step(&mut self, w: &Wrench, dt: f64) {
        let s = &mut self.state;
        let a = (w.force - s.linear_velocity * self.linear_damping) / self.mass;
        s.linear_velocity += a * dt;
        s.position += s.linear_velocity * dt;
        let alpha = (w.torque - s.angular_velocity * self.angular_damping) / self.inertia;
        s.angular_velocity += alpha * dt;
        let dq = UnitQuaternion::from_scaled_axis(s.angular_velocity * dt);
        s.orientation = UnitQuaternion::new_normalize((dq * s.orientation).into_inner());
    }

    /// Step under joint torques, mapped back through the Jacobian.
    pub fn step_torques(&mut self, tau: &Vector6<f64>, dt: f64) -> Result<()> {
        let w = self.jacobian.wrench_from_torques(tau)?;
        self.step(&w, dt);
        Ok(())
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.mass * self.state.linear_velocity.norm_squared()
            + 0.5 * self.inertia * self.state.angular_velocity.norm_squared()
    }
}
