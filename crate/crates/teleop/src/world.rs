use nalgebra::{UnitQuaternion, Vector6};
use serde::{Deserialize, Serialize};
use telegrasp_core::geometry::Vec3;

use crate::control::{bilateral_step, guidance_wrench, hybrid_torques, orientation_error, CouplingGains};
use crate::device::{DevicePose, SimDevice, Wrench};
use crate::trajectory::{GuidanceTrajectory, ProgressTracker};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    pub mass: f64,
    pub inertia: f64,
    pub linear_damping: f64,
    pub angular_damping: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self { mass: 1.0, inertia: 0.01, linear_damping: 1.0, angular_damping: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeleopConfig {
    pub dt: f64,
    /// Physics ticks per control update (closest-pose lookup).
    pub control_period: u32,
    pub haptic: DeviceParams,
    pub robot: DeviceParams,
    pub coupling: CouplingGains,
    pub guidance: CouplingGains,
}

impl Default for TeleopConfig {
    fn default() -> Self {
        let d = DeviceParams::default();
        Self {
            dt: 0.001,
            control_period: 10,
            haptic: d,
            robot: d,
            coupling: CouplingGains::critical(200.0, 2.0, d.mass, d.inertia),
            guidance: CouplingGains::critical(400.0, 4.0, d.mass, d.inertia),
        }
    }
}

impl TeleopConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(Error::InvalidParameter("dt must be in (0, 10 ms]".into()));
        }
        if self.control_period == 0 {
            return Err(Error::InvalidParameter("control_period must be at least 1".into()));
        }
        self.coupling.validate()?;
        self.guidance.validate()
    }
}

/// One physics tick as logged for replay.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub t: f64,
    pub x_h: Vec3,
    pub x_r: Vec3,
    pub f_r: Wrench,
    pub f_star: Wrench,
    /// Robot joint torques and the device's coupling torques, operator input excluded.
    pub tau_r: Vector6<f64>,
    pub tau_h: Vector6<f64>,
    pub guidance: bool,
}

/// Haptic device and robot coupled through the bilateral (or assisted) law.
#[derive(Debug, Clone, PartialEq)]
pub struct TeleopWorld {
    pub cfg: TeleopConfig,
    pub haptic: SimDevice,
    pub robot: SimDevice,
    pub tick: u64,
    trajectory: Option<GuidanceTrajectory>,
    guidance: bool,
    tracker: ProgressTracker,
    target: Option<DevicePose>,
    target_tick: u64,
    last: TickRecord,
}

impl TeleopWorld {
    /// Both devices start at rest at `start`.
    pub fn new(cfg: TeleopConfig, start: DevicePose) -> Result<Self> {
        cfg.validate()?;
        let dev = |p: &DeviceParams| SimDevice::new(p.mass, p.inertia, p.linear_damping, p.angular_damping, start);
        Ok(Self {
            haptic: dev(&cfg.haptic)?,
            robot: dev(&cfg.robot)?,
            cfg,
            tick: 0,
            trajectory: None,
            guidance: false,
            tracker: ProgressTracker::default(),
            target: None,
            target_tick: 0,
            last: TickRecord::default(),
        })
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.cfg.dt
    }

    pub fn trajectory(&self) -> Option<&GuidanceTrajectory> {
        self.trajectory.as_ref()
    }

    /// Installs a new path and restarts progress tracking along it.
    pub fn set_trajectory(&mut self, traj: Option<GuidanceTrajectory>) {
        self.trajectory = traj;
        self.tracker = ProgressTracker::default();
        self.target = None;
    }

    pub fn guidance(&self) -> bool {
        self.guidance
    }

    /// Guidance only engages while a trajectory is installed.
    pub fn set_guidance(&mut self, on: bool) {
        if on != self.guidance {
            self.tracker = ProgressTracker::default();
            self.target = None;
        }
        self.guidance = on;
    }

    /// Closest trajectory pose from the latest control update, with its
    /// finite-difference velocity.
    pub fn guidance_target(&self) -> Option<&DevicePose> {
        self.target.as_ref()
    }

    /// The guidance setpoint at the current tick: the latest target advanced
    /// by its velocity since the control update.
    pub fn guidance_setpoint(&self) -> Option<DevicePose> {
        let t = self.target?;
        let dt = (self.tick - self.target_tick) as f64 * self.cfg.dt;
        Some(DevicePose {
            position: t.position + t.linear_velocity * dt,
            orientation: UnitQuaternion::from_scaled_axis(t.angular_velocity * dt) * t.orientation,
            ..t
        })
    }

    pub fn progress(&self) -> usize {
        self.tracker.index
    }

    pub fn last_record(&self) -> &TickRecord {
        &self.last
    }

    /// Kinetic energy of both devices plus the energy stored in the coupling spring.
    pub fn mechanical_energy(&self) -> f64 {
        let (h, r) = (&self.haptic.state, &self.robot.state);
        let k = &self.cfg.coupling;
        self.haptic.kinetic_energy()
            + self.robot.kinetic_energy()
            + 0.5 * k.linear.stiffness * (h.position - r.position).norm_squared()
            + 0.5 * k.angular.stiffness * orientation_error(&h.orientation, &r.orientation).norm_squared()
    }

    fn update_target(&mut self) {
        let Some(traj) = &self.trajectory else { return };
        let pose = self.tracker.update_projected(traj, &self.robot.state.position);
        let period = self.cfg.dt * self.cfg.control_period as f64;
        let mut next = DevicePose::at(pose.position, pose.orientation);
        if let Some(prev) = &self.target {
            next.linear_velocity = (next.position - prev.position) / period;
            next.angular_velocity = orientation_error(&next.orientation, &prev.orientation) / period;
        }
        self.target = Some(next);
        self.target_tick = self.tick;
    }
}

/// Advances the world by one tick of length `dt` with the operator pushing
/// on the haptic device with `operator`.
pub fn step_simulation(world: &mut TeleopWorld, operator: &Wrench, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(Error::InvalidParameter(format!("dt {dt} outside (0, 10 ms]")));
    }
    let guided = world.guidance && world.trajectory.is_some();
    if guided && (world.target.is_none() || world.tick % world.cfg.control_period as u64 == 0) {
        world.update_target();
    }
    let (h, r) = (world.haptic.state, world.robot.state);
    let out = bilateral_step(&h, &r, &world.cfg.coupling, &world.robot.jacobian, &world.haptic.jacobian);
    let (f_star, tau_r, tau_h) = match (guided, world.guidance_setpoint()) {
        (true, Some(target)) => {
            let f_star = guidance_wrench(&target, &r, &world.cfg.guidance);
            let (tr, th) = hybrid_torques(&out.f_r, &f_star, &world.robot.jacobian, &world.haptic.jacobian);
            (f_star, tr, th)
        }
        _ => (Wrench::ZERO, out.tau_r, out.tau_h),
    };
    let coupling = tau_h;
    let tau_h = tau_h + world.haptic.jacobian.transpose_apply(operator);
    world.haptic.step_torques(&tau_h, dt)?;
    world.robot.step_torques(&tau_r, dt)?;
    world.tick += 1;
    if !(world.haptic.state.is_finite() && world.robot.state.is_finite()) {
        return Err(Error::NonFinite {
            time: world.time(),
            dump: format!("haptic {:?} robot {:?} f_r {:?} f_star {:?}", world.haptic.state, world.robot.state, out.f_r, f_star),
        });
    }
    world.last = TickRecord {
        tick: world.tick,
        t: world.time(),
        x_h: world.haptic.state.position,
        x_r: world.robot.state.position,
        f_r: out.f_r,
        f_star,
        tau_r,
        tau_h: coupling,
        guidance: guided,
    };
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dt() {
        let mut w = TeleopWorld::new(TeleopConfig::default(), DevicePose::default()).unwrap();
        assert!(step_simulation(&mut w, &Wrench::ZERO, 0.0).is_err());
        assert!(step_simulation(&mut w, &Wrench::ZERO, 0.011).is_err());
        assert!(TeleopWorld::new(TeleopConfig { dt: 0.02, ..Default::default() }, DevicePose::default()).is_err());
    }

    #[test]
    fn non_finite_input_is_reported() {
        let mut w = TeleopWorld::new(TeleopConfig::default(), DevicePose::default()).unwrap();
        let bad = Wrench::force_only(Vec3::new(f64::NAN, 0.0, 0.0));
        let err = step_simulation(&mut w, &bad, 0.001).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "{err}");
    }
}
