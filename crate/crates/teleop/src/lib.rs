//! Bilateral virtual coupling between a haptic device and a robot, guided
//! reach trajectories, and the simulated Cartesian devices they act on.

pub mod control;
pub mod device;
pub mod error;
pub mod trajectory;
pub mod world;

pub use control::{
    bilateral_step, guidance_wrench, hybrid_torques, orientation_error, CouplingGains, ControlOutput, GainBlock,
};
pub use device::{DevicePose, Jacobian, SimDevice, Wrench};
pub use error::{Error, Result};
pub use trajectory::{
    closest_trajectory_pose, plan_reach_trajectory, project_near, GuidanceTrajectory, PlanOptions, ProgressTracker, TrajectoryPose,
};
pub use world::{step_simulation, TeleopConfig, TeleopWorld, TickRecord};
