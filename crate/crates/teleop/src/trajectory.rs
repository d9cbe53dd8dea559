use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};
use telegrasp_core::geometry::{RigidTransform, Vec3, VoxelGrid};
use telegrasp_core::grasp::{check_collision, Grasp, GripperModel};

use crate::device::DevicePose;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPose {
    /// Arc length from the start, metres.
    pub s: f64,
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
}

impl TrajectoryPose {
    pub fn transform(&self) -> RigidTransform {
        RigidTransform::from_quaternion(self.orientation, self.position)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceTrajectory {
    pub poses: Vec<TrajectoryPose>,
    /// Corner points of the polyline, start and grasp included.
    pub waypoints: Vec<Vec3>,
    pub grasp_id: usize,
    pub ds: f64,
}

impl GuidanceTrajectory {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.poses.last().map_or(0.0, |p| p.s)
    }

    pub fn end(&self) -> &TrajectoryPose {
        self.poses.last().expect("trajectory is never empty")
    }

    /// Builds the discretised path through `waypoints`, interpolating the
    /// orientation by normalised arc length. Steps never exceed `ds`.
    pub fn through(
        waypoints: Vec<Vec3>,
        start: UnitQuaternion<f64>,
        end: UnitQuaternion<f64>,
        ds: f64,
        grasp_id: usize,
    ) -> Self {
        let total: f64 = waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        let mut rel = start.inverse() * end;
        if rel.w < 0.0 {
            rel = UnitQuaternion::new_unchecked(-rel.into_inner());
        }
        let orient = |s: f64| {
            if total <= 0.0 {
                return end;
            }
            start * rel.powf(s / total)
        };
        let mut poses = vec![TrajectoryPose { s: 0.0, position: waypoints[0], orientation: orient(0.0) }];
        let mut s0 = 0.0;
        for w in waypoints.windows(2) {
            let len = (w[1] - w[0]).norm();
            let n = (len / ds).ceil() as usize;
            for i in 1..=n {
                let t = i as f64 / n as f64;
                let s = s0 + t * len;
                poses.push(TrajectoryPose { s, position: w[0] + (w[1] - w[0]) * t, orientation: orient(s) });
            }
            s0 += len;
        }
        // exact endpoint, quaternion sign kept continuous with its neighbour
        let last = poses.last_mut().expect("non-empty");
        last.position = *waypoints.last().expect("non-empty");
        last.orientation = end;
        if poses.len() > 1 {
            let prev = poses[poses.len() - 2].orientation;
            let last = poses.last_mut().expect("non-empty");
            if prev.coords.dot(&last.orientation.coords) < 0.0 {
                last.orientation = UnitQuaternion::new_unchecked(-last.orientation.into_inner());
            }
        }
        Self { poses, waypoints, grasp_id, ds }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanOptions {
    pub ds: f64,
    /// Pre-grasp distance back along the approach axis.
    pub pregrasp_offset: f64,
    /// Larger offsets tried before searching for a via point.
    pub offset_retries: usize,
    pub via_point_iterations: usize,
    /// Extra opening beyond the grasp width while approaching.
    pub opening_margin: f64,
    pub table_z: Option<f64>,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            ds: 0.005,
            pregrasp_offset: 0.08,
            offset_retries: 2,
            via_point_iterations: 48,
            opening_margin: 0.02,
            table_z: None,
        }
    }
}

/// Collision-free reach from `start` to the grasp's wrist pose through a
/// pre-grasp waypoint on the approach axis. Every discretised pose is checked
/// against `scene` with the gripper open.
pub fn plan_reach_trajectory(
    start: &DevicePose,
    grasp: &Grasp,
    scene: &VoxelGrid,
    target: Option<&VoxelGrid>,
    gripper: &GripperModel,
    opts: &PlanOptions,
) -> Result<GuidanceTrajectory> {
    if !(opts.ds > 0.0 && opts.pregrasp_offset >= 0.0) {
        return Err(Error::InvalidParameter("ds must be positive and the offset non-negative".into()));
    }
    if !start.is_finite() {
        return Err(Error::InvalidParameter("non-finite start pose".into()));
    }
    let goal = grasp.transform();
    let goal_q = goal.quaternion();
    let approach = goal.apply_vector(&Vec3::z());
    let opening = (grasp.width + opts.opening_margin).min(gripper.geometry.stroke_max).max(grasp.width);
    let clear = |t: &GuidanceTrajectory| {
        t.poses
            .iter()
            .all(|p| !check_collision(gripper, &p.transform(), opening, scene, target, opts.table_z))
    };
    let build = |mid: &[Vec3]| {
        let mut w = vec![start.position];
        w.extend_from_slice(mid);
        w.push(goal.translation);
        GuidanceTrajectory::through(w, start.orientation, goal_q, opts.ds, grasp.id)
    };

    let mut offset = opts.pregrasp_offset;
    for _ in 0..=opts.offset_retries {
        let pre = goal.translation - approach * offset;
        let t = build(&[pre]);
        if clear(&t) {
            return Ok(t);
        }
        offset *= 1.5;
    }

    // via point above and around the pre-grasp, widening outward
    let pre = goal.translation - approach * opts.pregrasp_offset;
    let top = start.position.z.max(pre.z);
    for k in 0..opts.via_point_iterations {
        let ring = k / 8;
        let angle = (k % 8) as f64 * std::f64::consts::FRAC_PI_4;
        let radius = 0.05 * ring as f64;
        let via = Vec3::new(pre.x + radius * angle.cos(), pre.y + radius * angle.sin(), top + 0.05 * (ring + 1) as f64);
        let t = build(&[via, pre]);
        if clear(&t) {
            return Ok(t);
        }
    }
    Err(Error::PathPlanningFailed(format!("no collision-free reach to grasp {}", grasp.id)))
}

/// Index of the pose closest to `position` among indices `from..`; an exact
/// tie goes to the later index.
pub fn closest_trajectory_pose(traj: &GuidanceTrajectory, position: &Vec3, from: usize) -> (TrajectoryPose, usize) {
    let from = from.min(traj.len() - 1);
    let mut best = (f64::INFINITY, from);
    for (i, p) in traj.poses.iter().enumerate().skip(from) {
        let d = (p.position - position).norm_squared();
        if d <= best.0 {
            best = (d, i);
        }
    }
    (traj.poses[best.1], best.1)
}

/// Closest point on the two polyline segments adjacent to pose `index`, with
/// the orientation interpolated along the segment. Removes the `ds`
/// quantisation of [`closest_trajectory_pose`].
pub fn project_near(traj: &GuidanceTrajectory, position: &Vec3, index: usize) -> TrajectoryPose {
    let mut best = (f64::INFINITY, traj.poses[index]);
    let lo = index.saturating_sub(1);
    let hi = (index + 1).min(traj.len() - 1);
    for k in lo..hi {
        let (a, b) = (&traj.poses[k], &traj.poses[k + 1]);
        let ab = b.position - a.position;
        let len2 = ab.norm_squared();
        let t = if len2 > 0.0 { ((position - a.position).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let p = a.position + ab * t;
        let d = (p - position).norm_squared();
        if d < best.0 {
            let orientation = a.orientation.try_slerp(&b.orientation, t, 1e-12).unwrap_or(a.orientation);
            best = (d, TrajectoryPose { s: a.s + (b.s - a.s) * t, position: p, orientation });
        }
    }
    best.1
}

/// Forward-only lookup of the closest pose during one guided approach.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ProgressTracker {
    pub index: usize,
}

impl ProgressTracker {
    pub fn update(&mut self, traj: &GuidanceTrajectory, position: &Vec3) -> TrajectoryPose {
        let (pose, index) = closest_trajectory_pose(traj, position, self.index);
        self.index = index;
        pose
    }

    /// As [`update`](Self::update), refined onto the neighbouring segments.
    pub fn update_projected(&mut self, traj: &GuidanceTrajectory, position: &Vec3) -> TrajectoryPose {
        self.update(traj, position);
        project_near(traj, position, self.index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight() -> GuidanceTrajectory {
        GuidanceTrajectory::through(
            vec![Vec3::zeros(), Vec3::new(0.1, 0.0, 0.0)],
            UnitQuaternion::identity(),
            UnitQuaternion::from_euler_angles(0.0, 0.0, 1.0),
            0.01,
            0,
        )
    }

    #[test]
    fn discretisation() {
        let t = straight();
        assert_eq!(t.len(), 11);
        assert!((t.length() - 0.1).abs() < 1e-12);
        let mid = t.poses[5].orientation.euler_angles().2;
        assert!((mid - 0.5).abs() < 1e-9);
    }

    #[test]
    fn tie_goes_forward() {
        let t = straight();
        let q = Vec3::new(0.025, 0.01, 0.0);
        assert_eq!(closest_trajectory_pose(&t, &q, 0).1, 3);
        assert_eq!(closest_trajectory_pose(&t, &Vec3::new(0.03, 0.0, 0.0), 0).1, 3);
        assert_eq!(closest_trajectory_pose(&t, &Vec3::zeros(), 6).1, 6);
    }
}
