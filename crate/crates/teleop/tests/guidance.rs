use nalgebra::{Rotation3, UnitQuaternion};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use telegrasp_core::geometry::{padded_bounds, UnitDualQuaternion, Vec3, VoxelGrid};
use telegrasp_core::grasp::{Grasp, GripperModel};
use telegrasp_teleop::{
    closest_trajectory_pose, plan_reach_trajectory, step_simulation, DevicePose, Error, GuidanceTrajectory,
    PlanOptions, TeleopConfig, TeleopWorld, Wrench,
};

fn distance_to_polyline(traj: &GuidanceTrajectory, p: &Vec3) -> f64 {
    traj.waypoints
        .windows(2)
        .map(|w| {
            let ab = w[1] - w[0];
            let t = ((p - w[0]).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            (w[0] + ab * t - p).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Grasp at `position` approaching straight down, closing along world y
/// rotated by `yaw`.
fn top_grasp(position: Vec3, yaw: f64) -> Grasp {
    // hand z (approach) = −world z
    let r = Rotation3::from_axis_angle(&Vec3::z_axis(), yaw) * Rotation3::from_axis_angle(&Vec3::y_axis(), std::f64::consts::PI);
    Grasp {
        id: 7,
        contacts: [position, position],
        normals: [-Vec3::y(), Vec3::y()],
        pose: UnitDualQuaternion::from_rotation_translation(&UnitQuaternion::from_rotation_matrix(&r), &position),
        width: 0.04,
        score: 1.0,
        dynamic_score: 0.0,
    }
}

fn empty_grid() -> VoxelGrid {
    VoxelGrid::empty(padded_bounds(&Vec3::new(-0.3, -0.3, 0.0), &Vec3::new(0.5, 0.3, 0.5), 0.005, 0.1).unwrap())
}

#[test]
fn lateral_offset_converges() {
    let cfg = TeleopConfig::default();
    let traj = GuidanceTrajectory::through(
        vec![Vec3::new(0.0, 0.0, 0.3), Vec3::new(0.2, 0.0, 0.3), Vec3::new(0.2, 0.0, 0.1)],
        UnitQuaternion::identity(),
        UnitQuaternion::identity(),
        0.005,
        0,
    );
    let start = DevicePose::at(Vec3::new(0.1, 0.05, 0.3), UnitQuaternion::identity());
    let mut w = TeleopWorld::new(cfg, start).unwrap();
    w.set_trajectory(Some(traj.clone()));
    w.set_guidance(true);
    let ticks = (2.0 / cfg.dt).round() as usize;
    for _ in 0..ticks {
        step_simulation(&mut w, &Wrench::ZERO, cfg.dt).unwrap();
    }
    let d = distance_to_polyline(&traj, &w.robot.state.position);
    assert!(d < 1e-3, "distance {d}");
}

fn guided_reach(start: DevicePose, grasp: &Grasp, seed: u64) -> (TeleopWorld, GuidanceTrajectory) {
    let cfg = TeleopConfig::default();
    let traj = plan_reach_trajectory(&start, grasp, &empty_grid(), None, &GripperModel::default(), &PlanOptions::default())
        .unwrap();
    let mut w = TeleopWorld::new(cfg, start).unwrap();
    w.set_trajectory(Some(traj.clone()));
    w.set_guidance(true);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let end = traj.len() - 1;
    for _ in 0..12_000 {
        // operator: translational pull toward a point a few steps ahead, with noise
        let carrot = traj.poses[(w.progress() + 8).min(end)].position;
        let noise = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let x = &w.haptic.state;
        let f = (carrot - x.position) * 60.0 - x.linear_velocity * 12.0 + noise;
        step_simulation(&mut w, &Wrench::force_only(f), cfg.dt).unwrap();
    }
    (w, traj)
}

#[test]
fn guided_reach_lands_on_grasp() {
    for (k, yaw) in [0.3, -1.2, 2.5].into_iter().enumerate() {
        let grasp = top_grasp(Vec3::new(0.05 * k as f64, 0.02, 0.05), yaw);
        let start = DevicePose::at(Vec3::new(0.3, -0.1, 0.3), UnitQuaternion::from_euler_angles(0.2, -0.3, 0.0));
        let (w, _) = guided_reach(start, &grasp, k as u64);
        let goal = grasp.transform();
        let pos_err = (w.robot.state.position - goal.translation).norm();
        let rot_err = w.robot.state.orientation.angle_to(&goal.quaternion());
        assert!(pos_err <= 2e-3, "yaw {yaw}: position error {pos_err}");
        assert!(rot_err <= 1f64.to_radians(), "yaw {yaw}: orientation error {}", rot_err.to_degrees());
    }
}

#[test]
fn guidance_off_is_bitwise_bilateral() {
    let cfg = TeleopConfig::default();
    let start = DevicePose::at(Vec3::new(0.2, 0.0, 0.3), UnitQuaternion::identity());
    let grasp = top_grasp(Vec3::new(0.0, 0.0, 0.05), 0.4);
    let traj = plan_reach_trajectory(&start, &grasp, &empty_grid(), None, &GripperModel::default(), &PlanOptions::default())
        .unwrap();
    let mut idle = TeleopWorld::new(cfg, start).unwrap();
    idle.set_trajectory(Some(traj));
    idle.set_guidance(false);
    let mut plain = TeleopWorld::new(cfg, start).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let f = Wrench::new(
            Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)),
            Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)),
        );
        step_simulation(&mut idle, &f, cfg.dt).unwrap();
        step_simulation(&mut plain, &f, cfg.dt).unwrap();
        assert_eq!(idle.haptic.state, plain.haptic.state);
        assert_eq!(idle.robot.state, plain.robot.state);
        assert_eq!(idle.last_record(), plain.last_record());
    }
}

#[test]
fn empty_scene_two_segment_path() {
    let start = DevicePose::at(Vec3::new(0.2, 0.1, 0.3), UnitQuaternion::from_euler_angles(0.0, 0.5, 0.0));
    let grasp = top_grasp(Vec3::new(0.0, 0.0, 0.05), 0.4);
    let opts = PlanOptions::default();
    let t = plan_reach_trajectory(&start, &grasp, &empty_grid(), None, &GripperModel::default(), &opts).unwrap();
    assert_eq!(t.waypoints.len(), 3);
    assert!((t.waypoints[1] - Vec3::new(0.0, 0.0, 0.05 + opts.pregrasp_offset)).norm() < 1e-12);
    let end = t.end();
    let goal = grasp.transform();
    assert_eq!(end.position, goal.translation);
    assert!(end.orientation.angle_to(&goal.quaternion()) < 1e-12);
    assert!(t.poses[0].orientation.angle_to(&start.orientation) < 1e-12);
    for w in t.poses.windows(2) {
        assert!((w[1].position - w[0].position).norm() <= opts.ds + 1e-12);
        assert!(w[0].orientation.coords.dot(&w[1].orientation.coords) > 0.0);
    }
    assert_eq!(t.grasp_id, 7);
}

#[test]
fn obstacle_forces_a_detour() {
    let resolution = 0.005;
    // wall between start and object
    let mut wall = Vec::new();
    for i in 0..=50 {
        for j in 0..=60 {
            wall.push(Vec3::new(0.15, -0.15 + i as f64 * 0.006, j as f64 * 0.0042));
        }
    }
    let bounds = padded_bounds(&Vec3::new(-0.3, -0.3, 0.0), &Vec3::new(0.5, 0.3, 0.6), resolution, 0.1).unwrap();
    let (grid, _) = VoxelGrid::from_points(bounds, &wall);
    let gripper = GripperModel::default();
    let start = DevicePose::at(Vec3::new(0.35, 0.0, 0.15), UnitQuaternion::identity());
    let grasp = top_grasp(Vec3::new(0.0, 0.0, 0.05), 0.0);
    let opts = PlanOptions::default();
    let t = plan_reach_trajectory(&start, &grasp, &grid, None, &gripper, &opts).unwrap();
    assert!(t.waypoints.len() > 3, "expected a via point");
    // oracle: no wall point strictly inside a gripper box shrunk by a voxel diagonal
    let opening = (grasp.width + opts.opening_margin).min(gripper.geometry.stroke_max);
    let shrink = resolution * 3f64.sqrt() + 1e-9;
    for p in &t.poses {
        let inv = p.transform().inverse();
        for b in gripper.collision_boxes(opening) {
            for q in &wall {
                let d = (inv.apply_point(q) - b.center).abs() - b.half_extents;
                assert!(d.max() >= -shrink, "pose at s = {} hits the wall", p.s);
            }
        }
    }

    // fully enclosed grasp cannot be reached
    let mut cage = wall.clone();
    for i in 0..=60 {
        for j in 0..=60 {
            cage.push(Vec3::new(-0.15 + i as f64 * 0.005, -0.15 + j as f64 * 0.005, 0.25));
        }
    }
    let (grid, _) = VoxelGrid::from_points(bounds, &cage);
    let tight = PlanOptions { via_point_iterations: 4, offset_retries: 0, ..Default::default() };
    let start_inside_x = DevicePose::at(Vec3::new(0.35, 0.0, 0.15), UnitQuaternion::identity());
    let err = plan_reach_trajectory(&start_inside_x, &grasp, &grid, None, &gripper, &tight).unwrap_err();
    assert!(matches!(err, Error::PathPlanningFailed(_)));
    assert!(err.to_string().contains("path planning failed"));
}

proptest! {
    #[test]
    fn closest_matches_linear_scan(px in -0.1f64..0.4, py in -0.2f64..0.2, pz in 0.0f64..0.4, from in 0usize..120) {
        let t = GuidanceTrajectory::through(
            vec![Vec3::new(0.3, 0.0, 0.3), Vec3::new(0.0, 0.0, 0.2), Vec3::new(0.0, 0.0, 0.05)],
            UnitQuaternion::identity(),
            UnitQuaternion::identity(),
            0.005,
            0,
        );
        let q = Vec3::new(px, py, pz);
        let (pose, idx) = closest_trajectory_pose(&t, &q, from);
        let from = from.min(t.len() - 1);
        let mut best = from;
        for i in from..t.len() {
            if (t.poses[i].position - q).norm() <= (t.poses[best].position - q).norm() {
                best = i;
            }
        }
        prop_assert_eq!(idx, best);
        prop_assert_eq!(pose.position, t.poses[best].position);
    }
}

#[test]
fn on_point_returns_its_index() {
    let t = GuidanceTrajectory::through(
        vec![Vec3::zeros(), Vec3::new(0.1, 0.0, 0.0)],
        UnitQuaternion::identity(),
        UnitQuaternion::identity(),
        0.005,
        0,
    );
    for k in 0..t.len() {
        assert_eq!(closest_trajectory_pose(&t, &t.poses[k].position, 0).1, k);
    }
}
