use nalgebra::{UnitQuaternion, Vector6};
use proptest::prelude::*;
use telegrasp_core::geometry::Vec3;
use telegrasp_teleop::{
    bilateral_step, guidance_wrench, hybrid_torques, orientation_error, step_simulation, CouplingGains, DevicePose,
    GainBlock, GuidanceTrajectory, Jacobian, SimDevice, TeleopConfig, TeleopWorld, Wrench,
};

fn gains(k: f64, d: f64) -> CouplingGains {
    CouplingGains { linear: GainBlock { stiffness: k, damping: d }, angular: GainBlock { stiffness: 1.0, damping: 0.1 } }
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn pose() -> impl Strategy<Value = DevicePose> {
    (vec3(), vec3(), vec3(), vec3()).prop_map(|(p, r, v, w)| DevicePose {
        position: p,
        orientation: UnitQuaternion::from_scaled_axis(r * 3.0),
        linear_velocity: v,
        angular_velocity: w,
    })
}

#[test]
fn co_located_at_rest_gives_zero() {
    let p = DevicePose::at(Vec3::new(0.1, 0.2, 0.3), UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3));
    let j = Jacobian::default();
    let out = bilateral_step(&p, &p, &gains(100.0, 10.0), &j, &j);
    assert_eq!(out.f_r, Wrench::ZERO);
    assert_eq!(out.tau_r, Vector6::zeros());
    assert_eq!(out.tau_h, Vector6::zeros());
}

#[test]
fn spring_arithmetic() {
    let r = DevicePose::default();
    let h = DevicePose::at(Vec3::new(0.1, 0.0, 0.0), UnitQuaternion::identity());
    let j = Jacobian::default();
    let out = bilateral_step(&h, &r, &gains(100.0, 5.0), &j, &j);
    assert!((out.f_r.force - Vec3::new(10.0, 0.0, 0.0)).norm() < 1e-12);
    assert!((out.tau_h.fixed_rows::<3>(0) - Vec3::new(-10.0, 0.0, 0.0)).norm() < 1e-12);
}

proptest! {
    #[test]
    fn action_reaction(h in pose(), r in pose(), k in 0.0f64..500.0, d in 0.0f64..50.0) {
        let j = Jacobian::default();
        let out = bilateral_step(&h, &r, &gains(k, d), &j, &j);
        prop_assert_eq!(out.tau_r, -out.tau_h);
    }

    #[test]
    fn assisted_force_channel_is_shared(h in pose(), r in pose(), t in pose()) {
        let j = Jacobian::default();
        let g = CouplingGains::critical(200.0, 2.0, 1.0, 0.01);
        let f_r = bilateral_step(&h, &r, &g, &j, &j).f_r;
        let f_star = guidance_wrench(&t, &r, &CouplingGains::critical(400.0, 4.0, 1.0, 0.01));
        let (tau_r, tau_h) = hybrid_torques(&f_r, &f_star, &j, &j);
        // robot position from the operator only, device torque free
        prop_assert_eq!(tau_r.fixed_rows::<3>(0).into_owned(), f_r.force);
        prop_assert_eq!(tau_r.fixed_rows::<3>(3).into_owned(), f_star.torque);
        prop_assert_eq!(tau_h.fixed_rows::<3>(3).into_owned(), Vec3::zeros());
        prop_assert!((tau_h.fixed_rows::<3>(0) - (f_star.force - f_r.force)).norm() < 1e-12);
    }
}

#[test]
fn guidance_zero_on_path() {
    let mut target = DevicePose::at(Vec3::new(0.1, 0.0, 0.2), UnitQuaternion::from_euler_angles(0.3, 0.0, 1.0));
    target.linear_velocity = Vec3::new(0.05, 0.0, 0.0);
    let f = guidance_wrench(&target, &target, &CouplingGains::critical(400.0, 4.0, 1.0, 0.01));
    assert_eq!(f, Wrench::ZERO);
}

#[test]
fn guidance_lateral_spring() {
    let target = DevicePose::default();
    let r = DevicePose::at(Vec3::new(0.0, 0.01, 0.0), UnitQuaternion::identity());
    let f = guidance_wrench(&target, &r, &gains(200.0, 30.0));
    assert!((f.force - Vec3::new(0.0, -2.0, 0.0)).norm() < 1e-12);
}

#[test]
fn guidance_orientation_only() {
    let target = DevicePose::default();
    let r = DevicePose::at(Vec3::zeros(), UnitQuaternion::from_euler_angles(0.0, 0.0, 10f64.to_radians()));
    let f = guidance_wrench(&target, &r, &gains(200.0, 30.0));
    assert_eq!(f.force, Vec3::zeros());
    // quaternion-log oracle: restoring torque k·angle about −z
    assert!(f.torque.x.abs() < 1e-15 && f.torque.y.abs() < 1e-15);
    assert!((f.torque.z + 10f64.to_radians()).abs() < 1e-12);
}

#[test]
fn zero_guidance_reduces_to_force_coupling() {
    let j = Jacobian::default();
    let h = DevicePose::at(Vec3::new(0.02, -0.01, 0.0), UnitQuaternion::from_euler_angles(0.2, 0.0, 0.0));
    let r = DevicePose::default();
    let f_r = bilateral_step(&h, &r, &CouplingGains::critical(200.0, 2.0, 1.0, 0.01), &j, &j).f_r;
    let (tau_r, tau_h) = hybrid_torques(&f_r, &Wrench::ZERO, &j, &j);
    assert_eq!(tau_r, Wrench::force_only(f_r.force).as_vector());
    assert_eq!(tau_h, Wrench::force_only(-f_r.force).as_vector());
}

fn straight_path() -> GuidanceTrajectory {
    GuidanceTrajectory::through(
        vec![Vec3::new(0.0, 0.0, 0.3), Vec3::new(0.3, 0.0, 0.3)],
        UnitQuaternion::identity(),
        UnitQuaternion::from_euler_angles(0.0, 0.0, 0.5),
        0.005,
        0,
    )
}

#[test]
fn off_path_feedback_pulls_toward_path() {
    let cfg = TeleopConfig::default();
    for offset in [Vec3::new(0.0, 0.03, 0.0), Vec3::new(0.0, -0.02, 0.01), Vec3::new(0.0, 0.0, -0.04)] {
        let start = DevicePose::at(Vec3::new(0.1, 0.0, 0.3) + offset, UnitQuaternion::identity());
        let mut w = TeleopWorld::new(cfg, start).unwrap();
        w.set_trajectory(Some(straight_path()));
        w.set_guidance(true);
        step_simulation(&mut w, &Wrench::ZERO, cfg.dt).unwrap();
        let f_star = w.last_record().f_star.force;
        assert!(f_star.dot(&offset) < 0.0);
        // device velocity after one tick points back at the path
        assert!(w.haptic.state.linear_velocity.dot(&offset) < 0.0);
    }
}

#[test]
fn on_path_feedback_is_bilateral_reaction() {
    let cfg = TeleopConfig::default();
    let traj = GuidanceTrajectory::through(
        vec![Vec3::new(0.0, 0.0, 0.3), Vec3::new(2.0, 0.0, 0.3)],
        UnitQuaternion::identity(),
        UnitQuaternion::identity(),
        0.005,
        0,
    );
    let start = DevicePose::at(traj.poses[10].position, traj.poses[10].orientation);
    let mut guided = TeleopWorld::new(cfg, start).unwrap();
    guided.set_trajectory(Some(traj));
    guided.set_guidance(true);
    let mut plain = TeleopWorld::new(cfg, start).unwrap();
    let push = Wrench::force_only(Vec3::new(2.0, 0.0, 0.0));
    // near terminal speed the finite-difference velocity no longer lags
    for _ in 0..3000 {
        step_simulation(&mut guided, &push, cfg.dt).unwrap();
        step_simulation(&mut plain, &push, cfg.dt).unwrap();
    }
    let (g, p) = (guided.last_record(), plain.last_record());
    let feedback_g = g.f_star.force - g.f_r.force;
    let feedback_p = -p.f_r.force;
    assert!(g.f_star.force.norm() < 0.05 * push.force.norm(), "{:?}", g.f_star);
    assert!((feedback_g - feedback_p).norm() < 0.1, "{feedback_g} vs {feedback_p}");
}

#[test]
fn free_device_linear_ramp() {
    let mut d = SimDevice::new(2.0, 0.01, 0.0, 0.0, DevicePose::default()).unwrap();
    let f = Wrench::force_only(Vec3::new(3.0, -1.0, 0.5));
    let dt = 1e-3;
    for k in 1..=2000 {
        d.step(&f, dt);
        let t = k as f64 * dt;
        assert!((d.state.linear_velocity - f.force * (t / 2.0)).norm() < 1e-6);
    }
}

#[test]
fn zero_input_at_rest_is_fixed_point() {
    let start = DevicePose::at(Vec3::new(0.1, 0.2, 0.3), UnitQuaternion::from_euler_angles(0.3, 0.2, 0.1));
    let mut w = TeleopWorld::new(TeleopConfig::default(), start).unwrap();
    for _ in 0..1000 {
        step_simulation(&mut w, &Wrench::ZERO, 0.001).unwrap();
    }
    assert_eq!(w.haptic.state, start);
    assert_eq!(w.robot.state, start);
}

#[test]
fn coupled_pair_matches_reduced_model() {
    let cfg = TeleopConfig::default();
    let (m, c) = (cfg.haptic.mass, cfg.haptic.linear_damping);
    let (k, d) = (cfg.coupling.linear.stiffness, cfg.coupling.linear.damping);
    // m·ë = −2k·e − (2d + c)·ė for e = x_h − x_r
    let (a, b, cc) = (m, 2.0 * d + c, 2.0 * k);
    let disc = b * b - 4.0 * a * cc;
    assert!(disc > 0.0, "not overdamped");
    let l1 = (-b + disc.sqrt()) / (2.0 * a);
    let l2 = (-b - disc.sqrt()) / (2.0 * a);
    assert!(l1 < 0.0 && l2 < 0.0);
    let e0 = 0.05;
    let predicted = |t: f64| e0 * (l2 * (l1 * t).exp() - l1 * (l2 * t).exp()) / (l2 - l1);

    let dt = 1e-4;
    let mut w = TeleopWorld::new(cfg, DevicePose::default()).unwrap();
    w.haptic.state.position.x = e0;
    for k in 1..=10_000 {
        step_simulation(&mut w, &Wrench::ZERO, dt).unwrap();
        let e = w.haptic.state.position.x - w.robot.state.position.x;
        assert!((e - predicted(k as f64 * dt)).abs() < 2e-3 * e0, "t {} e {e}", k as f64 * dt);
    }
    // equal masses: the centre of mass does not move
    assert!(((w.haptic.state.position.x + w.robot.state.position.x) / 2.0 - e0 / 2.0).abs() < 1e-9);
}

#[test]
fn mechanical_energy_non_increasing() {
    let cfg = TeleopConfig::default();
    let mut w = TeleopWorld::new(cfg, DevicePose::default()).unwrap();
    w.haptic.state.position = Vec3::new(0.05, -0.03, 0.02);
    w.haptic.state.orientation = UnitQuaternion::from_euler_angles(0.4, 0.0, -0.3);
    w.robot.state.linear_velocity = Vec3::new(0.2, 0.1, 0.0);
    w.robot.state.angular_velocity = Vec3::new(0.0, 1.0, 2.0);
    let mut energy = vec![w.mechanical_energy()];
    for _ in 0..5000 {
        step_simulation(&mut w, &Wrench::ZERO, cfg.dt).unwrap();
        energy.push(w.mechanical_energy());
    }
    for i in 0..energy.len() - 100 {
        for j in (i + 100)..energy.len().min(i + 400) {
            assert!(energy[j] <= energy[i] + 1e-15, "E[{j}] = {} > E[{i}] = {}", energy[j], energy[i]);
        }
    }
}

#[test]
fn orientation_error_round_trip() {
    let a = UnitQuaternion::from_euler_angles(0.3, -0.4, 1.1);
    let b = UnitQuaternion::from_euler_angles(-0.2, 0.5, 0.4);
    let e = orientation_error(&a, &b);
    let back = UnitQuaternion::from_scaled_axis(e) * b;
    assert!(back.angle_to(&a) < 1e-12);
}
