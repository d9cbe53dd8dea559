use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::{Rotation3, UnitQuaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use telegrasp_core::geometry::{padded_bounds, PointIndex, PointNormalCloud, RigidTransform, Vec3, VoxelGrid};
use telegrasp_core::grasp::{rerank, GraspConfig, GraspPlanner, GraspSet, GripperGeometry, GripperModel, ReRankParams};
use telegrasp_core::pose::{pose_error, segment_object, PoseEstimator, PoseEstimatorConfig, PoseHypothesis};
use telegrasp_teleop::{
    orientation_error, plan_reach_trajectory, step_simulation, DevicePose, GuidanceTrajectory, PlanOptions,
    TeleopConfig, TeleopWorld, Wrench,
};

use crate::adjudicate::adjudicate_grasp;
use crate::objects::ObjectModel;
use crate::render::{default_viewpoints, render_stitched_cloud};
use crate::scene::{lookup, SceneDescription};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    /// Voxel size for rendering and collision grids.
    pub resolution: f64,
    pub pose: PoseEstimatorConfig,
    pub grasp: GraspConfig,
    pub gripper: GripperGeometry,
    pub teleop: TeleopConfig,
    pub plan: PlanOptions,
    pub rerank: ReRankParams,
    /// Camera positions; `None` uses four cameras around the table.
    pub viewpoints: Option<Vec<Vec3>>,
    pub contact_tolerance: f64,
    pub friction: f64,
    pub home: Vec3,
    pub drop_zone: Vec3,
    pub drop_radius: f64,
    pub max_attempts_per_object: usize,
    /// Below this overlay fit the operator clears other objects first.
    pub min_visual_fit: f64,
    /// Preferred grasps the operator tries before giving up on an attempt.
    pub max_grasp_candidates: usize,
    /// Simulated seconds allowed per phase.
    pub approach_timeout: f64,
    pub reach_timeout: f64,
    pub transport_timeout: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            resolution: 0.005,
            pose: PoseEstimatorConfig::default(),
            grasp: GraspConfig::default(),
            gripper: GripperGeometry::default(),
            teleop: TeleopConfig::default(),
            plan: PlanOptions::default(),
            rerank: ReRankParams::default(),
            viewpoints: None,
            contact_tolerance: 0.005,
            friction: 0.5,
            home: Vec3::new(0.0, -0.1, 0.35),
            drop_zone: Vec3::new(0.4, 0.0, 0.3),
            drop_radius: 0.05,
            max_attempts_per_object: 2,
            min_visual_fit: 0.5,
            max_grasp_candidates: 8,
            approach_timeout: 6.0,
            reach_timeout: 10.0,
            transport_timeout: 5.0,
        }
    }
}

/// Scripted stand-in for the human operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorPolicy {
    pub name: String,
    /// Standard deviation of the operator's aim point, metres.
    pub noise_sigma: f64,
    /// First ask for a model that is not in the scene.
    pub probe_absent: bool,
    pub stiffness: f64,
    pub damping: f64,
}

impl OperatorPolicy {
    pub const NAMES: [&'static str; 2] = ["scripted", "scripted-absent"];

    pub fn by_name(name: &str) -> Result<Self> {
        let probe_absent = match name {
            "scripted" => false,
            "scripted-absent" => true,
            other => return Err(Error::InvalidParameter(format!("unknown policy {other:?}; expected one of {:?}", Self::NAMES))),
        };
        Ok(Self { name: name.into(), noise_sigma: 0.002, probe_absent, stiffness: 60.0, damping: 12.0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectOutcome {
    pub instance_id: usize,
    pub model_id: String,
    pub alignment_score: f64,
    /// Which displayed hypothesis the operator accepted.
    pub hypothesis_rank: Option<usize>,
    /// Rotation (rad) and translation (m) error of the top hypothesis,
    /// modulo the model's symmetry.
    pub pose_error: Option<(f64, f64)>,
    pub grasp_id: Option<usize>,
    pub picks_attempted: usize,
    pub success: bool,
    pub sim_time: f64,
    pub notes: Vec<String>,
}

/// Everything reproducible about an episode; timing lives in [`EpisodeRun`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub seed: u64,
    pub policy: String,
    pub object_count: usize,
    pub cleared: usize,
    pub first_attempt_successes: usize,
    pub complete: bool,
    pub outcomes: Vec<ObjectOutcome>,
    pub warnings: Vec<String>,
    pub sim_time: f64,
}

/// One control tick of the episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLogRecord {
    pub t: f64,
    pub instance: Option<usize>,
    pub phase: String,
    pub x_h: Vec3,
    pub x_r: Vec3,
    pub f_r: Wrench,
    pub f_star: Wrench,
    pub guidance: bool,
    pub best_grasp: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct EpisodeRun {
    pub result: EpisodeResult,
    pub log: Vec<EpisodeLogRecord>,
    /// Guided trajectories as executed, for plotting.
    pub trajectories: Vec<GuidanceTrajectory>,
    pub wall_seconds: Vec<(usize, f64)>,
    pub wall_total: f64,
}

struct Runner<'a> {
    cfg: &'a EpisodeConfig,
    policy: &'a OperatorPolicy,
    models: &'a [ObjectModel],
    world: TeleopWorld,
    gripper: GripperModel,
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    log: Vec<EpisodeLogRecord>,
    trajectories: Vec<GuidanceTrajectory>,
    instance: Option<usize>,
}

enum Stop {
    Done,
    Timeout,
}

impl Runner<'_> {
    fn sim_time(&self) -> f64 {
        self.world.time()
    }

    /// Steps the world with the operator pulling the device toward
    /// `aim(world)` until `done` or the timeout; logs every control tick.
    fn drive(
        &mut self,
        phase: &str,
        timeout: f64,
        mut aim: impl FnMut(&TeleopWorld) -> (Vec3, Option<UnitQuaternion<f64>>),
        mut on_control: impl FnMut(&TeleopWorld) -> Option<usize>,
        mut done: impl FnMut(&TeleopWorld) -> bool,
    ) -> Result<Stop> {
        let dt = self.world.cfg.dt;
        let period = self.world.cfg.control_period as u64;
        let ticks = (timeout / dt).round() as u64;
        let mut jitter = Vec3::zeros();
        for k in 0..ticks {
            if k % period == 0 {
                if done(&self.world) {
                    return Ok(Stop::Done);
                }
                let best = on_control(&self.world);
                let s = self.policy.noise_sigma;
                if s > 0.0 {
                    jitter = Vec3::new(self.noise.sample(&mut self.rng), self.noise.sample(&mut self.rng), self.noise.sample(&mut self.rng));
                }
                let rec = self.world.last_record();
                self.log.push(EpisodeLogRecord {
                    t: self.world.time(),
                    instance: self.instance,
                    phase: phase.into(),
                    x_h: self.world.haptic.state.position,
                    x_r: self.world.robot.state.position,
                    f_r: rec.f_r,
                    f_star: rec.f_star,
                    guidance: self.world.guidance(),
                    best_grasp: best,
                });
            }
            let (target, orient) = aim(&self.world);
            let h = &self.world.haptic.state;
            let force = (target + jitter - h.position) * self.policy.stiffness - h.linear_velocity * self.policy.damping;
            let torque = match orient {
                Some(q) => orientation_error(&q, &h.orientation) * 1.0 - h.angular_velocity * 0.2,
                None => Vec3::zeros(),
            };
            step_simulation(&mut self.world, &Wrench::new(force, torque), dt)?;
        }
        Ok(if done(&self.world) { Stop::Done } else { Stop::Timeout })
    }
}

/// The operator's look at the overlay: among the displayed hypotheses, the
/// one that best explains what is seen. Both the model's upward and sideways
/// surface must be covered by observed points and the observed points
/// segmented around it must be covered by the model (within 1.5 voxels,
/// normals within ~45°). Earlier ranks win ties.
fn visual_check<'h>(
    hypotheses: &'h [PoseHypothesis],
    model: &PointNormalCloud,
    observed: &PointNormalCloud,
    resolution: f64,
    margin: f64,
) -> Option<(usize, &'h PoseHypothesis, f64)> {
    let index = PointIndex::new(observed.points());
    let radius = 1.5 * resolution;
    let covered = |index: &PointIndex, normals: &[Vec3], p: &Vec3, n: &Vec3| index.within(p, radius).iter().any(|&j| normals[j].dot(n) > 0.7);
    let fit = |h: &PoseHypothesis| {
        let moved = model.transformed(&h.transform);
        let (mut seen, mut total) = (0usize, 0usize);
        for (p, n) in moved.points().iter().zip(moved.normals()) {
            if n.z < -0.5 {
                continue;
            }
            total += 1;
            seen += usize::from(covered(&index, observed.normals(), p, n));
        }
        let forward = seen as f64 / total.max(1) as f64;
        let Ok(seg) = segment_object(observed, model, &h.transform, margin) else {
            return 0.0;
        };
        let model_index = PointIndex::new(moved.points());
        let explained = seg.points().iter().zip(seg.normals()).filter(|(p, n)| covered(&model_index, moved.normals(), p, n)).count();
        forward * explained as f64 / seg.len().max(1) as f64
    };
    let mut best: Option<(usize, &PoseHypothesis, f64)> = None;
    for (i, h) in hypotheses.iter().enumerate() {
        let f = fit(h);
        log::debug!("hypothesis {i}: fit {f:.3}");
        if best.is_none_or(|(_, _, b)| f > b) {
            best = Some((i, h, f));
        }
    }
    best
}

/// Up to `n` poses past `from`, stopping at the first corner so the
/// operator's aim never points back along the current segment.
fn lookahead(traj: &GuidanceTrajectory, from: usize, n: usize) -> usize {
    let p = &traj.poses;
    let end = p.len() - 1;
    if from >= end {
        return end;
    }
    let dir = |i: usize| (p[i + 1].position - p[i].position).try_normalize(1e-12).unwrap_or_else(Vec3::zeros);
    let t0 = dir(from);
    let mut i = from + 1;
    while i < end && i < from + n && dir(i).dot(&t0) > 0.9 {
        i += 1;
    }
    i
}

fn hover(world: &TeleopWorld, goal: &Vec3, tol: f64) -> bool {
    (world.robot.state.position - goal).norm() < tol && world.robot.state.linear_velocity.norm() < 0.02
}

/// Runs the scripted clearance loop: select, estimate, plan grasps, steer
/// until the preferred grasp ranks first, follow the guided reach, close,
/// carry to the drop zone. Stops when the table is clear or every remaining
/// object has used its attempts.
pub fn run_clearance_episode(
    scene: &SceneDescription,
    models: &[ObjectModel],
    policy: &OperatorPolicy,
    cfg: &EpisodeConfig,
) -> Result<EpisodeRun> {
    let wall = Instant::now();
    let mut scene = scene.clone();
    let estimator = PoseEstimator::new(cfg.pose.clone())?;
    let gripper = GripperModel::new(cfg.gripper.clone())?;
    let planner = GraspPlanner::new(gripper.clone(), GraspConfig { table_z: Some(scene.table.z), ..cfg.grasp.clone() })?;
    let viewpoints = cfg.viewpoints.clone().unwrap_or_else(|| default_viewpoints(&scene.table));
    let home_q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_axis_angle(&Vec3::y_axis(), std::f64::consts::PI));
    let world = TeleopWorld::new(cfg.teleop, DevicePose::at(cfg.home, home_q))?;
    let mut run = Runner {
        cfg,
        policy,
        models,
        world,
        gripper,
        rng: ChaCha8Rng::seed_from_u64(scene.seed ^ 0x5eed),
        noise: Normal::new(0.0, policy.noise_sigma.max(1e-12)).map_err(|e| Error::InvalidParameter(e.to_string()))?,
        log: Vec::new(),
        trajectories: Vec::new(),
        instance: None,
    };

    let mut result = EpisodeResult {
        seed: scene.seed,
        policy: policy.name.clone(),
        object_count: scene.remaining().count(),
        cleared: 0,
        first_attempt_successes: 0,
        complete: false,
        outcomes: Vec::new(),
        warnings: Vec::new(),
        sim_time: 0.0,
    };
    let mut wall_seconds = Vec::new();

    if policy.probe_absent {
        if let Some(absent) = models.iter().find(|m| scene.find_model(&m.id).is_none()) {
            let stitched = render_stitched_cloud(&scene, models, &viewpoints, cfg.resolution)?;
            let est = estimator.estimate(&stitched.cloud, &absent.cloud)?;
            match est.warning {
                Some(w) => result.warnings.push(format!("{}: {w}; selection unavailable", absent.id)),
                None => result.warnings.push(format!("{}: absent but no warning (score {:.3})", absent.id, est.score)),
            }
        }
    }

    // tallest first
    let mut order: Vec<(f64, usize)> = scene
        .remaining()
        .map(|i| {
            let top = scene.instance_cloud(models, i.instance_id).map(|c| c.points().iter().map(|p| p.z).fold(f64::MIN, f64::max));
            top.map(|t| (t, i.instance_id))
        })
        .collect::<Result<_>>()?;
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut queue: VecDeque<(usize, Option<Deferred>)> = order.into_iter().map(|(_, id)| (id, None)).collect();
    while let Some((id, deferred)) = queue.pop_front() {
        let started = Instant::now();
        let t0 = run.sim_time();
        let inst = scene.instance(id).expect("ordered from the scene").clone();
        let model = lookup(models, &inst.model_id)?;
        run.instance = Some(id);
        let may_defer = deferred.is_none() && !queue.is_empty();
        let (mut outcome, sim_before, wall_before) = match deferred {
            Some(d) => (d.outcome, d.sim_time, d.wall_time),
            None => (ObjectOutcome {
            instance_id: id,
            model_id: inst.model_id.clone(),
            alignment_score: 0.0,
            hypothesis_rank: None,
            pose_error: None,
            grasp_id: None,
            picks_attempted: 0,
            success: false,
            sim_time: 0.0,
            notes: Vec::new(),
        }, 0.0, 0.0),
        };
        let mut defer = false;
        if scene.is_removed(id) {
            outcome.notes.push("removed earlier by a grasp aimed at another object".into());
        }
        for attempt in 0..cfg.max_attempts_per_object {
            if scene.is_removed(id) {
                break;
            }
            let stitched = render_stitched_cloud(&scene, models, &viewpoints, cfg.resolution)?;
            let est = estimator.estimate(&stitched.cloud, &model.cloud)?;
            outcome.alignment_score = est.score;
            if let Some(w) = &est.warning {
                outcome.notes.push(format!("attempt {attempt}: {w}"));
            }
            let Some((rank, best, fit)) = visual_check(&est.hypotheses, &model.cloud, &stitched.cloud, cfg.resolution, cfg.pose.margin()) else {
                outcome.notes.push(format!("attempt {attempt}: no pose hypothesis"));
                continue;
            };
            if fit < cfg.min_visual_fit && may_defer {
                outcome.notes.push(format!("no hypothesis matches the view (fit {fit:.2}); deferred"));
                defer = true;
                break;
            }
            outcome.hypothesis_rank = Some(rank);
            outcome.pose_error = Some(pose_error(&best.transform, &inst.pose, &model.symmetry));
            let object = match segment_object(&stitched.cloud, &model.cloud, &best.transform, cfg.pose.margin()) {
                Ok(o) => o,
                Err(e) => {
                    outcome.notes.push(format!("attempt {attempt}: {e}"));
                    continue;
                }
            };
            let grasps = planner.generate(&object, &stitched.cloud)?;
            if grasps.is_empty() {
                outcome.notes.push(format!("attempt {attempt}: no grasp on the segmented object"));
                continue;
            }
            outcome.picks_attempted += 1;
            match pick(&mut run, &mut scene, &stitched.cloud, &object, grasps, id)? {
                PickResult::Success(gid) => {
                    outcome.grasp_id = Some(gid);
                    outcome.success = true;
                    if outcome.picks_attempted == 1 {
                        result.first_attempt_successes += 1;
                    }
                }
                PickResult::WrongObject(gid, other) => {
                    outcome.grasp_id = Some(gid);
                    outcome.notes.push(format!("attempt {attempt}: grasp {gid} picked instance {other} instead"));
                }
                PickResult::Failed(gid, reason) => {
                    outcome.grasp_id = gid.or(outcome.grasp_id);
                    outcome.notes.push(format!("attempt {attempt}: {reason}"))
                }
            }
        }
        if defer {
            let d = Deferred { outcome, sim_time: sim_before + run.sim_time() - t0, wall_time: wall_before + started.elapsed().as_secs_f64() };
            queue.push_back((id, Some(d)));
            continue;
        }
        if outcome.success {
            result.cleared += 1;
        } else {
            log::warn!("instance {id} ({}) not cleared: {:?}", inst.model_id, outcome.notes);
        }
        outcome.sim_time = sim_before + run.sim_time() - t0;
        wall_seconds.push((id, wall_before + started.elapsed().as_secs_f64()));
        result.outcomes.push(outcome);
    }
    result.complete = scene.remaining().next().is_none();
    result.sim_time = run.sim_time();
    Ok(EpisodeRun {
        result,
        log: run.log,
        trajectories: run.trajectories,
        wall_seconds,
        wall_total: wall.elapsed().as_secs_f64(),
    })
}

struct Deferred {
    outcome: ObjectOutcome,
    sim_time: f64,
    wall_time: f64,
}

enum PickResult {
    Success(usize),
    WrongObject(usize, usize),
    Failed(Option<usize>, String),
}

fn pick(
    run: &mut Runner,
    scene: &mut SceneDescription,
    observed: &PointNormalCloud,
    object: &PointNormalCloud,
    mut grasps: GraspSet,
    instance_id: usize,
) -> Result<PickResult> {
    let cfg = run.cfg;
    let (lo, hi) = observed.aabb().ok_or(telegrasp_core::Error::EmptyInput)?;
    let bounds = padded_bounds(&lo.inf(&Vec3::new(lo.x, lo.y, scene.table.z)), &hi, cfg.resolution, 0.5)?;
    let (scene_grid, _) = VoxelGrid::from_points(bounds, observed.points());
    let (target_grid, _) = VoxelGrid::from_points(bounds, object.points());
    let plan_opts = PlanOptions { table_z: Some(scene.table.z), ..cfg.plan.clone() };

    // operator preference: best static score among grasps approaching from above
    let mut preferred: Vec<usize> = grasps
        .grasps
        .iter()
        .filter(|g| g.transform().apply_vector(&Vec3::z()).z < -0.3)
        .map(|g| g.id)
        .collect();
    preferred.truncate(cfg.max_grasp_candidates);
    if preferred.is_empty() {
        return Ok(PickResult::Failed(None, "no grasp approaching from above".into()));
    }

    for &want in &preferred {
        let Some(g) = grasps.get(want).cloned() else { continue };
        let goal = g.transform();
        let approach = goal.apply_vector(&Vec3::z());
        let hover_at = goal.translation - approach * cfg.plan.pregrasp_offset;
        let hover_q = goal.quaternion();

        // steer in plain bilateral mode until the preferred grasp ranks first
        run.world.set_guidance(false);
        run.world.set_trajectory(None);
        let best = std::cell::Cell::new(None);
        let set = grasps.clone();
        let params = cfg.rerank;
        run.drive(
            "approach",
            cfg.approach_timeout,
            |_| (hover_at, Some(hover_q)),
            |w| {
                let hand = telegrasp_core::geometry::UnitDualQuaternion::from_transform(&RigidTransform::from_quaternion(
                    w.robot.state.orientation,
                    w.robot.state.position,
                ));
                best.set(rerank(&set, &hand, &params).ok().map(|r| r.best));
                best.get()
            },
            |w| hover(w, &hover_at, 0.02) && best.get() == Some(want),
        )?;
        let target_id = best.get().unwrap_or(want);
        let Some(target) = grasps.get(target_id).cloned() else { continue };

        // guidance toward the current best grasp
        let start = run.world.robot.state;
        let traj = match plan_reach_trajectory(&start, &target, &scene_grid, Some(&target_grid), &run.gripper, &plan_opts) {
            Ok(t) => t,
            Err(e) => {
                log::debug!("grasp {target_id}: {e}");
                grasps.grasps.retain(|x| x.id != target_id);
                continue;
            }
        };
        run.trajectories.push(traj.clone());
        run.world.set_trajectory(Some(traj.clone()));
        run.world.set_guidance(true);
        let end = traj.len() - 1;
        let goal = target.transform();
        let goal_q = goal.quaternion();
        let stop = run.drive(
            "guided",
            cfg.reach_timeout,
            |w| (traj.poses[lookahead(&traj, w.progress(), 8)].position, None),
            |_| Some(target_id),
            |w| {
                let r = &w.robot.state;
                w.progress() == end
                    && (r.position - goal.translation).norm() < 0.002
                    && r.orientation.angle_to(&goal_q) < 1f64.to_radians()
                    && r.linear_velocity.norm() < 0.005
            },
        )?;
        if let Stop::Timeout = stop {
            let r = &run.world.robot.state;
            log::debug!(
                "grasp {target_id}: guided reach timed out at pose {}/{end}, {:.4} m and {:.2}° from the grasp, speed {:.4}",
                run.world.progress(),
                (r.position - goal.translation).norm(),
                r.orientation.angle_to(&goal_q).to_degrees(),
                r.linear_velocity.norm()
            );
        }
        let r = run.world.robot.state;
        let wrist = RigidTransform::from_quaternion(r.orientation, r.position);
        let verdict = adjudicate_grasp(scene, run.models, &wrist, target.width, &cfg.gripper, cfg.contact_tolerance, cfg.friction)?;
        run.world.set_guidance(false);
        run.world.set_trajectory(None);
        if !verdict.success {
            // back off to the hover point before trying anything else
            run.drive("retreat", 2.0, |_| (hover_at, None), |_| None, |w| hover(w, &hover_at, 0.02))?;
            return Ok(PickResult::Failed(Some(target_id), verdict.reason));
        }
        let lift = r.position + Vec3::new(0.0, 0.0, 0.1);
        let drop = cfg.drop_zone;
        run.drive("transport", cfg.transport_timeout, |w| if w.robot.state.position.z < lift.z - 0.02 { (lift, None) } else { (drop, None) }, |_| None, |w| {
            (w.robot.state.position - drop).norm() < cfg.drop_radius
        })?;
        let picked = verdict.instance_id.expect("success names the instance");
        return Ok(if picked == instance_id { PickResult::Success(target_id) } else { PickResult::WrongObject(target_id, picked) });
    }
    Ok(PickResult::Failed(None, "no preferred grasp could be reached".into()))
}
