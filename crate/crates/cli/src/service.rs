//! Live session over WebSocket.
//!
//! One simulation thread owns the world. Connection handlers pass raw frames
//! to it through an ordered queue and receive serialized frames back through
//! a bounded per-client queue; the simulation never waits on a client. Pose
//! estimation and grasp planning run on a worker thread.

use std::collections::{HashMap, VecDeque};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use nalgebra::{Quaternion, Rotation3, UnitQuaternion};
use telegrasp_core::geometry::{padded_bounds, PointNormalCloud, RigidTransform, UnitDualQuaternion, Vec3, VoxelGrid};
use telegrasp_core::grasp::{rerank, GraspConfig, GraspPlanner, GraspSet, GripperModel};
use telegrasp_core::pose::{segment_object, PoseEstimator};
use telegrasp_sim::{adjudicate_grasp, default_viewpoints, render_stitched_cloud, ObjectModel, SceneDescription};
use telegrasp_teleop::{orientation_error, plan_reach_trajectory, step_simulation, DevicePose, PlanOptions, TeleopWorld, Wrench};
use tokio::net::TcpListener;
use tokio::sync::mpsc as tmpsc;

use crate::commands::{load_scene, PosesJson};
use crate::config::SessionConfig;
use crate::wire::{
    Body, CloudUpdate, Envelope, GraspMarker, GripperAction, GripperState, LastInput, ObjectEntry, PoseWire, StateSnapshot,
};

/// Operator hand modelled as a spring-damper on the device.
const HAND_STIFFNESS: f64 = 60.0;
const HAND_DAMPING: f64 = 12.0;
const HAND_ROT_STIFFNESS: f64 = 1.0;
const HAND_ROT_DAMPING: f64 = 0.2;
const MAX_WARNINGS: usize = 8;

type Frame = Arc<String>;

enum Inbound {
    Connect { client: u64, tx: tmpsc::Sender<Frame> },
    Disconnect { client: u64 },
    Text { client: u64, text: String },
    Shutdown,
}

struct Job {
    id: u64,
    model_id: String,
    scene: SceneDescription,
    cloud: PointNormalCloud,
}

struct Perception {
    job: u64,
    model_id: String,
    result: std::result::Result<Selected, String>,
}

struct Selected {
    poses: PosesJson,
    grasps: GraspSet,
    scene_grid: VoxelGrid,
    target_grid: VoxelGrid,
}

struct Client {
    tx: tmpsc::Sender<Frame>,
    last_seq: Option<u64>,
    /// Set when a frame was dropped; the next frame is a full snapshot.
    needs_full: bool,
}

struct Session {
    cfg: SessionConfig,
    models: Vec<ObjectModel>,
    scene: SceneDescription,
    viewpoints: Vec<Vec3>,
    cloud: PointNormalCloud,
    cloud_version: u64,
    pending_delta: Option<CloudUpdate>,
    world: TeleopWorld,
    gripper: GripperModel,
    available: HashMap<String, bool>,
    selection: Option<String>,
    selected: Option<Selected>,
    reranked: Option<GraspSet>,
    best: Option<usize>,
    job: Option<u64>,
    next_job: u64,
    jobs: mpsc::Sender<Job>,
    results: mpsc::Receiver<Perception>,
    closed: bool,
    holding: Option<usize>,
    hand: Option<(Vec3, Option<UnitQuaternion<f64>>)>,
    operator: Wrench,
    driver: Option<u64>,
    last_input: Option<LastInput>,
    warnings: VecDeque<String>,
    clients: HashMap<u64, Client>,
    seq: u64,
    tick_carry: f64,
}

fn pose_wire(p: &DevicePose) -> PoseWire {
    let q = p.orientation.quaternion();
    PoseWire { position: p.position, orientation: [q.w, q.i, q.j, q.k] }
}

fn f32s(v: &Vec3) -> [f32; 3] {
    [v.x as f32, v.y as f32, v.z as f32]
}

fn full_cloud(version: u64, c: &PointNormalCloud) -> CloudUpdate {
    CloudUpdate::Full { version, points: c.points().iter().map(f32s).collect(), normals: c.normals().iter().map(f32s).collect() }
}

/// Delta from `old` to `new`: points of `old` absent from `new` are removed,
/// points of `new` absent from `old` appended.
fn cloud_delta(base: u64, version: u64, old: &PointNormalCloud, new: &PointNormalCloud) -> CloudUpdate {
    let key = |p: &Vec3, n: &Vec3| (f32s(p).map(f32::to_bits), f32s(n).map(f32::to_bits));
    let mut new_keys: HashMap<_, usize> = HashMap::new();
    for (p, n) in new.iter() {
        *new_keys.entry(key(p, n)).or_default() += 1;
    }
    let mut removed = Vec::new();
    for (i, (p, n)) in old.iter().enumerate() {
        match new_keys.get_mut(&key(p, n)) {
            Some(c) if *c > 0 => *c -= 1,
            _ => removed.push(i as u32),
        }
    }
    let (mut points, mut normals) = (Vec::new(), Vec::new());
    for (p, n) in new.iter() {
        if let Some(c) = new_keys.get_mut(&key(p, n)) {
            if *c > 0 {
                *c -= 1;
                points.push(f32s(p));
                normals.push(f32s(n));
            }
        }
    }
    CloudUpdate::Delta { base, version, removed, points, normals }
}

/// Applies a cloud update to a client-side copy; `None` when the delta does
/// not start from `current`'s version.
pub fn apply_cloud_update(current: Option<&CloudUpdate>, update: &CloudUpdate) -> Option<CloudUpdate> {
    match update {
        CloudUpdate::Full { .. } => Some(update.clone()),
        CloudUpdate::Delta { base, version, removed, points, normals } => {
            let Some(CloudUpdate::Full { version: have, points: p0, normals: n0 }) = current else { return None };
            if have != base {
                return None;
            }
            let drop: std::collections::HashSet<u32> = removed.iter().copied().collect();
            let keep = |i: &usize| !drop.contains(&(*i as u32));
            let mut p: Vec<_> = (0..p0.len()).filter(keep).map(|i| p0[i]).collect();
            let mut n: Vec<_> = (0..n0.len()).filter(keep).map(|i| n0[i]).collect();
            p.extend_from_slice(points);
            n.extend_from_slice(normals);
            Some(CloudUpdate::Full { version: *version, points: p, normals: n })
        }
    }
}

fn perception_worker(cfg: SessionConfig, models: Vec<ObjectModel>, jobs: mpsc::Receiver<Job>, results: mpsc::Sender<Perception>) {
    let ep = &cfg.episode;
    let estimator = match PoseEstimator::new(ep.pose.clone()) {
        Ok(e) => e,
        Err(e) => return log::error!("estimator: {e}"),
    };
    let gripper = GripperModel::new(ep.gripper.clone()).expect("validated");
    while let Ok(mut job) = jobs.recv() {
        // only the latest selection matters
        while let Ok(newer) = jobs.try_recv() {
            job = newer;
        }
        let run = || -> std::result::Result<Selected, String> {
            let model = models.iter().find(|m| m.id == job.model_id).ok_or("unknown object")?;
            let est = estimator.estimate(&job.cloud, &model.cloud).map_err(|e| e.to_string())?;
            if let Some(w) = &est.warning {
                return Err(format!("{}: {w}; selection unavailable", job.model_id));
            }
            let best = est.best().ok_or("no pose hypothesis")?;
            let object = segment_object(&job.cloud, &model.cloud, &best.transform, ep.pose.margin()).map_err(|e| e.to_string())?;
            let planner = GraspPlanner::new(gripper.clone(), GraspConfig { table_z: Some(job.scene.table.z), ..ep.grasp.clone() })
                .map_err(|e| e.to_string())?;
            let grasps = planner.generate(&object, &job.cloud).map_err(|e| e.to_string())?;
            if grasps.is_empty() {
                return Err(format!("{}: no grasp found on the segmented object", job.model_id));
            }
            let (lo, hi) = job.cloud.aabb().ok_or("empty scene")?;
            let bounds = padded_bounds(&lo.inf(&Vec3::new(lo.x, lo.y, job.scene.table.z)), &hi, ep.resolution, 0.5)
                .map_err(|e| e.to_string())?;
            let (scene_grid, _) = VoxelGrid::from_points(bounds, job.cloud.points());
            let (target_grid, _) = VoxelGrid::from_points(bounds, object.points());
            Ok(Selected { poses: PosesJson::from(&est), grasps, scene_grid, target_grid })
        };
        let result = run();
        if results.send(Perception { job: job.id, model_id: job.model_id, result }).is_err() {
            break;
        }
    }
}

impl Session {
    fn new(cfg: SessionConfig) -> Result<(Self, mpsc::Receiver<Job>, mpsc::Sender<Perception>)> {
        let (scene, models) = load_scene(&cfg)?;
        let viewpoints = cfg.episode.viewpoints.clone().unwrap_or_else(|| default_viewpoints(&scene.table));
        let cloud = render_stitched_cloud(&scene, &models, &viewpoints, cfg.episode.resolution)?.cloud;
        let home_q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_axis_angle(&Vec3::y_axis(), std::f64::consts::PI));
        let world = TeleopWorld::new(cfg.episode.teleop, DevicePose::at(cfg.episode.home, home_q))?;
        let gripper = GripperModel::new(cfg.episode.gripper.clone())?;
        let (jobs_tx, jobs_rx) = mpsc::channel();
        let (res_tx, res_rx) = mpsc::channel();
        let available = models.iter().map(|m| (m.id.clone(), true)).collect();
        let s = Session {
            cfg,
            models,
            scene,
            viewpoints,
            cloud,
            cloud_version: 1,
            pending_delta: None,
            world,
            gripper,
            available,
            selection: None,
            selected: None,
            reranked: None,
            best: None,
            job: None,
            next_job: 1,
            jobs: jobs_tx,
            results: res_rx,
            closed: false,
            holding: None,
            hand: None,
            operator: Wrench::ZERO,
            driver: None,
            last_input: None,
            warnings: VecDeque::new(),
            clients: HashMap::new(),
            seq: 0,
            tick_carry: 0.0,
        };
        Ok((s, jobs_rx, res_tx))
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn send_to(&mut self, client: u64, body: Body) {
        let seq = self.next_seq();
        let frame = Arc::new(Envelope::new(seq, body).to_json());
        if let Some(c) = self.clients.get_mut(&client) {
            if c.tx.try_send(frame).is_err() {
                c.needs_full = true;
            }
        }
    }

    fn warn(&mut self, client: Option<u64>, message: String, ack_seq: Option<u64>, object_id: Option<String>) {
        log::warn!("{message}");
        self.warnings.push_back(message.clone());
        while self.warnings.len() > MAX_WARNINGS {
            self.warnings.pop_front();
        }
        let body = Body::Warning { message, ack_seq, object_id };
        match client {
            Some(c) => self.send_to(c, body),
            None => {
                let ids: Vec<u64> = self.clients.keys().copied().collect();
                for c in ids {
                    self.send_to(c, body.clone());
                }
            }
        }
    }

    fn ack(&mut self, client: u64, seq: u64, result: std::result::Result<(), String>) {
        let (accepted, reason) = match result {
            Ok(()) => (true, None),
            Err(r) => (false, Some(r)),
        };
        self.send_to(client, Body::Ack { ack_seq: seq, accepted, reason });
    }

    fn handle(&mut self, msg: Inbound) -> bool {
        match msg {
            Inbound::Connect { client, tx } => {
                self.clients.insert(client, Client { tx, last_seq: None, needs_full: false });
                let snap = self.snapshot(Some(full_cloud(self.cloud_version, &self.cloud)), Some(client));
                self.send_to(client, Body::State(Box::new(snap)));
            }
            Inbound::Disconnect { client } => {
                self.clients.remove(&client);
                if self.driver == Some(client) {
                    self.driver = None;
                    self.hand = None;
                }
            }
            Inbound::Text { client, text } => self.on_text(client, &text),
            Inbound::Shutdown => return false,
        }
        true
    }

    fn on_text(&mut self, client: u64, text: &str) {
        let env = match Envelope::parse(text) {
            Ok(e) if e.body.is_client_input() => e,
            Ok(e) => return self.warn(Some(client), "not a client input message".into(), Some(e.seq), None),
            Err(m) => return self.warn(Some(client), m, None, None),
        };
        let Some(c) = self.clients.get_mut(&client) else { return };
        if c.last_seq.is_some_and(|s| env.seq <= s) {
            let last = c.last_seq.unwrap();
            return self.ack(client, env.seq, Err(format!("stale sequence number (last applied {last})")));
        }
        c.last_seq = Some(env.seq);
        let result = self.apply(client, env.seq, env.body);
        if result.is_ok() {
            self.last_input = Some(LastInput { client, seq: env.seq, tick: self.world.tick });
        }
        self.ack(client, env.seq, result);
    }

    fn apply(&mut self, client: u64, seq: u64, body: Body) -> std::result::Result<(), String> {
        if let Body::Takeover = body {
            self.driver = Some(client);
            return Ok(());
        }
        match self.driver {
            None => self.driver = Some(client),
            Some(d) if d != client => return Err(format!("driver lease held by client {d}; send takeover")),
            _ => {}
        }
        match body {
            Body::SelectObject { object_id } => self.select(client, seq, object_id),
            Body::DeviceInput { position, orientation } => {
                if !position.iter().all(|v| v.is_finite()) {
                    return Err("non-finite position".into());
                }
                let q = match orientation {
                    Some([w, x, y, z]) => {
                        let q = Quaternion::new(w, x, y, z);
                        if !(q.norm() > 1e-9 && q.norm().is_finite()) {
                            return Err("orientation must be a non-zero quaternion".into());
                        }
                        Some(UnitQuaternion::from_quaternion(q))
                    }
                    None => None,
                };
                self.hand = Some((position, q));
                Ok(())
            }
            Body::ToggleGuidance { enabled } => {
                let on = enabled.unwrap_or(!self.world.guidance());
                if on { self.start_guidance() } else {
                    self.world.set_guidance(false);
                    self.world.set_trajectory(None);
                    Ok(())
                }
            }
            Body::GripperCmd { action } => self.gripper_cmd(client, seq, action),
            _ => Err("not a client input message".into()),
        }
    }

    fn select(&mut self, client: u64, seq: u64, object_id: String) -> std::result::Result<(), String> {
        match self.available.get(&object_id) {
            None => {
                self.warn(Some(client), format!("unknown object {object_id:?}"), Some(seq), Some(object_id));
                return Err("unknown object".into());
            }
            Some(false) => {
                self.warn(Some(client), format!("{object_id} is unavailable"), Some(seq), Some(object_id));
                return Err("object unavailable".into());
            }
            Some(true) => {}
        }
        self.world.set_guidance(false);
        self.world.set_trajectory(None);
        self.selected = None;
        self.reranked = None;
        self.best = None;
        self.selection = Some(object_id.clone());
        let id = self.next_job;
        self.next_job += 1;
        self.job = Some(id);
        self.jobs
            .send(Job { id, model_id: object_id, scene: self.scene.clone(), cloud: self.cloud.clone() })
            .map_err(|_| "perception worker stopped".to_string())
    }

    fn poll_perception(&mut self) {
        while let Ok(p) = self.results.try_recv() {
            if self.job != Some(p.job) {
                continue;
            }
            self.job = None;
            match p.result {
                Ok(sel) => self.selected = Some(sel),
                Err(message) => {
                    self.available.insert(p.model_id.clone(), false);
                    self.selection = None;
                    self.warn(None, message, None, Some(p.model_id));
                }
            }
        }
    }

    fn start_guidance(&mut self) -> std::result::Result<(), String> {
        let (Some(sel), Some(best)) = (&self.selected, self.best) else {
            return Err("no grasp to guide to; select an object first".into());
        };
        let grasp = sel.grasps.get(best).ok_or("best grasp vanished")?;
        let opts = PlanOptions { table_z: Some(self.scene.table.z), ..self.cfg.episode.plan.clone() };
        let traj = plan_reach_trajectory(&self.world.robot.state, grasp, &sel.scene_grid, Some(&sel.target_grid), &self.gripper, &opts)
            .map_err(|e| format!("no guidance path to grasp {best}: {e}"))?;
        self.world.set_trajectory(Some(traj));
        self.world.set_guidance(true);
        Ok(())
    }

    fn gripper_cmd(&mut self, client: u64, seq: u64, action: GripperAction) -> std::result::Result<(), String> {
        match action {
            GripperAction::Open => {
                self.closed = false;
                self.holding = None;
                Ok(())
            }
            GripperAction::Close => {
                self.closed = true;
                let target = self.world.trajectory().map(|t| t.grasp_id).or(self.best);
                let width = target
                    .and_then(|id| self.selected.as_ref().and_then(|s| s.grasps.get(id)))
                    .map_or(self.cfg.episode.gripper.stroke_max, |g| g.width);
                let r = self.world.robot.state;
                let wrist = RigidTransform::from_quaternion(r.orientation, r.position);
                let ep = &self.cfg.episode;
                let verdict = adjudicate_grasp(&mut self.scene, &self.models, &wrist, width, &ep.gripper, ep.contact_tolerance, ep.friction)
                    .map_err(|e| e.to_string())?;
                if !verdict.success {
                    self.warn(Some(client), format!("grasp failed: {}", verdict.reason), Some(seq), None);
                    return Ok(());
                }
                let picked = verdict.instance_id.expect("success names the instance");
                self.holding = Some(picked);
                if let Some(inst) = self.scene.instance(picked) {
                    self.available.insert(inst.model_id.clone(), false);
                }
                self.world.set_guidance(false);
                self.world.set_trajectory(None);
                self.selection = None;
                self.selected = None;
                self.reranked = None;
                self.best = None;
                self.job = None;
                self.rerender().map_err(|e| e.to_string())
            }
        }
    }

    fn rerender(&mut self) -> Result<()> {
        let new = render_stitched_cloud(&self.scene, &self.models, &self.viewpoints, self.cfg.episode.resolution)?.cloud;
        let version = self.cloud_version + 1;
        self.pending_delta = Some(cloud_delta(self.cloud_version, version, &self.cloud, &new));
        self.cloud = new;
        self.cloud_version = version;
        Ok(())
    }

    fn hand_wrench(&self) -> Wrench {
        let Some((target, q)) = self.hand else { return Wrench::ZERO };
        let h = &self.world.haptic.state;
        let force = (target - h.position) * HAND_STIFFNESS - h.linear_velocity * HAND_DAMPING;
        let torque = q.map_or(Vec3::zeros(), |q| orientation_error(&q, &h.orientation) * HAND_ROT_STIFFNESS - h.angular_velocity * HAND_ROT_DAMPING);
        Wrench::new(force, torque)
    }

    fn advance(&mut self, seconds: f64) -> Result<()> {
        let dt = self.world.cfg.dt;
        self.tick_carry += seconds / dt;
        let n = self.tick_carry.floor();
        self.tick_carry -= n;
        for _ in 0..n as u64 {
            self.operator = self.hand_wrench();
            step_simulation(&mut self.world, &self.operator, dt)?;
        }
        Ok(())
    }

    fn update_rerank(&mut self) {
        let Some(sel) = &self.selected else { return };
        let r = self.world.robot.state;
        let hand = UnitDualQuaternion::from_transform(&RigidTransform::from_quaternion(r.orientation, r.position));
        match rerank(&sel.grasps, &hand, &self.cfg.episode.rerank) {
            Ok(rr) => {
                self.best = Some(rr.best);
                self.reranked = Some(rr.grasps);
            }
            Err(e) => log::debug!("re-rank: {e}"),
        }
    }

    fn snapshot(&self, cloud: Option<CloudUpdate>, you: Option<u64>) -> StateSnapshot {
        let rec = self.world.last_record();
        let markers = self
            .reranked
            .as_ref()
            .map(|set| {
                set.grasps
                    .iter()
                    .take(self.cfg.service.max_grasp_markers)
                    .map(|g| {
                        let t = g.transform();
                        GraspMarker {
                            id: g.id,
                            position: t.translation,
                            approach: t.apply_vector(&Vec3::z()),
                            closing: t.apply_vector(&Vec3::y()),
                            width: g.width,
                            score: g.score,
                            dynamic_score: g.dynamic_score,
                        }
                    })
                    .collect()
            })
            .unwrap_or_default();
        StateSnapshot {
            tick: self.world.tick,
            t: self.world.time(),
            cloud,
            objects: self.models.iter().map(|m| ObjectEntry { id: m.id.clone(), name: m.name.clone(), available: self.available[&m.id] }).collect(),
            selection: self.selection.clone(),
            poses: self.selected.as_ref().map(|s| s.poses.hypotheses.clone()).unwrap_or_default(),
            grasps: markers,
            best_grasp: self.best,
            trajectory: self.world.trajectory().map(|t| t.poses.iter().map(|p| p.position).collect()),
            device: pose_wire(&self.world.haptic.state),
            robot: pose_wire(&self.world.robot.state),
            f_r: rec.f_r,
            f_star: rec.f_star,
            feedback: Wrench::from_vector(&rec.tau_h),
            robot_command: Wrench::from_vector(&rec.tau_r),
            operator_wrench: self.operator,
            guidance: rec.guidance,
            gripper: GripperState { closed: self.closed, holding: self.holding },
            busy: self.job.is_some(),
            driver: self.driver,
            last_input: self.last_input.clone(),
            warnings: self.warnings.iter().cloned().collect(),
            you,
        }
    }

    fn broadcast(&mut self) {
        let delta = self.pending_delta.take();
        let seq = self.next_seq();
        let frame = Arc::new(Envelope::new(seq, Body::State(Box::new(self.snapshot(delta, None)))).to_json());
        let mut full = Vec::new();
        for (&id, c) in self.clients.iter_mut() {
            if c.needs_full {
                full.push(id);
            } else if c.tx.try_send(frame.clone()).is_err() {
                c.needs_full = true;
            }
        }
        for id in full {
            let snap = self.snapshot(Some(full_cloud(self.cloud_version, &self.cloud)), Some(id));
            let seq = self.next_seq();
            let frame = Arc::new(Envelope::new(seq, Body::State(Box::new(snap))).to_json());
            if let Some(c) = self.clients.get_mut(&id) {
                if c.tx.try_send(frame).is_ok() {
                    c.needs_full = false;
                }
            }
        }
    }

    /// Runs frames until shutdown: apply queued inputs, advance the world by
    /// one frame of simulated time, broadcast.
    fn run(mut self, inbox: mpsc::Receiver<Inbound>) {
        let frame = Duration::from_secs_f64(1.0 / self.cfg.service.broadcast_hz);
        let mut next = Instant::now();
        loop {
            loop {
                match inbox.try_recv() {
                    Ok(m) => {
                        if !self.handle(m) {
                            return;
                        }
                    }
                    Err(mpsc::TryRecvError::Empty) => break,
                    Err(mpsc::TryRecvError::Disconnected) => return,
                }
            }
            self.poll_perception();
            if let Err(e) = self.advance(frame.as_secs_f64()) {
                log::error!("simulation stopped: {e}");
                self.warn(None, format!("simulation fault: {e}"), None, None);
                return;
            }
            self.update_rerank();
            self.broadcast();
            next += frame;
            let now = Instant::now();
            if next > now {
                thread::sleep(next - now);
            } else {
                next = now;
            }
        }
    }
}

#[derive(Clone)]
struct AppState {
    inbox: mpsc::Sender<Inbound>,
    ids: Arc<AtomicU64>,
    queue: usize,
}

async fn healthz() -> &'static str {
    "ok"
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(app): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, app))
}

async fn connection(socket: WebSocket, app: AppState) {
    let client = app.ids.fetch_add(1, Ordering::Relaxed);
    let (tx, mut rx) = tmpsc::channel::<Frame>(app.queue);
    if app.inbox.send(Inbound::Connect { client, tx }).is_err() {
        return;
    }
    let (mut sink, mut stream) = socket.split();
    loop {
        tokio::select! {
            msg = stream.next() => match msg {
                Some(Ok(Message::Text(t))) => {
                    let _ = app.inbox.send(Inbound::Text { client, text: t.to_string() });
                }
                Some(Ok(Message::Binary(b))) => {
                    let _ = app.inbox.send(Inbound::Text { client, text: String::from_utf8_lossy(&b).into_owned() });
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
            frame = rx.recv() => match frame {
                Some(f) => {
                    if sink.send(Message::Text(f.as_str().into())).await.is_err() {
                        break;
                    }
                }
                None => break,
            },
        }
    }
    let _ = app.inbox.send(Inbound::Disconnect { client });
}

/// A running service; dropping it does not stop it, call [`Running::shutdown`].
pub struct Running {
    pub addr: SocketAddr,
    inbox: mpsc::Sender<Inbound>,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    server: tokio::task::JoinHandle<std::io::Result<()>>,
    sim: Option<thread::JoinHandle<()>>,
}

impl Running {
    pub async fn shutdown(mut self) -> Result<()> {
        let _ = self.inbox.send(Inbound::Shutdown);
        if let Some(s) = self.stop.take() {
            let _ = s.send(());
        }
        (&mut self.server).await??;
        if let Some(h) = self.sim.take() {
            h.join().map_err(|_| anyhow::anyhow!("simulation thread panicked"))?;
        }
        Ok(())
    }

    /// Waits until the server stops on its own.
    pub async fn wait(mut self) -> Result<()> {
        (&mut self.server).await??;
        Ok(())
    }
}

/// Binds `cfg.service.bind` (port `0` picks a free one), builds the session
/// and starts serving `/ws` and `/healthz`.
pub async fn start(cfg: SessionConfig) -> Result<Running> {
    cfg.validate()?;
    let listener = TcpListener::bind(&cfg.service.bind).await.with_context(|| format!("binding {}", cfg.service.bind))?;
    let addr = listener.local_addr()?;
    let queue = cfg.service.client_queue;
    let (session, jobs, results) = Session::new(cfg.clone())?;
    let models = session.models.clone();
    thread::Builder::new().name("perception".into()).spawn(move || perception_worker(cfg, models, jobs, results))?;
    let (inbox, inbox_rx) = mpsc::channel();
    let sim = thread::Builder::new().name("simulation".into()).spawn(move || session.run(inbox_rx))?;
    let app = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/healthz", get(healthz))
        .with_state(AppState { inbox: inbox.clone(), ids: Arc::new(AtomicU64::new(1)), queue });
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = stop_rx.await;
            })
            .await
    });
    log::info!("serving on ws://{addr}/ws");
    Ok(Running { addr, inbox, stop: Some(stop_tx), server, sim: Some(sim) })
}

/// Serves until Ctrl-C.
pub async fn serve(cfg: SessionConfig) -> Result<()> {
    let running = start(cfg).await?;
    eprintln!("listening on ws://{}/ws", running.addr);
    tokio::signal::ctrl_c().await?;
    running.shutdown().await
}
