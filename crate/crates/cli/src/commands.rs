use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};
use telegrasp_core::geometry::ply::{load_ply, save_ply, PlyFormat};
use telegrasp_core::geometry::{PointNormalCloud, RigidTransform, UnitDualQuaternion, Vec3};
use telegrasp_core::grasp::{rerank, GraspPlanner, GraspSet, GripperGeometry, GripperModel};
use telegrasp_core::pose::{PoseEstimate, PoseEstimator};
use telegrasp_sim::{
    default_library, default_viewpoints, generate_clutter, render_stitched_cloud, run_clearance_episode, EpisodeRun,
    ObjectModel, OperatorPolicy, SceneDescription,
};

use crate::config::SessionConfig;
use crate::format::{to_json_line, to_json_pretty};
use crate::plots;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NO_CANDIDATES: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

/// Reference rate quoted for the original implementation; hardware differs.
pub const REFERENCE_GRASPS_PER_SECOND: f64 = 815.025;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseJson {
    pub rank: usize,
    /// Row-major 4×4 model-to-scene transform.
    pub matrix: [[f64; 4]; 4],
    pub delta_max: f64,
    pub rotation_correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosesJson {
    pub score: f64,
    pub warning: Option<String>,
    pub rotation_candidates: usize,
    pub hypotheses: Vec<PoseJson>,
}

impl From<&PoseEstimate> for PosesJson {
    fn from(e: &PoseEstimate) -> Self {
        let hypotheses = e
            .hypotheses
            .iter()
            .map(|h| {
                let m = h.transform.to_matrix4();
                PoseJson {
                    rank: h.rank,
                    matrix: std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)])),
                    delta_max: h.delta_max,
                    rotation_correlation: h.rotation_correlation,
                }
            })
            .collect();
        Self { score: e.score, warning: e.warning.clone(), rotation_candidates: e.rotation_candidates, hypotheses }
    }
}

fn emit(out: Option<&Path>, name: &str, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), text)?;
        }
        None => writeln!(stdout, "{text}")?,
    }
    Ok(())
}

fn read_cloud(path: &Path) -> Result<PointNormalCloud> {
    load_ply(path).with_context(|| format!("reading {}", path.display()))
}

/// Ranked poses of `model` in `scene`. Exit 2 when there is no hypothesis
/// or the alignment score is low; the JSON is written either way.
pub fn estimate_pose(cfg: &SessionConfig, scene: &Path, model: &Path, out: Option<&Path>, stdout: &mut dyn Write) -> Result<i32> {
    let scene = read_cloud(scene)?;
    let model = read_cloud(model)?;
    let est = PoseEstimator::new(cfg.episode.pose.clone())?.estimate(&scene, &model)?;
    emit(out, "poses.json", &to_json_pretty(&PosesJson::from(&est))?, stdout)?;
    if let Some(w) = &est.warning {
        log::warn!("{w}");
    }
    Ok(if est.hypotheses.is_empty() || est.warning.is_some() { EXIT_NO_CANDIDATES } else { EXIT_OK })
}

/// Grasps on `object` checked against `scene`, with generation stats.
pub fn plan_grasps(
    cfg: &SessionConfig,
    object: &Path,
    scene: &Path,
    gripper: Option<&Path>,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<i32> {
    let object = read_cloud(object)?;
    let scene = read_cloud(scene)?;
    let geometry = match gripper {
        Some(p) => serde_json::from_str::<GripperGeometry>(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => cfg.episode.gripper.clone(),
    };
    let planner = GraspPlanner::new(GripperModel::new(geometry)?, cfg.episode.grasp.clone())?;
    let set = planner.generate(&object, &scene)?;
    eprintln!(
        "{} grasps in {:.3} s ({:.1} grasps/s; reference {REFERENCE_GRASPS_PER_SECOND} grasps/s on other hardware)",
        set.stats.count,
        set.stats.seconds,
        set.stats.grasps_per_second()
    );
    emit(out, "grasps.json", &to_json_pretty(&set)?, stdout)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankStep {
    pub step: usize,
    pub hand_position: Vec3,
    pub best: usize,
    pub top: Vec<usize>,
}

/// Moves a hand in a straight line from 20 cm above the best static grasp
/// down onto it and re-ranks at every step.
pub fn rerank_demo(cfg: &SessionConfig, grasps: &Path, steps: usize, stdout: &mut dyn Write) -> Result<i32> {
    let text = fs::read_to_string(grasps).with_context(|| format!("reading {}", grasps.display()))?;
    let mut set = GraspSet::from_json(&text).with_context(|| format!("parsing {}", grasps.display()))?;
    if set.is_empty() {
        bail!("{} holds no grasps", grasps.display());
    }
    set.sort_by_score();
    let goal = set.grasps[0].transform();
    let start_q = UnitQuaternion::identity();
    let start_t = goal.translation + Vec3::new(0.0, 0.0, 0.2);
    let steps = steps.max(1);
    for k in 0..=steps {
        let f = k as f64 / steps as f64;
        let q = start_q.slerp(&goal.quaternion(), f);
        let t = start_t.lerp(&goal.translation, f);
        let hand = UnitDualQuaternion::from_transform(&RigidTransform::from_quaternion(q, t));
        let r = rerank(&set, &hand, &cfg.episode.rerank)?;
        let top = r.grasps.grasps.iter().take(5).map(|g| g.id).collect();
        writeln!(stdout, "{}", to_json_line(&RerankStep { step: k, hand_position: t, best: r.best, top })?)?;
    }
    Ok(EXIT_OK)
}

/// The object library and the configured scene.
pub fn load_scene(cfg: &SessionConfig) -> Result<(SceneDescription, Vec<ObjectModel>)> {
    let models = default_library(cfg.model_density)?;
    let scene = match &cfg.scene.file {
        Some(p) => SceneDescription::from_json(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => generate_clutter(&models, cfg.scene.objects, cfg.scene.seed, &cfg.scene.clutter)?,
    };
    Ok((scene, models))
}

/// Writes the scene description, its stitched cloud and the model clouds.
pub fn gen_scene(cfg: &SessionConfig, out: &Path) -> Result<i32> {
    let (scene, models) = load_scene(cfg)?;
    fs::create_dir_all(out.join("models"))?;
    fs::write(out.join("scene.json"), scene.to_json()?)?;
    let viewpoints = cfg.episode.viewpoints.clone().unwrap_or_else(|| default_viewpoints(&scene.table));
    let stitched = render_stitched_cloud(&scene, &models, &viewpoints, cfg.episode.resolution)?;
    save_ply(out.join("scene.ply"), &stitched.cloud, PlyFormat::BinaryLittleEndian)?;
    for m in &models {
        save_ply(out.join("models").join(format!("{}.ply", m.id)), &m.cloud, PlyFormat::BinaryLittleEndian)?;
    }
    eprintln!("{} objects, {} scene points -> {}", scene.instances.len(), stitched.cloud.len(), out.display());
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    /// Wall-clock seconds per instance, from selection to drop.
    pub per_object: Vec<(usize, f64)>,
}

/// Files written by [`simulate`], relative to the output directory.
pub const EPISODE_LOG: &str = "episode.jsonl";
pub const SUMMARY: &str = "summary.json";
pub const TIMING: &str = "timing.json";
pub const TRIAGE_DIR: &str = "triage";

/// Runs a scripted clearance episode and writes its log, summary, timing
/// and plots. Objects left on the table are archived under `triage/`.
/// Exit 3 when the table is not cleared.
pub fn simulate(cfg: &SessionConfig, policy: &str, out: &Path) -> Result<i32> {
    let policy = OperatorPolicy::by_name(policy)?;
    let (scene, models) = load_scene(cfg)?;
    let run = run_clearance_episode(&scene, &models, &policy, &cfg.episode)?;
    write_episode(&run, &scene, out)?;
    let r = &run.result;
    eprintln!(
        "seed {}: {}/{} cleared ({} on the first pick), {:.1} s simulated, {:.1} s wall",
        r.seed, r.cleared, r.object_count, r.first_attempt_successes, r.sim_time, run.wall_total
    );
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    Ok(if r.complete && r.cleared == r.object_count { EXIT_OK } else { EXIT_PARTIAL })
}

pub fn write_episode(run: &EpisodeRun, scene: &SceneDescription, out: &Path) -> Result<()> {
    fs::create_dir_all(out.join("plots"))?;
    let mut log = String::new();
    for rec in &run.log {
        log.push_str(&to_json_line(rec)?);
        log.push('\n');
    }
    fs::write(out.join(EPISODE_LOG), log)?;
    fs::write(out.join(SUMMARY), to_json_pretty(&run.result)?)?;
    let timing = Timing { total_seconds: run.wall_total, per_object: run.wall_seconds.clone() };
    fs::write(out.join(TIMING), to_json_pretty(&timing)?)?;
    fs::write(out.join("plots").join("trajectory.svg"), plots::trajectory_plot(&run.log))?;
    fs::write(out.join("plots").join("forces.svg"), plots::force_plot(&run.log))?;
    let failed: Vec<_> = run.result.outcomes.iter().filter(|o| !o.success).collect();
    let triage = out.join(TRIAGE_DIR);
    if failed.is_empty() && run.result.complete {
        if triage.exists() {
            fs::remove_dir_all(&triage)?;
        }
    } else {
        fs::create_dir_all(&triage)?;
        fs::write(triage.join("scene.json"), scene.to_json()?)?;
        fs::write(triage.join("failed_outcomes.json"), to_json_pretty(&failed)?)?;
        log::warn!("{} object(s) not cleared; archived to {}", failed.len(), triage.display());
    }
    Ok(())
}

pub fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
