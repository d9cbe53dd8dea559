use std::collections::{HashMap, HashSet};
use std::time::Instant;

use nalgebra::{Rotation3, UnitQuaternion};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::closure::{force_closure_filter, local_flatness, score_grasp};
use super::gripper::GripperModel;
use super::types::{Grasp, GraspSet, GraspStats};
use crate::geometry::{padded_bounds, Mat3, PointIndex, PointNormalCloud, RigidTransform, UnitDualQuaternion, Vec3, VoxelGrid};
use crate::spherical::{
    bin_normal, compute_begi, sample_rotations, sht_forward_real, RotationSampling, SphereGrid, So3Correlator,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspConfig {
    pub bandwidth: usize,
    pub l_max: usize,
    /// Voxel size of the collision grids.
    pub resolution: f64,
    /// Rotations kept where the hand/object correlation exceeds this fraction of its maximum.
    pub tc_r_fraction: f64,
    pub max_rotations: usize,
    /// Approach directions tried per closing axis, evenly spaced about it.
    pub approach_samples: usize,
    pub max_pairs_per_rotation: usize,
    /// Points considered per sphere cell when pairing contacts.
    pub max_points_per_cell: usize,
    pub friction: f64,
    /// Maximum angle between `n₁` and `−n₂`, degrees.
    pub antiparallel_tolerance_deg: f64,
    /// Minimum static score (`tc_g`).
    pub min_score: f64,
    pub flatness_neighbours: usize,
    /// A horizontal support plane; any gripper sample below it collides.
    pub table_z: Option<f64>,
    pub max_grasps: Option<usize>,
}

impl Default for GraspConfig {
    fn default() -> Self {
        Self {
            bandwidth: 16,
            l_max: 15,
            resolution: 0.005,
            tc_r_fraction: 0.7,
            max_rotations: 256,
            approach_samples: 8,
            max_pairs_per_rotation: 64,
            max_points_per_cell: 256,
            friction: 0.5,
            antiparallel_tolerance_deg: 30.0,
            min_score: 0.1,
            flatness_neighbours: 10,
            table_z: None,
            max_grasps: None,
        }
    }
}

impl GraspConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.l_max >= self.bandwidth {
            return Err(Error::Undersampled { l_max: self.l_max, bandwidth: self.bandwidth });
        }
        if !(self.resolution > 0.0) {
            return bad("resolution must be positive");
        }
        if !(self.tc_r_fraction > 0.0 && self.tc_r_fraction <= 1.0) {
            return bad("tc_r_fraction must be in (0, 1]");
        }
        if !(self.friction >= 0.0) {
            return bad("friction must be non-negative");
        }
        if !(0.0..=90.0).contains(&self.antiparallel_tolerance_deg) {
            return bad("antiparallel_tolerance_deg must be in [0, 90]");
        }
        if !(0.0..=1.0).contains(&self.min_score) {
            return bad("min_score must be in [0, 1]");
        }
        if self.max_rotations == 0 || self.approach_samples == 0 || self.max_pairs_per_rotation == 0 || self.max_points_per_cell == 0 {
            return bad("caps must be positive");
        }
        Ok(())
    }
}

/// Whether the gripper at `pose` with opening `width` hits an occupied scene
/// voxel. Finger samples may overlap `target` voxels lying between the pads.
pub fn check_collision(
    gripper: &GripperModel,
    pose: &RigidTransform,
    width: f64,
    scene: &VoxelGrid,
    target: Option<&VoxelGrid>,
    table_z: Option<f64>,
) -> bool {
    let res = scene.resolution();
    let inner = width / 2.0 + res * 3f64.sqrt() / 2.0;
    let inv = pose.inverse();
    gripper.collision_samples(width, res / 2.0).iter().any(|(local, finger)| {
        let p = pose.apply_point(local);
        if table_z.is_some_and(|z| p.z < z) {
            return true;
        }
        let Some(idx) = scene.bounds().index_of(&p) else {
            return false;
        };
        if !scene.get(idx) {
            return false;
        }
        if *finger && target.is_some_and(|t| t.is_occupied_at(&p)) {
            let centre = inv.apply_point(&scene.bounds().cell_center(idx));
            return centre.y.abs() >= inner;
        }
        true
    })
}

#[derive(Debug, Clone, Copy)]
struct Pair {
    i1: usize,
    i2: usize,
}

pub struct GraspPlanner {
    cfg: GraspConfig,
    gripper: GripperModel,
    correlator: So3Correlator,
    grid: SphereGrid,
}

impl GraspPlanner {
    pub fn new(gripper: GripperModel, cfg: GraspConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = SphereGrid::new(cfg.bandwidth)?;
        let correlator = So3Correlator::new(cfg.bandwidth, cfg.l_max)?;
        Ok(Self { cfg, gripper, correlator, grid })
    }

    pub fn config(&self) -> &GraspConfig {
        &self.cfg
    }

    pub fn gripper(&self) -> &GripperModel {
        &self.gripper
    }

    /// Grasps on `object` (world frame) checked for collision against `scene`.
    pub fn generate(&self, object: &PointNormalCloud, scene: &PointNormalCloud) -> Result<GraspSet> {
        object.ensure_non_empty()?;
        let start = Instant::now();
        let cfg = &self.cfg;
        let mut stats = GraspStats::default();

        let begi = compute_begi(object, &self.grid);
        let hand_normals = self.gripper.contact_normals();
        let hand: PointNormalCloud = hand_normals.iter().map(|n| (Vec3::zeros(), *n)).collect();
        let hand_begi = compute_begi(&hand, &self.grid);
        let f = sht_forward_real(&begi.as_function(), &self.grid, cfg.l_max)?;
        let g = sht_forward_real(&hand_begi.as_function(), &self.grid, cfg.l_max)?;
        let map = self.correlator.correlate(&f, &g)?;
        let candidates = sample_rotations(&map, map.fraction_of_max(cfg.tc_r_fraction), RotationSampling::exhaustive());

        // the hand is symmetric about its closing axis, so each closing axis
        // (strongest correlation first) gets evenly spaced approach directions
        let mut ranked: Vec<_> = candidates.candidates.iter().collect();
        ranked.sort_by(|a, b| b.correlation.total_cmp(&a.correlation).then(a.cell.cmp(&b.cell)));
        let mut seen = HashSet::new();
        let mut rotations: Vec<Rotation3<f64>> = Vec::new();
        for c in ranked {
            if rotations.len() >= cfg.max_rotations {
                break;
            }
            let d1 = c.rotation * hand_normals[0];
            if !seen.insert(bin_normal(&d1, &self.grid)) {
                continue;
            }
            let axis = nalgebra::Unit::new_normalize(d1);
            for k in 0..cfg.approach_samples {
                let spin = Rotation3::from_axis_angle(&axis, std::f64::consts::TAU * k as f64 / cfg.approach_samples as f64);
                rotations.push(spin * c.rotation);
            }
        }
        rotations.truncate(cfg.max_rotations);
        stats.rotations = rotations.len();

        let (lo, hi) = scene.aabb().or(object.aabb()).ok_or(Error::EmptyInput)?;
        let (olo, ohi) = object.aabb().ok_or(Error::EmptyInput)?;
        let (lo, hi) = (lo.inf(&olo), hi.sup(&ohi));
        let bounds = padded_bounds(&lo, &hi, cfg.resolution, 0.25)?;
        let (mut scene_grid, _) = VoxelGrid::from_points(bounds.clone(), scene.points());
        let (target_grid, _) = VoxelGrid::from_points(bounds, object.points());
        for idx in target_grid.occupied_indices().collect::<Vec<_>>() {
            scene_grid.set(idx, true);
        }

        let index = PointIndex::new(object.points());
        let occupied: Vec<(usize, Vec3)> = (0..self.grid.cell_count())
            .filter(|&c| begi.bits[c])
            .map(|c| {
                let (j, k) = self.grid.cell(c);
                (c, self.grid.direction(j, k))
            })
            .collect();
        let neighbourhood = (std::f64::consts::PI / cfg.bandwidth as f64).cos();
        let cos_anti = cfg.antiparallel_tolerance_deg.to_radians().cos();
        let geom = &self.gripper.geometry;

        let pair_lists: Vec<(Rotation3<f64>, Vec<Pair>)> = {
            let mut cache: HashMap<(usize, usize), Vec<Pair>> = HashMap::new();
            let mut out = Vec::with_capacity(rotations.len());
            for r in &rotations {
                let d1 = r * hand_normals[0];
                let d2 = r * hand_normals[1];
                let near = |d: &Vec3| -> Vec<usize> {
                    occupied.iter().filter(|(_, v)| v.dot(d) >= neighbourhood).map(|(c, _)| *c).collect()
                };
                let (c1s, c2s) = (near(&d1), near(&d2));
                let mut pairs = Vec::new();
                for &c1 in &c1s {
                    for &c2 in &c2s {
                        let list = cache.entry((c1, c2)).or_insert_with(|| {
                            let (s1, s2) = (&begi.point_sets[c1], &begi.point_sets[c2]);
                            let (s1, s2) = (subsample(s1, cfg.max_points_per_cell), subsample(s2, cfg.max_points_per_cell));
                            pair_cell(object, &s1, &s2, geom.stroke_min, geom.stroke_max, cfg.friction, cos_anti, &mut stats)
                        });
                        pairs.extend_from_slice(list);
                    }
                }
                let pts = object.points();
                let nrm = object.normals();
                let align = |p: &Pair| nrm[p.i1].dot(&d1) + nrm[p.i2].dot(&d2);
                // one pair per midpoint voxel, best aligned first
                pairs.sort_by(|a, b| align(b).total_cmp(&align(a)).then((a.i1, a.i2).cmp(&(b.i1, b.i2))));
                let mut voxels = HashSet::new();
                pairs.retain(|p| {
                    let m = (pts[p.i1] + pts[p.i2]) / 2.0;
                    voxels.insert(m.map(|v| (v / 0.01).floor() as i64))
                });
                pairs.truncate(cfg.max_pairs_per_rotation);
                out.push((*r, pairs));
            }
            out
        };
        stats.pairs_considered = pair_lists.iter().map(|(_, p)| p.len()).sum();

        let flat_k = cfg.flatness_neighbours;
        let flat = |i: usize| local_flatness(&index, object.normals(), &object.points()[i], &object.normals()[i], flat_k);
        let per_rotation: Vec<Vec<Candidate>> = pair_lists
            .par_iter()
            .map(|(r, pairs)| {
                pairs
                    .iter()
                    .filter_map(|p| {
                        let (p1, p2) = (object.points()[p.i1], object.points()[p.i2]);
                        let (n1, n2) = (object.normals()[p.i1], object.normals()[p.i2]);
                        let y = p2 - p1;
                        let width = y.norm();
                        let y = y / width;
                        let z = r * Vec3::z();
                        let z = z - y * y.dot(&z);
                        if z.norm() < 1e-6 {
                            return None;
                        }
                        let z = z.normalize();
                        let x = y.cross(&z);
                        let rot = Rotation3::from_matrix_unchecked(Mat3::from_columns(&[x, y, z]));
                        let pose = RigidTransform::new(rot, (p1 + p2) / 2.0);
                        let key = (p.i1, p.i2, bin_normal(&z, &self.grid));
                        let score = score_grasp(&n1, &n2, flat(p.i1), flat(p.i2));
                        if score < cfg.min_score {
                            return Some(Candidate { key, outcome: Outcome::LowScore });
                        }
                        if check_collision(&self.gripper, &pose, width, &scene_grid, Some(&target_grid), cfg.table_z) {
                            return Some(Candidate { key, outcome: Outcome::Collision });
                        }
                        Some(Candidate {
                            key,
                            outcome: Outcome::Kept(Grasp {
                                id: 0,
                                contacts: [p1, p2],
                                normals: [n1, n2],
                                pose: UnitDualQuaternion::from_rotation_translation(
                                    &UnitQuaternion::from_rotation_matrix(&rot),
                                    &pose.translation,
                                ),
                                width,
                                score,
                                dynamic_score: 0.0,
                            }),
                        })
                    })
                    .collect()
            })
            .collect();

        let mut seen = HashSet::new();
        let mut grasps = Vec::new();
        for c in per_rotation.into_iter().flatten() {
            if !seen.insert(c.key) {
                continue;
            }
            match c.outcome {
                Outcome::LowScore => stats.rejected_score += 1,
                Outcome::Collision => stats.rejected_collision += 1,
                Outcome::Kept(g) => grasps.push((c.key, g)),
            }
        }
        grasps.sort_by(|a, b| b.1.score.total_cmp(&a.1.score).then(a.0.cmp(&b.0)));
        if let Some(cap) = cfg.max_grasps {
            grasps.truncate(cap);
        }
        let grasps: Vec<Grasp> = grasps
            .into_iter()
            .enumerate()
            .map(|(id, (_, mut g))| {
                g.id = id;
                g
            })
            .collect();
        stats.count = grasps.len();
        stats.seconds = start.elapsed().as_secs_f64();
        if grasps.is_empty() {
            log::info!("no grasp survived: {stats:?}");
        }
        Ok(GraspSet { object_id: None, grasps, stats })
    }
}

enum Outcome {
    LowScore,
    Collision,
    Kept(Grasp),
}

struct Candidate {
    key: (usize, usize, (usize, usize)),
    outcome: Outcome,
}

fn subsample(set: &[usize], cap: usize) -> Vec<usize> {
    if set.len() <= cap {
        return set.to_vec();
    }
    (0..cap).map(|i| set[i * set.len() / cap]).collect()
}

/// For every point of `s1`, the most antipodal feasible partner in `s2`.
#[allow(clippy::too_many_arguments)]
fn pair_cell(
    cloud: &PointNormalCloud,
    s1: &[usize],
    s2: &[usize],
    w_min: f64,
    w_max: f64,
    mu: f64,
    cos_anti: f64,
    stats: &mut GraspStats,
) -> Vec<Pair> {
    let (pts, nrm) = (cloud.points(), cloud.normals());
    let mut out = Vec::new();
    for &i1 in s1 {
        let mut best: Option<(f64, usize)> = None;
        for &i2 in s2 {
            let d = pts[i2] - pts[i1];
            let w = d.norm();
            if w < w_min || w > w_max || -nrm[i1].dot(&nrm[i2]) < cos_anti {
                continue;
            }
            if !force_closure_filter(&pts[i1], &nrm[i1], &pts[i2], &nrm[i2], mu) {
                stats.rejected_force_closure += 1;
                continue;
            }
            let u = d / w;
            let cost = -(u.dot(&-nrm[i1]) + u.dot(&nrm[i2]));
            if best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, i2));
            }
        }
        if let Some((_, i2)) = best {
            out.push(Pair { i1, i2 });
        }
    }
    out
}

pub fn generate_grasps(
    object: &PointNormalCloud,
    scene: &PointNormalCloud,
    gripper: &GripperModel,
    cfg: &GraspConfig,
) -> Result<GraspSet> {
    GraspPlanner::new(gripper.clone(), cfg.clone())?.generate(object, scene)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(centre: Vec3, normal: Vec3, half: f64, step: f64) -> PointNormalCloud {
        let (a, b) = if normal.x.abs() > 0.5 { (Vec3::y(), Vec3::z()) } else { (Vec3::x(), normal.cross(&Vec3::x())) };
        let n = (2.0 * half / step).round() as i64;
        let mut c = PointNormalCloud::empty();
        for i in 0..=n {
            for j in 0..=n {
                c.push(centre + a * (i as f64 * step - half) + b * (j as f64 * step - half), normal);
            }
        }
        c
    }

    #[test]
    fn config_validation() {
        assert!(GraspConfig::default().validate().is_ok());
        assert!(GraspConfig { l_max: 16, ..Default::default() }.validate().is_err());
        assert!(GraspConfig { min_score: 1.5, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn gripper_clear_of_empty_space() {
        let gripper = GripperModel::default();
        let wall = plane(Vec3::new(0.0, 0.0, 0.2), Vec3::z(), 0.05, 0.004);
        let bounds = padded_bounds(&Vec3::repeat(-0.1), &Vec3::repeat(0.3), 0.005, 0.1).unwrap();
        let (grid, _) = VoxelGrid::from_points(bounds, wall.points());
        assert!(!check_collision(&gripper, &RigidTransform::identity(), 0.04, &grid, None, None));
        let into_wall = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 0.19));
        assert!(check_collision(&gripper, &into_wall, 0.04, &grid, None, None));
        assert!(check_collision(&gripper, &RigidTransform::identity(), 0.04, &grid, None, Some(0.0)));
    }

    #[test]
    fn target_between_pads_is_allowed() {
        let gripper = GripperModel::default();
        // slab 3 cm thick across the closing axis, gripped at 3 cm
        let mut slab = plane(Vec3::new(0.0, -0.015, 0.0), -Vec3::y(), 0.008, 0.0025);
        slab.extend_from(&plane(Vec3::new(0.0, 0.015, 0.0), Vec3::y(), 0.008, 0.0025));
        let bounds = padded_bounds(&Vec3::repeat(-0.1), &Vec3::repeat(0.1), 0.005, 0.1).unwrap();
        let (grid, _) = VoxelGrid::from_points(bounds, slab.points());
        let pose = RigidTransform::identity();
        assert!(!check_collision(&gripper, &pose, 0.03, &grid, Some(&grid), None));
        assert!(check_collision(&gripper, &pose, 0.03, &grid, None, None));
        assert!(check_collision(&gripper, &pose, 0.015, &grid, Some(&grid), None));
    }
}
