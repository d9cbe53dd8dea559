use std::collections::HashMap;

use telegrasp_core::geometry::{padded_bounds, PointNormalCloud, Vec3, VoxelGrid};

use crate::objects::ObjectModel;
use crate::scene::{SceneDescription, TableExtent};
use crate::Result;

/// Merged cloud of every viewpoint, with the instance each point came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StitchedCloud {
    pub cloud: PointNormalCloud,
    pub labels: Vec<usize>,
}

impl StitchedCloud {
    pub fn of_instance(&self, instance_id: usize) -> PointNormalCloud {
        let idx: Vec<usize> = (0..self.labels.len()).filter(|&i| self.labels[i] == instance_id).collect();
        self.cloud.select(&idx)
    }
}

/// Four cameras around the table, 45° off its edges, looking down at it.
pub fn default_viewpoints(table: &TableExtent) -> Vec<Vec3> {
    let cx = 0.5 * (table.min[0] + table.max[0]);
    let cy = 0.5 * (table.min[1] + table.max[1]);
    (0..4)
        .map(|k| {
            let a = std::f64::consts::FRAC_PI_4 + k as f64 * std::f64::consts::FRAC_PI_2;
            Vec3::new(cx + 0.6 * a.cos(), cy + 0.6 * a.sin(), table.z + 0.55)
        })
        .collect()
}

/// Voxels this close (Chebyshev, in cells) to the target never occlude it,
/// so a surface does not shadow itself.
const SELF_MARGIN: i64 = 2;

/// Points of the remaining instances seen from at least one viewpoint,
/// merged to one point per voxel and facing direction. A point is seen when
/// it faces the camera and the voxel ray from the camera reaches it without
/// crossing another occupied voxel.
pub fn render_stitched_cloud(
    scene: &SceneDescription,
    models: &[ObjectModel],
    viewpoints: &[Vec3],
    resolution: f64,
) -> Result<StitchedCloud> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut labels = Vec::new();
    for inst in scene.remaining() {
        let c = scene.instance_cloud(models, inst.instance_id)?;
        points.extend_from_slice(c.points());
        normals.extend_from_slice(c.normals());
        labels.extend(std::iter::repeat_n(inst.instance_id, c.len()));
    }
    if points.is_empty() || viewpoints.is_empty() {
        return Ok(StitchedCloud::default());
    }
    let (lo, hi) = points.iter().fold((points[0], points[0]), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    let bounds = padded_bounds(&lo, &hi, resolution, 0.1)?;
    let (grid, _) = VoxelGrid::from_points(bounds, &points);

    // one point per voxel and facing direction, so both sides of a thin wall survive
    let facing = |n: &Vec3| {
        let a = n.iamax();
        2 * a + usize::from(n[a] < 0.0)
    };
    let mut merged: HashMap<([usize; 3], usize), usize> = HashMap::new();
    let mut order = Vec::new();
    for cam in viewpoints {
        for (i, p) in points.iter().enumerate() {
            if normals[i].dot(&(cam - p)) <= 0.0 {
                continue;
            }
            let Some(cell) = grid.bounds().index_of(p) else { continue };
            let key = (cell, facing(&normals[i]));
            if merged.contains_key(&key) || !ray_clear(&grid, cam, p, cell) {
                continue;
            }
            merged.insert(key, i);
            order.push(i);
        }
    }
    let cloud = PointNormalCloud::new(order.iter().map(|&i| points[i]).collect(), order.iter().map(|&i| normals[i]).collect())?;
    Ok(StitchedCloud { cloud, labels: order.iter().map(|&i| labels[i]).collect() })
}

/// Amanatides–Woo traversal from `from` toward `to`, stopping at the target
/// voxel. False when an occupied voxel outside the self margin is crossed.
fn ray_clear(grid: &VoxelGrid, from: &Vec3, to: &Vec3, target: [usize; 3]) -> bool {
    let b = grid.bounds();
    let res = b.resolution;
    let dims = b.dims;
    let d = to - from;
    let len = d.norm();
    if len < 1e-12 {
        return true;
    }
    // clip to the grid box
    let lo = b.origin;
    let hi = b.max_corner();
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for a in 0..3 {
        if d[a].abs() < 1e-15 {
            if from[a] < lo[a] || from[a] > hi[a] {
                return true;
            }
            continue;
        }
        let (ta, tb) = ((lo[a] - from[a]) / d[a], (hi[a] - from[a]) / d[a]);
        t0 = t0.max(ta.min(tb));
        t1 = t1.min(ta.max(tb));
    }
    if t0 > t1 {
        return true;
    }
    let start = from + d * (t0 + 1e-9);
    let mut cell = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        cell[a] = (((start[a] - lo[a]) / res).floor() as i64).clamp(0, dims[a] as i64 - 1);
        if d[a] > 0.0 {
            step[a] = 1;
            t_max[a] = (lo[a] + (cell[a] + 1) as f64 * res - from[a]) / d[a];
            t_delta[a] = res / d[a];
        } else if d[a] < 0.0 {
            step[a] = -1;
            t_max[a] = (lo[a] + cell[a] as f64 * res - from[a]) / d[a];
            t_delta[a] = -res / d[a];
        }
    }
    let target = target.map(|v| v as i64);
    loop {
        if cell == target {
            return true;
        }
        let near = (0..3).all(|a| (cell[a] - target[a]).abs() <= SELF_MARGIN);
        if !near && grid.get([cell[0] as usize, cell[1] as usize, cell[2] as usize]) {
            return false;
        }
        let a = if t_max[0] < t_max[1] {
            if t_max[0] < t_max[2] { 0 } else { 2 }
        } else if t_max[1] < t_max[2] {
            1
        } else {
            2
        };
        if t_max[a] > 1.0 + 1e-9 {
            return true;
        }
        cell[a] += step[a];
        if cell[a] < 0 || cell[a] >= dims[a] as i64 {
            return true;
        }
        t_max[a] += t_delta[a];
    }
}
