#![allow(dead_code)]

use nalgebra::Rotation3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use telegrasp_core::geometry::{PointNormalCloud, RigidTransform, Vec3};

/// Grid-sampled surface of an axis-aligned box centred at the origin.
pub fn box_surface(dims: Vec3, spacing: f64) -> PointNormalCloud {
    let h = dims / 2.0;
    let mut cloud = PointNormalCloud::empty();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let nu = (dims[u] / spacing).round().max(1.0) as usize;
        let nv = (dims[v] / spacing).round().max(1.0) as usize;
        for sign in [-1.0, 1.0] {
            for a in 0..nu {
                for b in 0..nv {
                    let mut p = Vec3::zeros();
                    p[axis] = sign * h[axis];
                    p[u] = -h[u] + (a as f64 + 0.5) * dims[u] / nu as f64;
                    p[v] = -h[v] + (b as f64 + 0.5) * dims[v] / nv as f64;
                    let mut n = Vec3::zeros();
                    n[axis] = sign;
                    cloud.push(p, n);
                }
            }
        }
    }
    cloud
}

/// Union of a long bar and a perpendicular stub: no rotational symmetry.
/// Recentred on its point centroid.
pub fn l_block(spacing: f64) -> PointNormalCloud {
    let bar_dims = Vec3::new(0.12, 0.04, 0.05);
    let stub_dims = Vec3::new(0.04, 0.06, 0.05);
    let stub_at = Vec3::new(0.04, 0.05, 0.0);
    let inside = |p: &Vec3, c: Vec3, d: Vec3| ((p - c).abs() - d / 2.0).max() < -1e-9;
    let mut cloud = PointNormalCloud::empty();
    for (p, n) in box_surface(bar_dims, spacing).iter() {
        if !inside(p, stub_at, stub_dims) {
            cloud.push(*p, *n);
        }
    }
    for (p, n) in box_surface(stub_dims, spacing).iter() {
        let q = p + stub_at;
        if !inside(&q, Vec3::zeros(), bar_dims) && !(n.y < -0.5 && (q.y + 0.03).abs() < 1e-3 && q.x.abs() < 0.06) {
            cloud.push(q, *n);
        }
    }
    cloud.centered()
}

/// Drops points facing down (resting on the table) after the transform.
pub fn place_on_table(model: &PointNormalCloud, pose: &RigidTransform) -> PointNormalCloud {
    let moved = model.transformed(pose);
    let keep: Vec<usize> = moved.normals().iter().enumerate().filter(|(_, n)| n.z > -0.9).map(|(i, _)| i).collect();
    moved.select(&keep)
}

/// Pose resting on its largest-footprint face with random yaw at `(x, y)`;
/// `half_height` is the centroid's height above the table.
pub fn table_pose(rng: &mut ChaCha8Rng, x: f64, y: f64, half_height: f64) -> RigidTransform {
    let yaw = rng.random_range(0.0..std::f64::consts::TAU);
    RigidTransform::new(Rotation3::from_axis_angle(&Vec3::z_axis(), yaw), Vec3::new(x, y, half_height))
}

pub fn distractors(rng: &mut ChaCha8Rng, count: usize, spacing: f64, avoid: &[Vec3]) -> PointNormalCloud {
    let mut cloud = PointNormalCloud::empty();
    let mut centres: Vec<Vec3> = avoid.to_vec();
    let mut placed = 0;
    while placed < count {
        let dims = Vec3::new(rng.random_range(0.03..0.09), rng.random_range(0.03..0.09), rng.random_range(0.03..0.10));
        let c = Vec3::new(rng.random_range(-0.25..0.25), rng.random_range(-0.25..0.25), dims.z / 2.0);
        if centres.iter().any(|o| (o.xy() - c.xy()).norm() < 0.13) {
            continue;
        }
        let pose = table_pose(rng, c.x, c.y, c.z);
        cloud.extend_from(&place_on_table(&box_surface(dims, spacing), &pose));
        centres.push(c);
        placed += 1;
    }
    cloud
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
