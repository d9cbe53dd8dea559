use nalgebra::{Rotation3, SymmetricEigen, Unit};
use serde::{Deserialize, Serialize};

use super::{Mat3, PointNormalCloud, RigidTransform, Vec3};
use crate::Result;

/// Box with orthonormal axes (matrix columns) and non-negative half extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBoundingBox {
    pub center: Vec3,
    pub axes: Mat3,
    pub half_extents: Vec3,
    /// Set when the cloud was collinear or coincident and the box fell back
    /// to the world axes.
    pub degenerate: bool,
}

impl OrientedBoundingBox {
    /// Inclusive test with a 1 nm slack so that the points a box was fitted
    /// to are always inside it.
    pub fn contains(&self, p: &Vec3, margin: f64) -> bool {
        let local = self.axes.transpose() * (p - self.center);
        (0..3).all(|a| local[a].abs() <= self.half_extents[a] + margin + 1e-9)
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            center: t.apply_point(&self.center),
            axes: t.rotation.matrix() * self.axes,
            half_extents: self.half_extents,
            degenerate: self.degenerate,
        }
    }

    pub fn inflated(&self, margin: f64) -> Self {
        Self { half_extents: self.half_extents.add_scalar(margin), ..*self }
    }
}

fn fit_in_frame(points: &[Vec3], axes: &Mat3) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    let at = axes.transpose();
    for p in points {
        let l = at * p;
        lo = lo.inf(&l);
        hi = hi.sup(&l);
    }
    let center = axes * ((lo + hi) * 0.5);
    (center, (hi - lo) * 0.5)
}

fn frame_from_axis(axis: &Vec3, angle: f64) -> Mat3 {
    let a = axis.normalize();
    let helper = if a.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = a.cross(&helper).normalize();
    let v = a.cross(&u);
    let rot = Rotation3::from_axis_angle(&Unit::new_unchecked(a), angle);
    let (u, v) = (rot * u, rot * v);
    Mat3::from_columns(&[u, v, a])
}

/// Oriented bounding box of a cloud.
///
/// Axes start from the principal components of the point covariance; when
/// eigenvalues are (nearly) repeated the frame is refined by a minimum-volume
/// search about the principal axes and the dominant normal direction. Clouds
/// with fewer than three points or no spread in two directions fall back to
/// an axis-aligned box with `degenerate` set.
pub fn obb_of_cloud(cloud: &PointNormalCloud) -> Result<OrientedBoundingBox> {
    cloud.ensure_non_empty()?;
    let points = cloud.points();
    let mean = cloud.centroid().unwrap_or_default();
    let mut cov = Mat3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= points.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let scale = lambda[0].max(1e-300);

    if points.len() < 3 || lambda[0] < 1e-18 || lambda[1] / scale < 1e-12 {
        let (lo, hi) = cloud.aabb().expect("non-empty");
        return Ok(OrientedBoundingBox {
            center: (lo + hi) * 0.5,
            axes: Mat3::identity(),
            half_extents: (hi - lo) * 0.5,
            degenerate: true,
        });
    }

    let mut pca = Mat3::from_columns(&[
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
        eig.eigenvectors.column(order[2]).into_owned(),
    ]);
    if pca.determinant() < 0.0 {
        pca.set_column(2, &(-pca.column(2)));
    }

    let (center, half) = fit_in_frame(points, &pca);
    let mut best = OrientedBoundingBox { center, axes: pca, half_extents: half, degenerate: false };

    let well_separated = (lambda[0] - lambda[1]) / scale > 0.05 && (lambda[1] - lambda[2]) / scale > 0.05;
    if !well_separated {
        let mut seeds: Vec<Vec3> = (0..3).map(|c| pca.column(c).into_owned()).collect();
        seeds.extend([Vec3::x(), Vec3::y(), Vec3::z()]);
        if let Some(n) = dominant_normal(cloud) {
            seeds.push(n);
        }
        const STEPS: usize = 90;
        for axis in &seeds {
            for s in 0..STEPS {
                let angle = std::f64::consts::FRAC_PI_2 * s as f64 / STEPS as f64;
                let frame = frame_from_axis(axis, angle);
                let (c, h) = fit_in_frame(points, &frame);
                let vol = h.x * h.y * h.z;
                if vol < best.half_extents.x * best.half_extents.y * best.half_extents.z - 1e-15 {
                    best = OrientedBoundingBox { center: c, axes: frame, half_extents: h, degenerate: false };
                }
            }
        }
    }
    Ok(best)
}

/// Normal direction shared by the most normals within 10°, over a subsample.
fn dominant_normal(cloud: &PointNormalCloud) -> Option<Vec3> {
    let normals = cloud.normals();
    let stride = (normals.len() / 256).max(1);
    let probe: Vec<&Vec3> = normals.iter().step_by(stride).collect();
    let cos_tol = 10f64.to_radians().cos();
    probe
        .iter()
        .map(|c| (probe.iter().filter(|n| n.dot(c) > cos_tol).count(), **c))
        .max_by_key(|(count, _)| *count)
        .map(|(_, n)| n)
}
