use crate::geometry::{PointIndex, Vec3};

/// Antipodal friction-cone test: the segment between the contacts must lie
/// inside both cones of half-angle `atan μ` around the inward normals.
pub fn force_closure_filter(p1: &Vec3, n1: &Vec3, p2: &Vec3, n2: &Vec3, mu: f64) -> bool {
    let d = p2 - p1;
    let len = d.norm();
    if len < 1e-12 || !(mu >= 0.0) {
        return false;
    }
    let u = d / len;
    let cos_cone = mu.atan().cos();
    // tiny slack so exactly antipodal contacts pass at μ = 0
    u.dot(&-n1.normalize()) >= cos_cone - 1e-12 && (-u).dot(&-n2.normalize()) >= cos_cone - 1e-12
}

/// Mean of `n · n_j` over the `k` nearest neighbours of `point`, clamped to
/// [0, 1]; 1 on a flat patch, lower at edges and on curved surfaces.
/// Neighbours facing the opposite way (`n · n_j < −0.5`) belong to the far
/// side of a thin wall and are skipped.
pub fn local_flatness(index: &PointIndex, normals: &[Vec3], point: &Vec3, normal: &Vec3, k: usize) -> f64 {
    let dots: Vec<f64> = index
        .nearest(point, k + 1)
        .iter()
        .map(|&(i, _)| normal.dot(&normals[i]))
        .filter(|d| *d >= -0.5)
        .collect();
    if dots.is_empty() {
        return 0.0;
    }
    (dots.iter().sum::<f64>() / dots.len() as f64).clamp(0.0, 1.0)
}

/// Static score in [0, 1]: antipodality `max(0, −n₁·n₂)` times the local
/// flatness at both contacts. A stand-in for the contact-moment metric.
pub fn score_grasp(n1: &Vec3, n2: &Vec3, flat1: f64, flat2: f64) -> f64 {
    ((-n1.dot(n2)).max(0.0) * flat1.clamp(0.0, 1.0) * flat2.clamp(0.0, 1.0)).clamp(0.0, 1.0)
}
