use nalgebra::SymmetricEigen;

use super::spatial::PointIndex;
use super::{Mat3, PointNormalCloud, Vec3};
use crate::{Error, Result};

/// Normals from a least-squares plane through each point's `k` nearest
/// neighbours, flipped to point away from the cloud centroid.
pub fn estimate_normals(points: &[Vec3], k: usize) -> Result<PointNormalCloud> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!("k must be at least 3, got {k}")));
    }
    if points.len() < k {
        return Err(Error::InvalidParameter(format!(
            "need at least {k} points for normal estimation, got {}",
            points.len()
        )));
    }
    let index = PointIndex::new(points);
    let centroid = points.iter().fold(Vec3::zeros(), |a, p| a + p) / points.len() as f64;
    let mut normals = Vec::with_capacity(points.len());
    for p in points {
        let nbrs = index.nearest(p, k);
        let mean = nbrs.iter().fold(Vec3::zeros(), |a, &(i, _)| a + points[i]) / nbrs.len() as f64;
        let mut cov = Mat3::zeros();
        for &(i, _) in &nbrs {
            let d = points[i] - mean;
            cov += d * d.transpose();
        }
        let eig = SymmetricEigen::new(cov);
        let smallest = eig.eigenvalues.imin();
        let mut n: Vec3 = eig.eigenvectors.column(smallest).into_owned();
        if n.dot(&(p - centroid)) < 0.0 {
            n = -n;
        }
        normals.push(n);
    }
    PointNormalCloud::new(points.to_vec(), normals)
}
