use serde::{Deserialize, Serialize};

use super::{RigidTransform, Vec3};
use crate::{Error, Result};

/// Points paired with unit surface normals.
///
/// An empty cloud is representable (a scene with every object removed), but
/// every operation that needs geometry rejects it with [`Error::EmptyInput`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointNormalCloud {
    points: Vec<Vec3>,
    normals: Vec<Vec3>,
}

impl PointNormalCloud {
    /// Builds a cloud, normalizing every normal. Zero or non-finite normals and
    /// non-finite points are rejected.
    pub fn new(points: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        if points.len() != normals.len() {
            return Err(Error::InvalidParameter(format!(
                "{} points but {} normals",
                points.len(),
                normals.len()
            )));
        }
        let mut normals = normals;
        for (i, (p, n)) in points.iter().zip(normals.iter_mut()).enumerate() {
            let norm = n.norm();
            if !p.iter().all(|v| v.is_finite()) || !norm.is_finite() || norm < 1e-12 {
                return Err(Error::InvalidParameter(format!("bad point/normal at index {i}")));
            }
            *n /= norm;
        }
        Ok(Self { points, normals })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec3, &Vec3)> {
        self.points.iter().zip(self.normals.iter())
    }

    pub fn ensure_non_empty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyInput)
        } else {
            Ok(())
        }
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
        Some(sum / self.points.len() as f64)
    }

    /// Axis-aligned bounds as (min, max).
    pub fn aabb(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
    }

    /// Points mapped by `R·p + T`, normals by `R·n`.
    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            points: self.points.iter().map(|p| t.apply_point(p)).collect(),
            normals: self.normals.iter().map(|n| t.apply_vector(n)).collect(),
        }
    }

    /// Cloud shifted so that its centroid sits at the origin.
    pub fn centered(&self) -> Self {
        match self.centroid() {
            Some(c) => Self {
                points: self.points.iter().map(|p| p - c).collect(),
                normals: self.normals.clone(),
            },
            None => self.clone(),
        }
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: indices.iter().map(|&i| self.normals[i]).collect(),
        }
    }

    pub fn push(&mut self, point: Vec3, normal: Vec3) {
        let n = normal.normalize();
        debug_assert!(n.iter().all(|v| v.is_finite()));
        self.points.push(point);
        self.normals.push(n);
    }

    pub fn extend_from(&mut self, other: &PointNormalCloud) {
        self.points.extend_from_slice(&other.points);
        self.normals.extend_from_slice(&other.normals);
    }

    pub fn into_parts(self) -> (Vec<Vec3>, Vec<Vec3>) {
        (self.points, self.normals)
    }
}

impl FromIterator<(Vec3, Vec3)> for PointNormalCloud {
    fn from_iter<I: IntoIterator<Item = (Vec3, Vec3)>>(iter: I) -> Self {
        let mut cloud = Self::empty();
        for (p, n) in iter {
            cloud.push(p, n);
        }
        cloud
    }
}

/// Free-function form of [`PointNormalCloud::transformed`].
pub fn transform_cloud(cloud: &PointNormalCloud, t: &RigidTransform) -> PointNormalCloud {
    cloud.transformed(t)
}
