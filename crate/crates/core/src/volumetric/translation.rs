use nalgebra::Rotation3;
use rayon::prelude::*;

use super::fft::{rfft3, HalfSpectrum};
use super::phase::phase_correlate_half;
use crate::geometry::{padded_bounds, GridBounds, RigidTransform, Vec3, VoxelGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationEstimate {
    pub transform: RigidTransform,
    pub delta_max: f64,
    pub shift: [i64; 3],
}

/// Caches the scene spectrum so that many model rotations can be tested
/// against one scene.
#[derive(Debug, Clone)]
pub struct TranslationEstimator {
    bounds: GridBounds,
    scene: HalfSpectrum,
}

impl TranslationEstimator {
    /// Grid covering the scene grown by `model_radius` on every side, padded
    /// to power-of-two dims with a 25% margin.
    pub fn new(scene_points: &[Vec3], resolution: f64, model_radius: f64) -> Result<Self> {
        if scene_points.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in scene_points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let r = Vec3::repeat(model_radius.max(0.0));
        let bounds = padded_bounds(&(lo - r), &(hi + r), resolution, 0.25)?;
        let (grid, _) = VoxelGrid::from_points(bounds, scene_points.iter());
        Ok(Self::from_grid(&grid))
    }

    pub fn from_grid(scene: &VoxelGrid) -> Self {
        Self { bounds: *scene.bounds(), scene: rfft3(&scene.as_f64(), scene.dims()) }
    }

    pub fn bounds(&self) -> &GridBounds {
        &self.bounds
    }

    /// Rotates the model about its centroid, centres it in the grid and
    /// phase-correlates it against the scene.
    pub fn estimate(&self, model_points: &[Vec3], rotation: &Rotation3<f64>) -> Result<TranslationEstimate> {
        if model_points.is_empty() {
            return Err(Error::EmptyInput);
        }
        let centroid = model_points.iter().sum::<Vec3>() / model_points.len() as f64;
        let res = self.bounds.resolution;
        // offset snapped to the voxel lattice so that, for a lattice-aligned
        // true pose, model and scene voxelize identically
        let mid = self.bounds.cell_center(self.bounds.dims.map(|n| n / 2)) - Vec3::repeat(0.5 * res);
        let offset = ((mid - rotation * centroid) / res).map(f64::round) * res;
        let center = offset + rotation * centroid;
        let mut model = vec![0.0; self.bounds.len()];
        for p in model_points {
            if let Some(idx) = self.bounds.index_of(&(rotation * (p - centroid) + center)) {
                model[self.bounds.linear(idx)] = 1.0;
            }
        }
        let delta = phase_correlate_half(&rfft3(&model, self.bounds.dims), &self.scene);
        let s = Vec3::new(delta.shift[0] as f64, delta.shift[1] as f64, delta.shift[2] as f64);
        let translation = center + s * res - rotation * centroid;
        Ok(TranslationEstimate {
            transform: RigidTransform::new(*rotation, translation),
            delta_max: delta.delta_max,
            shift: delta.shift,
        })
    }

    pub fn estimate_many(
        &self,
        model_points: &[Vec3],
        rotations: &[Rotation3<f64>],
    ) -> Result<Vec<TranslationEstimate>> {
        rotations.par_iter().map(|r| self.estimate(model_points, r)).collect()
    }
}

/// Single-rotation convenience over an already voxelized scene.
pub fn estimate_translation(
    scene: &VoxelGrid,
    model_points: &[Vec3],
    rotation: &Rotation3<f64>,
) -> Result<TranslationEstimate> {
    TranslationEstimator::from_grid(scene).estimate(model_points, rotation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};

    /// Asymmetric cluster: a long bar along x with a stub along +y at one end.
    fn l_points() -> Vec<Vec3> {
        let mut pts = Vec::new();
        for i in 0..40 {
            for j in 0..4 {
                pts.push(Vec3::new(i as f64 * 0.0025, j as f64 * 0.0025, 0.0) + Vec3::repeat(0.0011));
            }
        }
        for i in 0..4 {
            for j in 4..20 {
                pts.push(Vec3::new(i as f64 * 0.0025, j as f64 * 0.0025, 0.0) + Vec3::repeat(0.0011));
            }
        }
        for p in pts.clone() {
            pts.push(p + Vec3::new(0.0, 0.0, 0.01));
        }
        pts
    }

    #[test]
    fn recovers_voxel_aligned_offset() {
        let res = 0.005;
        let model = l_points();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let d = Vec3::new(rng.random_range(-20..20) as f64, rng.random_range(-20..20) as f64, rng.random_range(-5..5) as f64) * res;
            let mut scene: Vec<Vec3> = model.iter().map(|p| p + d).collect();
            // unrelated clutter far from the object
            for i in 0..50 {
                scene.push(Vec3::new(0.3, -0.2 + i as f64 * 0.004, 0.0));
            }
            let est = TranslationEstimator::new(&scene, res, 0.12).unwrap();
            let t = est.estimate(&model, &Rotation3::identity()).unwrap();
            assert!((t.transform.translation - d).amax() <= res / 2.0 + 1e-9, "{:?} vs {d:?}", t.transform.translation);
        }
    }

    #[test]
    fn true_rotation_beats_wrong_rotation() {
        let res = 0.005;
        let model = l_points();
        let r_true = Rotation3::from_euler_angles(0.0, 0.0, 0.6);
        let pose = RigidTransform::new(r_true, Vec3::new(0.05, -0.02, 0.01));
        let scene: Vec<Vec3> = model.iter().map(|p| pose.apply_point(p)).collect();
        let est = TranslationEstimator::new(&scene, res, 0.12).unwrap();
        let good = est.estimate(&model, &r_true).unwrap();
        let wrong = est.estimate(&model, &(r_true * Rotation3::from_euler_angles(0.0, 0.0, std::f64::consts::FRAC_PI_2))).unwrap();
        assert!(good.delta_max > wrong.delta_max);
        assert!((good.transform.translation - pose.translation).norm() < 1.5 * res);
    }

    #[test]
    fn scene_equal_to_model() {
        let res = 0.005;
        let model = l_points();
        let est = TranslationEstimator::new(&model, res, 0.12).unwrap();
        let id = est.estimate(&model, &Rotation3::identity()).unwrap();
        assert!(id.transform.translation.amax() <= res / 2.0 + 1e-9);
        for a in [0.3, 1.0, 2.0, 3.0] {
            let other = est.estimate(&model, &Rotation3::from_euler_angles(0.2, 0.0, a)).unwrap();
            assert!(id.delta_max > other.delta_max);
        }
        let batch = est.estimate_many(&model, &[Rotation3::identity()]).unwrap();
        assert_eq!(batch[0], id);
    }
}
