use serde::Serialize;

use super::{bin_normal, SphereGrid};
use crate::geometry::{PointNormalCloud, Vec3};

/// Extended Gaussian image: counts of normals per sphere cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Egi {
    pub grid: SphereGrid,
    pub counts: Vec<u32>,
}

impl Egi {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn count(&self, j: usize, k: usize) -> u32 {
        self.counts[self.grid.index(j, k)]
    }

    /// Counts as a sphere function scaled by `1/N`.
    pub fn normalized(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    /// Counts scaled by `1/(N·w_j)` with `w_j` the quadrature weight of the
    /// cell's ring, so the harmonic analysis sees each normal as a unit point
    /// mass regardless of latitude.
    pub fn density(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        let w = self.grid.quadrature_weights();
        let side = self.grid.side();
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| c as f64 / (total * w[i / side]))
            .collect()
    }
}

/// Binary EGI plus, per occupied cell, the indices of the source points whose
/// normals fell there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Begi {
    pub grid: SphereGrid,
    pub bits: Vec<bool>,
    pub point_sets: Vec<Vec<usize>>,
}

impl Begi {
    pub fn is_set(&self, j: usize, k: usize) -> bool {
        self.bits[self.grid.index(j, k)]
    }

    pub fn point_indices(&self, j: usize, k: usize) -> &[usize] {
        &self.point_sets[self.grid.index(j, k)]
    }

    /// Source points of cell `(j, k)`, looked up in the cloud the BEGI was
    /// built from.
    pub fn cell_points<'a>(
        &'a self,
        j: usize,
        k: usize,
        cloud: &'a PointNormalCloud,
    ) -> impl Iterator<Item = &'a Vec3> + 'a {
        self.point_indices(j, k).iter().map(move |&i| &cloud.points()[i])
    }

    pub fn as_function(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

pub fn compute_egi(cloud: &PointNormalCloud, grid: &SphereGrid) -> Egi {
    let mut counts = vec![0u32; grid.cell_count()];
    for n in cloud.normals() {
        let (j, k) = bin_normal(n, grid);
        counts[grid.index(j, k)] += 1;
    }
    Egi { grid: *grid, counts }
}

pub fn compute_begi(cloud: &PointNormalCloud, grid: &SphereGrid) -> Begi {
    let mut point_sets = vec![Vec::new(); grid.cell_count()];
    for (i, n) in cloud.normals().iter().enumerate() {
        let (j, k) = bin_normal(n, grid);
        point_sets[grid.index(j, k)].push(i);
    }
    let bits = point_sets.iter().map(|s| !s.is_empty()).collect();
    Begi { grid: *grid, bits, point_sets }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RigidTransform;
    use rand::{RngExt, SeedableRng};

    fn random_cloud(n: usize, seed: u64) -> PointNormalCloud {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let p = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let n = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                (p, n + Vec3::repeat(1e-9))
            })
            .collect()
    }

    #[test]
    fn all_up_normals_fill_one_cell() {
        let g = SphereGrid::new(8).unwrap();
        let cloud: PointNormalCloud = (0..5).map(|i| (Vec3::new(i as f64, 0.0, 0.0), Vec3::z())).collect();
        let egi = compute_egi(&cloud, &g);
        assert_eq!(egi.count(0, 0), 5);
        assert_eq!(egi.total(), 5);
        let begi = compute_begi(&cloud, &g);
        assert_eq!(begi.bits.iter().filter(|&&b| b).count(), 1);
        assert_eq!(begi.point_indices(0, 0).len(), 5);
        assert_eq!(begi.cell_points(0, 0, &cloud).count(), 5);
    }

    #[test]
    fn translated_copy_doubles_counts() {
        let g = SphereGrid::new(8).unwrap();
        let cloud = random_cloud(500, 2);
        let mut doubled = cloud.clone();
        doubled.extend_from(&cloud.transformed(&RigidTransform::from_translation(Vec3::new(3.0, -1.0, 7.0))));
        let a = compute_egi(&cloud, &g);
        let b = compute_egi(&doubled, &g);
        for (x, y) in a.counts.iter().zip(&b.counts) {
            assert_eq!(2 * x, *y);
        }
    }

    #[test]
    fn egi_matches_per_normal_oracle_and_begi_thresholds_it() {
        use std::f64::consts::PI;
        let g = SphereGrid::new(16).unwrap();
        let cloud = random_cloud(3000, 9);
        let egi = compute_egi(&cloud, &g);
        // oracle: nearest cell center by angular distance in (θ, φ) separately
        let mut counts = vec![0u32; g.cell_count()];
        for n in cloud.normals() {
            let t = n.z.acos();
            let p = n.y.atan2(n.x).rem_euclid(2.0 * PI);
            let j = (0..32).min_by(|&a, &b| (g.theta(a) - t).abs().total_cmp(&(g.theta(b) - t).abs())).unwrap();
            let dphi = |k: usize| {
                let d = (g.phi(k) - p).rem_euclid(2.0 * PI);
                d.min(2.0 * PI - d)
            };
            let k = (0..32).min_by(|&a, &b| dphi(a).total_cmp(&dphi(b))).unwrap();
            counts[g.index(j, k)] += 1;
        }
        assert_eq!(egi.counts, counts);
        let begi = compute_begi(&cloud, &g);
        for (c, b) in egi.counts.iter().zip(&begi.bits) {
            assert_eq!(*c > 0, *b);
        }
        let total: usize = begi.point_sets.iter().map(Vec::len).sum();
        assert_eq!(total, cloud.len());
    }
}
