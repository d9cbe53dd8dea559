use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::{Error, Result};

/// Equiangular sphere sampling with `θ_j = π(2j+1)/(4B)` and `φ_k = πk/B`,
/// `0 ≤ j, k < 2B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SphereGrid {
    bandwidth: usize,
}

impl SphereGrid {
    /// `bandwidth` must be a power of two, at least 2.
    pub fn new(bandwidth: usize) -> Result<Self> {
        if bandwidth < 2 || !bandwidth.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be a power of two >= 2, got {bandwidth}"
            )));
        }
        Ok(Self { bandwidth })
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Samples per axis, `2B`.
    pub fn side(&self) -> usize {
        2 * self.bandwidth
    }

    pub fn cell_count(&self) -> usize {
        self.side() * self.side()
    }

    pub fn theta(&self, j: usize) -> f64 {
        PI * (2 * j + 1) as f64 / (4 * self.bandwidth) as f64
    }

    pub fn phi(&self, k: usize) -> f64 {
        PI * k as f64 / self.bandwidth as f64
    }

    pub fn index(&self, j: usize, k: usize) -> usize {
        j * self.side() + k
    }

    pub fn cell(&self, index: usize) -> (usize, usize) {
        (index / self.side(), index % self.side())
    }

    /// Unit direction at the cell center.
    pub fn direction(&self, j: usize, k: usize) -> Vec3 {
        let (t, p) = (self.theta(j), self.phi(k));
        Vec3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos())
    }

    /// Quadrature weights per latitude ring, including the `π/B` longitude
    /// spacing, so that `Σ_j w_j Σ_k f(θ_j, φ_k)` integrates band-limited `f`
    /// of degree `< B` exactly over the sphere.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let b = self.bandwidth;
        let bf = b as f64;
        (0..2 * b)
            .map(|j| {
                let t = self.theta(j);
                let sum: f64 = (0..b)
                    .map(|l| ((2 * j + 1) as f64 * (2 * l + 1) as f64 * PI / (4.0 * bf)).sin() / (2 * l + 1) as f64)
                    .sum();
                (2.0 / bf) * t.sin() * sum * (PI / bf)
            })
            .collect()
    }
}

/// Nearest grid cell of a unit vector. Ties round toward the lower index;
/// exact poles map to `k = 0`.
pub fn bin_normal(n: &Vec3, grid: &SphereGrid) -> (usize, usize) {
    let b = grid.bandwidth() as f64;
    let side = grid.side();
    let theta = n.z.clamp(-1.0, 1.0).acos();
    let mut phi = if n.x == 0.0 && n.y == 0.0 { 0.0 } else { n.y.atan2(n.x) };
    if phi < 0.0 {
        phi += 2.0 * PI;
    }
    let jf = (4.0 * b * theta / PI - 1.0) / 2.0;
    let j = ((jf - 0.5).ceil().max(0.0) as usize).min(side - 1);
    let kf = b * phi / PI;
    let k = ((kf - 0.5).ceil().max(0.0) as usize) % side;
    (j, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn rejects_bad_bandwidth() {
        assert!(SphereGrid::new(0).is_err());
        assert!(SphereGrid::new(6).is_err());
        assert!(SphereGrid::new(8).is_ok());
    }

    #[test]
    fn pole_and_equator_bins() {
        let g = SphereGrid::new(4).unwrap();
        assert_eq!(bin_normal(&Vec3::z(), &g), (0, 0));
        assert_eq!(bin_normal(&-Vec3::z(), &g), (7, 0));
        // θ_3 and θ_4 are equidistant from π/2; the tie goes to the lower index
        let (j, k) = bin_normal(&Vec3::x(), &g);
        let d3 = (g.theta(3) - PI / 2.0).abs();
        let d4 = (g.theta(4) - PI / 2.0).abs();
        assert!((d3 - d4).abs() < 1e-12);
        assert_eq!((j, k), (3, 0));
        assert_eq!(bin_normal(&Vec3::y(), &g).1, 2);
    }

    #[test]
    fn binning_picks_nearest_center() {
        let g = SphereGrid::new(8).unwrap();
        for i in 0..500 {
            let t = 0.01 + 3.12 * (i as f64 * 0.618).fract();
            let p = 2.0 * PI * (i as f64 * 0.414).fract();
            let (j, k) = bin_normal(&Vec3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos()), &g);
            let best_j = (0..16).min_by(|&a, &b| (g.theta(a) - t).abs().total_cmp(&(g.theta(b) - t).abs())).unwrap();
            assert!((g.theta(j) - t).abs() <= (g.theta(best_j) - t).abs() + 1e-12);
            let dphi = |k: usize| {
                let d = (g.phi(k) - p).rem_euclid(2.0 * PI);
                d.min(2.0 * PI - d)
            };
            let best_k = (0..16).min_by(|&a, &b| dphi(a).total_cmp(&dphi(b))).unwrap();
            assert!(dphi(k) <= dphi(best_k) + 1e-12);
        }
    }

    /// Weights from a linear solve: exact integration of Legendre polynomials
    /// `P_n(cos θ)` for `n < 2B`.
    #[test]
    fn quadrature_matches_linear_solve_oracle() {
        for b in [2usize, 4, 8, 16] {
            let g = SphereGrid::new(b).unwrap();
            let n = 2 * b;
            let mut a = DMatrix::zeros(n, n);
            for j in 0..n {
                let x = g.theta(j).cos();
                let (mut p0, mut p1) = (1.0, x);
                for deg in 0..n {
                    let val = if deg == 0 { 1.0 } else if deg == 1 { x } else {
                        let p2 = ((2 * deg - 1) as f64 * x * p1 - (deg - 1) as f64 * p0) / deg as f64;
                        p0 = p1;
                        p1 = p2;
                        p2
                    };
                    a[(deg, j)] = val;
                }
            }
            let mut rhs = DVector::zeros(n);
            rhs[0] = 2.0;
            let w = a.lu().solve(&rhs).unwrap();
            let ours = g.quadrature_weights();
            for j in 0..n {
                let expected = w[j] * PI / b as f64;
                assert!((ours[j] - expected).abs() < 1e-12, "B={b} j={j}: {} vs {expected}", ours[j]);
            }
        }
    }
}
