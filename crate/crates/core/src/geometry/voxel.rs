use serde::{Deserialize, Serialize};

use super::{PointNormalCloud, Vec3};
use crate::{Error, Result};

/// Origin and cell counts of a regular grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub resolution: f64,
    pub origin: Vec3,
    pub dims: [usize; 3],
}

impl GridBounds {
    pub fn new(resolution: f64, origin: Vec3, dims: [usize; 3]) -> Result<Self> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::InvalidParameter(format!("resolution must be positive, got {resolution}")));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidParameter(format!("dims must be positive, got {dims:?}")));
        }
        Ok(Self { resolution, origin, dims })
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Integer-division cell index relative to the origin, or `None` if the
    /// point falls outside the grid.
    pub fn index_of(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.resolution).floor();
            if !(f >= 0.0 && f < self.dims[a] as f64) {
                return None;
            }
            idx[a] = f as usize;
        }
        Some(idx)
    }

    pub fn linear(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2]
    }

    pub fn unlinear(&self, lin: usize) -> [usize; 3] {
        let k = lin % self.dims[2];
        let rest = lin / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], k]
    }

    pub fn cell_center(&self, idx: [usize; 3]) -> Vec3 {
        self.origin
            + Vec3::new(idx[0] as f64 + 0.5, idx[1] as f64 + 0.5, idx[2] as f64 + 0.5) * self.resolution
    }

    /// Center of the grid, aligned to a cell corner.
    pub fn center(&self) -> Vec3 {
        self.origin
            + Vec3::new(
                (self.dims[0] / 2) as f64,
                (self.dims[1] / 2) as f64,
                (self.dims[2] / 2) as f64,
            ) * self.resolution
    }

    pub fn max_corner(&self) -> Vec3 {
        self.origin
            + Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.resolution
    }
}

/// Binary occupancy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    bounds: GridBounds,
    values: Vec<bool>,
}

/// Result of [`voxelize`]: the grid plus how many points fell outside it.
#[derive(Debug, Clone)]
pub struct Voxelization {
    pub grid: VoxelGrid,
    pub dropped: usize,
}

impl VoxelGrid {
    pub fn empty(bounds: GridBounds) -> Self {
        Self { values: vec![false; bounds.len()], bounds }
    }

    pub fn from_points<'a, I>(bounds: GridBounds, points: I) -> (Self, usize)
    where
        I: IntoIterator<Item = &'a Vec3>,
    {
        let mut grid = Self::empty(bounds);
        let mut dropped = 0;
        for p in points {
            if !grid.insert(p) {
                dropped += 1;
            }
        }
        (grid, dropped)
    }

    /// Marks the cell containing `p`; returns false if `p` is out of bounds.
    pub fn insert(&mut self, p: &Vec3) -> bool {
        match self.bounds.index_of(p) {
            Some(idx) => {
                let lin = self.bounds.linear(idx);
                self.values[lin] = true;
                true
            }
            None => false,
        }
    }

    pub fn set(&mut self, idx: [usize; 3], value: bool) {
        let lin = self.bounds.linear(idx);
        self.values[lin] = value;
    }

    pub fn bounds(&self) -> &GridBounds {
        &self.bounds
    }

    pub fn resolution(&self) -> f64 {
        self.bounds.resolution
    }

    pub fn origin(&self) -> Vec3 {
        self.bounds.origin
    }

    pub fn dims(&self) -> [usize; 3] {
        self.bounds.dims
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn get(&self, idx: [usize; 3]) -> bool {
        self.values[self.bounds.linear(idx)]
    }

    /// Occupancy at a signed index; out-of-range reads as empty.
    pub fn get_signed(&self, idx: [i64; 3]) -> bool {
        let d = self.bounds.dims;
        if (0..3).any(|a| idx[a] < 0 || idx[a] >= d[a] as i64) {
            return false;
        }
        self.get([idx[0] as usize, idx[1] as usize, idx[2] as usize])
    }

    pub fn is_occupied_at(&self, p: &Vec3) -> bool {
        self.bounds.index_of(p).is_some_and(|idx| self.get(idx))
    }

    pub fn occupied_count(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }

    pub fn occupied_indices(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(lin, _)| self.bounds.unlinear(lin))
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect()
    }
}

/// Binary voxelization of a cloud: a cell is set iff at least one point falls
/// in it under integer division relative to `origin`.
pub fn voxelize(
    cloud: &PointNormalCloud,
    resolution: f64,
    origin: Vec3,
    dims: [usize; 3],
) -> Result<Voxelization> {
    cloud.ensure_non_empty()?;
    let bounds = GridBounds::new(resolution, origin, dims)?;
    let (grid, dropped) = VoxelGrid::from_points(bounds, cloud.points());
    Ok(Voxelization { grid, dropped })
}

/// Smallest `n' ≥ n` whose only prime factors are 2, 3 and 5.
pub fn smooth_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Grid covering `[lo, hi]` with at least `margin` (fraction of the extent,
/// per axis) of empty space, the box centered in the grid. Dims are 5-smooth
/// (even, factors 2, 3, 5 only) so every axis has a fast FFT.
pub fn padded_bounds(lo: &Vec3, hi: &Vec3, resolution: f64, margin: f64) -> Result<GridBounds> {
    if !(resolution > 0.0) || !(margin >= 0.0) {
        return Err(Error::InvalidParameter("resolution and margin must be positive".into()));
    }
    let mut dims = [0usize; 3];
    let mut origin = Vec3::zeros();
    for a in 0..3 {
        let extent_cells = ((hi[a] - lo[a]) / resolution).ceil().max(1.0) + 1.0;
        let needed = (extent_cells * (1.0 + margin)).ceil() as usize;
        let n = smooth_len(needed.div_ceil(2)) * 2;
        dims[a] = n;
        let mid = 0.5 * (lo[a] + hi[a]);
        origin[a] = ((mid / resolution).floor() - (n / 2) as f64) * resolution;
    }
    GridBounds::new(resolution, origin, dims)
}
