use nalgebra::Rotation3;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use super::sht::coeff_index;
use super::{SphericalCoeffs, WignerTable};
use crate::geometry::{rotation_distance, RigidTransform};
use crate::{Error, Result};

/// Correlation values on the `(2B)³` Euler grid `α_i = πi/B`,
/// `β_j = π(2j+1)/(4B)`, `γ_k = πk/B`, stored at `(i·2B + j)·2B + k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct So3CorrelationMap {
    pub bandwidth: usize,
    pub values: Vec<f64>,
}

impl So3CorrelationMap {
    pub fn side(&self) -> usize {
        2 * self.bandwidth
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let s = self.side();
        (i * s + j) * s + k
    }

    pub fn cell(&self, index: usize) -> [usize; 3] {
        let s = self.side();
        [index / (s * s), (index / s) % s, index % s]
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    pub fn euler(&self, cell: [usize; 3]) -> (f64, f64, f64) {
        let b = self.bandwidth as f64;
        let pi = std::f64::consts::PI;
        (pi * cell[0] as f64 / b, pi * (2 * cell[1] + 1) as f64 / (4.0 * b), pi * cell[2] as f64 / b)
    }

    pub fn rotation(&self, cell: [usize; 3]) -> Rotation3<f64> {
        let (a, b, g) = self.euler(cell);
        RigidTransform::rotation_zyz(a, b, g)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// First cell holding the maximum value.
    pub fn argmax(&self) -> [usize; 3] {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        self.cell(best)
    }

    /// Grid cell whose rotation is geodesically closest to `r`.
    pub fn nearest_cell(&self, r: &Rotation3<f64>) -> [usize; 3] {
        let best = (0..self.values.len())
            .map(|idx| (idx, rotation_distance(&self.rotation(self.cell(idx)), r)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(idx, _)| idx)
            .unwrap_or(0);
        self.cell(best)
    }

    /// Per-axis index distance, wrapped in α and γ.
    pub fn cell_offset(&self, a: [usize; 3], b: [usize; 3]) -> [usize; 3] {
        let s = self.side();
        let wrap = |x: usize, y: usize| {
            let d = x.abs_diff(y);
            d.min(s - d)
        };
        [wrap(a[0], b[0]), a[1].abs_diff(b[1]), wrap(a[2], b[2])]
    }

    /// True when `cell` is in the 3×3×3 neighbourhood of the cell nearest to
    /// `r`, or within `π/B` of `r` (near β = 0 or π distinct Euler cells
    /// describe almost the same rotation).
    pub fn within_one_cell(&self, cell: [usize; 3], r: &Rotation3<f64>) -> bool {
        let off = self.cell_offset(cell, self.nearest_cell(r));
        off.iter().all(|&d| d <= 1)
            || rotation_distance(&self.rotation(cell), r) <= std::f64::consts::PI / self.bandwidth as f64
    }

    /// Absolute threshold equal to `fraction` of the map maximum.
    pub fn fraction_of_max(&self, fraction: f64) -> f64 {
        fraction * self.max()
    }

    fn is_local_max(&self, idx: usize) -> bool {
        let s = self.side() as i64;
        let [i, j, k] = self.cell(idx).map(|x| x as i64);
        let v = self.values[idx];
        for di in -1..=1i64 {
            for dj in -1..=1i64 {
                for dk in -1..=1i64 {
                    if di == 0 && dj == 0 && dk == 0 {
                        continue;
                    }
                    let jj = j + dj;
                    if jj < 0 || jj >= s {
                        continue;
                    }
                    let n = self.index((i + di).rem_euclid(s) as usize, jj as usize, (k + dk).rem_euclid(s) as usize);
                    let w = self.values[n];
                    if w > v || (w == v && n < idx) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Precomputed Wigner tables for repeated correlations at one bandwidth.
#[derive(Debug, Clone)]
pub struct So3Correlator {
    bandwidth: usize,
    table: WignerTable,
}

impl So3Correlator {
    pub fn new(bandwidth: usize, l_max: usize) -> Result<Self> {
        if bandwidth < 2 || !bandwidth.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("bandwidth {bandwidth} is not a power of two ≥ 2")));
        }
        if l_max >= bandwidth {
            return Err(Error::Undersampled { l_max, bandwidth });
        }
        let betas = (0..2 * bandwidth)
            .map(|j| std::f64::consts::PI * (2 * j + 1) as f64 / (4 * bandwidth) as f64)
            .collect();
        Ok(Self { bandwidth, table: WignerTable::new(l_max, betas) })
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn l_max(&self) -> usize {
        self.table.l_max()
    }

    /// `C(R) = ⟨f, Λ(R) g⟩`, largest at the rotation that carries `g` onto `f`.
    pub fn correlate(&self, f: &SphericalCoeffs, g: &SphericalCoeffs) -> Result<So3CorrelationMap> {
        if f.l_max != g.l_max {
            return Err(Error::Mismatch(format!("l_max {} vs {}", f.l_max, g.l_max)));
        }
        let l_max = f.l_max;
        if l_max > self.table.l_max() {
            return Err(Error::Undersampled { l_max, bandwidth: self.bandwidth });
        }
        let s = 2 * self.bandwidth;
        let li = l_max as i64;
        let ifft = FftPlanner::<f64>::new().plan_fft_inverse(s);
        let planes: Vec<Vec<Complex64>> = (0..s)
            .into_par_iter()
            .map(|j| {
                let mut plane = vec![Complex64::new(0.0, 0.0); s * s];
                for m in -li..=li {
                    let row = m.rem_euclid(s as i64) as usize * s;
                    for mp in -li..=li {
                        let l0 = m.abs().max(mp.abs()) as usize;
                        let col = self.table.column(j, m, mp);
                        let mut acc = Complex64::new(0.0, 0.0);
                        for l in l0..=l_max {
                            acc += f.coeffs[coeff_index(l, m)] * g.coeffs[coeff_index(l, mp)].conj() * col[l - l0];
                        }
                        plane[row + mp.rem_euclid(s as i64) as usize] = acc;
                    }
                }
                // rows index m → α, columns index m' → γ
                for r in plane.chunks_mut(s) {
                    ifft.process(r);
                }
                let mut column = vec![Complex64::new(0.0, 0.0); s];
                for c in 0..s {
                    for r in 0..s {
                        column[r] = plane[r * s + c];
                    }
                    ifft.process(&mut column);
                    for r in 0..s {
                        plane[r * s + c] = column[r];
                    }
                }
                plane
            })
            .collect();

        let mut values = vec![0.0; s * s * s];
        let mut max_abs: f64 = 0.0;
        let mut max_imag: f64 = 0.0;
        for (j, plane) in planes.iter().enumerate() {
            for i in 0..s {
                for k in 0..s {
                    let v = plane[i * s + k];
                    max_abs = max_abs.max(v.norm());
                    max_imag = max_imag.max(v.im.abs());
                    values[(i * s + j) * s + k] = v.re;
                }
            }
        }
        if max_imag > 1e-6 * max_abs.max(f64::MIN_POSITIVE) {
            log::debug!("SO(3) correlation imaginary residue {max_imag:e} (max {max_abs:e})");
        }
        Ok(So3CorrelationMap { bandwidth: self.bandwidth, values })
    }
}

/// One-shot correlation; builds the Wigner tables for `f.l_max`.
pub fn so3_correlate(f: &SphericalCoeffs, g: &SphericalCoeffs, bandwidth: usize) -> Result<So3CorrelationMap> {
    So3Correlator::new(bandwidth, f.l_max)?.correlate(f, g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotationCandidate {
    pub cell: [usize; 3],
    pub euler: (f64, f64, f64),
    pub rotation: Rotation3<f64>,
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotationCandidateSet {
    pub threshold: f64,
    pub candidates: Vec<RotationCandidate>,
}

impl RotationCandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Deduplication of neighbouring grid cells before thresholding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationSampling {
    pub non_max_suppression: bool,
    pub max_candidates: Option<usize>,
}

impl Default for RotationSampling {
    fn default() -> Self {
        Self { non_max_suppression: true, max_candidates: Some(30) }
    }
}

impl RotationSampling {
    pub fn exhaustive() -> Self {
        Self { non_max_suppression: false, max_candidates: None }
    }
}

/// Grid rotations whose correlation exceeds `threshold`, sorted descending
/// (ties by grid index).
pub fn sample_rotations(map: &So3CorrelationMap, threshold: f64, sampling: RotationSampling) -> RotationCandidateSet {
    let mut picked: Vec<usize> = (0..map.values.len())
        .filter(|&idx| map.values[idx] > threshold || threshold == f64::NEG_INFINITY)
        .filter(|&idx| !sampling.non_max_suppression || map.is_local_max(idx))
        .collect();
    picked.sort_by(|&a, &b| map.values[b].total_cmp(&map.values[a]).then(a.cmp(&b)));
    if let Some(cap) = sampling.max_candidates {
        picked.truncate(cap);
    }
    let candidates = picked
        .into_iter()
        .map(|idx| {
            let cell = map.cell(idx);
            RotationCandidate { cell, euler: map.euler(cell), rotation: map.rotation(cell), correlation: map.values[idx] }
        })
        .collect();
    RotationCandidateSet { threshold, candidates }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PointNormalCloud, Vec3};
    use crate::spherical::{compute_egi, sht_forward, sht_forward_real, sht_inverse, wigner_d_direct, SphereGrid};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_real_coeffs(l_max: usize, rng: &mut ChaCha8Rng) -> SphericalCoeffs {
        let mut c = SphericalCoeffs::zeros(l_max);
        for l in 0..=l_max {
            c.set(l, 0, Complex64::new(rng.random_range(-1.0..1.0), 0.0));
            for m in 1..=(l as i64) {
                let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                c.set(l, m, v);
                c.set(l, -m, v.conj() * if m % 2 == 0 { 1.0 } else { -1.0 });
            }
        }
        c
    }

    fn to_spherical(v: &Vec3) -> (f64, f64) {
        let v = v.normalize();
        (v.z.clamp(-1.0, 1.0).acos(), v.y.atan2(v.x))
    }

    /// Samples of `x ↦ g(R⁻¹x)` on the grid.
    fn rotated_samples(g: &SphericalCoeffs, r: &Rotation3<f64>, grid: &SphereGrid) -> Vec<Complex64> {
        let s = grid.side();
        let mut out = Vec::with_capacity(grid.cell_count());
        for j in 0..s {
            for k in 0..s {
                let (t, p) = to_spherical(&(r.inverse() * grid.direction(j, k)));
                out.push(g.evaluate(t, p));
            }
        }
        out
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation3<f64> {
        let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ));
        q.to_rotation_matrix()
    }

    #[test]
    fn rotated_coefficients_follow_wigner_d() {
        // (Λ(R)g)^_m = Σ_m' e^{-imα} d_mm'(β) e^{-im'γ} ĝ_m'
        let grid = SphereGrid::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = random_real_coeffs(5, &mut rng);
        let (a, b, c) = (0.4, 1.1, -0.7);
        let r = RigidTransform::rotation_zyz(a, b, c);
        let rotated = sht_forward(&rotated_samples(&g, &r, &grid), &grid, 5).unwrap();
        for l in 0..=5i64 {
            for m in -l..=l {
                let mut want = Complex64::new(0.0, 0.0);
                for mp in -l..=l {
                    let phase = Complex64::from_polar(1.0, -(m as f64) * a - (mp as f64) * c);
                    want += phase * wigner_d_direct(l, m, mp, b) * g.get(l as usize, mp);
                }
                assert!((rotated.get(l as usize, m) - want).norm() < 1e-9, "l={l} m={m}");
            }
        }
    }

    #[test]
    fn matches_brute_force_integral() {
        let grid = SphereGrid::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_real_coeffs(6, &mut rng);
        let g = random_real_coeffs(6, &mut rng);
        let map = so3_correlate(&f, &g, 8).unwrap();
        let f_samples = sht_inverse(&f, &grid);
        let w = grid.quadrature_weights();
        for _ in 0..10 {
            let idx = rng.random_range(0..map.values.len());
            let r = map.rotation(map.cell(idx));
            let gr = rotated_samples(&g, &r, &grid);
            // f·conj(Λg) has degree ≤ 12 < 2B, so the grid quadrature is exact
            let integral: Complex64 = (0..grid.cell_count()).map(|n| f_samples[n] * gr[n].conj() * w[n / grid.side()]).sum();
            assert!(integral.im.abs() < 1e-9);
            assert!((integral.re - map.values[idx]).abs() < 1e-8, "{} vs {}", integral.re, map.values[idx]);
        }
    }

    #[test]
    fn autocorrelation_peaks_at_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_real_coeffs(7, &mut rng);
        let map = so3_correlate(&f, &f, 8).unwrap();
        let peak = map.argmax();
        assert!(map.within_one_cell(peak, &Rotation3::identity()), "{peak:?}");
        let set = sample_rotations(&map, map.fraction_of_max(0.9), RotationSampling::default());
        assert!(set.candidates.iter().any(|c| map.within_one_cell(c.cell, &Rotation3::identity())));
    }

    #[test]
    fn constant_function_gives_constant_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut f = SphericalCoeffs::zeros(5);
        f.set(0, 0, Complex64::new(2.0, 0.0));
        let g = random_real_coeffs(5, &mut rng);
        let map = so3_correlate(&f, &g, 8).unwrap();
        let want = 2.0 * g.get(0, 0).re;
        assert!(map.values.iter().all(|v| (v - want).abs() < 1e-10));
    }

    #[test]
    fn rejects_mismatched_degree() {
        let f = SphericalCoeffs::zeros(3);
        let g = SphericalCoeffs::zeros(4);
        assert!(matches!(so3_correlate(&f, &g, 8), Err(Error::Mismatch(_))));
        assert!(matches!(so3_correlate(&g, &g, 4), Err(Error::Undersampled { .. })));
    }

    #[test]
    fn peak_recovers_smooth_rotation() {
        let grid = SphereGrid::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = random_real_coeffs(7, &mut rng);
        for _ in 0..5 {
            let r = random_rotation(&mut rng);
            let f = sht_forward(&rotated_samples(&g, &r, &grid), &grid, 7).unwrap();
            let map = so3_correlate(&f, &g, 8).unwrap();
            assert!(map.within_one_cell(map.argmax(), &r));
        }
    }

    /// Oriented L-shape: a long +x arm, a short +y arm and a thin plate, so the
    /// normal distribution has no rotational symmetry.
    fn l_shape_normals() -> PointNormalCloud {
        let mut pts = Vec::new();
        let mut add = |n: Vec3, count: usize| {
            for i in 0..count {
                pts.push((Vec3::new(i as f64, 0.0, 0.0), n));
            }
        };
        add(Vec3::x(), 90);
        add(-Vec3::x(), 40);
        add(Vec3::y(), 25);
        add(-Vec3::y(), 60);
        add(Vec3::z(), 120);
        add(-Vec3::z(), 10);
        add(Vec3::new(1.0, 1.0, 1.0).normalize(), 30);
        pts.into_iter().collect()
    }

    #[test]
    fn egi_correlation_tracks_cloud_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let model = l_shape_normals();
        for b in [8usize, 16] {
            let grid = SphereGrid::new(b).unwrap();
            let corr = So3Correlator::new(b, b - 1).unwrap();
            let g = sht_forward_real(&compute_egi(&model, &grid).density(), &grid, b - 1).unwrap();
            let mut hits = 0;
            for _ in 0..8 {
                let r = random_rotation(&mut rng);
                let scene = model.transformed(&RigidTransform::from_rotation(r));
                let f = sht_forward_real(&compute_egi(&scene, &grid).density(), &grid, b - 1).unwrap();
                let map = corr.correlate(&f, &g).unwrap();
                hits += map.within_one_cell(map.argmax(), &r) as usize;
            }
            assert!(hits >= 7, "B={b}: {hits}/8");
        }
    }

    #[test]
    fn sampling_thresholds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_real_coeffs(3, &mut rng);
        let map = so3_correlate(&f, &f, 4).unwrap();
        assert!(sample_rotations(&map, map.max() + 1.0, RotationSampling::default()).is_empty());
        let all = sample_rotations(&map, f64::NEG_INFINITY, RotationSampling::exhaustive());
        assert_eq!(all.len(), 512);
        assert!(all.candidates.windows(2).all(|w| w[0].correlation >= w[1].correlation));
        let nms = sample_rotations(&map, f64::NEG_INFINITY, RotationSampling::default());
        assert!(nms.len() <= 30 && !nms.is_empty());
    }

    #[test]
    fn sampling_is_monotone_in_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let f = random_real_coeffs(5, &mut rng);
            let g = random_real_coeffs(5, &mut rng);
            let map = so3_correlate(&f, &g, 8).unwrap();
            let (lo, hi) = (map.fraction_of_max(rng.random_range(-1.0..0.5)), map.fraction_of_max(rng.random_range(0.5..1.0)));
            for sampling in [RotationSampling::default(), RotationSampling::exhaustive()] {
                let a = sample_rotations(&map, lo, sampling);
                let b = sample_rotations(&map, hi, sampling);
                assert!(b.candidates.iter().all(|c| c.correlation > hi));
                assert!(b.candidates.iter().all(|c| a.candidates.iter().any(|d| d.cell == c.cell)));
            }
        }
    }
}
