use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use super::legendre::{legendre_index, normalized_legendre};
use super::SphereGrid;
use crate::{Error, Result};

/// Spherical-harmonic coefficients `f̂_l^m`, `0 ≤ l ≤ l_max`, `-l ≤ m ≤ l`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphericalCoeffs {
    pub l_max: usize,
    pub coeffs: Vec<Complex64>,
}

impl SphericalCoeffs {
    pub fn zeros(l_max: usize) -> Self {
        Self { l_max, coeffs: vec![Complex64::new(0.0, 0.0); (l_max + 1) * (l_max + 1)] }
    }

    pub fn get(&self, l: usize, m: i64) -> Complex64 {
        self.coeffs[coeff_index(l, m)]
    }

    pub fn set(&mut self, l: usize, m: i64, v: Complex64) {
        self.coeffs[coeff_index(l, m)] = v;
    }

    /// `Σ |f̂_l^m|²`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Synthesizes the expansion at an arbitrary direction.
    pub fn evaluate(&self, theta: f64, phi: f64) -> Complex64 {
        let p = normalized_legendre(self.l_max, theta.cos(), theta.sin());
        let mut acc = Complex64::new(0.0, 0.0);
        for l in 0..=self.l_max {
            for m in -(l as i64)..=(l as i64) {
                let am = m.unsigned_abs() as usize;
                let sign = if m < 0 && am % 2 == 1 { -1.0 } else { 1.0 };
                let y = Complex64::from_polar(sign * p[legendre_index(l, am)], m as f64 * phi);
                acc += self.get(l, m) * y;
            }
        }
        acc
    }
}

#[inline]
pub(crate) fn coeff_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

#[inline]
fn cs_sign(m: i64) -> f64 {
    if m < 0 && m.unsigned_abs() % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Discrete spherical-harmonic analysis on the equiangular grid: FFT along
/// each latitude ring, then quadrature-weighted Legendre projection. Exact for
/// inputs band-limited below `B`.
pub fn sht_forward(samples: &[Complex64], grid: &SphereGrid, l_max: usize) -> Result<SphericalCoeffs> {
    let b = grid.bandwidth();
    if l_max >= b {
        return Err(Error::Undersampled { l_max, bandwidth: b });
    }
    let side = grid.side();
    if samples.len() != grid.cell_count() {
        return Err(Error::InvalidParameter(format!(
            "expected {} samples, got {}",
            grid.cell_count(),
            samples.len()
        )));
    }
    let fft = FftPlanner::new().plan_fft_forward(side);
    let weights = grid.quadrature_weights();
    let mut out = SphericalCoeffs::zeros(l_max);
    let mut ring = vec![Complex64::new(0.0, 0.0); side];
    for j in 0..side {
        ring.copy_from_slice(&samples[j * side..(j + 1) * side]);
        fft.process(&mut ring);
        let t = grid.theta(j);
        let p = normalized_legendre(l_max, t.cos(), t.sin());
        for l in 0..=l_max {
            for m in -(l as i64)..=(l as i64) {
                let am = m.unsigned_abs() as usize;
                let bin = m.rem_euclid(side as i64) as usize;
                out.coeffs[coeff_index(l, m)] += ring[bin] * (weights[j] * cs_sign(m) * p[legendre_index(l, am)]);
            }
        }
    }
    Ok(out)
}

/// Real-valued convenience wrapper around [`sht_forward`].
pub fn sht_forward_real(samples: &[f64], grid: &SphereGrid, l_max: usize) -> Result<SphericalCoeffs> {
    let c: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    sht_forward(&c, grid, l_max)
}

/// Synthesis of the truncated expansion on the grid (inverse FFT per ring).
pub fn sht_inverse(coeffs: &SphericalCoeffs, grid: &SphereGrid) -> Vec<Complex64> {
    let side = grid.side();
    let l_max = coeffs.l_max.min(grid.bandwidth() - 1);
    let ifft = FftPlanner::new().plan_fft_inverse(side);
    let mut out = vec![Complex64::new(0.0, 0.0); grid.cell_count()];
    for j in 0..side {
        let t = grid.theta(j);
        let p = normalized_legendre(l_max, t.cos(), t.sin());
        let ring = &mut out[j * side..(j + 1) * side];
        for l in 0..=l_max {
            for m in -(l as i64)..=(l as i64) {
                let am = m.unsigned_abs() as usize;
                let bin = m.rem_euclid(side as i64) as usize;
                ring[bin] += coeffs.get(l, m) * (cs_sign(m) * p[legendre_index(l, am)]);
            }
        }
        ifft.process(ring);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use std::f64::consts::PI;

    fn samples_of(grid: &SphereGrid, f: impl Fn(f64, f64) -> Complex64) -> Vec<Complex64> {
        let side = grid.side();
        let mut v = Vec::with_capacity(grid.cell_count());
        for j in 0..side {
            for k in 0..side {
                v.push(f(grid.theta(j), grid.phi(k)));
            }
        }
        v
    }

    fn random_real_coeffs(l_max: usize, seed: u64) -> SphericalCoeffs {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut c = SphericalCoeffs::zeros(l_max);
        for l in 0..=l_max {
            c.set(l, 0, Complex64::new(rng.random_range(-1.0..1.0), 0.0));
            for m in 1..=(l as i64) {
                let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                c.set(l, m, v);
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                c.set(l, -m, v.conj() * sign);
            }
        }
        c
    }

    #[test]
    fn constant_function() {
        let g = SphereGrid::new(8).unwrap();
        let c = sht_forward(&samples_of(&g, |_, _| Complex64::new(1.0, 0.0)), &g, 7).unwrap();
        assert!((c.get(0, 0).re - (4.0 * PI).sqrt()).abs() < 1e-12);
        for (i, v) in c.coeffs.iter().enumerate().skip(1) {
            assert!(v.norm() < 1e-12, "coeff {i} = {v}");
        }
    }

    #[test]
    fn analytic_y32() {
        let g = SphereGrid::new(8).unwrap();
        let y32 = |t: f64, p: f64| {
            Complex64::from_polar(0.25 * (105.0 / (2.0 * PI)).sqrt() * t.sin().powi(2) * t.cos(), 2.0 * p)
        };
        let c = sht_forward(&samples_of(&g, y32), &g, 7).unwrap();
        for l in 0..=7usize {
            for m in -(l as i64)..=(l as i64) {
                let expected = if (l, m) == (3, 2) { 1.0 } else { 0.0 };
                assert!((c.get(l, m) - expected).norm() < 1e-9, "({l},{m}) = {}", c.get(l, m));
            }
        }
    }

    #[test]
    fn undersampled_rejected() {
        let g = SphereGrid::new(4).unwrap();
        assert!(matches!(
            sht_forward(&vec![Complex64::new(0.0, 0.0); 64], &g, 4),
            Err(Error::Undersampled { .. })
        ));
    }

    #[test]
    fn zero_and_constant_synthesis() {
        let g = SphereGrid::new(4).unwrap();
        assert!(sht_inverse(&SphericalCoeffs::zeros(3), &g).iter().all(|v| v.norm() == 0.0));
        let mut c = SphericalCoeffs::zeros(3);
        c.set(0, 0, Complex64::new(2.0, 0.0));
        let expected = 2.0 / (4.0 * PI).sqrt();
        for v in sht_inverse(&c, &g) {
            assert!((v.re - expected).abs() < 1e-13 && v.im.abs() < 1e-13);
        }
    }

    #[test]
    fn round_trip_band_limited_and_parseval() {
        for (b, seed) in [(8usize, 1u64), (16, 2)] {
            let g = SphereGrid::new(b).unwrap();
            let l_max = b - 1;
            let c = random_real_coeffs(l_max, seed);
            let samples = sht_inverse(&c, &g);
            let back = sht_forward(&samples, &g, l_max).unwrap();
            let err = c.coeffs.iter().zip(&back.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-9, "B={b}: {err}");
            // |f|² has degree < 2B, so the quadrature integrates it exactly
            let w = g.quadrature_weights();
            let side = g.side();
            let integral: f64 = samples
                .iter()
                .enumerate()
                .map(|(i, v)| v.norm_sqr() * w[i / side])
                .sum();
            assert!((integral - c.energy()).abs() / c.energy() < 1e-6);
        }
    }

    #[test]
    fn evaluate_agrees_with_grid_synthesis() {
        let g = SphereGrid::new(4).unwrap();
        let c = random_real_coeffs(3, 5);
        let s = sht_inverse(&c, &g);
        for j in 0..8 {
            for k in 0..8 {
                assert!((c.evaluate(g.theta(j), g.phi(k)) - s[g.index(j, k)]).norm() < 1e-12);
            }
        }
    }
}
