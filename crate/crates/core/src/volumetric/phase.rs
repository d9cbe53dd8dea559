use num_complex::Complex64;
use rustfft::FftDirection;

use super::fft::{irfft3, rfft3, transform_in_place, HalfSpectrum, Spectrum3D};
use crate::geometry::VoxelGrid;
use crate::{Error, Result};

/// Inverse transform of the normalized cross-power spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaField {
    pub dims: [usize; 3],
    pub values: Vec<f64>,
    pub peak_index: [usize; 3],
    /// Displacement of `g` relative to `f`: the negated peak index, wrapped
    /// to `(-n/2, n/2]` per axis.
    pub shift: [i64; 3],
    pub delta_max: f64,
}

impl DeltaField {
    pub fn get(&self, idx: [usize; 3]) -> f64 {
        self.values[(idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2]]
    }
}

fn signed(i: usize, n: usize) -> i64 {
    if i > n / 2 {
        i as i64 - n as i64
    } else {
        i as i64
    }
}

// the cross-power peak of g(x) = f(x − s) lands at index −s mod n
fn displacement(peak: usize, n: usize) -> i64 {
    signed((n - peak) % n, n)
}

/// `δ = ifft(F·conj(G) / max(|F·conj(G)|, ε))`, `ε = 1e-12·max|F·conj(G)|`.
/// `shift` is `s` when `g(x) = f(x − s)`.
pub fn phase_correlate(f: &VoxelGrid, g: &VoxelGrid) -> Result<DeltaField> {
    if f.dims() != g.dims() {
        return Err(Error::Mismatch(format!("grid dims {:?} vs {:?}", f.dims(), g.dims())));
    }
    if f.occupied_count() == 0 && g.occupied_count() == 0 {
        return Err(Error::EmptyInput);
    }
    let dims = f.dims();
    Ok(phase_correlate_half(&rfft3(&f.as_f64(), dims), &rfft3(&g.as_f64(), dims)))
}

fn whiten(cross: &mut [Complex64]) {
    let max_sq = cross.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
    if max_sq > 0.0 {
        // ε = 1e-12·max, compared in squares
        let eps_sq = 1e-24 * max_sq;
        for c in cross.iter_mut() {
            *c *= c.norm_sqr().max(eps_sq).sqrt().recip();
        }
    }
}

fn peak_field(dims: [usize; 3], values: Vec<f64>) -> DeltaField {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    let peak_index = [best / (dims[1] * dims[2]), (best / dims[2]) % dims[1], best % dims[2]];
    let shift = [0, 1, 2].map(|a| displacement(peak_index[a], dims[a]));
    DeltaField { dims, delta_max: values[best], values, peak_index, shift }
}

/// Same as [`phase_correlate_spectra`] on half spectra of real grids.
pub(crate) fn phase_correlate_half(f: &HalfSpectrum, g: &HalfSpectrum) -> DeltaField {
    debug_assert_eq!(f.dims, g.dims);
    let mut cross: Vec<Complex64> = f.data.iter().zip(&g.data).map(|(a, b)| a * b.conj()).collect();
    whiten(&mut cross);
    peak_field(f.dims, irfft3(HalfSpectrum { dims: f.dims, data: cross }))
}

pub fn phase_correlate_spectra(f: &Spectrum3D, g: &Spectrum3D) -> Result<DeltaField> {
    if f.dims != g.dims {
        return Err(Error::Mismatch(format!("spectrum dims {:?} vs {:?}", f.dims, g.dims)));
    }
    let dims = f.dims;
    let mut cross: Vec<Complex64> = f.data.iter().zip(&g.data).map(|(a, b)| a * b.conj()).collect();
    whiten(&mut cross);
    transform_in_place(&mut cross, dims, FftDirection::Inverse);
    let scale = 1.0 / cross.len() as f64;
    Ok(peak_field(dims, cross.iter().map(|c| c.re * scale).collect()))
}
