use num_complex::Complex64;
use rayon::prelude::*;
use realfft::RealFftPlanner;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

use crate::geometry::VoxelGrid;

/// Complex coefficients on an `M×N×L` grid, row-major like [`VoxelGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum3D {
    pub dims: [usize; 3],
    pub data: Vec<Complex64>,
}

impl Spectrum3D {
    pub fn index(&self, u: usize, v: usize, w: usize) -> usize {
        (u * self.dims[1] + v) * self.dims[2] + w
    }

    pub fn get(&self, u: usize, v: usize, w: usize) -> Complex64 {
        self.data[self.index(u, v, w)]
    }
}

fn plans(dims: [usize; 3], dir: FftDirection) -> [Arc<dyn Fft<f64>>; 3] {
    let mut planner = FftPlanner::new();
    dims.map(|n| planner.plan_fft(n, dir))
}

/// In-place unnormalized 3D transform; rustfft picks radix-2 kernels for
/// power-of-two lengths and mixed-radix/Bluestein otherwise.
pub(crate) fn transform_in_place(data: &mut [Complex64], dims: [usize; 3], dir: FftDirection) {
    let [nx, ny, nz] = dims;
    assert_eq!(data.len(), nx * ny * nz, "data length does not match dims");
    if data.is_empty() {
        return;
    }
    let [px, py, pz] = plans(dims, dir);
    let slab = ny * nz;
    data.par_chunks_mut(slab).for_each(|s| {
        for row in s.chunks_mut(nz) {
            // sparse model grids: most rows are empty before the first pass
            if row.iter().any(|v| v.re != 0.0 || v.im != 0.0) {
                pz.process(row);
            }
        }
        strided_pass(s, ny, nz, &py);
    });
    if nx > 1 {
        strided_pass(data, nx, slab, &px);
    }
}

const BLOCK: usize = 16;

/// Transforms the `n`-point lines of stride `stride` in `data`, gathering
/// blocks of adjacent lines so that memory is walked contiguously.
fn strided_pass(data: &mut [Complex64], n: usize, stride: usize, fft: &Arc<dyn Fft<f64>>) {
    let mut buf = vec![Complex64::new(0.0, 0.0); n * BLOCK];
    let mut c0 = 0;
    while c0 < stride {
        let w = BLOCK.min(stride - c0);
        let mut nonzero = false;
        for i in 0..n {
            let row = &data[i * stride + c0..i * stride + c0 + w];
            for (c, v) in row.iter().enumerate() {
                buf[c * n + i] = *v;
                nonzero |= v.re != 0.0 || v.im != 0.0;
            }
        }
        if !nonzero {
            c0 += w;
            continue;
        }
        let lines = &mut buf[..w * n];
        fft.process(lines);
        for i in 0..n {
            let row = &mut data[i * stride + c0..i * stride + c0 + w];
            for (c, v) in row.iter_mut().enumerate() {
                *v = lines[c * n + i];
            }
        }
        c0 += w;
    }
}

/// Non-redundant half of the spectrum of a real grid: `w ∈ [0, L/2]`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct HalfSpectrum {
    pub dims: [usize; 3],
    pub data: Vec<Complex64>,
}

impl HalfSpectrum {
    pub fn half_dims(dims: [usize; 3]) -> [usize; 3] {
        [dims[0], dims[1], dims[2] / 2 + 1]
    }
}

pub(crate) fn rfft3(values: &[f64], dims: [usize; 3]) -> HalfSpectrum {
    let [nx, ny, nz] = dims;
    assert_eq!(values.len(), nx * ny * nz, "data length does not match dims");
    let hd = HalfSpectrum::half_dims(dims);
    let hz = hd[2];
    let mut data = vec![Complex64::new(0.0, 0.0); nx * ny * hz];
    if values.is_empty() {
        return HalfSpectrum { dims, data };
    }
    let r2c = RealFftPlanner::<f64>::new().plan_fft_forward(nz);
    let py = FftPlanner::new().plan_fft_forward(ny);
    data.par_chunks_mut(ny * hz).zip(values.par_chunks(ny * nz)).for_each(|(out, inp)| {
        let mut row = vec![0.0; nz];
        let mut any = false;
        for (o, i) in out.chunks_mut(hz).zip(inp.chunks(nz)) {
            if i.iter().any(|&v| v != 0.0) {
                row.copy_from_slice(i);
                r2c.process(&mut row, o).expect("row lengths match the plan");
                any = true;
            }
        }
        if any {
            strided_pass(out, ny, hz, &py);
        }
    });
    if nx > 1 {
        let px = FftPlanner::new().plan_fft_forward(nx);
        strided_pass(&mut data, nx, ny * hz, &px);
    }
    HalfSpectrum { dims, data }
}

/// Inverse of [`rfft3`], scaled by `1/(MNL)`. Consumes the spectrum.
pub(crate) fn irfft3(mut h: HalfSpectrum) -> Vec<f64> {
    let [nx, ny, nz] = h.dims;
    let hz = HalfSpectrum::half_dims(h.dims)[2];
    let mut out = vec![0.0; nx * ny * nz];
    if out.is_empty() {
        return out;
    }
    if nx > 1 {
        let px = FftPlanner::new().plan_fft_inverse(nx);
        strided_pass(&mut h.data, nx, ny * hz, &px);
    }
    let c2r = RealFftPlanner::<f64>::new().plan_fft_inverse(nz);
    let py = FftPlanner::new().plan_fft_inverse(ny);
    let scale = 1.0 / out.len() as f64;
    h.data.par_chunks_mut(ny * hz).zip(out.par_chunks_mut(ny * nz)).for_each(|(inp, o)| {
        strided_pass(inp, ny, hz, &py);
        for (i, r) in inp.chunks_mut(hz).zip(o.chunks_mut(nz)) {
            // DC/Nyquist imaginary parts are rounding residue here; the
            // transform still runs and ignores them
            let _ = c2r.process(i, r);
            r.iter_mut().for_each(|v| *v *= scale);
        }
    });
    out
}

/// `F(u,v,w) = Σ f(x,y,z) e^{-2πi(ux/M + vy/N + wz/L)}`.
pub fn fft3(grid: &VoxelGrid) -> Spectrum3D {
    let data = grid.values().iter().map(|&b| Complex64::new(if b { 1.0 } else { 0.0 }, 0.0)).collect();
    fft3_complex(grid.dims(), data)
}

pub fn fft3_complex(dims: [usize; 3], mut data: Vec<Complex64>) -> Spectrum3D {
    transform_in_place(&mut data, dims, FftDirection::Forward);
    Spectrum3D { dims, data }
}

/// Inverse transform scaled by `1/(MNL)`.
pub fn ifft3(spectrum: &Spectrum3D) -> Vec<Complex64> {
    let mut data = spectrum.data.clone();
    transform_in_place(&mut data, spectrum.dims, FftDirection::Inverse);
    let scale = 1.0 / data.len().max(1) as f64;
    data.iter_mut().for_each(|v| *v *= scale);
    data
}
