//! 3D DFT of voxel grids and phase-correlation translation search.

mod fft;
mod phase;
mod translation;

pub use fft::{fft3, fft3_complex, ifft3, Spectrum3D};
pub use phase::{phase_correlate, phase_correlate_spectra, DeltaField};
pub use translation::{estimate_translation, TranslationEstimate, TranslationEstimator};
