//! Functions on the sphere and their correlation over SO(3).
//!
//! Normals are histogrammed on an equiangular `2B × 2B` grid (EGI/BEGI),
//! expanded in orthonormal spherical harmonics with Condon–Shortley phase,
//! and correlated over a `(2B)³` grid of z-y-z Euler angles using the
//! separable Wigner-D factorization: one small-d sum per β sample followed
//! by a 2D inverse FFT over (α, γ).

mod egi;
mod grid;
mod legendre;
mod sht;
mod so3;
mod wigner;

pub use egi::{compute_begi, compute_egi, Begi, Egi};
pub use grid::{bin_normal, SphereGrid};
pub use legendre::normalized_legendre;
pub use sht::{sht_forward, sht_forward_real, sht_inverse, SphericalCoeffs};
pub use so3::{
    sample_rotations, so3_correlate, RotationCandidate, RotationCandidateSet, RotationSampling, So3CorrelationMap,
    So3Correlator,
};
pub use wigner::{wigner_d_direct, WignerTable};
