//! Perception and grasp planning for assisted telemanipulation.
//!
//! The crate covers the geometry shared by every stage, the spectral kernels
//! (spherical harmonics, SO(3) correlation, 3D phase correlation), two-step
//! 6-DoF pose estimation of a known object in a cluttered scene, and
//! parallel-jaw grasp generation with pose-dependent re-ranking.

pub mod error;
pub mod geometry;
pub mod grasp;
pub mod pose;
pub mod spherical;
pub mod volumetric;

pub use error::{Error, Result};
