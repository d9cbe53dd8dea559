//! Two-step pose estimation: rotation candidates from the SO(3) correlation of
//! EGIs, then a translation per candidate from 3D phase correlation, ranked by
//! the phase-correlation peak.

mod estimator;
mod segment;
mod symmetry;

pub use estimator::{alignment_score, estimate_pose, PoseEstimate, PoseEstimator, PoseEstimatorConfig, PoseHypothesis};
pub use segment::segment_object;
pub use symmetry::{pose_error, Symmetry};
