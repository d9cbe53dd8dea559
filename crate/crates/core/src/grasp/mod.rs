//! Parallel-jaw grasp generation on a segmented object and pose-dependent
//! re-ranking of the resulting grasp set.

mod closure;
mod generate;
mod gripper;
mod rerank;
mod types;

pub use closure::{force_closure_filter, local_flatness, score_grasp};
pub use generate::{check_collision, generate_grasps, GraspConfig, GraspPlanner};
pub use gripper::{GripperGeometry, GripperModel};
pub use rerank::{nearest_grasps, rerank, ReRankParams, Reranking};
pub use types::{Grasp, GraspSet, GraspStats};
