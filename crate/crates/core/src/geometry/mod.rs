//! Point clouds, rigid transforms, dual quaternions, voxel grids and boxes.

mod cloud;
mod dualquat;
mod normals;
mod obb;
mod spatial;
pub mod ply;
mod transform;
mod voxel;

pub use cloud::{transform_cloud, PointNormalCloud};
pub use dualquat::{dq_error_components, dq_from_transform, transform_from_dq, DqError, UnitDualQuaternion};
pub use normals::estimate_normals;
pub use obb::{obb_of_cloud, OrientedBoundingBox};
pub use spatial::PointIndex;
pub use transform::{rotation_distance, RigidTransform};
pub use voxel::{padded_bounds, smooth_len, voxelize, GridBounds, VoxelGrid, Voxelization};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
