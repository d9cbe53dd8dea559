use crate::geometry::{obb_of_cloud, PointNormalCloud, RigidTransform};
use crate::{Error, Result};

/// Scene points inside the model's oriented bounding box after placing the
/// model at `pose`, with the box grown by `margin` on every side.
pub fn segment_object(
    scene: &PointNormalCloud,
    model: &PointNormalCloud,
    pose: &RigidTransform,
    margin: f64,
) -> Result<PointNormalCloud> {
    let obb = obb_of_cloud(model)?.transformed(pose);
    let keep: Vec<usize> = scene
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| obb.contains(p, margin))
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptySegmentation);
    }
    Ok(scene.select(&keep))
}
