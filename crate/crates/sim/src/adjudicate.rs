use serde::{Deserialize, Serialize};
use telegrasp_core::geometry::{PointIndex, RigidTransform, Vec3};
use telegrasp_core::grasp::{force_closure_filter, GripperGeometry};

use crate::objects::ObjectModel;
use crate::scene::SceneDescription;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjudication {
    pub success: bool,
    pub instance_id: Option<usize>,
    /// Distance between the two contacts, when both pads touched one object.
    pub width: Option<f64>,
    pub reason: String,
}

impl Adjudication {
    fn fail(instance_id: Option<usize>, width: Option<f64>, reason: impl Into<String>) -> Self {
        Self { success: false, instance_id, width, reason: reason.into() }
    }
}

/// Closes the gripper at `wrist` with its pads `width` apart. Succeeds when
/// both pad centres lie within `tolerance` of the same object, the touched
/// points form a force-closure pair under friction `mu`, and their distance
/// is inside the stroke. On success the instance is removed from the scene.
pub fn adjudicate_grasp(
    scene: &mut SceneDescription,
    models: &[ObjectModel],
    wrist: &RigidTransform,
    width: f64,
    gripper: &GripperGeometry,
    tolerance: f64,
    mu: f64,
) -> Result<Adjudication> {
    let pads = [wrist.apply_point(&Vec3::new(0.0, -width / 2.0, 0.0)), wrist.apply_point(&Vec3::new(0.0, width / 2.0, 0.0))];
    let mut best: Option<(f64, usize, [(Vec3, Vec3); 2])> = None;
    let ids: Vec<usize> = scene.remaining().map(|i| i.instance_id).collect();
    for id in ids {
        let cloud = scene.instance_cloud(models, id)?;
        let index = PointIndex::new(cloud.points());
        let (Some((i1, d1)), Some((i2, d2))) = (index.nearest_one(&pads[0]), index.nearest_one(&pads[1])) else {
            continue;
        };
        let (d1, d2) = (d1.sqrt(), d2.sqrt());
        if d1 > tolerance || d2 > tolerance {
            continue;
        }
        let contact = |i: usize| (cloud.points()[i], cloud.normals()[i]);
        if best.as_ref().is_none_or(|(d, _, _)| d1 + d2 < *d) {
            best = Some((d1 + d2, id, [contact(i1), contact(i2)]));
        }
    }
    let Some((_, id, [(p1, n1), (p2, n2)])) = best else {
        return Ok(Adjudication::fail(None, None, "no object between the pads"));
    };
    let w = (p2 - p1).norm();
    if w < gripper.stroke_min || w > gripper.stroke_max {
        return Ok(Adjudication::fail(Some(id), Some(w), format!("contact width {w:.4} outside the stroke")));
    }
    if !force_closure_filter(&p1, &n1, &p2, &n2, mu) {
        return Ok(Adjudication::fail(Some(id), Some(w), "contacts fail force closure"));
    }
    scene.remove(id);
    Ok(Adjudication { success: true, instance_id: Some(id), width: Some(w), reason: "grasped".into() })
}
