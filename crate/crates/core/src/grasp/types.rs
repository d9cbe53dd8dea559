use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::geometry::{RigidTransform, UnitDualQuaternion, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grasp {
    pub id: usize,
    pub contacts: [Vec3; 2],
    /// Object surface normals at the contacts.
    pub normals: [Vec3; 2],
    /// Hand frame in the world (see [`super::GripperGeometry`]).
    pub pose: UnitDualQuaternion,
    pub width: f64,
    pub score: f64,
    /// Pose-dependent score from the latest re-ranking.
    pub dynamic_score: f64,
}

impl Grasp {
    pub fn transform(&self) -> RigidTransform {
        self.pose.to_transform()
    }

    pub fn position(&self) -> Vec3 {
        self.pose.translation()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraspWire {
    id: usize,
    contacts: [[f64; 3]; 2],
    normals: [[f64; 3]; 2],
    /// `[w, x, y, z]` real part then dual part.
    pose_dq: [f64; 8],
    width: f64,
    score: f64,
    #[serde(default)]
    dynamic_score: f64,
}

impl Serialize for Grasp {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = |p: &Vec3| [p.x, p.y, p.z];
        GraspWire {
            id: self.id,
            contacts: [v(&self.contacts[0]), v(&self.contacts[1])],
            normals: [v(&self.normals[0]), v(&self.normals[1])],
            pose_dq: self.pose.to_array(),
            width: self.width,
            score: self.score,
            dynamic_score: self.dynamic_score,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Grasp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = GraspWire::deserialize(d)?;
        let pose = UnitDualQuaternion::from_array(w.pose_dq)
            .ok_or_else(|| serde::de::Error::custom("pose_dq has a zero rotation part"))?;
        let v = |a: [f64; 3]| Vec3::new(a[0], a[1], a[2]);
        Ok(Grasp {
            id: w.id,
            contacts: [v(w.contacts[0]), v(w.contacts[1])],
            normals: [v(w.normals[0]), v(w.normals[1])],
            pose,
            width: w.width,
            score: w.score,
            dynamic_score: w.dynamic_score,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraspStats {
    /// Grasps emitted.
    pub count: usize,
    pub seconds: f64,
    pub rotations: usize,
    pub pairs_considered: usize,
    pub rejected_force_closure: usize,
    pub rejected_collision: usize,
    pub rejected_score: usize,
}

impl GraspStats {
    pub fn grasps_per_second(&self) -> f64 {
        if self.seconds > 0.0 {
            self.count as f64 / self.seconds
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraspSet {
    pub object_id: Option<String>,
    pub grasps: Vec<Grasp>,
    pub stats: GraspStats,
}

impl GraspSet {
    pub fn len(&self) -> usize {
        self.grasps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grasps.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Grasp> {
        self.grasps.iter().find(|g| g.id == id)
    }

    /// Sorts by static score, descending, ties by id.
    pub fn sort_by_score(&mut self) {
        self.grasps.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
    }

    /// Sorts by dynamic score, descending, ties by static score then id.
    pub fn sort_by_dynamic_score(&mut self) {
        self.grasps.sort_by(|a, b| {
            b.dynamic_score.total_cmp(&a.dynamic_score).then(b.score.total_cmp(&a.score)).then(a.id.cmp(&b.id))
        });
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let set: GraspSet = serde_json::from_str(s)?;
        if set.grasps.iter().any(|g| !(g.width.is_finite() && g.score.is_finite())) {
            return Err(Error::InvalidParameter("non-finite grasp field".into()));
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, UnitQuaternion};

    #[test]
    fn json_round_trip() {
        let pose = UnitDualQuaternion::from_rotation_translation(
            &UnitQuaternion::from_rotation_matrix(&Rotation3::from_euler_angles(0.1, 0.2, 0.3)),
            &Vec3::new(0.1, -0.2, 0.3),
        );
        let g = Grasp {
            id: 3,
            contacts: [Vec3::new(0.0, -0.02, 0.0), Vec3::new(0.0, 0.02, 0.0)],
            normals: [-Vec3::y(), Vec3::y()],
            pose,
            width: 0.04,
            score: 0.9,
            dynamic_score: 0.0,
        };
        let set = GraspSet { object_id: Some("box".into()), grasps: vec![g], stats: GraspStats::default() };
        let back = GraspSet::from_json(&set.to_json().unwrap()).unwrap();
        assert_eq!(back.grasps[0].id, 3);
        assert!((back.grasps[0].position() - Vec3::new(0.1, -0.2, 0.3)).norm() < 1e-12);
        assert!(GraspSet::from_json(r#"{"object_id":null,"grasps":[{"id":0}],"stats":{}}"#).is_err());
    }
}
