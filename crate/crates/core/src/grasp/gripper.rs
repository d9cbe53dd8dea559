use serde::{Deserialize, Serialize};

use crate::geometry::{OrientedBoundingBox, PointNormalCloud, Vec3, Mat3};
use crate::{Error, Result};

/// Dimensions of a parallel-jaw gripper, in metres.
///
/// Hand frame: origin midway between the pad centres, `y` the closing axis,
/// `z` the approach direction (fingers point along `+z`), `x = y × z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GripperGeometry {
    pub stroke_min: f64,
    pub stroke_max: f64,
    /// Pad extent along `x`.
    pub pad_width: f64,
    /// Pad extent along `z`.
    pub pad_height: f64,
    pub finger_thickness: f64,
    /// Finger length from the palm face to the fingertip.
    pub finger_length: f64,
    pub palm_height: f64,
    /// Palm extent along `x`.
    pub palm_depth: f64,
    /// Sample spacing of the pad clouds.
    pub pad_spacing: f64,
}

impl Default for GripperGeometry {
    fn default() -> Self {
        Self {
            stroke_min: 0.005,
            stroke_max: 0.08,
            pad_width: 0.02,
            pad_height: 0.02,
            finger_thickness: 0.015,
            finger_length: 0.05,
            palm_height: 0.03,
            palm_depth: 0.04,
            pad_spacing: 0.004,
        }
    }
}

/// Gripper with its two pad clouds (at zero opening) and box geometry for
/// collision checks.
#[derive(Debug, Clone, PartialEq)]
pub struct GripperModel {
    pub geometry: GripperGeometry,
    /// Pads of finger 1 (at `−y`, normal `+y`) and finger 2 (at `+y`,
    /// normal `−y`), centred on the origin.
    pub pads: [PointNormalCloud; 2],
}

impl Default for GripperModel {
    fn default() -> Self {
        Self::new(GripperGeometry::default()).expect("default geometry is valid")
    }
}

impl GripperModel {
    pub fn new(geometry: GripperGeometry) -> Result<Self> {
        let g = &geometry;
        let dims = [
            g.stroke_max,
            g.pad_width,
            g.pad_height,
            g.finger_thickness,
            g.finger_length,
            g.palm_height,
            g.palm_depth,
            g.pad_spacing,
        ];
        if dims.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !(g.stroke_min >= 0.0 && g.stroke_min < g.stroke_max) {
            return Err(Error::InvalidParameter("gripper dimensions must be positive with stroke_min < stroke_max".into()));
        }
        if g.finger_length < g.pad_height {
            return Err(Error::InvalidParameter("finger shorter than its pad".into()));
        }
        let nx = (g.pad_width / g.pad_spacing).round().max(1.0) as usize;
        let nz = (g.pad_height / g.pad_spacing).round().max(1.0) as usize;
        let mut pads = [PointNormalCloud::empty(), PointNormalCloud::empty()];
        for a in 0..nx {
            for b in 0..nz {
                let x = -g.pad_width / 2.0 + (a as f64 + 0.5) * g.pad_width / nx as f64;
                let z = -g.pad_height / 2.0 + (b as f64 + 0.5) * g.pad_height / nz as f64;
                pads[0].push(Vec3::new(x, 0.0, z), Vec3::y());
                pads[1].push(Vec3::new(x, 0.0, z), -Vec3::y());
            }
        }
        Self::with_pads(geometry, pads)
    }

    /// Custom pad clouds; their normals must face each other.
    pub fn with_pads(geometry: GripperGeometry, pads: [PointNormalCloud; 2]) -> Result<Self> {
        let mean = |c: &PointNormalCloud| c.normals().iter().sum::<Vec3>().normalize();
        if pads.iter().any(|p| p.is_empty()) {
            return Err(Error::InvalidParameter("empty pad cloud".into()));
        }
        let (a, b) = (mean(&pads[0]), mean(&pads[1]));
        if a.dot(&b) > -(10f64.to_radians().cos()) || a.dot(&Vec3::y()) < 0.9 {
            return Err(Error::InvalidParameter("pad normals must face each other along the closing axis".into()));
        }
        Ok(Self { geometry, pads })
    }

    /// Directions object normals must have at the two contacts (hand frame):
    /// the negated pad normals.
    pub fn contact_normals(&self) -> [Vec3; 2] {
        let mean = |c: &PointNormalCloud| -c.normals().iter().sum::<Vec3>().normalize();
        [mean(&self.pads[0]), mean(&self.pads[1])]
    }

    /// Finger boxes (outside the pads) and palm box, hand frame, at opening `width`.
    pub fn collision_boxes(&self, width: f64) -> [OrientedBoundingBox; 3] {
        let g = &self.geometry;
        let z_top = g.pad_height / 2.0;
        let z_palm = z_top - g.finger_length;
        let finger = |sign: f64| OrientedBoundingBox {
            center: Vec3::new(0.0, sign * (width / 2.0 + g.finger_thickness / 2.0), (z_top + z_palm) / 2.0),
            axes: Mat3::identity(),
            half_extents: Vec3::new(g.pad_width / 2.0, g.finger_thickness / 2.0, g.finger_length / 2.0),
            degenerate: false,
        };
        let palm_half_y = g.stroke_max / 2.0 + g.finger_thickness;
        let palm = OrientedBoundingBox {
            center: Vec3::new(0.0, 0.0, z_palm - g.palm_height / 2.0),
            axes: Mat3::identity(),
            half_extents: Vec3::new(g.palm_depth.max(g.pad_width) / 2.0, palm_half_y, g.palm_height / 2.0),
            degenerate: false,
        };
        [finger(-1.0), finger(1.0), palm]
    }

    /// Sample points filling the collision boxes at `spacing`; the flag marks
    /// finger (true) versus palm (false) samples.
    pub fn collision_samples(&self, width: f64, spacing: f64) -> Vec<(Vec3, bool)> {
        let mut out = Vec::new();
        for (bi, b) in self.collision_boxes(width).iter().enumerate() {
            let n = b.half_extents.map(|h| ((2.0 * h / spacing).ceil() as usize).max(1));
            for i in 0..=n.x {
                for j in 0..=n.y {
                    for k in 0..=n.z {
                        let t = Vec3::new(i as f64 / n.x as f64, j as f64 / n.y as f64, k as f64 / n.z as f64);
                        let local = b.half_extents.component_mul(&(t * 2.0 - Vec3::repeat(1.0)));
                        out.push((b.center + local, bi < 2));
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_pads_face_each_other() {
        let g = GripperModel::default();
        let [a, b] = g.contact_normals();
        assert!((a + Vec3::y()).norm() < 1e-12);
        assert!((b - Vec3::y()).norm() < 1e-12);
        assert_eq!(g.pads[0].len(), 25);
    }

    #[test]
    fn rejects_bad_geometry() {
        let geom = GripperGeometry { stroke_min: 0.1, ..Default::default() };
        assert!(GripperModel::new(geom).is_err());
        let same = GripperModel::default().pads[0].clone();
        assert!(GripperModel::with_pads(GripperGeometry::default(), [same.clone(), same]).is_err());
    }

    #[test]
    fn boxes_leave_gap_between_fingers() {
        let g = GripperModel::default();
        let boxes = g.collision_boxes(0.04);
        assert!(!boxes.iter().any(|b| b.contains(&Vec3::zeros(), 0.0)));
        assert!(boxes[0].contains(&Vec3::new(0.0, -0.03, 0.0), 0.0));
        assert!(boxes[2].contains(&Vec3::new(0.0, 0.0, -0.05), 0.0));
        let samples = g.collision_samples(0.04, 0.0025);
        assert!(samples.iter().all(|(p, _)| boxes.iter().any(|b| b.contains(p, 1e-9))));
    }
}
