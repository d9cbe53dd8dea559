use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};
use telegrasp_core::geometry::{PointNormalCloud, Vec3};
use telegrasp_core::pose::Symmetry;

use crate::{Error, Result};

/// Procedural stand-ins for household objects. Dimensions in metres; the
/// axis of revolution is `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Box { dims: [f64; 3] },
    Cylinder { radius: f64, height: f64 },
    /// Open straight-walled container.
    Bowl { radius: f64, height: f64, thickness: f64 },
    /// Open cup with a handle on `+x`.
    Mug { radius: f64, height: f64, thickness: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectModel {
    pub id: String,
    pub name: String,
    pub primitive: Option<Primitive>,
    /// Reference cloud, centred on its centroid.
    pub cloud: PointNormalCloud,
    pub source: Option<String>,
    pub symmetry: Symmetry,
}

impl ObjectModel {
    /// Wraps a user cloud (e.g. loaded from PLY), recentred on its centroid.
    pub fn from_cloud(id: &str, cloud: PointNormalCloud, source: Option<String>) -> Result<Self> {
        cloud.ensure_non_empty()?;
        Ok(Self {
            id: id.into(),
            name: id.into(),
            primitive: None,
            cloud: cloud.centered(),
            source,
            symmetry: Symmetry::none(),
        })
    }

    /// Height of the centroid above the lowest point, the resting offset
    /// for an upright placement.
    pub fn rest_height(&self, rotation: &Rotation3<f64>) -> f64 {
        -self.cloud.points().iter().map(|p| (rotation * p).z).fold(f64::INFINITY, f64::min)
    }

    /// Radius of the footprint on the table for a given resting rotation.
    pub fn footprint_radius(&self, rotation: &Rotation3<f64>) -> f64 {
        self.cloud.points().iter().map(|p| (rotation * p).xy().norm()).fold(0.0, f64::max)
    }
}

/// Surface samples of `primitive` at roughly `density` points per m², with
/// analytic outward normals, centred on the centroid.
pub fn make_primitive(id: &str, primitive: &Primitive, density: f64) -> Result<ObjectModel> {
    if !(density.is_finite() && density > 0.0) {
        return Err(Error::InvalidParameter("sample density must be positive".into()));
    }
    let s = 1.0 / density.sqrt();
    let positive = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x > 0.0);
    let mut c = PointNormalCloud::empty();
    let symmetry = match primitive {
        Primitive::Box { dims } => {
            if !positive(dims) {
                return Err(Error::InvalidParameter("box dims must be positive".into()));
            }
            sample_box(&mut c, Vec3::from(*dims), Vec3::zeros(), s);
            box_symmetry(Vec3::from(*dims))
        }
        Primitive::Cylinder { radius, height } => {
            if !positive(&[*radius, *height]) {
                return Err(Error::InvalidParameter("cylinder dims must be positive".into()));
            }
            wall(&mut c, *radius, 0.0, *height, 1.0, s);
            disc(&mut c, 0.0, *radius, 0.0, -1.0, s);
            disc(&mut c, 0.0, *radius, *height, 1.0, s);
            Symmetry::Axial { axis: Vec3::z_axis(), flip: true }
        }
        Primitive::Bowl { radius, height, thickness } | Primitive::Mug { radius, height, thickness } => {
            if !positive(&[*radius, *height, *thickness]) || thickness >= radius || thickness >= height {
                return Err(Error::InvalidParameter("container dims must be positive, wall thinner than radius and height".into()));
            }
            let inner = radius - thickness;
            wall(&mut c, *radius, 0.0, *height, 1.0, s);
            disc(&mut c, 0.0, *radius, 0.0, -1.0, s);
            wall(&mut c, inner, *thickness, *height, -1.0, s);
            disc(&mut c, 0.0, inner, *thickness, 1.0, s);
            disc(&mut c, inner, *radius, *height, 1.0, s);
            if let Primitive::Mug { .. } = primitive {
                let handle = Vec3::new(0.012, 0.01, 0.6 * height);
                let centre = Vec3::new(radius + handle.x / 2.0, 0.0, height / 2.0);
                let mut h = PointNormalCloud::empty();
                sample_box(&mut h, handle, centre, s);
                for (p, n) in h.iter() {
                    // drop the face buried in the wall
                    if !(n.x < -0.5) {
                        c.push(*p, *n);
                    }
                }
                Symmetry::none()
            } else {
                Symmetry::Axial { axis: Vec3::z_axis(), flip: false }
            }
        }
    };
    let name = match primitive {
        Primitive::Box { .. } => "box",
        Primitive::Cylinder { .. } => "cylinder",
        Primitive::Bowl { .. } => "bowl",
        Primitive::Mug { .. } => "mug",
    };
    Ok(ObjectModel {
        id: id.into(),
        name: name.into(),
        primitive: Some(primitive.clone()),
        cloud: c.centered(),
        source: None,
        symmetry,
    })
}

fn sample_box(c: &mut PointNormalCloud, dims: Vec3, centre: Vec3, s: f64) {
    let h = dims / 2.0;
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let nu = (dims[u] / s).round().max(1.0) as usize;
        let nv = (dims[v] / s).round().max(1.0) as usize;
        for sign in [-1.0, 1.0] {
            for a in 0..nu {
                for b in 0..nv {
                    let mut p = Vec3::zeros();
                    p[axis] = sign * h[axis];
                    p[u] = -h[u] + (a as f64 + 0.5) * dims[u] / nu as f64;
                    p[v] = -h[v] + (b as f64 + 0.5) * dims[v] / nv as f64;
                    let mut n = Vec3::zeros();
                    n[axis] = sign;
                    c.push(p + centre, n);
                }
            }
        }
    }
}

/// Lateral surface of a cylinder, normals radial times `sign`.
fn wall(c: &mut PointNormalCloud, r: f64, z0: f64, z1: f64, sign: f64, s: f64) {
    let nt = ((TAU * r / s).round() as usize).max(3);
    let nz = (((z1 - z0) / s).round() as usize).max(1);
    for k in 0..nz {
        let z = z0 + (k as f64 + 0.5) * (z1 - z0) / nz as f64;
        for i in 0..nt {
            // alternate rows are staggered by half a step
            let a = (i as f64 + 0.5 * (k % 2) as f64) * TAU / nt as f64;
            let d = Vec3::new(a.cos(), a.sin(), 0.0);
            c.push(d * r + Vec3::new(0.0, 0.0, z), d * sign);
        }
    }
}

/// Annulus `r0 ≤ ρ ≤ r1` at height `z`, normal `±z`.
fn disc(c: &mut PointNormalCloud, r0: f64, r1: f64, z: f64, nz: f64, s: f64) {
    let rings = (((r1 - r0) / s).round() as usize).max(1);
    for k in 0..rings {
        let rho = r0 + (k as f64 + 0.5) * (r1 - r0) / rings as f64;
        let nt = ((TAU * rho / s).round() as usize).max(1);
        for i in 0..nt {
            let a = (i as f64 + 0.5 * (k % 2) as f64) * TAU / nt as f64;
            c.push(Vec3::new(rho * a.cos(), rho * a.sin(), z), Vec3::new(0.0, 0.0, nz));
        }
    }
}

/// Axis-permuting rotations that map the box onto itself.
fn box_symmetry(dims: Vec3) -> Symmetry {
    let mut rotations = Vec::new();
    let quarter = [0.0, FRAC_PI_2, PI, -FRAC_PI_2];
    for &a in &quarter {
        for &b in &quarter {
            for &g in &quarter {
                let r = Rotation3::from_euler_angles(a, b, g);
                let m = r.matrix().map(|v| v.round());
                let mapped = (m * dims).abs();
                if (mapped - dims).norm() < 1e-9 && !rotations.iter().any(|q: &Rotation3<f64>| q.matrix().map(|v| v.round()) == m) {
                    rotations.push(Rotation3::from_matrix_unchecked(m));
                }
            }
        }
    }
    Symmetry::Discrete { rotations }
}

/// Ten distinct desk-scale objects, all graspable by the default gripper.
pub fn default_library(density: f64) -> Result<Vec<ObjectModel>> {
    let specs: [(&str, Primitive); 10] = [
        ("cracker_box", Primitive::Box { dims: [0.06, 0.04, 0.08] }),
        ("jello_box", Primitive::Box { dims: [0.055, 0.045, 0.03] }),
        ("tea_box", Primitive::Box { dims: [0.07, 0.035, 0.05] }),
        ("soup_can", Primitive::Cylinder { radius: 0.033, height: 0.10 }),
        ("tuna_can", Primitive::Cylinder { radius: 0.036, height: 0.035 }),
        ("bowl", Primitive::Bowl { radius: 0.036, height: 0.045, thickness: 0.005 }),
        ("mug", Primitive::Mug { radius: 0.032, height: 0.08, thickness: 0.005 }),
        ("soap_bar", Primitive::Box { dims: [0.075, 0.05, 0.025] }),
        ("spam_tin", Primitive::Box { dims: [0.09, 0.05, 0.04] }),
        ("spray_can", Primitive::Cylinder { radius: 0.025, height: 0.12 }),
    ];
    specs.iter().map(|(id, p)| make_primitive(id, p, density)).collect()
}
