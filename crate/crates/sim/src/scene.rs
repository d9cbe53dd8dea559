use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::Rotation3;
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use telegrasp_core::geometry::{PointNormalCloud, RigidTransform, Vec3};

use crate::objects::{ObjectModel, Primitive};
use crate::{Error, Result};

pub const SCENE_SCHEMA_VERSION: u32 = 1;

/// Rectangular table top at height `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableExtent {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub z: f64,
}

impl Default for TableExtent {
    fn default() -> Self {
        Self { min: [-0.25, -0.25], max: [0.25, 0.25], z: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub instance_id: usize,
    pub model_id: String,
    /// Model frame to world.
    pub pose: RigidTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDescription {
    pub version: u32,
    pub seed: u64,
    pub table: TableExtent,
    pub instances: Vec<Instance>,
    #[serde(default)]
    pub removed: Vec<usize>,
}

impl SceneDescription {
    pub fn empty(seed: u64, table: TableExtent) -> Self {
        Self { version: SCENE_SCHEMA_VERSION, seed, table, instances: Vec::new(), removed: Vec::new() }
    }

    pub fn remaining(&self) -> impl Iterator<Item = &Instance> {
        self.instances.iter().filter(|i| !self.removed.contains(&i.instance_id))
    }

    pub fn is_removed(&self, instance_id: usize) -> bool {
        self.removed.contains(&instance_id)
    }

    pub fn remove(&mut self, instance_id: usize) {
        if !self.removed.contains(&instance_id) {
            self.removed.push(instance_id);
        }
    }

    pub fn instance(&self, instance_id: usize) -> Option<&Instance> {
        self.instances.iter().find(|i| i.instance_id == instance_id)
    }

    /// The remaining instance of `model_id`, if any.
    pub fn find_model(&self, model_id: &str) -> Option<&Instance> {
        self.remaining().find(|i| i.model_id == model_id)
    }

    /// World-frame cloud of one instance.
    pub fn instance_cloud(&self, models: &[ObjectModel], instance_id: usize) -> Result<PointNormalCloud> {
        let inst = self.instance(instance_id).ok_or_else(|| Error::UnknownModel(format!("instance {instance_id}")))?;
        let model = lookup(models, &inst.model_id)?;
        Ok(model.cloud.transformed(&inst.pose))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let scene: SceneDescription = serde_json::from_str(s)?;
        if scene.version != SCENE_SCHEMA_VERSION {
            return Err(Error::SchemaVersion(scene.version));
        }
        Ok(scene)
    }
}

pub fn lookup<'a>(models: &'a [ObjectModel], id: &str) -> Result<&'a ObjectModel> {
    models.iter().find(|m| m.id == id).ok_or_else(|| Error::UnknownModel(id.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClutterConfig {
    pub min_count: usize,
    pub max_count: usize,
    pub table: TableExtent,
    /// Minimum free distance between footprints.
    pub min_gap: f64,
    pub max_retries: usize,
}

impl Default for ClutterConfig {
    fn default() -> Self {
        Self { min_count: 6, max_count: 9, table: TableExtent::default(), min_gap: 0.02, max_retries: 5000 }
    }
}

/// Rejection-sampled placement of distinct models on the table: random
/// resting face (boxes), random yaw, random position. `count = None` draws the
/// count from `[min_count, max_count]`.
pub fn generate_clutter(models: &[ObjectModel], count: Option<usize>, seed: u64, cfg: &ClutterConfig) -> Result<SceneDescription> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = match count {
        Some(c) => c,
        None => {
            if cfg.min_count > cfg.max_count {
                return Err(Error::InvalidParameter("min_count > max_count".into()));
            }
            rng.random_range(cfg.min_count..=cfg.max_count)
        }
    };
    if count < cfg.min_count {
        return Err(Error::InvalidParameter(format!("{count} objects requested, at least {} required", cfg.min_count)));
    }
    if count > models.len() {
        return Err(Error::InvalidParameter(format!("{count} objects requested, {} models available", models.len())));
    }
    let mut order: Vec<usize> = (0..models.len()).collect();
    order.shuffle(&mut rng);
    order.truncate(count);

    let table = cfg.table;
    let mut scene = SceneDescription::empty(seed, table);
    let mut placed: Vec<(Vec3, f64)> = Vec::new();
    let mut tries = 0;
    for &mi in &order {
        let model = &models[mi];
        loop {
            tries += 1;
            if tries > cfg.max_retries {
                return Err(Error::Placement { placed: placed.len(), requested: count });
            }
            let base = match model.primitive {
                Some(Primitive::Box { .. }) => match rng.random_range(0..3) {
                    0 => Rotation3::identity(),
                    1 => Rotation3::from_axis_angle(&Vec3::x_axis(), FRAC_PI_2),
                    _ => Rotation3::from_axis_angle(&Vec3::y_axis(), FRAC_PI_2),
                },
                _ => Rotation3::identity(),
            };
            let yaw = rng.random_range(0.0..TAU);
            let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), yaw) * base;
            let r = model.footprint_radius(&rot);
            let (lo, hi) = ([table.min[0] + r, table.min[1] + r], [table.max[0] - r, table.max[1] - r]);
            if lo[0] >= hi[0] || lo[1] >= hi[1] {
                continue;
            }
            let x = rng.random_range(lo[0]..hi[0]);
            let y = rng.random_range(lo[1]..hi[1]);
            let c = Vec3::new(x, y, table.z + model.rest_height(&rot));
            if placed.iter().any(|(o, ro)| (o.xy() - c.xy()).norm() < r + ro + cfg.min_gap) {
                continue;
            }
            placed.push((c, r));
            scene.instances.push(Instance {
                instance_id: scene.instances.len(),
                model_id: model.id.clone(),
                pose: RigidTransform::new(rot, c),
            });
            break;
        }
    }
    Ok(scene)
}
