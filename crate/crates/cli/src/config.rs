use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use telegrasp_sim::{ClutterConfig, EpisodeConfig};

pub const ENV_PREFIX: &str = "TELEGRASP_";

/// Where the scene comes from: a seeded clutter or a saved description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSource {
    pub seed: u64,
    pub file: Option<PathBuf>,
    /// `None` draws the count from the clutter range.
    pub objects: Option<usize>,
    pub clutter: ClutterConfig,
}

impl Default for SceneSource {
    fn default() -> Self {
        Self { seed: 1, file: None, objects: Some(6), clutter: ClutterConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub broadcast_hz: f64,
    /// Grasp markers per state message, best dynamic score first.
    pub max_grasp_markers: usize,
    /// Outgoing frames buffered per client before state frames are dropped.
    pub client_queue: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { bind: "127.0.0.1:8765".into(), broadcast_hz: 30.0, max_grasp_markers: 64, client_queue: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub scene: SceneSource,
    /// Surface samples per m² of the object library.
    pub model_density: f64,
    pub episode: EpisodeConfig,
    pub service: ServiceConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { scene: SceneSource::default(), model_density: 40_000.0, episode: EpisodeConfig::default(), service: ServiceConfig::default() }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        let e = &self.episode;
        e.pose.validate()?;
        e.grasp.validate()?;
        e.teleop.validate()?;
        e.rerank.validate()?;
        if !(e.resolution > 0.0) {
            bail!("episode.resolution must be positive");
        }
        if !(self.model_density > 0.0 && self.model_density.is_finite()) {
            bail!("model_density must be positive");
        }
        if !(self.service.broadcast_hz > 0.0 && self.service.broadcast_hz <= 1000.0) {
            bail!("service.broadcast_hz must be in (0, 1000]");
        }
        if self.service.client_queue == 0 {
            bail!("service.client_queue must be at least 1");
        }
        Ok(())
    }

    /// Reads `path` (TOML, or JSON by extension) if given, applies
    /// `TELEGRASP_*` overrides from `env`, rejects unknown keys and validates.
    pub fn load(path: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut root = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                if p.extension().is_some_and(|x| x == "json") {
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
                } else {
                    let t: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
                    serde_json::to_value(t)?
                }
            }
            None => Value::Object(Default::default()),
        };
        let mut overrides: Vec<_> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        overrides.sort();
        for (key, raw) in overrides {
            let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(str::to_lowercase).collect();
            if path.iter().any(String::is_empty) {
                bail!("malformed override {key}");
            }
            set_path(&mut root, &path, parse_env_value(&raw)).with_context(|| format!("applying {key}"))?;
        }
        let cfg: SessionConfig = serde_json::from_value(root).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A TOML literal if it parses as one (`8`, `true`, `[0.1, 0, 0.3]`), the
/// raw string otherwise.
fn parse_env_value(raw: &str) -> Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").and_then(|v| serde_json::to_value(v).ok()).unwrap_or(Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

fn set_path(root: &mut Value, path: &[String], value: Value) -> Result<()> {
    let mut node = root;
    for key in &path[..path.len() - 1] {
        if !node.is_object() {
            bail!("{key} is not a table");
        }
        node = node.as_object_mut().unwrap().entry(key.clone()).or_insert_with(|| Value::Object(Default::default()));
    }
    match node.as_object_mut() {
        Some(map) => {
            map.insert(path[path.len() - 1].clone(), value);
            Ok(())
        }
        None => bail!("parent of {} is not a table", path[path.len() - 1]),
    }
}
