//! Procedural objects, seeded clutter on a table, multi-view visibility and
//! the scripted operator that clears a scene through the teleoperation loop.

pub mod adjudicate;
pub mod episode;
pub mod error;
pub mod objects;
pub mod render;
pub mod scene;

pub use adjudicate::{adjudicate_grasp, Adjudication};
pub use episode::{run_clearance_episode, EpisodeConfig, EpisodeLogRecord, EpisodeResult, EpisodeRun, ObjectOutcome, OperatorPolicy};
pub use error::{Error, Result};
pub use objects::{default_library, make_primitive, ObjectModel, Primitive};
pub use render::{default_viewpoints, render_stitched_cloud, StitchedCloud};
pub use scene::{generate_clutter, ClutterConfig, Instance, SceneDescription, TableExtent, SCENE_SCHEMA_VERSION};
