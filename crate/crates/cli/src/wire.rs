//! JSON text frames exchanged over `/ws`.
//!
//! Every frame is an [`Envelope`]: `{"v": 1, "seq": n, "type": ..., "payload": ...}`.
//! Client sequence numbers must increase per connection; the server acks each
//! input with its number. Server frames carry their own increasing numbers.

use serde::{Deserialize, Serialize};
use telegrasp_core::geometry::Vec3;
use telegrasp_teleop::Wrench;

use crate::commands::PoseJson;

pub const WIRE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub v: u32,
    pub seq: u64,
    #[serde(flatten)]
    pub body: Body,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum Body {
    State(Box<StateSnapshot>),
    SelectObject { object_id: String },
    /// Where the operator's hand holds the device; the device is pulled
    /// toward it. Orientation as `[w, x, y, z]`; `None` leaves it free.
    DeviceInput { position: Vec3, orientation: Option<[f64; 4]> },
    /// `None` flips the current mode.
    ToggleGuidance { enabled: Option<bool> },
    GripperCmd { action: GripperAction },
    /// Asks for the driver lease held by another client.
    Takeover,
    Ack { ack_seq: u64, accepted: bool, reason: Option<String> },
    Warning { message: String, ack_seq: Option<u64>, object_id: Option<String> },
}

impl Body {
    pub fn is_client_input(&self) -> bool {
        matches!(
            self,
            Body::SelectObject { .. } | Body::DeviceInput { .. } | Body::ToggleGuidance { .. } | Body::GripperCmd { .. } | Body::Takeover
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperAction {
    Open,
    Close,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CloudUpdate {
    Full { version: u64, points: Vec<[f32; 3]>, normals: Vec<[f32; 3]> },
    /// The `base` cloud without the `removed` indices (order kept), followed
    /// by the added points.
    Delta { base: u64, version: u64, removed: Vec<u32>, points: Vec<[f32; 3]>, normals: Vec<[f32; 3]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectEntry {
    pub id: String,
    pub name: String,
    /// False once a selection of it was rejected or it was cleared.
    pub available: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseWire {
    pub position: Vec3,
    /// `[w, x, y, z]`.
    pub orientation: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspMarker {
    pub id: usize,
    pub position: Vec3,
    pub approach: Vec3,
    pub closing: Vec3,
    pub width: f64,
    pub score: f64,
    pub dynamic_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripperState {
    pub closed: bool,
    pub holding: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastInput {
    pub client: u64,
    pub seq: u64,
    /// Simulation tick at which it was applied.
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub tick: u64,
    pub t: f64,
    /// Present only when the cloud changed, or in a client's first frame.
    pub cloud: Option<CloudUpdate>,
    pub objects: Vec<ObjectEntry>,
    pub selection: Option<String>,
    /// Pose hypotheses of the selection, best first.
    pub poses: Vec<PoseJson>,
    pub grasps: Vec<GraspMarker>,
    pub best_grasp: Option<usize>,
    /// Guidance path as a polyline.
    pub trajectory: Option<Vec<Vec3>>,
    pub device: PoseWire,
    pub robot: PoseWire,
    pub f_r: Wrench,
    pub f_star: Wrench,
    /// Coupling and guidance torques on the device, operator excluded.
    pub feedback: Wrench,
    /// Torques commanded to the robot.
    pub robot_command: Wrench,
    pub operator_wrench: Wrench,
    pub guidance: bool,
    pub gripper: GripperState,
    /// Perception running for the selection.
    pub busy: bool,
    pub driver: Option<u64>,
    pub last_input: Option<LastInput>,
    pub warnings: Vec<String>,
    /// The receiving client's id; set in its first frame only.
    pub you: Option<u64>,
}

impl Envelope {
    pub fn new(seq: u64, body: Body) -> Self {
        Self { v: WIRE_VERSION, seq, body }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("wire types always serialize")
    }

    /// Parses a frame and checks its schema version.
    pub fn parse(text: &str) -> Result<Self, String> {
        let env: Envelope = serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))?;
        if env.v != WIRE_VERSION {
            return Err(format!("unsupported schema version {} (expected {WIRE_VERSION})", env.v));
        }
        Ok(env)
    }
}
