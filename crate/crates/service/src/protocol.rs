//! Line-delimited JSON wire messages.
//!
//! Every message is one JSON object per line:
//! `{"kind": ..., "session_id": ..., "seq": ..., "payload": {...}}`.
//! Clients send `hello`, `reset`, `action` and `oracle_query`; the service
//! answers each with exactly one of `hello`, `observation`, `oracle_answer`,
//! `done` or `error`. Reply payloads carry `reply_to`, the request seq.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use embodinav_core::env::Scene;
use embodinav_core::eval::EpisodeResult;
use embodinav_core::geometry::{OccupancyGrid, PlannedPath, WorldPoint};
use embodinav_core::sim::{Action, DoneReason, Mode, Observation, Pose, TrajectoryMeta};
use embodinav_core::tasks::{Episode, InstructionBundle, TaskType};

use crate::oracle::OracleAnswer;

pub const PROTOCOL_VERSION: u32 = 1;
/// Longest accepted message line, bytes.
pub const MAX_LINE: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Hello,
    Reset,
    Observation,
    Action,
    OracleQuery,
    OracleAnswer,
    Done,
    Error,
}

impl Kind {
    pub fn is_client_kind(self) -> bool {
        matches!(self, Kind::Hello | Kind::Reset | Kind::Action | Kind::OracleQuery)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireMessage {
    pub kind: Kind,
    #[serde(default)]
    pub session_id: Option<String>,
    pub seq: u64,
    #[serde(default)]
    pub payload: Value,
}

impl WireMessage {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("wire messages serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Not JSON, not UTF-8, or too long.
    Malformed,
    /// JSON that does not match the message or payload schema.
    SchemaInvalid,
    /// seq not greater than the previous one.
    BadSeq,
    SessionMismatch,
    /// A kind that is not legal in the current session state.
    UnexpectedKind,
    UnknownEpisode,
    NoEpisode,
    EpisodeActive,
    EpisodeFinished,
    InvalidAction,
    UnsupportedAction,
    OracleDisabled,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: ErrorCode,
    pub message: String,
    pub offending_seq: Option<u64>,
}

// client payloads

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelloRequest {
    #[serde(default)]
    pub client: Option<String>,
    #[serde(default)]
    pub protocol: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetRequest {
    pub episode_id: String,
    /// Overrides the service mode for this episode.
    #[serde(default)]
    pub mode: Option<Mode>,
    /// Include the reference path in the episode view.
    #[serde(default)]
    pub debug: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleQueryRequest {
    pub text: String,
}

// service payloads

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloReply {
    pub reply_to: u64,
    pub protocol: u32,
    pub server: String,
    pub mode: Mode,
    pub episodes: usize,
}

/// Occupancy raster for display, top row (largest y) first, `#` occupied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapView {
    pub resolution: f64,
    pub origin: WorldPoint,
    pub width: usize,
    pub height: usize,
    pub rows: Vec<String>,
}

impl MapView {
    pub fn of(grid: &OccupancyGrid) -> Self {
        let (w, h) = (grid.width(), grid.height());
        let cells = grid.cells();
        let rows = (0..h)
            .rev()
            .map(|r| {
                cells[r * w..(r + 1) * w]
                    .iter()
                    .map(|&o| if o { '#' } else { '.' })
                    .collect()
            })
            .collect();
        Self {
            resolution: grid.resolution(),
            origin: grid.origin(),
            width: w,
            height: h,
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeView {
    pub episode_id: String,
    pub scene_id: String,
    pub task_type: TaskType,
    pub instructions: InstructionBundle,
    pub start: Pose,
    pub success_thresh: f64,
    pub mode: Mode,
    pub max_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_path: Option<PlannedPath>,
}

impl EpisodeView {
    pub fn of(ep: &Episode, mode: Mode, max_steps: usize, debug: bool) -> Self {
        Self {
            episode_id: ep.episode_id.clone(),
            scene_id: ep.scene_id.clone(),
            task_type: ep.task_type,
            instructions: ep.instruction_bundle.clone(),
            start: ep.start,
            success_thresh: ep.success_thresh,
            mode,
            max_steps,
            reference_path: debug.then(|| ep.reference_path.clone()),
        }
    }
}

/// Reply to `reset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetReply {
    pub reply_to: u64,
    pub observation: Observation,
    pub episode: EpisodeView,
    pub scene: Scene,
    pub map: MapView,
}

/// Reply to an `action` that did not end the episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReply {
    pub reply_to: u64,
    pub observation: Observation,
    pub collided: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReply {
    pub reply_to: u64,
    pub answer: OracleAnswer,
    pub observation: Observation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoneReply {
    pub reply_to: u64,
    pub done_reason: DoneReason,
    pub collided: bool,
    pub observation: Observation,
    /// Set when the finishing request was an oracle query.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<OracleAnswer>,
    pub result: EpisodeResult,
    /// `t,x,y,yaw` log at the simulator cadence.
    pub trajectory_csv: String,
    pub meta: TrajectoryMeta,
}

/// Parse the action payload of an `action` message.
pub fn parse_action(payload: &Value) -> Result<Action, serde_json::Error> {
    serde_json::from_value(payload.clone())
}
