//! Episode execution for a cylindrical agent on an occupancy raster: hybrid
//! actions, swept collision with sliding, Strict / TelHop modes, range-scan
//! sensing and 50 ms trajectory logging.

mod engine;
mod sensing;
mod trajectory;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{normalize_angle, WorldPoint};

pub use engine::{first_contact, Simulator, StepResult};
pub use sensing::{footprint_entry, sense, Detection, Observation, RangeReading, SCAN_RAYS};
pub use trajectory::{
    parse_csv, samples_to_csv, CollisionEvent, CsvError, DoneReason, Sample, Trajectory, TrajectoryMeta,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentBody {
    pub radius: f64,
    pub height: f64,
    pub max_linear_speed: f64,
    pub max_angular_speed: f64,
}

impl Default for AgentBody {
    fn default() -> Self {
        Self {
            radius: 0.30,
            height: 1.50,
            max_linear_speed: 1.0,
            max_angular_speed: PI / 2.0,
        }
    }
}

impl AgentBody {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = [
            self.radius,
            self.height,
            self.max_linear_speed,
            self.max_angular_speed,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(format!("agent body {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Heading in `[-pi, pi)`, counter-clockwise from +x.
    pub yaw: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn position(&self) -> WorldPoint {
        WorldPoint::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yaw.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Primitive {
    Forward,
    TurnLeft,
    TurnRight,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    Discrete { primitive: Primitive },
    Continuous { v: f64, omega: f64, dt: f64 },
    WaypointHop { target: WorldPoint },
    OracleQuery { text: String },
}

impl Action {
    pub fn forward() -> Self {
        Action::Discrete {
            primitive: Primitive::Forward,
        }
    }

    pub fn stop() -> Self {
        Action::Discrete {
            primitive: Primitive::Stop,
        }
    }

    pub fn is_stop(&self) -> bool {
        matches!(
            self,
            Action::Discrete {
                primitive: Primitive::Stop
            }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Strict,
    TelHop,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Strict => "strict",
            Mode::TelHop => "telhop",
        })
    }
}

/// Magnitudes of the discrete primitives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveConfig {
    /// FORWARD distance, meters.
    pub forward_distance: f64,
    /// TURN_LEFT / TURN_RIGHT angle, radians.
    pub turn_angle: f64,
}

impl Default for PrimitiveConfig {
    fn default() -> Self {
        Self {
            forward_distance: 0.25,
            turn_angle: PI / 12.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub mode: Mode,
    pub allow_sliding: bool,
    /// Blocked displacement per step that counts as a collision, meters.
    pub collision_thresh: f64,
    pub max_steps: usize,
    pub success_thresh: f64,
    /// Integration and logging interval, seconds.
    pub substep: f64,
    pub primitives: PrimitiveConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Strict,
            allow_sliding: true,
            collision_thresh: 0.10,
            max_steps: 200,
            success_thresh: 3.0,
            substep: 0.05,
            primitives: PrimitiveConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |what: &str| Err(SimError::InvalidConfig(what.to_string()));
        if !(self.collision_thresh.is_finite() && self.collision_thresh > 0.0) {
            return bad("collision_thresh must be > 0");
        }
        if self.max_steps < 1 {
            return bad("max_steps must be >= 1");
        }
        if !(self.substep.is_finite() && self.substep > 0.0) {
            return bad("substep must be > 0");
        }
        if !(self.success_thresh.is_finite() && self.success_thresh > 0.0) {
            return bad("success_thresh must be > 0");
        }
        let p = self.primitives;
        if !(p.forward_distance > 0.0 && p.turn_angle > 0.0) {
            return bad("primitive magnitudes must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid episode: {0}")]
    InvalidEpisode(String),
    #[error("unsupported action: {0}")]
    UnsupportedAction(&'static str),
    #[error("episode already finished")]
    EpisodeFinished,
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("no active episode")]
    NoEpisode,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
