//! Trajectory log and its CSV form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Action, Pose};
use crate::geometry::WorldPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneReason {
    Stopped,
    Collision,
    StepLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    /// Simulated time at the end of the offending step.
    pub t: f64,
    /// Center of the occupied cell last touched during the step.
    pub contact_point: WorldPoint,
    pub blocked_displacement: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub episode_id: String,
    pub samples: Vec<Sample>,
    pub actions: Vec<Action>,
    /// Blocked displacement accumulated by each executed action, meters.
    pub blocked_per_step: Vec<f64>,
    pub collision_events: Vec<CollisionEvent>,
    pub stopped: bool,
    pub stop_pose: Option<Pose>,
    pub done_reason: Option<DoneReason>,
}

impl Trajectory {
    /// Pose at which the episode ended: the STOP pose if one was issued,
    /// otherwise the last sample.
    pub fn final_pose(&self) -> Option<Pose> {
        self.stop_pose.or_else(|| self.samples.last().map(|s| s.pose))
    }

    pub fn positions(&self) -> Vec<WorldPoint> {
        self.samples.iter().map(|s| s.pose.position()).collect()
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn to_csv(&self) -> String {
        samples_to_csv(&self.samples)
    }

    pub fn meta(&self, mode: super::Mode) -> TrajectoryMeta {
        TrajectoryMeta {
            episode_id: self.episode_id.clone(),
            mode,
            stopped: self.stopped,
            done_reason: self.done_reason,
            num_actions: self.actions.len(),
            num_collisions: self.collision_events.len(),
        }
    }
}

/// Sidecar stored next to a trajectory CSV (`<episode_id>.meta.json`) with
/// the facts the pose log cannot carry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryMeta {
    pub episode_id: String,
    pub mode: super::Mode,
    pub stopped: bool,
    pub done_reason: Option<DoneReason>,
    pub num_actions: usize,
    pub num_collisions: usize,
}

/// `t,x,y,yaw` with six decimals, one row per sample.
pub fn samples_to_csv(samples: &[Sample]) -> String {
    let mut out = String::from("t,x,y,yaw\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6}",
            s.t, s.pose.x, s.pose.y, s.pose.yaw
        );
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CsvError {
    #[error("missing or wrong header, expected `t,x,y,yaw`")]
    Header,
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
}

pub fn parse_csv(text: &str) -> Result<Vec<Sample>, CsvError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "t,x,y,yaw" => {}
        _ => return Err(CsvError::Header),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = |message: String| CsvError::Row {
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(row(format!("expected 4 fields, got {}", fields.len())));
        }
        let mut v = [0.0; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f
                .trim()
                .parse::<f64>()
                .map_err(|e| row(format!("`{f}`: {e}")))?;
            if !slot.is_finite() {
                return Err(row(format!("non-finite value `{f}`")));
            }
        }
        if let Some(prev) = out.last().map(|s: &Sample| s.t) {
            if v[0] <= prev {
                return Err(row("timestamps must strictly increase".into()));
            }
        }
        out.push(Sample {
            t: v[0],
            pose: Pose {
                x: v[1],
                y: v[2],
                yaw: v[3],
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_at_six_decimals() {
        let samples = vec![
            Sample {
                t: 0.0,
                pose: Pose::new(1.0, 2.0, 0.5),
            },
            Sample {
                t: 0.05,
                pose: Pose::new(1.0123456789, 2.0, -0.25),
            },
        ];
        let text = samples_to_csv(&samples);
        assert!(text.starts_with("t,x,y,yaw\n0.000000,1.000000,2.000000,0.500000\n"));
        let back = parse_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].pose.x, 1.012346);
        assert_eq!(samples_to_csv(&back), text);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert_eq!(parse_csv("a,b\n"), Err(CsvError::Header));
        assert!(matches!(
            parse_csv("t,x,y,yaw\n0,1,2\n"),
            Err(CsvError::Row { line: 2, .. })
        ));
        assert!(parse_csv("t,x,y,yaw\n0.1,0,0,0\n0.1,0,0,0\n").is_err());
    }
}
