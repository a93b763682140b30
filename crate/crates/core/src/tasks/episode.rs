//! Episode records and their invariants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::SceneContext;
use crate::geometry::{PlannedPath, WorldPoint};
use crate::sim::{Detection, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    Fine,
    Coarse,
    VisualRef,
    LongHorizon,
    Dialogue,
}

impl TaskType {
    pub const ALL: [TaskType; 5] = [
        TaskType::Fine,
        TaskType::Coarse,
        TaskType::VisualRef,
        TaskType::LongHorizon,
        TaskType::Dialogue,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::Fine => "fine",
            TaskType::Coarse => "coarse",
            TaskType::VisualRef => "visual_ref",
            TaskType::LongHorizon => "long_horizon",
            TaskType::Dialogue => "dialogue",
        }
    }

    /// Coarse, visual-reference and dialogue episodes share trajectories.
    pub fn uses_coarse_trajectories(self) -> bool {
        matches!(self, TaskType::Coarse | TaskType::VisualRef | TaskType::Dialogue)
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task type `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub point: WorldPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_object_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarseInstructions {
    pub formal: String,
    pub natural: String,
    pub casual: String,
}

impl CoarseInstructions {
    pub fn all(&self) -> [&str; 3] {
        [&self.formal, &self.natural, &self.casual]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSnapshot {
    pub captured_at: Pose,
    pub visible: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InstructionBundle {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse: Option<CoarseInstructions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_snapshot: Option<GoalSnapshot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_instructions: Option<Vec<String>>,
    #[serde(default)]
    pub oracle_enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    pub scene_id: String,
    pub task_type: TaskType,
    pub instruction_bundle: InstructionBundle,
    pub start: Pose,
    pub goals: Vec<Goal>,
    pub reference_path: PlannedPath,
    pub success_thresh: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("episode {episode_id}: {reason}")]
pub struct EpisodeError {
    pub episode_id: String,
    pub reason: String,
}

impl Episode {
    pub fn final_goal(&self) -> WorldPoint {
        self.goals.last().expect("episodes have at least one goal").point
    }

    fn fail(&self, reason: impl Into<String>) -> EpisodeError {
        EpisodeError {
            episode_id: self.episode_id.clone(),
            reason: reason.into(),
        }
    }

    /// Instruction fields match the task type.
    pub fn check_bundle(&self) -> Result<(), EpisodeError> {
        let b = &self.instruction_bundle;
        let want = |fine, coarse, snap, subs, oracle| {
            b.fine.is_some() == fine
                && b.coarse.is_some() == coarse
                && b.goal_snapshot.is_some() == snap
                && b.sub_instructions.is_some() == subs
                && b.oracle_enabled == oracle
        };
        let ok = match self.task_type {
            TaskType::Fine => want(true, false, false, false, false),
            TaskType::Coarse => want(false, true, false, false, false),
            TaskType::VisualRef => want(false, true, true, false, false),
            TaskType::Dialogue => want(false, true, false, false, true),
            TaskType::LongHorizon => {
                want(false, false, false, true, false)
                    && b.sub_instructions.as_ref().map(Vec::len) == Some(self.goals.len())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(self.fail(format!(
                "instruction fields do not match task type {}",
                self.task_type
            )))
        }
    }

    /// Full invariant check against the scene the episode belongs to.
    pub fn validate(&self, ctx: &SceneContext) -> Result<(), EpisodeError> {
        if self.scene_id != ctx.scene.scene_id {
            return Err(self.fail("scene mismatch"));
        }
        let n = self.goals.len();
        let count_ok = match self.task_type {
            TaskType::LongHorizon => (2..=3).contains(&n),
            _ => n == 1,
        };
        if !count_ok {
            return Err(self.fail(format!("{n} goals for task {}", self.task_type)));
        }
        if !(self.success_thresh.is_finite() && self.success_thresh > 0.0) {
            return Err(self.fail("success_thresh must be > 0"));
        }
        let free = |p: WorldPoint| ctx.dilated.is_free_point(p);
        if !free(self.start.position()) {
            return Err(self.fail("start is not free on the dilated grid"));
        }
        for (i, g) in self.goals.iter().enumerate() {
            if !free(g.point) {
                return Err(self.fail(format!("goal {i} is not free on the dilated grid")));
            }
            if let Some(id) = &g.target_object_id {
                if ctx.scene.object(id).is_none() {
                    return Err(self.fail(format!("goal {i} names unknown object {id}")));
                }
            }
        }
        let wps = &self.reference_path.waypoints;
        if wps.first() != Some(&self.start.position()) || wps.last() != Some(&self.final_goal()) {
            return Err(self.fail("reference path does not run from start to final goal"));
        }
        // goals appear in order along the path
        let mut from = 0;
        for (i, g) in self.goals.iter().enumerate() {
            match wps[from..].iter().position(|w| *w == g.point) {
                Some(k) => from += k,
                None => return Err(self.fail(format!("reference path skips goal {i}"))),
            }
        }
        for pair in wps.windows(2) {
            let a = ctx.dilated.cell_of(pair[0]);
            let b = ctx.dilated.cell_of(pair[1]);
            let adjacent = match (a, b) {
                (Some(a), Some(b)) => {
                    a.row.abs_diff(b.row) <= 1 && a.col.abs_diff(b.col) <= 1
                }
                _ => false,
            };
            if !adjacent || !free(pair[1]) {
                return Err(self.fail("reference path leaves the free lattice"));
            }
        }
        self.check_bundle()
    }
}
