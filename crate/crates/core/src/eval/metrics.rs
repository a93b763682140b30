//! Per-episode scoring.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::SceneContext;
use crate::geometry::{nearest_free_point, polyline_length, DistanceField, WorldPoint};
use crate::sim::{parse_csv, CsvError, DoneReason, Pose, Trajectory, TrajectoryMeta};
use crate::tasks::{Episode, TaskType};

use super::dtw::{downsample, ndtw, DTW_SPACING};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("trajectory {trajectory} does not belong to episode {episode}")]
    MismatchedEpisode { episode: String, trajectory: String },
    #[error("episode {0} has an empty trajectory")]
    EmptyTrajectory(String),
    #[error("goal of episode {0} is not reachable on the dilated grid")]
    GoalUnreachable(String),
    #[error("scene mismatch for episode {0}")]
    SceneMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    #[serde(rename = "TL")]
    pub tl: f64,
    #[serde(rename = "NE")]
    pub ne: f64,
    #[serde(rename = "SR")]
    pub sr: f64,
    #[serde(rename = "OSR")]
    pub osr: f64,
    #[serde(rename = "SPL")]
    pub spl: f64,
    #[serde(rename = "nDTW")]
    pub ndtw: f64,
    #[serde(rename = "CR")]
    pub cr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode_id: String,
    pub task_type: TaskType,
    /// Goal `i` counts once the path comes within the success threshold
    /// (geodesic) of it after all earlier goals were reached. Single-goal
    /// episodes hold the stop-pose success.
    pub per_goal_reached: Vec<bool>,
    pub stop_pose: Pose,
    pub stopped: bool,
    pub done_reason: Option<DoneReason>,
    pub num_actions: usize,
    pub num_collisions: usize,
    /// Success flag S.
    pub success: bool,
    /// Reference path length L, meters.
    pub reference_length: f64,
    /// Traversed length P, meters.
    pub path_length: f64,
    pub metrics: EpisodeMetrics,
}

impl EpisodeResult {
    /// Long-horizon success: every goal reached and a successful final stop.
    pub fn all_goals_success(&self) -> bool {
        self.success && self.per_goal_reached.iter().all(|r| *r)
    }
}

/// Geodesic distance from `p` to the field's goal. Points in cells that are
/// not free on the dilated grid are first snapped to the nearest free cell
/// center, adding the snap distance.
pub fn geodesic_with_snap(ctx: &SceneContext, field: &DistanceField, p: WorldPoint) -> Option<f64> {
    if ctx.dilated.is_free_point(p) {
        return field.geodesic_from(p);
    }
    let q = nearest_free_point(&ctx.dilated, p)?;
    Some(p.distance(&q) + field.geodesic_from(q)?)
}

/// Pose-based facts about an episode run, independent of the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary<'a> {
    pub samples: &'a [crate::sim::Sample],
    pub stopped: bool,
    pub stop_pose: Option<Pose>,
    pub done_reason: Option<DoneReason>,
    pub num_actions: usize,
    pub num_collisions: usize,
}

impl<'a> RunSummary<'a> {
    pub fn of(t: &'a Trajectory) -> Self {
        Self {
            samples: &t.samples,
            stopped: t.stopped,
            stop_pose: t.stop_pose,
            done_reason: t.done_reason,
            num_actions: t.actions.len(),
            num_collisions: t.collision_events.len(),
        }
    }
}

pub fn score_episode(
    episode: &Episode,
    trajectory: &Trajectory,
    ctx: &SceneContext,
) -> Result<EpisodeResult, EvalError> {
    if trajectory.episode_id != episode.episode_id {
        return Err(EvalError::MismatchedEpisode {
            episode: episode.episode_id.clone(),
            trajectory: trajectory.episode_id.clone(),
        });
    }
    score_run(episode, &RunSummary::of(trajectory), ctx)
}

/// Score a trajectory as it is logged on disk: the CSV samples plus the
/// sidecar. Live sessions score through this path as well, so both agree
/// field for field.
pub fn score_logged(
    episode: &Episode,
    csv: &str,
    meta: &TrajectoryMeta,
    ctx: &SceneContext,
) -> Result<EpisodeResult, LoggedEvalError> {
    if meta.episode_id != episode.episode_id {
        return Err(EvalError::MismatchedEpisode {
            episode: episode.episode_id.clone(),
            trajectory: meta.episode_id.clone(),
        }
        .into());
    }
    let samples = parse_csv(csv)?;
    let run = RunSummary {
        samples: &samples,
        stopped: meta.stopped,
        stop_pose: None,
        done_reason: meta.done_reason,
        num_actions: meta.num_actions,
        num_collisions: meta.num_collisions,
    };
    Ok(score_run(episode, &run, ctx)?)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoggedEvalError {
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Score a run described by its samples and counters.
pub fn score_run(episode: &Episode, run: &RunSummary, ctx: &SceneContext) -> Result<EpisodeResult, EvalError> {
    if episode.scene_id != ctx.scene.scene_id {
        return Err(EvalError::SceneMismatch(episode.episode_id.clone()));
    }
    let last = run
        .samples
        .last()
        .ok_or_else(|| EvalError::EmptyTrajectory(episode.episode_id.clone()))?;
    let stop_pose = run.stop_pose.unwrap_or(last.pose);
    let stop = stop_pose.position();
    let thresh = episode.success_thresh;
    let positions: Vec<WorldPoint> = run.samples.iter().map(|s| s.pose.position()).collect();

    let fields: Vec<DistanceField> = episode
        .goals
        .iter()
        .map(|g| DistanceField::new(&ctx.dilated, g.point))
        .collect::<Result<_, _>>()
        .map_err(|_| EvalError::GoalUnreachable(episode.episode_id.clone()))?;
    let final_field = fields.last().expect("episodes have goals");
    let goal = episode.final_goal();

    let tl = polyline_length(&positions);
    let ne = stop.distance(&goal);
    let stop_geo = geodesic_with_snap(ctx, final_field, stop);
    let within = stop_geo.is_some_and(|d| d <= thresh);
    let success = run.stopped
        && run.done_reason != Some(DoneReason::Collision)
        && ctx.dilated.is_free_point(stop)
        && within;
    let osr = within;

    let per_goal_reached = if episode.task_type == TaskType::LongHorizon {
        let mut reached = vec![false; fields.len()];
        let mut next = 0;
        'samples: for p in &positions {
            while next < fields.len() {
                match geodesic_with_snap(ctx, &fields[next], *p) {
                    Some(d) if d <= thresh => {
                        reached[next] = true;
                        next += 1;
                    }
                    _ => continue 'samples,
                }
            }
            break;
        }
        reached
    } else {
        vec![success]
    };

    let l = episode.reference_path.length;
    let s = if success { 1.0 } else { 0.0 };
    let denom = tl.max(l);
    let spl = if denom > 0.0 { s * l / denom } else { s };
    let p_ds = downsample(&positions, DTW_SPACING);
    let r_ds = downsample(&episode.reference_path.waypoints, DTW_SPACING);
    let cr = if run.num_actions == 0 {
        0.0
    } else {
        run.num_collisions as f64 / run.num_actions as f64
    };

    Ok(EpisodeResult {
        episode_id: episode.episode_id.clone(),
        task_type: episode.task_type,
        per_goal_reached,
        stop_pose,
        stopped: run.stopped,
        done_reason: run.done_reason,
        num_actions: run.num_actions,
        num_collisions: run.num_collisions,
        success,
        reference_length: l,
        path_length: tl,
        metrics: EpisodeMetrics {
            tl,
            ne,
            sr: s,
            osr: if osr { 1.0 } else { 0.0 },
            spl,
            ndtw: ndtw(&p_ds, &r_ds, thresh),
            cr,
        },
    })
}
