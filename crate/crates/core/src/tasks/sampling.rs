//! Start/goal sampling on the agent-dilated grid.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::SceneContext;
use crate::geometry::{astar, Cell, PlannedPath, WorldPoint};
use crate::sim::Pose;

pub const DEFAULT_SAMPLING_BUDGET: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConstraints {
    pub min_geodesic: f64,
    pub max_geodesic: f64,
    /// Attempts before giving up.
    pub budget: usize,
}

impl Default for PathConstraints {
    fn default() -> Self {
        Self {
            min_geodesic: 3.0,
            max_geodesic: 15.0,
            budget: DEFAULT_SAMPLING_BUDGET,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("scene {scene_id}: no start/goal pair found after {attempts} attempts")]
    SamplingExhausted { scene_id: String, attempts: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub start: Pose,
    pub goal: WorldPoint,
    pub path: PlannedPath,
}

/// Heading of the first non-degenerate path segment, or 0.
pub fn initial_heading(path: &PlannedPath) -> f64 {
    let w = &path.waypoints;
    w.windows(2)
        .find(|p| p[0] != p[1])
        .map_or(0.0, |p| p[0].bearing_to(&p[1]))
}

/// Uniform sampler over the free cells of the dilated grid.
pub struct PathSampler<'a> {
    ctx: &'a SceneContext,
    free: Vec<Cell>,
}

impl<'a> PathSampler<'a> {
    pub fn new(ctx: &'a SceneContext) -> Self {
        Self {
            ctx,
            free: ctx.dilated.free_cells().collect(),
        }
    }

    pub fn random_free_point(&self, rng: &mut impl Rng) -> Option<WorldPoint> {
        if self.free.is_empty() {
            return None;
        }
        Some(
            self.ctx
                .dilated
                .cell_center(self.free[rng.gen_range(0..self.free.len())]),
        )
    }

    fn exhausted(&self, c: &PathConstraints) -> SamplingError {
        SamplingError::SamplingExhausted {
            scene_id: self.ctx.scene.scene_id.clone(),
            attempts: c.budget,
        }
    }

    /// Draw a goal whose geodesic distance from `start` lies within the
    /// constraints and that `accept` approves.
    pub fn sample_goal_from(
        &self,
        start: WorldPoint,
        c: &PathConstraints,
        rng: &mut impl Rng,
        mut accept: impl FnMut(WorldPoint) -> bool,
    ) -> Result<(WorldPoint, PlannedPath), SamplingError> {
        for _ in 0..c.budget {
            let Some(goal) = self.random_free_point(rng) else {
                break;
            };
            if let Some(path) = self.try_pair(start, goal, c) {
                if accept(goal) {
                    return Ok((goal, path));
                }
            }
        }
        Err(self.exhausted(c))
    }

    /// Draw a start/goal pair; `accept` may veto goals (for example when
    /// no target object is close enough).
    pub fn sample(
        &self,
        c: &PathConstraints,
        rng: &mut impl Rng,
        mut accept: impl FnMut(WorldPoint) -> bool,
    ) -> Result<SampledPath, SamplingError> {
        for _ in 0..c.budget {
            let (Some(start), Some(goal)) = (self.random_free_point(rng), self.random_free_point(rng))
            else {
                break;
            };
            if let Some(path) = self.try_pair(start, goal, c) {
                if accept(goal) {
                    let yaw = initial_heading(&path);
                    return Ok(SampledPath {
                        start: Pose::new(start.x, start.y, yaw),
                        goal,
                        path,
                    });
                }
            }
        }
        Err(self.exhausted(c))
    }

    fn try_pair(&self, start: WorldPoint, goal: WorldPoint, c: &PathConstraints) -> Option<PlannedPath> {
        // geodesic >= euclidean, so far pairs can be rejected without planning
        if start.distance(&goal) > c.max_geodesic {
            return None;
        }
        let path = astar(&self.ctx.dilated, start, goal).ok()?;
        (path.length >= c.min_geodesic && path.length <= c.max_geodesic).then_some(path)
    }
}

/// Sample a start pose, goal and reference path, deterministic per seed.
pub fn sample_path(
    ctx: &SceneContext,
    constraints: &PathConstraints,
    seed: u64,
) -> Result<SampledPath, SamplingError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PathSampler::new(ctx).sample(constraints, &mut rng, |_| true)
}
