//! Scheduled-sampling supervision for online training loops.

use rand::Rng;
use serde::{Deserialize, Serialize};

use embodinav_core::env::SceneContext;
use embodinav_core::geometry::{geodesic_distance, WorldPoint};
use embodinav_core::sim::Pose;

/// Distance under which the oracle asks the agent to stop, meters.
pub const ORACLE_STOP_DISTANCE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSource {
    Oracle,
    Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisionStep {
    pub candidates: Vec<WorldPoint>,
    /// Candidate with the smallest geodesic distance to the target; ties go
    /// to the earlier candidate. Unreachable candidates rank last.
    pub oracle_index: usize,
    pub oracle_stop: bool,
    pub sampled_action_source: ActionSource,
}

/// Oracle-to-prediction mixing ratio that decays every `decay_time`
/// iterations: `ratio^(iteration / decay_time + 1)` with integer division.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledSampling {
    pub ratio: f64,
    pub decay_time: u32,
}

impl Default for ScheduledSampling {
    fn default() -> Self {
        Self {
            ratio: 0.85,
            decay_time: 4,
        }
    }
}

impl ScheduledSampling {
    pub fn ratio_at(&self, iteration: u32) -> f64 {
        let k = iteration / self.decay_time.max(1) + 1;
        self.ratio.powi(k as i32).clamp(0.0, 1.0)
    }
}

/// Whether an agent at `p` satisfies the stop condition for `target`.
pub fn oracle_stop(ctx: &SceneContext, p: WorldPoint, target: WorldPoint) -> bool {
    ctx.dilated.is_free_point(p)
        && geodesic_distance(&ctx.dilated, p, target).is_ok_and(|d| d < ORACLE_STOP_DISTANCE)
}

/// # Panics
/// If `candidates` is empty.
pub fn supervise(
    ctx: &SceneContext,
    candidates: &[WorldPoint],
    agent: Pose,
    target: WorldPoint,
    ratio: f64,
    rng: &mut impl Rng,
) -> SupervisionStep {
    assert!(!candidates.is_empty(), "supervise needs at least one candidate");
    let dist = |p: &WorldPoint| geodesic_distance(&ctx.dilated, *p, target).unwrap_or(f64::INFINITY);
    let mut best = 0;
    let mut best_d = dist(&candidates[0]);
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let d = dist(c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    let r = ratio.clamp(0.0, 1.0);
    let source = if rng.gen::<f64>() < r {
        ActionSource::Oracle
    } else {
        ActionSource::Prediction
    };
    SupervisionStep {
        candidates: candidates.to_vec(),
        oracle_index: best,
        oracle_stop: oracle_stop(ctx, agent.position(), target),
        sampled_action_source: source,
    }
}
