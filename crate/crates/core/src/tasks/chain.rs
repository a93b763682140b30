//! Chaining single-goal episodes into long-horizon episodes.

use thiserror::Error;

use crate::env::SceneContext;
use crate::geometry::{astar, PlannedPath};

use super::episode::{Episode, Goal, InstructionBundle, TaskType};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("long-horizon episodes need 2 or 3 legs, got {0}")]
    LegCount(usize),
    #[error("leg {0} belongs to a different scene")]
    SceneMismatch(usize),
    #[error("leg {0} has no goal")]
    MissingGoal(usize),
    #[error("leg {0} is unreachable from the previous goal")]
    Unreachable(usize),
}

const CONNECTIVES: [&str; 3] = ["First", "Then", "Finally"];

fn connective(i: usize, n: usize) -> &'static str {
    if i == 0 {
        CONNECTIVES[0]
    } else if i + 1 == n && n == 3 {
        CONNECTIVES[2]
    } else {
        CONNECTIVES[1]
    }
}

fn lower_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_lowercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

/// Per-leg instruction text: the formal coarse style if present, else fine.
fn leg_text(e: &Episode) -> String {
    let b = &e.instruction_bundle;
    b.coarse
        .as_ref()
        .map(|c| c.formal.clone())
        .or_else(|| b.fine.clone())
        .unwrap_or_else(|| "continue to the next goal.".to_string())
}

/// Chain 2-3 single-goal episodes of one scene. The first leg starts at the
/// first episode's start; each later leg is re-planned from the previous goal.
pub fn chain_long_horizon(
    ctx: &SceneContext,
    legs: &[Episode],
    episode_id: String,
) -> Result<Episode, ChainError> {
    let n = legs.len();
    if !(2..=3).contains(&n) {
        return Err(ChainError::LegCount(n));
    }
    let mut path: Option<PlannedPath> = None;
    let mut goals: Vec<Goal> = Vec::with_capacity(n);
    let mut subs = Vec::with_capacity(n);
    let mut from = legs[0].start.position();
    for (i, leg) in legs.iter().enumerate() {
        if leg.scene_id != ctx.scene.scene_id {
            return Err(ChainError::SceneMismatch(i));
        }
        let goal = leg.goals.last().ok_or(ChainError::MissingGoal(i))?.clone();
        let part = astar(&ctx.dilated, from, goal.point).map_err(|_| ChainError::Unreachable(i))?;
        match path.as_mut() {
            None => path = Some(part),
            Some(p) => p.concat(&part),
        }
        subs.push(format!("{}, {}", connective(i, n), lower_first(&leg_text(leg))));
        from = goal.point;
        goals.push(goal);
    }
    Ok(Episode {
        episode_id,
        scene_id: ctx.scene.scene_id.clone(),
        task_type: TaskType::LongHorizon,
        instruction_bundle: InstructionBundle {
            sub_instructions: Some(subs),
            ..InstructionBundle::default()
        },
        start: legs[0].start,
        goals,
        reference_path: path.expect("at least two legs"),
        success_thresh: legs[0].success_thresh,
    })
}
