//! Scripted dialogue oracle.
//!
//! Answers are rule-based and deterministic: the query is matched against
//! the target label, room labels and a few direction keywords.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use embodinav_core::env::{Relation, SceneContext};
use embodinav_core::eval::geodesic_with_snap;
use embodinav_core::geometry::{geodesic_distance, normalize_angle, DistanceField, WorldPoint};
use embodinav_core::sim::Pose;
use embodinav_core::tasks::Episode;

/// How far ahead along the reference path the "next waypoint" lies, meters.
const LOOKAHEAD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hint {
    /// Direction of the goal relative to the agent heading, radians.
    pub bearing_to_goal: f64,
    /// Geodesic distance to the goal on the dilated grid, meters.
    pub geodesic_remaining: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleAnswer {
    pub text: String,
    pub facts_used: Vec<String>,
    pub hint: Hint,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("the oracle is disabled for episode {0}")]
    OracleDisabled(String),
}

fn contains_word(haystack: &str, needle: &str) -> bool {
    !needle.is_empty()
        && haystack.match_indices(needle).any(|(i, _)| {
            let before = haystack[..i].chars().next_back();
            let after = haystack[i + needle.len()..].chars().next();
            !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
        })
}

/// Reference waypoint `LOOKAHEAD` meters past the one closest to `p`.
pub fn next_reference_waypoint(episode: &Episode, p: WorldPoint) -> WorldPoint {
    let wps = &episode.reference_path.waypoints;
    let nearest = wps
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.distance(&p).total_cmp(&b.1.distance(&p)))
        .map_or(0, |(i, _)| i);
    let mut acc = 0.0;
    for i in nearest + 1..wps.len() {
        acc += wps[i - 1].distance(&wps[i]);
        if acc >= LOOKAHEAD {
            return wps[i];
        }
    }
    *wps.last().expect("reference paths are non-empty")
}

/// Hint toward the final goal. The distance is `geodesic_distance` from the
/// pose; a pose outside the free space is first snapped to the nearest free
/// cell.
pub fn hint(ctx: &SceneContext, episode: &Episode, pose: Pose) -> Hint {
    let p = pose.position();
    let goal = episode.final_goal();
    let geodesic_remaining = geodesic_distance(&ctx.dilated, p, goal).ok().or_else(|| {
        let field = DistanceField::new(&ctx.dilated, goal).ok()?;
        geodesic_with_snap(ctx, &field, p)
    });
    let bearing_to_goal = if p == goal {
        0.0
    } else {
        normalize_angle(p.bearing_to(&goal) - pose.yaw)
    };
    Hint {
        bearing_to_goal,
        geodesic_remaining,
    }
}

fn direction_word(bearing: f64) -> &'static str {
    let deg = bearing.to_degrees();
    if deg.abs() <= 30.0 {
        "ahead of you"
    } else if deg.abs() >= 150.0 {
        "behind you"
    } else if deg > 0.0 {
        "to your left"
    } else {
        "to your right"
    }
}

pub fn oracle_answer(
    query: &str,
    ctx: &SceneContext,
    episode: &Episode,
    pose: Pose,
) -> Result<OracleAnswer, OracleError> {
    if !episode.instruction_bundle.oracle_enabled {
        return Err(OracleError::OracleDisabled(episode.episode_id.clone()));
    }
    let q = query.to_lowercase();
    let scene = &ctx.scene;
    let target = episode
        .goals
        .last()
        .and_then(|g| g.target_object_id.as_deref())
        .and_then(|id| scene.object(id));
    let asks_where = contains_word(&q, "where");
    let asks_direction = contains_word(&q, "direction") || contains_word(&q, "which way");
    let asks_far = q.contains("how far");
    let names_target = target.is_some_and(|t| contains_word(&q, &t.label.to_lowercase()));
    let names_room = scene
        .rooms
        .iter()
        .any(|r| contains_word(&q, &r.label.to_lowercase()));

    let h = hint(ctx, episode, pose);
    let mut parts = Vec::new();
    let mut facts = Vec::new();

    if let Some(t) = target.filter(|_| names_target || asks_where) {
        if let Some(edge) = ctx.graph.strongest_relation(scene, &t.object_id) {
            let reference = match edge.relation {
                Relation::In => scene.room(&edge.object).map(|r| r.label.clone()),
                _ => scene.object(&edge.object).map(|o| o.label.clone()),
            };
            if let Some(reference) = reference {
                parts.push(format!(
                    "The {} is {} the {}.",
                    t.label,
                    edge.relation.phrase(),
                    reference
                ));
                facts.push(edge.id());
            }
        }
    }
    if names_room || asks_where || asks_direction {
        let next = next_reference_waypoint(episode, pose.position());
        let room = scene.room_label_at(next);
        let here = scene.room_label_at(pose.position());
        if room == here {
            parts.push(format!("Keep going through the {room}."));
        } else {
            parts.push(format!("Head into the {room}."));
        }
    }
    let dir = direction_word(h.bearing_to_goal);
    match h.geodesic_remaining {
        Some(d) if asks_far || parts.is_empty() => {
            parts.push(format!("The goal is {dir}, about {d:.1} m away."))
        }
        Some(_) => parts.push(format!("The goal is {dir}.")),
        None => parts.push(format!("The goal is {dir}.")),
    }
    Ok(OracleAnswer {
        text: parts.join(" "),
        facts_used: facts,
        hint: h,
    })
}
