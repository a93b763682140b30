//! Small hand-built scenes and episodes for tests and demos.

use crate::env::{Footprint, ObjectSpec, Rect, RoomSpec, Scene, SceneContext};
use crate::geometry::{astar, PlanError, WorldPoint};
use crate::sim::Pose;
use crate::tasks::{CoarseInstructions, Episode, Goal, InstructionBundle, TaskType};

/// One empty rectangular room spanning `[0, width] x [0, height]`.
pub fn box_scene(scene_id: &str, width: f64, height: f64) -> Scene {
    let bounds = Rect::new(0.0, 0.0, width, height);
    Scene {
        scene_id: scene_id.to_string(),
        bounds,
        rooms: vec![RoomSpec {
            room_id: "room_0".into(),
            label: "living room".into(),
            footprint: bounds,
            doors: vec![],
        }],
        objects: vec![],
    }
}

/// A blocking box object with the given footprint.
pub fn box_object(object_id: &str, label: &str, room_id: &str, r: Rect, top: f64) -> ObjectSpec {
    ObjectSpec {
        object_id: object_id.into(),
        label: label.into(),
        footprint: Footprint::rect(r),
        base_height: 0.0,
        top_height: top,
        room_id: room_id.into(),
        is_obstacle: true,
    }
}

pub fn context(scene: Scene) -> SceneContext {
    SceneContext::new(scene, 0.05, 0.30, 1.50)
}

/// An episode whose reference path is the dilated-grid A* path through
/// `goals` in order. The instruction bundle is a placeholder that fits
/// `task`.
pub fn episode_through(
    ctx: &SceneContext,
    episode_id: &str,
    task: TaskType,
    start: Pose,
    goals: &[WorldPoint],
) -> Result<Episode, PlanError> {
    let mut from = start.position();
    let mut path: Option<crate::geometry::PlannedPath> = None;
    for g in goals {
        let part = astar(&ctx.dilated, from, *g)?;
        match path.as_mut() {
            None => path = Some(part),
            Some(p) => p.concat(&part),
        }
        from = *g;
    }
    let coarse = || CoarseInstructions {
        formal: "Proceed to the living room.".into(),
        natural: "Please head to the living room.".into(),
        casual: "Living room.".into(),
    };
    let bundle = match task {
        TaskType::Fine => InstructionBundle {
            fine: Some("Walk forward and stop near the wall in front of you.".into()),
            ..Default::default()
        },
        TaskType::Coarse => InstructionBundle {
            coarse: Some(coarse()),
            ..Default::default()
        },
        TaskType::VisualRef => InstructionBundle {
            coarse: Some(coarse()),
            goal_snapshot: Some(crate::tasks::GoalSnapshot {
                captured_at: Pose::new(from.x, from.y, 0.0),
                visible: vec![],
            }),
            ..Default::default()
        },
        TaskType::Dialogue => InstructionBundle {
            coarse: Some(coarse()),
            oracle_enabled: true,
            ..Default::default()
        },
        TaskType::LongHorizon => InstructionBundle {
            sub_instructions: Some(
                (0..goals.len())
                    .map(|i| format!("Proceed to waypoint {}.", i + 1))
                    .collect(),
            ),
            ..Default::default()
        },
    };
    Ok(Episode {
        episode_id: episode_id.into(),
        scene_id: ctx.scene.scene_id.clone(),
        task_type: task,
        instruction_bundle: bundle,
        start,
        goals: goals
            .iter()
            .map(|p| Goal {
                point: *p,
                target_object_id: None,
            })
            .collect(),
        reference_path: path.ok_or(PlanError::NoPath)?,
        success_thresh: 3.0,
    })
}
