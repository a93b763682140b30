//! Panoramic range scan and line-of-sight object detections.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::Pose;
use crate::env::{Footprint, Relation, SceneContext};
use crate::geometry::{normalize_angle, ray_cast, WorldPoint, DEFAULT_MAX_RANGE};

/// Scan bearings, evenly spaced at 30 degrees.
pub const SCAN_RAYS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeReading {
    /// Relative to the agent heading, radians.
    pub bearing: f64,
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub object_id: String,
    pub label: String,
    /// Relative to the agent heading, radians in `[-pi, pi)`.
    pub bearing: f64,
    /// Distance to the object center, meters.
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub pose: Pose,
    pub range_scan: Vec<RangeReading>,
    pub detections: Vec<Detection>,
    pub step_index: usize,
    pub collided_last_step: bool,
}

/// Distance along the unit ray `(origin, dir)` at which it enters `fp`;
/// zero when the origin is inside.
pub fn footprint_entry(fp: &Footprint, origin: WorldPoint, dir: (f64, f64)) -> Option<f64> {
    match *fp {
        Footprint::Rect { min, max } => {
            let mut t0 = f64::NEG_INFINITY;
            let mut t1 = f64::INFINITY;
            for (o, d, lo, hi) in [(origin.x, dir.0, min.x, max.x), (origin.y, dir.1, min.y, max.y)] {
                if d.abs() < 1e-15 {
                    if o < lo || o > hi {
                        return None;
                    }
                } else {
                    let (a, b) = ((lo - o) / d, (hi - o) / d);
                    t0 = t0.max(a.min(b));
                    t1 = t1.min(a.max(b));
                }
            }
            (t1 >= t0.max(0.0)).then_some(t0.max(0.0))
        }
        Footprint::Disc { center, radius } => {
            let (px, py) = (origin.x - center.x, origin.y - center.y);
            let c = px * px + py * py - radius * radius;
            if c <= 0.0 {
                return Some(0.0);
            }
            let b = px * dir.0 + py * dir.1;
            let disc = b * b - c;
            if disc < 0.0 {
                return None;
            }
            let t = -b - disc.sqrt();
            (t >= 0.0).then_some(t)
        }
    }
}

/// Observation at `pose`. Pure function of the scene context and pose.
///
/// An object is detected when it lies within range and the ray toward its
/// center reaches its footprint, or the footprint of an object it rests on,
/// before hitting occupied space (tolerance: one cell diagonal).
pub fn sense(ctx: &SceneContext, pose: Pose, step_index: usize, collided_last_step: bool) -> Observation {
    let grid = &ctx.occupancy;
    let origin = pose.position();
    let range_scan = (0..SCAN_RAYS)
        .map(|k| {
            let bearing = k as f64 * 2.0 * PI / SCAN_RAYS as f64;
            RangeReading {
                bearing,
                range: ray_cast(grid, origin, pose.yaw + bearing, DEFAULT_MAX_RANGE),
            }
        })
        .collect();

    let tol = grid.resolution() * std::f64::consts::SQRT_2 + 1e-9;
    let mut detections = Vec::new();
    for obj in &ctx.scene.objects {
        let c = obj.center();
        let range = origin.distance(&c);
        if range > DEFAULT_MAX_RANGE {
            continue;
        }
        let abs_bearing = if range > 0.0 { origin.bearing_to(&c) } else { pose.yaw };
        let dir = (abs_bearing.cos(), abs_bearing.sin());
        let supports = ctx
            .graph
            .edges_from(&obj.object_id)
            .filter(|e| e.relation == Relation::On)
            .filter_map(|e| ctx.scene.object(&e.object));
        let entry = std::iter::once(obj)
            .chain(supports)
            .filter_map(|o| footprint_entry(&o.footprint, origin, dir))
            .fold(f64::INFINITY, f64::min)
            .min(range);
        let hit = ray_cast(grid, origin, abs_bearing, DEFAULT_MAX_RANGE);
        if hit + tol >= entry {
            detections.push(Detection {
                object_id: obj.object_id.clone(),
                label: obj.label.clone(),
                bearing: normalize_angle(abs_bearing - pose.yaw),
                range,
            });
        }
    }
    Observation {
        pose,
        range_scan,
        detections,
        step_index,
        collided_last_step,
    }
}
