//! Declarative scene model and its JSON file format.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::WorldPoint;

/// Room id used by objects that sit outside every room.
pub const HALLWAY_ROOM_ID: &str = "none";

/// Geometric tolerance for boundary and containment checks, meters.
const EPS: f64 = 1e-6;

/// Axis-aligned rectangle, `{ "min": [x, y], "max": [x, y] }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub min: WorldPoint,
    pub max: WorldPoint,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min: WorldPoint::new(min_x, min_y),
            max: WorldPoint::new(max_x, max_y),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> WorldPoint {
        WorldPoint::new(
            (self.min.x + self.max.x) / 2.0,
            (self.min.y + self.max.y) / 2.0,
        )
    }

    /// Closed containment test.
    pub fn contains(&self, p: WorldPoint) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_rect(&self, other: &Rect, tol: f64) -> bool {
        other.min.x >= self.min.x - tol
            && other.min.y >= self.min.y - tol
            && other.max.x <= self.max.x + tol
            && other.max.y <= self.max.y + tol
    }

    pub fn inflate(&self, by: f64) -> Rect {
        Rect::new(
            self.min.x - by,
            self.min.y - by,
            self.max.x + by,
            self.max.y + by,
        )
    }

    /// True when the interiors overlap with positive area.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.min.x < other.max.x
            && other.min.x < self.max.x
            && self.min.y < other.max.y
            && other.min.y < self.max.y
    }

    pub fn corners(&self) -> [WorldPoint; 4] {
        [
            self.min,
            WorldPoint::new(self.max.x, self.min.y),
            self.max,
            WorldPoint::new(self.min.x, self.max.y),
        ]
    }

    /// The four boundary edges, counter-clockwise from the bottom edge.
    pub fn edges(&self) -> [[WorldPoint; 2]; 4] {
        let c = self.corners();
        [[c[0], c[1]], [c[1], c[2]], [c[3], c[2]], [c[0], c[3]]]
    }

    pub fn distance_to(&self, p: WorldPoint) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx.hypot(dy)
    }

    fn is_finite(&self) -> bool {
        self.min.is_finite() && self.max.is_finite()
    }
}

/// Object footprint: an axis-aligned rectangle or a disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Footprint {
    Rect { min: WorldPoint, max: WorldPoint },
    Disc { center: WorldPoint, radius: f64 },
}

impl Footprint {
    pub fn rect(r: Rect) -> Self {
        Footprint::Rect {
            min: r.min,
            max: r.max,
        }
    }

    pub fn center(&self) -> WorldPoint {
        match *self {
            Footprint::Rect { min, max } => Rect { min, max }.center(),
            Footprint::Disc { center, .. } => center,
        }
    }

    pub fn bounding_rect(&self) -> Rect {
        match *self {
            Footprint::Rect { min, max } => Rect { min, max },
            Footprint::Disc { center, radius } => Rect::new(
                center.x - radius,
                center.y - radius,
                center.x + radius,
                center.y + radius,
            ),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Footprint::Rect { min, max } => Rect { min, max }.area(),
            Footprint::Disc { radius, .. } => std::f64::consts::PI * radius * radius,
        }
    }

    pub fn contains_point(&self, p: WorldPoint) -> bool {
        match *self {
            Footprint::Rect { min, max } => Rect { min, max }.contains(p),
            Footprint::Disc { center, radius } => center.distance(&p) <= radius,
        }
    }

    /// Distance from `p` to the footprint (0 inside).
    pub fn distance_to(&self, p: WorldPoint) -> f64 {
        match *self {
            Footprint::Rect { min, max } => Rect { min, max }.distance_to(p),
            Footprint::Disc { center, radius } => (center.distance(&p) - radius).max(0.0),
        }
    }

    /// True when `self` lies inside `other` grown by `tol` meters.
    pub fn within(&self, other: &Footprint, tol: f64) -> bool {
        match (*self, *other) {
            (Footprint::Rect { min, max }, Footprint::Rect { .. })
            | (Footprint::Rect { min, max }, Footprint::Disc { .. }) => Rect { min, max }
                .corners()
                .iter()
                .all(|c| other.distance_to(*c) <= tol + 1e-9),
            (Footprint::Disc { center, radius }, Footprint::Rect { min, max }) => {
                Rect { min, max }.inflate(tol).contains_rect(
                    &Rect::new(
                        center.x - radius,
                        center.y - radius,
                        center.x + radius,
                        center.y + radius,
                    ),
                    1e-9,
                )
            }
            (
                Footprint::Disc { center, radius },
                Footprint::Disc {
                    center: oc,
                    radius: or,
                },
            ) => center.distance(&oc) + radius <= or + tol + 1e-9,
        }
    }

    fn is_valid(&self) -> bool {
        match *self {
            Footprint::Rect { min, max } => {
                let r = Rect { min, max };
                r.is_finite() && r.width() > 0.0 && r.height() > 0.0
            }
            Footprint::Disc { center, radius } => {
                center.is_finite() && radius.is_finite() && radius > 0.0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    pub room_id: String,
    pub label: String,
    pub footprint: Rect,
    /// Wall openings as segment endpoints lying on the footprint boundary.
    pub doors: Vec<[WorldPoint; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub object_id: String,
    pub label: String,
    pub footprint: Footprint,
    pub base_height: f64,
    pub top_height: f64,
    pub room_id: String,
    pub is_obstacle: bool,
}

impl ObjectSpec {
    pub fn center(&self) -> WorldPoint {
        self.footprint.center()
    }

    /// Whether this object blocks an agent of the given height.
    pub fn blocks_agent(&self, agent_height: f64) -> bool {
        self.is_obstacle && self.base_height < agent_height
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub scene_id: String,
    pub bounds: Rect,
    pub rooms: Vec<RoomSpec>,
    pub objects: Vec<ObjectSpec>,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("scene invariant violated ({invariant}): {detail}")]
pub struct InvariantViolation {
    pub invariant: &'static str,
    pub detail: String,
}

impl InvariantViolation {
    fn new(invariant: &'static str, detail: impl Into<String>) -> Self {
        Self {
            invariant,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SceneIoError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Invariant(#[from] InvariantViolation),
}

impl From<serde_json::Error> for SceneIoError {
    fn from(e: serde_json::Error) -> Self {
        SceneIoError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// Minimum door width enforced by [`Scene::validate`]: the default agent diameter.
pub const MIN_DOOR_WIDTH: f64 = 0.60;

impl Scene {
    pub fn room(&self, room_id: &str) -> Option<&RoomSpec> {
        self.rooms.iter().find(|r| r.room_id == room_id)
    }

    pub fn object(&self, object_id: &str) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.object_id == object_id)
    }

    /// Rooms whose footprint contains `p`, in declaration order.
    pub fn rooms_containing(&self, p: WorldPoint) -> impl Iterator<Item = &RoomSpec> {
        self.rooms.iter().filter(move |r| r.footprint.contains(p))
    }

    /// Label of the first room containing `p`, or `"hallway"`.
    pub fn room_label_at(&self, p: WorldPoint) -> &str {
        self.rooms_containing(p)
            .next()
            .map_or("hallway", |r| r.label.as_str())
    }

    /// Check every structural invariant of the scene.
    pub fn validate(&self, min_door_width: f64) -> Result<(), InvariantViolation> {
        if self.scene_id.trim().is_empty() {
            return Err(InvariantViolation::new("scene_id", "scene_id is empty"));
        }
        let b = &self.bounds;
        if !b.is_finite() || b.width() <= 0.0 || b.height() <= 0.0 {
            return Err(InvariantViolation::new(
                "bounds",
                "bounds must be a finite rectangle with positive area",
            ));
        }

        let mut ids = HashSet::new();
        for room in &self.rooms {
            if room.room_id == HALLWAY_ROOM_ID || !ids.insert(room.room_id.as_str()) {
                return Err(InvariantViolation::new(
                    "unique_room_id",
                    format!("room id '{}' is duplicated or reserved", room.room_id),
                ));
            }
            let f = &room.footprint;
            if !f.is_finite() || f.area() <= 0.0 {
                return Err(InvariantViolation::new(
                    "room_area",
                    format!("room '{}' footprint has no area", room.room_id),
                ));
            }
            if !b.contains_rect(f, EPS) {
                return Err(InvariantViolation::new(
                    "room_within_bounds",
                    format!("room '{}' extends outside the scene bounds", room.room_id),
                ));
            }
            for door in &room.doors {
                check_door(room, door, min_door_width)?;
            }
        }

        for obj in &self.objects {
            if obj.object_id == HALLWAY_ROOM_ID || !ids.insert(obj.object_id.as_str()) {
                return Err(InvariantViolation::new(
                    "unique_object_id",
                    format!("object id '{}' is duplicated or reserved", obj.object_id),
                ));
            }
            if !obj.footprint.is_valid() {
                return Err(InvariantViolation::new(
                    "object_footprint",
                    format!("object '{}' has a degenerate footprint", obj.object_id),
                ));
            }
            if !b.contains_rect(&obj.footprint.bounding_rect(), EPS) {
                return Err(InvariantViolation::new(
                    "object_within_bounds",
                    format!("object '{}' extends outside the scene bounds", obj.object_id),
                ));
            }
            if !(obj.base_height >= 0.0
                && obj.top_height >= obj.base_height
                && obj.top_height.is_finite())
            {
                return Err(InvariantViolation::new(
                    "object_heights",
                    format!(
                        "object '{}' needs top_height >= base_height >= 0",
                        obj.object_id
                    ),
                ));
            }
            if obj.room_id != HALLWAY_ROOM_ID && self.room(&obj.room_id).is_none() {
                return Err(InvariantViolation::new(
                    "object_room_ref",
                    format!(
                        "object '{}' references unknown room '{}'",
                        obj.object_id, obj.room_id
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Scene, SceneIoError> {
        let scene: Scene = serde_json::from_str(text)?;
        scene.validate(MIN_DOOR_WIDTH)?;
        Ok(scene)
    }

    /// Pretty JSON with a trailing newline; stable for identical scenes.
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene serializes");
        s.push('\n');
        s
    }
}

fn check_door(
    room: &RoomSpec,
    door: &[WorldPoint; 2],
    min_width: f64,
) -> Result<(), InvariantViolation> {
    let [a, b] = *door;
    if !(a.is_finite() && b.is_finite()) {
        return Err(InvariantViolation::new(
            "door_on_boundary",
            format!("room '{}' has a non-finite door", room.room_id),
        ));
    }
    let on_edge = room.footprint.edges().iter().any(|&[e0, e1]| {
        let on_segment = |p: WorldPoint| {
            if (e0.x - e1.x).abs() < EPS {
                (p.x - e0.x).abs() < EPS && p.y >= e0.y - EPS && p.y <= e1.y + EPS
            } else {
                (p.y - e0.y).abs() < EPS && p.x >= e0.x - EPS && p.x <= e1.x + EPS
            }
        };
        on_segment(a) && on_segment(b)
    });
    if !on_edge {
        return Err(InvariantViolation::new(
            "door_on_boundary",
            format!("room '{}' has a door off its boundary", room.room_id),
        ));
    }
    if a.distance(&b) + EPS < min_width {
        return Err(InvariantViolation::new(
            "door_width",
            format!(
                "room '{}' has a door narrower than {min_width} m",
                room.room_id
            ),
        ));
    }
    Ok(())
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneIoError> {
    let text = fs::read_to_string(path)?;
    Scene::from_json_str(&text)
}

pub fn save_scene(path: impl AsRef<Path>, scene: &Scene) -> Result<(), SceneIoError> {
    scene.validate(MIN_DOOR_WIDTH)?;
    fs::write(path, scene.to_json_string())?;
    Ok(())
}
