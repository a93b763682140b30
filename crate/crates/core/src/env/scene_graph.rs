//! Spatial-semantic scene graph: ON / NEAR / IN relations derived from object
//! layout.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::scene::{ObjectSpec, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Relation {
    On,
    Near,
    In,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::On => "ON",
            Relation::Near => "NEAR",
            Relation::In => "IN",
        }
    }

    /// Preposition used in instructions.
    pub fn phrase(self) -> &'static str {
        match self {
            Relation::On => "on",
            Relation::Near => "near",
            Relation::In => "in",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub subject: String,
    pub relation: Relation,
    pub object: String,
}

impl Edge {
    /// Stable identifier, `subject:RELATION:object`.
    pub fn id(&self) -> String {
        format!("{}:{}:{}", self.subject, self.relation, self.object)
    }
}

/// Thresholds for relation predicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationThresholds {
    /// Maximum center distance for NEAR, meters.
    pub near_distance: f64,
    /// Footprint inflation and height gap allowed for ON, meters.
    pub on_tolerance: f64,
}

impl Default for RelationThresholds {
    fn default() -> Self {
        Self {
            near_distance: 1.5,
            on_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
}

impl SceneGraph {
    pub fn edges_from<'a>(&'a self, subject: &str) -> impl Iterator<Item = &'a Edge> + 'a {
        let subject = subject.to_string();
        self.edges.iter().filter(move |e| e.subject == subject)
    }

    pub fn contains_edge_id(&self, id: &str) -> bool {
        self.edges.iter().any(|e| e.id() == id)
    }

    /// The most specific relation of `subject` to another object, preferring
    /// ON, then the closest NEAR, then IN.
    pub fn strongest_relation(&self, scene: &Scene, subject: &str) -> Option<&Edge> {
        let from: Vec<&Edge> = self.edges_from(subject).collect();
        if let Some(on) = from.iter().find(|e| e.relation == Relation::On) {
            return Some(on);
        }
        let anchor = scene.object(subject).map(ObjectSpec::center);
        let near = from
            .iter()
            .filter(|e| e.relation == Relation::Near)
            .min_by(|a, b| {
                let da = dist_to(scene, anchor, &a.object);
                let db = dist_to(scene, anchor, &b.object);
                da.total_cmp(&db).then_with(|| a.object.cmp(&b.object))
            });
        if let Some(near) = near {
            return Some(near);
        }
        from.into_iter().find(|e| e.relation == Relation::In)
    }

    /// Room the subject is IN, if any.
    pub fn room_of(&self, subject: &str) -> Option<&str> {
        self.edges_from(subject)
            .find(|e| e.relation == Relation::In)
            .map(|e| e.object.as_str())
    }
}

fn dist_to(scene: &Scene, anchor: Option<crate::geometry::WorldPoint>, id: &str) -> f64 {
    match (anchor, scene.object(id)) {
        (Some(a), Some(o)) => a.distance(&o.center()),
        _ => f64::INFINITY,
    }
}

pub fn is_on(a: &ObjectSpec, b: &ObjectSpec, t: &RelationThresholds) -> bool {
    a.object_id != b.object_id
        && a.footprint.within(&b.footprint, t.on_tolerance)
        && (a.base_height - b.top_height).abs() <= t.on_tolerance + 1e-12
}

pub fn is_near(a: &ObjectSpec, b: &ObjectSpec, t: &RelationThresholds) -> bool {
    a.object_id != b.object_id
        && a.room_id == b.room_id
        && a.center().distance(&b.center()) <= t.near_distance
}

/// Derive the scene graph with default thresholds.
pub fn build_scene_graph(scene: &Scene) -> SceneGraph {
    build_scene_graph_with(scene, &RelationThresholds::default())
}

/// Every edge satisfying the ON / NEAR / IN predicates, sorted by
/// `(subject, relation, object)`.
pub fn build_scene_graph_with(scene: &Scene, t: &RelationThresholds) -> SceneGraph {
    let mut nodes: Vec<String> = scene
        .rooms
        .iter()
        .map(|r| r.room_id.clone())
        .chain(scene.objects.iter().map(|o| o.object_id.clone()))
        .collect();
    nodes.sort();

    let mut edges = Vec::new();
    let edge = |s: &str, r: Relation, o: &str| Edge {
        subject: s.to_string(),
        relation: r,
        object: o.to_string(),
    };
    for a in &scene.objects {
        for b in &scene.objects {
            if is_on(a, b, t) {
                edges.push(edge(&a.object_id, Relation::On, &b.object_id));
            }
            if is_near(a, b, t) {
                edges.push(edge(&a.object_id, Relation::Near, &b.object_id));
            }
        }
        let c = a.center();
        for room in scene.rooms.iter().filter(|r| r.footprint.contains(c)) {
            edges.push(edge(&a.object_id, Relation::In, &room.room_id));
        }
    }
    edges.sort();
    edges.dedup();
    SceneGraph { nodes, edges }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::scene::{Footprint, Rect, RoomSpec};
    use crate::geometry::WorldPoint;

    fn object(id: &str, fp: Footprint, base: f64, top: f64, room: &str) -> ObjectSpec {
        ObjectSpec {
            object_id: id.into(),
            label: id.split('_').next().unwrap().into(),
            footprint: fp,
            base_height: base,
            top_height: top,
            room_id: room.into(),
            is_obstacle: true,
        }
    }

    fn scene() -> Scene {
        Scene {
            scene_id: "sg".into(),
            bounds: Rect::new(0.0, 0.0, 10.0, 5.0),
            rooms: vec![
                RoomSpec {
                    room_id: "kitchen_0".into(),
                    label: "kitchen".into(),
                    footprint: Rect::new(0.0, 0.0, 5.0, 5.0),
                    doors: vec![],
                },
                RoomSpec {
                    room_id: "bedroom_0".into(),
                    label: "bedroom".into(),
                    footprint: Rect::new(5.0, 0.0, 10.0, 5.0),
                    doors: vec![],
                },
            ],
            objects: vec![
                object(
                    "table_0",
                    Footprint::rect(Rect::new(1.0, 1.0, 2.2, 1.8)),
                    0.0,
                    0.75,
                    "kitchen_0",
                ),
                object(
                    "cup_0",
                    Footprint::Disc {
                        center: WorldPoint::new(1.5, 1.4),
                        radius: 0.05,
                    },
                    0.75,
                    0.85,
                    "kitchen_0",
                ),
                object(
                    "chair_0",
                    Footprint::rect(Rect::new(6.0, 2.0, 6.5, 2.5)),
                    0.0,
                    0.9,
                    "bedroom_0",
                ),
                object(
                    "chair_1",
                    Footprint::rect(Rect::new(6.8, 2.0, 7.3, 2.5)),
                    0.0,
                    0.9,
                    "bedroom_0",
                ),
                object(
                    "bed_0",
                    Footprint::rect(Rect::new(8.0, 0.5, 9.8, 2.0)),
                    0.0,
                    0.6,
                    "bedroom_0",
                ),
            ],
        }
    }

    fn has(g: &SceneGraph, s: &str, r: Relation, o: &str) -> bool {
        g.edges
            .iter()
            .any(|e| e.subject == s && e.relation == r && e.object == o)
    }

    #[test]
    fn cup_on_table() {
        let g = build_scene_graph(&scene());
        assert!(has(&g, "cup_0", Relation::On, "table_0"));
        assert!(!has(&g, "table_0", Relation::On, "cup_0"));
    }

    #[test]
    fn chairs_near_both_ways() {
        let g = build_scene_graph(&scene());
        assert!(has(&g, "chair_0", Relation::Near, "chair_1"));
        assert!(has(&g, "chair_1", Relation::Near, "chair_0"));
        // different rooms are never NEAR
        assert!(!has(&g, "table_0", Relation::Near, "chair_0"));
    }

    #[test]
    fn objects_in_rooms_and_sorted() {
        let g = build_scene_graph(&scene());
        assert!(has(&g, "bed_0", Relation::In, "bedroom_0"));
        assert!(has(&g, "cup_0", Relation::In, "kitchen_0"));
        let mut sorted = g.edges.clone();
        sorted.sort();
        assert_eq!(sorted, g.edges);
    }

    #[test]
    fn strongest_prefers_on() {
        let s = scene();
        let g = build_scene_graph(&s);
        assert_eq!(g.strongest_relation(&s, "cup_0").unwrap().relation, Relation::On);
        assert_eq!(g.strongest_relation(&s, "chair_0").unwrap().object, "chair_1");
        assert_eq!(g.strongest_relation(&s, "bed_0").unwrap().relation, Relation::In);
        assert_eq!(g.room_of("bed_0"), Some("bedroom_0"));
    }
}
