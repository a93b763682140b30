//! Templated instruction synthesis and the lexical validator for fine
//! instructions.

use crate::env::{Relation, Scene, SceneGraph};
use crate::geometry::{normalize_angle, PlannedPath, WorldPoint};

use super::episode::CoarseInstructions;

/// Simplification tolerance before segmenting a path, meters.
const SIMPLIFY_EPS: f64 = 0.25;
/// Heading change that starts a new instruction segment, radians.
const TURN_SPLIT: f64 = std::f64::consts::FRAC_PI_4;
/// Objects farther than this from the path are not used as landmarks, meters.
const LANDMARK_RADIUS: f64 = 2.0;

/// Labels that make poor landmarks.
const NON_LANDMARKS: &[&str] = &["rug", "ceiling lamp"];

pub const ACTION_VERBS: &[&str] = &[
    "walk", "turn", "go", "head", "continue", "enter", "exit", "pass", "follow", "proceed",
    "move", "step", "cross", "keep", "take",
];

pub const SPATIAL_TERMS: &[&str] = &[
    "left", "right", "in front of", "behind", "past", "through", "into", "near", "beside",
    "next to", "toward", "towards", "across", "inside", "between", "around", "along",
];

pub const END_VERBS: &[&str] = &["stop", "wait", "halt"];

/// Third-person forms that must not appear in second-person instructions.
pub const FORBIDDEN_WORDS: &[&str] = &[
    "walks", "moves", "enters", "proceeds", "turns", "goes", "heads", "passes", "stops",
    "continues",
];

pub const FORBIDDEN_PHRASES: &[&str] = &["move backward", "move backwards"];

/// Generic landmark nouns accepted in addition to scene labels.
pub const GENERIC_LANDMARKS: &[&str] = &["door", "doorway", "hallway", "room", "corridor", "wall"];

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn contains_phrase(haystack: &[String], phrase: &str) -> bool {
    let needle = words(phrase);
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle.as_slice())
}

/// Outcome of the four-element lexical check.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FineCheck {
    pub landmark: bool,
    pub spatial_term: bool,
    pub action_verb: bool,
    pub end_clause: bool,
    pub forbidden: Vec<String>,
}

impl FineCheck {
    pub fn passes(&self) -> bool {
        self.landmark && self.spatial_term && self.action_verb && self.end_clause && self.forbidden.is_empty()
    }
}

/// Landmark vocabulary for a scene: object and room labels plus generic nouns.
pub fn landmark_vocabulary(scene: &Scene) -> Vec<String> {
    let mut v: Vec<String> = scene
        .objects
        .iter()
        .map(|o| o.label.clone())
        .chain(scene.rooms.iter().map(|r| r.label.clone()))
        .chain(GENERIC_LANDMARKS.iter().map(|s| s.to_string()))
        .collect();
    v.sort();
    v.dedup();
    v
}

/// Check a fine instruction for a landmark, a spatial term, an action verb
/// and a closing stop clause, and list forbidden wording.
pub fn validate_fine_instruction<S: AsRef<str>>(text: &str, landmarks: &[S]) -> FineCheck {
    let w = words(text);
    let mut forbidden: Vec<String> = FORBIDDEN_WORDS
        .iter()
        .filter(|f| w.iter().any(|x| x == *f))
        .map(|f| f.to_string())
        .collect();
    forbidden.extend(
        FORBIDDEN_PHRASES
            .iter()
            .filter(|p| contains_phrase(&w, p))
            .map(|p| p.to_string()),
    );
    let last_sentence = text
        .split(['.', '!', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .last()
        .unwrap_or("");
    let end_clause = words(last_sentence)
        .first()
        .is_some_and(|f| END_VERBS.contains(&f.as_str()));
    FineCheck {
        landmark: landmarks.iter().any(|l| contains_phrase(&w, l.as_ref())),
        spatial_term: SPATIAL_TERMS.iter().any(|t| contains_phrase(&w, t)),
        action_verb: ACTION_VERBS.iter().any(|v| w.iter().any(|x| x == v)),
        end_clause,
        forbidden,
    }
}

/// Ramer-Douglas-Peucker simplification keeping both endpoints.
pub fn simplify(points: &[WorldPoint], eps: f64) -> Vec<WorldPoint> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut keep = vec![false; points.len()];
    keep[0] = true;
    keep[points.len() - 1] = true;
    let mut stack = vec![(0, points.len() - 1)];
    while let Some((i, j)) = stack.pop() {
        let (mut best, mut at) = (0.0, None);
        for k in (i + 1)..j {
            let d = point_segment_distance(points[k], points[i], points[j]).0;
            if d > best {
                best = d;
                at = Some(k);
            }
        }
        if let Some(k) = at.filter(|_| best > eps) {
            keep[k] = true;
            stack.push((i, k));
            stack.push((k, j));
        }
    }
    points
        .iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(*p))
        .collect()
}

/// Distance from `p` to segment `ab` and the projection parameter in `[0, 1]`.
fn point_segment_distance(p: WorldPoint, a: WorldPoint, b: WorldPoint) -> (f64, f64) {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    let q = WorldPoint::new(a.x + t * dx, a.y + t * dy);
    (p.distance(&q), t)
}

/// Split a simplified polyline into legs at heading changes of 45 degrees or more.
/// Each leg is a list of points; consecutive legs share their junction point.
fn legs(points: &[WorldPoint]) -> Vec<Vec<WorldPoint>> {
    let mut out: Vec<Vec<WorldPoint>> = Vec::new();
    let mut current = vec![points[0]];
    let mut heading: Option<f64> = None;
    for pair in points.windows(2) {
        let h = pair[0].bearing_to(&pair[1]);
        if let Some(prev) = heading {
            if normalize_angle(h - prev).abs() >= TURN_SPLIT {
                out.push(std::mem::replace(&mut current, vec![pair[0]]));
            }
        }
        current.push(pair[1]);
        heading = Some(h);
    }
    out.push(current);
    out
}

fn leg_heading_start(leg: &[WorldPoint]) -> f64 {
    leg[0].bearing_to(&leg[1])
}

fn leg_heading_end(leg: &[WorldPoint]) -> f64 {
    let n = leg.len();
    leg[n - 2].bearing_to(&leg[n - 1])
}

/// Nearest landmark object alongside a leg: label and whether it is on the left.
fn leg_landmark<'a>(scene: &'a Scene, leg: &[WorldPoint]) -> Option<(&'a str, bool)> {
    let mut best: Option<(f64, &str, bool, &str)> = None;
    for obj in scene
        .objects
        .iter()
        .filter(|o| !NON_LANDMARKS.contains(&o.label.as_str()))
    {
        let c = obj.center();
        for seg in leg.windows(2) {
            let (d, t) = point_segment_distance(c, seg[0], seg[1]);
            if d > LANDMARK_RADIUS || t <= 0.0 || t >= 1.0 {
                continue;
            }
            let (dx, dy) = (seg[1].x - seg[0].x, seg[1].y - seg[0].y);
            let cross = dx * (c.y - seg[0].y) - dy * (c.x - seg[0].x);
            let better = match best {
                None => true,
                Some((bd, _, _, bid)) => d < bd || (d == bd && obj.object_id.as_str() < bid),
            };
            if better {
                best = Some((d, obj.label.as_str(), cross >= 0.0, obj.object_id.as_str()));
            }
        }
    }
    best.map(|(_, label, left, _)| (label, left))
}

fn side(left: bool) -> &'static str {
    if left {
        "left"
    } else {
        "right"
    }
}

/// Second-person, segment-by-segment instruction ending in a stop clause.
pub fn make_fine_instruction(path: &PlannedPath, _graph: &SceneGraph, scene: &Scene) -> String {
    let mut pts: Vec<WorldPoint> = Vec::with_capacity(path.waypoints.len());
    for p in &path.waypoints {
        if pts.last() != Some(p) {
            pts.push(*p);
        }
    }
    let goal = *pts.last().expect("path has waypoints");
    let mut sentences = Vec::new();
    let mut final_heading = 0.0;
    if pts.len() >= 2 {
        let simple = simplify(&pts, SIMPLIFY_EPS);
        let legs = legs(&simple);
        let mut prev_heading: Option<f64> = None;
        for leg in &legs {
            let verb = match prev_heading {
                None => "Walk forward".to_string(),
                Some(h) => {
                    let turn = normalize_angle(leg_heading_start(leg) - h);
                    format!("Turn {} and walk straight", side(turn > 0.0))
                }
            };
            let clause = match leg_landmark(scene, leg) {
                Some((label, left)) => format!("{verb} past the {label} on your {}", side(left)),
                None => {
                    let from = scene.room_label_at(leg[0]);
                    let to = scene.room_label_at(*leg.last().unwrap());
                    if from != to {
                        format!("{verb} into the {to}")
                    } else {
                        format!("{verb} through the {to}")
                    }
                }
            };
            sentences.push(clause);
            prev_heading = Some(leg_heading_end(leg));
        }
        final_heading = prev_heading.unwrap_or(0.0);
    }
    sentences.push(end_clause(scene, goal, final_heading));
    let mut text = sentences.join(". ");
    text.push('.');
    text
}

fn end_clause(scene: &Scene, goal: WorldPoint, heading: f64) -> String {
    let nearest = scene
        .objects
        .iter()
        .filter(|o| !NON_LANDMARKS.contains(&o.label.as_str()))
        .map(|o| (o.center().distance(&goal), o))
        .filter(|(d, _)| *d <= LANDMARK_RADIUS)
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.object_id.cmp(&b.1.object_id)));
    match nearest {
        Some((d, o)) => {
            let rel = if d < 1e-9 {
                0.0
            } else {
                normalize_angle(goal.bearing_to(&o.center()) - heading)
            };
            let where_ = if rel.abs() <= std::f64::consts::FRAC_PI_4 {
                "in front of you".to_string()
            } else if rel.abs() >= 3.0 * std::f64::consts::FRAC_PI_4 {
                "behind you".to_string()
            } else {
                format!("on your {}", side(rel > 0.0))
            };
            format!("Stop near the {} {where_}", o.label)
        }
        None => format!("Stop inside the {}", scene.room_label_at(goal)),
    }
}

/// The relation used to describe `target`: relation plus reference label.
/// For IN the reference is the room label.
pub fn describe_target(scene: &Scene, graph: &SceneGraph, target: &str) -> Option<(Relation, String)> {
    let edge = graph.strongest_relation(scene, target)?;
    let reference = match edge.relation {
        Relation::In => scene.room(&edge.object)?.label.clone(),
        _ => scene.object(&edge.object)?.label.clone(),
    };
    Some((edge.relation, reference))
}

/// Label of the room holding `target`.
pub fn target_room_label(scene: &Scene, graph: &SceneGraph, target: &str) -> String {
    graph
        .room_of(target)
        .and_then(|id| scene.room(id))
        .map(|r| r.label.clone())
        .or_else(|| scene.object(target).map(|o| scene.room_label_at(o.center()).to_string()))
        .unwrap_or_else(|| "hallway".to_string())
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

/// Three coarse styles from a room label, target label and optional
/// (relation, reference label). An IN relation is carried by the room.
pub fn coarse_from_parts(room: &str, target: &str, relation: Option<(Relation, &str)>) -> CoarseInstructions {
    match relation {
        Some((rel @ (Relation::On | Relation::Near), reference)) => {
            let rel = rel.phrase();
            CoarseInstructions {
                formal: format!("Proceed to the {room} and locate the {target} {rel} the {reference}."),
                natural: format!("Please head to the {room} and find the {target} {rel} the {reference}."),
                casual: format!("{}. The {target} {rel} the {reference}.", capitalize(room)),
            }
        }
        _ => CoarseInstructions {
            formal: format!("Proceed to the {room} and locate the {target}."),
            natural: format!("Please head to the {room} and find the {target} there."),
            casual: format!("{}. The {target}.", capitalize(room)),
        },
    }
}

/// Coarse instructions for a goal object, `None` if it has no scene-graph edge.
pub fn make_coarse_instructions(scene: &Scene, graph: &SceneGraph, target: &str) -> Option<CoarseInstructions> {
    let obj = scene.object(target)?;
    let (rel, reference) = describe_target(scene, graph, target)?;
    let room = target_room_label(scene, graph, target);
    Some(coarse_from_parts(&room, &obj.label, Some((rel, reference.as_str()))))
}
