//! Seeded procedural floor plans: rectangular rooms tiled by binary space
//! partitioning, doors on shared walls, and furniture placed under a
//! connectivity constraint on the agent-dilated occupancy grid.

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{dilate, OccupancyGrid, WorldPoint};

use super::occupancy::build_occupancy;
use super::scene::{Footprint, ObjectSpec, Rect, RoomSpec, Scene};

/// Clearance kept between a door midpoint and any furniture, meters.
const DOOR_CLEARANCE: f64 = 0.9;
/// Distance between a door and the ends of the shared wall, meters.
const DOOR_END_MARGIN: f64 = 0.45;
/// Inset from room walls for furniture placement, meters.
const WALL_INSET: f64 = 0.08;
/// Coordinates are snapped to this step, meters.
const SNAP_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// Inclusive range of room counts.
    pub room_count: (usize, usize),
    /// Floor area per room, square meters.
    pub area_per_room: (f64, f64),
    /// Width / height ratio of the scene bounds.
    pub aspect_ratio: (f64, f64),
    /// Furniture pieces per square meter of room floor.
    pub object_density: (f64, f64),
    pub min_room_side: f64,
    pub door_width: f64,
    /// Probability of a door on a shared wall beyond the spanning set.
    pub extra_door_probability: f64,
    pub room_labels: Vec<String>,
    pub agent_radius: f64,
    pub agent_height: f64,
    pub resolution: f64,
    pub max_attempts: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            room_count: (2, 8),
            area_per_room: (14.0, 26.0),
            aspect_ratio: (1.0, 1.8),
            object_density: (0.08, 0.16),
            min_room_side: 2.5,
            door_width: 1.0,
            extra_door_probability: 0.25,
            room_labels: [
                "living room",
                "kitchen",
                "bedroom",
                "bathroom",
                "dining room",
                "office",
                "hallway",
                "laundry room",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            agent_radius: 0.30,
            agent_height: 1.50,
            resolution: crate::geometry::DEFAULT_RESOLUTION,
            max_attempts: 60,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("scene generation failed for seed {seed} after {attempts} attempts")]
    GenerationFailed { seed: u64, attempts: usize },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

struct FurnitureKind {
    label: &'static str,
    rooms: &'static [&'static str],
    width: (f64, f64),
    depth: (f64, f64),
    height: f64,
    disc: bool,
    against_wall: bool,
    support: bool,
}

const ANY: &[&str] = &[];

#[rustfmt::skip]
const FURNITURE: &[FurnitureKind] = &[
    FurnitureKind { label: "bed", rooms: &["bedroom"], width: (1.4, 1.9), depth: (1.9, 2.1), height: 0.6, disc: false, against_wall: true, support: false },
    FurnitureKind { label: "nightstand", rooms: &["bedroom"], width: (0.4, 0.5), depth: (0.4, 0.5), height: 0.55, disc: false, against_wall: true, support: true },
    FurnitureKind { label: "wardrobe", rooms: &["bedroom"], width: (1.0, 1.5), depth: (0.55, 0.65), height: 2.0, disc: false, against_wall: true, support: false },
    FurnitureKind { label: "dresser", rooms: &["bedroom"], width: (0.9, 1.3), depth: (0.45, 0.55), height: 0.9, disc: false, against_wall: true, support: true },
    FurnitureKind { label: "desk", rooms: &["bedroom", "office"], width: (1.0, 1.5), depth: (0.6, 0.75), height: 0.75, disc: false, against_wall: true, support: true },
    FurnitureKind { label: "office chair", rooms: &["office"], width: (0.28, 0.32), depth: (0.28, 0.32), height: 1.0, disc: true, against_wall: false, support: false },
    FurnitureKind { label: "bookshelf", rooms: &["office", "living room"], width: (0.8, 1.2), depth: (0.3, 0.4), height: 1.8, disc: false, against_wall: true, support: true },
    FurnitureKind { label: "couch", rooms: &["living room"], width: (1.8, 2.3), depth: (0.85, 1.0), height: 0.8, disc: false, against_wall: true, support: false },
    FurnitureKind { label: "coffee table", rooms: &["living room"], width: (0.9, 1.2), depth: (0.5, 0.7), height: 0.45, disc: false, against_wall: false, support: true },
    FurnitureKind { label: "armchair", rooms: &["living room"], width: (0.8, 0.9), depth: (0.8, 0.9), height: 0.9, disc: false, against_wall: false, support: false },
    FurnitureKind { label: "tv stand", rooms: &["living room", "bedroom"], width: (1.2, 1.7), depth: (0.4, 0.5), height: 0.5, disc: false, against_wall: true, support: true },
    FurnitureKind { label: "dining table", rooms: &["dining room", "kitchen"], width: (1.2, 1.7), depth: (0.8, 1.0), height: 0.75, disc: false, against_wall: false, support: true },
    FurnitureKind { label: "chair", rooms: &["dining room", "kitchen", "office"], width: (0.45, 0.5), depth: (0.45, 0.5), height: 0.9, disc: false, against_wall: false, support: false },
    FurnitureKind { label: "counter", rooms: &["kitchen"], width: (1.5, 2.4), depth: (0.6, 0.65), height: 0.9, disc: false, against_wall: true, support: true },
    FurnitureKind { label: "fridge", rooms: &["kitchen"], width: (0.7, 0.8), depth: (0.7, 0.75), height: 1.8, disc: false, against_wall: true, support: false },
    FurnitureKind { label: "stove", rooms: &["kitchen"], width: (0.6, 0.76), depth: (0.6, 0.65), height: 0.9, disc: false, against_wall: true, support: true },
    FurnitureKind { label: "toilet", rooms: &["bathroom"], width: (0.4, 0.45), depth: (0.65, 0.7), height: 0.75, disc: false, against_wall: true, support: false },
    FurnitureKind { label: "sink", rooms: &["bathroom", "laundry room"], width: (0.5, 0.8), depth: (0.45, 0.55), height: 0.85, disc: false, against_wall: true, support: true },
    FurnitureKind { label: "bathtub", rooms: &["bathroom"], width: (1.5, 1.7), depth: (0.7, 0.8), height: 0.6, disc: false, against_wall: true, support: false },
    FurnitureKind { label: "washing machine", rooms: &["laundry room"], width: (0.6, 0.6), depth: (0.6, 0.6), height: 0.85, disc: false, against_wall: true, support: true },
    FurnitureKind { label: "bench", rooms: &["hallway"], width: (1.0, 1.4), depth: (0.4, 0.45), height: 0.45, disc: false, against_wall: true, support: true },
    FurnitureKind { label: "shoe rack", rooms: &["hallway"], width: (0.7, 0.9), depth: (0.3, 0.35), height: 0.6, disc: false, against_wall: true, support: false },
    FurnitureKind { label: "cabinet", rooms: ANY, width: (0.8, 1.2), depth: (0.4, 0.5), height: 1.0, disc: false, against_wall: true, support: true },
    FurnitureKind { label: "plant", rooms: ANY, width: (0.2, 0.3), depth: (0.2, 0.3), height: 1.2, disc: true, against_wall: false, support: false },
];

struct SmallItem {
    label: &'static str,
    size: (f64, f64),
    height: f64,
    disc: bool,
}

#[rustfmt::skip]
const SMALL_ITEMS: &[SmallItem] = &[
    SmallItem { label: "cup", size: (0.04, 0.05), height: 0.1, disc: true },
    SmallItem { label: "book", size: (0.15, 0.25), height: 0.04, disc: false },
    SmallItem { label: "vase", size: (0.06, 0.1), height: 0.3, disc: true },
    SmallItem { label: "laptop", size: (0.3, 0.35), height: 0.03, disc: false },
    SmallItem { label: "plate", size: (0.1, 0.13), height: 0.03, disc: true },
    SmallItem { label: "table lamp", size: (0.1, 0.15), height: 0.45, disc: true },
    SmallItem { label: "remote", size: (0.05, 0.08), height: 0.03, disc: false },
    SmallItem { label: "bowl", size: (0.07, 0.1), height: 0.08, disc: true },
    SmallItem { label: "clock", size: (0.08, 0.12), height: 0.2, disc: true },
];

fn snap(v: f64) -> f64 {
    round2((v / SNAP_STEP).round() * SNAP_STEP)
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Generate a scene for `seed`. Identical `(params, seed)` pairs produce
/// identical scenes.
pub fn generate_scene(params: &GeneratorParams, seed: u64) -> Result<Scene, GenerationError> {
    let (lo, hi) = params.room_count;
    if lo == 0 || hi < lo {
        return Err(GenerationError::InvalidParams(format!(
            "room_count range ({lo}, {hi}) is empty"
        )));
    }
    if params.room_labels.is_empty() {
        return Err(GenerationError::InvalidParams("no room labels".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene_id = format!("scene_{seed:06}");
    for _ in 0..params.max_attempts {
        let Some(rects) = partition(params, &mut rng) else {
            continue;
        };
        let Some(rooms) = connect_rooms(params, &rects, &mut rng) else {
            continue;
        };
        let bounds = rects.iter().fold(rects[0], |acc, r| {
            Rect::new(
                acc.min.x.min(r.min.x),
                acc.min.y.min(r.min.y),
                acc.max.x.max(r.max.x),
                acc.max.y.max(r.max.y),
            )
        });
        let mut scene = Scene {
            scene_id: scene_id.clone(),
            bounds,
            rooms,
            objects: Vec::new(),
        };
        if !is_connected(&scene, params) {
            continue;
        }
        furnish(&mut scene, params, &mut rng);
        debug_assert!(scene.validate(super::scene::MIN_DOOR_WIDTH).is_ok());
        return Ok(scene);
    }
    Err(GenerationError::GenerationFailed {
        seed,
        attempts: params.max_attempts,
    })
}

/// Binary space partition of a random bounding rectangle into rooms.
fn partition(params: &GeneratorParams, rng: &mut ChaCha8Rng) -> Option<Vec<Rect>> {
    let n = rng.gen_range(params.room_count.0..=params.room_count.1);
    let area = n as f64 * range(rng, params.area_per_room);
    let aspect = range(rng, params.aspect_ratio);
    let min_side = params.min_room_side;
    let w = snap((area * aspect).sqrt()).max(min_side);
    let h = snap(area / w).max(min_side);
    let mut rooms = vec![Rect::new(0.0, 0.0, w, h)];
    while rooms.len() < n {
        let idx = rooms
            .iter()
            .enumerate()
            .filter(|(_, r)| r.width().max(r.height()) >= 2.0 * min_side)
            .max_by(|a, b| a.1.area().total_cmp(&b.1.area()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)?;
        let r = rooms.swap_remove(idx);
        let frac = rng.gen_range(0.35..0.65);
        if r.width() >= r.height() {
            let x = snap(r.min.x + r.width() * frac).clamp(r.min.x + min_side, r.max.x - min_side);
            rooms.push(Rect::new(r.min.x, r.min.y, x, r.max.y));
            rooms.push(Rect::new(x, r.min.y, r.max.x, r.max.y));
        } else {
            let y = snap(r.min.y + r.height() * frac).clamp(r.min.y + min_side, r.max.y - min_side);
            rooms.push(Rect::new(r.min.x, r.min.y, r.max.x, y));
            rooms.push(Rect::new(r.min.x, y, r.max.x, r.max.y));
        }
    }
    rooms.sort_by(|a, b| {
        a.min
            .y
            .total_cmp(&b.min.y)
            .then(a.min.x.total_cmp(&b.min.x))
    });
    Some(rooms)
}

/// A wall segment shared by two rooms that can hold a door.
struct SharedWall {
    a: usize,
    b: usize,
    vertical: bool,
    fixed: f64,
    lo: f64,
    hi: f64,
}

fn shared_walls(rects: &[Rect], min_len: f64) -> Vec<SharedWall> {
    let mut out = Vec::new();
    for i in 0..rects.len() {
        for j in (i + 1)..rects.len() {
            let (a, b) = (rects[i], rects[j]);
            let eq = |u: f64, v: f64| (u - v).abs() < 1e-6;
            let mut lines = Vec::new();
            if eq(a.max.x, b.min.x) || eq(b.max.x, a.min.x) {
                lines.push((true, if eq(a.max.x, b.min.x) { a.max.x } else { a.min.x }));
            }
            if eq(a.max.y, b.min.y) || eq(b.max.y, a.min.y) {
                lines.push((false, if eq(a.max.y, b.min.y) { a.max.y } else { a.min.y }));
            }
            for (vertical, fixed) in lines {
                let (lo, hi) = if vertical {
                    (a.min.y.max(b.min.y), a.max.y.min(b.max.y))
                } else {
                    (a.min.x.max(b.min.x), a.max.x.min(b.max.x))
                };
                if hi - lo >= min_len {
                    out.push(SharedWall {
                        a: i,
                        b: j,
                        vertical,
                        fixed,
                        lo,
                        hi,
                    });
                }
            }
        }
    }
    out
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = i;
    while parent[c] != r {
        let next = parent[c];
        parent[c] = r;
        c = next;
    }
    r
}

/// Label rooms and cut doors so every room is reachable.
fn connect_rooms(
    params: &GeneratorParams,
    rects: &[Rect],
    rng: &mut ChaCha8Rng,
) -> Option<Vec<RoomSpec>> {
    let dw = params.door_width;
    let mut walls = shared_walls(rects, dw + 2.0 * DOOR_END_MARGIN);
    walls.shuffle(rng);
    let mut parent: Vec<usize> = (0..rects.len()).collect();
    let mut doors: Vec<Vec<[WorldPoint; 2]>> = vec![Vec::new(); rects.len()];
    for wall in &walls {
        let (ra, rb) = (find(&mut parent, wall.a), find(&mut parent, wall.b));
        let needed = ra != rb;
        if !needed && !rng.gen_bool(params.extra_door_probability) {
            continue;
        }
        if needed {
            parent[ra] = rb;
        }
        let lo = wall.lo + DOOR_END_MARGIN + dw / 2.0;
        let hi = wall.hi - DOOR_END_MARGIN - dw / 2.0;
        let c = if hi > lo {
            snap(rng.gen_range(lo..=hi)).clamp(lo, hi)
        } else {
            lo
        };
        let (p0, p1) = if wall.vertical {
            (
                WorldPoint::new(wall.fixed, round2(c - dw / 2.0)),
                WorldPoint::new(wall.fixed, round2(c + dw / 2.0)),
            )
        } else {
            (
                WorldPoint::new(round2(c - dw / 2.0), wall.fixed),
                WorldPoint::new(round2(c + dw / 2.0), wall.fixed),
            )
        };
        doors[wall.a].push([p0, p1]);
        doors[wall.b].push([p0, p1]);
    }
    let root = find(&mut parent, 0);
    if (0..rects.len()).any(|i| find(&mut parent, i) != root) {
        return None;
    }

    // Largest room is the living room, then a kitchen; the rest are drawn
    // from the vocabulary with bedrooms most common.
    let mut order: Vec<usize> = (0..rects.len()).collect();
    order.sort_by(|&a, &b| rects[b].area().total_cmp(&rects[a].area()).then(a.cmp(&b)));
    let vocab = &params.room_labels;
    let mut labels = vec![String::new(); rects.len()];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = match rank {
            0 if vocab.iter().any(|l| l == "living room") => "living room".to_string(),
            1 if vocab.iter().any(|l| l == "kitchen") => "kitchen".to_string(),
            _ => {
                let unused: Vec<&String> =
                    vocab.iter().filter(|l| !labels.contains(*l)).collect();
                if vocab.iter().any(|l| l == "bedroom") && rng.gen_bool(0.35) {
                    "bedroom".to_string()
                } else if !unused.is_empty() {
                    unused[rng.gen_range(0..unused.len())].clone()
                } else {
                    vocab[rng.gen_range(0..vocab.len())].clone()
                }
            }
        };
    }

    Some(
        rects
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut d = doors[i].clone();
                d.sort_by(|a, b| {
                    a[0].x
                        .total_cmp(&b[0].x)
                        .then(a[0].y.total_cmp(&b[0].y))
                });
                RoomSpec {
                    room_id: format!("room_{i}"),
                    label: labels[i].clone(),
                    footprint: *r,
                    doors: d,
                }
            })
            .collect(),
    )
}

/// All free cells of the agent-dilated grid form one 8-connected component
/// and every room keeps some free floor.
pub fn is_connected(scene: &Scene, params: &GeneratorParams) -> bool {
    let grid = build_occupancy(scene, params.resolution, params.agent_height);
    let dilated = dilate(&grid, params.agent_radius);
    single_free_component(&dilated)
        && scene.rooms.iter().all(|room| {
            dilated
                .free_cells()
                .any(|c| room.footprint.contains(dilated.cell_center(c)))
        })
}

/// True when the free cells of `grid` form exactly one component under the
/// planner's move rules.
pub fn single_free_component(grid: &OccupancyGrid) -> bool {
    let Some(start) = grid.free_cells().next() else {
        return false;
    };
    let total = grid.len() - grid.count_occupied();
    let mut seen = vec![false; grid.len()];
    let mut queue = VecDeque::from([start]);
    seen[grid.index(start)] = true;
    let mut count = 0;
    while let Some(cell) = queue.pop_front() {
        count += 1;
        for (n, _) in grid.free_neighbors(cell) {
            let i = grid.index(n);
            if !seen[i] {
                seen[i] = true;
                queue.push_back(n);
            }
        }
    }
    count == total
}

fn furnish(scene: &mut Scene, params: &GeneratorParams, rng: &mut ChaCha8Rng) {
    let mut label_counts: HashMap<String, usize> = HashMap::new();
    let mut next_id = |label: &str| {
        let key = label.replace(' ', "_");
        let n = label_counts.entry(key.clone()).or_insert(0);
        let id = format!("{key}_{n}");
        *n += 1;
        id
    };

    for ri in 0..scene.rooms.len() {
        let room = scene.rooms[ri].clone();
        let inner = room.footprint.inflate(-WALL_INSET);
        let kinds: Vec<&FurnitureKind> = FURNITURE
            .iter()
            .filter(|k| k.rooms.is_empty() || k.rooms.contains(&room.label.as_str()))
            .collect();
        let target = ((room.footprint.area() * range(rng, params.object_density)).round() as usize)
            .clamp(1, 8);
        let mut placed: Vec<(usize, &FurnitureKind)> = Vec::new();
        for _ in 0..target {
            let kind = kinds[rng.gen_range(0..kinds.len())];
            for _ in 0..25 {
                let Some(fp) = propose_footprint(kind, &inner, rng) else {
                    continue;
                };
                if !clear_of(&fp, scene, &room) {
                    continue;
                }
                scene.objects.push(ObjectSpec {
                    object_id: String::new(),
                    label: kind.label.to_string(),
                    footprint: fp,
                    base_height: 0.0,
                    top_height: kind.height,
                    room_id: room.room_id.clone(),
                    is_obstacle: true,
                });
                if is_connected(scene, params) {
                    let idx = scene.objects.len() - 1;
                    scene.objects[idx].object_id = next_id(kind.label);
                    placed.push((idx, kind));
                    break;
                }
                scene.objects.pop();
            }
        }

        for &(idx, kind) in &placed {
            if !kind.support || !rng.gen_bool(0.6) {
                continue;
            }
            let support = scene.objects[idx].clone();
            let item = &SMALL_ITEMS[rng.gen_range(0..SMALL_ITEMS.len())];
            let top = support.footprint.bounding_rect().inflate(-0.03);
            let s = range(rng, item.size);
            let fp = if item.disc {
                if top.width() < 2.0 * s || top.height() < 2.0 * s {
                    continue;
                }
                Footprint::Disc {
                    center: WorldPoint::new(
                        round2(rng.gen_range(top.min.x + s..=top.max.x - s)),
                        round2(rng.gen_range(top.min.y + s..=top.max.y - s)),
                    ),
                    radius: round2(s).max(0.01),
                }
            } else {
                let (w, d) = (round2(s), round2(s * 0.7).max(0.02));
                if top.width() < w || top.height() < d {
                    continue;
                }
                let x = round2(rng.gen_range(top.min.x..=top.max.x - w));
                let y = round2(rng.gen_range(top.min.y..=top.max.y - d));
                Footprint::rect(Rect::new(x, y, round2(x + w), round2(y + d)))
            };
            if !fp.within(&support.footprint, 0.0) {
                continue;
            }
            scene.objects.push(ObjectSpec {
                object_id: next_id(item.label),
                label: item.label.to_string(),
                footprint: fp,
                base_height: support.top_height,
                top_height: round2(support.top_height + item.height),
                room_id: room.room_id.clone(),
                is_obstacle: false,
            });
        }

        if matches!(room.label.as_str(), "living room" | "bedroom") && rng.gen_bool(0.5) {
            let c = inner.center();
            let (w, d) = (
                snap(range(rng, (1.4, 2.2)).min(inner.width() - 0.4)),
                snap(range(rng, (1.0, 1.6)).min(inner.height() - 0.4)),
            );
            if w > 0.5 && d > 0.5 {
                let min = WorldPoint::new(snap(c.x - w / 2.0), snap(c.y - d / 2.0));
                scene.objects.push(ObjectSpec {
                    object_id: next_id("rug"),
                    label: "rug".into(),
                    footprint: Footprint::rect(Rect::new(
                        min.x,
                        min.y,
                        round2(min.x + w),
                        round2(min.y + d),
                    )),
                    base_height: 0.0,
                    top_height: 0.01,
                    room_id: room.room_id.clone(),
                    is_obstacle: false,
                });
            }
        }

        if rng.gen_bool(0.6) {
            let c = room.footprint.center();
            scene.objects.push(ObjectSpec {
                object_id: next_id("ceiling lamp"),
                label: "ceiling lamp".into(),
                footprint: Footprint::Disc {
                    center: WorldPoint::new(round2(c.x), round2(c.y)),
                    radius: 0.25,
                },
                base_height: 2.2,
                top_height: 2.4,
                room_id: room.room_id.clone(),
                is_obstacle: true,
            });
        }
    }
}

fn propose_footprint(kind: &FurnitureKind, inner: &Rect, rng: &mut ChaCha8Rng) -> Option<Footprint> {
    let w = snap(range(rng, kind.width));
    let d = snap(range(rng, kind.depth));
    if kind.disc {
        let r = round2(range(rng, kind.width));
        let margin = r + 0.3;
        if inner.width() <= 2.0 * margin || inner.height() <= 2.0 * margin {
            return None;
        }
        let x = round2(rng.gen_range(inner.min.x + margin..inner.max.x - margin));
        let y = round2(rng.gen_range(inner.min.y + margin..inner.max.y - margin));
        return Some(Footprint::Disc {
            center: WorldPoint::new(x, y),
            radius: r,
        });
    }
    let rect = if kind.against_wall {
        // side: 0 bottom, 1 right, 2 top, 3 left; `w` runs along the wall
        let side = rng.gen_range(0..4);
        let (along, depth) = (w, d);
        let (sx, sy) = if side % 2 == 0 { (along, depth) } else { (depth, along) };
        if inner.width() < sx || inner.height() < sy {
            return None;
        }
        let (x, y) = match side {
            0 => (rng.gen_range(inner.min.x..=inner.max.x - sx), inner.min.y),
            1 => (inner.max.x - sx, rng.gen_range(inner.min.y..=inner.max.y - sy)),
            2 => (rng.gen_range(inner.min.x..=inner.max.x - sx), inner.max.y - sy),
            _ => (inner.min.x, rng.gen_range(inner.min.y..=inner.max.y - sy)),
        };
        let (x, y) = (round2(x.max(inner.min.x)), round2(y.max(inner.min.y)));
        Rect::new(x, y, round2(x + sx), round2(y + sy))
    } else {
        let (sx, sy) = if rng.gen_bool(0.5) { (w, d) } else { (d, w) };
        let margin = 0.6;
        if inner.width() < sx + 2.0 * margin || inner.height() < sy + 2.0 * margin {
            return None;
        }
        let x = round2(rng.gen_range(inner.min.x + margin..=inner.max.x - margin - sx));
        let y = round2(rng.gen_range(inner.min.y + margin..=inner.max.y - margin - sy));
        Rect::new(x, y, round2(x + sx), round2(y + sy))
    };
    if !inner.contains_rect(&rect, 1e-9) {
        return None;
    }
    Some(Footprint::rect(rect))
}

/// Keeps furniture apart and away from door openings.
fn clear_of(fp: &Footprint, scene: &Scene, room: &RoomSpec) -> bool {
    let bb = fp.bounding_rect();
    for door in &room.doors {
        let mid = WorldPoint::new((door[0].x + door[1].x) / 2.0, (door[0].y + door[1].y) / 2.0);
        if bb.distance_to(mid) < DOOR_CLEARANCE {
            return false;
        }
    }
    scene
        .objects
        .iter()
        .filter(|o| o.is_obstacle && o.base_height < 1e-9)
        .all(|o| !o.footprint.bounding_rect().inflate(0.05).overlaps(&bb))
}
