//! Rasterization of scenes into occupancy grids.

use crate::geometry::{Cell, OccupancyGrid, WorldPoint};

use super::scene::{Footprint, Rect, Scene};

/// Slack for coordinates that land exactly on a cell boundary.
const SNAP: f64 = 1e-9;

/// Rasterize walls and blocking objects of `scene`.
///
/// The raster covers the scene bounds plus a one-cell border ring, which is
/// occupied. Room boundaries are one cell thick; cells whose center lies on a
/// door segment stay open. Objects are stamped when they block an agent of
/// `agent_height` (see [`super::ObjectSpec::blocks_agent`]), on every cell
/// their footprint overlaps with positive area.
pub fn build_occupancy(scene: &Scene, resolution: f64, agent_height: f64) -> OccupancyGrid {
    assert!(resolution > 0.0, "resolution must be positive");
    let b = scene.bounds;
    let width = ((b.width() / resolution) - SNAP).ceil().max(1.0) as usize + 2;
    let height = ((b.height() / resolution) - SNAP).ceil().max(1.0) as usize + 2;
    let origin = WorldPoint::new(b.min.x - resolution, b.min.y - resolution);
    let mut grid = OccupancyGrid::new(resolution, origin, width, height)
        .expect("scene bounds give a valid raster");

    for col in 0..width {
        grid.set(Cell::new(0, col), true);
        grid.set(Cell::new(height - 1, col), true);
    }
    for row in 0..height {
        grid.set(Cell::new(row, 0), true);
        grid.set(Cell::new(row, width - 1), true);
    }

    let mut walls = vec![false; grid.len()];
    let mut doors = vec![false; grid.len()];
    for room in &scene.rooms {
        for edge in room.footprint.edges() {
            for cell in segment_cells(&grid, edge, None) {
                walls[grid.index(cell)] = true;
            }
        }
        for door in &room.doors {
            for cell in segment_cells(&grid, *door, Some(*door)) {
                doors[grid.index(cell)] = true;
            }
        }
    }
    for i in 0..grid.len() {
        if walls[i] && !doors[i] {
            let cell = grid.cell_at(i);
            grid.set(cell, true);
        }
    }

    for obj in scene.objects.iter().filter(|o| o.blocks_agent(agent_height)) {
        stamp_footprint(&mut grid, &obj.footprint);
    }
    grid
}

fn snapped_index(v: f64, origin: f64, res: f64) -> i64 {
    ((v - origin) / res + SNAP).floor() as i64
}

/// Cells crossed by an axis-aligned segment, one cell thick. With `opening`
/// set, only cells whose center projects inside the opening are returned.
fn segment_cells(
    grid: &OccupancyGrid,
    seg: [WorldPoint; 2],
    opening: Option<[WorldPoint; 2]>,
) -> Vec<Cell> {
    let res = grid.resolution();
    let o = grid.origin();
    let [a, b] = seg;
    let vertical = (a.x - b.x).abs() < (a.y - b.y).abs();
    let mut out = Vec::new();
    let (fixed, lo, hi) = if vertical {
        (
            snapped_index(a.x, o.x, res),
            snapped_index(a.y.min(b.y), o.y, res),
            snapped_index(a.y.max(b.y), o.y, res),
        )
    } else {
        (
            snapped_index(a.y, o.y, res),
            snapped_index(a.x.min(b.x), o.x, res),
            snapped_index(a.x.max(b.x), o.x, res),
        )
    };
    for along in lo..=hi {
        let (row, col) = if vertical { (along, fixed) } else { (fixed, along) };
        if row < 0 || col < 0 || row as usize >= grid.height() || col as usize >= grid.width() {
            continue;
        }
        let cell = Cell::new(row as usize, col as usize);
        if let Some([d0, d1]) = opening {
            let c = grid.cell_center(cell);
            let (v, lo, hi) = if vertical {
                (c.y, d0.y.min(d1.y), d0.y.max(d1.y))
            } else {
                (c.x, d0.x.min(d1.x), d0.x.max(d1.x))
            };
            if v < lo || v > hi {
                continue;
            }
        }
        out.push(cell);
    }
    out
}

/// Cells overlapped with positive area by `fp`.
pub(crate) fn footprint_cells(grid: &OccupancyGrid, fp: &Footprint) -> Vec<Cell> {
    let res = grid.resolution();
    let o = grid.origin();
    let bb = fp.bounding_rect();
    let c_lo = ((bb.min.x - o.x) / res + SNAP).floor().max(0.0) as usize;
    let r_lo = ((bb.min.y - o.y) / res + SNAP).floor().max(0.0) as usize;
    let c_hi = (((bb.max.x - o.x) / res - SNAP).ceil() as i64 - 1).min(grid.width() as i64 - 1);
    let r_hi = (((bb.max.y - o.y) / res - SNAP).ceil() as i64 - 1).min(grid.height() as i64 - 1);
    let mut out = Vec::new();
    if c_hi < 0 || r_hi < 0 {
        return out;
    }
    for row in r_lo..=r_hi as usize {
        for col in c_lo..=c_hi as usize {
            let cell = Cell::new(row, col);
            let hit = match *fp {
                Footprint::Rect { .. } => true,
                Footprint::Disc { center, radius } => {
                    let c = grid.cell_center(cell);
                    let r = Rect::new(
                        c.x - res / 2.0,
                        c.y - res / 2.0,
                        c.x + res / 2.0,
                        c.y + res / 2.0,
                    );
                    r.distance_to(center) < radius - SNAP
                }
            };
            if hit {
                out.push(cell);
            }
        }
    }
    out
}

fn stamp_footprint(grid: &mut OccupancyGrid, fp: &Footprint) {
    for cell in footprint_cells(grid, fp) {
        grid.set(cell, true);
    }
}
