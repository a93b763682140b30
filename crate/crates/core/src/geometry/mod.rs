//! Deterministic 2D metric geometry: occupancy rasters, dilation, A*
//! planning, geodesic distances and ray casting.
//!
//! Everything here is a pure function of immutable inputs.

mod astar;
mod clearance;
mod dilate;
mod grid;
mod raycast;

pub use astar::{
    astar, astar_cells, geodesic_distance, polyline_length, DistanceField, PlanError,
    PlannedPath, Unreachable,
};
pub use clearance::{point_segment_distance, segment_clear, ClearanceMap};
pub use dilate::dilate;
pub use grid::{Cell, GridError, OccupancyGrid, WorldPoint};
pub use raycast::{ray_cast, DEFAULT_MAX_RANGE};

/// Default raster resolution, meters per cell.
pub const DEFAULT_RESOLUTION: f64 = 0.05;

/// Wrap an angle to `[-pi, pi)`.
pub fn normalize_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = (a + PI).rem_euclid(TAU) - PI;
    if r >= PI {
        r -= TAU;
    }
    r
}

/// Free cell center nearest to `p` (Euclidean), ties broken by `(row, col)`.
///
/// Returns `None` only when the grid has no free cell.
pub fn nearest_free_point(grid: &OccupancyGrid, p: WorldPoint) -> Option<WorldPoint> {
    if let Some(cell) = grid.cell_of(p) {
        if grid.is_free(cell) {
            return Some(grid.cell_center(cell));
        }
    }
    // Ring search outward in cell space; once a candidate at distance d is
    // found, rings beyond d / resolution + 1 cannot improve on it.
    let res = grid.resolution();
    let (row, col) = grid.cell_coords(p);
    let max_ring = grid.width().max(grid.height()) as i64
        + row.unsigned_abs().max(col.unsigned_abs()) as i64
        + 1;
    let mut best: Option<(f64, Cell)> = None;
    for ring in 0..=max_ring {
        if let Some((d, _)) = best {
            if (ring as f64 - 1.0) * res > d {
                break;
            }
        }
        for (r, c) in ring_cells(row, col, ring) {
            if r < 0 || c < 0 || r as usize >= grid.height() || c as usize >= grid.width() {
                continue;
            }
            let cell = Cell::new(r as usize, c as usize);
            if grid.is_occupied(cell) {
                continue;
            }
            let d = grid.cell_center(cell).distance(&p);
            let better = match best {
                None => true,
                Some((bd, bc)) => d < bd || (d == bd && cell < bc),
            };
            if better {
                best = Some((d, cell));
            }
        }
    }
    best.map(|(_, c)| grid.cell_center(c))
}

fn ring_cells(row: i64, col: i64, ring: i64) -> Vec<(i64, i64)> {
    if ring == 0 {
        return vec![(row, col)];
    }
    let mut out = Vec::with_capacity(8 * ring as usize);
    for c in (col - ring)..=(col + ring) {
        out.push((row - ring, c));
        out.push((row + ring, c));
    }
    for r in (row - ring + 1)..=(row + ring - 1) {
        out.push((r, col - ring));
        out.push((r, col + ring));
    }
    out
}
