//! Grid traversal ray casting for range sensing.

use super::grid::{OccupancyGrid, WorldPoint};

/// Depth clip of the range sensor, meters.
pub const DEFAULT_MAX_RANGE: f64 = 10.0;

/// Distance from `origin` along `bearing` to the first occupied cell boundary,
/// clamped to `max_range`.
///
/// Leaving the raster counts as a hit at the raster edge. An origin inside an
/// occupied cell returns 0.
pub fn ray_cast(grid: &OccupancyGrid, origin: WorldPoint, bearing: f64, max_range: f64) -> f64 {
    debug_assert!(max_range > 0.0);
    let Some(mut cell) = grid.cell_of(origin) else {
        return 0.0;
    };
    if grid.is_occupied(cell) {
        return 0.0;
    }
    let res = grid.resolution();
    let (dx, dy) = (bearing.cos(), bearing.sin());
    let lo = grid.cell_center(cell).offset(-res / 2.0, -res / 2.0);

    let (step_c, mut t_max_x, t_delta_x) = axis_setup(dx, origin.x, lo.x, res);
    let (step_r, mut t_max_y, t_delta_y) = axis_setup(dy, origin.y, lo.y, res);

    loop {
        let t;
        let next = if t_max_x < t_max_y {
            t = t_max_x;
            t_max_x += t_delta_x;
            grid.step(cell, 0, step_c)
        } else {
            t = t_max_y;
            t_max_y += t_delta_y;
            grid.step(cell, step_r, 0)
        };
        if t >= max_range {
            return max_range;
        }
        match next {
            Some(n) if grid.is_free(n) => cell = n,
            _ => return t.max(0.0),
        }
    }
}

/// Step direction, distance to the first boundary crossing, and distance
/// between crossings along one axis.
fn axis_setup(dir: f64, pos: f64, cell_lo: f64, res: f64) -> (isize, f64, f64) {
    if dir > 1e-12 {
        (1, (cell_lo + res - pos) / dir, res / dir)
    } else if dir < -1e-12 {
        (-1, (cell_lo - pos) / dir, -res / dir)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}
