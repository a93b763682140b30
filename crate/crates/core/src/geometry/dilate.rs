//! Morphological dilation of occupancy rasters by a metric radius.

use super::grid::{Cell, OccupancyGrid};

/// Relative slack applied to the radius comparison so that cells lying
/// exactly on the radius (up to float rounding) are included.
const RADIUS_SLACK: f64 = 1e-9;

/// Grow every occupied cell by `radius` meters.
///
/// An output cell is occupied iff some occupied input cell center lies within
/// `radius` of its center. Distances are cell-center to cell-center, so the
/// result can differ from exact geometric inflation by up to one resolution.
pub fn dilate(grid: &OccupancyGrid, radius: f64) -> OccupancyGrid {
    assert!(radius >= 0.0, "dilation radius must be non-negative");
    let mut out = grid.clone();
    let r_cells = radius / grid.resolution();
    let reach = (r_cells * (1.0 + RADIUS_SLACK)).floor() as isize;
    if reach == 0 {
        return out;
    }
    let limit = r_cells * r_cells * (1.0 + RADIUS_SLACK) + RADIUS_SLACK;
    let offsets: Vec<(isize, isize)> = (-reach..=reach)
        .flat_map(|dr| (-reach..=reach).map(move |dc| (dr, dc)))
        .filter(|&(dr, dc)| ((dr * dr + dc * dc) as f64) <= limit)
        .collect();

    // The nearest occupied center to any free cell always has a free
    // 4-neighbor, so stamping from boundary cells alone is exact.
    for seed in grid.occupied_cells().filter(|&c| is_boundary(grid, c)) {
        for &(dr, dc) in &offsets {
            if let Some(cell) = grid.step(seed, dr, dc) {
                out.set(cell, true);
            }
        }
    }
    out
}

fn is_boundary(grid: &OccupancyGrid, cell: Cell) -> bool {
    [(-1, 0), (1, 0), (0, -1), (0, 1)]
        .iter()
        .any(|&(dr, dc)| grid.step(cell, dr, dc).is_some_and(|n| grid.is_free(n)))
}
