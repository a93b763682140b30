//! Metric occupancy rasters and world/cell conversions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in the world frame, in meters.
///
/// Serialized as a two-element array `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &WorldPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Heading of the vector from `self` to `other`, radians.
    pub fn bearing_to(&self, other: &WorldPoint) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }

    pub fn offset(&self, dx: f64, dy: f64) -> WorldPoint {
        WorldPoint::new(self.x + dx, self.y + dy)
    }
}

impl From<[f64; 2]> for WorldPoint {
    fn from(v: [f64; 2]) -> Self {
        WorldPoint::new(v[0], v[1])
    }
}

impl From<WorldPoint> for [f64; 2] {
    fn from(p: WorldPoint) -> Self {
        [p.x, p.y]
    }
}

/// Integer cell address. Ordering is lexicographic on `(row, col)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("grid must have at least one cell in each dimension ({width}x{height})")]
    Empty { width: usize, height: usize },
    #[error("expected {expected} cells, got {actual}")]
    CellCount { expected: usize, actual: usize },
    #[error("origin must be finite")]
    InvalidOrigin,
}

/// Boolean occupancy raster; `true` marks an occupied cell.
///
/// Cells are stored row-major. Row index grows with `y`, column index with `x`,
/// and cell `(0, 0)` has its lower-left corner at `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    resolution: f64,
    origin: WorldPoint,
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    /// An all-free grid.
    pub fn new(
        resolution: f64,
        origin: WorldPoint,
        width: usize,
        height: usize,
    ) -> Result<Self, GridError> {
        Self::from_cells(resolution, origin, width, height, vec![false; width * height])
    }

    pub fn from_cells(
        resolution: f64,
        origin: WorldPoint,
        width: usize,
        height: usize,
        cells: Vec<bool>,
    ) -> Result<Self, GridError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(GridError::InvalidResolution(resolution));
        }
        if width == 0 || height == 0 {
            return Err(GridError::Empty { width, height });
        }
        if !origin.is_finite() {
            return Err(GridError::InvalidOrigin);
        }
        if cells.len() != width * height {
            return Err(GridError::CellCount {
                expected: width * height,
                actual: cells.len(),
            });
        }
        Ok(Self {
            resolution,
            origin,
            width,
            height,
            cells,
        })
    }

    /// Parse an ASCII map, one line per row with `#` for occupied and `.` for
    /// free. The first line is the top row (largest `y`).
    pub fn from_ascii(resolution: f64, origin: WorldPoint, text: &str) -> Result<Self, GridError> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        let height = lines.len();
        let width = lines.first().map_or(0, |l| l.chars().count());
        let mut cells = vec![false; width * height];
        for (i, line) in lines.iter().enumerate() {
            let row = height - 1 - i;
            for (col, ch) in line.chars().enumerate().take(width) {
                cells[row * width + col] = ch == '#';
            }
        }
        Self::from_cells(resolution, origin, width, height, cells)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> WorldPoint {
        self.origin
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index / self.width, index % self.width)
    }

    #[inline]
    pub fn contains_cell(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    /// Occupancy of `cell`; cells outside the raster count as occupied.
    #[inline]
    pub fn is_occupied(&self, cell: Cell) -> bool {
        !self.contains_cell(cell) || self.cells[self.index(cell)]
    }

    #[inline]
    pub fn is_free(&self, cell: Cell) -> bool {
        !self.is_occupied(cell)
    }

    pub fn set(&mut self, cell: Cell, occupied: bool) {
        let i = self.index(cell);
        self.cells[i] = occupied;
    }

    /// Signed cell coordinates of a world point (may lie outside the raster).
    pub fn cell_coords(&self, p: WorldPoint) -> (i64, i64) {
        let col = ((p.x - self.origin.x) / self.resolution).floor() as i64;
        let row = ((p.y - self.origin.y) / self.resolution).floor() as i64;
        (row, col)
    }

    pub fn cell_of(&self, p: WorldPoint) -> Option<Cell> {
        if !p.is_finite() {
            return None;
        }
        let (row, col) = self.cell_coords(p);
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            None
        } else {
            Some(Cell::new(row as usize, col as usize))
        }
    }

    pub fn cell_center(&self, cell: Cell) -> WorldPoint {
        WorldPoint::new(
            self.origin.x + (cell.col as f64 + 0.5) * self.resolution,
            self.origin.y + (cell.row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn in_bounds(&self, p: WorldPoint) -> bool {
        self.cell_of(p).is_some()
    }

    /// True when `p` falls in a free cell of this raster.
    pub fn is_free_point(&self, p: WorldPoint) -> bool {
        self.cell_of(p).is_some_and(|c| self.is_free(c))
    }

    /// Upper corner of the raster in world coordinates.
    pub fn extent_max(&self) -> WorldPoint {
        WorldPoint::new(
            self.origin.x + self.width as f64 * self.resolution,
            self.origin.y + self.height as f64 * self.resolution,
        )
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(i, _)| self.cell_at(i))
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &o)| !o)
            .map(|(i, _)| self.cell_at(i))
    }

    pub fn count_occupied(&self) -> usize {
        self.cells.iter().filter(|&&o| o).count()
    }

    /// Neighbor in direction `(dr, dc)`, if inside the raster.
    #[inline]
    pub fn step(&self, cell: Cell, dr: isize, dc: isize) -> Option<Cell> {
        let row = cell.row as isize + dr;
        let col = cell.col as isize + dc;
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            None
        } else {
            Some(Cell::new(row as usize, col as usize))
        }
    }

    /// Free 8-neighbors reachable from `cell` without cutting an occupied corner.
    ///
    /// Yields `(neighbor, is_diagonal)`. A diagonal move is allowed only when
    /// both orthogonal cells it passes between are free.
    pub fn free_neighbors(&self, cell: Cell) -> impl Iterator<Item = (Cell, bool)> + '_ {
        const MOVES: [(isize, isize); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        MOVES.iter().filter_map(move |&(dr, dc)| {
            let next = self.step(cell, dr, dc)?;
            if self.is_occupied(next) {
                return None;
            }
            let diagonal = dr != 0 && dc != 0;
            if diagonal {
                let a = self.step(cell, dr, 0)?;
                let b = self.step(cell, 0, dc)?;
                if self.is_occupied(a) || self.is_occupied(b) {
                    return None;
                }
            }
            Some((next, diagonal))
        })
    }

    /// Distance from `p` to the nearest occupied cell center, or `None` when the
    /// raster has no occupied cell within `search_radius`.
    pub fn clearance(&self, p: WorldPoint, search_radius: f64) -> Option<f64> {
        let reach = (search_radius / self.resolution).ceil() as i64 + 1;
        let (row, col) = self.cell_coords(p);
        let mut best: Option<f64> = None;
        for r in (row - reach)..=(row + reach) {
            if r < 0 || r as usize >= self.height {
                continue;
            }
            for c in (col - reach)..=(col + reach) {
                if c < 0 || c as usize >= self.width {
                    continue;
                }
                let cell = Cell::new(r as usize, c as usize);
                if self.cells[self.index(cell)] {
                    let d = self.cell_center(cell).distance(&p);
                    if d <= search_radius && best.map_or(true, |b| d < b) {
                        best = Some(d);
                    }
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_construction() {
        let o = WorldPoint::new(0.0, 0.0);
        assert_eq!(
            OccupancyGrid::new(0.0, o, 2, 2).unwrap_err(),
            GridError::InvalidResolution(0.0)
        );
        assert!(matches!(
            OccupancyGrid::new(0.1, o, 0, 2),
            Err(GridError::Empty { .. })
        ));
        assert!(matches!(
            OccupancyGrid::from_cells(0.1, o, 2, 2, vec![false; 3]),
            Err(GridError::CellCount { .. })
        ));
    }

    #[test]
    fn cell_center_round_trip() {
        let g = OccupancyGrid::new(0.05, WorldPoint::new(-1.3, 2.1), 40, 30).unwrap();
        for cell in g.free_cells() {
            let c = g.cell_center(cell);
            assert_eq!(g.cell_of(c), Some(cell));
        }
        let p = WorldPoint::new(-0.512, 2.777);
        let c = g.cell_center(g.cell_of(p).unwrap());
        assert!((c.x - p.x).abs() <= 0.025 + 1e-12);
        assert!((c.y - p.y).abs() <= 0.025 + 1e-12);
    }

    #[test]
    fn ascii_top_row_is_highest_y() {
        let g = OccupancyGrid::from_ascii(1.0, WorldPoint::default(), "#..\n...").unwrap();
        assert_eq!((g.width(), g.height()), (3, 2));
        assert!(g.is_occupied(Cell::new(1, 0)));
        assert!(g.is_free(Cell::new(0, 0)));
    }

    #[test]
    fn no_corner_cutting() {
        let g = OccupancyGrid::from_ascii(1.0, WorldPoint::default(), ".#\n..").unwrap();
        let n: Vec<_> = g.free_neighbors(Cell::new(0, 0)).collect();
        assert!(n.contains(&(Cell::new(0, 1), false)));
        assert!(!n.iter().any(|(c, _)| *c == Cell::new(1, 1)));
    }

    #[test]
    fn outside_cells_are_occupied() {
        let g = OccupancyGrid::new(1.0, WorldPoint::default(), 2, 2).unwrap();
        assert!(g.is_occupied(Cell::new(5, 0)));
        assert!(!g.in_bounds(WorldPoint::new(-0.1, 0.5)));
    }
}
