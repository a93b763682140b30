//! 8-connected A* planning and geodesic distances on occupancy rasters.
//!
//! Straight moves cost one resolution and diagonal moves `sqrt(2)` resolutions.
//! Lattice costs are tracked as `(straight, diagonal)` move counts so the same
//! path cost is always evaluated to the same float, whichever search found it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::grid::{Cell, OccupancyGrid, WorldPoint};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum PlanError {
    #[error("start or goal lies outside the grid")]
    OutOfBounds,
    #[error("no collision-free path between start and goal")]
    NoPath,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("target unreachable")]
pub struct Unreachable;

/// Waypoint sequence from a planner, with its metric length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub waypoints: Vec<WorldPoint>,
    pub length: f64,
}

impl PlannedPath {
    pub fn from_waypoints(waypoints: Vec<WorldPoint>) -> Self {
        let length = polyline_length(&waypoints);
        Self { waypoints, length }
    }

    pub fn start(&self) -> Option<WorldPoint> {
        self.waypoints.first().copied()
    }

    pub fn end(&self) -> Option<WorldPoint> {
        self.waypoints.last().copied()
    }

    /// Append `other`, dropping its first waypoint when it repeats our last.
    pub fn concat(&mut self, other: &PlannedPath) {
        let skip = match (self.waypoints.last(), other.waypoints.first()) {
            (Some(a), Some(b)) if a == b => 1,
            _ => 0,
        };
        self.waypoints.extend(other.waypoints.iter().skip(skip).copied());
        self.length = polyline_length(&self.waypoints);
    }
}

pub fn polyline_length(points: &[WorldPoint]) -> f64 {
    points.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

/// Lattice cost as straight/diagonal move counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct MoveCount {
    straight: u32,
    diagonal: u32,
}

impl MoveCount {
    const INF: MoveCount = MoveCount {
        straight: u32::MAX,
        diagonal: u32::MAX,
    };

    fn value(self) -> f64 {
        if self == Self::INF {
            f64::INFINITY
        } else {
            self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
        }
    }

    fn add(self, diagonal: bool) -> MoveCount {
        if diagonal {
            MoveCount {
                straight: self.straight,
                diagonal: self.diagonal + 1,
            }
        } else {
            MoveCount {
                straight: self.straight + 1,
                diagonal: self.diagonal,
            }
        }
    }
}

/// Open-set entry; the heap pops the smallest key, then the smallest cell.
#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    key: f64,
    cell: Cell,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

fn octile(a: Cell, b: Cell) -> f64 {
    let dr = a.row.abs_diff(b.row) as f64;
    let dc = a.col.abs_diff(b.col) as f64;
    let (lo, hi) = if dr < dc { (dr, dc) } else { (dc, dr) };
    (hi - lo) + lo * std::f64::consts::SQRT_2
}

/// Shortest 8-connected path between two world points over free cells.
///
/// Waypoints are the exact start point, the centers of the traversed cells
/// and the exact goal point. Ties in the open set are broken by `(row, col)`.
pub fn astar(
    grid: &OccupancyGrid,
    start: WorldPoint,
    goal: WorldPoint,
) -> Result<PlannedPath, PlanError> {
    let start_cell = grid.cell_of(start).ok_or(PlanError::OutOfBounds)?;
    let goal_cell = grid.cell_of(goal).ok_or(PlanError::OutOfBounds)?;
    if grid.is_occupied(start_cell) || grid.is_occupied(goal_cell) {
        return Err(PlanError::NoPath);
    }
    let cells = astar_cells(grid, start_cell, goal_cell).ok_or(PlanError::NoPath)?;
    Ok(assemble_path(grid, start, goal, &cells))
}

/// Cell sequence from `start` to `goal` inclusive, or `None` if disconnected.
pub fn astar_cells(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Option<Vec<Cell>> {
    if grid.is_occupied(start) || grid.is_occupied(goal) {
        return None;
    }
    let n = grid.len();
    let mut g = vec![MoveCount::INF; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();

    let si = grid.index(start);
    g[si] = MoveCount::default();
    open.push(OpenEntry {
        key: octile(start, goal),
        cell: start,
    });

    while let Some(OpenEntry { cell, .. }) = open.pop() {
        let ci = grid.index(cell);
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        if cell == goal {
            return Some(trace(grid, &parent, ci));
        }
        let gc = g[ci];
        for (next, diagonal) in grid.free_neighbors(cell) {
            let ni = grid.index(next);
            if closed[ni] {
                continue;
            }
            let candidate = gc.add(diagonal);
            if candidate.value() < g[ni].value() {
                g[ni] = candidate;
                parent[ni] = ci;
                open.push(OpenEntry {
                    key: candidate.value() + octile(next, goal),
                    cell: next,
                });
            }
        }
    }
    None
}

fn trace(grid: &OccupancyGrid, parent: &[usize], mut idx: usize) -> Vec<Cell> {
    let mut cells = vec![grid.cell_at(idx)];
    while parent[idx] != usize::MAX {
        idx = parent[idx];
        cells.push(grid.cell_at(idx));
    }
    cells.reverse();
    cells
}

fn assemble_path(
    grid: &OccupancyGrid,
    start: WorldPoint,
    goal: WorldPoint,
    cells: &[Cell],
) -> PlannedPath {
    if cells.len() == 1 {
        let waypoints = if start == goal { vec![start] } else { vec![start, goal] };
        return PlannedPath::from_waypoints(waypoints);
    }
    let mut waypoints = Vec::with_capacity(cells.len() + 2);
    waypoints.push(start);
    for &cell in cells {
        let c = grid.cell_center(cell);
        if waypoints.last() != Some(&c) {
            waypoints.push(c);
        }
    }
    if waypoints.last() != Some(&goal) {
        waypoints.push(goal);
    }
    PlannedPath::from_waypoints(waypoints)
}

/// Length of the shortest free path between `a` and `b`.
pub fn geodesic_distance(
    grid: &OccupancyGrid,
    a: WorldPoint,
    b: WorldPoint,
) -> Result<f64, Unreachable> {
    astar(grid, a, b).map(|p| p.length).map_err(|_| Unreachable)
}

/// Single-source lattice distances to one goal point, for repeated geodesic
/// queries against the same target.
///
/// `geodesic_from(p)` agrees with [`geodesic_distance`] up to float summation
/// order.
#[derive(Debug, Clone)]
pub struct DistanceField {
    goal: WorldPoint,
    goal_cell: Cell,
    resolution: f64,
    lattice: Vec<f64>,
    grid_width: usize,
    grid_height: usize,
    origin: WorldPoint,
}

impl DistanceField {
    pub fn new(grid: &OccupancyGrid, goal: WorldPoint) -> Result<Self, PlanError> {
        let goal_cell = grid.cell_of(goal).ok_or(PlanError::OutOfBounds)?;
        if grid.is_occupied(goal_cell) {
            return Err(PlanError::NoPath);
        }
        let n = grid.len();
        let mut g = vec![MoveCount::INF; n];
        let mut closed = vec![false; n];
        let mut open = BinaryHeap::new();
        g[grid.index(goal_cell)] = MoveCount::default();
        open.push(OpenEntry {
            key: 0.0,
            cell: goal_cell,
        });
        while let Some(OpenEntry { cell, .. }) = open.pop() {
            let ci = grid.index(cell);
            if closed[ci] {
                continue;
            }
            closed[ci] = true;
            let gc = g[ci];
            for (next, diagonal) in grid.free_neighbors(cell) {
                let ni = grid.index(next);
                if closed[ni] {
                    continue;
                }
                let candidate = gc.add(diagonal);
                if candidate.value() < g[ni].value() {
                    g[ni] = candidate;
                    open.push(OpenEntry {
                        key: candidate.value(),
                        cell: next,
                    });
                }
            }
        }
        Ok(Self {
            goal,
            goal_cell,
            resolution: grid.resolution(),
            lattice: g.into_iter().map(MoveCount::value).collect(),
            grid_width: grid.width(),
            grid_height: grid.height(),
            origin: grid.origin(),
        })
    }

    pub fn goal(&self) -> WorldPoint {
        self.goal
    }

    fn cell_of(&self, p: WorldPoint) -> Option<Cell> {
        if !p.is_finite() {
            return None;
        }
        let col = ((p.x - self.origin.x) / self.resolution).floor();
        let row = ((p.y - self.origin.y) / self.resolution).floor();
        if row < 0.0 || col < 0.0 {
            return None;
        }
        let (row, col) = (row as usize, col as usize);
        (row < self.grid_height && col < self.grid_width).then_some(Cell::new(row, col))
    }

    fn center(&self, cell: Cell) -> WorldPoint {
        WorldPoint::new(
            self.origin.x + (cell.col as f64 + 0.5) * self.resolution,
            self.origin.y + (cell.row as f64 + 0.5) * self.resolution,
        )
    }

    /// Lattice distance in meters from the center of `cell` to the goal cell center.
    pub fn lattice_distance(&self, cell: Cell) -> Option<f64> {
        if cell.row >= self.grid_height || cell.col >= self.grid_width {
            return None;
        }
        let v = self.lattice[cell.row * self.grid_width + cell.col];
        v.is_finite().then_some(v * self.resolution)
    }

    /// Geodesic distance from `p` to the goal; `None` when `p` is off-grid,
    /// occupied, or disconnected from the goal.
    pub fn geodesic_from(&self, p: WorldPoint) -> Option<f64> {
        let cell = self.cell_of(p)?;
        if cell == self.goal_cell {
            return Some(p.distance(&self.goal));
        }
        let lattice = self.lattice_distance(cell)?;
        Some(
            p.distance(&self.center(cell))
                + lattice
                + self.center(self.goal_cell).distance(&self.goal),
        )
    }
}
