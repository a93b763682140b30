//! Exact Euclidean distance from every cell center to the nearest occupied
//! cell center, and segment clearance queries built on it.

use super::grid::{OccupancyGrid, WorldPoint};

/// Distance transform of an occupancy grid. Occupied cells hold 0; a grid
/// with no occupied cell holds infinity everywhere.
#[derive(Debug, Clone)]
pub struct ClearanceMap {
    dist: Vec<f64>,
    width: usize,
    height: usize,
}

const INF: f64 = 1e20;

/// 1D squared distance transform (lower envelope of parabolas).
fn dt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let s_at = |p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
        let mut s = s_at(v[k]);
        while s <= z[k] {
            k -= 1;
            s = s_at(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

impl ClearanceMap {
    pub fn new(grid: &OccupancyGrid) -> Self {
        let (w, h) = (grid.width(), grid.height());
        let mut sq: Vec<f64> = grid.cells().iter().map(|&o| if o { 0.0 } else { INF }).collect();
        let n = w.max(h);
        let (mut f, mut out) = (vec![0.0; n], vec![0.0; n]);
        let (mut v, mut z) = (vec![0usize; n], vec![0.0; n + 1]);
        for r in 0..h {
            f[..w].copy_from_slice(&sq[r * w..(r + 1) * w]);
            dt_1d(&f[..w], &mut out[..w], &mut v, &mut z);
            sq[r * w..(r + 1) * w].copy_from_slice(&out[..w]);
        }
        for c in 0..w {
            for r in 0..h {
                f[r] = sq[r * w + c];
            }
            dt_1d(&f[..h], &mut out[..h], &mut v, &mut z);
            for r in 0..h {
                sq[r * w + c] = out[r];
            }
        }
        let res = grid.resolution();
        let dist = sq
            .into_iter()
            .map(|d| if d >= INF / 2.0 { f64::INFINITY } else { d.sqrt() * res })
            .collect();
        Self {
            dist,
            width: w,
            height: h,
        }
    }

    /// Clearance of the cell at `index` (row-major), meters.
    pub fn at_index(&self, index: usize) -> f64 {
        self.dist[index]
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

/// Whether every point of segment `a`-`b` lies farther than `radius` from
/// all occupied cell centers. Exact: samples the segment, uses the distance
/// transform as a lower bound, and falls back to a local scan of occupied
/// centers where the bound is inconclusive. Points off the grid fail.
pub fn segment_clear(
    grid: &OccupancyGrid,
    map: &ClearanceMap,
    a: WorldPoint,
    b: WorldPoint,
    radius: f64,
) -> bool {
    let res = grid.resolution();
    let step = res / 2.0;
    let len = a.distance(&b);
    let n = (len / step).ceil().max(1.0) as usize;
    let half = len / n as f64 / 2.0;
    for i in 0..=n {
        let t = i as f64 / n as f64;
        let p = WorldPoint::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t);
        let Some(cell) = grid.cell_of(p) else {
            return false;
        };
        let bound = map.at_index(grid.index(cell)) - p.distance(&grid.cell_center(cell)) - half;
        if bound > radius {
            continue;
        }
        // every occupied center within `radius` of the segment near `p`
        // lies within `radius + half` of `p`
        let reach = radius + half + res;
        let (lo_r, lo_c) = grid.cell_coords(p.offset(-reach, -reach));
        let (hi_r, hi_c) = grid.cell_coords(p.offset(reach, reach));
        for row in lo_r.max(0)..=hi_r.min(grid.height() as i64 - 1) {
            for col in lo_c.max(0)..=hi_c.min(grid.width() as i64 - 1) {
                let c = super::Cell::new(row as usize, col as usize);
                if grid.is_occupied(c) && point_segment_distance(grid.cell_center(c), a, b) <= radius {
                    return false;
                }
            }
        }
    }
    true
}

pub fn point_segment_distance(p: WorldPoint, a: WorldPoint, b: WorldPoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let l2 = dx * dx + dy * dy;
    if l2 == 0.0 {
        return p.distance(&a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / l2).clamp(0.0, 1.0);
    p.distance(&WorldPoint::new(a.x + t * dx, a.y + t * dy))
}
