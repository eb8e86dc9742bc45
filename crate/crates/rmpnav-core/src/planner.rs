//! Coarse guidance: occupancy-grid rasterization, 8-connected A* and
//! furthest-visible-waypoint selection.

use crate::vehicle::VehicleGeometry;
use crate::world::{segments_intersect, Environment};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerParams {
    pub resolution: f64,
    /// Added to the vehicle circumradius to form the inflation radius.
    pub inflation_margin: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams { resolution: 0.1, inflation_margin: 0.05 }
    }
}

impl PlannerParams {
    pub fn inflation(&self, geom: &VehicleGeometry) -> f64 {
        geom.circumradius() + self.inflation_margin
    }
}

/// Boolean occupancy over a uniform grid, inflated by the vehicle
/// circumradius at rasterization time.
#[derive(Clone, Debug)]
pub struct OccupancyGrid {
    pub resolution: f64,
    pub origin: Vector2<f64>,
    pub width: usize,
    pub height: usize,
    occupied: Vec<bool>,
}

pub type Cell = (usize, usize);

impl OccupancyGrid {
    pub fn from_cells(
        resolution: f64,
        origin: Vector2<f64>,
        width: usize,
        height: usize,
        occupied: Vec<bool>,
    ) -> Self {
        assert_eq!(occupied.len(), width * height);
        OccupancyGrid { resolution, origin, width, height, occupied }
    }

    /// A cell is occupied iff any segment passes within `inflation` of its
    /// centre.
    pub fn rasterize(env: &Environment, resolution: f64, inflation: f64) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        let width = (env.bounds.width() / resolution).ceil() as usize;
        let height = (env.bounds.height() / resolution).ceil() as usize;
        let origin = env.bounds.min;
        let mut occupied = vec![false; width * height];
        for cy in 0..height {
            for cx in 0..width {
                let c = origin
                    + Vector2::new((cx as f64 + 0.5) * resolution, (cy as f64 + 0.5) * resolution);
                let hit = env.segments.iter().any(|seg| {
                    let e = seg.b - seg.a;
                    let len_sq = e.norm_squared();
                    let t = if len_sq > 0.0 {
                        ((c - seg.a).dot(&e) / len_sq).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    (c - (seg.a + t * e)).norm() <= inflation
                });
                occupied[cy * width + cx] = hit;
            }
        }
        OccupancyGrid { resolution, origin, width, height, occupied }
    }

    pub fn cell_of(&self, p: &Vector2<f64>) -> Option<Cell> {
        let fx = (p.x - self.origin.x) / self.resolution;
        let fy = (p.y - self.origin.y) / self.resolution;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (cx, cy) = (fx as usize, fy as usize);
        (cx < self.width && cy < self.height).then_some((cx, cy))
    }

    pub fn center(&self, cell: Cell) -> Vector2<f64> {
        self.origin
            + Vector2::new(
                (cell.0 as f64 + 0.5) * self.resolution,
                (cell.1 as f64 + 0.5) * self.resolution,
            )
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        cell.0 < self.width && cell.1 < self.height && !self.occupied[cell.1 * self.width + cell.0]
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height)
            .flat_map(move |y| (0..self.width).map(move |x| (x, y)))
            .filter(move |&c| self.is_free(c))
    }
}

/// Ordered waypoints from start cell centre to goal cell centre.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub waypoints: Vec<Vector2<f64>>,
}

impl Path {
    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

/// Exact grid-path cost: counts of straight and diagonal moves. Keeping the
/// counts (instead of accumulating floats) makes cost comparison across
/// algorithms exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct GridCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl GridCost {
    pub fn value(&self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    fn plus(&self, diagonal: bool) -> GridCost {
        GridCost {
            straight: self.straight + !diagonal as u32,
            diagonal: self.diagonal + diagonal as u32,
        }
    }
}

fn octile(a: Cell, b: Cell) -> f64 {
    let dx = a.0.abs_diff(b.0) as f64;
    let dy = a.1.abs_diff(b.1) as f64;
    let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
    (hi - lo) + lo * std::f64::consts::SQRT_2
}

#[derive(PartialEq)]
struct QueueEntry {
    f: f64,
    h: f64,
    cell: Cell,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    // BinaryHeap is a max-heap: invert so the smallest f pops first, ties
    // broken by lower heuristic, then lexicographic cell order
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// 8-connected neighbours; diagonal steps additionally require both
/// orthogonally adjacent cells to be free (no corner cutting).
pub fn grid_neighbors(grid: &OccupancyGrid, cell: Cell) -> Vec<(Cell, bool)> {
    let mut out = Vec::with_capacity(8);
    let (x, y) = (cell.0 as isize, cell.1 as isize);
    for dy in -1..=1isize {
        for dx in -1..=1isize {
            if dx == 0 && dy == 0 {
                continue;
            }
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 {
                continue;
            }
            let n = (nx as usize, ny as usize);
            if !grid.is_free(n) {
                continue;
            }
            let diagonal = dx != 0 && dy != 0;
            if diagonal
                && !(grid.is_free((nx as usize, y as usize))
                    && grid.is_free((x as usize, ny as usize)))
            {
                continue;
            }
            out.push((n, diagonal));
        }
    }
    out
}

/// Cost-optimal 8-connected A* under Euclidean edge costs with the octile
/// heuristic. Returns `None` iff start and goal are disconnected (or either
/// cell is occupied).
pub fn astar(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Option<Path> {
    astar_with_cost(grid, start, goal).map(|(p, _)| p)
}

pub fn astar_with_cost(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Option<(Path, GridCost)> {
    if !grid.is_free(start) || !grid.is_free(goal) {
        return None;
    }
    let idx = |c: Cell| c.1 * grid.width + c.0;
    let mut best: Vec<Option<GridCost>> = vec![None; grid.width * grid.height];
    let mut parent: Vec<Cell> = vec![(usize::MAX, usize::MAX); grid.width * grid.height];
    let mut heap = BinaryHeap::new();
    best[idx(start)] = Some(GridCost::default());
    heap.push(QueueEntry { f: octile(start, goal), h: octile(start, goal), cell: start });
    while let Some(entry) = heap.pop() {
        let g = best[idx(entry.cell)].expect("queued cells have a cost");
        if entry.f > g.value() + octile(entry.cell, goal) {
            continue; // stale entry
        }
        if entry.cell == goal {
            let mut cells = vec![goal];
            let mut c = goal;
            while c != start {
                c = parent[idx(c)];
                cells.push(c);
            }
            cells.reverse();
            let waypoints = cells.into_iter().map(|c| grid.center(c)).collect();
            return Some((Path { waypoints }, g));
        }
        for (n, diagonal) in grid_neighbors(grid, entry.cell) {
            let ng = g.plus(diagonal);
            let better = match &best[idx(n)] {
                Some(old) => ng.value() < old.value(),
                None => true,
            };
            if better {
                best[idx(n)] = Some(ng);
                parent[idx(n)] = entry.cell;
                let h = octile(n, goal);
                heap.push(QueueEntry { f: ng.value() + h, h, cell: n });
            }
        }
    }
    None
}

/// The path point with the greatest index whose open sight line from `pos`
/// is unobstructed; falls back to the nearest path point if none is
/// visible.
pub fn furthest_visible_waypoint(
    path: &Path,
    pos: &Vector2<f64>,
    env: &Environment,
) -> Vector2<f64> {
    assert!(!path.waypoints.is_empty(), "path must be nonempty");
    for w in path.waypoints.iter().rev() {
        let blocked = env.segments.iter().any(|s| segments_intersect(pos, w, &s.a, &s.b));
        if !blocked {
            return *w;
        }
    }
    *path
        .waypoints
        .iter()
        .min_by(|a, b| (*a - pos).norm().total_cmp(&(*b - pos).norm()))
        .expect("nonempty path")
}
