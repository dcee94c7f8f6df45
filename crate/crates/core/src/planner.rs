//! Global grid planning and ideal path following.
//!
//! Paths are 8-connected. An axis step costs one resolution and a diagonal
//! step √2 resolutions; costs are kept exactly as `(axis, diagonal)` step
//! counts so optimality comparisons never depend on floating-point summation
//! order. Unknown cells are traversable, occupied cells are not, and a
//! diagonal step may not cut the corner of an occupied cell.

use crate::geometry::{Cell, Point2, Pose};
use crate::grid_map::{CellState, GridGeometry, OccupancyGrid};
use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("start {0} is outside the map")]
    StartOutOfBounds(Cell),
    #[error("start {0} is inside an obstacle")]
    StartBlocked(Cell),
    #[error("no path")]
    NoPath,
}

/// Exact path cost `axis + diagonal * √2` in cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct PathCost {
    pub axis: u32,
    pub diagonal: u32,
}

impl PathCost {
    pub fn cells(&self) -> f64 {
        self.axis as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    fn step(self, diagonal: bool) -> Self {
        if diagonal {
            Self { diagonal: self.diagonal + 1, ..self }
        } else {
            Self { axis: self.axis + 1, ..self }
        }
    }
}

impl Ord for PathCost {
    fn cmp(&self, other: &Self) -> Ordering {
        // Compare a1 + b1√2 with a2 + b2√2, i.e. da with db√2 where
        // da = a1 - a2 and db = b2 - b1. √2 is irrational, so the two sides
        // are equal only when da = db = 0.
        let da = self.axis as i64 - other.axis as i64;
        let db = other.diagonal as i64 - self.diagonal as i64;
        match (da.signum(), db.signum()) {
            (0, 0) => Ordering::Equal,
            (l, r) if l != r && !(l == 0 || r == 0) => l.cmp(&r),
            (l, 0) => l.cmp(&0),
            (0, r) => 0.cmp(&r),
            (1, _) => (da * da).cmp(&(2 * db * db)),
            _ => (2 * db * db).cmp(&(da * da)),
        }
    }
}

impl PartialOrd for PathCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlannerConfig {
    /// Cells within this Chebyshev distance of an obstacle may be entered as
    /// a final goal but are not expanded through.
    pub inflation: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { inflation: 1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    /// World centers of `cells`.
    pub waypoints: Vec<Point2>,
    pub length_m: f64,
    pub cost: PathCost,
}

impl GridPath {
    pub fn goal(&self) -> Point2 {
        *self.waypoints.last().expect("paths are never empty")
    }
}

const NONE: u32 = u32::MAX;

/// Single-source shortest paths from one start cell.
#[derive(Clone, Debug)]
pub struct DistanceField {
    geometry: GridGeometry,
    cost: Vec<Option<PathCost>>,
    parent: Vec<u32>,
}

impl DistanceField {
    pub fn compute(grid: &OccupancyGrid, start: Point2, config: PlannerConfig) -> Result<Self, PlanError> {
        Self::run(grid, start, config, None)
    }

    fn run(grid: &OccupancyGrid, start: Point2, config: PlannerConfig, stop: Option<usize>) -> Result<Self, PlanError> {
        let g = *grid.geometry();
        let start_cell = g.world_to_grid(start);
        let start_idx = g.index(start_cell).ok_or(PlanError::StartOutOfBounds(start_cell))?;
        if grid.state_at(start_idx) == CellState::Occupied {
            return Err(PlanError::StartBlocked(start_cell));
        }
        let inflated = inflate(grid, config.inflation);
        let occupied = |c: Cell| grid.state(c).is_none_or(|s| s == CellState::Occupied);

        let mut field = Self { geometry: g, cost: vec![None; g.len()], parent: vec![NONE; g.len()] };
        let mut done = vec![false; g.len()];
        let mut heap = BinaryHeap::new();
        field.cost[start_idx] = Some(PathCost::default());
        heap.push(Reverse((PathCost::default(), start_cell.y, start_cell.x)));

        while let Some(Reverse((cost, y, x))) = heap.pop() {
            let c = Cell::new(x, y);
            let i = g.index(c).expect("queued cells are in bounds");
            if done[i] {
                continue;
            }
            done[i] = true;
            if Some(i) == stop {
                break;
            }
            if i != start_idx && inflated[i] {
                continue;
            }
            for (dx, dy) in NEIGHBORS {
                let n = c.offset(dx, dy);
                let Some(j) = g.index(n) else { continue };
                if done[j] || grid.state_at(j) == CellState::Occupied {
                    continue;
                }
                let diagonal = dx != 0 && dy != 0;
                if diagonal && (occupied(c.offset(dx, 0)) || occupied(c.offset(0, dy))) {
                    continue;
                }
                let next = cost.step(diagonal);
                if field.cost[j].is_none_or(|old| next < old) {
                    field.cost[j] = Some(next);
                    field.parent[j] = i as u32;
                    heap.push(Reverse((next, n.y, n.x)));
                }
            }
        }
        Ok(field)
    }

    pub fn cost_to(&self, goal: Point2) -> Option<PathCost> {
        self.geometry.index(self.geometry.world_to_grid(goal)).and_then(|i| self.cost[i])
    }

    pub fn path_to(&self, goal: Point2) -> Result<GridPath, PlanError> {
        let g = &self.geometry;
        let goal_idx = g.index(g.world_to_grid(goal)).ok_or(PlanError::NoPath)?;
        let cost = self.cost[goal_idx].ok_or(PlanError::NoPath)?;
        let mut cells = vec![g.cell_at(goal_idx)];
        let mut i = goal_idx;
        while self.parent[i] != NONE {
            i = self.parent[i] as usize;
            cells.push(g.cell_at(i));
        }
        cells.reverse();
        let waypoints = cells.iter().map(|&c| g.grid_to_world(c)).collect();
        Ok(GridPath { cells, waypoints, length_m: cost.cells() * g.resolution, cost })
    }
}

const NEIGHBORS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Cells within `radius` (Chebyshev) of an occupied cell, excluding the
/// occupied cells themselves.
fn inflate(grid: &OccupancyGrid, radius: usize) -> Vec<bool> {
    let g = grid.geometry();
    let mut out = vec![false; g.len()];
    if radius == 0 {
        return out;
    }
    let r = radius as i64;
    for i in 0..g.len() {
        if grid.state_at(i) != CellState::Occupied {
            continue;
        }
        let c = g.cell_at(i);
        for dy in -r..=r {
            for dx in -r..=r {
                if let Some(j) = g.index(c.offset(dx, dy)) {
                    if grid.state_at(j) != CellState::Occupied {
                        out[j] = true;
                    }
                }
            }
        }
    }
    out
}

/// Shortest path from `start` to `goal`. Ties in the queue are broken by
/// (cost, row, col). Falls back to an uninflated search when inflation
/// leaves the goal unreachable.
pub fn plan(grid: &OccupancyGrid, start: Point2, goal: Point2, config: PlannerConfig) -> Result<GridPath, PlanError> {
    let g = grid.geometry();
    let goal_idx = g.index(g.world_to_grid(goal));
    let attempt = |cfg: PlannerConfig| DistanceField::run(grid, start, cfg, goal_idx)?.path_to(goal);
    match attempt(config) {
        Err(PlanError::NoPath) if config.inflation > 0 => attempt(PlannerConfig { inflation: 0 }),
        other => other,
    }
}

/// Arc-length position of the point on the path polyline closest to `p`.
fn project(path: &GridPath, p: Point2) -> f64 {
    let w = &path.waypoints;
    if w.len() < 2 {
        return 0.0;
    }
    let mut best = (f64::INFINITY, 0.0);
    let mut acc = 0.0;
    for seg in w.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let len = a.distance(&b);
        let t = if len > 0.0 {
            (((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / (len * len)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        let d = q.distance(&p);
        if d < best.0 - 1e-12 {
            best = (d, acc + t * len);
        }
        acc += len;
    }
    best.1
}

fn polyline_length(path: &GridPath) -> f64 {
    path.waypoints.windows(2).map(|s| s[0].distance(&s[1])).sum()
}

/// Path length left between `pose` (projected onto the path) and the goal.
pub fn remaining_length(path: &GridPath, pose: Pose) -> f64 {
    (polyline_length(path) - project(path, pose.position())).max(0.0)
}

/// Advances `speed * dt` meters along the path polyline, facing the direction
/// of travel. Snaps to the goal cell center at the end of the path.
pub fn step_along(path: &GridPath, pose: Pose, speed: f64, dt: f64) -> Pose {
    let w = &path.waypoints;
    if w.len() < 2 {
        let goal = path.goal();
        return Pose::new(goal.x, goal.y, pose.heading);
    }
    let target = project(path, pose.position()) + (speed * dt).max(0.0);
    let mut acc = 0.0;
    for seg in w.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let len = a.distance(&b);
        if target < acc + len {
            let t = (target - acc) / len;
            return Pose::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), (b.y - a.y).atan2(b.x - a.x));
        }
        acc += len;
    }
    let (a, b) = (w[w.len() - 2], w[w.len() - 1]);
    Pose::new(b.x, b.y, (b.y - a.y).atan2(b.x - a.x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: &[&str]) -> OccupancyGrid {
        OccupancyGrid::from_rows(1.0, Point2::default(), rows).unwrap()
    }

    const NO_INFLATION: PlannerConfig = PlannerConfig { inflation: 0 };

    #[test]
    fn cost_ordering_is_exact() {
        let c = |axis, diagonal| PathCost { axis, diagonal };
        assert!(c(1, 0) < c(0, 1));
        assert!(c(2, 0) > c(0, 1));
        assert!(c(3, 0) > c(0, 2)); // 3 > 2.83
        assert!(c(0, 5) < c(8, 0)); // 7.07 < 8
        assert!(c(7, 1) > c(1, 5)); // 8.41 > 8.07
        assert_eq!(c(2, 2).cmp(&c(2, 2)), Ordering::Equal);
        let mut v = [c(3, 0), c(0, 2), c(1, 1), c(2, 0), c(0, 1)];
        v.sort();
        let cells: Vec<f64> = v.iter().map(PathCost::cells).collect();
        assert!(cells.windows(2).all(|w| w[0] < w[1]), "{cells:?}");
    }

    #[test]
    fn straight_corridor() {
        let g = grid(&["##########", "..........", "##########"]);
        let p = plan(&g, Point2::new(0.5, 1.5), Point2::new(9.5, 1.5), NO_INFLATION).unwrap();
        assert_eq!(p.length_m, 9.0);
        assert_eq!(p.cells.len(), 10);
    }

    #[test]
    fn sealed_goal_has_no_path() {
        let g = grid(&[".....", ".###.", ".#.#.", ".###.", "....."]);
        assert_eq!(plan(&g, Point2::new(0.5, 0.5), Point2::new(2.5, 2.5), NO_INFLATION), Err(PlanError::NoPath));
    }

    #[test]
    fn start_errors() {
        let g = grid(&["#.."]);
        assert!(matches!(
            plan(&g, Point2::new(0.5, 0.5), Point2::new(2.5, 0.5), NO_INFLATION),
            Err(PlanError::StartBlocked(_))
        ));
        assert!(matches!(
            plan(&g, Point2::new(-3.0, 0.5), Point2::new(2.5, 0.5), NO_INFLATION),
            Err(PlanError::StartOutOfBounds(_))
        ));
    }

    #[test]
    fn no_corner_cutting() {
        // Diagonal from (0,0) to (1,1) would clip the obstacle at (1,0).
        let g = grid(&["..", ".#", ".."]);
        let g2 = grid(&["..", ".."]);
        let open = plan(&g2, Point2::new(0.5, 0.5), Point2::new(1.5, 1.5), NO_INFLATION).unwrap();
        assert_eq!(open.cost, PathCost { axis: 0, diagonal: 1 });
        let p = plan(&g, Point2::new(0.5, 2.5), Point2::new(1.5, 0.5), NO_INFLATION).unwrap();
        assert_eq!(p.cost, PathCost { axis: 3, diagonal: 0 });
    }

    #[test]
    fn unknown_is_traversable() {
        let g = grid(&["??????", ".####.", "######"]);
        let p = plan(&g, Point2::new(0.5, 1.5), Point2::new(5.5, 1.5), NO_INFLATION).unwrap();
        assert!(p.cells.iter().any(|&c| g.state(c) == Some(CellState::Unknown)));
        assert_eq!(p.cost, PathCost { axis: 7, diagonal: 0 });
    }

    #[test]
    fn inflation_keeps_off_walls_and_falls_back() {
        let g = grid(&["..........", "..........", "....#.....", "..........", ".........."]);
        let p = plan(&g, Point2::new(0.5, 2.5), Point2::new(9.5, 2.5), PlannerConfig { inflation: 1 }).unwrap();
        for c in &p.cells {
            assert!((c.x - 4).abs() > 1 || (c.y - 2).abs() > 1, "{c}");
        }
        // A one-cell-wide corridor is fully inflated; the fallback still finds it.
        let narrow = grid(&["#####", ".....", "#####"]);
        let p = plan(&narrow, Point2::new(0.5, 1.5), Point2::new(4.5, 1.5), PlannerConfig { inflation: 1 }).unwrap();
        assert_eq!(p.length_m, 4.0);
    }

    #[test]
    fn distance_field_matches_single_pair_plans() {
        let g = grid(&["..#.....", "..#.##..", "....#...", ".##.#.#.", "......#."]);
        let start = Point2::new(0.5, 0.5);
        let field = DistanceField::compute(&g, start, NO_INFLATION).unwrap();
        for i in 0..g.cells().len() {
            let goal = g.geometry().grid_to_world(g.geometry().cell_at(i));
            match (field.path_to(goal), plan(&g, start, goal, NO_INFLATION)) {
                (Ok(a), Ok(b)) => assert_eq!(a, b),
                (Err(a), Err(b)) => assert_eq!(a, b),
                (a, b) => panic!("{a:?} vs {b:?}"),
            }
        }
    }

    fn straight_path(n: usize) -> GridPath {
        let g = grid(&[&".".repeat(n)]);
        plan(&g, Point2::new(0.5, 0.5), Point2::new(n as f64 - 0.5, 0.5), NO_INFLATION).unwrap()
    }

    #[test]
    fn step_advances_by_speed_times_dt() {
        let path = straight_path(6);
        let p = step_along(&path, Pose::new(0.5, 0.5, 0.0), 1.0, 1.0);
        assert!((p.x - 1.5).abs() < 1e-12 && (p.y - 0.5).abs() < 1e-12);
        assert_eq!(p.heading, 0.0);
    }

    #[test]
    fn step_clamps_at_goal() {
        let path = straight_path(6);
        let p = step_along(&path, Pose::new(5.2, 0.5, 0.0), 1.0, 1.0);
        assert_eq!((p.x, p.y), (5.5, 0.5));
        assert_eq!(remaining_length(&path, p), 0.0);
    }

    #[test]
    fn heading_turns_at_corner() {
        let g = grid(&["#..", "#.#", "..#"]);
        let path = plan(&g, Point2::new(0.5, 0.5), Point2::new(1.5, 2.5), NO_INFLATION).unwrap();
        assert_eq!(path.cells, vec![Cell::new(0, 0), Cell::new(1, 0), Cell::new(1, 1), Cell::new(1, 2)]);
        let before = step_along(&path, Pose::new(0.5, 0.5, 0.0), 0.5, 1.0);
        assert_eq!(before.heading, 0.0);
        let after = step_along(&path, before, 1.0, 1.0);
        assert!((after.heading - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((after.x - 1.5).abs() < 1e-12 && (after.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn following_terminates() {
        let g = grid(&[".........", ".#######.", ".........", "########.", "........."]);
        let path = plan(&g, Point2::new(0.5, 0.5), Point2::new(0.5, 4.5), NO_INFLATION).unwrap();
        let mut pose = Pose::new(0.5, 0.5, 0.0);
        let mut left = remaining_length(&path, pose);
        for _ in 0..1000 {
            if left == 0.0 {
                break;
            }
            pose = step_along(&path, pose, 0.3, 0.5);
            let now = remaining_length(&path, pose);
            assert!(now < left);
            left = now;
        }
        assert_eq!(left, 0.0);
        assert_eq!(pose.position(), path.goal());
    }
}
