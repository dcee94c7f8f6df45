//! Frontier detection and the server-side filtering pipeline.
//!
//! Robots detect frontier points on their local maps. The server keeps only
//! the points lying near the border of the merged map (a point qualifies when
//! enough of the cells in a disc around it are still unknown), removes
//! duplicates, and then keeps the list size inside `(min_pts, max_pts)` by
//! relaxing the unknown-percentage threshold when the list is too short and
//! widening the disc when it is too long.

use crate::geometry::{AgentId, Cell, Point2};
use crate::grid_map::{CellState, OccupancyGrid};
use std::collections::{HashSet, VecDeque};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontierPoint {
    pub x: f64,
    pub y: f64,
    pub source_agent: AgentId,
}

impl FrontierPoint {
    pub fn new(x: f64, y: f64, source_agent: AgentId) -> Self {
        Self { x, y, source_agent }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid filter parameters: {0}")]
pub struct InvalidFilterParams(pub String);

/// Border-filter and list-size parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterParams {
    /// Disc radius in meters.
    pub rad: f64,
    /// Minimum percentage of unknown cells in the disc.
    pub per_unk: f64,
    pub min_pts: usize,
    pub max_pts: usize,
    /// Radius increment when the list is too long.
    pub rad_step: f64,
    /// Threshold decrement (percentage points) when the list is too short.
    pub perc_step: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self { rad: 1.0, per_unk: 60.0, min_pts: 0, max_pts: 10, rad_step: 0.25, perc_step: 10.0 }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<(), InvalidFilterParams> {
        let fail = |m: &str| Err(InvalidFilterParams(m.to_string()));
        if !(self.rad > 0.0 && self.rad.is_finite()) {
            return fail("rad must be positive");
        }
        if !(0.0..=100.0).contains(&self.per_unk) {
            return fail("per_unk must lie in [0, 100]");
        }
        if self.min_pts >= self.max_pts {
            return fail("min_pts must be below max_pts");
        }
        if !(self.rad_step > 0.0 && self.rad_step.is_finite()) {
            return fail("rad_step must be positive");
        }
        if !(self.perc_step > 0.0 && self.perc_step.is_finite()) {
            return fail("perc_step must be positive");
        }
        Ok(())
    }
}

/// Free cells with a 4-neighbor that is unknown, grouped into 8-connected
/// clusters. One point per cluster: the member cell nearest to the cluster
/// centroid. Clusters are emitted in row-major order of their first cell.
pub fn detect_frontiers(grid: &OccupancyGrid, agent: AgentId) -> Vec<FrontierPoint> {
    let g = *grid.geometry();
    let is_frontier = |c: Cell| -> bool {
        grid.state(c) == Some(CellState::Free)
            && [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|&(dx, dy)| grid.state(c.offset(dx, dy)) == Some(CellState::Unknown))
    };
    let frontier: Vec<bool> = (0..g.len()).map(|i| is_frontier(g.cell_at(i))).collect();
    let mut visited = vec![false; g.len()];
    let mut points = Vec::new();
    let mut queue = VecDeque::new();
    let mut members = Vec::new();

    for seed in 0..g.len() {
        if !frontier[seed] || visited[seed] {
            continue;
        }
        visited[seed] = true;
        queue.push_back(seed);
        members.clear();
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let c = g.cell_at(i);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(j) = g.index(c.offset(dx, dy)) {
                        if frontier[j] && !visited[j] {
                            visited[j] = true;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        members.sort_unstable();
        let n = members.len() as f64;
        let (sx, sy) = members.iter().fold((0.0, 0.0), |(sx, sy), &i| {
            let c = g.cell_at(i);
            (sx + c.x as f64, sy + c.y as f64)
        });
        let (cx, cy) = (sx / n, sy / n);
        let mut best = members[0];
        let mut best_d = f64::INFINITY;
        for &i in &members {
            let c = g.cell_at(i);
            let d = (c.x as f64 - cx).powi(2) + (c.y as f64 - cy).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        let w = g.grid_to_world(g.cell_at(best));
        points.push(FrontierPoint::new(w.x, w.y, agent));
    }
    points
}

/// Cell offsets `(i, j)` with `i² + j² <= (rad / resolution)²`.
fn disc_offsets(rad: f64, resolution: f64) -> Vec<(i64, i64)> {
    let rad_c = rad / resolution;
    // Absorbs rounding in the division, e.g. 1.0 / 0.1.
    let r2 = rad_c * rad_c + 1e-9;
    let reach = rad_c.floor() as i64 + 1;
    let mut out = Vec::new();
    for j in -reach..=reach {
        for i in -reach..=reach {
            if ((i * i + j * j) as f64) <= r2 {
                out.push((i, j));
            }
        }
    }
    out
}

/// Percentage of in-bounds disc cells that are unknown, or `None` when the
/// disc lies entirely outside the map.
pub fn unknown_percentage(p: Point2, merged: &OccupancyGrid, rad: f64) -> Option<f64> {
    unknown_percentage_with(p, merged, &disc_offsets(rad, merged.geometry().resolution))
}

fn unknown_percentage_with(p: Point2, merged: &OccupancyGrid, offsets: &[(i64, i64)]) -> Option<f64> {
    let center = merged.geometry().world_to_grid(p);
    let (mut unknown, mut total) = (0usize, 0usize);
    for &(i, j) in offsets {
        if let Some(s) = merged.state(center.offset(i, j)) {
            total += 1;
            if s == CellState::Unknown {
                unknown += 1;
            }
        }
    }
    (total != 0).then(|| 100.0 * unknown as f64 / total as f64)
}

/// True when at least `per_unk` percent of the disc of radius `rad` around
/// `p` is unknown in `merged`.
pub fn is_near_border(p: Point2, merged: &OccupancyGrid, rad: f64, per_unk: f64) -> bool {
    unknown_percentage(p, merged, rad).is_some_and(|u| u >= per_unk)
}

/// Keeps border points, dropping any point that falls in a cell already kept.
fn filter_unique<'a>(
    points: impl IntoIterator<Item = &'a FrontierPoint>,
    merged: &OccupancyGrid,
    rad: f64,
    per_unk: f64,
) -> Vec<FrontierPoint> {
    let offsets = disc_offsets(rad, merged.geometry().resolution);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for p in points {
        let near = unknown_percentage_with(p.position(), merged, &offsets).is_some_and(|u| u >= per_unk);
        if near && seen.insert(merged.geometry().world_to_grid(p.position())) {
            out.push(*p);
        }
    }
    out
}

/// Concatenates the per-agent lists and keeps unique border points in
/// first-seen order.
pub fn merge_points(lists: &[Vec<FrontierPoint>], merged: &OccupancyGrid, params: &FilterParams) -> Vec<FrontierPoint> {
    filter_unique(lists.iter().flatten(), merged, params.rad, params.per_unk)
}

/// Removes cell-level duplicates without any border test.
pub fn dedup_points(points: &[FrontierPoint], merged: &OccupancyGrid) -> Vec<FrontierPoint> {
    let mut seen = HashSet::new();
    points.iter().filter(|p| seen.insert(merged.geometry().world_to_grid(p.position()))).copied().collect()
}

/// Result of the list-size control loop.
#[derive(Clone, Debug, PartialEq)]
pub struct ListBounds {
    pub points: Vec<FrontierPoint>,
    /// Disc radius in effect at exit.
    pub rad: f64,
    /// Unknown-percentage threshold in effect at exit.
    pub perc: f64,
    /// Number of refilter passes performed.
    pub passes: usize,
    /// Set when a clamp was reached before the size came into bounds.
    pub exhausted: bool,
}

/// Upper bound on refilter passes: threshold steps down to zero plus radius
/// steps up to the map diagonal.
pub fn max_passes(params: &FilterParams, merged: &OccupancyGrid) -> usize {
    let perc_steps = (params.per_unk / params.perc_step).ceil() as usize;
    let rad_steps = ((merged.geometry().diagonal() - params.rad).max(0.0) / params.rad_step).ceil() as usize;
    perc_steps + rad_steps
}

/// Brings the list size into `(min_pts, max_pts)`.
///
/// A short list is rebuilt from `raw_pts` with the threshold lowered by
/// `perc_step` (the radius stays at `params.rad`); a long list is rebuilt from
/// itself with the radius raised by `rad_step` (the threshold stays at
/// `params.per_unk`). The threshold floors at 0 and the radius is capped at
/// the map diagonal; hitting a cap ends the loop with `exhausted` set.
pub fn enforce_list_bounds(
    uni_pts: Vec<FrontierPoint>,
    raw_pts: &[FrontierPoint],
    merged: &OccupancyGrid,
    params: &FilterParams,
) -> ListBounds {
    let rad_max = merged.geometry().diagonal().max(params.rad);
    let mut out = ListBounds { points: uni_pts, rad: params.rad, perc: params.per_unk, passes: 0, exhausted: false };
    loop {
        let n = out.points.len();
        if n <= params.min_pts {
            if out.perc <= 0.0 {
                out.exhausted = true;
                break;
            }
            out.perc = (out.perc - params.perc_step).max(0.0);
            out.points = filter_unique(raw_pts, merged, params.rad, out.perc);
        } else if n >= params.max_pts {
            if out.rad >= rad_max {
                out.exhausted = true;
                break;
            }
            out.rad = (out.rad + params.rad_step).min(rad_max);
            out.points = filter_unique(&out.points, merged, out.rad, params.per_unk);
        } else {
            break;
        }
        out.passes += 1;
    }
    out
}
