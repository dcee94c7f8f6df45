//! Simulated lidar and scan integration.

use super::{CellState, GridError, GridGeometry, GroundTruthMap, OccupancyGrid, Result};
use crate::geometry::{Cell, Point2, Pose};
use std::f64::consts::TAU;

/// Exact grid traversal along a ray: yields every cell the ray crosses, in
/// order, together with the ray parameter at which the cell is entered.
///
/// When the ray passes exactly through a cell corner, the cell on the x side
/// is visited before the diagonal one, so diagonal walls cannot be crossed.
#[derive(Clone, Debug)]
pub struct RayTraversal {
    cell: Cell,
    step: (i64, i64),
    t_max: (f64, f64),
    t_delta: (f64, f64),
    t_enter: f64,
    started: bool,
}

impl RayTraversal {
    pub fn new(geometry: &GridGeometry, origin: Point2, heading: f64) -> Self {
        let (dy, dx) = heading.sin_cos();
        let cell = geometry.world_to_grid(origin);
        let res = geometry.resolution;
        let axis = |d: f64, o: f64, origin: f64, c: i64| -> (i64, f64, f64) {
            if d.abs() < 1e-12 {
                return (0, f64::INFINITY, f64::INFINITY);
            }
            let local = o - origin;
            if d > 0.0 {
                let boundary = (c + 1) as f64 * res;
                (1, (boundary - local) / d, res / d)
            } else {
                let boundary = c as f64 * res;
                (-1, (boundary - local) / d, -res / d)
            }
        };
        let (sx, tx, dtx) = axis(dx, origin.x, geometry.origin_x, cell.x);
        let (sy, ty, dty) = axis(dy, origin.y, geometry.origin_y, cell.y);
        Self {
            cell,
            step: (sx, sy),
            t_max: (tx.max(0.0), ty.max(0.0)),
            t_delta: (dtx, dty),
            t_enter: 0.0,
            started: false,
        }
    }
}

impl Iterator for RayTraversal {
    type Item = (Cell, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if !self.started {
            self.started = true;
            return Some((self.cell, 0.0));
        }
        if self.t_max.0 <= self.t_max.1 {
            self.t_enter = self.t_max.0;
            self.cell.x += self.step.0;
            self.t_max.0 += self.t_delta.0;
        } else {
            self.t_enter = self.t_max.1;
            self.cell.y += self.step.1;
            self.t_max.1 += self.t_delta.1;
        }
        if !self.t_enter.is_finite() {
            return None;
        }
        Some((self.cell, self.t_enter))
    }
}

/// One 360-degree lidar sweep. Beam `i` points along
/// `pose.heading + i * 2π / beam_count`.
#[derive(Clone, Debug, PartialEq)]
pub struct LidarScan {
    pub beam_count: usize,
    pub max_range: f64,
    pub pose: Pose,
    pub ranges: Vec<f64>,
}

impl LidarScan {
    /// Range value encoding "no return".
    pub fn no_hit(&self) -> f64 {
        self.max_range + 1.0
    }

    pub fn is_hit(&self, beam: usize) -> bool {
        self.ranges[beam] <= self.max_range
    }

    pub fn beam_heading(&self, beam: usize) -> f64 {
        self.pose.heading + TAU * beam as f64 / self.beam_count as f64
    }
}

/// Casts `beam_count` evenly spaced beams through the ground truth. A hit
/// reports the distance to the center of the first occupied cell.
pub fn raycast(truth: &GroundTruthMap, pose: Pose, beam_count: usize, max_range: f64) -> Result<LidarScan> {
    let geometry = truth.geometry();
    let origin = pose.position();
    let start = geometry.world_to_grid(origin);
    if truth.is_occupied(start) {
        return Err(GridError::EmbeddedInObstacle(start));
    }
    let mut scan = LidarScan { beam_count, max_range, pose, ranges: Vec::with_capacity(beam_count) };
    let no_hit = scan.no_hit();
    for beam in 0..beam_count {
        let mut range = no_hit;
        for (cell, _) in RayTraversal::new(geometry, origin, scan.beam_heading(beam)).skip(1) {
            if !geometry.contains(cell) {
                break;
            }
            let d = geometry.grid_to_world(cell).distance(&origin);
            if d > max_range {
                break;
            }
            if truth.is_occupied(cell) {
                range = d;
                break;
            }
        }
        scan.ranges.push(range);
    }
    Ok(scan)
}

impl OccupancyGrid {
    /// Marks cells along every beam free and hit cells occupied. Occupied
    /// cells stay occupied.
    pub fn integrate_scan(&mut self, scan: &LidarScan) {
        let geometry = *self.geometry();
        let origin = scan.pose.position();
        let start = geometry.world_to_grid(origin);
        self.mark_free(start);
        let mut walked: Vec<(Cell, f64)> = Vec::new();
        for beam in 0..scan.beam_count {
            let hit = scan.is_hit(beam);
            let limit = if hit { scan.ranges[beam] + geometry.resolution } else { scan.max_range };
            walked.clear();
            for (cell, _) in RayTraversal::new(&geometry, origin, scan.beam_heading(beam)).skip(1) {
                if !geometry.contains(cell) {
                    break;
                }
                let d = geometry.grid_to_world(cell).distance(&origin);
                if d > limit {
                    break;
                }
                walked.push((cell, d));
            }
            let free_until = if hit {
                // The hit cell is the walked cell whose center distance best
                // matches the measured range (first one on ties).
                let range = scan.ranges[beam];
                let best = walked.iter().enumerate().fold(None::<(usize, f64)>, |acc, (i, &(_, d))| {
                    let err = (d - range).abs();
                    match acc {
                        Some((_, e)) if e <= err => acc,
                        _ => Some((i, err)),
                    }
                });
                match best {
                    Some((i, _)) => {
                        self.set(walked[i].0, CellState::Occupied);
                        i
                    }
                    None => 0,
                }
            } else {
                walked.len()
            };
            for &(cell, _) in &walked[..free_until] {
                self.mark_free(cell);
            }
        }
    }

    fn mark_free(&mut self, c: Cell) {
        if self.state(c) == Some(CellState::Unknown) {
            self.set(c, CellState::Free);
        }
    }
}
