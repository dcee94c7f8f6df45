//! Occupancy grids, ground-truth worlds and the map-level metrics.
//!
//! Cells are stored row-major with `index = col + row * width`; row 0 sits
//! at `origin_y` and rows grow towards +y. Each cell is in one of three
//! classes, and its occupancy probability is the configured value of that
//! class (see [`ClassProbabilities`]).

mod pgm;
mod quality;
mod raycast;

pub use pgm::{ground_truth_from_bytes, load_ground_truth, load_occupancy, save_occupancy, MapMetadata};
pub use quality::{alignment_error, map_quality, rmse, ssim, MapQuality, SSIM_WINDOW};
pub use raycast::{raycast, LidarScan, RayTraversal};

use crate::geometry::{Cell, Point2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid geometry: {0}")]
    InvalidGeometry(String),
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("cannot merge grids with resolutions {0} and {1}")]
    ResolutionMismatch(f64, f64),
    #[error("grids are not aligned to a common cell lattice")]
    LatticeMismatch,
    #[error("grid geometry does not match the reference map")]
    GeometryMismatch,
    #[error("nothing to merge")]
    EmptyMerge,
    #[error("robot embedded in obstacle at cell {0}")]
    EmbeddedInObstacle(Cell),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed map file: {0}")]
    Format(String),
}

pub type Result<T, E = GridError> = std::result::Result<T, E>;

/// Resolution, origin and extent of a cell lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridGeometry {
    pub resolution: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    pub width: usize,
    pub height: usize,
}

impl GridGeometry {
    pub fn new(resolution: f64, origin_x: f64, origin_y: f64, width: usize, height: usize) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(GridError::InvalidGeometry(format!("resolution {resolution}")));
        }
        if width == 0 || height == 0 {
            return Err(GridError::InvalidGeometry(format!("extent {width}x{height}")));
        }
        if !(origin_x.is_finite() && origin_y.is_finite()) {
            return Err(GridError::InvalidGeometry("non-finite origin".into()));
        }
        Ok(Self { resolution, origin_x, origin_y, width, height })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Floor of the offset from the origin in cells. Out-of-bounds cells are
    /// returned as-is.
    pub fn world_to_grid(&self, p: Point2) -> Cell {
        Cell::new(
            ((p.x - self.origin_x) / self.resolution).floor() as i64,
            ((p.y - self.origin_y) / self.resolution).floor() as i64,
        )
    }

    /// World coordinates of the cell center.
    pub fn grid_to_world(&self, c: Cell) -> Point2 {
        Point2::new(
            self.origin_x + (c.x as f64 + 0.5) * self.resolution,
            self.origin_y + (c.y as f64 + 0.5) * self.resolution,
        )
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    pub fn index(&self, c: Cell) -> Option<usize> {
        self.contains(c).then(|| c.x as usize + c.y as usize * self.width)
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new((index % self.width) as i64, (index / self.width) as i64)
    }

    /// Length of the map diagonal in meters.
    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64) * self.resolution
    }

    pub fn same_lattice(&self, other: &GridGeometry) -> bool {
        const EPS: f64 = 1e-9;
        self.width == other.width
            && self.height == other.height
            && (self.resolution - other.resolution).abs() <= EPS
            && (self.origin_x - other.origin_x).abs() <= EPS
            && (self.origin_y - other.origin_y).abs() <= EPS
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellState {
    Unknown,
    Free,
    Occupied,
}

impl CellState {
    pub fn is_known(self) -> bool {
        self != CellState::Unknown
    }

    /// Conflict rule for fusing two observations of one cell:
    /// Occupied > Free > Unknown.
    pub fn fuse(self, other: CellState) -> CellState {
        self.max(other)
    }

    /// Grayscale rendering value.
    pub fn gray(self) -> u8 {
        match self {
            CellState::Occupied => 0,
            CellState::Unknown => 128,
            CellState::Free => 255,
        }
    }
}

/// Occupancy probability assigned to each cell class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassProbabilities {
    pub unknown: f64,
    pub free: f64,
    pub occupied: f64,
}

impl Default for ClassProbabilities {
    fn default() -> Self {
        Self { unknown: 0.5, free: 0.05, occupied: 0.95 }
    }
}

impl ClassProbabilities {
    pub fn validate(&self) -> Result<()> {
        for p in [self.unknown, self.free, self.occupied] {
            if !(0.0..=1.0).contains(&p) {
                return Err(GridError::ProbabilityOutOfRange(p));
            }
        }
        Ok(())
    }

    pub fn of(&self, state: CellState) -> f64 {
        match state {
            CellState::Unknown => self.unknown,
            CellState::Free => self.free,
            CellState::Occupied => self.occupied,
        }
    }
}

/// Binary entropy in bits of a Bernoulli cell with occupancy probability `p`.
pub fn cell_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GridError::ProbabilityOutOfRange(p));
    }
    let term = |q: f64| if q > 0.0 { q * q.log2() } else { 0.0 };
    Ok(0.0 - (term(p) + term(1.0 - p)))
}

/// Tri-state occupancy grid.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    geometry: GridGeometry,
    cells: Vec<CellState>,
    probabilities: ClassProbabilities,
}

impl OccupancyGrid {
    /// All-unknown grid.
    pub fn new(geometry: GridGeometry) -> Self {
        Self { cells: vec![CellState::Unknown; geometry.len()], geometry, probabilities: ClassProbabilities::default() }
    }

    pub fn from_states(geometry: GridGeometry, cells: Vec<CellState>) -> Result<Self> {
        if cells.len() != geometry.len() {
            return Err(GridError::InvalidGeometry(format!(
                "{} cells for a {}x{} grid",
                cells.len(),
                geometry.width,
                geometry.height
            )));
        }
        Ok(Self { geometry, cells, probabilities: ClassProbabilities::default() })
    }

    /// Builds a grid from text rows, top row first: `#` occupied, `.` free,
    /// anything else unknown.
    pub fn from_rows(resolution: f64, origin: Point2, rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let geometry = GridGeometry::new(resolution, origin.x, origin.y, width, height)?;
        let mut cells = vec![CellState::Unknown; geometry.len()];
        for (r, line) in rows.iter().enumerate() {
            if line.chars().count() != width {
                return Err(GridError::InvalidGeometry("ragged rows".into()));
            }
            let y = height - 1 - r;
            for (x, ch) in line.chars().enumerate() {
                cells[x + y * width] = match ch {
                    '#' => CellState::Occupied,
                    '.' => CellState::Free,
                    _ => CellState::Unknown,
                };
            }
        }
        Self::from_states(geometry, cells)
    }

    pub fn with_probabilities(mut self, probabilities: ClassProbabilities) -> Result<Self> {
        probabilities.validate()?;
        self.probabilities = probabilities;
        Ok(self)
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn probabilities(&self) -> &ClassProbabilities {
        &self.probabilities
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn state(&self, c: Cell) -> Option<CellState> {
        self.geometry.index(c).map(|i| self.cells[i])
    }

    pub fn state_at(&self, index: usize) -> CellState {
        self.cells[index]
    }

    /// Sets an in-bounds cell; returns false when `c` is outside the grid.
    pub fn set(&mut self, c: Cell, state: CellState) -> bool {
        match self.geometry.index(c) {
            Some(i) => {
                self.cells[i] = state;
                true
            }
            None => false,
        }
    }

    pub fn probability(&self, c: Cell) -> Option<f64> {
        self.state(c).map(|s| self.probabilities.of(s))
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&s| s == state).count()
    }

    pub fn known_count(&self) -> usize {
        self.cells.iter().filter(|s| s.is_known()).count()
    }

    /// Sum of per-cell entropies in bits.
    pub fn entropy(&self) -> f64 {
        map_entropy(self)
    }

    /// Row-major grayscale image (row 0 first): 0 occupied, 128 unknown,
    /// 255 free.
    pub fn render(&self) -> Vec<u8> {
        self.cells.iter().map(|s| s.gray()).collect()
    }
}

/// Shannon entropy of the whole map in bits.
pub fn map_entropy(grid: &OccupancyGrid) -> f64 {
    let p = grid.probabilities;
    // Class probabilities are validated on construction.
    let [hu, hf, ho] = [p.unknown, p.free, p.occupied].map(|q| cell_entropy(q).unwrap_or(0.0));
    let mut counts = [0usize; 3];
    for s in &grid.cells {
        counts[*s as usize] += 1;
    }
    counts[0] as f64 * hu + counts[1] as f64 * hf + counts[2] as f64 * ho
}

/// Binary world used for sensing and as the metric reference.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthMap {
    geometry: GridGeometry,
    occupied: Vec<bool>,
}

impl GroundTruthMap {
    pub fn new(geometry: GridGeometry, occupied: Vec<bool>) -> Result<Self> {
        if occupied.len() != geometry.len() {
            return Err(GridError::InvalidGeometry("cell count mismatch".into()));
        }
        Ok(Self { geometry, occupied })
    }

    /// Text rows, top row first: `#` occupied, anything else free.
    pub fn from_rows(resolution: f64, origin: Point2, rows: &[&str]) -> Result<Self> {
        let grid = OccupancyGrid::from_rows(resolution, origin, rows)?;
        Ok(Self { geometry: grid.geometry, occupied: grid.cells.iter().map(|&s| s == CellState::Occupied).collect() })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    /// Out-of-bounds cells are reported as not occupied.
    pub fn is_occupied(&self, c: Cell) -> bool {
        self.geometry.index(c).is_some_and(|i| self.occupied[i])
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.geometry.index(c).is_some_and(|i| !self.occupied[i])
    }

    pub fn occupied_cells(&self) -> &[bool] {
        &self.occupied
    }

    pub fn state(&self, c: Cell) -> Option<CellState> {
        self.geometry.index(c).map(|i| self.state_at(i))
    }

    pub fn state_at(&self, index: usize) -> CellState {
        if self.occupied[index] {
            CellState::Occupied
        } else {
            CellState::Free
        }
    }

    /// The truth as a fully known occupancy grid.
    pub fn to_grid(&self) -> OccupancyGrid {
        let cells = (0..self.geometry.len()).map(|i| self.state_at(i)).collect();
        OccupancyGrid { geometry: self.geometry, cells, probabilities: ClassProbabilities::default() }
    }

    pub fn render(&self) -> Vec<u8> {
        (0..self.geometry.len()).map(|i| self.state_at(i).gray()).collect()
    }
}

/// Cell-wise fusion of grids sharing a resolution and world frame. The result
/// spans the union bounding box.
pub fn merge_maps(grids: &[OccupancyGrid]) -> Result<OccupancyGrid> {
    let first = grids.first().ok_or(GridError::EmptyMerge)?;
    let res = first.geometry.resolution;
    for g in &grids[1..] {
        if (g.geometry.resolution - res).abs() > 1e-9 * res {
            return Err(GridError::ResolutionMismatch(res, g.geometry.resolution));
        }
    }
    if grids[1..].iter().all(|g| g.geometry.same_lattice(&first.geometry)) {
        let mut merged = first.clone();
        for g in &grids[1..] {
            for (m, s) in merged.cells.iter_mut().zip(&g.cells) {
                *m = m.fuse(*s);
            }
        }
        return Ok(merged);
    }

    let min_x = grids.iter().map(|g| g.geometry.origin_x).fold(f64::INFINITY, f64::min);
    let min_y = grids.iter().map(|g| g.geometry.origin_y).fold(f64::INFINITY, f64::min);
    let lattice_offset = |v: f64| -> Result<usize> {
        let cells = v / res;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-6 {
            return Err(GridError::LatticeMismatch);
        }
        Ok(rounded as usize)
    };
    let mut offsets = Vec::with_capacity(grids.len());
    let (mut width, mut height) = (0, 0);
    for g in grids {
        let ox = lattice_offset(g.geometry.origin_x - min_x)?;
        let oy = lattice_offset(g.geometry.origin_y - min_y)?;
        width = width.max(ox + g.geometry.width);
        height = height.max(oy + g.geometry.height);
        offsets.push((ox, oy));
    }
    let geometry = GridGeometry::new(res, min_x, min_y, width, height)?;
    let mut merged = OccupancyGrid::new(geometry);
    merged.probabilities = first.probabilities;
    for (g, (ox, oy)) in grids.iter().zip(offsets) {
        for y in 0..g.geometry.height {
            for x in 0..g.geometry.width {
                let m = &mut merged.cells[(x + ox) + (y + oy) * width];
                *m = m.fuse(g.cells[x + y * g.geometry.width]);
            }
        }
    }
    Ok(merged)
}

/// Percentage of the reference map's cells that are known in `grid`.
pub fn coverage_percent(grid: &OccupancyGrid, truth: &GroundTruthMap) -> Result<f64> {
    if !grid.geometry.same_lattice(&truth.geometry) {
        return Err(GridError::GeometryMismatch);
    }
    Ok(100.0 * grid.known_count() as f64 / truth.geometry.len() as f64)
}
