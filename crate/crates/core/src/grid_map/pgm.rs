//! PGM map images with a plain-text sidecar.
//!
//! The sidecar lives next to the image with the extension replaced by
//! `.meta` and holds `key = value` lines (`#` starts a comment):
//!
//! ```text
//! resolution = 0.1
//! origin_x = 0
//! origin_y = 0
//! occupied_threshold = 50
//! free_threshold = 205
//! ```
//!
//! A pixel below `occupied_threshold` is occupied, above `free_threshold`
//! free, anything else unknown. The first image row is the top of the map
//! (highest y).

use super::{CellState, GridError, GridGeometry, GroundTruthMap, OccupancyGrid, Result};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapMetadata {
    pub resolution: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    pub occupied_threshold: u8,
    pub free_threshold: u8,
}

impl MapMetadata {
    pub fn for_geometry(g: &GridGeometry) -> Self {
        Self {
            resolution: g.resolution,
            origin_x: g.origin_x,
            origin_y: g.origin_y,
            occupied_threshold: 50,
            free_threshold: 205,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (mut res, mut ox, mut oy, mut occ, mut free) = (None, None, None, None, None);
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| GridError::Format(format!("expected key = value, got {line:?}")))?;
            let value = value.trim();
            let float = || value.parse::<f64>().map_err(|_| GridError::Format(format!("bad number {value:?}")));
            let byte = || value.parse::<u8>().map_err(|_| GridError::Format(format!("bad threshold {value:?}")));
            match key.trim() {
                "resolution" => res = Some(float()?),
                "origin_x" => ox = Some(float()?),
                "origin_y" => oy = Some(float()?),
                "occupied_threshold" => occ = Some(byte()?),
                "free_threshold" => free = Some(byte()?),
                other => return Err(GridError::Format(format!("unknown metadata key {other:?}"))),
            }
        }
        let missing = |k: &str| GridError::Format(format!("missing metadata key {k}"));
        let meta = Self {
            resolution: res.ok_or_else(|| missing("resolution"))?,
            origin_x: ox.ok_or_else(|| missing("origin_x"))?,
            origin_y: oy.ok_or_else(|| missing("origin_y"))?,
            occupied_threshold: occ.ok_or_else(|| missing("occupied_threshold"))?,
            free_threshold: free.ok_or_else(|| missing("free_threshold"))?,
        };
        if meta.occupied_threshold > meta.free_threshold {
            return Err(GridError::Format("occupied_threshold exceeds free_threshold".into()));
        }
        Ok(meta)
    }

    pub fn to_text(&self) -> String {
        format!(
            "resolution = {}\norigin_x = {}\norigin_y = {}\noccupied_threshold = {}\nfree_threshold = {}\n",
            self.resolution, self.origin_x, self.origin_y, self.occupied_threshold, self.free_threshold
        )
    }

    fn classify(&self, pixel: u8) -> CellState {
        if pixel < self.occupied_threshold {
            CellState::Occupied
        } else if pixel > self.free_threshold {
            CellState::Free
        } else {
            CellState::Unknown
        }
    }
}

pub fn sidecar_path(image: &Path) -> PathBuf {
    image.with_extension("meta")
}

struct Image {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

fn parse_pgm(bytes: &[u8]) -> Result<Image> {
    let bad = |m: &str| GridError::Format(m.to_string());
    let mut pos = 0;
    let token = |pos: &mut usize| -> Result<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(bad("truncated PGM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = token(&mut pos)?;
    let number = |s: String| s.parse::<usize>().map_err(|_| bad("bad PGM header number"));
    let width = number(token(&mut pos)?)?;
    let height = number(token(&mut pos)?)?;
    let maxval = number(token(&mut pos)?)?;
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit PGM images are supported"));
    }
    let count = width * height;
    let pixels = match magic.as_str() {
        "P5" => {
            // Exactly one whitespace byte separates the header from the raster.
            let start = pos + 1;
            let raster = bytes.get(start..start + count).ok_or_else(|| bad("truncated PGM raster"))?;
            raster.to_vec()
        }
        "P2" => {
            let mut px = Vec::with_capacity(count);
            for _ in 0..count {
                let v = number(token(&mut pos)?)?;
                if v > maxval {
                    return Err(bad("PGM sample exceeds maxval"));
                }
                px.push(v as u8);
            }
            px
        }
        other => return Err(GridError::Format(format!("unsupported PGM magic {other:?}"))),
    };
    let pixels =
        if maxval == 255 { pixels } else { pixels.into_iter().map(|v| ((v as usize * 255) / maxval) as u8).collect() };
    Ok(Image { width, height, pixels })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| GridError::Io { path: path.display().to_string(), source })
}

/// Image bytes and sidecar text.
fn read_pair(path: &Path) -> Result<(Vec<u8>, String)> {
    let image = read(path)?;
    let meta_text =
        String::from_utf8(read(&sidecar_path(path))?).map_err(|_| GridError::Format("sidecar is not UTF-8".into()))?;
    Ok((image, meta_text))
}

fn decode(image: &[u8], meta_text: &str) -> Result<(GridGeometry, Vec<CellState>)> {
    let image = parse_pgm(image)?;
    let meta = MapMetadata::parse(meta_text)?;
    let geometry = GridGeometry::new(meta.resolution, meta.origin_x, meta.origin_y, image.width, image.height)?;
    let mut cells = vec![CellState::Unknown; geometry.len()];
    for r in 0..image.height {
        let y = image.height - 1 - r;
        for x in 0..image.width {
            cells[x + y * image.width] = meta.classify(image.pixels[x + r * image.width]);
        }
    }
    Ok((geometry, cells))
}

pub fn load_occupancy(path: &Path) -> Result<OccupancyGrid> {
    let (image, meta_text) = read_pair(path)?;
    let (geometry, cells) = decode(&image, &meta_text)?;
    OccupancyGrid::from_states(geometry, cells)
}

/// Loads a ground-truth world; pixels that classify as unknown are treated
/// as obstacles.
pub fn load_ground_truth(path: &Path) -> Result<GroundTruthMap> {
    let (image, meta_text) = read_pair(path)?;
    ground_truth_from_bytes(&image, &meta_text)
}

/// [`load_ground_truth`] from an image already in memory.
pub fn ground_truth_from_bytes(image: &[u8], meta_text: &str) -> Result<GroundTruthMap> {
    let (geometry, cells) = decode(image, meta_text)?;
    GroundTruthMap::new(geometry, cells.into_iter().map(|s| s != CellState::Free).collect())
}

/// Writes a binary (P5) image and its sidecar.
pub fn save_occupancy(grid: &OccupancyGrid, path: &Path) -> Result<()> {
    let g = grid.geometry();
    let mut bytes = format!("P5\n{} {}\n255\n", g.width, g.height).into_bytes();
    for r in 0..g.height {
        let y = g.height - 1 - r;
        bytes.extend((0..g.width).map(|x| grid.state_at(x + y * g.width).gray()));
    }
    let write = |p: &Path, data: &[u8]| {
        fs::write(p, data).map_err(|source| GridError::Io { path: p.display().to_string(), source })
    };
    write(path, &bytes)?;
    write(&sidecar_path(path), MapMetadata::for_geometry(g).to_text().as_bytes())
}
