//! Map-quality metrics against the ground truth.

use super::{CellState, GridError, GroundTruthMap, OccupancyGrid, Result};

/// Side of the square SSIM window in pixels.
pub const SSIM_WINDOW: usize = 7;
const DYNAMIC_RANGE: f64 = 255.0;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapQuality {
    pub ssim: f64,
    /// Root mean square error over gray levels.
    pub rmse: f64,
    /// Mean nearest-neighbor distance in cells between occupied sets.
    pub alignment_error: f64,
}

/// Compares a map against the truth: both are rendered to gray levels
/// (occupied 0, unknown 128, free 255).
pub fn map_quality(grid: &OccupancyGrid, truth: &GroundTruthMap) -> Result<MapQuality> {
    let geometry = grid.geometry();
    if !geometry.same_lattice(truth.geometry()) {
        return Err(GridError::GeometryMismatch);
    }
    let a = grid.render();
    let b = truth.render();
    let (w, h) = (geometry.width, geometry.height);

    let occupied_grid: Vec<(i64, i64)> = (0..a.len())
        .filter(|&i| grid.state_at(i) == CellState::Occupied)
        .map(|i| (geometry.cell_at(i).x, geometry.cell_at(i).y))
        .collect();
    let occupied_truth: Vec<(i64, i64)> = (0..b.len())
        .filter(|&i| truth.occupied_cells()[i])
        .map(|i| (geometry.cell_at(i).x, geometry.cell_at(i).y))
        .collect();
    let diagonal = (w as f64).hypot(h as f64);

    Ok(MapQuality {
        ssim: ssim(&a, &b, w, h),
        rmse: rmse(&a, &b),
        alignment_error: alignment_error(&occupied_grid, &occupied_truth, diagonal),
    })
}

/// Mean structural similarity over all `SSIM_WINDOW`-sized windows at stride
/// one, clamped to [0, 1]. Images smaller than the window use one window
/// covering the whole image.
pub fn ssim(a: &[u8], b: &[u8], width: usize, height: usize) -> f64 {
    assert_eq!(a.len(), width * height);
    assert_eq!(b.len(), width * height);
    let c1 = (K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (K2 * DYNAMIC_RANGE).powi(2);
    let wx = SSIM_WINDOW.min(width);
    let wy = SSIM_WINDOW.min(height);
    let n = (wx * wy) as f64;

    let mut total = 0.0;
    let mut windows = 0usize;
    for y0 in 0..=height - wy {
        for x0 in 0..=width - wx {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for y in y0..y0 + wy {
                for x in x0..x0 + wx {
                    let va = a[x + y * width] as f64;
                    let vb = b[x + y * width] as f64;
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let var_a = saa / n - ma * ma;
            let var_b = sbb / n - mb * mb;
            let cov = sab / n - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
            total += num / den;
            windows += 1;
        }
    }
    (total / windows as f64).clamp(0.0, 1.0)
}

pub fn rmse(a: &[u8], b: &[u8]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    let sum: f64 = a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
    (sum / a.len() as f64).sqrt()
}

/// Symmetric mean nearest-neighbor distance between two cell sets. Zero when
/// both are empty; `empty_penalty` when exactly one is.
pub fn alignment_error(a: &[(i64, i64)], b: &[(i64, i64)], empty_penalty: f64) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return empty_penalty,
        _ => {}
    }
    let directed = |from: &[(i64, i64)], to: &[(i64, i64)]| -> f64 {
        let sum: f64 = from
            .iter()
            .map(|&(x, y)| {
                let best = to.iter().map(|&(u, v)| (x - u).pow(2) + (y - v).pow(2)).min().unwrap_or(0);
                (best as f64).sqrt()
            })
            .sum();
        sum / from.len() as f64
    };
    0.5 * (directed(a, b) + directed(b, a))
}
