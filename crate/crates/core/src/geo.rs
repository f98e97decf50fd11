//! Ground-plan accumulation of mined errors.
//!
//! Ego poses place each frame in a planar grid of square cells; every
//! frame increments its cell's frame count and deposits that frame's
//! error count. The per-cell rate (errors per frame) localizes where a
//! detector tends to fail, independent of how often the vehicle visited
//! the spot.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::formats::PoseRecord;

/// Cell edge length in meters used when nothing else is configured.
pub const DEFAULT_BIN_SIZE_M: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("bin size must be positive and finite, got {0}")]
    BadBinSize(f64),
    #[error("cannot export an empty grid")]
    EmptyGrid,
    #[error("cannot merge grids with bin sizes {0} and {1}")]
    BinSizeMismatch(f64, f64),
}

/// Tallies for one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellStats {
    pub error_count: usize,
    pub frame_count: usize,
}

impl CellStats {
    /// Errors per frame spent in this cell.
    pub fn rate(&self) -> f64 {
        self.error_count as f64 / self.frame_count as f64
    }
}

/// Planar histogram of error rates, keyed by integer cell index.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoGrid {
    pub bin_size_m: f64,
    /// Only visited cells are stored, so every entry has
    /// `frame_count >= 1`.
    pub bins: BTreeMap<(i64, i64), CellStats>,
}

impl GeoGrid {
    /// Fold another grid's tallies into this one.
    pub fn merge(&mut self, other: &GeoGrid) -> Result<(), GeoError> {
        if self.bin_size_m != other.bin_size_m {
            return Err(GeoError::BinSizeMismatch(self.bin_size_m, other.bin_size_m));
        }
        for (cell, stats) in &other.bins {
            let entry = self.bins.entry(*cell).or_default();
            entry.error_count += stats.error_count;
            entry.frame_count += stats.frame_count;
        }
        Ok(())
    }
}

/// Bin per-frame error counts by ego pose. Frames without a pose are
/// skipped; frames without an entry in `errors_per_frame` count as zero
/// errors but still grow their cell's frame count.
pub fn bin_errors(
    poses: &[PoseRecord],
    errors_per_frame: &BTreeMap<usize, usize>,
    bin_size_m: f64,
) -> Result<GeoGrid, GeoError> {
    if !bin_size_m.is_finite() || bin_size_m <= 0.0 {
        return Err(GeoError::BadBinSize(bin_size_m));
    }
    let mut bins: BTreeMap<(i64, i64), CellStats> = BTreeMap::new();
    for pose in poses {
        let cell = (
            (pose.x_m / bin_size_m).floor() as i64,
            (pose.y_m / bin_size_m).floor() as i64,
        );
        let entry = bins.entry(cell).or_default();
        entry.frame_count += 1;
        entry.error_count += errors_per_frame.get(&pose.frame).copied().unwrap_or(0);
    }
    Ok(GeoGrid { bin_size_m, bins })
}

/// Render the grid as a CSV table and an 8-bit PGM intensity image.
///
/// CSV rows are sorted by cell index and report the cell origin in
/// meters. The image covers the bounding rectangle of visited cells,
/// unvisited cells black, with rates scaled linearly so the maximum
/// observed rate maps to 255 (rounding half up). Pixel rows run in
/// increasing y order.
pub fn export_heatmap(grid: &GeoGrid) -> Result<(String, Vec<u8>), GeoError> {
    if grid.bins.is_empty() {
        return Err(GeoError::EmptyGrid);
    }

    let mut csv = String::from("cell_x_m,cell_y_m,frames,errors,rate\n");
    for ((i, j), stats) in &grid.bins {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            *i as f64 * grid.bin_size_m,
            *j as f64 * grid.bin_size_m,
            stats.frame_count,
            stats.error_count,
            stats.rate(),
        ));
    }

    let min_i = grid.bins.keys().map(|c| c.0).min().unwrap();
    let max_i = grid.bins.keys().map(|c| c.0).max().unwrap();
    let min_j = grid.bins.keys().map(|c| c.1).min().unwrap();
    let max_j = grid.bins.keys().map(|c| c.1).max().unwrap();
    let width = (max_i - min_i + 1) as usize;
    let height = (max_j - min_j + 1) as usize;
    let max_rate = grid
        .bins
        .values()
        .map(CellStats::rate)
        .fold(0.0f64, f64::max);

    let mut pixels = vec![0u8; width * height];
    for ((i, j), stats) in &grid.bins {
        let col = (i - min_i) as usize;
        let row = (j - min_j) as usize;
        let value = if max_rate > 0.0 {
            (stats.rate() / max_rate * 255.0).round() as u8
        } else {
            0
        };
        pixels[row * width + col] = value;
    }
    let mut pgm = format!("P5\n{width} {height}\n255\n").into_bytes();
    pgm.extend_from_slice(&pixels);
    Ok((csv, pgm))
}
