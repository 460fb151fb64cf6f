//! Map files.
//!
//! Text rasters start with a `resolution=<meters>` header line followed by
//! rows of `#` (obstacle) and `.` (free). The first raster row is the top of
//! the map (largest y). Grayscale images are read with 0 = obstacle and
//! 255 = free; their resolution comes from [`LoadOptions`].

use super::{BoundaryPolicy, OccupancyGrid, WorldError};
use crate::geometry::Point;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}, column {column}: unexpected cell character {found:?}")]
    Cell {
        line: usize,
        column: usize,
        found: char,
    },
    #[error("invalid map: {0}")]
    Invalid(#[from] WorldError),
    #[error("image maps need an explicit resolution")]
    MissingResolution,
    #[error("failed to read map: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to decode image map: {0}")]
    Image(#[from] image::ImageError),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Required for image rasters; overrides nothing for text maps.
    pub resolution: Option<f64>,
    pub boundary: BoundaryPolicy,
}

pub fn parse_text_map(text: &str, boundary: BoundaryPolicy) -> Result<OccupancyGrid, MapError> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim_end()));
    let (hline, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or(MapError::Parse {
            line: 1,
            message: "empty map file".into(),
        })?;
    let value = header
        .trim()
        .strip_prefix("resolution=")
        .ok_or_else(|| MapError::Parse {
            line: hline,
            message: format!("expected `resolution=<meters>` header, found {header:?}"),
        })?;
    let resolution: f64 = value.trim().parse().map_err(|_| MapError::Parse {
        line: hline,
        message: format!("bad resolution {value:?}"),
    })?;

    let mut rows: Vec<Vec<bool>> = Vec::new();
    let mut width = None;
    for (line, raw) in lines {
        if raw.is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(raw.len());
        for (col, ch) in raw.chars().enumerate() {
            match ch {
                '#' => row.push(true),
                '.' => row.push(false),
                other => {
                    return Err(MapError::Cell {
                        line,
                        column: col + 1,
                        found: other,
                    })
                }
            }
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(MapError::Parse {
                    line,
                    message: format!("row has {} cells, expected {w}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    let width = width.ok_or(MapError::Parse {
        line: hline,
        message: "no raster rows".into(),
    })?;
    let height = rows.len();
    let mut cells = vec![false; width * height];
    for (k, row) in rows.into_iter().enumerate() {
        let j = height - 1 - k;
        cells[j * width..(j + 1) * width].copy_from_slice(&row);
    }
    Ok(OccupancyGrid::new(
        width,
        height,
        resolution,
        Point::default(),
        cells,
        boundary,
    )?)
}

pub fn parse_image_map(bytes: &[u8], opts: LoadOptions) -> Result<OccupancyGrid, MapError> {
    let resolution = opts.resolution.ok_or(MapError::MissingResolution)?;
    let img = image::load_from_memory(bytes)?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut cells = vec![false; w * h];
    for (x, y, px) in img.enumerate_pixels() {
        let j = h - 1 - y as usize;
        cells[j * w + x as usize] = px.0[0] < 128;
    }
    Ok(OccupancyGrid::new(
        w,
        h,
        resolution,
        Point::default(),
        cells,
        opts.boundary,
    )?)
}

/// Loads a map file, dispatching on extension (`.png`, `.pgm`, `.pnm` are
/// images, everything else is text).
pub fn load_map(path: &Path, opts: LoadOptions) -> Result<OccupancyGrid, MapError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("png" | "pgm" | "pnm") => parse_image_map(&std::fs::read(path)?, opts),
        _ => parse_text_map(&std::fs::read_to_string(path)?, opts.boundary),
    }
}

pub fn write_text_map(grid: &OccupancyGrid) -> String {
    let mut out = String::with_capacity((grid.width() + 1) * grid.height() + 32);
    let _ = writeln!(out, "resolution={}", grid.resolution());
    for j in (0..grid.height()).rev() {
        for i in 0..grid.width() {
            out.push(if grid.is_obstacle(super::CellIndex::new(i, j)) {
                '#'
            } else {
                '.'
            });
        }
        out.push('\n');
    }
    out
}
