//! Ground-truth geometry: occupancy grids, ray casting, line of sight and
//! grid geodesics.

mod floorplan;
mod geodesic;
mod grid;
mod mapfile;

pub use floorplan::{generate_floorplan, FloorplanConfig};
pub use geodesic::{geodesic, DistanceField, GeodesicResult, GridDistance};
pub use grid::{BoundaryPolicy, CellIndex, OccupancyGrid, DEFAULT_RESOLUTION};
pub use mapfile::{load_map, parse_image_map, parse_text_map, write_text_map, LoadOptions, MapError};

use crate::geometry::Point;
use thiserror::Error;

pub const DEFAULT_MAX_RANGE: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("point ({x:.3}, {y:.3}) lies outside the grid")]
    OffGrid { x: f64, y: f64 },
    #[error("point ({x:.3}, {y:.3}) lies on an obstacle cell")]
    OnObstacle { x: f64, y: f64 },
    #[error("resolution must be a positive finite number, got {0}")]
    InvalidResolution(f64),
    #[error("raster is empty")]
    EmptyRaster,
    #[error("raster has {actual} cells, expected {expected}")]
    RasterSize { expected: usize, actual: usize },
    #[error("boundary cell ({i}, {j}) is free; the world must be closed")]
    OpenBoundary { i: usize, j: usize },
}

/// Walks the cells crossed by the ray `from + t·(cos a, sin a)` and returns
/// the `t` at which the ray enters the first obstacle cell, or `None` if no
/// obstacle is entered before `limit`.
fn first_hit(grid: &OccupancyGrid, from: Point, angle: f64, limit: f64) -> Option<f64> {
    let res = grid.resolution();
    let origin = grid.origin();
    let (dy, dx) = angle.sin_cos();
    let fx = (from.x - origin.x) / res;
    let fy = (from.y - origin.y) / res;
    let mut i = fx.floor() as i64;
    let mut j = fy.floor() as i64;
    if grid.is_obstacle_signed(i, j) {
        return Some(0.0);
    }
    let limit_cells = limit / res;
    let (step_i, mut t_max_x, t_delta_x) = axis_setup(fx, dx);
    let (step_j, mut t_max_y, t_delta_y) = axis_setup(fy, dy);
    loop {
        let t;
        if t_max_x < t_max_y {
            t = t_max_x;
            i += step_i;
            t_max_x += t_delta_x;
        } else {
            t = t_max_y;
            j += step_j;
            t_max_y += t_delta_y;
        }
        if t >= limit_cells {
            return None;
        }
        if grid.is_obstacle_signed(i, j) {
            return Some(t * res);
        }
    }
}

fn axis_setup(f: f64, d: f64) -> (i64, f64, f64) {
    if d > 0.0 {
        (1, (f.floor() + 1.0 - f) / d, 1.0 / d)
    } else if d < 0.0 {
        (-1, (f - f.floor()) / -d, -1.0 / d)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

/// Visits the cells crossed by the segment `a → b`, both given in cell units
/// (cell `(i, j)` spans `[i, i+1) × [j, j+1)`). At an exact corner crossing
/// both side cells are visited. Stops early and returns false as soon as
/// `visit` returns false.
pub(crate) fn trace_cells(a: (f64, f64), b: (f64, f64), mut visit: impl FnMut(i64, i64) -> bool) -> bool {
    let (mut i, mut j) = (a.0.floor() as i64, a.1.floor() as i64);
    let (ti, tj) = (b.0.floor() as i64, b.1.floor() as i64);
    if !visit(i, j) {
        return false;
    }
    let (step_i, mut t_max_x, t_delta_x) = axis_setup(a.0, b.0 - a.0);
    let (step_j, mut t_max_y, t_delta_y) = axis_setup(a.1, b.1 - a.1);
    while (i, j) != (ti, tj) {
        let t = t_max_x.min(t_max_y);
        if t > 1.0 + 1e-9 {
            break;
        }
        if (t_max_x - t_max_y).abs() < 1e-9 {
            if !visit(i + step_i, j) || !visit(i, j + step_j) {
                return false;
            }
            i += step_i;
            j += step_j;
            t_max_x += t_delta_x;
            t_max_y += t_delta_y;
        } else if t_max_x < t_max_y {
            i += step_i;
            t_max_x += t_delta_x;
        } else {
            j += step_j;
            t_max_y += t_delta_y;
        }
        if !visit(i, j) {
            return false;
        }
    }
    true
}

/// Distance from `from` to the first obstacle cell boundary along `angle`,
/// capped at `max_range`.
pub fn raycast(
    grid: &OccupancyGrid,
    from: Point,
    angle: f64,
    max_range: f64,
) -> Result<f64, WorldError> {
    grid.require_free(from)?;
    Ok(first_hit(grid, from, angle, max_range).map_or(max_range, |t| t.min(max_range)))
}

/// Line of sight: true iff the segment `from → to` enters no obstacle cell.
pub fn visible(grid: &OccupancyGrid, from: Point, to: Point) -> Result<bool, WorldError> {
    grid.require_free(from)?;
    grid.require_free(to)?;
    let d = from.distance(&to);
    if d == 0.0 {
        return Ok(true);
    }
    Ok(first_hit(grid, from, from.bearing_to(&to), d).is_none())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::rng_from;
    use rand::Rng;

    fn corridor() -> OccupancyGrid {
        // 10 m long, 1 m wide corridor at 0.05 m/cell, walls one cell thick.
        let (w, h) = (202, 22);
        OccupancyGrid::new(w, h, 0.05, Point::default(), vec![false; w * h], BoundaryPolicy::Close)
            .unwrap()
    }

    /// Fine-step marching at a tenth of a cell.
    fn march_oracle(grid: &OccupancyGrid, from: Point, angle: f64, max_range: f64) -> f64 {
        let step = grid.resolution() / 10.0;
        let mut t = 0.0;
        while t < max_range {
            if !grid.is_free_point(from.offset(t, angle)) {
                return t;
            }
            t += step;
        }
        max_range
    }

    #[test]
    fn corridor_axis_depth() {
        let g = corridor();
        let d = raycast(&g, Point::new(0.05 + 1e-9, 0.55), 0.0, 20.0).unwrap();
        assert!((d - 10.0).abs() <= 0.05, "depth {d}");
    }

    #[test]
    fn adjacent_wall_is_within_one_cell() {
        let g = corridor();
        let d = raycast(&g, Point::new(1.0, 0.07), -std::f64::consts::FRAC_PI_2, 10.0).unwrap();
        assert!(d <= g.resolution());
    }

    #[test]
    fn raycast_from_obstacle_is_error() {
        let g = corridor();
        assert!(matches!(
            raycast(&g, Point::new(0.01, 0.01), 0.0, 10.0),
            Err(WorldError::OnObstacle { .. })
        ));
    }

    #[test]
    fn raycast_matches_fine_marching() {
        let g = crate::world::generate_floorplan(3, &FloorplanConfig::default());
        let mut rng = rng_from(99, 0);
        let (ex, ey) = g.extent();
        let mut checked = 0;
        while checked < 100 {
            let p = Point::new(rng.random_range(0.0..ex), rng.random_range(0.0..ey));
            if !g.is_free_point(p) {
                continue;
            }
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let fast = raycast(&g, p, a, DEFAULT_MAX_RANGE).unwrap();
            let slow = march_oracle(&g, p, a, DEFAULT_MAX_RANGE);
            assert!((fast - slow).abs() <= g.resolution(), "{fast} vs {slow}");
            checked += 1;
        }
    }

    #[test]
    fn visibility_cases() {
        let (w, h) = (40, 40);
        let mut cells = vec![false; w * h];
        for j in 0..30 {
            cells[j * w + 20] = true;
        }
        let g = OccupancyGrid::new(w, h, 0.05, Point::default(), cells, BoundaryPolicy::Close).unwrap();
        let a = g.cell_center(CellIndex::new(10, 10));
        let b = g.cell_center(CellIndex::new(11, 10));
        let c = g.cell_center(CellIndex::new(30, 10));
        assert!(visible(&g, a, b).unwrap());
        assert!(!visible(&g, a, c).unwrap());
        assert!(visible(&g, a, a).unwrap());
    }

    #[test]
    fn visible_agrees_with_raycast() {
        let g = crate::world::generate_floorplan(11, &FloorplanConfig::default());
        let mut rng = rng_from(5, 5);
        let (ex, ey) = g.extent();
        let mut n = 0;
        while n < 1000 {
            let a = Point::new(rng.random_range(0.0..ex), rng.random_range(0.0..ey));
            let b = Point::new(rng.random_range(0.0..ex), rng.random_range(0.0..ey));
            if !g.is_free_point(a) || !g.is_free_point(b) || a == b {
                continue;
            }
            let d = a.distance(&b);
            let depth = raycast(&g, a, a.bearing_to(&b), d + 1.0).unwrap();
            assert_eq!(visible(&g, a, b).unwrap(), depth >= d);
            n += 1;
        }
    }

    #[test]
    fn trace_cells_covers_segment() {
        let mut seen = Vec::new();
        trace_cells((0.5, 0.5), (3.5, 1.5), |i, j| {
            seen.push((i, j));
            true
        });
        assert_eq!(seen.first(), Some(&(0, 0)));
        assert_eq!(seen.last(), Some(&(3, 1)));
        for w in seen.windows(2) {
            assert!((w[0].0 - w[1].0).abs() <= 1 && (w[0].1 - w[1].1).abs() <= 1);
        }
        let mut diag = Vec::new();
        trace_cells((0.5, 0.5), (2.5, 2.5), |i, j| {
            diag.push((i, j));
            true
        });
        assert!(diag.contains(&(1, 0)) && diag.contains(&(0, 1)) && diag.contains(&(2, 2)));
    }

    #[test]
    fn raycast_monotone_under_obstacle_insertion() {
        let g = crate::world::generate_floorplan(4, &FloorplanConfig::default());
        let mut rng = rng_from(8, 1);
        let extra: Vec<CellIndex> = (0..300)
            .map(|_| CellIndex::new(rng.random_range(1..g.width() - 1), rng.random_range(1..g.height() - 1)))
            .collect();
        let h = g.with_obstacles(&extra);
        let (ex, ey) = g.extent();
        let mut n = 0;
        while n < 300 {
            let p = Point::new(rng.random_range(0.0..ex), rng.random_range(0.0..ey));
            if !h.is_free_point(p) {
                continue;
            }
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            assert!(raycast(&h, p, a, 10.0).unwrap() <= raycast(&g, p, a, 10.0).unwrap());
            n += 1;
        }
    }
}
