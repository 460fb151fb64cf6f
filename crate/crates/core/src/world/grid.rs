use crate::geometry::Point;
use crate::world::WorldError;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

pub const DEFAULT_RESOLUTION: f64 = 0.05;

/// Integer cell coordinates: `i` along x (columns), `j` along y (rows).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub i: usize,
    pub j: usize,
}

impl CellIndex {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

/// What to do with free cells on the raster border.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    /// Force border cells to obstacle.
    #[default]
    Close,
    /// Refuse grids whose border is not already closed.
    Reject,
}

/// Ground-truth traversability raster. Cell `(i, j)` covers
/// `[origin.x + i·res, origin.x + (i+1)·res) × [origin.y + j·res, …)`.
///
/// Immutable once built; the border is always obstacle.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Point,
    obstacle: Vec<bool>,
    fingerprint: u64,
}

impl OccupancyGrid {
    /// Builds a grid from a row-major obstacle mask (`j * width + i`).
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Point,
        mut obstacle: Vec<bool>,
        boundary: BoundaryPolicy,
    ) -> Result<Self, WorldError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(WorldError::InvalidResolution(resolution));
        }
        if width == 0 || height == 0 {
            return Err(WorldError::EmptyRaster);
        }
        if obstacle.len() != width * height {
            return Err(WorldError::RasterSize {
                expected: width * height,
                actual: obstacle.len(),
            });
        }
        for j in 0..height {
            for i in 0..width {
                if i == 0 || j == 0 || i + 1 == width || j + 1 == height {
                    let idx = j * width + i;
                    if !obstacle[idx] {
                        match boundary {
                            BoundaryPolicy::Close => obstacle[idx] = true,
                            BoundaryPolicy::Reject => {
                                return Err(WorldError::OpenBoundary { i, j });
                            }
                        }
                    }
                }
            }
        }
        let fingerprint = fingerprint(width, height, resolution, origin, &obstacle);
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            obstacle,
            fingerprint,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    /// Stable identity of the raster contents, used to reject cross-map queries.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    #[inline]
    pub fn index(&self, c: CellIndex) -> usize {
        c.j * self.width + c.i
    }

    #[inline]
    pub fn cell_at(&self, idx: usize) -> CellIndex {
        CellIndex::new(idx % self.width, idx / self.width)
    }

    #[inline]
    pub fn is_obstacle(&self, c: CellIndex) -> bool {
        self.obstacle[c.j * self.width + c.i]
    }

    #[inline]
    pub fn is_free(&self, c: CellIndex) -> bool {
        !self.is_obstacle(c)
    }

    /// Obstacle test with out-of-range coordinates treated as obstacle.
    #[inline]
    pub fn is_obstacle_signed(&self, i: i64, j: i64) -> bool {
        if i < 0 || j < 0 || i as usize >= self.width || j as usize >= self.height {
            true
        } else {
            self.obstacle[j as usize * self.width + i as usize]
        }
    }

    pub fn cell_of(&self, p: Point) -> Option<CellIndex> {
        let fx = (p.x - self.origin.x) / self.resolution;
        let fy = (p.y - self.origin.y) / self.resolution;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (i, j) = (fx.floor() as usize, fy.floor() as usize);
        (i < self.width && j < self.height).then_some(CellIndex::new(i, j))
    }

    /// Cell of `p`, or a domain error when `p` is off the grid.
    pub fn require_cell(&self, p: Point) -> Result<CellIndex, WorldError> {
        self.cell_of(p).ok_or(WorldError::OffGrid { x: p.x, y: p.y })
    }

    /// Cell of `p`, which must be free.
    pub fn require_free(&self, p: Point) -> Result<CellIndex, WorldError> {
        let c = self.require_cell(p)?;
        if self.is_obstacle(c) {
            return Err(WorldError::OnObstacle { x: p.x, y: p.y });
        }
        Ok(c)
    }

    pub fn is_free_point(&self, p: Point) -> bool {
        self.cell_of(p).is_some_and(|c| self.is_free(c))
    }

    pub fn cell_center(&self, c: CellIndex) -> Point {
        Point::new(
            self.origin.x + (c.i as f64 + 0.5) * self.resolution,
            self.origin.y + (c.j as f64 + 0.5) * self.resolution,
        )
    }

    pub fn free_count(&self) -> usize {
        self.obstacle.iter().filter(|o| !**o).count()
    }

    pub fn free_cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        self.obstacle
            .iter()
            .enumerate()
            .filter(|(_, o)| !**o)
            .map(|(idx, _)| self.cell_at(idx))
    }

    pub fn obstacle_mask(&self) -> &[bool] {
        &self.obstacle
    }

    /// Returns a copy with extra obstacle cells.
    pub fn with_obstacles(&self, cells: &[CellIndex]) -> OccupancyGrid {
        let mut obstacle = self.obstacle.clone();
        for c in cells {
            obstacle[self.index(*c)] = true;
        }
        OccupancyGrid::new(
            self.width,
            self.height,
            self.resolution,
            self.origin,
            obstacle,
            BoundaryPolicy::Close,
        )
        .expect("derived from a valid grid")
    }

    /// Free-space component labels via 4-connected flood fill. Obstacle cells
    /// get `u32::MAX`. Matches the connectivity of [`crate::world::geodesic`],
    /// whose diagonal moves never cut corners.
    pub fn components(&self) -> (Vec<u32>, u32) {
        let mut label = vec![u32::MAX; self.obstacle.len()];
        let mut next = 0u32;
        let mut queue = VecDeque::new();
        for start in 0..self.obstacle.len() {
            if self.obstacle[start] || label[start] != u32::MAX {
                continue;
            }
            label[start] = next;
            queue.push_back(start);
            while let Some(idx) = queue.pop_front() {
                let (i, j) = (idx % self.width, idx / self.width);
                let mut visit = |n: usize| {
                    if !self.obstacle[n] && label[n] == u32::MAX {
                        label[n] = next;
                        queue.push_back(n);
                    }
                };
                if i > 0 {
                    visit(idx - 1);
                }
                if i + 1 < self.width {
                    visit(idx + 1);
                }
                if j > 0 {
                    visit(idx - self.width);
                }
                if j + 1 < self.height {
                    visit(idx + self.width);
                }
            }
            next += 1;
        }
        (label, next)
    }

    /// Serialized form used for byte-level determinism checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.obstacle.len() + 40);
        out.extend_from_slice(&(self.width as u64).to_le_bytes());
        out.extend_from_slice(&(self.height as u64).to_le_bytes());
        out.extend_from_slice(&self.resolution.to_le_bytes());
        out.extend_from_slice(&self.origin.x.to_le_bytes());
        out.extend_from_slice(&self.origin.y.to_le_bytes());
        out.extend(self.obstacle.iter().map(|&o| o as u8));
        out
    }
}

fn fingerprint(width: usize, height: usize, res: f64, origin: Point, cells: &[bool]) -> u64 {
    let mut h = crate::noise::mix64(width as u64 ^ ((height as u64) << 32));
    h = crate::noise::mix64(h ^ res.to_bits());
    h = crate::noise::mix64(h ^ origin.x.to_bits());
    h = crate::noise::mix64(h ^ origin.y.to_bits());
    for chunk in cells.chunks(64) {
        let mut word = 0u64;
        for (k, &o) in chunk.iter().enumerate() {
            word |= (o as u64) << k;
        }
        h = crate::noise::mix64(h ^ word);
    }
    h
}
