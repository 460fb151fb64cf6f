//! Metric map built by projecting panorama depths from the estimated pose.
//!
//! The raster is axis-aligned with the estimated world frame and follows the
//! agent: once the agent drifts a quarter of the side away from the center,
//! the contents are shifted by whole cells.

use crate::geometry::{Point, Pose};
use crate::sim::PanoramicObservation;
use crate::world::trace_cells;

/// Endpoints of consecutive rays closer than this are joined, so distant
/// walls come out solid despite the angular spacing of the rays.
const JOIN_DISTANCE: f64 = 0.3;
/// Radii, in cells, of the two proximity bands used for soft inflation.
const NEAR_INNER: i64 = 3;
const NEAR_OUTER: i64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellState {
    Unknown,
    Free,
    Obstacle,
}

#[derive(Debug, Clone)]
pub struct LocalMap {
    n: usize,
    resolution: f64,
    /// Estimated-frame coordinates of the lower-left corner of cell (0, 0).
    origin: Point,
    hits: Vec<u16>,
    misses: Vec<u16>,
    occupied: Vec<bool>,
    near_inner: Vec<u16>,
    near_outer: Vec<u16>,
    max_range: f64,
    updates: u64,
}

impl LocalMap {
    /// Empty map of `side` meters centered on `center`.
    pub fn new(side: f64, resolution: f64, center: Point) -> Self {
        let n = (side / resolution).round() as usize | 1;
        let half = (n / 2) as f64 * resolution + resolution / 2.0;
        let origin = snap(Point::new(center.x - half, center.y - half), resolution);
        Self {
            n,
            resolution,
            origin,
            hits: vec![0; n * n],
            misses: vec![0; n * n],
            occupied: vec![false; n * n],
            near_inner: vec![0; n * n],
            near_outer: vec![0; n * n],
            max_range: crate::world::DEFAULT_MAX_RANGE,
            updates: 0,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn side(&self) -> f64 {
        self.n as f64 * self.resolution
    }

    pub fn center(&self) -> Point {
        Point::new(self.origin.x + self.side() / 2.0, self.origin.y + self.side() / 2.0)
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn clear(&mut self, center: Point) {
        *self = Self::new(self.side(), self.resolution, center);
    }

    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        let i = ((p.x - self.origin.x) / self.resolution).floor();
        let j = ((p.y - self.origin.y) / self.resolution).floor();
        (i >= 0.0 && j >= 0.0 && (i as usize) < self.n && (j as usize) < self.n).then_some((i as usize, j as usize))
    }

    pub fn cell_center(&self, c: (usize, usize)) -> Point {
        Point::new(
            self.origin.x + (c.0 as f64 + 0.5) * self.resolution,
            self.origin.y + (c.1 as f64 + 0.5) * self.resolution,
        )
    }

    #[inline]
    pub fn index(&self, c: (usize, usize)) -> usize {
        c.1 * self.n + c.0
    }

    pub fn state(&self, c: (usize, usize)) -> CellState {
        let k = self.index(c);
        if self.occupied[k] {
            CellState::Obstacle
        } else if self.misses[k] > 0 {
            CellState::Free
        } else {
            CellState::Unknown
        }
    }

    #[inline]
    pub fn is_obstacle(&self, c: (usize, usize)) -> bool {
        self.occupied[self.index(c)]
    }

    #[inline]
    pub fn is_explored(&self, c: (usize, usize)) -> bool {
        let k = self.index(c);
        self.hits[k] > 0 || self.misses[k] > 0
    }

    /// Soft-inflation level: 2 within `NEAR_INNER` cells of an obstacle, 1
    /// within `NEAR_OUTER`, else 0.
    #[inline]
    pub fn proximity(&self, c: (usize, usize)) -> u8 {
        let k = self.index(c);
        if self.near_inner[k] > 0 {
            2
        } else if self.near_outer[k] > 0 {
            1
        } else {
            0
        }
    }

    pub fn obstacle_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n * self.n)
            .filter(|&k| self.occupied[k])
            .map(|k| (k % self.n, k / self.n))
    }

    fn set_occupied(&mut self, k: usize, value: bool) {
        if self.occupied[k] == value {
            return;
        }
        self.occupied[k] = value;
        let (ci, cj) = ((k % self.n) as i64, (k / self.n) as i64);
        let n = self.n as i64;
        for dj in -NEAR_OUTER..=NEAR_OUTER {
            for di in -NEAR_OUTER..=NEAR_OUTER {
                let (i, j) = (ci + di, cj + dj);
                if i < 0 || j < 0 || i >= n || j >= n {
                    continue;
                }
                let r2 = di * di + dj * dj;
                if r2 > NEAR_OUTER * NEAR_OUTER {
                    continue;
                }
                let idx = (j * n + i) as usize;
                if value {
                    self.near_outer[idx] += 1;
                    if r2 <= NEAR_INNER * NEAR_INNER {
                        self.near_inner[idx] += 1;
                    }
                } else {
                    self.near_outer[idx] = self.near_outer[idx].saturating_sub(1);
                    if r2 <= NEAR_INNER * NEAR_INNER {
                        self.near_inner[idx] = self.near_inner[idx].saturating_sub(1);
                    }
                }
            }
        }
    }

    fn refresh(&mut self, k: usize) {
        let occ = self.hits[k] > 0 && self.hits[k] >= self.misses[k];
        self.set_occupied(k, occ);
    }

    /// Keeps `p` within a quarter side of the center by shifting contents.
    pub fn recenter(&mut self, p: Point) {
        let c = self.center();
        let limit = self.side() / 4.0;
        if (p.x - c.x).abs() <= limit && (p.y - c.y).abs() <= limit {
            return;
        }
        let si = ((p.x - c.x) / self.resolution).round() as i64;
        let sj = ((p.y - c.y) / self.resolution).round() as i64;
        let n = self.n as i64;
        let shift = |v: &Vec<u16>| -> Vec<u16> {
            let mut out = vec![0u16; v.len()];
            for j in 0..n {
                let oj = j + sj;
                if oj < 0 || oj >= n {
                    continue;
                }
                for i in 0..n {
                    let oi = i + si;
                    if oi >= 0 && oi < n {
                        out[(j * n + i) as usize] = v[(oj * n + oi) as usize];
                    }
                }
            }
            out
        };
        self.hits = shift(&self.hits);
        self.misses = shift(&self.misses);
        self.origin = Point::new(
            self.origin.x + si as f64 * self.resolution,
            self.origin.y + sj as f64 * self.resolution,
        );
        self.occupied = vec![false; self.n * self.n];
        self.near_inner = vec![0; self.n * self.n];
        self.near_outer = vec![0; self.n * self.n];
        for k in 0..self.n * self.n {
            self.refresh(k);
        }
    }

    fn cell_units(&self, p: Point) -> (f64, f64) {
        ((p.x - self.origin.x) / self.resolution, (p.y - self.origin.y) / self.resolution)
    }

    /// Projects `obs` from the estimated pose `at`: free along each ray up
    /// to one cell short of the return, obstacle at returns below max range.
    pub fn update(&mut self, obs: &PanoramicObservation, at: Pose) {
        let src = at.position();
        self.recenter(src);
        self.max_range = obs.max_range();
        let n = self.n as i64;
        let k_rays = obs.n_rays();
        let a = self.cell_units(src);
        let mut endpoints: Vec<Option<(f64, f64)>> = Vec::with_capacity(k_rays);
        let mut flipped: Vec<usize> = Vec::new();
        for r in 0..k_rays {
            let d = obs.depths()[r];
            let angle = obs.ray_angle(r);
            let free_to = (d - self.resolution).max(0.0);
            let b = self.cell_units(src.offset(free_to, angle));
            let (misses, occupied, n_) = (&mut self.misses, &self.occupied, n);
            let flips = &mut flipped;
            trace_cells(a, b, |i, j| {
                if i >= 0 && j >= 0 && i < n_ && j < n_ {
                    let k = (j * n_ + i) as usize;
                    misses[k] = misses[k].saturating_add(1);
                    if occupied[k] {
                        flips.push(k);
                    }
                }
                true
            });
            endpoints.push((d < obs.max_range()).then(|| self.cell_units(src.offset(d + 1e-6, angle))));
        }
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..k_rays {
            let Some(e) = endpoints[r] else { continue };
            let (i, j) = (e.0.floor() as i64, e.1.floor() as i64);
            if i >= 0 && j >= 0 && i < n && j < n {
                let k = (j * n + i) as usize;
                self.hits[k] = self.hits[k].saturating_add(2);
                touched.push(k);
            }
            let next = endpoints[(r + 1) % k_rays];
            if let Some(f) = next {
                let gap = ((e.0 - f.0).powi(2) + (e.1 - f.1).powi(2)).sqrt() * self.resolution;
                if gap < JOIN_DISTANCE {
                    let hits = &mut self.hits;
                    trace_cells(e, f, |i, j| {
                        if i >= 0 && j >= 0 && i < n && j < n {
                            let k = (j * n + i) as usize;
                            if hits[k] == 0 {
                                hits[k] = 1;
                                touched.push(k);
                            }
                        }
                        true
                    });
                }
            }
        }
        for k in flipped {
            self.refresh(k);
        }
        for k in touched {
            self.refresh(k);
        }
        if let Some(c) = self.cell_of(src) {
            let k = self.index(c);
            self.misses[k] = self.misses[k].saturating_add(1);
            self.refresh(k);
        }
        self.updates += 1;
    }
}

fn snap(p: Point, res: f64) -> Point {
    Point::new((p.x / res).round() * res, (p.y / res).round() * res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{BoundaryPolicy, OccupancyGrid};

    fn room(w: usize, h: usize) -> OccupancyGrid {
        OccupancyGrid::new(w, h, 0.05, Point::default(), vec![false; w * h], BoundaryPolicy::Close).unwrap()
    }

    #[test]
    fn empty_room_gives_free_disk_without_obstacles_inside() {
        let g = room(200, 200);
        let pose = Pose::new(5.0, 5.0, 0.0);
        let obs = PanoramicObservation::capture(&g, pose, 360, 10.0).unwrap();
        let mut m = LocalMap::new(16.0, 0.05, pose.position());
        m.update(&obs, pose);
        for c in m.obstacle_cells() {
            let p = m.cell_center(c);
            assert!(p.distance(&pose.position()) > 4.5, "obstacle at {p:?}");
        }
        for r in [0.5, 1.5, 3.0] {
            for k in 0..36 {
                let p = pose.position().offset(r, k as f64 * 10f64.to_radians());
                assert_eq!(m.state(m.cell_of(p).unwrap()), CellState::Free);
            }
        }
    }

    #[test]
    fn flat_wall_projects_to_a_line() {
        // wall at x = 4.95 (east boundary of a 5 m room)
        let g = room(100, 100);
        let pose = Pose::new(3.0, 2.5, 0.0);
        let obs = PanoramicObservation::capture(&g, pose, 360, 10.0).unwrap();
        let mut m = LocalMap::new(16.0, 0.05, pose.position());
        m.update(&obs, pose);
        let mut east = 0;
        for c in m.obstacle_cells() {
            let p = m.cell_center(c);
            if (p.y - 2.5).abs() < 1.0 && p.x > 4.0 {
                assert!((p.x - 4.975).abs() <= 0.05 + 1e-9, "{p:?}");
                east += 1;
            }
        }
        assert!(east >= 35);
    }

    #[test]
    fn recenter_keeps_world_content() {
        let g = room(400, 100);
        let p0 = Pose::new(3.0, 2.5, 0.0);
        let mut m = LocalMap::new(8.0, 0.05, p0.position());
        m.update(&PanoramicObservation::capture(&g, p0, 360, 10.0).unwrap(), p0);
        let probe = Point::new(3.0, 0.025);
        let before = m.state(m.cell_of(probe).unwrap());
        m.recenter(Point::new(6.0, 2.5));
        assert!(m.cell_of(Point::new(6.0, 2.5)).is_some());
        assert_eq!(m.state(m.cell_of(probe).unwrap()), before);
    }
}
