//! Local obstacle map projected from a single panorama, and any-angle
//! shortest paths on it.

use crate::geometry::Point;
use crate::sim::PanoramicObservation;
use crate::world::trace_cells;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Endpoints of consecutive rays closer than this are joined by a wall
/// segment so the projected boundary has no diagonal leaks.
const JOIN_DISTANCE: f64 = 0.3;

/// Occupancy raster aligned with the world grid, centered on the capture
/// cell. Only ray endpoints within `radius` mark obstacles; everything else,
/// including unseen space, is free.
#[derive(Debug, Clone)]
pub(crate) struct LocalView {
    /// World cell index of local cell (0, 0).
    i0: i64,
    j0: i64,
    n: usize,
    obstacle: Vec<bool>,
    center: (usize, usize),
    resolution: f64,
    origin: Point,
}

impl LocalView {
    #[cfg(test)]
    pub fn size(&self) -> usize {
        self.n
    }

    #[cfg(test)]
    pub fn center(&self) -> (usize, usize) {
        self.center
    }

    pub fn build(obs: &PanoramicObservation, resolution: f64, origin: Point, radius: f64) -> Self {
        let src = obs.capture_pose().position();
        let half = ((radius * 1.1) / resolution).ceil() as i64 + 2;
        let ci = ((src.x - origin.x) / resolution).floor() as i64;
        let cj = ((src.y - origin.y) / resolution).floor() as i64;
        let n = (2 * half + 1) as usize;
        let mut view = Self {
            i0: ci - half,
            j0: cj - half,
            n,
            obstacle: vec![false; n * n],
            center: (half as usize, half as usize),
            resolution,
            origin,
        };
        let depths = obs.depths();
        let k = depths.len();
        let endpoint = |r: usize| -> Option<(f64, f64)> {
            let d = depths[r];
            if d >= obs.max_range() || d > radius {
                return None;
            }
            let p = src.offset(d + 1e-6, obs.ray_angle(r));
            Some(((p.x - origin.x) / resolution, (p.y - origin.y) / resolution))
        };
        let mut prev = endpoint(k - 1).map(|e| (k - 1, e));
        for r in 0..k {
            let here = endpoint(r);
            if let Some(e) = here {
                view.mark(e.0.floor() as i64, e.1.floor() as i64);
                if let Some((pr, pe)) = prev {
                    let gap = ((pe.0 - e.0).powi(2) + (pe.1 - e.1).powi(2)).sqrt() * resolution;
                    if (pr + 1) % k == r && gap < JOIN_DISTANCE {
                        trace_cells(pe, e, |i, j| {
                            view.mark(i, j);
                            true
                        });
                    }
                }
            }
            prev = here.map(|e| (r, e));
        }
        let c = view.center;
        view.obstacle[c.1 * n + c.0] = false;
        view
    }

    fn mark(&mut self, wi: i64, wj: i64) {
        let (li, lj) = (wi - self.i0, wj - self.j0);
        if li >= 0 && lj >= 0 && (li as usize) < self.n && (lj as usize) < self.n {
            self.obstacle[lj as usize * self.n + li as usize] = true;
        }
    }

    pub fn local_cell(&self, p: Point) -> Option<(usize, usize)> {
        let wi = ((p.x - self.origin.x) / self.resolution).floor() as i64;
        let wj = ((p.y - self.origin.y) / self.resolution).floor() as i64;
        let (li, lj) = (wi - self.i0, wj - self.j0);
        (li >= 0 && lj >= 0 && (li as usize) < self.n && (lj as usize) < self.n)
            .then_some((li as usize, lj as usize))
    }

    pub fn is_obstacle(&self, c: (usize, usize)) -> bool {
        self.obstacle[c.1 * self.n + c.0]
    }

    fn blocked(&self, i: i64, j: i64) -> bool {
        i < 0 || j < 0 || i as usize >= self.n || j as usize >= self.n || self.obstacle[j as usize * self.n + i as usize]
    }

    /// Free cells reachable from the center (no corner cutting, so this is
    /// 4-connectivity).
    pub fn reachable(&self) -> Vec<bool> {
        let n = self.n;
        let mut seen = vec![false; n * n];
        let mut stack = vec![self.center];
        seen[self.center.1 * n + self.center.0] = true;
        while let Some((i, j)) = stack.pop() {
            for (di, dj) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if self.blocked(ni, nj) {
                    continue;
                }
                let idx = nj as usize * n + ni as usize;
                if !seen[idx] {
                    seen[idx] = true;
                    stack.push((ni as usize, nj as usize));
                }
            }
        }
        seen
    }

    pub fn index(&self, c: (usize, usize)) -> usize {
        c.1 * self.n + c.0
    }

    fn line_of_sight(&self, a: (usize, usize), b: (usize, usize)) -> bool {
        trace_cells(
            (a.0 as f64 + 0.5, a.1 as f64 + 0.5),
            (b.0 as f64 + 0.5, b.1 as f64 + 0.5),
            |i, j| !self.blocked(i, j),
        )
    }

    /// Any-angle (Theta*) shortest path length in meters from the center to
    /// `goal`, or `None` if the goal is blocked or every path is at least
    /// `bound` meters long.
    pub fn path_length(&self, goal: (usize, usize), bound: f64) -> Option<f64> {
        if self.is_obstacle(goal) {
            return None;
        }
        let n = self.n;
        let bound_cells = bound / self.resolution;
        let start = self.center;
        let h = |c: (usize, usize)| {
            ((c.0 as f64 - goal.0 as f64).powi(2) + (c.1 as f64 - goal.1 as f64).powi(2)).sqrt()
        };
        let dist = |a: (usize, usize), b: (usize, usize)| {
            ((a.0 as f64 - b.0 as f64).powi(2) + (a.1 as f64 - b.1 as f64).powi(2)).sqrt()
        };
        let mut g = vec![f64::INFINITY; n * n];
        let mut parent = vec![usize::MAX; n * n];
        let mut closed = vec![false; n * n];
        let si = self.index(start);
        g[si] = 0.0;
        parent[si] = si;
        let mut open = BinaryHeap::new();
        open.push(Open { f: h(start), idx: si });
        while let Some(Open { f, idx }) = open.pop() {
            if closed[idx] {
                continue;
            }
            if f >= bound_cells {
                return None;
            }
            closed[idx] = true;
            let c = (idx % n, idx / n);
            if c == goal {
                return Some(g[idx] * self.resolution);
            }
            let p = parent[idx];
            let pc = (p % n, p / n);
            for (di, dj) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1)] {
                let (ni, nj) = (c.0 as i64 + di, c.1 as i64 + dj);
                if self.blocked(ni, nj) {
                    continue;
                }
                if di != 0 && dj != 0 && (self.blocked(c.0 as i64 + di, c.1 as i64) || self.blocked(c.0 as i64, c.1 as i64 + dj)) {
                    continue;
                }
                let nc = (ni as usize, nj as usize);
                let nidx = self.index(nc);
                if closed[nidx] {
                    continue;
                }
                let (cand, via) = if self.line_of_sight(pc, nc) {
                    (g[p] + dist(pc, nc), p)
                } else {
                    (g[idx] + dist(c, nc), idx)
                };
                if cand < g[nidx] {
                    g[nidx] = cand;
                    parent[nidx] = via;
                    open.push(Open { f: cand + h(nc), idx: nidx });
                }
            }
        }
        None
    }
}

#[derive(Clone, Copy)]
struct Open {
    f: f64,
    idx: usize,
}

impl PartialEq for Open {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Open {
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then_with(|| o.idx.cmp(&self.idx))
    }
}
