use super::{CellIndex, OccupancyGrid, WorldError};
use crate::geometry::Point;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

/// Path length on the 8-connected grid as counts of orthogonal and diagonal
/// moves. Keeping counts makes distances exact and order-independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct GridDistance {
    pub orth: u32,
    pub diag: u32,
}

impl GridDistance {
    pub const UNREACHABLE: GridDistance = GridDistance {
        orth: u32::MAX,
        diag: u32::MAX,
    };

    #[inline]
    pub fn cells(&self) -> f64 {
        self.orth as f64 + self.diag as f64 * SQRT_2
    }

    #[inline]
    pub fn meters(&self, resolution: f64) -> f64 {
        self.cells() * resolution
    }

    pub fn is_reachable(&self) -> bool {
        *self != Self::UNREACHABLE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicResult {
    /// Meters, `None` when unreachable.
    pub distance: Option<f64>,
    pub path: Option<Vec<CellIndex>>,
}

/// The eight grid moves, orthogonal first. Diagonal moves require both
/// orthogonally adjacent cells to be free (no corner cutting).
pub(crate) const MOVES: [(i64, i64, bool); 8] = [
    (1, 0, false),
    (-1, 0, false),
    (0, 1, false),
    (0, -1, false),
    (1, 1, true),
    (-1, 1, true),
    (1, -1, true),
    (-1, -1, true),
];

#[derive(Clone, Copy)]
struct Entry {
    cost: f64,
    idx: u32,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        // min-heap on cost, then on index for determinism
        o.cost.total_cmp(&self.cost).then_with(|| o.idx.cmp(&self.idx))
    }
}

/// Single-source shortest grid distances over the whole free space.
#[derive(Debug, Clone)]
pub struct DistanceField {
    source: CellIndex,
    width: usize,
    resolution: f64,
    dist: Vec<GridDistance>,
    parent: Vec<u32>,
}

impl DistanceField {
    pub fn compute(grid: &OccupancyGrid, source: CellIndex) -> Self {
        Self::run(grid, source, None)
    }

    fn run(grid: &OccupancyGrid, source: CellIndex, target: Option<CellIndex>) -> Self {
        let n = grid.width() * grid.height();
        let mut dist = vec![GridDistance::UNREACHABLE; n];
        let mut parent = vec![u32::MAX; n];
        let mut done = vec![false; n];
        let w = grid.width() as i64;
        let h = grid.height() as i64;
        let src = grid.index(source);
        let target = target.map(|t| grid.index(t));
        let mut heap = BinaryHeap::new();
        if grid.is_free(source) {
            dist[src] = GridDistance::default();
            heap.push(Entry {
                cost: 0.0,
                idx: src as u32,
            });
        }
        let mask = grid.obstacle_mask();
        while let Some(Entry { idx, .. }) = heap.pop() {
            let idx = idx as usize;
            if done[idx] {
                continue;
            }
            done[idx] = true;
            if Some(idx) == target {
                break;
            }
            let (i, j) = ((idx as i64) % w, (idx as i64) / w);
            let here = dist[idx];
            for &(di, dj, diagonal) in &MOVES {
                let (ni, nj) = (i + di, j + dj);
                if ni < 0 || nj < 0 || ni >= w || nj >= h {
                    continue;
                }
                let nidx = (nj * w + ni) as usize;
                if mask[nidx] || done[nidx] {
                    continue;
                }
                if diagonal && (mask[(j * w + ni) as usize] || mask[(nj * w + i) as usize]) {
                    continue;
                }
                let cand = if diagonal {
                    GridDistance {
                        orth: here.orth,
                        diag: here.diag + 1,
                    }
                } else {
                    GridDistance {
                        orth: here.orth + 1,
                        diag: here.diag,
                    }
                };
                let old = dist[nidx];
                if !old.is_reachable() || cand.cells() < old.cells() {
                    dist[nidx] = cand;
                    parent[nidx] = idx as u32;
                    heap.push(Entry {
                        cost: cand.cells(),
                        idx: nidx as u32,
                    });
                }
            }
        }
        Self {
            source,
            width: grid.width(),
            resolution: grid.resolution(),
            dist,
            parent,
        }
    }

    pub fn source(&self) -> CellIndex {
        self.source
    }

    #[inline]
    pub fn grid_distance(&self, c: CellIndex) -> GridDistance {
        self.dist[c.j * self.width + c.i]
    }

    /// Meters to `c`, `None` if unreachable.
    #[inline]
    pub fn meters(&self, c: CellIndex) -> Option<f64> {
        let d = self.grid_distance(c);
        d.is_reachable().then(|| d.meters(self.resolution))
    }

    /// Cell sequence from the source to `c`, inclusive.
    pub fn path_to(&self, c: CellIndex) -> Option<Vec<CellIndex>> {
        if !self.grid_distance(c).is_reachable() {
            return None;
        }
        let mut out = vec![c];
        let mut idx = c.j * self.width + c.i;
        while self.parent[idx] != u32::MAX {
            idx = self.parent[idx] as usize;
            out.push(CellIndex::new(idx % self.width, idx / self.width));
        }
        out.reverse();
        Some(out)
    }
}

/// 8-connected grid shortest path between the cells containing `a` and `b`,
/// with orthogonal cost `resolution` and diagonal cost `√2·resolution`.
pub fn geodesic(grid: &OccupancyGrid, a: Point, b: Point) -> Result<GeodesicResult, WorldError> {
    let ca = grid.require_cell(a)?;
    let cb = grid.require_cell(b)?;
    if grid.is_obstacle(ca) {
        return Err(WorldError::OnObstacle { x: a.x, y: a.y });
    }
    if grid.is_obstacle(cb) {
        return Err(WorldError::OnObstacle { x: b.x, y: b.y });
    }
    let field = DistanceField::run(grid, ca, Some(cb));
    Ok(GeodesicResult {
        distance: field.meters(cb),
        path: field.path_to(cb),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::rng_from;
    use crate::world::BoundaryPolicy;
    use rand::Rng;

    fn random_grid(seed: u64, w: usize, h: usize, density: f64) -> OccupancyGrid {
        let mut rng = rng_from(seed, 77);
        let cells = (0..w * h).map(|_| rng.random_bool(density)).collect();
        OccupancyGrid::new(w, h, 0.05, Point::default(), cells, BoundaryPolicy::Close).unwrap()
    }

    #[test]
    fn identity_path() {
        let g = random_grid(1, 20, 20, 0.0);
        let p = g.cell_center(CellIndex::new(5, 5));
        let r = geodesic(&g, p, p).unwrap();
        assert_eq!(r.distance, Some(0.0));
        assert_eq!(r.path, Some(vec![CellIndex::new(5, 5)]));
    }

    #[test]
    fn straight_corridor() {
        let g = random_grid(1, 120, 5, 0.0);
        let a = g.cell_center(CellIndex::new(5, 2));
        let b = g.cell_center(CellIndex::new(105, 2));
        let d = geodesic(&g, a, b).unwrap().distance.unwrap();
        assert!((d - 5.0).abs() <= 0.05);
    }

    #[test]
    fn unreachable_iff_different_component() {
        for seed in 0..20 {
            let g = random_grid(seed, 30, 30, 0.35);
            let (labels, _) = g.components();
            let free: Vec<_> = g.free_cells().collect();
            let src = free[0];
            let field = DistanceField::compute(&g, src);
            for c in &free {
                assert_eq!(
                    field.meters(*c).is_some(),
                    labels[g.index(*c)] == labels[g.index(src)]
                );
            }
        }
    }

    #[test]
    fn off_grid_and_obstacle_errors() {
        let g = random_grid(1, 10, 10, 0.0);
        assert!(matches!(
            geodesic(&g, Point::new(-1.0, 0.2), Point::new(0.2, 0.2)),
            Err(WorldError::OffGrid { .. })
        ));
        assert!(matches!(
            geodesic(&g, Point::new(0.01, 0.01), Point::new(0.2, 0.2)),
            Err(WorldError::OnObstacle { .. })
        ));
    }

    #[test]
    fn path_cells_are_adjacent_and_free() {
        let g = random_grid(3, 40, 40, 0.2);
        let free: Vec<_> = g.free_cells().collect();
        let field = DistanceField::compute(&g, free[0]);
        for c in free.iter().step_by(7) {
            if let Some(path) = field.path_to(*c) {
                for w in path.windows(2) {
                    let di = w[0].i.abs_diff(w[1].i);
                    let dj = w[0].j.abs_diff(w[1].j);
                    assert!(di <= 1 && dj <= 1 && di + dj > 0);
                    assert!(g.is_free(w[1]));
                }
            }
        }
    }
}
