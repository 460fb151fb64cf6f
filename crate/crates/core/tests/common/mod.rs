//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use toponav::geometry::Point;
use toponav::noise::rng_from;
use toponav::world::{BoundaryPolicy, CellIndex, GridDistance, OccupancyGrid};

pub fn random_grid(seed: u64, w: usize, h: usize, density: f64) -> OccupancyGrid {
    let mut rng = rng_from(seed, 0x6772);
    let cells = (0..w * h).map(|_| rng.random_bool(density)).collect();
    OccupancyGrid::new(w, h, 0.05, Point::default(), cells, BoundaryPolicy::Close).unwrap()
}

fn better(a: GridDistance, b: GridDistance) -> bool {
    if !b.is_reachable() {
        return a.is_reachable();
    }
    a.is_reachable() && a.cells() < b.cells() - 1e-9
}

/// Bellman-Ford over the 8-connected grid with the no-corner-cutting rule,
/// tracking move counts so results compare exactly.
pub fn bellman_ford(grid: &OccupancyGrid, src: CellIndex) -> Vec<GridDistance> {
    let n = grid.width() * grid.height();
    let mut dist = vec![GridDistance::UNREACHABLE; n];
    dist[grid.index(src)] = GridDistance::default();
    let mut edges = Vec::new();
    for j in 0..grid.height() as i64 {
        for i in 0..grid.width() as i64 {
            if grid.is_obstacle_signed(i, j) {
                continue;
            }
            for (di, dj) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] {
                let (a, b) = (i + di, j + dj);
                if grid.is_obstacle_signed(a, b) {
                    continue;
                }
                let diag = di != 0 && dj != 0;
                if diag && (grid.is_obstacle_signed(a, j) || grid.is_obstacle_signed(i, b)) {
                    continue;
                }
                let from = grid.index(CellIndex::new(i as usize, j as usize));
                let to = grid.index(CellIndex::new(a as usize, b as usize));
                edges.push((from, to, diag));
            }
        }
    }
    for _ in 0..n {
        let mut changed = false;
        for &(u, v, diag) in &edges {
            if !dist[u].is_reachable() {
                continue;
            }
            let mut cand = dist[u];
            if diag {
                cand.diag += 1;
            } else {
                cand.orth += 1;
            }
            if better(cand, dist[v]) {
                dist[v] = cand;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

pub fn undirected(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b, w) in edges {
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    adj
}

/// Cheapest simple path by exhaustive enumeration.
pub fn brute_force_cost(adj: &[Vec<(usize, f64)>], src: usize, dst: usize) -> Option<f64> {
    fn walk(adj: &[Vec<(usize, f64)>], at: usize, dst: usize, seen: &mut [bool], cost: f64, best: &mut f64) {
        if at == dst {
            *best = best.min(cost);
            return;
        }
        for &(n, w) in &adj[at] {
            if !seen[n] {
                seen[n] = true;
                walk(adj, n, dst, seen, cost + w, best);
                seen[n] = false;
            }
        }
    }
    let mut seen = vec![false; adj.len()];
    seen[src] = true;
    let mut best = f64::INFINITY;
    walk(adj, src, dst, &mut seen, 0.0, &mut best);
    best.is_finite().then_some(best)
}

/// Random graph on `n` vertices with edge probability `p` and weights in
/// [0.1, 5).
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> Vec<Vec<(usize, f64)>> {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                edges.push((a, b, rng.random_range(0.1..5.0)));
            }
        }
    }
    undirected(n, &edges)
}
