use crate::oracle::NODE_RADIUS;
use crate::topograph::{GhostId, NodeId, TopoGraph};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// A planning vertex: a regular node or a ghost. Regular nodes sort first, so
/// lexicographic tie-breaks prefer them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Vertex {
    Node(NodeId),
    Ghost(GhostId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPath {
    pub vertices: Vec<Vertex>,
    pub cost: f64,
}

const COST_EPS: f64 = 1e-9;

struct Label {
    cost: f64,
    vertex: usize,
    path: Vec<usize>,
}

impl PartialEq for Label {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Label {}
impl PartialOrd for Label {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Label {
    fn cmp(&self, o: &Self) -> Ordering {
        o.cost.total_cmp(&self.cost).then_with(|| o.path.cmp(&self.path))
    }
}

/// Shortest path on a weighted undirected graph given as adjacency lists.
/// Equal-cost paths (within 1e-9) are resolved by the lexicographically
/// smallest vertex sequence.
pub fn shortest_path(adj: &[Vec<(usize, f64)>], src: usize, dst: usize) -> Option<(Vec<usize>, f64)> {
    let n = adj.len();
    if src >= n || dst >= n {
        return None;
    }
    let mut best: Vec<Option<(f64, Vec<usize>)>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[src] = Some((0.0, vec![src]));
    heap.push(Label {
        cost: 0.0,
        vertex: src,
        path: vec![src],
    });
    while let Some(Label { cost, vertex, path }) = heap.pop() {
        if done[vertex] {
            continue;
        }
        match &best[vertex] {
            Some((c, p)) if *c == cost && *p == path => {}
            _ => continue,
        }
        done[vertex] = true;
        if vertex == dst {
            return Some((path, cost));
        }
        for &(next, w) in &adj[vertex] {
            if done[next] {
                continue;
            }
            let c = cost + w;
            let better = match &best[next] {
                None => true,
                Some((bc, bp)) => {
                    if c < bc - COST_EPS {
                        true
                    } else if c <= bc + COST_EPS {
                        let mut cand = path.clone();
                        cand.push(next);
                        cand < *bp
                    } else {
                        false
                    }
                }
            };
            if better {
                let mut p = path.clone();
                p.push(next);
                best[next] = Some((c, p.clone()));
                heap.push(Label { cost: c, vertex: next, path: p });
            }
        }
    }
    None
}

/// Dijkstra over regular nodes and ghosts. Edge cost is the translation
/// norm of the edge's relative pose; ghost edges cost r.
pub fn dijkstra(graph: &TopoGraph, src: NodeId, dst: Vertex) -> Option<PlannedPath> {
    let n = graph.nodes().len();
    let ghosts: Vec<GhostId> = graph.ghosts().map(|g| g.id).collect();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + ghosts.len()];
    for e in graph.edges() {
        let w = e.delta.translation_norm();
        adj[e.a].push((e.b, w));
        adj[e.b].push((e.a, w));
    }
    for (k, &gid) in ghosts.iter().enumerate() {
        let parent = graph.ghost(gid).unwrap().parent;
        adj[parent].push((n + k, NODE_RADIUS));
        adj[n + k].push((parent, NODE_RADIUS));
    }
    for list in &mut adj {
        list.sort_by_key(|&(v, _)| v);
    }
    let target = match dst {
        Vertex::Node(id) => id,
        Vertex::Ghost(gid) => n + ghosts.binary_search(&gid).ok()?,
    };
    let (path, cost) = shortest_path(&adj, src, target)?;
    Some(PlannedPath {
        vertices: path
            .into_iter()
            .map(|v| if v < n { Vertex::Node(v) } else { Vertex::Ghost(ghosts[v - n]) })
            .collect(),
        cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::rng_from;
    use rand::Rng;

    fn undirected(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        adj
    }

    #[test]
    fn trivial_and_triangle() {
        let adj = undirected(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 2.5)]);
        assert_eq!(shortest_path(&adj, 1, 1), Some((vec![1], 0.0)));
        assert_eq!(shortest_path(&adj, 0, 2), Some((vec![0, 1, 2], 2.0)));
    }

    #[test]
    fn ties_prefer_lexicographic_path() {
        // 0-1-3 and 0-2-3 both cost 2
        let adj = undirected(4, &[(0, 2, 1.0), (2, 3, 1.0), (0, 1, 1.0), (1, 3, 1.0)]);
        assert_eq!(shortest_path(&adj, 0, 3).unwrap().0, vec![0, 1, 3]);
    }

    #[test]
    fn unreachable_is_none() {
        let adj = undirected(3, &[(0, 1, 1.0)]);
        assert_eq!(shortest_path(&adj, 0, 2), None);
    }

    fn brute(adj: &[Vec<(usize, f64)>], at: usize, dst: usize, seen: &mut Vec<bool>, cost: f64, best: &mut f64) {
        if at == dst {
            *best = best.min(cost);
            return;
        }
        for &(n, w) in &adj[at] {
            if !seen[n] {
                seen[n] = true;
                brute(adj, n, dst, seen, cost + w, best);
                seen[n] = false;
            }
        }
    }

    #[test]
    fn random_graphs_match_exhaustive_paths() {
        let mut rng = rng_from(21, 0);
        for _ in 0..60 {
            let n = rng.random_range(2..=9);
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.random_bool(0.35) {
                        edges.push((a, b, rng.random_range(0.1..5.0)));
                    }
                }
            }
            let adj = undirected(n, &edges);
            let (s, t) = (rng.random_range(0..n), rng.random_range(0..n));
            let mut seen = vec![false; n];
            seen[s] = true;
            let mut best = f64::INFINITY;
            brute(&adj, s, t, &mut seen, 0.0, &mut best);
            match shortest_path(&adj, s, t) {
                Some((_, c)) => assert!((c - best).abs() < 1e-9),
                None => assert!(best.is_infinite()),
            }
        }
    }
}
