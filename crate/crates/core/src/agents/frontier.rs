use super::{approach_from_view, Agent, AgentError, AgentKind, AgentStats, GoalTracker, SharedPredictors, Wander};
use crate::geometry::{OdometryReading, Point, Pose};
use crate::noise::{rng_from, SimRng};
use crate::policies::{LocalMap, LocalPlanner, STOP_THRESHOLD};
use crate::sim::{Action, PanoramicObservation};
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Side of the dead-reckoned global map.
pub const GLOBAL_MAP_SIDE: f64 = 44.0;
/// Fine cells per side of one frontier-grid cell (0.2 m at 0.05 m).
const COARSE: usize = 4;
const MIN_FRONTIER_CLUSTER: usize = 3;
const REEVALUATE_EVERY: u32 = 10;
const ARRIVAL: f64 = 0.4;
const STALL_STEPS: u32 = 40;
/// Waypoints are taken this many coarse cells along the frontier path.
const WAYPOINT_CELLS: usize = 4;
/// Frontiers within this distance of a blacklisted target are skipped.
const BLACKLIST_RADIUS: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coarse {
    Unknown,
    Free,
    Blocked,
}

/// Frontier-grid view of a fine map.
pub struct FrontierGrid {
    n: usize,
    cells: Vec<Coarse>,
    origin: Point,
    size: f64,
}

impl FrontierGrid {
    pub fn build(map: &LocalMap) -> Self {
        let n = map.size() / COARSE;
        let mut cells = vec![Coarse::Unknown; n * n];
        for cj in 0..n {
            for ci in 0..n {
                let mut free = 0;
                let mut blocked = false;
                'fine: for dj in 0..COARSE {
                    for di in 0..COARSE {
                        let c = (ci * COARSE + di, cj * COARSE + dj);
                        if map.is_obstacle(c) {
                            blocked = true;
                            break 'fine;
                        }
                        if map.is_explored(c) {
                            free += 1;
                        }
                    }
                }
                cells[cj * n + ci] = if blocked {
                    Coarse::Blocked
                } else if free > 0 {
                    Coarse::Free
                } else {
                    Coarse::Unknown
                };
            }
        }
        Self {
            n,
            cells,
            origin: map.origin(),
            size: map.resolution() * COARSE as f64,
        }
    }

    fn cell_of(&self, p: Point) -> Option<usize> {
        let i = ((p.x - self.origin.x) / self.size).floor();
        let j = ((p.y - self.origin.y) / self.size).floor();
        (i >= 0.0 && j >= 0.0 && (i as usize) < self.n && (j as usize) < self.n).then(|| j as usize * self.n + i as usize)
    }

    pub fn center(&self, k: usize) -> Point {
        Point::new(
            self.origin.x + ((k % self.n) as f64 + 0.5) * self.size,
            self.origin.y + ((k / self.n) as f64 + 0.5) * self.size,
        )
    }

    fn neighbors4(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = ((k % self.n) as i64, (k / self.n) as i64);
        let n = self.n as i64;
        [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .into_iter()
            .filter(move |&(di, dj)| i + di >= 0 && j + dj >= 0 && i + di < n && j + dj < n)
            .map(move |(di, dj)| ((j + dj) * n + i + di) as usize)
    }

    /// Free cells with an unknown 4-neighbour, in clusters of at least
    /// `MIN_FRONTIER_CLUSTER` cells.
    pub fn frontiers(&self) -> Vec<bool> {
        let mut raw = vec![false; self.cells.len()];
        for k in 0..self.cells.len() {
            if self.cells[k] == Coarse::Free && self.neighbors4(k).any(|m| self.cells[m] == Coarse::Unknown) {
                raw[k] = true;
            }
        }
        let mut keep = vec![false; raw.len()];
        let mut seen = vec![false; raw.len()];
        let n = self.n as i64;
        for k in 0..raw.len() {
            if !raw[k] || seen[k] {
                continue;
            }
            let mut comp = vec![k];
            seen[k] = true;
            let mut head = 0;
            while head < comp.len() {
                let c = comp[head];
                head += 1;
                let (i, j) = ((c % self.n) as i64, (c / self.n) as i64);
                for dj in -1..=1 {
                    for di in -1..=1 {
                        let (a, b) = (i + di, j + dj);
                        if a < 0 || b < 0 || a >= n || b >= n {
                            continue;
                        }
                        let m = (b * n + a) as usize;
                        if raw[m] && !seen[m] {
                            seen[m] = true;
                            comp.push(m);
                        }
                    }
                }
            }
            if comp.len() >= MIN_FRONTIER_CLUSTER {
                for c in comp {
                    keep[c] = true;
                }
            }
        }
        keep
    }

    /// Nearest frontier by path cost over free cells, ties by scanline
    /// index; returns the path as coarse-cell centers.
    pub fn nearest_frontier(&self, from: Point, skip: &dyn Fn(Point) -> bool) -> Option<Vec<Point>> {
        let start = self.cell_of(from)?;
        let frontier = self.frontiers();
        let mut dist = vec![u64::MAX; self.cells.len()];
        let mut parent = vec![usize::MAX; self.cells.len()];
        let mut heap = BinaryHeap::new();
        dist[start] = 0;
        heap.push(Reverse((0u64, start)));
        let n = self.n as i64;
        while let Some(Reverse((d, k))) = heap.pop() {
            if d > dist[k] {
                continue;
            }
            if frontier[k] && k != start && !skip(self.center(k)) {
                let mut path = vec![k];
                let mut c = k;
                while parent[c] != usize::MAX {
                    c = parent[c];
                    path.push(c);
                }
                path.reverse();
                return Some(path.into_iter().map(|c| self.center(c)).collect());
            }
            let (i, j) = ((k % self.n) as i64, (k / self.n) as i64);
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= n || b >= n {
                    continue;
                }
                let m = (b * n + a) as usize;
                if self.cells[m] != Coarse::Free {
                    continue;
                }
                let diag = di != 0 && dj != 0;
                if diag
                    && (self.cells[(j * n + a) as usize] != Coarse::Free || self.cells[(b * n + i) as usize] != Coarse::Free)
                {
                    continue;
                }
                let nd = d + if diag { 14142 } else { 10000 };
                if nd < dist[m] {
                    dist[m] = nd;
                    parent[m] = k;
                    heap.push(Reverse((nd, m)));
                }
            }
        }
        None
    }
}

/// Frontier-based exploration on a dead-reckoned metric map, switching to
/// the predicted goal approach once the goal is localized from the current
/// panorama.
pub struct FrontierAgent {
    f: SharedPredictors,
    goal: PanoramicObservation,
    est: Pose,
    map: LocalMap,
    planner: LocalPlanner,
    route: Vec<Point>,
    since_eval: u32,
    best: f64,
    since_best: u32,
    blacklist: Vec<Point>,
    rng: SimRng,
    wander: Wander,
    tracker: GoalTracker,
    stats: AgentStats,
}

impl FrontierAgent {
    pub fn new(f: SharedPredictors, goal: PanoramicObservation, start: Pose, seed: u64) -> Self {
        Self {
            f,
            goal,
            est: start,
            map: LocalMap::new(GLOBAL_MAP_SIDE, 0.05, start.position()),
            planner: LocalPlanner::new(),
            route: Vec::new(),
            since_eval: 0,
            best: f64::INFINITY,
            since_best: 0,
            blacklist: Vec::new(),
            rng: rng_from(seed, 0xfbe),
            wander: Wander::new(),
            tracker: GoalTracker::default(),
            stats: AgentStats::default(),
        }
    }

    pub fn map(&self) -> &LocalMap {
        &self.map
    }

    pub fn frontier_target(&self) -> Option<Point> {
        self.route.last().copied()
    }

    fn replan(&mut self) {
        let grid = FrontierGrid::build(&self.map);
        let black = &self.blacklist;
        let skip = |p: Point| black.iter().any(|b| b.distance(&p) < BLACKLIST_RADIUS);
        self.route = grid.nearest_frontier(self.est.position(), &skip).unwrap_or_default();
        self.since_eval = 0;
        self.best = self.route.last().map_or(f64::INFINITY, |t| t.distance(&self.est.position()));
        self.since_best = 0;
    }

    fn waypoint(&mut self) -> Option<Point> {
        let here = self.est.position();
        if self.route.is_empty() {
            return None;
        }
        let (k, _) = self
            .route
            .iter()
            .enumerate()
            .map(|(k, p)| (k, p.distance(&here)))
            .fold((0, f64::INFINITY), |a, x| if x.1 < a.1 { x } else { a });
        Some(self.route[(k + WAYPOINT_CELLS).min(self.route.len() - 1)])
    }
}

impl Agent for FrontierAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Fbe
    }

    fn act(&mut self, obs: &PanoramicObservation, odom: OdometryReading) -> Result<Action, AgentError> {
        self.stats.steps += 1;
        self.est = odom.apply(&self.est);
        self.map.update(obs, self.est);
        if let Some((goal, d)) = approach_from_view(self.f.as_ref(), obs, &self.goal, self.est)? {
            return Ok(self.tracker.approach(&self.map, &mut self.planner, self.est, goal, d, STOP_THRESHOLD));
        }
        if let Some(a) = self.tracker.approach_remembered(&self.map, &mut self.planner, self.est, STOP_THRESHOLD) {
            return Ok(a);
        }
        let here = self.est.position();
        self.since_eval += 1;
        if let Some(t) = self.route.last().copied() {
            let d = t.distance(&here);
            if d < self.best - 0.1 {
                self.best = d;
                self.since_best = 0;
            } else {
                self.since_best += 1;
            }
            if self.since_best > STALL_STEPS {
                self.blacklist.push(t);
                self.stats.blacklisted += 1;
                self.route.clear();
            } else if d < ARRIVAL {
                self.route.clear();
            }
        }
        if self.route.is_empty() || self.since_eval >= REEVALUATE_EVERY {
            let kept = self.route.last().copied();
            let (best, since) = (self.best, self.since_best);
            self.replan();
            // keep stall tracking when the same frontier is re-selected
            if let (Some(a), Some(b)) = (kept, self.route.last()) {
                if a.distance(b) < BLACKLIST_RADIUS {
                    self.best = best;
                    self.since_best = since;
                }
            }
        }
        match self.waypoint() {
            Some(w) => {
                self.wander.reset();
                Ok(self.planner.step(&self.map, self.est, w, None))
            }
            None => {
                self.stats.wander_steps += 1;
                Ok(self.wander.step(&mut self.rng, &self.map, &mut self.planner, self.est))
            }
        }
    }

    fn set_goal(&mut self, goal: &PanoramicObservation) {
        self.goal = goal.clone();
        self.route.clear();
        self.blacklist.clear();
        self.tracker.reset();
        self.planner.reset();
    }

    fn estimated_pose(&self) -> Pose {
        self.est
    }

    fn stats(&self) -> AgentStats {
        self.stats
    }
}
