//! Point-goal control on a [`LocalMap`]: A* over the raster with unknown
//! cells traversable, then turn-or-forward toward a lookahead waypoint.

use super::local_map::LocalMap;
use crate::geometry::{angle_diff, Point, Pose};
use crate::sim::Action;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

/// Heading error above which the agent turns instead of moving forward.
pub const HEADING_TOLERANCE_DEG: f64 = 15.0;
/// Once turning, keep turning until the error is below this.
const TURN_SETTLE_DEG: f64 = 5.0;
/// Waypoint distance along the planned path, in cells.
const LOOKAHEAD_CELLS: usize = 10;
const REPLAN_EVERY: u32 = 4;
const MOVED_EPS: f64 = 0.02;
/// Failed forward moves in a row before the scripted escape: a quarter turn,
/// alternating sides, then a couple of steps forward.
const ESCAPE_AFTER_BUMPS: u32 = 3;
const ESCAPE_TURNS: usize = 9;
const ESCAPE_FORWARD: usize = 2;
/// Radius, in cells, blocked around a collision point.
const BUMP_RADIUS_CELLS: i64 = 2;
/// Penalty multipliers for cells close to mapped obstacles.
const INNER_PENALTY: f64 = 4.0;
const OUTER_PENALTY: f64 = 1.0;
/// Search radius, in cells, when retargeting away from a blocked goal cell.
const RETARGET_RADIUS: i64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Open {
    f: u64,
    g: u64,
    cell: u32,
}

impl Ord for Open {
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.cmp(&self.f).then_with(|| self.g.cmp(&o.g)).then_with(|| o.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Costs are kept in fixed point (1e-4 cells) so the search is exact and
/// deterministic.
const SCALE: f64 = 1e4;

#[derive(Debug, Clone, Default)]
pub struct LocalPlanner {
    path: Vec<Point>,
    target: Option<Point>,
    since_plan: u32,
    last: Option<(Pose, Action)>,
    turning: Option<Action>,
    /// Cells found blocked by failed forward moves, in map coordinates.
    bumps: Vec<Point>,
    /// The previous forward move failed.
    bumped: bool,
    consecutive_bumps: u32,
    /// Scripted escape after repeated collisions.
    recovery: Vec<Action>,
    recoveries: u32,
    g: Vec<u64>,
    parent: Vec<u32>,
    stamp: Vec<u32>,
    generation: u32,
    plans: u64,
}

impl LocalPlanner {
    pub fn new() -> Self {
        Self::default()
    }

    /// Forgets the cached path and collision memory, e.g. after the map was
    /// cleared.
    pub fn reset(&mut self) {
        self.path.clear();
        self.target = None;
        self.since_plan = 0;
        self.last = None;
        self.turning = None;
        self.bumps.clear();
        self.bumped = false;
        self.consecutive_bumps = 0;
        self.recovery.clear();
    }

    pub fn plans(&self) -> u64 {
        self.plans
    }

    pub fn path(&self) -> &[Point] {
        &self.path
    }

    /// One control step toward `target` (a point in the map frame) from the
    /// estimated pose `agent`. With `stop_threshold` set, returns `Stop` once
    /// the target is that close.
    pub fn step(&mut self, map: &LocalMap, agent: Pose, target: Point, stop_threshold: Option<f64>) -> Action {
        let here = agent.position();
        self.bumped = false;
        if let Some((prev, Action::MoveForward)) = self.last {
            if prev.position().distance(&here) < MOVED_EPS {
                self.bumped = true;
                self.consecutive_bumps += 1;
                self.bumps.push(prev.position().offset(0.15, prev.heading));
                self.path.clear();
            }
        }
        if !self.bumped {
            self.consecutive_bumps = 0;
        }
        if self.consecutive_bumps >= ESCAPE_AFTER_BUMPS && self.recovery.is_empty() {
            self.consecutive_bumps = 0;
            self.recoveries += 1;
            let turn = if self.recoveries % 2 == 1 { Action::TurnLeft } else { Action::TurnRight };
            self.recovery = [Action::MoveForward; ESCAPE_FORWARD]
                .into_iter()
                .chain(std::iter::repeat_n(turn, ESCAPE_TURNS))
                .collect();
            self.path.clear();
            self.turning = None;
        }
        let action = match stop_threshold {
            Some(t) if here.distance(&target) <= t => Action::Stop,
            _ => match self.recovery.pop() {
                Some(a) => a,
                None => self.decide(map, agent, target, stop_threshold),
            },
        };
        if action == Action::Stop {
            self.recovery.clear();
        }
        self.last = Some((agent, action));
        action
    }

    fn decide(&mut self, map: &LocalMap, agent: Pose, target: Point, stop_threshold: Option<f64>) -> Action {
        let here = agent.position();
        let dist = here.distance(&target);
        if let Some(t) = stop_threshold {
            if dist <= t {
                return Action::Stop;
            }
        }
        let retarget = self.target.is_none_or(|t| t.distance(&target) > 0.25);
        self.since_plan += 1;
        if retarget || self.path.is_empty() || self.since_plan >= REPLAN_EVERY || !self.path_clear(map) {
            self.target = Some(target);
            self.since_plan = 0;
            self.path = match self.plan(map, here, target) {
                Some(p) => p,
                // collision memory can wall the agent in; drop it and retry
                None if !self.bumps.is_empty() => {
                    self.bumps.clear();
                    self.plan(map, here, target).unwrap_or_default()
                }
                None => Vec::new(),
            };
        }
        self.trim_path(here);
        if self.path.is_empty() && self.bumped {
            let err = angle_diff(here.bearing_to(&target), agent.heading);
            self.turning = None;
            return if err >= 0.0 { Action::TurnLeft } else { Action::TurnRight };
        }
        let aim = if self.path.is_empty() {
            target
        } else {
            self.path[self.path.len().min(LOOKAHEAD_CELLS) - 1]
        };
        self.steer(agent, aim)
    }

    fn steer(&mut self, agent: Pose, aim: Point) -> Action {
        let here = agent.position();
        if here.distance(&aim) < 1e-9 {
            self.turning = None;
            return Action::MoveForward;
        }
        let err = angle_diff(here.bearing_to(&aim), agent.heading);
        let limit = if self.turning.is_some() { TURN_SETTLE_DEG } else { HEADING_TOLERANCE_DEG };
        if err.abs().to_degrees() > limit {
            let turn = if err > 0.0 { Action::TurnLeft } else { Action::TurnRight };
            self.turning = Some(turn);
            turn
        } else {
            self.turning = None;
            Action::MoveForward
        }
    }

    /// Drops path points the agent has already passed.
    fn trim_path(&mut self, here: Point) {
        if self.path.is_empty() {
            return;
        }
        let window = self.path.len().min(3 * LOOKAHEAD_CELLS);
        let (k, _) = self.path[..window]
            .iter()
            .enumerate()
            .map(|(k, p)| (k, p.distance(&here)))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        self.path.drain(..k);
        if self.path.len() > 1 && self.path[0].distance(&here) < 0.5 * 0.05 {
            self.path.remove(0);
        }
    }

    /// Cells within `BUMP_RADIUS_CELLS` of any recorded collision point.
    fn bump_cells(&self, map: &LocalMap) -> HashSet<usize> {
        let n = map.size() as i64;
        let r = BUMP_RADIUS_CELLS;
        let mut out = HashSet::new();
        for c in self.bumps.iter().filter_map(|&p| map.cell_of(p)) {
            for dj in -r..=r {
                for di in -r..=r {
                    let (i, j) = (c.0 as i64 + di, c.1 as i64 + dj);
                    if di * di + dj * dj <= r * r && i >= 0 && j >= 0 && i < n && j < n {
                        out.insert(map.index((i as usize, j as usize)));
                    }
                }
            }
        }
        out
    }

    fn path_clear(&self, map: &LocalMap) -> bool {
        let bumps = self.bump_cells(map);
        self.path.iter().take(4 * LOOKAHEAD_CELLS).all(|&p| match map.cell_of(p) {
            Some(c) => !map.is_obstacle(c) && !bumps.contains(&map.index(c)),
            None => true,
        })
    }

    /// A* from `from` to `to`; returns cell centers after the start cell,
    /// ending at `to` when it is reachable.
    pub fn plan(&mut self, map: &LocalMap, from: Point, to: Point) -> Option<Vec<Point>> {
        self.plans += 1;
        let n = map.size();
        let start = map.cell_of(from)?;
        let mut bumps = self.bump_cells(map);
        bumps.remove(&map.index(start));
        let blocked = |c: (usize, usize)| map.is_obstacle(c) || bumps.contains(&map.index(c));
        let goal = clamp_into(map, from, to);
        let goal = if blocked(goal) && goal != start { nearest_open(map, goal, &blocked)? } else { goal };
        let size = n * n;
        if self.stamp.len() != size {
            self.g = vec![0; size];
            self.parent = vec![0; size];
            self.stamp = vec![0; size];
            self.generation = 0;
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        let gen = self.generation;
        let h = |c: (usize, usize)| -> u64 {
            let dx = c.0.abs_diff(goal.0) as f64;
            let dy = c.1.abs_diff(goal.1) as f64;
            ((dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy)) * SCALE).floor() as u64
        };
        let si = map.index(start);
        let gi = map.index(goal);
        self.g[si] = 0;
        self.parent[si] = si as u32;
        self.stamp[si] = gen;
        let mut heap = BinaryHeap::new();
        heap.push(Open { f: h(start), g: 0, cell: si as u32 });
        let diag = (std::f64::consts::SQRT_2 * SCALE).round() as u64;
        let straight = SCALE as u64;
        let mut found = false;
        while let Some(Open { g, cell, .. }) = heap.pop() {
            let k = cell as usize;
            if g > self.g[k] {
                continue;
            }
            if k == gi {
                found = true;
                break;
            }
            let (ci, cj) = ((k % n) as i64, (k / n) as i64);
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] {
                let (i, j) = (ci + di, cj + dj);
                if i < 0 || j < 0 || i >= n as i64 || j >= n as i64 {
                    continue;
                }
                let c = (i as usize, j as usize);
                if blocked(c) {
                    continue;
                }
                let is_diag = di != 0 && dj != 0;
                if is_diag && (blocked((ci as usize, j as usize)) || blocked((i as usize, cj as usize))) {
                    continue;
                }
                let base = if is_diag { diag } else { straight };
                let mult = match map.proximity(c) {
                    2 => 1.0 + INNER_PENALTY,
                    1 => 1.0 + OUTER_PENALTY,
                    _ => 1.0,
                };
                let ng = g + (base as f64 * mult) as u64;
                let idx = map.index(c);
                if self.stamp[idx] != gen || ng < self.g[idx] {
                    self.stamp[idx] = gen;
                    self.g[idx] = ng;
                    self.parent[idx] = k as u32;
                    heap.push(Open { f: ng + h(c), g: ng, cell: idx as u32 });
                }
            }
        }
        if !found {
            return None;
        }
        let mut cells = Vec::new();
        let mut k = gi;
        while k != si {
            cells.push(k);
            k = self.parent[k] as usize;
        }
        cells.reverse();
        let mut path: Vec<Point> = cells.into_iter().map(|k| map.cell_center((k % n, k / n))).collect();
        if gi == map.index(clamp_into(map, from, to)) {
            if let Some(last) = path.last_mut() {
                *last = to;
            } else {
                path.push(to);
            }
        }
        Some(path)
    }
}

/// The cell of `to`, or the last in-map cell on the segment from `from`.
fn clamp_into(map: &LocalMap, from: Point, to: Point) -> (usize, usize) {
    if let Some(c) = map.cell_of(to) {
        return c;
    }
    let d = from.distance(&to);
    let a = from.bearing_to(&to);
    let mut t = d;
    while t > 0.0 {
        t -= map.resolution() / 2.0;
        if let Some(c) = map.cell_of(from.offset(t.max(0.0), a)) {
            return c;
        }
    }
    map.cell_of(from).unwrap_or((map.size() / 2, map.size() / 2))
}

fn nearest_open(map: &LocalMap, c: (usize, usize), blocked: &impl Fn((usize, usize)) -> bool) -> Option<(usize, usize)> {
    let n = map.size() as i64;
    let mut best: Option<(i64, (usize, usize))> = None;
    for dj in -RETARGET_RADIUS..=RETARGET_RADIUS {
        for di in -RETARGET_RADIUS..=RETARGET_RADIUS {
            let (i, j) = (c.0 as i64 + di, c.1 as i64 + dj);
            if i < 0 || j < 0 || i >= n || j >= n {
                continue;
            }
            let cc = (i as usize, j as usize);
            let d2 = di * di + dj * dj;
            if !blocked(cc) && best.is_none_or(|(b, _)| d2 < b) {
                best = Some((d2, cc));
            }
        }
    }
    best.map(|(_, c)| c)
}

/// Stateless single step: plans from scratch on `map`. `rel_goal` is the
/// goal offset from the agent in the map frame.
pub fn local_policy_step(map: &LocalMap, agent: Pose, rel_goal: Point, stop_threshold: Option<f64>) -> Action {
    let target = agent.position() + rel_goal;
    LocalPlanner::new().step(map, agent, target, stop_threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Episode, NoiseConfig, PanoramicObservation, SimConfig, Simulator, Difficulty};
    use crate::world::{BoundaryPolicy, OccupancyGrid};
    use std::sync::Arc;

    fn room(w: usize, h: usize, walls: &[(usize, usize, usize, usize)]) -> OccupancyGrid {
        let mut cells = vec![false; w * h];
        for &(i0, j0, i1, j1) in walls {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    cells[j * w + i] = true;
                }
            }
        }
        OccupancyGrid::new(w, h, 0.05, Point::default(), cells, BoundaryPolicy::Close).unwrap()
    }

    fn mapped(g: &OccupancyGrid, pose: Pose) -> LocalMap {
        let obs = PanoramicObservation::capture(g, pose, 360, 10.0).unwrap();
        let mut m = LocalMap::new(16.0, 0.05, pose.position());
        m.update(&obs, pose);
        m
    }

    #[test]
    fn straight_ahead_moves_forward() {
        let g = room(200, 200, &[]);
        let pose = Pose::new(5.0, 5.0, 0.0);
        let m = mapped(&g, pose);
        assert_eq!(local_policy_step(&m, pose, Point::new(1.0, 0.0), None), Action::MoveForward);
    }

    #[test]
    fn goal_to_the_left_turns_left() {
        let g = room(200, 200, &[]);
        let pose = Pose::new(5.0, 5.0, 0.0);
        let m = mapped(&g, pose);
        assert_eq!(local_policy_step(&m, pose, Point::new(0.0, 1.0), None), Action::TurnLeft);
        assert_eq!(local_policy_step(&m, pose, Point::new(0.0, -1.0), None), Action::TurnRight);
    }

    #[test]
    fn stops_inside_threshold() {
        let g = room(200, 200, &[]);
        let pose = Pose::new(5.0, 5.0, 0.0);
        let m = mapped(&g, pose);
        assert_eq!(local_policy_step(&m, pose, Point::new(0.3, 0.2), Some(0.5)), Action::Stop);
        assert_ne!(local_policy_step(&m, pose, Point::new(0.3, 0.2), None), Action::Stop);
    }

    /// Grid shortest path on the true map (8-connected, no corner cutting),
    /// used as the reference for the detour direction.
    fn reference_first_side(g: &OccupancyGrid, from: Point, to: Point) -> f64 {
        let field = crate::world::DistanceField::compute(g, g.cell_of(from).unwrap());
        let path = field.path_to(g.cell_of(to).unwrap()).unwrap();
        let p = g.cell_center(path[path.len().min(20) - 1]);
        p.y - from.y
    }

    #[test]
    fn detours_around_wall_like_grid_shortest_path() {
        // wall from y = 1 to y = 6.5 at x = 5; the gap above is the short way
        let g = room(200, 160, &[(100, 20, 101, 130)]);
        let pose = Pose::new(3.0, 5.0, 0.0);
        let goal = Point::new(7.0, 5.0);
        let m = mapped(&g, pose);
        let mut planner = LocalPlanner::new();
        let path = planner.plan(&m, pose.position(), goal).unwrap();
        let plan_side = path[path.len().min(20) - 1].y - pose.position().y;
        let ref_side = reference_first_side(&g, pose.position(), goal);
        assert!(plan_side * ref_side > 0.0, "{plan_side} vs {ref_side}");
        // heading east, the detour starts with a left turn
        assert_eq!(planner.step(&m, pose, goal, None), Action::TurnLeft);
    }

    #[test]
    fn blocked_goal_cell_is_retargeted() {
        let g = room(200, 200, &[(120, 0, 121, 199)]);
        let pose = Pose::new(4.0, 5.0, 0.0);
        let m = mapped(&g, pose);
        let path = LocalPlanner::new().plan(&m, pose.position(), Point::new(6.025, 5.0)).unwrap();
        let end = *path.last().unwrap();
        assert!(end.x < 6.0 && end.distance(&Point::new(6.0, 5.0)) < 0.3);
    }

    #[test]
    fn reaches_goals_in_open_room_within_action_bound() {
        let grid = Arc::new(room(240, 240, &[]));
        let start = Pose::new(6.0, 6.0, 0.3);
        for k in 0..12 {
            let a = k as f64 * 0.55;
            let d = 0.6 + 0.2 * k as f64;
            let goal = start.position().offset(d, a);
            let ep = Episode {
                map_id: "room".into(),
                start,
                goal,
                difficulty: Difficulty::Easy,
                seed: k,
                max_steps: 500,
            };
            let mut sim = Simulator::new(grid.clone(), SimConfig::default(), NoiseConfig::zero());
            let mut obs = sim.reset(&ep).unwrap();
            let mut map = LocalMap::new(16.0, 0.05, start.position());
            let mut planner = LocalPlanner::new();
            let bound = (d / 0.25).ceil() as u32 + 36;
            let mut actions = 0;
            loop {
                let pose = sim.pose();
                map.update(&obs, pose);
                let act = planner.step(&map, pose, goal, Some(0.2));
                if act == Action::Stop {
                    break;
                }
                actions += 1;
                assert!(actions <= bound, "goal {k}: more than {bound} actions");
                obs = sim.step(act).unwrap().observation;
            }
            assert!(sim.pose().position().distance(&goal) <= 0.2 + 1e-9);
        }
    }

    #[test]
    fn repeated_failed_forwards_trigger_scripted_escape() {
        // an unmapped obstacle: forward never moves, turns do
        let m = LocalMap::new(16.0, 0.05, Point::new(0.0, 0.0));
        let mut p = LocalPlanner::new();
        let mut pose = Pose::new(0.0, 0.0, 0.0);
        let mut actions = Vec::new();
        for _ in 0..60 {
            let a = p.step(&m, pose, Point::new(3.0, 0.0), None);
            match a {
                Action::TurnLeft => pose.heading += 10f64.to_radians(),
                Action::TurnRight => pose.heading -= 10f64.to_radians(),
                _ => {}
            }
            actions.push(a);
        }
        let escape: Vec<Action> = std::iter::repeat_n(Action::TurnLeft, ESCAPE_TURNS)
            .chain([Action::MoveForward; ESCAPE_FORWARD])
            .collect();
        let at = actions.windows(escape.len()).position(|w| w == escape.as_slice());
        assert!(at.is_some(), "{actions:?}");
        assert!(p.recoveries >= 1);
    }
}
