use super::{approach_from_view, Agent, AgentError, AgentKind, AgentStats, GoalTracker, SharedPredictors};
use crate::geometry::{OdometryReading, Point, Pose};
use crate::oracle::{bin_center, NODE_RADIUS};
use crate::policies::{LocalMap, LocalPlanner, STOP_THRESHOLD};
use crate::sim::{Action, PanoramicObservation};

/// Steps before the greedy direction is re-read from a fresh panorama.
const REDECIDE_EVERY: u32 = 8;
const ARRIVAL: f64 = 0.5;

/// Graph-free ablation: follow the best-scoring direction of the current
/// panorama, re-deciding every few steps, with the same goal approach and
/// stop logic as the full agent.
pub struct GreedyAgent {
    f: SharedPredictors,
    goal: PanoramicObservation,
    est: Pose,
    map: LocalMap,
    planner: LocalPlanner,
    target: Option<Point>,
    since: u32,
    tracker: GoalTracker,
    stats: AgentStats,
}

impl GreedyAgent {
    pub fn new(f: SharedPredictors, goal: PanoramicObservation, start: Pose, _seed: u64) -> Self {
        Self {
            f,
            goal,
            est: start,
            map: LocalMap::new(super::topological::LOCAL_MAP_SIDE, 0.05, start.position()),
            planner: LocalPlanner::new(),
            target: None,
            since: 0,
            tracker: GoalTracker::default(),
            stats: AgentStats::default(),
        }
    }

    pub fn target(&self) -> Option<Point> {
        self.target
    }
}

impl Agent for GreedyAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::NoGraph
    }

    fn act(&mut self, obs: &PanoramicObservation, odom: OdometryReading) -> Result<Action, AgentError> {
        self.stats.steps += 1;
        self.est = odom.apply(&self.est);
        let here = self.est.position();
        if let Some((goal, d)) = approach_from_view(self.f.as_ref(), obs, &self.goal, self.est)? {
            self.map.update(obs, self.est);
            self.target = None;
            return Ok(self.tracker.approach(&self.map, &mut self.planner, self.est, goal, d, STOP_THRESHOLD));
        }
        if let Some(a) = self.tracker.approach_remembered(&self.map, &mut self.planner, self.est, STOP_THRESHOLD) {
            self.map.update(obs, self.est);
            self.target = None;
            return Ok(a);
        }
        self.since += 1;
        let stale = self.target.is_none_or(|t| t.distance(&here) < ARRIVAL) || self.since >= REDECIDE_EVERY;
        if stale {
            let bin = self.f.scores(obs, &self.goal)?.argmax();
            self.target = Some(here.offset(NODE_RADIUS, bin_center(bin)));
            self.since = 0;
            self.map.clear(here);
            self.planner.reset();
            self.stats.map_resets += 1;
        }
        self.map.update(obs, self.est);
        Ok(self.planner.step(&self.map, self.est, self.target.unwrap(), None))
    }

    fn set_goal(&mut self, goal: &PanoramicObservation) {
        self.goal = goal.clone();
        self.target = None;
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
