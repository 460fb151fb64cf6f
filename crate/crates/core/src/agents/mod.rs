//! Navigation agents: the full topological agent, its two ablations and the
//! frontier-exploration baseline.

mod frontier;
mod greedy;
mod topological;

pub use frontier::FrontierAgent;
pub use greedy::GreedyAgent;
pub use topological::TopologicalAgent;

use crate::geometry::{OdometryReading, Point, Pose};
use crate::noise::SimRng;
use crate::oracle::{OracleError, Predictors};
use crate::policies::{LocalMap, LocalPlanner};
use crate::sim::{Action, PanoramicObservation};
use crate::topograph::TopoGraph;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

pub type SharedPredictors = Arc<dyn Predictors + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Nts,
    NoGraph,
    NoScore,
    Fbe,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [AgentKind::Nts, AgentKind::NoGraph, AgentKind::NoScore, AgentKind::Fbe];

    pub fn name(&self) -> &'static str {
        match self {
            AgentKind::Nts => "nts",
            AgentKind::NoGraph => "no_graph",
            AgentKind::NoScore => "no_score",
            AgentKind::Fbe => "fbe",
        }
    }

    /// Label used in result tables.
    pub fn label(&self) -> &'static str {
        match self {
            AgentKind::Nts => "NTS",
            AgentKind::NoGraph => "NTS w/o Graph",
            AgentKind::NoScore => "NTS w/o Score",
            AgentKind::Fbe => "Metric Map + FBE + Local",
        }
    }

    /// A fresh agent. `start_heading` seeds the estimated frame, which
    /// otherwise starts at the origin.
    pub fn build(&self, f: SharedPredictors, goal: &PanoramicObservation, start_heading: f64, seed: u64) -> Box<dyn Agent> {
        let start = Pose::new(0.0, 0.0, start_heading);
        match self {
            AgentKind::Nts => Box::new(TopologicalAgent::new(f, goal.clone(), start, false, seed)),
            AgentKind::NoScore => Box::new(TopologicalAgent::new(f, goal.clone(), start, true, seed)),
            AgentKind::NoGraph => Box::new(GreedyAgent::new(f, goal.clone(), start, seed)),
            AgentKind::Fbe => Box::new(FrontierAgent::new(f, goal.clone(), start, seed)),
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown agent '{0}' (expected nts, no_graph, no_score or fbe)")]
pub struct UnknownAgent(pub String);

impl FromStr for AgentKind {
    type Err = UnknownAgent;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "nts" => Ok(AgentKind::Nts),
            "no_graph" | "nograph" | "nts_no_graph" => Ok(AgentKind::NoGraph),
            "no_score" | "noscore" | "nts_no_score" => Ok(AgentKind::NoScore),
            "fbe" | "fbe_local" => Ok(AgentKind::Fbe),
            _ => Err(UnknownAgent(s.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("predictor failure: {0}")]
    Predictor(#[from] OracleError),
}

/// Counters exposed for diagnostics and tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentStats {
    pub steps: u64,
    pub wander_steps: u64,
    pub blacklisted: u64,
    pub map_resets: u64,
}

pub trait Agent: Send {
    fn kind(&self) -> AgentKind;
    /// Next action given the latest observation and the odometry reading
    /// for the previous action (zero on the first call).
    fn act(&mut self, obs: &PanoramicObservation, odom: OdometryReading) -> Result<Action, AgentError>;
    /// Switches to a new goal, keeping whatever memory the agent has.
    fn set_goal(&mut self, goal: &PanoramicObservation);
    fn estimated_pose(&self) -> Pose;
    fn graph(&self) -> Option<&TopoGraph> {
        None
    }
    fn stats(&self) -> AgentStats;
}

/// Approach a goal predicted from the current panorama. Returns `None` if
/// the goal is not localized from here.
pub(crate) fn approach_from_view(
    f: &dyn Predictors,
    obs: &PanoramicObservation,
    goal: &PanoramicObservation,
    est: Pose,
) -> Result<Option<(Point, f64)>, OracleError> {
    if !f.localize(obs, goal)? {
        return Ok(None);
    }
    let rel = f.relative_pose_unchecked(obs, goal)?;
    Ok(Some((est.position() + rel.offset(), rel.distance())))
}

const GOAL_SAMPLES: usize = 12;
/// Steps a view-based goal estimate is kept after the goal drops out of view.
const GOAL_MEMORY: u32 = 20;

/// Running mean of the last few view-based goal predictions, in the
/// estimated frame.
#[derive(Debug, Clone, Default)]
pub(crate) struct GoalTracker {
    samples: VecDeque<Point>,
    unseen: u32,
}

impl GoalTracker {
    pub fn reset(&mut self) {
        self.samples.clear();
        self.unseen = 0;
    }

    pub fn add(&mut self, p: Point) -> Point {
        if self.samples.len() == GOAL_SAMPLES {
            self.samples.pop_front();
        }
        self.samples.push_back(p);
        self.unseen = 0;
        self.mean().unwrap()
    }

    fn mean(&self) -> Option<Point> {
        if self.samples.is_empty() {
            return None;
        }
        let n = self.samples.len() as f64;
        let (x, y) = self.samples.iter().fold((0.0, 0.0), |a, q| (a.0 + q.x, a.1 + q.y));
        Some(Point::new(x / n, y / n))
    }

    /// Call on steps without a view-based prediction; returns the estimate
    /// while it is still fresh.
    pub fn remembered(&mut self) -> Option<Point> {
        self.unseen += 1;
        if self.unseen > GOAL_MEMORY {
            self.samples.clear();
        }
        self.mean()
    }

    /// Action toward the remembered estimate, if any.
    pub fn approach_remembered(&mut self, map: &LocalMap, planner: &mut LocalPlanner, est: Pose, stop: f64) -> Option<Action> {
        let mean = self.remembered()?;
        if mean.distance(&est.position()) <= stop {
            return Some(Action::Stop);
        }
        Some(planner.step(map, est, mean, Some(stop)))
    }

    /// Action toward a view-based prediction `(goal, d)`: stop when either
    /// the prediction or the running mean is within `stop` of the agent.
    pub fn approach(&mut self, map: &LocalMap, planner: &mut LocalPlanner, est: Pose, goal: Point, d: f64, stop: f64) -> Action {
        let mean = self.add(goal);
        if d <= stop || mean.distance(&est.position()) <= stop {
            return Action::Stop;
        }
        planner.step(map, est, mean, Some(stop))
    }
}

const WANDER_DISTANCE: f64 = 2.0;
const WANDER_PERIOD: u32 = 30;

/// Fallback motion when nothing is left to explore: head for random nearby
/// points, re-drawn on arrival or after a fixed number of steps.
#[derive(Debug, Clone)]
pub(crate) struct Wander {
    target: Option<Point>,
    steps: u32,
}

impl Wander {
    pub fn new() -> Self {
        Self { target: None, steps: 0 }
    }

    pub fn reset(&mut self) {
        self.target = None;
        self.steps = 0;
    }

    pub fn step(&mut self, rng: &mut SimRng, map: &LocalMap, planner: &mut LocalPlanner, est: Pose) -> Action {
        let here = est.position();
        let stale = self.target.is_none_or(|t| t.distance(&here) < 0.4) || self.steps >= WANDER_PERIOD;
        if stale {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            self.target = Some(here.offset(WANDER_DISTANCE, a));
            self.steps = 0;
        }
        self.steps += 1;
        planner.step(map, est, self.target.unwrap(), None)
    }
}
