use super::{Agent, AgentError, AgentKind, AgentStats, GoalTracker, SharedPredictors, Wander};
use crate::geometry::{OdometryReading, Point, Pose};
use crate::noise::{rng_from, SimRng};
use crate::oracle::{bin_center, NODE_RADIUS};
use crate::policies::{
    dijkstra, global_policy, GhostSelection, GlobalDecision, LocalMap, LocalPlanner, PolicyError, Vertex,
    STOP_THRESHOLD,
};
use crate::sim::{Action, PanoramicObservation};
use crate::topograph::{GhostId, NodeId, TopoGraph, UpdateEvent};
use rand::Rng;
use std::collections::BTreeSet;

pub const LOCAL_MAP_SIDE: f64 = 16.0;
/// Ghost targets lie this far past the ghost so the agent leaves the parent
/// node's radius instead of hovering on its edge.
const GHOST_OVERSHOOT: f64 = 1.0;
/// A long-term ghost is given up after this many steps, or after this many
/// steps without getting closer.
const GHOST_TIMEOUT: u32 = 200;
const GHOST_STALL: u32 = 50;
/// A ghost whose target is this close counts as explored.
const GHOST_REACHED: f64 = 0.75;
/// Node subgoals closer than this count as reached, and stay reached until
/// the agent is `NODE_LEAVE` away.
const NODE_ARRIVAL: f64 = 0.5;
const NODE_LEAVE: f64 = NODE_RADIUS;
/// Wandering this long gives blacklisted ghosts another chance.
const BLACKLIST_RETRY: u32 = 150;

#[derive(Debug, Clone, Copy)]
struct GhostProgress {
    ghost: GhostId,
    steps: u32,
    best: f64,
    since_best: u32,
}

/// The full topological agent, or with `random_ghosts` the variant that
/// picks its long-term ghost at random instead of by score.
pub struct TopologicalAgent {
    f: SharedPredictors,
    goal: PanoramicObservation,
    graph: TopoGraph,
    map: LocalMap,
    planner: LocalPlanner,
    random_ghosts: bool,
    rng: SimRng,
    chosen: Option<GhostId>,
    blacklist: BTreeSet<GhostId>,
    progress: Option<GhostProgress>,
    wander: Wander,
    wandering: u32,
    passed: Option<NodeId>,
    tracker: GoalTracker,
    stats: AgentStats,
    last_decision: Option<GlobalDecision>,
}

impl TopologicalAgent {
    pub fn new(f: SharedPredictors, goal: PanoramicObservation, start: Pose, random_ghosts: bool, seed: u64) -> Self {
        Self {
            f,
            goal,
            graph: TopoGraph::new(start),
            map: LocalMap::new(LOCAL_MAP_SIDE, 0.05, start.position()),
            planner: LocalPlanner::new(),
            random_ghosts,
            rng: rng_from(seed, 0x6e7473),
            chosen: None,
            blacklist: BTreeSet::new(),
            progress: None,
            wander: Wander::new(),
            wandering: 0,
            passed: None,
            tracker: GoalTracker::default(),
            stats: AgentStats::default(),
            last_decision: None,
        }
    }

    pub fn last_decision(&self) -> Option<GlobalDecision> {
        self.last_decision
    }

    pub fn blacklist(&self) -> &BTreeSet<GhostId> {
        &self.blacklist
    }

    fn ghost_target(&self, g: GhostId) -> Option<Point> {
        let ghost = self.graph.ghost(g)?;
        let parent = self.graph.node(ghost.parent).estimated_pose.position();
        Some(parent.offset(NODE_RADIUS + GHOST_OVERSHOOT, bin_center(ghost.direction_bin)))
    }

    fn vertex_target(&self, v: Vertex) -> Option<Point> {
        match v {
            Vertex::Node(n) => Some(self.graph.node(n).estimated_pose.position()),
            Vertex::Ghost(g) => self.ghost_target(g),
        }
    }

    /// Next target along the plan toward `long_term`, skipping node
    /// subgoals the agent already stands on.
    fn route_target(&mut self, subgoal: Vertex, long_term: Vertex) -> Option<Point> {
        let here = self.graph.agent_pose().position();
        if let Some(n) = self.passed {
            if self.graph.node(n).estimated_pose.position().distance(&here) > NODE_LEAVE {
                self.passed = None;
            }
        }
        // inside the ghost's parent region the ghost is reached directly
        if let Vertex::Ghost(g) = long_term {
            if self.near_node(self.graph.ghost(g)?.parent) {
                return self.ghost_target(g);
            }
        }
        let mut sub = subgoal;
        let mut hops = 0;
        while let Vertex::Node(n) = sub {
            let d = self.graph.node(n).estimated_pose.position().distance(&here);
            let reached = d < NODE_ARRIVAL || self.passed == Some(n);
            if !reached || sub == long_term || hops >= 4 {
                break;
            }
            self.passed = Some(n);
            let path = dijkstra(&self.graph, n, long_term)?;
            sub = *path.vertices.get(1)?;
            hops += 1;
        }
        self.vertex_target(sub)
    }

    fn near_node(&self, n: NodeId) -> bool {
        let here = self.graph.agent_pose().position();
        self.graph.node(n).estimated_pose.position().distance(&here) < NODE_RADIUS
    }

    fn selection_ghost(&mut self) -> Option<GhostId> {
        let valid = |g: GhostId, me: &Self| me.graph.ghost(g).is_some() && !me.blacklist.contains(&g);
        if self.chosen.is_some_and(|g| valid(g, self)) {
            return self.chosen;
        }
        let options: Vec<GhostId> = self.graph.ghosts().map(|g| g.id).filter(|&g| valid(g, self)).collect();
        self.chosen = (!options.is_empty()).then(|| options[self.rng.random_range(0..options.len())]);
        self.chosen
    }

    fn track_ghost(&mut self, g: GhostId) {
        let Some(target) = self.ghost_target(g) else { return };
        let d = self.graph.agent_pose().position().distance(&target);
        let p = match self.progress {
            Some(mut p) if p.ghost == g => {
                p.steps += 1;
                if d < p.best - 0.1 {
                    p.best = d;
                    p.since_best = 0;
                } else {
                    p.since_best += 1;
                }
                p
            }
            _ => GhostProgress { ghost: g, steps: 0, best: d, since_best: 0 },
        };
        if p.steps > GHOST_TIMEOUT || p.since_best > GHOST_STALL || d < GHOST_REACHED {
            self.blacklist.insert(g);
            self.stats.blacklisted += 1;
            self.progress = None;
        } else {
            self.progress = Some(p);
        }
    }

    fn decide(&mut self, obs: &PanoramicObservation) -> Result<GlobalDecision, PolicyError> {
        let given = if self.random_ghosts { Some(self.selection_ghost()) } else { None };
        let selection = match given {
            Some(Some(g)) => GhostSelection::Given(g),
            Some(None) => GhostSelection::Given(GhostId::MAX),
            None => GhostSelection::BestScore { excluded: &self.blacklist },
        };
        global_policy(&self.graph, &self.goal, Some(obs), self.f.as_ref(), selection)
    }
}

impl Agent for TopologicalAgent {
    fn kind(&self) -> AgentKind {
        if self.random_ghosts {
            AgentKind::NoScore
        } else {
            AgentKind::Nts
        }
    }

    fn act(&mut self, obs: &PanoramicObservation, odom: OdometryReading) -> Result<Action, AgentError> {
        self.stats.steps += 1;
        let event = self.graph.update(obs, odom, self.f.as_ref())?;
        let est = self.graph.agent_pose();
        if matches!(event, UpdateEvent::Relocalized { .. }) {
            self.tracker.reset();
        }
        if matches!(event, UpdateEvent::Created(_)) {
            self.map.clear(est.position());
            self.planner.reset();
            self.stats.map_resets += 1;
        }
        self.map.update(obs, est);
        let decision = match self.decide(obs) {
            Ok(d) => d,
            Err(PolicyError::ExplorationExhausted) => {
                self.last_decision = None;
                self.progress = None;
                self.stats.wander_steps += 1;
                self.wandering += 1;
                if self.wandering >= BLACKLIST_RETRY {
                    self.blacklist.clear();
                    self.wandering = 0;
                }
                return Ok(self.wander.step(&mut self.rng, &self.map, &mut self.planner, est));
            }
            Err(PolicyError::Oracle(e)) => return Err(e.into()),
            Err(PolicyError::EmptyGraph) => unreachable!("graph is updated before planning"),
        };
        self.wandering = 0;
        self.last_decision = Some(decision);
        let from_view = matches!(decision, GlobalDecision::GoalInCurrentNode { anchor: None, .. } | GlobalDecision::Stop);
        if !from_view {
            if let Some(a) = self.tracker.approach_remembered(&self.map, &mut self.planner, est, STOP_THRESHOLD) {
                return Ok(a);
            }
        }
        let action = match decision {
            GlobalDecision::Stop => Action::Stop,
            GlobalDecision::GoalInCurrentNode { anchor, predicted_distance, .. } => {
                self.progress = None;
                let target = decision.target(&self.graph).expect("goal decisions have a target");
                match anchor {
                    None => self.tracker.approach(&self.map, &mut self.planner, est, target, predicted_distance, STOP_THRESHOLD),
                    Some(_) => self.planner.step(&self.map, est, target, Some(STOP_THRESHOLD)),
                }
            }
            GlobalDecision::NavigateToSubgoal { long_term: Vertex::Node(n), .. } if self.near_node(n) => {
                // the goal's node is close: head for the goal itself
                self.progress = None;
                let node = self.graph.node(n);
                let rel = self.f.relative_pose_unchecked(&node.observation, &self.goal)?;
                let target = node.estimated_pose.position() + rel.offset();
                self.planner.step(&self.map, est, target, Some(STOP_THRESHOLD))
            }
            GlobalDecision::NavigateToSubgoal { subgoal, long_term, .. } => {
                match long_term {
                    Vertex::Ghost(g) => self.track_ghost(g),
                    Vertex::Node(_) => self.progress = None,
                }
                match self.route_target(subgoal, long_term) {
                    Some(t) => self.planner.step(&self.map, est, t, None),
                    None => self.wander.step(&mut self.rng, &self.map, &mut self.planner, est),
                }
            }
        };
        Ok(action)
    }

    fn set_goal(&mut self, goal: &PanoramicObservation) {
        self.goal = goal.clone();
        self.blacklist.clear();
        self.progress = None;
        self.chosen = None;
        self.tracker.reset();
        self.planner.reset();
        self.wander.reset();
    }

    fn estimated_pose(&self) -> Pose {
        self.graph.agent_pose()
    }

    fn graph(&self) -> Option<&TopoGraph> {
        Some(&self.graph)
    }

    fn stats(&self) -> AgentStats {
        self.stats
    }
}
