//! Global policy over the topological graph and local point-goal control.

mod dijkstra;
mod local;
mod local_map;

pub use dijkstra::{dijkstra, shortest_path, PlannedPath, Vertex};
pub use local::{local_policy_step, LocalPlanner, HEADING_TOLERANCE_DEG};
pub use local_map::{CellState, LocalMap};

use crate::geometry::{Point, Pose};
use crate::oracle::{OracleError, Predictors};
use crate::sim::PanoramicObservation;
use crate::topograph::{GhostId, NodeId, TopoGraph};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Predicted remaining distance at which the agent stops.
pub const STOP_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GlobalDecision {
    /// Head for the next vertex on the planned path. `delta` is the subgoal
    /// in the current node's frame.
    NavigateToSubgoal { subgoal: Vertex, delta: Pose, long_term: Vertex },
    /// The goal is predicted near. `delta` is the goal in the frame of
    /// `anchor`, or of the agent's estimated pose when `anchor` is `None`.
    GoalInCurrentNode { delta: Pose, anchor: Option<NodeId>, predicted_distance: f64 },
    Stop,
}

impl GlobalDecision {
    /// Target position in the graph's estimated frame, if any.
    pub fn target(&self, graph: &TopoGraph) -> Option<Point> {
        match *self {
            GlobalDecision::NavigateToSubgoal { delta, .. } => {
                Some(graph.node(graph.current_node()).estimated_pose.compose(&delta).position())
            }
            GlobalDecision::GoalInCurrentNode { delta, anchor, .. } => {
                let base = anchor.map_or(graph.agent_pose(), |a| graph.node(a).estimated_pose);
                Some(base.compose(&delta).position())
            }
            GlobalDecision::Stop => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("goal not localized and no ghost nodes remain")]
    ExplorationExhausted,
    #[error("global policy requires a nonempty graph")]
    EmptyGraph,
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// How the long-term ghost is chosen when the goal is not localized.
#[derive(Debug, Clone, Copy)]
pub enum GhostSelection<'a> {
    /// Highest F_S score at the ghost's bin; ties go to the lowest id.
    BestScore { excluded: &'a BTreeSet<GhostId> },
    /// A ghost picked by the caller. Falls through to `ExplorationExhausted`
    /// if it no longer exists.
    Given(GhostId),
}

/// World-frame offset `off` expressed in the body frame of `base`.
fn offset_in_frame(base: Pose, off: Point) -> Pose {
    let (s, c) = base.heading.sin_cos();
    Pose::new(c * off.x + s * off.y, -s * off.x + c * off.y, 0.0)
}

/// Node where the goal observation localizes, in probe order.
pub fn localize_goal(
    graph: &TopoGraph,
    goal: &PanoramicObservation,
    f: &dyn Predictors,
) -> Result<Option<NodeId>, OracleError> {
    graph.localize(goal, f)
}

/// Scores every ghost with F_S evaluated on its parent observation at the
/// ghost's bin; parents are queried once each.
pub fn score_ghosts(
    graph: &TopoGraph,
    goal: &PanoramicObservation,
    f: &dyn Predictors,
) -> Result<BTreeMap<GhostId, f64>, OracleError> {
    let mut per_parent = BTreeMap::new();
    let mut out = BTreeMap::new();
    for g in graph.ghosts() {
        if !per_parent.contains_key(&g.parent) {
            per_parent.insert(g.parent, f.scores(&graph.node(g.parent).observation, goal)?);
        }
        out.insert(g.id, per_parent[&g.parent].get(g.direction_bin));
    }
    Ok(out)
}

fn first_hop(graph: &TopoGraph, dst: Vertex) -> Option<GlobalDecision> {
    let cur = graph.current_node();
    let path = dijkstra(graph, cur, dst)?;
    let subgoal = *path.vertices.get(1)?;
    let delta = match subgoal {
        Vertex::Node(n) => graph.edge_delta(cur, n)?,
        Vertex::Ghost(g) => graph.ghost(g)?.delta,
    };
    Some(GlobalDecision::NavigateToSubgoal { subgoal, delta, long_term: dst })
}

/// One evaluation of the global policy.
///
/// The agent's own panorama, when given, is tried first so the goal can be
/// approached as soon as it is in view. Then the goal is localized over the
/// graph nodes; an unlocalized goal sends the agent toward a ghost.
pub fn global_policy(
    graph: &TopoGraph,
    goal: &PanoramicObservation,
    agent_obs: Option<&PanoramicObservation>,
    f: &dyn Predictors,
    selection: GhostSelection<'_>,
) -> Result<GlobalDecision, PolicyError> {
    if graph.is_empty() {
        return Err(PolicyError::EmptyGraph);
    }
    let agent = graph.agent_pose();
    if let Some(obs) = agent_obs {
        if f.localize(obs, goal)? {
            let rel = f.relative_pose_unchecked(obs, goal)?;
            let d = rel.distance();
            if d <= STOP_THRESHOLD {
                return Ok(GlobalDecision::Stop);
            }
            return Ok(GlobalDecision::GoalInCurrentNode {
                delta: offset_in_frame(agent, rel.offset()),
                anchor: None,
                predicted_distance: d,
            });
        }
    }
    if let Some(n) = localize_goal(graph, goal, f)? {
        if n == graph.current_node() {
            let node = graph.node(n);
            let rel = f.relative_pose_unchecked(&node.observation, goal)?;
            let target = node.estimated_pose.position() + rel.offset();
            let remaining = agent.position().distance(&target);
            if remaining <= STOP_THRESHOLD {
                return Ok(GlobalDecision::Stop);
            }
            return Ok(GlobalDecision::GoalInCurrentNode {
                delta: offset_in_frame(node.estimated_pose, rel.offset()),
                anchor: Some(n),
                predicted_distance: remaining,
            });
        }
        if let Some(d) = first_hop(graph, Vertex::Node(n)) {
            return Ok(d);
        }
    }
    let ghost = match selection {
        GhostSelection::Given(g) => graph.ghost(g).map(|g| g.id),
        GhostSelection::BestScore { excluded } => {
            let scores = score_ghosts(graph, goal, f)?;
            scores
                .into_iter()
                .filter(|(g, _)| !excluded.contains(g))
                .fold(None::<(GhostId, f64)>, |best, (g, s)| match best {
                    Some((_, bs)) if bs >= s => best,
                    _ => Some((g, s)),
                })
                .map(|(g, _)| g)
        }
    };
    let ghost = ghost.ok_or(PolicyError::ExplorationExhausted)?;
    first_hop(graph, Vertex::Ghost(ghost)).ok_or(PolicyError::ExplorationExhausted)
}
