//! Topological map: regular nodes holding panoramas and odometry pose
//! estimates, degree-1 ghost nodes for predicted unexplored directions, and
//! edges carrying relative poses.

use crate::geometry::{OdometryReading, Point, Pose};
use crate::oracle::{bin_center, direction_bin, DirectionBins, OracleError, Predictors, NODE_RADIUS, N_THETA};
use crate::sim::PanoramicObservation;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;
use thiserror::Error;

pub type NodeId = usize;
pub type GhostId = usize;

/// A node lies in a parent's bin if its estimated offset falls in the bin's
/// sector and within this multiple of r.
pub const GHOST_PRUNE_RANGE: f64 = 1.5;

#[derive(Debug, Clone)]
pub struct TopoNode {
    pub id: NodeId,
    pub observation: Arc<PanoramicObservation>,
    pub estimated_pose: Pose,
}

#[derive(Debug, Clone)]
pub struct GhostNode {
    pub id: GhostId,
    pub parent: NodeId,
    pub direction_bin: usize,
    /// Depth rays of the parent panorama covering this bin.
    pub patch: Vec<f64>,
    /// Offset in the parent's estimated body frame; the ghost sits at
    /// (r, θ) from the parent with θ the bin center in the world frame.
    pub delta: Pose,
}

impl GhostNode {
    pub fn rel_pose(&self) -> (f64, f64) {
        (NODE_RADIUS, bin_center(self.direction_bin))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopoEdge {
    pub a: NodeId,
    pub b: NodeId,
    /// Pose of `b` in the frame of `a`.
    pub delta: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateEvent {
    Created(NodeId),
    Relocalized { from: NodeId, to: NodeId, edge_added: bool },
    Unchanged(NodeId),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopoError {
    #[error("no edge between nodes {0} and {1}")]
    NoEdge(NodeId, NodeId),
    #[error("empty path")]
    EmptyPath,
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvariantViolation {
    #[error("node {0} is not reachable from node 0")]
    Disconnected(NodeId),
    #[error("ghost {0} has missing parent {1}")]
    OrphanGhost(GhostId, NodeId),
    #[error("ghost {ghost} lies in bin {bin} of node {parent}, which already contains node {node}")]
    GhostInOccupiedBin {
        ghost: GhostId,
        parent: NodeId,
        bin: usize,
        node: NodeId,
    },
    #[error("edge {0}-{1} is malformed")]
    BadEdge(NodeId, NodeId),
}

#[derive(Debug, Clone, Default)]
pub struct TopoGraph {
    nodes: Vec<TopoNode>,
    ghosts: BTreeMap<GhostId, GhostNode>,
    /// Keyed by `(min, max)`; the stored delta goes from `min` to `max`.
    edges: BTreeMap<(NodeId, NodeId), Pose>,
    adjacency: Vec<BTreeSet<NodeId>>,
    current: NodeId,
    last: NodeId,
    next_ghost: GhostId,
    agent_pose: Pose,
    pruned: u64,
}

impl TopoGraph {
    /// Empty graph whose agent pose estimate starts at `initial`.
    pub fn new(initial: Pose) -> Self {
        Self {
            agent_pose: initial,
            ..Default::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[TopoNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &TopoNode {
        &self.nodes[id]
    }

    pub fn ghosts(&self) -> impl Iterator<Item = &GhostNode> {
        self.ghosts.values()
    }

    pub fn ghost(&self, id: GhostId) -> Option<&GhostNode> {
        self.ghosts.get(&id)
    }

    pub fn ghost_count(&self) -> usize {
        self.ghosts.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = TopoEdge> + '_ {
        self.edges.iter().map(|(&(a, b), &delta)| TopoEdge { a, b, delta })
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency[id].iter().copied()
    }

    pub fn current_node(&self) -> NodeId {
        self.current
    }

    pub fn last_node(&self) -> NodeId {
        self.last
    }

    /// Agent pose estimate composed from odometry.
    pub fn agent_pose(&self) -> Pose {
        self.agent_pose
    }

    /// Number of ghosts removed by pruning so far.
    pub fn pruned_ghosts(&self) -> u64 {
        self.pruned
    }

    /// Delta from `a` to `b` if they share an edge.
    pub fn edge_delta(&self, a: NodeId, b: NodeId) -> Option<Pose> {
        if a < b {
            self.edges.get(&(a, b)).copied()
        } else {
            self.edges.get(&(b, a)).map(Pose::inverse)
        }
    }

    pub fn ghost_position(&self, ghost: &GhostNode) -> Point {
        self.nodes[ghost.parent].estimated_pose.compose(&ghost.delta).position()
    }

    /// Probe order for localization: current node, its neighbors by id, then
    /// all remaining nodes by id.
    pub fn probe_order(&self) -> Vec<NodeId> {
        if self.nodes.is_empty() {
            return Vec::new();
        }
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut seen = vec![false; self.nodes.len()];
        order.push(self.current);
        seen[self.current] = true;
        for n in self.neighbors(self.current) {
            order.push(n);
            seen[n] = true;
        }
        order.extend((0..self.nodes.len()).filter(|&k| !seen[k]));
        order
    }

    /// First node in probe order whose observation localizes `obs`.
    pub fn localize(&self, obs: &PanoramicObservation, f: &dyn Predictors) -> Result<Option<NodeId>, OracleError> {
        for id in self.probe_order() {
            if f.localize(&self.nodes[id].observation, obs)? {
                return Ok(Some(id));
            }
        }
        Ok(None)
    }

    /// Graph Update: relocalize, or add a node with its ghosts.
    pub fn update(
        &mut self,
        obs: &PanoramicObservation,
        odom: OdometryReading,
        f: &dyn Predictors,
    ) -> Result<UpdateEvent, OracleError> {
        self.agent_pose = odom.apply(&self.agent_pose);
        if self.nodes.is_empty() {
            let id = self.push_node(obs);
            let bins = f.explorable(obs)?;
            self.prune_and_add_ghosts(id, bins);
            return Ok(UpdateEvent::Created(id));
        }
        match self.localize(obs, f)? {
            Some(n) if n == self.current => Ok(UpdateEvent::Unchanged(n)),
            Some(n) => {
                let from = self.current;
                let edge_added = self.add_edge(from, n);
                if edge_added {
                    self.prune_for(n);
                    self.prune_for(from);
                }
                self.last = from;
                self.current = n;
                Ok(UpdateEvent::Relocalized { from, to: n, edge_added })
            }
            None => {
                let from = self.current;
                let id = self.push_node(obs);
                self.add_edge(from, id);
                self.last = from;
                self.current = id;
                let bins = f.explorable(obs)?;
                self.prune_and_add_ghosts(id, bins);
                Ok(UpdateEvent::Created(id))
            }
        }
    }

    fn push_node(&mut self, obs: &PanoramicObservation) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(TopoNode {
            id,
            observation: Arc::new(obs.clone()),
            estimated_pose: self.agent_pose,
        });
        self.adjacency.push(BTreeSet::new());
        id
    }

    /// Adds an edge with the delta implied by the two pose estimates; false
    /// if it already exists.
    fn add_edge(&mut self, a: NodeId, b: NodeId) -> bool {
        let key = (a.min(b), a.max(b));
        if a == b || self.edges.contains_key(&key) {
            return false;
        }
        let pa = self.nodes[key.0].estimated_pose;
        let pb = self.nodes[key.1].estimated_pose;
        self.edges.insert(key, pa.between(&pb));
        self.adjacency[a].insert(b);
        self.adjacency[b].insert(a);
        true
    }

    /// True if node `n` lies in bin `bin` of node `parent`.
    pub fn node_in_bin(&self, parent: NodeId, bin: usize, n: NodeId) -> bool {
        if n == parent {
            return false;
        }
        let p = self.nodes[parent].estimated_pose.position();
        let q = self.nodes[n].estimated_pose.position();
        let d = p.distance(&q);
        d <= GHOST_PRUNE_RANGE * NODE_RADIUS && d > 0.0 && direction_bin(p.bearing_to(&q)) == bin
    }

    /// Removes every ghost (on any node) whose bin contains node `n`.
    fn prune_for(&mut self, n: NodeId) {
        let doomed: Vec<GhostId> = self
            .ghosts
            .values()
            .filter(|g| self.node_in_bin(g.parent, g.direction_bin, n))
            .map(|g| g.id)
            .collect();
        for id in doomed {
            self.ghosts.remove(&id);
            self.pruned += 1;
        }
    }

    /// Adds ghosts for the explorable bins of a new node, skipping bins that
    /// already contain a regular node, then prunes ghosts pointing at it.
    pub fn prune_and_add_ghosts(&mut self, new_node: NodeId, explorable: DirectionBins<bool>) {
        self.prune_for(new_node);
        let obs = self.nodes[new_node].observation.clone();
        let heading = self.nodes[new_node].estimated_pose.heading;
        let n_rays = obs.n_rays();
        let per_bin = n_rays / N_THETA;
        for bin in explorable.true_bins() {
            if (0..self.nodes.len()).any(|n| self.node_in_bin(new_node, bin, n)) {
                continue;
            }
            let theta = bin_center(bin);
            let start = (bin * per_bin + n_rays - per_bin / 2) % n_rays;
            let patch = (0..per_bin).map(|k| obs.depths()[(start + k) % n_rays]).collect();
            let local = theta - heading;
            let id = self.next_ghost;
            self.next_ghost += 1;
            self.ghosts.insert(
                id,
                GhostNode {
                    id,
                    parent: new_node,
                    direction_bin: bin,
                    patch,
                    delta: Pose::new(NODE_RADIUS * local.cos(), NODE_RADIUS * local.sin(), 0.0),
                },
            );
        }
    }

    /// SE(2) composition of edge deltas along consecutive nodes of `path`.
    pub fn compose_along_path(&self, path: &[NodeId]) -> Result<Pose, TopoError> {
        let first = *path.first().ok_or(TopoError::EmptyPath)?;
        if first >= self.nodes.len() {
            return Err(TopoError::UnknownNode(first));
        }
        let mut acc = Pose::identity();
        for w in path.windows(2) {
            let d = self.edge_delta(w[0], w[1]).ok_or(TopoError::NoEdge(w[0], w[1]))?;
            acc = acc.compose(&d);
        }
        Ok(acc)
    }

    pub fn check_invariants(&self) -> Result<(), InvariantViolation> {
        if self.nodes.is_empty() {
            return Ok(());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(n) = queue.pop_front() {
            for m in self.neighbors(n) {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        if let Some(n) = seen.iter().position(|s| !s) {
            return Err(InvariantViolation::Disconnected(n));
        }
        for (&(a, b), d) in &self.edges {
            if a >= b || b >= self.nodes.len() || !d.is_finite() {
                return Err(InvariantViolation::BadEdge(a, b));
            }
        }
        for g in self.ghosts.values() {
            if g.parent >= self.nodes.len() {
                return Err(InvariantViolation::OrphanGhost(g.id, g.parent));
            }
            for n in self.neighbors(g.parent) {
                if self.node_in_bin(g.parent, g.direction_bin, n) {
                    return Err(InvariantViolation::GhostInOccupiedBin {
                        ghost: g.id,
                        parent: g.parent,
                        bin: g.direction_bin,
                        node: n,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn dump(&self) -> GraphDump {
        GraphDump {
            map_key: self.nodes.first().map(|n| format!("{:016x}", n.observation.map_key())),
            current: self.current,
            nodes: self
                .nodes
                .iter()
                .map(|n| {
                    let c = n.observation.capture_pose();
                    NodeRecord {
                        id: n.id,
                        x: n.estimated_pose.x,
                        y: n.estimated_pose.y,
                        heading: n.estimated_pose.heading,
                        capture_x: c.x,
                        capture_y: c.y,
                    }
                })
                .collect(),
            ghosts: self
                .ghosts
                .values()
                .map(|g| {
                    let p = self.ghost_position(g);
                    GhostRecord {
                        id: g.id,
                        parent: g.parent,
                        bin: g.direction_bin,
                        x: p.x,
                        y: p.y,
                    }
                })
                .collect(),
            edges: self
                .edges()
                .map(|e| EdgeRecord {
                    a: e.a,
                    b: e.b,
                    dx: e.delta.x,
                    dy: e.delta.y,
                    dtheta: e.delta.heading,
                })
                .collect(),
        }
    }
}

/// Serializable snapshot of a graph, in estimated coordinates, with node
/// capture positions for rendering against the true map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDump {
    pub map_key: Option<String>,
    pub current: NodeId,
    pub nodes: Vec<NodeRecord>,
    pub ghosts: Vec<GhostRecord>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub capture_x: f64,
    pub capture_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhostRecord {
    pub id: GhostId,
    pub parent: NodeId,
    pub bin: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub a: NodeId,
    pub b: NodeId,
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}
