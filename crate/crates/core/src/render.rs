//! SVG and ASCII renderings of a map with a trajectory and a graph overlay.

use crate::geometry::{Point, Pose};
use crate::topograph::GraphDump;
use crate::world::{CellIndex, OccupancyGrid};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

const PX_PER_M: f64 = 40.0;

/// Recorded true poses of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDump {
    pub map_id: String,
    /// Hex fingerprint of the map the run used.
    pub map_key: String,
    pub start: Pose,
    pub goal: Option<Point>,
    pub poses: Vec<Pose>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("{what} was recorded on map {found}, but the map given has key {expected}")]
    MapMismatch { what: &'static str, expected: String, found: String },
}

pub fn map_key_hex(grid: &OccupancyGrid) -> String {
    format!("{:016x}", grid.fingerprint())
}

/// Graph coordinates are estimates in a frame anchored at the start pose
/// with axes aligned to the world; `start` maps them back.
fn graph_to_world(start: Option<Pose>, x: f64, y: f64) -> Point {
    match start {
        Some(s) => Point::new(s.x + x, s.y + y),
        None => Point::new(x, y),
    }
}

fn check(grid: &OccupancyGrid, traj: Option<&TrajectoryDump>, graph: Option<&GraphDump>) -> Result<(), RenderError> {
    let key = map_key_hex(grid);
    if let Some(t) = traj {
        if t.map_key != key {
            return Err(RenderError::MapMismatch {
                what: "trajectory",
                expected: key,
                found: t.map_key.clone(),
            });
        }
    }
    if let Some(found) = graph.and_then(|g| g.map_key.clone()) {
        if found != key {
            return Err(RenderError::MapMismatch {
                what: "graph",
                expected: key,
                found,
            });
        }
    }
    Ok(())
}

/// SVG with the map raster, true trajectory, graph nodes, edges and ghosts,
/// start and goal markers. Output is deterministic.
pub fn render_svg(grid: &OccupancyGrid, traj: Option<&TrajectoryDump>, graph: Option<&GraphDump>) -> Result<String, RenderError> {
    check(grid, traj, graph)?;
    let (ex, ey) = grid.extent();
    let o = grid.origin();
    let (w, h) = (ex * PX_PER_M, ey * PX_PER_M);
    let px = |p: Point| ((p.x - o.x) * PX_PER_M, h - (p.y - o.y) * PX_PER_M);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.1} {h:.1}">"#
    );
    s.push_str(
        "<style>.obs{fill:#333}.traj{fill:none;stroke:#1f77b4;stroke-width:2}.edge{stroke:#2ca02c;stroke-width:2}\
.node{fill:#2ca02c;stroke:#fff}.ghost{fill:none;stroke:#d62728;stroke-width:2;stroke-dasharray:3 2}\
.start{fill:#ff7f0e}.goal{fill:#9467bd}</style>\n",
    );
    let _ = writeln!(s, r##"<rect width="{w:.1}" height="{h:.1}" fill="#fafafa"/>"##);
    let res = grid.resolution();
    let cell = res * PX_PER_M;
    s.push_str("<g class=\"map\">\n");
    for j in 0..grid.height() {
        let mut i = 0;
        while i < grid.width() {
            if !grid.is_obstacle(CellIndex::new(i, j)) {
                i += 1;
                continue;
            }
            let run0 = i;
            while i < grid.width() && grid.is_obstacle(CellIndex::new(i, j)) {
                i += 1;
            }
            let x = run0 as f64 * cell;
            let y = h - (j + 1) as f64 * cell;
            let _ = writeln!(
                s,
                r#"<rect class="obs" x="{x:.2}" y="{y:.2}" width="{:.2}" height="{cell:.2}"/>"#,
                (i - run0) as f64 * cell
            );
        }
    }
    s.push_str("</g>\n");
    if let Some(t) = traj {
        if !t.poses.is_empty() {
            s.push_str("<polyline class=\"traj\" points=\"");
            for (k, p) in t.poses.iter().enumerate() {
                let (x, y) = px(p.position());
                let _ = write!(s, "{}{x:.2},{y:.2}", if k == 0 { "" } else { " " });
            }
            s.push_str("\"/>\n");
        }
    }
    if let Some(g) = graph {
        let start = traj.map(|t| t.start);
        s.push_str("<g class=\"graph\">\n");
        for e in &g.edges {
            let (a, b) = (&g.nodes[e.a], &g.nodes[e.b]);
            let (x1, y1) = px(Point::new(a.capture_x, a.capture_y));
            let (x2, y2) = px(Point::new(b.capture_x, b.capture_y));
            let _ = writeln!(s, r#"<line class="edge" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}"/>"#);
        }
        for n in &g.nodes {
            let (x, y) = px(Point::new(n.capture_x, n.capture_y));
            let _ = writeln!(s, r#"<circle class="node" cx="{x:.2}" cy="{y:.2}" r="6"/>"#);
        }
        for gh in &g.ghosts {
            let (x, y) = px(graph_to_world(start, gh.x, gh.y));
            let _ = writeln!(s, r#"<circle class="ghost" cx="{x:.2}" cy="{y:.2}" r="5"/>"#);
        }
        s.push_str("</g>\n");
    }
    if let Some(t) = traj {
        let (x, y) = px(t.start.position());
        let _ = writeln!(s, r#"<circle class="start" cx="{x:.2}" cy="{y:.2}" r="5"/>"#);
        if let Some(goal) = t.goal {
            let (x, y) = px(goal);
            let _ = writeln!(
                s,
                r#"<rect class="goal" x="{:.2}" y="{:.2}" width="10" height="10"/>"#,
                x - 5.0,
                y - 5.0
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Character raster, `scale` cells per character; `#` obstacle, `*`
/// trajectory, `N` node, `g` ghost, `S` start, `G` goal.
pub fn render_ascii(
    grid: &OccupancyGrid,
    traj: Option<&TrajectoryDump>,
    graph: Option<&GraphDump>,
    scale: usize,
) -> Result<String, RenderError> {
    check(grid, traj, graph)?;
    let scale = scale.max(1);
    let (cw, ch) = (grid.width().div_ceil(scale), grid.height().div_ceil(scale));
    let mut canvas = vec![vec![' '; cw]; ch];
    for (cj, row) in canvas.iter_mut().enumerate() {
        for (ci, c) in row.iter_mut().enumerate() {
            let any = (0..scale).any(|dj| {
                (0..scale).any(|di| {
                    let (i, j) = (ci * scale + di, cj * scale + dj);
                    i < grid.width() && j < grid.height() && grid.is_obstacle(CellIndex::new(i, j))
                })
            });
            *c = if any { '#' } else { '.' };
        }
    }
    let o = grid.origin();
    let size = grid.resolution() * scale as f64;
    let mut put = |p: Point, ch_: char| {
        let i = ((p.x - o.x) / size).floor();
        let j = ((p.y - o.y) / size).floor();
        if i >= 0.0 && j >= 0.0 && (i as usize) < cw && (j as usize) < ch {
            canvas[j as usize][i as usize] = ch_;
        }
    };
    if let Some(t) = traj {
        for p in &t.poses {
            put(p.position(), '*');
        }
    }
    if let Some(g) = graph {
        let start = traj.map(|t| t.start);
        for gh in &g.ghosts {
            put(graph_to_world(start, gh.x, gh.y), 'g');
        }
        for n in &g.nodes {
            put(Point::new(n.capture_x, n.capture_y), 'N');
        }
    }
    if let Some(t) = traj {
        put(t.start.position(), 'S');
        if let Some(goal) = t.goal {
            put(goal, 'G');
        }
    }
    let mut s = String::with_capacity((cw + 1) * ch);
    for row in canvas.iter().rev() {
        s.extend(row.iter());
        s.push('\n');
    }
    Ok(s)
}
