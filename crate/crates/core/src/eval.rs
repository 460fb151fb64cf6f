//! Episode generation, single- and sequential-goal suites, Success and SPL.

use crate::agents::{Agent, AgentKind, SharedPredictors};
use crate::geometry::{OdometryReading, Point, Pose};
use crate::noise::{derive_seed, rng_from};
use crate::oracle::{OraclePredictors, PredictorCorruption};
use crate::sim::{
    Action, Difficulty, Episode, NoiseConfig, PanoramicObservation, SimConfig, SimError, Simulator, SuccessMode,
    DEFAULT_MAX_STEPS,
};
use crate::topograph::{GraphDump, InvariantViolation, TopoGraph};
use crate::world::{CellIndex, DistanceField, OccupancyGrid};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::sync::Arc;
use thiserror::Error;

/// Episode endpoints keep at least this much free space around them.
pub const ENDPOINT_CLEARANCE: f64 = 0.2;
/// Sequential goals are drawn this far (geodesic) from the previous goal.
pub const SEQUENTIAL_BAND: (f64, f64) = (1.5, 5.0);
const STARTS_PER_EPISODE: usize = 40;

#[derive(Debug, Clone)]
pub struct NamedMap {
    pub id: String,
    pub grid: Arc<OccupancyGrid>,
}

impl NamedMap {
    pub fn new(id: impl Into<String>, grid: OccupancyGrid) -> Self {
        Self {
            id: id.into(),
            grid: Arc::new(grid),
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no maps given")]
    NoMaps,
    #[error("episode count must be at least 1")]
    NoEpisodes,
    #[error("map '{map}' has no start/goal pair with geodesic distance in [{lo}, {hi}] m")]
    BandUnreachable { map: String, lo: f64, hi: f64 },
    #[error("episode references unknown map '{0}'")]
    UnknownMap(String),
    #[error("goal count must be at least 1")]
    NoGoals,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Free cells whose `ENDPOINT_CLEARANCE` neighbourhood is obstacle-free.
fn clear_cells(grid: &OccupancyGrid) -> Vec<bool> {
    let r = (ENDPOINT_CLEARANCE / grid.resolution()).ceil() as i64;
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    let mask = grid.obstacle_mask();
    // separable max filter over rows, then columns
    let mut rows = vec![false; mask.len()];
    for j in 0..h {
        for i in 0..w {
            rows[(j * w + i) as usize] = (i - r..=i + r).any(|x| x < 0 || x >= w || mask[(j * w + x) as usize]);
        }
    }
    let mut out = vec![false; mask.len()];
    for j in 0..h {
        for i in 0..w {
            let blocked = (j - r..=j + r).any(|y| y < 0 || y >= h || rows[(y * w + i) as usize]);
            out[(j * w + i) as usize] = !blocked;
        }
    }
    out
}

fn sample_clear(clear: &[bool], grid: &OccupancyGrid, rng: &mut impl Rng) -> Option<CellIndex> {
    let cells: Vec<usize> = (0..clear.len()).filter(|&k| clear[k]).collect();
    if cells.is_empty() {
        return None;
    }
    let k = cells[rng.random_range(0..cells.len())];
    Some(CellIndex::new(k % grid.width(), k / grid.width()))
}

/// Goal cell drawn uniformly among clear cells whose geodesic distance from
/// the field's source lies in `band`.
fn sample_in_band(field: &DistanceField, clear: &[bool], grid: &OccupancyGrid, band: (f64, f64), rng: &mut impl Rng) -> Option<CellIndex> {
    let w = grid.width();
    let candidates: Vec<usize> = (0..clear.len())
        .filter(|&k| clear[k])
        .filter(|&k| {
            field
                .meters(CellIndex::new(k % w, k / w))
                .is_some_and(|d| d >= band.0 && d <= band.1)
        })
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let k = candidates[rng.random_range(0..candidates.len())];
    Some(CellIndex::new(k % w, k / w))
}

/// Rejection-samples `n` episodes whose start/goal geodesic distance lies in
/// the difficulty band, cycling over `maps`.
pub fn generate_episodes(maps: &[NamedMap], difficulty: Difficulty, n: usize, seed: u64) -> Result<Vec<Episode>, EvalError> {
    if maps.is_empty() {
        return Err(EvalError::NoMaps);
    }
    if n == 0 {
        return Err(EvalError::NoEpisodes);
    }
    let band = difficulty.band();
    let clear: Vec<Vec<bool>> = maps.iter().map(|m| clear_cells(&m.grid)).collect();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let m = k % maps.len();
        let map = &maps[m];
        let grid = &map.grid;
        let ep_seed = derive_seed(seed, k as u64);
        let mut rng = rng_from(ep_seed, difficulty as u64);
        let mut found = None;
        for _ in 0..STARTS_PER_EPISODE {
            let Some(s) = sample_clear(&clear[m], grid, &mut rng) else { break };
            let field = DistanceField::compute(grid, s);
            if let Some(g) = sample_in_band(&field, &clear[m], grid, band, &mut rng) {
                found = Some((s, g));
                break;
            }
        }
        let (s, g) = found.ok_or_else(|| EvalError::BandUnreachable {
            map: map.id.clone(),
            lo: band.0,
            hi: band.1,
        })?;
        let sp = grid.cell_center(s);
        let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        out.push(Episode {
            map_id: map.id.clone(),
            start: Pose::new(sp.x, sp.y, heading),
            goal: grid.cell_center(g),
            difficulty,
            seed: ep_seed,
            max_steps: DEFAULT_MAX_STEPS,
        });
    }
    Ok(out)
}

pub fn write_episodes<W: io::Write>(episodes: &[Episode], w: W) -> Result<(), EvalError> {
    serde_json::to_writer_pretty(w, episodes)?;
    Ok(())
}

pub fn read_episodes<R: io::Read>(r: R) -> Result<Vec<Episode>, EvalError> {
    Ok(serde_json::from_reader(r)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub success: bool,
    /// True path length, from simulator poses.
    pub l_agent: f64,
    /// Geodesic start-goal distance on the true map.
    pub l_star: f64,
    pub steps: u32,
    pub stop_taken: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trajectory: Vec<Pose>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl Outcome {
    /// Per-episode SPL term `S·l*/max(l, l*)`.
    pub fn spl(&self) -> f64 {
        if !self.success {
            return 0.0;
        }
        self.l_star / self.l_agent.max(self.l_star)
    }
}

/// Mean SPL; 0 for an empty slice.
pub fn spl(outcomes: &[Outcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().map(Outcome::spl).sum::<f64>() / outcomes.len() as f64
}

pub fn success_rate(outcomes: &[Outcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().filter(|o| o.success).count() as f64 / outcomes.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub agent: AgentKind,
    pub difficulty: Difficulty,
    pub success: f64,
    pub spl: f64,
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub agent: AgentKind,
    pub noise: NoiseConfig,
    pub corruption: PredictorCorruption,
    pub success_mode: SuccessMode,
    /// Worker threads; results do not depend on it.
    pub workers: usize,
    pub keep_trajectories: bool,
    /// Check graph invariants after every update (topological agents).
    pub check_invariants: bool,
}

impl SuiteConfig {
    pub fn new(agent: AgentKind) -> Self {
        Self {
            agent,
            noise: NoiseConfig::default(),
            corruption: PredictorCorruption::none(),
            success_mode: SuccessMode::Standard,
            workers: 1,
            keep_trajectories: false,
            check_invariants: false,
        }
    }

    fn sim_config(&self) -> SimConfig {
        SimConfig {
            success_mode: self.success_mode,
            ..SimConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub rows: Vec<ResultRow>,
    pub outcomes: Vec<Outcome>,
    /// Graph invariant violations seen, as (episode index, step, violation).
    pub violations: Vec<(usize, u32, InvariantViolation)>,
}

fn predictor_set(maps: &[NamedMap], corruption: &PredictorCorruption) -> BTreeMap<String, SharedPredictors> {
    maps.iter()
        .map(|m| {
            let f: SharedPredictors = Arc::new(OraclePredictors::new(m.grid.clone(), *corruption));
            (m.id.clone(), f)
        })
        .collect()
}

fn find_map<'a>(maps: &'a [NamedMap], id: &str) -> Result<&'a NamedMap, EvalError> {
    maps.iter().find(|m| m.id == id).ok_or_else(|| EvalError::UnknownMap(id.to_string()))
}

fn geodesic_length(grid: &OccupancyGrid, a: Point, b: Point) -> f64 {
    crate::world::geodesic(grid, a, b)
        .ok()
        .and_then(|r| r.distance)
        .unwrap_or_else(|| a.distance(&b))
        .max(1e-9)
}

/// What happened during one agent-driven leg of an episode.
struct Leg {
    steps: u32,
    violations: Vec<(u32, InvariantViolation)>,
    error: Option<String>,
}

/// Drives `agent` until the simulator marks the current goal done.
fn drive(
    sim: &mut Simulator,
    agent: &mut dyn Agent,
    mut obs: PanoramicObservation,
    mut odom: OdometryReading,
    check: bool,
    pending: &mut OdometryReading,
) -> Leg {
    let mut leg = Leg {
        steps: 0,
        violations: Vec::new(),
        error: None,
    };
    while !sim.is_done() {
        let action = match agent.act(&obs, odom) {
            Ok(a) => a,
            Err(e) => {
                leg.error = Some(e.to_string());
                break;
            }
        };
        if check {
            if let Some(Err(v)) = agent.graph().map(TopoGraph::check_invariants) {
                leg.violations.push((sim.steps(), v));
            }
        }
        match sim.step(action) {
            Ok(r) => {
                leg.steps += 1;
                obs = r.observation;
                odom = r.odometry;
            }
            Err(e) => {
                leg.error = Some(e.to_string());
                break;
            }
        }
        if action == Action::Stop {
            break;
        }
    }
    *pending = odom;
    leg
}

/// Runs one episode to termination.
pub fn run_episode(
    map: &NamedMap,
    f: SharedPredictors,
    episode: &Episode,
    cfg: &SuiteConfig,
) -> (Outcome, Vec<(u32, InvariantViolation)>) {
    let (o, v, _) = run_episode_recorded(map, f, episode, cfg);
    (o, v)
}

/// As [`run_episode`], also returning the agent's final graph if it keeps one.
pub fn run_episode_recorded(
    map: &NamedMap,
    f: SharedPredictors,
    episode: &Episode,
    cfg: &SuiteConfig,
) -> (Outcome, Vec<(u32, InvariantViolation)>, Option<GraphDump>) {
    let l_star = geodesic_length(&map.grid, episode.start.position(), episode.goal);
    let mut sim = Simulator::new(map.grid.clone(), cfg.sim_config(), cfg.noise);
    let obs = match sim.reset(episode) {
        Ok(o) => o,
        Err(e) => {
            return (
                Outcome {
                    success: false,
                    l_agent: 0.0,
                    l_star,
                    steps: 0,
                    stop_taken: false,
                    trajectory: Vec::new(),
                    error: Some(e.to_string()),
                },
                Vec::new(),
                None,
            )
        }
    };
    let goal_obs = sim.goal_observation().expect("reset captures the goal").clone();
    let mut agent = cfg.agent.build(f, &goal_obs, episode.start.heading, episode.seed);
    let mut pending = OdometryReading::ZERO;
    let leg = drive(&mut sim, agent.as_mut(), obs, OdometryReading::ZERO, cfg.check_invariants, &mut pending);
    let outcome = Outcome {
        success: leg.error.is_none() && sim.succeeded(),
        l_agent: sim.path_length(),
        l_star,
        steps: sim.steps(),
        stop_taken: sim.stop_pose().is_some(),
        trajectory: if cfg.keep_trajectories { sim.trajectory().to_vec() } else { Vec::new() },
        error: leg.error,
    };
    (outcome, leg.violations, agent.graph().map(TopoGraph::dump))
}

/// Maps `work` over `0..n` on `workers` threads, keeping index order.
fn parallel_map<T: Send>(n: usize, workers: usize, work: impl Fn(usize) -> T + Sync) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        if workers > 1 {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build();
            if let Ok(pool) = pool {
                return pool.install(|| (0..n).into_par_iter().map(&work).collect());
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    (0..n).map(work).collect()
}

fn aggregate(agent: AgentKind, episodes: &[Episode], outcomes: &[Outcome]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for d in Difficulty::ALL {
        let sel: Vec<Outcome> = episodes
            .iter()
            .zip(outcomes)
            .filter(|(e, _)| e.difficulty == d)
            .map(|(_, o)| o.clone())
            .collect();
        if sel.is_empty() {
            continue;
        }
        rows.push(ResultRow {
            agent,
            difficulty: d,
            success: success_rate(&sel),
            spl: spl(&sel),
            episodes: sel.len(),
        });
    }
    rows
}

/// Runs every episode and aggregates per difficulty. A failing episode is
/// recorded as a failure with its diagnostic and the suite continues.
pub fn run_suite(maps: &[NamedMap], episodes: &[Episode], cfg: &SuiteConfig) -> Result<SuiteReport, EvalError> {
    if maps.is_empty() {
        return Err(EvalError::NoMaps);
    }
    for e in episodes {
        find_map(maps, &e.map_id)?;
    }
    let fs = predictor_set(maps, &cfg.corruption);
    let results = parallel_map(episodes.len(), cfg.workers, |k| {
        let e = &episodes[k];
        let map = find_map(maps, &e.map_id).expect("checked above");
        run_episode(map, fs[&e.map_id].clone(), e, cfg)
    });
    let mut outcomes = Vec::with_capacity(results.len());
    let mut violations = Vec::new();
    for (k, (o, v)) in results.into_iter().enumerate() {
        outcomes.push(o);
        violations.extend(v.into_iter().map(|(s, v)| (k, s, v)));
    }
    Ok(SuiteReport {
        rows: aggregate(cfg.agent, episodes, &outcomes),
        outcomes,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialEpisode {
    pub map_id: String,
    pub start: Pose,
    pub goals: Vec<Point>,
    pub seed: u64,
}

/// Samples goal chains: each goal 1.5–5 m (geodesic) from the previous one,
/// the first from the start.
pub fn generate_sequential(maps: &[NamedMap], n: usize, n_goals: usize, seed: u64) -> Result<Vec<SequentialEpisode>, EvalError> {
    if maps.is_empty() {
        return Err(EvalError::NoMaps);
    }
    if n_goals == 0 {
        return Err(EvalError::NoGoals);
    }
    let clear: Vec<Vec<bool>> = maps.iter().map(|m| clear_cells(&m.grid)).collect();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let m = k % maps.len();
        let grid = &maps[m].grid;
        let ep_seed = derive_seed(seed, k as u64);
        let mut rng = rng_from(ep_seed, 0x5e9);
        let mut chain = None;
        'starts: for _ in 0..STARTS_PER_EPISODE {
            let Some(s) = sample_clear(&clear[m], grid, &mut rng) else { break };
            let mut goals = Vec::with_capacity(n_goals);
            let mut from = s;
            for _ in 0..n_goals {
                let field = DistanceField::compute(grid, from);
                match sample_in_band(&field, &clear[m], grid, SEQUENTIAL_BAND, &mut rng) {
                    Some(g) => {
                        goals.push(grid.cell_center(g));
                        from = g;
                    }
                    None => continue 'starts,
                }
            }
            chain = Some((s, goals));
            break;
        }
        let (s, goals) = chain.ok_or_else(|| EvalError::BandUnreachable {
            map: maps[m].id.clone(),
            lo: SEQUENTIAL_BAND.0,
            hi: SEQUENTIAL_BAND.1,
        })?;
        let sp = grid.cell_center(s);
        out.push(SequentialEpisode {
            map_id: maps[m].id.clone(),
            start: Pose::new(sp.x, sp.y, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)),
            goals,
            seed: ep_seed,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialOutcome {
    pub map_id: String,
    /// One outcome per goal; `l_star` is measured from where the agent
    /// stood when that goal was issued.
    pub goals: Vec<Outcome>,
    /// Regular node count after each goal (topological agents).
    pub node_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequentialReport {
    pub agent: AgentKind,
    pub success: Vec<f64>,
    pub spl: Vec<f64>,
    pub episodes: Vec<SequentialOutcome>,
}

pub fn run_sequential_episode(map: &NamedMap, f: SharedPredictors, ep: &SequentialEpisode, cfg: &SuiteConfig) -> SequentialOutcome {
    let mut sim = Simulator::new(map.grid.clone(), cfg.sim_config(), cfg.noise);
    let first = Episode {
        map_id: ep.map_id.clone(),
        start: ep.start,
        goal: ep.goals[0],
        difficulty: Difficulty::Medium,
        seed: ep.seed,
        max_steps: DEFAULT_MAX_STEPS,
    };
    let failed = |l_star: f64, e: String| Outcome {
        success: false,
        l_agent: 0.0,
        l_star,
        steps: 0,
        stop_taken: false,
        trajectory: Vec::new(),
        error: Some(e),
    };
    let mut out = SequentialOutcome {
        map_id: ep.map_id.clone(),
        goals: Vec::new(),
        node_counts: Vec::new(),
    };
    let mut obs = match sim.reset(&first) {
        Ok(o) => o,
        Err(e) => {
            out.goals = ep.goals.iter().map(|_| failed(0.0, e.to_string())).collect();
            return out;
        }
    };
    let goal_obs = sim.goal_observation().unwrap().clone();
    let mut agent = cfg.agent.build(f, &goal_obs, ep.start.heading, ep.seed);
    let mut odom = OdometryReading::ZERO;
    for (k, &goal) in ep.goals.iter().enumerate() {
        let from = sim.pose().position();
        let l_star = geodesic_length(&map.grid, from, goal);
        if k > 0 {
            match sim.begin_goal(goal, DEFAULT_MAX_STEPS) {
                Ok(g) => agent.set_goal(&g.clone()),
                Err(e) => {
                    out.goals.push(failed(l_star, e.to_string()));
                    continue;
                }
            }
            obs = match sim.observe() {
                Ok(o) => o,
                Err(e) => {
                    out.goals.push(failed(l_star, e.to_string()));
                    continue;
                }
            };
        }
        let before = sim.path_length();
        let traj_start = sim.trajectory().len();
        let mut pending = OdometryReading::ZERO;
        let leg = drive(&mut sim, agent.as_mut(), obs.clone(), odom, cfg.check_invariants, &mut pending);
        odom = pending;
        out.goals.push(Outcome {
            success: leg.error.is_none() && sim.succeeded(),
            l_agent: sim.path_length() - before,
            l_star,
            steps: sim.steps(),
            stop_taken: sim.stop_pose().is_some(),
            trajectory: if cfg.keep_trajectories { sim.trajectory()[traj_start..].to_vec() } else { Vec::new() },
            error: leg.error,
        });
        out.node_counts.push(agent.graph().map_or(0, |g| g.nodes().len()));
    }
    out
}

/// Sequential-goal suite: per-goal-index success and SPL curves.
pub fn sequential_suite(maps: &[NamedMap], episodes: &[SequentialEpisode], cfg: &SuiteConfig) -> Result<SequentialReport, EvalError> {
    if maps.is_empty() {
        return Err(EvalError::NoMaps);
    }
    for e in episodes {
        find_map(maps, &e.map_id)?;
    }
    let fs = predictor_set(maps, &cfg.corruption);
    let results = parallel_map(episodes.len(), cfg.workers, |k| {
        let e = &episodes[k];
        let map = find_map(maps, &e.map_id).expect("checked above");
        run_sequential_episode(map, fs[&e.map_id].clone(), e, cfg)
    });
    let n_goals = episodes.iter().map(|e| e.goals.len()).max().unwrap_or(0);
    let mut success = Vec::with_capacity(n_goals);
    let mut spls = Vec::with_capacity(n_goals);
    for k in 0..n_goals {
        let at: Vec<Outcome> = results.iter().filter_map(|r| r.goals.get(k).cloned()).collect();
        success.push(success_rate(&at));
        spls.push(spl(&at));
    }
    Ok(SequentialReport {
        agent: cfg.agent,
        success,
        spl: spls,
        episodes: results,
    })
}

/// Aligned text table: one line per agent, Succ/SPL per difficulty.
pub fn format_table(rows: &[ResultRow]) -> String {
    let mut agents: Vec<AgentKind> = rows.iter().map(|r| r.agent).collect();
    agents.dedup();
    let mut seen = Vec::new();
    agents.retain(|a| {
        let fresh = !seen.contains(a);
        seen.push(*a);
        fresh
    });
    let width = agents.iter().map(|a| a.label().len()).max().unwrap_or(5).max(5);
    let mut s = String::new();
    let _ = write!(s, "{:<width$}", "Model");
    for d in Difficulty::ALL {
        let _ = write!(s, " | {:^13}", d.label());
    }
    s.push('\n');
    let _ = write!(s, "{:<width$}", "");
    for _ in Difficulty::ALL {
        let _ = write!(s, " | {:>6} {:>6}", "Succ", "SPL");
    }
    s.push('\n');
    for a in agents {
        let _ = write!(s, "{:<width$}", a.label());
        for d in Difficulty::ALL {
            match rows.iter().find(|r| r.agent == a && r.difficulty == d) {
                Some(r) => {
                    let _ = write!(s, " | {:>6.3} {:>6.3}", r.success, r.spl);
                }
                None => {
                    let _ = write!(s, " | {:>6} {:>6}", "-", "-");
                }
            }
        }
        s.push('\n');
    }
    s
}

pub fn format_sequential(reports: &[SequentialReport]) -> String {
    let n = reports.iter().map(|r| r.success.len()).max().unwrap_or(0);
    let width = reports.iter().map(|r| r.agent.label().len()).max().unwrap_or(5).max(5);
    let mut s = String::new();
    let _ = write!(s, "{:<width$}", "Model");
    for k in 1..=n {
        let _ = write!(s, " | {:^13}", format!("goal {k}"));
    }
    s.push('\n');
    for r in reports {
        let _ = write!(s, "{:<width$}", r.agent.label());
        for k in 0..n {
            let _ = write!(s, " | {:>6.3} {:>6.3}", r.success.get(k).unwrap_or(&0.0), r.spl.get(k).unwrap_or(&0.0));
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Serialize)]
struct OutcomeRecord<'a> {
    index: usize,
    map: &'a str,
    difficulty: &'a str,
    seed: u64,
    success: bool,
    spl: f64,
    l_agent: f64,
    l_star: f64,
    steps: u32,
    stop_taken: bool,
    error: &'a str,
}

/// Per-episode CSV.
pub fn write_outcomes_csv<W: io::Write>(episodes: &[Episode], outcomes: &[Outcome], w: W) -> Result<(), EvalError> {
    let mut wr = csv::Writer::from_writer(w);
    for (k, (e, o)) in episodes.iter().zip(outcomes).enumerate() {
        wr.serialize(OutcomeRecord {
            index: k,
            map: &e.map_id,
            difficulty: e.difficulty.name(),
            seed: e.seed,
            success: o.success,
            spl: o.spl(),
            l_agent: o.l_agent,
            l_star: o.l_star,
            steps: o.steps,
            stop_taken: o.stop_taken,
            error: o.error.as_deref().unwrap_or(""),
        })?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_rows_csv<W: io::Write>(rows: &[ResultRow], w: W) -> Result<(), EvalError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["agent", "difficulty", "success", "spl", "episodes"])?;
    for r in rows {
        wr.write_record([
            r.agent.name().to_string(),
            r.difficulty.name().to_string(),
            format!("{:.6}", r.success),
            format!("{:.6}", r.spl),
            r.episodes.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
