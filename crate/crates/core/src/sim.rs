//! Episodic simulator: a point agent on the ground-truth grid with discrete
//! actions, actuation noise, a noisy odometry sensor and world-aligned
//! panoramic depth observations.

use crate::geometry::{angle_diff, normalize_angle, OdometryReading, Point, Pose};
use crate::noise::{derive_seed, rng_from, truncated_normal, SimRng};
use crate::world::{geodesic, raycast, OccupancyGrid, WorldError, DEFAULT_MAX_RANGE};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

pub const DEFAULT_N_RAYS: usize = 360;
pub const DEFAULT_MAX_STEPS: u32 = 500;
pub const SUCCESS_RADIUS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    MoveForward,
    TurnRight,
    TurnLeft,
    Stop,
}

impl Action {
    pub const ALL: [Action; 4] = [
        Action::MoveForward,
        Action::TurnRight,
        Action::TurnLeft,
        Action::Stop,
    ];
}

/// Depths over a full sweep at uniformly spaced world-frame angles; ray `k`
/// points at `2πk / n_rays` (ray 0 = world +x).
#[derive(Debug, Clone, PartialEq)]
pub struct PanoramicObservation {
    depths: Vec<f64>,
    /// True pose at capture. Only oracles and the evaluator may read this.
    capture_pose: Pose,
    map_key: u64,
    max_range: f64,
}

impl PanoramicObservation {
    /// Captures a panorama at `pose` on `grid`.
    pub fn capture(
        grid: &OccupancyGrid,
        pose: Pose,
        n_rays: usize,
        max_range: f64,
    ) -> Result<Self, WorldError> {
        let from = pose.position();
        grid.require_free(from)?;
        let depths = (0..n_rays)
            .map(|k| {
                let a = TAU * k as f64 / n_rays as f64;
                raycast(grid, from, a, max_range).map(|d| d.max(1e-9))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            depths,
            capture_pose: pose,
            map_key: grid.fingerprint(),
            max_range,
        })
    }

    /// Builds an observation from raw depths (tests, replay).
    pub fn from_depths(depths: Vec<f64>, capture_pose: Pose, map_key: u64, max_range: f64) -> Self {
        Self {
            depths,
            capture_pose,
            map_key,
            max_range,
        }
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn n_rays(&self) -> usize {
        self.depths.len()
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    pub fn capture_pose(&self) -> Pose {
        self.capture_pose
    }

    pub fn map_key(&self) -> u64 {
        self.map_key
    }

    pub fn ray_angle(&self, k: usize) -> f64 {
        TAU * k as f64 / self.depths.len() as f64
    }

    /// Ray index nearest to a world-frame angle.
    pub fn ray_index(&self, angle: f64) -> usize {
        let n = self.depths.len();
        ((normalize_angle(angle) / TAU * n as f64).round() as usize) % n
    }

    /// Stable key identifying the capture; used to seed deterministic
    /// predictor corruption.
    pub fn key(&self) -> u64 {
        let p = self.capture_pose;
        let mut h = crate::noise::mix64(self.map_key);
        h = crate::noise::mix64(h ^ p.x.to_bits());
        h = crate::noise::mix64(h ^ p.y.to_bits());
        crate::noise::mix64(h ^ p.heading.to_bits())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActuationNoise {
    pub sigma_trans_on_forward: f64,
    pub sigma_rot_on_forward: f64,
    pub sigma_trans_on_turn: f64,
    pub sigma_rot_on_turn: f64,
}

impl Default for ActuationNoise {
    fn default() -> Self {
        Self {
            sigma_trans_on_forward: 0.02,
            sigma_rot_on_forward: 0.5_f64.to_radians(),
            sigma_trans_on_turn: 0.005,
            sigma_rot_on_turn: 1.0_f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorNoise {
    pub sigma_odom_xy: f64,
    pub sigma_odom_heading: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self {
            sigma_odom_xy: 0.005,
            sigma_odom_heading: 0.3_f64.to_radians(),
        }
    }
}

/// Actuation and odometry noise, all standard deviations of zero-mean
/// Gaussians truncated at 3σ (meters and radians).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub actuation: ActuationNoise,
    pub sensor: SensorNoise,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn zero() -> Self {
        Self {
            actuation: ActuationNoise {
                sigma_trans_on_forward: 0.0,
                sigma_rot_on_forward: 0.0,
                sigma_trans_on_turn: 0.0,
                sigma_rot_on_turn: 0.0,
            },
            sensor: SensorNoise {
                sigma_odom_xy: 0.0,
                sigma_odom_heading: 0.0,
            },
            seed: 0,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let a = self.actuation;
        let s = self.sensor;
        Self {
            actuation: ActuationNoise {
                sigma_trans_on_forward: a.sigma_trans_on_forward * factor,
                sigma_rot_on_forward: a.sigma_rot_on_forward * factor,
                sigma_trans_on_turn: a.sigma_trans_on_turn * factor,
                sigma_rot_on_turn: a.sigma_rot_on_turn * factor,
            },
            sensor: SensorNoise {
                sigma_odom_xy: s.sigma_odom_xy * factor,
                sigma_odom_heading: s.sigma_odom_heading * factor,
            },
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let a = self.actuation;
        let s = self.sensor;
        for (name, v) in [
            ("sigma_trans_on_forward", a.sigma_trans_on_forward),
            ("sigma_rot_on_forward", a.sigma_rot_on_forward),
            ("sigma_trans_on_turn", a.sigma_trans_on_turn),
            ("sigma_rot_on_turn", a.sigma_rot_on_turn),
            ("sigma_odom_xy", s.sigma_odom_xy),
            ("sigma_odom_heading", s.sigma_odom_heading),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::InvalidNoise(name));
            }
        }
        Ok(())
    }

    fn sensor_is_exact(&self) -> bool {
        self.sensor.sigma_odom_xy == 0.0 && self.sensor.sigma_odom_heading == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    /// Geodesic start-goal distance band in meters, inclusive.
    pub fn band(&self) -> (f64, f64) {
        match self {
            Difficulty::Easy => (1.5, 3.0),
            Difficulty::Medium => (3.0, 5.0),
            Difficulty::Hard => (5.0, 10.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }

    /// Capitalized name for result tables.
    pub fn label(&self) -> &'static str {
        match self {
            Difficulty::Easy => "Easy",
            Difficulty::Medium => "Medium",
            Difficulty::Hard => "Hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Difficulty {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            other => Err(format!("unknown difficulty {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub map_id: String,
    pub start: Pose,
    pub goal: Point,
    pub difficulty: Difficulty,
    pub seed: u64,
    pub max_steps: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessMode {
    /// Success requires a stop action within the success radius.
    #[default]
    Standard,
    /// The episode ends successfully as soon as any pose is within the
    /// success radius; stop actions still end the episode.
    NoStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionMode {
    /// Forward motion ends at first contact; no sliding along walls.
    #[default]
    StopAtContact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub forward_step: f64,
    pub turn_angle: f64,
    pub n_rays: usize,
    pub max_range: f64,
    pub collision: CollisionMode,
    /// Gap kept between the agent and a contacted wall, in meters.
    pub contact_margin: f64,
    pub success_mode: SuccessMode,
    pub success_radius: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            forward_step: 0.25,
            turn_angle: 10.0_f64.to_radians(),
            n_rays: DEFAULT_N_RAYS,
            max_range: DEFAULT_MAX_RANGE,
            collision: CollisionMode::StopAtContact,
            contact_margin: 0.005,
            success_mode: SuccessMode::Standard,
            success_radius: SUCCESS_RADIUS,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("episode rejected: {0}")]
    EpisodeRejected(String),
    #[error("step called on a finished episode")]
    EpisodeDone,
    #[error("step called before reset")]
    NotStarted,
    #[error("noise parameter {0} must be finite and non-negative")]
    InvalidNoise(&'static str),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub observation: PanoramicObservation,
    pub odometry: OdometryReading,
    pub done: bool,
}

/// Success rule at episode end.
pub fn success(goal: Point, stop_pose: Option<Pose>, radius: f64) -> bool {
    stop_pose.is_some_and(|p| p.position().distance(&goal) <= radius)
}

#[derive(Debug, Clone)]
pub struct Simulator {
    grid: Arc<OccupancyGrid>,
    cfg: SimConfig,
    noise: NoiseConfig,
    goal: Point,
    goal_obs: Option<PanoramicObservation>,
    max_steps: u32,
    pose: Pose,
    steps: u32,
    started: bool,
    done: bool,
    stop_pose: Option<Pose>,
    reached: bool,
    actuation_rng: SimRng,
    sensor_rng: SimRng,
    sensor_heading: f64,
    last_reading: Option<OdometryReading>,
    trajectory: Vec<Pose>,
    path_length: f64,
}

impl Simulator {
    pub fn new(grid: Arc<OccupancyGrid>, cfg: SimConfig, noise: NoiseConfig) -> Self {
        Self {
            grid,
            cfg,
            noise,
            goal: Point::default(),
            goal_obs: None,
            max_steps: DEFAULT_MAX_STEPS,
            pose: Pose::identity(),
            steps: 0,
            started: false,
            done: false,
            stop_pose: None,
            reached: false,
            actuation_rng: rng_from(0, 1),
            sensor_rng: rng_from(0, 2),
            sensor_heading: 0.0,
            last_reading: None,
            trajectory: Vec::new(),
            path_length: 0.0,
        }
    }

    pub fn grid(&self) -> &Arc<OccupancyGrid> {
        &self.grid
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Places the agent at the episode start and returns the first observation.
    pub fn reset(&mut self, episode: &Episode) -> Result<PanoramicObservation, SimError> {
        self.noise.validate()?;
        let g = &self.grid;
        let start = episode.start.position();
        if !g.is_free_point(start) {
            return Err(SimError::EpisodeRejected("start is not on a free cell".into()));
        }
        if !g.is_free_point(episode.goal) {
            return Err(SimError::EpisodeRejected("goal is not on a free cell".into()));
        }
        if geodesic(g, start, episode.goal)?.distance.is_none() {
            return Err(SimError::EpisodeRejected("goal unreachable from start".into()));
        }
        let seed = derive_seed(self.noise.seed, episode.seed);
        self.actuation_rng = rng_from(seed, 0xAC7);
        self.sensor_rng = rng_from(seed, 0x5E5);
        self.pose = episode.start;
        self.sensor_heading = episode.start.heading;
        self.trajectory = vec![self.pose];
        self.path_length = 0.0;
        self.started = true;
        self.last_reading = None;
        self.begin_goal(episode.goal, episode.max_steps)?;
        self.observe()
    }

    /// Starts a new goal from the current pose (sequential-goal runs). Step
    /// budget and stop state reset; the agent is not moved.
    pub fn begin_goal(&mut self, goal: Point, max_steps: u32) -> Result<&PanoramicObservation, SimError> {
        if !self.started {
            return Err(SimError::NotStarted);
        }
        if !self.grid.is_free_point(goal) {
            return Err(SimError::EpisodeRejected("goal is not on a free cell".into()));
        }
        self.goal = goal;
        self.goal_obs = Some(PanoramicObservation::capture(
            &self.grid,
            Pose::new(goal.x, goal.y, 0.0),
            self.cfg.n_rays,
            self.cfg.max_range,
        )?);
        self.max_steps = max_steps;
        self.steps = 0;
        self.done = false;
        self.stop_pose = None;
        self.reached = self.within_goal();
        if self.cfg.success_mode == SuccessMode::NoStop && self.reached {
            self.done = true;
        }
        Ok(self.goal_obs.as_ref().unwrap())
    }

    pub fn goal_observation(&self) -> Option<&PanoramicObservation> {
        self.goal_obs.as_ref()
    }

    pub fn observe(&self) -> Result<PanoramicObservation, SimError> {
        Ok(PanoramicObservation::capture(
            &self.grid,
            self.pose,
            self.cfg.n_rays,
            self.cfg.max_range,
        )?)
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult, SimError> {
        if !self.started {
            return Err(SimError::NotStarted);
        }
        if self.done {
            return Err(SimError::EpisodeDone);
        }
        let before = self.pose;
        match action {
            Action::MoveForward => {
                let a = self.noise.actuation;
                let along = self.cfg.forward_step
                    + truncated_normal(&mut self.actuation_rng, a.sigma_trans_on_forward);
                let lateral = truncated_normal(&mut self.actuation_rng, a.sigma_trans_on_forward);
                let dtheta = truncated_normal(&mut self.actuation_rng, a.sigma_rot_on_forward);
                let (s, c) = before.heading.sin_cos();
                let disp = Point::new(c * along - s * lateral, s * along + c * lateral);
                let to = self.translate(before.position(), disp);
                self.pose = Pose::new(to.x, to.y, before.heading + dtheta);
            }
            Action::TurnLeft | Action::TurnRight => {
                let a = self.noise.actuation;
                let sign = if action == Action::TurnLeft { 1.0 } else { -1.0 };
                let dtheta =
                    sign * self.cfg.turn_angle + truncated_normal(&mut self.actuation_rng, a.sigma_rot_on_turn);
                let dx = truncated_normal(&mut self.actuation_rng, a.sigma_trans_on_turn);
                let dy = truncated_normal(&mut self.actuation_rng, a.sigma_trans_on_turn);
                let to = self.translate(before.position(), Point::new(dx, dy));
                self.pose = Pose::new(to.x, to.y, before.heading + dtheta);
            }
            Action::Stop => {
                self.done = true;
                self.stop_pose = Some(before);
            }
        }
        self.steps += 1;
        let reading = if action == Action::Stop {
            OdometryReading::ZERO
        } else {
            self.sense(&before)
        };
        self.last_reading = Some(reading);
        if action != Action::Stop {
            self.path_length += before.position().distance(&self.pose.position());
            self.trajectory.push(self.pose);
            if self.within_goal() {
                self.reached = true;
                if self.cfg.success_mode == SuccessMode::NoStop {
                    self.done = true;
                }
            }
        }
        if self.steps >= self.max_steps {
            self.done = true;
        }
        Ok(StepResult {
            observation: self.observe()?,
            odometry: reading,
            done: self.done,
        })
    }

    /// Moves by `disp`, stopping `contact_margin` short of the first obstacle.
    fn translate(&self, from: Point, disp: Point) -> Point {
        let len = disp.norm();
        if len == 0.0 {
            return from;
        }
        let angle = disp.y.atan2(disp.x);
        let depth = raycast(&self.grid, from, angle, len + 1.0).unwrap_or(0.0);
        let allowed = len.min(depth - self.cfg.contact_margin).max(0.0);
        let to = from.offset(allowed, angle);
        if self.grid.is_free_point(to) {
            to
        } else {
            from
        }
    }

    fn sense(&mut self, before: &Pose) -> OdometryReading {
        let after = self.pose;
        let dtheta_true = angle_diff(after.heading, before.heading);
        if self.noise.sensor_is_exact() {
            self.sensor_heading = after.heading;
            return OdometryReading {
                dx: after.x - before.x,
                dy: after.y - before.y,
                dtheta: dtheta_true,
            };
        }
        let s = self.noise.sensor;
        let (sb, cb) = before.heading.sin_cos();
        let (wx, wy) = (after.x - before.x, after.y - before.y);
        // body-frame motion, then corrupted and re-expressed with the
        // sensor's own integrated heading
        let lx = cb * wx + sb * wy + truncated_normal(&mut self.sensor_rng, s.sigma_odom_xy);
        let ly = -sb * wx + cb * wy + truncated_normal(&mut self.sensor_rng, s.sigma_odom_xy);
        let dtheta = dtheta_true + truncated_normal(&mut self.sensor_rng, s.sigma_odom_heading);
        let (ss, cs) = self.sensor_heading.sin_cos();
        self.sensor_heading = normalize_angle(self.sensor_heading + dtheta);
        OdometryReading {
            dx: cs * lx - ss * ly,
            dy: ss * lx + cs * ly,
            dtheta,
        }
    }

    /// Reading produced by the last step, `None` before the first step.
    pub fn odometry_reading(&self) -> Option<OdometryReading> {
        self.last_reading
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn goal(&self) -> Point {
        self.goal
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn stop_pose(&self) -> Option<Pose> {
        self.stop_pose
    }

    pub fn trajectory(&self) -> &[Pose] {
        &self.trajectory
    }

    /// True path length walked, summed from true per-step displacements.
    pub fn path_length(&self) -> f64 {
        self.path_length
    }

    pub fn distance_to_goal(&self) -> f64 {
        self.pose.position().distance(&self.goal)
    }

    fn within_goal(&self) -> bool {
        self.distance_to_goal() <= self.cfg.success_radius
    }

    /// Outcome of the current goal under the configured success mode.
    pub fn succeeded(&self) -> bool {
        match self.cfg.success_mode {
            SuccessMode::Standard => success(self.goal, self.stop_pose, self.cfg.success_radius),
            SuccessMode::NoStop => self.reached,
        }
    }
}
