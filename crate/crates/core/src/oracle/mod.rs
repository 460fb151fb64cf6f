//! Geometric stand-ins for the four learned functions: localization (F_L),
//! explorable directions (F_G), semantic direction scores (F_S) and
//! relative pose (F_R). Each one is the automated labeling rule evaluated on
//! ground truth, optionally corrupted.

mod corrupt;
mod labels;
mod local;

pub use corrupt::{corrupt, corrupt_at, field_normal, CorruptionError, Prediction, PredictorCorruption};
pub use labels::{
    export_labels, read_labels, write_labels, write_labels_to_path, LabelConfig, LabelError, LabelRecord, LabelSet,
};

use crate::geometry::{normalize_angle, Point};
use crate::noise::mix64;
use crate::sim::PanoramicObservation;
use crate::world::{CellIndex, DistanceField, OccupancyGrid};
use local::LocalView;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, Mutex};
use thiserror::Error;

/// Number of direction bins.
pub const N_THETA: usize = 12;
/// Node radius r in meters.
pub const NODE_RADIUS: f64 = 3.0;
/// Distance normalizer for inter-node scores.
pub const D_MAX: f64 = 20.0;
/// Angular width of the depth patch used by the connection rule.
pub const PATCH_DEGREES: f64 = 5.0;
/// A bin is explorable if the local path to its probe is shorter than this
/// multiple of r.
pub const EXPLORABLE_SLACK: f64 = 1.05;

/// Bin index of a world-frame angle: `nint(θ/2π · n_θ) mod n_θ`.
pub fn direction_bin(theta: f64) -> usize {
    ((normalize_angle(theta) / TAU * N_THETA as f64).round() as usize) % N_THETA
}

pub fn bin_center(bin: usize) -> f64 {
    TAU * (bin % N_THETA) as f64 / N_THETA as f64
}

/// Intra-node score `max(1 − d/r, 0)`.
pub fn intra_node_score(d: f64) -> f64 {
    (1.0 - d / NODE_RADIUS).max(0.0)
}

/// Inter-node score `max(1 − d/d_max, 0)`.
pub fn inter_node_score(d: f64) -> f64 {
    (1.0 - d / D_MAX).max(0.0)
}

/// Connection rule on raw depths: within r, and the deepest ray of the
/// 5° patch centered on `bearing` reaches at least `distance`.
pub fn connection_rule(depths: &[f64], bearing: f64, distance: f64) -> bool {
    if distance > NODE_RADIUS {
        return false;
    }
    if distance == 0.0 {
        return true;
    }
    let n = depths.len();
    let center = ((normalize_angle(bearing) / TAU * n as f64).round() as usize) % n;
    let half = ((PATCH_DEGREES / 360.0 * n as f64) / 2.0).floor() as usize;
    let max = (0..=2 * half)
        .map(|k| depths[(center + n + k - half) % n])
        .fold(0.0, f64::max);
    max >= distance
}

/// One value per direction bin; bin `i` is centered at `i/12 · 2π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionBins<T>(pub [T; N_THETA]);

impl<T: Copy> DirectionBins<T> {
    pub fn get(&self, bin: usize) -> T {
        self.0[bin]
    }
}

impl DirectionBins<bool> {
    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn true_bins(&self) -> impl Iterator<Item = usize> + '_ {
        (0..N_THETA).filter(|&i| self.0[i])
    }
}

impl DirectionBins<f64> {
    /// Highest-scoring bin, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..N_THETA {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelPosePrediction {
    pub direction_bin: usize,
    pub score: f64,
}

impl RelPosePrediction {
    /// Implied distance `r·(1 − score)`.
    pub fn distance(&self) -> f64 {
        NODE_RADIUS * (1.0 - self.score)
    }

    pub fn bearing(&self) -> f64 {
        bin_center(self.direction_bin)
    }

    /// Implied world-frame offset from the source.
    pub fn offset(&self) -> Point {
        Point::default().offset(self.distance(), self.bearing())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("observations come from different maps")]
    CrossMap,
    #[error("observation was not captured on this predictor's map")]
    ForeignObservation,
    #[error("relative pose requested for a pair that is not connected")]
    NotConnected,
}

/// The four predictor functions, as consumed by graph construction, the
/// global policy and the agents.
pub trait Predictors {
    /// F_L: is `goal` within the node radius of `source` and visible from it.
    fn localize(&self, source: &PanoramicObservation, goal: &PanoramicObservation) -> Result<bool, OracleError>;
    /// F_G: explorable area per direction bin.
    fn explorable(&self, source: &PanoramicObservation) -> Result<DirectionBins<bool>, OracleError>;
    /// F_S: per-bin scores of how close each direction leads to `goal`.
    fn scores(&self, source: &PanoramicObservation, goal: &PanoramicObservation)
        -> Result<DirectionBins<f64>, OracleError>;
    /// F_R on a pair the caller believes connected (e.g. via a possibly
    /// corrupted F_L); no contract check.
    fn relative_pose_unchecked(
        &self,
        source: &PanoramicObservation,
        goal: &PanoramicObservation,
    ) -> Result<RelPosePrediction, OracleError>;

    /// F_R with the contract check: errors on pairs the connection rule
    /// rejects.
    fn relative_pose(
        &self,
        source: &PanoramicObservation,
        goal: &PanoramicObservation,
    ) -> Result<RelPosePrediction, OracleError>;
}

#[derive(Debug)]
struct SourceInfo {
    explorable: DirectionBins<bool>,
    far_points: [Point; N_THETA],
    far_cells: [CellIndex; N_THETA],
}

#[derive(Debug, Default)]
struct Cache {
    sources: HashMap<u64, Arc<SourceInfo>>,
    goal_fields: HashMap<CellIndex, Arc<DistanceField>>,
}

const MAX_CACHED_SOURCES: usize = 4096;
const MAX_CACHED_FIELDS: usize = 8;

/// Ground-truth predictors over one map.
#[derive(Debug)]
pub struct OraclePredictors {
    grid: Arc<OccupancyGrid>,
    corruption: PredictorCorruption,
    cache: Mutex<Cache>,
}

impl Clone for OraclePredictors {
    fn clone(&self) -> Self {
        Self::new(self.grid.clone(), self.corruption)
    }
}

impl OraclePredictors {
    pub fn new(grid: Arc<OccupancyGrid>, corruption: PredictorCorruption) -> Self {
        Self {
            grid,
            corruption,
            cache: Mutex::new(Cache::default()),
        }
    }

    pub fn exact(grid: Arc<OccupancyGrid>) -> Self {
        Self::new(grid, PredictorCorruption::none())
    }

    pub fn grid(&self) -> &Arc<OccupancyGrid> {
        &self.grid
    }

    pub fn corruption(&self) -> &PredictorCorruption {
        &self.corruption
    }

    fn check(&self, obs: &PanoramicObservation) -> Result<(), OracleError> {
        if obs.map_key() != self.grid.fingerprint() {
            return Err(OracleError::ForeignObservation);
        }
        Ok(())
    }

    fn check_pair(&self, a: &PanoramicObservation, b: &PanoramicObservation) -> Result<(), OracleError> {
        if a.map_key() != b.map_key() {
            return Err(OracleError::CrossMap);
        }
        self.check(a)
    }

    fn pair_key(a: &PanoramicObservation, b: &PanoramicObservation) -> u64 {
        mix64(a.key() ^ mix64(b.key().rotate_left(17)))
    }

    fn source_info(&self, obs: &PanoramicObservation) -> Arc<SourceInfo> {
        let key = obs.key();
        if let Some(info) = self.cache.lock().unwrap().sources.get(&key) {
            return info.clone();
        }
        let info = Arc::new(self.compute_source_info(obs));
        let mut cache = self.cache.lock().unwrap();
        if cache.sources.len() >= MAX_CACHED_SOURCES {
            cache.sources.clear();
        }
        cache.sources.insert(key, info.clone());
        info
    }

    fn compute_source_info(&self, obs: &PanoramicObservation) -> SourceInfo {
        let g = &self.grid;
        let view = LocalView::build(obs, g.resolution(), g.origin(), NODE_RADIUS);
        let src = obs.capture_pose().position();
        let reach = view.reachable();
        let mut explorable = [false; N_THETA];
        let mut far_points = [src; N_THETA];
        let mut far_cells = [g.cell_of(src).expect("capture pose is on the grid"); N_THETA];
        for bin in 0..N_THETA {
            let angle = bin_center(bin);
            let probe = src.offset(NODE_RADIUS, angle);
            explorable[bin] = view
                .local_cell(probe)
                .and_then(|c| view.path_length(c, EXPLORABLE_SLACK * NODE_RADIUS))
                .is_some();

            let depth = obs.depths()[obs.ray_index(angle)];
            let step = g.resolution() / 2.0;
            let mut t = (depth - step).min(NODE_RADIUS);
            while t > 0.0 {
                let p = src.offset(t, angle);
                let ok_local = view.local_cell(p).is_some_and(|c| reach[view.index(c)]);
                if ok_local && g.is_free_point(p) {
                    far_points[bin] = p;
                    far_cells[bin] = g.cell_of(p).unwrap();
                    break;
                }
                t -= step;
            }
        }
        SourceInfo {
            explorable: DirectionBins(explorable),
            far_points,
            far_cells,
        }
    }

    fn goal_field(&self, goal: &PanoramicObservation) -> Arc<DistanceField> {
        let cell = self
            .grid
            .cell_of(goal.capture_pose().position())
            .expect("capture pose is on the grid");
        if let Some(f) = self.cache.lock().unwrap().goal_fields.get(&cell) {
            return f.clone();
        }
        let field = Arc::new(DistanceField::compute(&self.grid, cell));
        let mut cache = self.cache.lock().unwrap();
        if cache.goal_fields.len() >= MAX_CACHED_FIELDS {
            cache.goal_fields.clear();
        }
        cache.goal_fields.insert(cell, field.clone());
        field
    }

    /// Farthest explored and traversable point within r along each bin's
    /// center ray.
    pub fn farthest_points(&self, source: &PanoramicObservation) -> Result<[Point; N_THETA], OracleError> {
        self.check(source)?;
        Ok(self.source_info(source).far_points)
    }

    /// Ground-truth geodesic from each bin's farthest point to the goal,
    /// `None` where unreachable.
    pub fn bin_distances(
        &self,
        source: &PanoramicObservation,
        goal: &PanoramicObservation,
    ) -> Result<[Option<f64>; N_THETA], OracleError> {
        self.check_pair(source, goal)?;
        let info = self.source_info(source);
        let field = self.goal_field(goal);
        Ok(info.far_cells.map(|c| field.meters(c)))
    }

    /// Uncorrupted connection rule.
    pub fn connected(&self, source: &PanoramicObservation, goal: &PanoramicObservation) -> Result<bool, OracleError> {
        self.check_pair(source, goal)?;
        let s = source.capture_pose().position();
        let g = goal.capture_pose().position();
        Ok(connection_rule(source.depths(), s.bearing_to(&g), s.distance(&g)))
    }

    fn exact_relative_pose(source: &PanoramicObservation, goal: &PanoramicObservation) -> RelPosePrediction {
        let s = source.capture_pose().position();
        let g = goal.capture_pose().position();
        let d = s.distance(&g);
        let theta = if d == 0.0 { 0.0 } else { s.bearing_to(&g) };
        RelPosePrediction {
            direction_bin: direction_bin(theta),
            score: intra_node_score(d),
        }
    }

    /// Uncorrupted F_G.
    pub fn exact_explorable(&self, source: &PanoramicObservation) -> Result<DirectionBins<bool>, OracleError> {
        self.check(source)?;
        Ok(self.source_info(source).explorable)
    }

    /// Uncorrupted F_S.
    pub fn exact_scores(
        &self,
        source: &PanoramicObservation,
        goal: &PanoramicObservation,
    ) -> Result<DirectionBins<f64>, OracleError> {
        let d = self.bin_distances(source, goal)?;
        Ok(DirectionBins(d.map(|d| d.map_or(0.0, inter_node_score))))
    }
}

impl Predictors for OraclePredictors {
    fn localize(&self, source: &PanoramicObservation, goal: &PanoramicObservation) -> Result<bool, OracleError> {
        let v = self.connected(source, goal)?;
        if self.corruption.p_flip_connection == 0.0 {
            return Ok(v);
        }
        match corrupt(Prediction::Connection(v), &self.corruption, Self::pair_key(source, goal)) {
            Prediction::Connection(b) => Ok(b),
            _ => unreachable!(),
        }
    }

    fn explorable(&self, source: &PanoramicObservation) -> Result<DirectionBins<bool>, OracleError> {
        let v = self.exact_explorable(source)?;
        if self.corruption.p_flip_direction == 0.0 {
            return Ok(v);
        }
        match corrupt(Prediction::Directions(v), &self.corruption, source.key()) {
            Prediction::Directions(b) => Ok(b),
            _ => unreachable!(),
        }
    }

    fn scores(
        &self,
        source: &PanoramicObservation,
        goal: &PanoramicObservation,
    ) -> Result<DirectionBins<f64>, OracleError> {
        let v = self.exact_scores(source, goal)?;
        if self.corruption.sigma_score == 0.0 {
            return Ok(v);
        }
        match corrupt_at(Prediction::Scores(v), &self.corruption, goal.key(), source.capture_pose().position()) {
            Prediction::Scores(s) => Ok(s),
            _ => unreachable!(),
        }
    }

    fn relative_pose_unchecked(
        &self,
        source: &PanoramicObservation,
        goal: &PanoramicObservation,
    ) -> Result<RelPosePrediction, OracleError> {
        self.check_pair(source, goal)?;
        let v = Self::exact_relative_pose(source, goal);
        if self.corruption.sigma_score == 0.0 {
            return Ok(v);
        }
        match corrupt_at(Prediction::RelPose(v), &self.corruption, goal.key(), source.capture_pose().position()) {
            Prediction::RelPose(p) => Ok(p),
            _ => unreachable!(),
        }
    }

    fn relative_pose(
        &self,
        source: &PanoramicObservation,
        goal: &PanoramicObservation,
    ) -> Result<RelPosePrediction, OracleError> {
        if !self.connected(source, goal)? {
            return Err(OracleError::NotConnected);
        }
        self.relative_pose_unchecked(source, goal)
    }
}

#[cfg(test)]
mod tests;
