//! Config file layer. Every key has a matching flag; flags win.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use toponav::agents::AgentKind;
use toponav::oracle::PredictorCorruption;
use toponav::sim::{Difficulty, NoiseConfig};
use toponav::world::FloorplanConfig;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub agent: Option<String>,
    pub difficulty: Option<String>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub goals: Option<usize>,
    pub maps: Option<Vec<PathBuf>>,
    pub floorplans: Option<usize>,
    pub map_seed: Option<u64>,
    pub episodes: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub no_stop: Option<bool>,
    pub max_steps: Option<u32>,
    pub dump: Option<usize>,
    pub noise: Option<NoiseSection>,
    pub corruption: Option<PredictorCorruption>,
    pub floorplan: Option<FloorplanConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub preset: Option<String>,
    pub scale: Option<f64>,
    pub sensor_scale: Option<f64>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {}", path.display(), e.message())).with_span(&text, e.span()))
    }
}

impl CliError {
    fn with_span(self, text: &str, span: Option<std::ops::Range<usize>>) -> Self {
        match (self, span) {
            (CliError::Config(m), Some(r)) => {
                let line = text[..r.start.min(text.len())].matches('\n').count() + 1;
                CliError::Config(format!("{m} (line {line})"))
            }
            (e, _) => e,
        }
    }
}

pub fn parse_agents(s: &str) -> Result<Vec<AgentKind>, CliError> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(AgentKind::ALL.to_vec());
    }
    s.split(',')
        .map(|a| a.trim().parse::<AgentKind>().map_err(|e| CliError::Config(format!("agent: {e}"))))
        .collect()
}

pub fn parse_difficulties(s: &str) -> Result<Vec<Difficulty>, CliError> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Difficulty::ALL.to_vec());
    }
    s.split(',')
        .map(|d| d.trim().parse::<Difficulty>().map_err(|e| CliError::Config(format!("difficulty: {e}"))))
        .collect()
}

/// Simulator noise from a preset, an overall scale and an extra factor on
/// the sensor (odometry) terms only.
pub fn noise_config(preset: &str, scale: f64, sensor_scale: f64, seed: u64) -> Result<NoiseConfig, CliError> {
    let base = match preset {
        "default" => NoiseConfig::default(),
        "zero" | "none" => NoiseConfig::zero(),
        other => return Err(CliError::Config(format!("noise.preset: unknown preset {other:?} (expected default or zero)"))),
    };
    for (name, v) in [("noise.scale", scale), ("noise.sensor_scale", sensor_scale)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(CliError::Config(format!("{name}: must be a finite non-negative number, got {v}")));
        }
    }
    let mut cfg = base.scaled(scale);
    cfg.sensor.sigma_odom_xy *= sensor_scale;
    cfg.sensor.sigma_odom_heading *= sensor_scale;
    cfg.seed = seed;
    cfg.validate().map_err(|e| CliError::Config(format!("noise: {e}")))?;
    Ok(cfg)
}

/// Everything a command actually used, echoed into output headers.
#[derive(Debug, Clone, Serialize)]
pub struct Effective {
    pub command: &'static str,
    #[serde(flatten)]
    pub fields: serde_json::Map<String, serde_json::Value>,
}

impl Effective {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            fields: serde_json::Map::new(),
        }
    }

    pub fn set(&mut self, key: &str, v: impl Serialize) -> &mut Self {
        self.fields.insert(key.to_string(), serde_json::to_value(v).expect("config values serialize"));
        self
    }

    pub fn json(&self) -> String {
        serde_json::to_string(self).expect("config values serialize")
    }

    /// `# config: {...}` comment line.
    pub fn header(&self) -> String {
        format!("# config: {}\n", self.json())
    }
}
