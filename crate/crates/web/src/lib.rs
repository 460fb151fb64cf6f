//! Browser bindings. Every call returns plain strings (SVG or JSON) so the
//! page needs no glue beyond the generated module.

use serde::Serialize;
use std::sync::Arc;
use toponav::agents::{AgentKind, SharedPredictors};
use toponav::eval::{format_table, generate_episodes, run_episode_recorded, run_suite, NamedMap, SuiteConfig};
use toponav::oracle::{OraclePredictors, PredictorCorruption};
use toponav::render::{map_key_hex, render_svg, TrajectoryDump};
use toponav::sim::{Difficulty, NoiseConfig};
use toponav::world::{generate_floorplan, FloorplanConfig};
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct EpisodeView {
    svg: String,
    success: bool,
    spl: f64,
    steps: u32,
    l_star: f64,
    l_agent: f64,
    nodes: usize,
    ghosts: usize,
}

fn err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    map: NamedMap,
    sigma_score: f64,
    noisy: bool,
}

#[wasm_bindgen]
impl Demo {
    /// A demo on the floorplan generated from `seed`.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Demo {
        let grid = generate_floorplan(seed as u64, &FloorplanConfig::default());
        Demo {
            map: NamedMap::new(format!("fp{seed}"), grid),
            sigma_score: 0.1,
            noisy: true,
        }
    }

    pub fn set_noise(&mut self, sigma_score: f64, actuation: bool) -> Result<(), JsError> {
        let c = PredictorCorruption {
            sigma_score,
            ..PredictorCorruption::none()
        };
        c.validate().map_err(err)?;
        self.sigma_score = sigma_score;
        self.noisy = actuation;
        Ok(())
    }

    pub fn map_svg(&self) -> Result<String, JsError> {
        render_svg(&self.map.grid, None, None).map_err(err)
    }

    fn config(&self, agent: AgentKind) -> SuiteConfig {
        SuiteConfig {
            noise: if self.noisy { NoiseConfig::default() } else { NoiseConfig::zero() },
            corruption: PredictorCorruption {
                sigma_score: self.sigma_score,
                ..PredictorCorruption::none()
            },
            keep_trajectories: true,
            ..SuiteConfig::new(agent)
        }
    }

    /// Runs one episode and returns JSON with the rendered SVG and outcome.
    pub fn run_episode(&self, agent: &str, difficulty: &str, seed: u32) -> Result<String, JsError> {
        let agent: AgentKind = agent.parse().map_err(err)?;
        let difficulty: Difficulty = difficulty.parse().map_err(err)?;
        let maps = std::slice::from_ref(&self.map);
        let episode = generate_episodes(maps, difficulty, 1, seed as u64).map_err(err)?.remove(0);
        let cfg = self.config(agent);
        let f: SharedPredictors = Arc::new(OraclePredictors::new(self.map.grid.clone(), cfg.corruption));
        let (o, _, graph) = run_episode_recorded(&self.map, f, &episode, &cfg);
        let traj = TrajectoryDump {
            map_id: self.map.id.clone(),
            map_key: map_key_hex(&self.map.grid),
            start: episode.start,
            goal: Some(episode.goal),
            poses: o.trajectory.clone(),
        };
        let svg = render_svg(&self.map.grid, Some(&traj), graph.as_ref()).map_err(err)?;
        let view = EpisodeView {
            svg,
            success: o.success,
            spl: o.spl(),
            steps: o.steps,
            l_star: o.l_star,
            l_agent: o.l_agent,
            nodes: graph.as_ref().map_or(0, |g| g.nodes.len()),
            ghosts: graph.as_ref().map_or(0, |g| g.ghosts.len()),
        };
        serde_json::to_string(&view).map_err(err)
    }

    /// Success and SPL of every agent on `n` episodes of one difficulty.
    pub fn compare(&self, difficulty: &str, n: u32, seed: u32) -> Result<String, JsError> {
        let difficulty: Difficulty = difficulty.parse().map_err(err)?;
        let maps = std::slice::from_ref(&self.map);
        let episodes = generate_episodes(maps, difficulty, n.max(1) as usize, seed as u64).map_err(err)?;
        let mut rows = Vec::new();
        for agent in AgentKind::ALL {
            let cfg = SuiteConfig {
                keep_trajectories: false,
                ..self.config(agent)
            };
            rows.extend(run_suite(maps, &episodes, &cfg).map_err(err)?.rows);
        }
        Ok(format_table(&rows))
    }
}
