//! Image-goal navigation on topological maps.
//!
//! The crate bundles a floorplan simulator with panoramic depth sensing and
//! noisy odometry, exact geometric stand-ins for the four learned predictors
//! (graph localization, explorable-direction prediction, semantic scoring and
//! relative pose), the topological graph with ghost nodes, global and local
//! policies, baseline agents and the evaluation harness.

pub mod agents;
pub mod eval;
pub mod geometry;
pub mod noise;
pub mod oracle;
pub mod policies;
pub mod render;
pub mod sim;
pub mod topograph;
pub mod world;
