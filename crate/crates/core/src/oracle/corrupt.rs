//! Seeded corruption of predictor outputs, emulating imperfect learned models.
//!
//! Every draw is a pure function of the corruption seed and a caller-supplied
//! key, so the same query always receives the same error.

use super::{DirectionBins, RelPosePrediction, N_THETA};
use crate::geometry::Point;
use crate::noise::{derive_seed, rng_from, truncated_normal};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorCorruption {
    pub p_flip_connection: f64,
    pub sigma_score: f64,
    pub p_flip_direction: f64,
    pub seed: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("corruption parameter {field} = {value} is out of range")]
pub struct CorruptionError {
    pub field: &'static str,
    pub value: f64,
}

impl PredictorCorruption {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), CorruptionError> {
        for (field, value) in [
            ("p_flip_connection", self.p_flip_connection),
            ("p_flip_direction", self.p_flip_direction),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(CorruptionError { field, value });
            }
        }
        if !(self.sigma_score >= 0.0 && self.sigma_score.is_finite()) {
            return Err(CorruptionError {
                field: "sigma_score",
                value: self.sigma_score,
            });
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.p_flip_connection == 0.0 && self.sigma_score == 0.0 && self.p_flip_direction == 0.0
    }
}

/// A predictor output of any of the four kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    Connection(bool),
    Directions(DirectionBins<bool>),
    Scores(DirectionBins<f64>),
    RelPose(RelPosePrediction),
}

const TAG_CONNECTION: u64 = 0xC0;
const TAG_DIRECTION: u64 = 0xD1;
const TAG_SCORE: u64 = 0x5C;

fn flip(value: bool, p: f64, seed: u64) -> bool {
    if p <= 0.0 {
        return value;
    }
    if p >= 1.0 {
        return !value;
    }
    value ^ rng_from(seed, 0).random_bool(p)
}

fn jitter(score: f64, sigma: f64, seed: u64) -> f64 {
    if sigma <= 0.0 {
        return score;
    }
    (score + truncated_normal(&mut rng_from(seed, 1), sigma)).clamp(0.0, 1.0)
}

/// Lattice spacing of the positional score-noise field.
pub const SCORE_FIELD_SPACING: f64 = 1.0;

/// Unit-variance Gaussian field over the plane: independent normals on a
/// lattice, bilinearly blended and renormalized. Nearby points get
/// correlated values, points a lattice cell apart are nearly independent.
pub fn field_normal(seed: u64, p: Point) -> f64 {
    let (u, v) = (p.x / SCORE_FIELD_SPACING, p.y / SCORE_FIELD_SPACING);
    let (i0, j0) = (u.floor(), v.floor());
    let (fx, fy) = (u - i0, v - j0);
    let mut acc = 0.0;
    let mut norm = 0.0;
    for (di, wx) in [(0i64, 1.0 - fx), (1, fx)] {
        for (dj, wy) in [(0i64, 1.0 - fy), (1, fy)] {
            let w = wx * wy;
            let cell = (i0 as i64 + di) as u64 ^ ((j0 as i64 + dj) as u64).rotate_left(32);
            let z: f64 = rng_from(derive_seed(seed, cell), 2).sample(StandardNormal);
            acc += w * z;
            norm += w * w;
        }
    }
    acc / norm.sqrt()
}

fn field_jitter(score: f64, sigma: f64, seed: u64, at: Point) -> f64 {
    if sigma <= 0.0 {
        return score;
    }
    (score + sigma * field_normal(seed, at).clamp(-3.0, 3.0)).clamp(0.0, 1.0)
}

/// Score corruption as a smooth function of where the source view was
/// taken: `key` identifies the other side of the query (the goal view),
/// `at` is the source capture position.
pub fn corrupt_at(prediction: Prediction, cfg: &PredictorCorruption, key: u64, at: Point) -> Prediction {
    let base = derive_seed(cfg.seed, key);
    match prediction {
        Prediction::Scores(bins) => {
            let mut out = bins;
            for i in 0..N_THETA {
                out.0[i] = field_jitter(bins.0[i], cfg.sigma_score, derive_seed(base, TAG_SCORE + 16 * i as u64), at);
            }
            Prediction::Scores(out)
        }
        Prediction::RelPose(p) => Prediction::RelPose(RelPosePrediction {
            direction_bin: p.direction_bin,
            score: field_jitter(p.score, cfg.sigma_score, derive_seed(base, TAG_SCORE - 1), at),
        }),
        other => corrupt(other, cfg, key),
    }
}

/// Corrupts `prediction` with draws keyed by `key`.
pub fn corrupt(prediction: Prediction, cfg: &PredictorCorruption, key: u64) -> Prediction {
    let base = derive_seed(cfg.seed, key);
    match prediction {
        Prediction::Connection(v) => {
            Prediction::Connection(flip(v, cfg.p_flip_connection, derive_seed(base, TAG_CONNECTION)))
        }
        Prediction::Directions(bins) => {
            let mut out = bins;
            for i in 0..N_THETA {
                out.0[i] = flip(
                    bins.0[i],
                    cfg.p_flip_direction,
                    derive_seed(base, TAG_DIRECTION + 16 * i as u64),
                );
            }
            Prediction::Directions(out)
        }
        Prediction::Scores(bins) => {
            let mut out = bins;
            for i in 0..N_THETA {
                out.0[i] = jitter(bins.0[i], cfg.sigma_score, derive_seed(base, TAG_SCORE + 16 * i as u64));
            }
            Prediction::Scores(out)
        }
        Prediction::RelPose(p) => Prediction::RelPose(RelPosePrediction {
            direction_bin: p.direction_bin,
            score: jitter(p.score, cfg.sigma_score, derive_seed(base, TAG_SCORE - 1)),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_config_is_identity() {
        let cfg = PredictorCorruption::none();
        let scores = Prediction::Scores(DirectionBins([0.3; N_THETA]));
        assert_eq!(corrupt(scores, &cfg, 9), scores);
        let b = Prediction::Directions(DirectionBins([true; N_THETA]));
        assert_eq!(corrupt(b, &cfg, 9), b);
        assert_eq!(corrupt(Prediction::Connection(true), &cfg, 1), Prediction::Connection(true));
    }

    #[test]
    fn certain_flip_negates() {
        let cfg = PredictorCorruption {
            p_flip_connection: 1.0,
            p_flip_direction: 1.0,
            ..Default::default()
        };
        assert_eq!(corrupt(Prediction::Connection(true), &cfg, 4), Prediction::Connection(false));
        let mut bins = [false; N_THETA];
        bins[3] = true;
        let Prediction::Directions(out) = corrupt(Prediction::Directions(DirectionBins(bins)), &cfg, 4) else {
            unreachable!()
        };
        for i in 0..N_THETA {
            assert_eq!(out.0[i], !bins[i]);
        }
    }

    #[test]
    fn score_noise_std_matches_sigma() {
        let cfg = PredictorCorruption {
            sigma_score: 0.1,
            seed: 17,
            ..Default::default()
        };
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|k| match corrupt(Prediction::Scores(DirectionBins([0.5; N_THETA])), &cfg, k) {
                Prediction::Scores(s) => s.0[0],
                _ => unreachable!(),
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((std - 0.1).abs() <= 0.015, "std {std}");
        assert!(xs.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn deterministic_per_key() {
        let cfg = PredictorCorruption {
            sigma_score: 0.2,
            p_flip_connection: 0.5,
            seed: 3,
            ..Default::default()
        };
        let p = Prediction::Scores(DirectionBins([0.5; N_THETA]));
        assert_eq!(corrupt(p, &cfg, 77), corrupt(p, &cfg, 77));
        assert_ne!(corrupt(p, &cfg, 77), corrupt(p, &cfg, 78));
    }

    #[test]
    fn validation() {
        let bad = PredictorCorruption {
            p_flip_connection: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(PredictorCorruption::none().validate().is_ok());
    }

    fn std_of(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }

    #[test]
    fn field_has_unit_variance() {
        let mut rng = rng_from(5, 1);
        let zs: Vec<f64> = (0..8000)
            .map(|k| {
                let jitter: f64 = rng.random_range(0.0..1.0);
                field_normal(9, Point::new(1.7 * (k % 90) as f64 + jitter, 2.3 * (k / 90) as f64 - jitter))
            })
            .collect();
        let std = std_of(&zs);
        assert!((std - 1.0).abs() < 0.05, "std {std}");
    }

    #[test]
    fn field_is_continuous_and_decorrelates() {
        let (mut near, mut far) = (0.0, 0.0);
        let n = 2000;
        for k in 0..n {
            let p = Point::new(0.37 * k as f64, -0.11 * k as f64);
            let z = field_normal(4, p);
            near += (z - field_normal(4, Point::new(p.x + 0.01, p.y))).abs();
            far += z * field_normal(4, Point::new(p.x + 3.0, p.y));
        }
        assert!(near / (n as f64) < 0.05);
        assert!((far / n as f64).abs() < 0.1);
    }

    #[test]
    fn positional_scores_are_deterministic_with_sigma_spread() {
        let cfg = PredictorCorruption {
            sigma_score: 0.1,
            seed: 2,
            ..Default::default()
        };
        let pred = Prediction::Scores(DirectionBins([0.5; N_THETA]));
        let at = Point::new(3.2, -1.4);
        assert_eq!(corrupt_at(pred, &cfg, 7, at), corrupt_at(pred, &cfg, 7, at));
        assert_eq!(corrupt_at(pred, &PredictorCorruption::none(), 7, at), pred);
        let xs: Vec<f64> = (0..4000)
            .map(|k| match corrupt_at(pred, &cfg, k, at) {
                Prediction::Scores(s) => s.0[k as usize % N_THETA],
                _ => unreachable!(),
            })
            .collect();
        assert!((std_of(&xs) - 0.1).abs() <= 0.015);
    }
}
