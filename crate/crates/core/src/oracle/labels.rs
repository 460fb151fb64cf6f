//! Supervised label export: sample poses on a map and label every ordered
//! pair with the connection, intra-node and inter-node rules.
//!
//! File format: one `#` comment line echoing the configuration, a CSV header
//! row, then one record per ordered pair (source-major). Connected pairs
//! fill `intra_bin`/`intra_score` and leave the 24 inter-node columns empty;
//! unconnected pairs do the opposite. Booleans are written as `0`/`1`, floats
//! in shortest round-trip form. Paths ending in `.gz` are gzip-compressed.

use super::{inter_node_score, OraclePredictors, N_THETA};
use crate::geometry::Pose;
use crate::noise::rng_from;
use crate::sim::PanoramicObservation;
use crate::world::{OccupancyGrid, WorldError, DEFAULT_MAX_RANGE};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelConfig {
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelRecord {
    pub source: usize,
    pub goal: usize,
    pub source_pose: Pose,
    pub goal_pose: Pose,
    pub connected: bool,
    pub intra_bin: Option<usize>,
    pub intra_score: Option<f64>,
    pub explorable: Option<[bool; N_THETA]>,
    pub scores: Option<[f64; N_THETA]>,
}

#[derive(Debug, Clone)]
pub struct LabelSet {
    pub config: LabelConfig,
    pub map_fingerprint: u64,
    pub resolution: f64,
    pub samples: Vec<Pose>,
    pub records: Vec<LabelRecord>,
}

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("map has {available} free cells, cannot sample {needed} distinct poses")]
    InsufficientFreeCells { needed: usize, available: usize },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Oracle(#[from] super::OracleError),
    #[error("label file: {0}")]
    Csv(#[from] csv::Error),
    #[error("label file: {0}")]
    Io(#[from] std::io::Error),
    #[error("label file line {line}: {message}")]
    Format { line: u64, message: String },
}

/// Samples `n_samples` poses on distinct free cells and labels all
/// `n·(n−1)` ordered pairs with the exact (uncorrupted) oracle.
pub fn export_labels(grid: &Arc<OccupancyGrid>, n_samples: usize, seed: u64) -> Result<LabelSet, LabelError> {
    if n_samples < 2 {
        return Err(LabelError::TooFewSamples(n_samples));
    }
    let free: Vec<_> = grid.free_cells().collect();
    if free.len() < n_samples {
        return Err(LabelError::InsufficientFreeCells {
            needed: n_samples,
            available: free.len(),
        });
    }
    let mut rng = rng_from(seed, 0x1ABE1);
    let picks = rand::seq::index::sample(&mut rng, free.len(), n_samples);
    let samples: Vec<Pose> = picks
        .iter()
        .map(|k| {
            let p = grid.cell_center(free[k]);
            Pose::new(p.x, p.y, rng.random_range(0.0..TAU))
        })
        .collect();
    let observations = samples
        .iter()
        .map(|&p| PanoramicObservation::capture(grid, p, crate::sim::DEFAULT_N_RAYS, DEFAULT_MAX_RANGE))
        .collect::<Result<Vec<_>, _>>()?;

    let oracle = OraclePredictors::exact(grid.clone());
    let infos: Vec<_> = observations.iter().map(|o| oracle.source_info(o)).collect();
    let n = n_samples;
    let mut connected = vec![false; n * n];
    for s in 0..n {
        for g in 0..n {
            if s != g {
                connected[s * n + g] = oracle.connected(&observations[s], &observations[g])?;
            }
        }
    }
    // goal-major so each goal's distance field is computed once
    let mut scores = vec![[0.0; N_THETA]; n * n];
    for g in 0..n {
        let field = oracle.goal_field(&observations[g]);
        for s in 0..n {
            if s != g && !connected[s * n + g] {
                scores[s * n + g] = infos[s].far_cells.map(|c| field.meters(c).map_or(0.0, inter_node_score));
            }
        }
    }

    let mut records = Vec::with_capacity(n * (n - 1));
    for s in 0..n {
        for g in 0..n {
            if s == g {
                continue;
            }
            let is_conn = connected[s * n + g];
            let rel = is_conn.then(|| OraclePredictors::exact_relative_pose(&observations[s], &observations[g]));
            records.push(LabelRecord {
                source: s,
                goal: g,
                source_pose: samples[s],
                goal_pose: samples[g],
                connected: is_conn,
                intra_bin: rel.map(|r| r.direction_bin),
                intra_score: rel.map(|r| r.score),
                explorable: (!is_conn).then_some(infos[s].explorable.0),
                scores: (!is_conn).then_some(scores[s * n + g]),
            });
        }
    }
    Ok(LabelSet {
        config: LabelConfig { n_samples, seed },
        map_fingerprint: grid.fingerprint(),
        resolution: grid.resolution(),
        samples,
        records,
    })
}

fn header() -> Vec<String> {
    let mut h: Vec<String> = [
        "source", "goal", "source_x", "source_y", "source_heading", "goal_x", "goal_y", "goal_heading",
        "connected", "intra_bin", "intra_score",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((0..N_THETA).map(|i| format!("explore_{i}")));
    h.extend((0..N_THETA).map(|i| format!("score_{i}")));
    h
}

/// Writes the label file to `w`.
pub fn write_labels<W: Write>(set: &LabelSet, w: W) -> Result<(), LabelError> {
    let mut w = w;
    writeln!(
        w,
        "# labels n_samples={} seed={} map={:016x} resolution={} records={}",
        set.config.n_samples,
        set.config.seed,
        set.map_fingerprint,
        set.resolution,
        set.records.len()
    )?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(header())?;
    let mut row: Vec<String> = Vec::with_capacity(11 + 2 * N_THETA);
    for r in &set.records {
        row.clear();
        row.push(r.source.to_string());
        row.push(r.goal.to_string());
        for p in [r.source_pose, r.goal_pose] {
            row.push(p.x.to_string());
            row.push(p.y.to_string());
            row.push(p.heading.to_string());
        }
        row.push(u8::from(r.connected).to_string());
        row.push(r.intra_bin.map_or(String::new(), |b| b.to_string()));
        row.push(r.intra_score.map_or(String::new(), |s| s.to_string()));
        match r.explorable {
            Some(e) => row.extend(e.iter().map(|&b| u8::from(b).to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), N_THETA)),
        }
        match r.scores {
            Some(s) => row.extend(s.iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), N_THETA)),
        }
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

/// Writes to a path, gzip-compressing when it ends in `.gz`.
pub fn write_labels_to_path(set: &LabelSet, path: &Path) -> Result<(), LabelError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    if path.extension().is_some_and(|e| e == "gz") {
        let mut gz = flate2::write::GzEncoder::new(file, flate2::Compression::default());
        write_labels(set, &mut gz)?;
        gz.finish()?.flush()?;
    } else {
        let mut file = file;
        write_labels(set, &mut file)?;
        file.flush()?;
    }
    Ok(())
}

/// Parses records written by [`write_labels`].
pub fn read_labels<R: Read>(r: R) -> Result<Vec<LabelRecord>, LabelError> {
    let mut reader = BufReader::new(r);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    if !first.starts_with('#') {
        return Err(LabelError::Format {
            line: 1,
            message: "missing `#` configuration line".into(),
        });
    }
    let mut csv = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (k, rec) in csv.records().enumerate() {
        let rec = rec?;
        let line = k as u64 + 3;
        let bad = |message: String| LabelError::Format { line, message };
        let field = |i: usize| rec.get(i).ok_or_else(|| bad(format!("missing column {i}")));
        let f64_at = |i: usize| -> Result<f64, LabelError> {
            let s = field(i)?;
            s.parse().map_err(|_| bad(format!("bad number {s:?} in column {i}")))
        };
        let usize_at = |i: usize| -> Result<usize, LabelError> {
            let s = field(i)?;
            s.parse().map_err(|_| bad(format!("bad integer {s:?} in column {i}")))
        };
        let connected = usize_at(8)? == 1;
        let inter = 11;
        out.push(LabelRecord {
            source: usize_at(0)?,
            goal: usize_at(1)?,
            source_pose: Pose::new(f64_at(2)?, f64_at(3)?, f64_at(4)?),
            goal_pose: Pose::new(f64_at(5)?, f64_at(6)?, f64_at(7)?),
            connected,
            intra_bin: if connected { Some(usize_at(9)?) } else { None },
            intra_score: if connected { Some(f64_at(10)?) } else { None },
            explorable: if connected {
                None
            } else {
                let mut e = [false; N_THETA];
                for (i, v) in e.iter_mut().enumerate() {
                    *v = usize_at(inter + i)? == 1;
                }
                Some(e)
            },
            scores: if connected {
                None
            } else {
                let mut s = [0.0; N_THETA];
                for (i, v) in s.iter_mut().enumerate() {
                    *v = f64_at(inter + N_THETA + i)?;
                }
                Some(s)
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Predictors;
    use crate::world::generate_floorplan;

    #[test]
    fn two_samples_give_two_records() {
        let g = Arc::new(generate_floorplan(1, &Default::default()));
        let set = export_labels(&g, 2, 5).unwrap();
        assert_eq!(set.records.len(), 2);
        assert_eq!((set.records[0].source, set.records[0].goal), (0, 1));
        assert_eq!((set.records[1].source, set.records[1].goal), (1, 0));
    }

    #[test]
    fn errors() {
        let g = Arc::new(generate_floorplan(1, &Default::default()));
        assert!(matches!(export_labels(&g, 1, 0), Err(LabelError::TooFewSamples(1))));
        let tiny = Arc::new(crate::world::parse_text_map("resolution=0.1\n#####\n#...#\n#####\n", Default::default()).unwrap());
        assert!(matches!(
            export_labels(&tiny, 4, 0),
            Err(LabelError::InsufficientFreeCells { needed: 4, available: 3 })
        ));
    }

    #[test]
    fn file_round_trip_matches_predictors() {
        let g = Arc::new(generate_floorplan(2, &Default::default()));
        let set = export_labels(&g, 25, 11).unwrap();
        let mut bytes = Vec::new();
        write_labels(&set, &mut bytes).unwrap();
        let back = read_labels(bytes.as_slice()).unwrap();
        assert_eq!(back, set.records);
        let oracle = OraclePredictors::exact(g.clone());
        let obs: Vec<_> = set
            .samples
            .iter()
            .map(|&p| PanoramicObservation::capture(&g, p, 360, DEFAULT_MAX_RANGE).unwrap())
            .collect();
        let mut n_connected = 0;
        for r in &back {
            let (s, t) = (&obs[r.source], &obs[r.goal]);
            assert_eq!(r.connected, oracle.localize(s, t).unwrap());
            if r.connected {
                n_connected += 1;
                let rel = oracle.relative_pose(s, t).unwrap();
                assert_eq!(r.intra_bin, Some(rel.direction_bin));
                assert_eq!(r.intra_score.map(f64::to_bits), Some(rel.score.to_bits()));
            } else {
                assert_eq!(r.explorable, Some(oracle.explorable(s).unwrap().0));
                let sc = oracle.scores(s, t).unwrap().0;
                assert_eq!(r.scores.unwrap().map(f64::to_bits), sc.map(f64::to_bits));
            }
        }
        assert!(n_connected > 0);
    }

    #[test]
    fn gzip_file_decodes_to_plain() {
        let g = Arc::new(generate_floorplan(2, &Default::default()));
        let set = export_labels(&g, 5, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let gz = dir.path().join("labels.csv.gz");
        write_labels_to_path(&set, &gz).unwrap();
        let decoded = read_labels(flate2::read::GzDecoder::new(std::fs::File::open(&gz).unwrap())).unwrap();
        assert_eq!(decoded, set.records);
    }
}
