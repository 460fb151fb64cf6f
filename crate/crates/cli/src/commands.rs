use crate::config::{noise_config, parse_agents, parse_difficulties, Effective, FileConfig};
use crate::{runtime, CliError, EpisodesArgs, GenMapsArgs, LabelArgs, MapArgs, NoiseArgs, RenderArgs, RunArgs, SequentialArgs};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use toponav::agents::SharedPredictors;
use toponav::eval::{
    format_sequential, format_table, generate_episodes, generate_sequential, run_episode_recorded, run_suite,
    sequential_suite, write_outcomes_csv, write_rows_csv, NamedMap, SuiteConfig,
};
use toponav::oracle::{export_labels, write_labels_to_path, OraclePredictors, PredictorCorruption};
use toponav::render::{map_key_hex, render_ascii, render_svg, TrajectoryDump};
use toponav::sim::{Episode, NoiseConfig, SuccessMode};
use toponav::topograph::GraphDump;
use toponav::world::{generate_floorplan, load_map, write_text_map, BoundaryPolicy, FloorplanConfig, LoadOptions};

const DEFAULT_FLOORPLANS: usize = 5;

fn pick<T: Clone>(flag: Option<T>, file: &Option<T>, default: T) -> T {
    flag.or_else(|| file.clone()).unwrap_or(default)
}

fn load(args: &MapArgs) -> Result<FileConfig, CliError> {
    FileConfig::load(args.config.as_deref())
}

fn floorplan_config(file: &FileConfig) -> FloorplanConfig {
    file.floorplan.clone().unwrap_or_default()
}

/// Maps from files, or procedural floorplans `fp<seed>` otherwise.
fn resolve_maps(args: &MapArgs, file: &FileConfig, eff: &mut Effective) -> Result<Vec<NamedMap>, CliError> {
    let paths = if args.maps.is_empty() {
        file.maps.clone().unwrap_or_default()
    } else {
        args.maps.clone()
    };
    if !paths.is_empty() {
        let opts = LoadOptions {
            resolution: args.resolution,
            boundary: BoundaryPolicy::Close,
        };
        let mut maps = Vec::with_capacity(paths.len());
        for p in &paths {
            if !p.exists() {
                return Err(CliError::Config(format!("maps: file {} does not exist", p.display())));
            }
            let grid = load_map(p, opts).map_err(|e| CliError::Config(format!("maps: {}: {e}", p.display())))?;
            let id = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
            maps.push(NamedMap::new(id, grid));
        }
        eff.set("maps", &paths);
        return Ok(maps);
    }
    let n = pick(args.floorplans, &file.floorplans, DEFAULT_FLOORPLANS);
    if n == 0 {
        return Err(CliError::Config("floorplans: must be at least 1".into()));
    }
    let seed = pick(args.map_seed, &file.map_seed, 0);
    let fp = floorplan_config(file);
    eff.set("floorplans", n).set("map_seed", seed).set("floorplan", &fp);
    Ok((seed..seed + n as u64)
        .map(|s| NamedMap::new(format!("fp{s}"), generate_floorplan(s, &fp)))
        .collect())
}

fn resolve_noise(a: &NoiseArgs, file: &FileConfig, eff: &mut Effective) -> Result<(NoiseConfig, PredictorCorruption), CliError> {
    let ns = file.noise.clone().unwrap_or_default();
    let preset = pick(a.preset.clone(), &ns.preset, "default".to_string());
    let scale = pick(a.noise_scale, &ns.scale, 1.0);
    let sensor = pick(a.sensor_scale, &ns.sensor_scale, 1.0);
    let seed = pick(a.noise_seed, &ns.seed, 0);
    let noise = noise_config(&preset, scale, sensor, seed)?;
    let fc = file.corruption.unwrap_or_else(PredictorCorruption::none);
    let corruption = PredictorCorruption {
        sigma_score: a.sigma_score.unwrap_or(fc.sigma_score),
        p_flip_connection: a.p_flip_connection.unwrap_or(fc.p_flip_connection),
        p_flip_direction: a.p_flip_direction.unwrap_or(fc.p_flip_direction),
        seed: a.corruption_seed.unwrap_or(fc.seed),
    };
    corruption.validate().map_err(|e| CliError::Config(format!("corruption.{}: {} is out of range", e.field, e.value)))?;
    eff.set("noise", noise).set("corruption", corruption);
    Ok((noise, corruption))
}

fn resolve_workers(flag: Option<usize>, file: &FileConfig, eff: &mut Effective) -> Result<usize, CliError> {
    let w = pick(flag, &file.workers, 1);
    if w == 0 {
        return Err(CliError::Config("workers: must be at least 1".into()));
    }
    eff.set("workers", w);
    Ok(w)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn out_dir(flag: Option<PathBuf>, file: &FileConfig, default: &str, eff: &mut Effective) -> Result<PathBuf, CliError> {
    let out = pick(flag, &file.out, PathBuf::from(default));
    fs::create_dir_all(&out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    eff.set("out", &out);
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct EpisodeFile {
    config: serde_json::Value,
    episodes: Vec<Episode>,
}

fn read_episode_file(path: &Path) -> Result<Vec<Episode>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("episodes: {}: {e}", path.display())))?;
    if let Ok(f) = serde_json::from_str::<EpisodeFile>(&text) {
        return Ok(f.episodes);
    }
    serde_json::from_str::<Vec<Episode>>(&text).map_err(|e| CliError::Config(format!("episodes: {}: {e}", path.display())))
}

fn sample_episodes(
    maps: &[NamedMap],
    difficulty: Option<String>,
    n: Option<usize>,
    seed: Option<u64>,
    max_steps: Option<u32>,
    file: &FileConfig,
    eff: &mut Effective,
) -> Result<Vec<Episode>, CliError> {
    let diffs = parse_difficulties(&pick(difficulty, &file.difficulty, "all".to_string()))?;
    let n = pick(n, &file.n, 20);
    if n == 0 {
        return Err(CliError::Config("n: must be at least 1".into()));
    }
    let seed = pick(seed, &file.seed, 0);
    let max_steps = pick(max_steps, &file.max_steps, toponav::sim::DEFAULT_MAX_STEPS);
    eff.set("difficulty", &diffs).set("n", n).set("seed", seed).set("max_steps", max_steps);
    let mut all = Vec::new();
    for d in diffs {
        let mut eps = generate_episodes(maps, d, n, seed).map_err(runtime)?;
        for e in &mut eps {
            e.max_steps = max_steps;
        }
        all.extend(eps);
    }
    Ok(all)
}

pub fn run(a: RunArgs) -> Result<(), CliError> {
    let file = load(&a.maps)?;
    let mut eff = Effective::new("run");
    let agents = parse_agents(&pick(a.agent.clone(), &file.agent, "nts".to_string()))?;
    eff.set("agent", &agents);
    let maps = resolve_maps(&a.maps, &file, &mut eff)?;
    let episodes = match a.episodes.clone().or_else(|| file.episodes.clone()) {
        Some(p) => {
            eff.set("episodes", &p);
            read_episode_file(&p)?
        }
        None => sample_episodes(&maps, a.difficulty.clone(), a.n, a.seed, a.max_steps, &file, &mut eff)?,
    };
    if let Some(e) = episodes.iter().find(|e| !maps.iter().any(|m| m.id == e.map_id)) {
        return Err(CliError::Config(format!("episodes: map '{}' is not in the map set", e.map_id)));
    }
    let (noise, corruption) = resolve_noise(&a.noise, &file, &mut eff)?;
    let workers = resolve_workers(a.workers, &file, &mut eff)?;
    let no_stop = a.no_stop || file.no_stop.unwrap_or(false);
    let dump = pick(a.dump, &file.dump, 0);
    eff.set("no_stop", no_stop).set("dump", dump);
    let out = out_dir(a.out.clone(), &file, "results", &mut eff)?;
    let header = eff.header();

    let mut rows = Vec::new();
    for &agent in &agents {
        let cfg = SuiteConfig {
            noise,
            corruption,
            success_mode: if no_stop { SuccessMode::NoStop } else { SuccessMode::Standard },
            workers,
            ..SuiteConfig::new(agent)
        };
        let report = run_suite(&maps, &episodes, &cfg).map_err(runtime)?;
        let mut log = header.clone().into_bytes();
        write_outcomes_csv(&episodes, &report.outcomes, &mut log).map_err(runtime)?;
        write(&out.join(format!("episodes_{}.csv", agent.name())), log)?;
        rows.extend(report.rows);
        dump_episodes(&maps, &episodes[..dump.min(episodes.len())], &cfg, &out)?;
    }
    let table = format_table(&rows);
    write(&out.join("results.txt"), format!("{header}{table}"))?;
    let mut csv = header.into_bytes();
    write_rows_csv(&rows, &mut csv).map_err(runtime)?;
    write(&out.join("results.csv"), csv)?;
    print!("{table}");
    Ok(())
}

fn dump_episodes(maps: &[NamedMap], episodes: &[Episode], cfg: &SuiteConfig, out: &Path) -> Result<(), CliError> {
    let cfg = SuiteConfig {
        keep_trajectories: true,
        ..cfg.clone()
    };
    for (k, e) in episodes.iter().enumerate() {
        let map = maps.iter().find(|m| m.id == e.map_id).expect("episode maps were checked");
        let f: SharedPredictors = Arc::new(OraclePredictors::new(map.grid.clone(), cfg.corruption));
        let (outcome, _, graph) = run_episode_recorded(map, f, e, &cfg);
        let traj = TrajectoryDump {
            map_id: map.id.clone(),
            map_key: map_key_hex(&map.grid),
            start: e.start,
            goal: Some(e.goal),
            poses: outcome.trajectory,
        };
        let stem = format!("{}_{k}", cfg.agent.name());
        write(&out.join(format!("trajectory_{stem}.json")), to_json(&traj)?)?;
        if let Some(g) = graph {
            write(&out.join(format!("graph_{stem}.json")), to_json(&g)?)?;
        }
    }
    Ok(())
}

fn to_json(v: &impl Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(runtime)
}

pub fn sequential(a: SequentialArgs) -> Result<(), CliError> {
    let file = load(&a.maps)?;
    let mut eff = Effective::new("sequential");
    let agents = parse_agents(&pick(a.agent.clone(), &file.agent, "all".to_string()))?;
    eff.set("agent", &agents);
    let maps = resolve_maps(&a.maps, &file, &mut eff)?;
    let n = pick(a.n, &file.n, 20);
    let goals = pick(a.goals, &file.goals, 5);
    let seed = pick(a.seed, &file.seed, 0);
    if n == 0 || goals == 0 {
        return Err(CliError::Config(format!("{}: must be at least 1", if n == 0 { "n" } else { "goals" })));
    }
    eff.set("n", n).set("goals", goals).set("seed", seed);
    let (noise, corruption) = resolve_noise(&a.noise, &file, &mut eff)?;
    let workers = resolve_workers(a.workers, &file, &mut eff)?;
    let out = out_dir(a.out.clone(), &file, "results", &mut eff)?;
    let header = eff.header();
    let episodes = generate_sequential(&maps, n, goals, seed).map_err(runtime)?;
    let mut reports = Vec::new();
    let mut csv = format!("{header}agent,goal,success,spl\n");
    for &agent in &agents {
        let cfg = SuiteConfig {
            noise,
            corruption,
            workers,
            ..SuiteConfig::new(agent)
        };
        let r = sequential_suite(&maps, &episodes, &cfg).map_err(runtime)?;
        for (k, (s, p)) in r.success.iter().zip(&r.spl).enumerate() {
            csv.push_str(&format!("{},{},{s:.6},{p:.6}\n", agent.name(), k + 1));
        }
        reports.push(r);
    }
    let table = format_sequential(&reports);
    write(&out.join("sequential.txt"), format!("{header}{table}"))?;
    write(&out.join("sequential.csv"), csv)?;
    print!("{table}");
    Ok(())
}

pub fn episodes(a: EpisodesArgs) -> Result<(), CliError> {
    let file = load(&a.maps)?;
    let mut eff = Effective::new("episodes");
    let maps = resolve_maps(&a.maps, &file, &mut eff)?;
    let eps = sample_episodes(&maps, a.difficulty.clone(), a.n, a.seed, a.max_steps, &file, &mut eff)?;
    let body = EpisodeFile {
        config: serde_json::from_str(&eff.json()).expect("config round-trips"),
        episodes: eps,
    };
    write(&a.output, to_json(&body)?)?;
    println!("{} episodes", body.episodes.len());
    Ok(())
}

fn single_map(args: &MapArgs, file: &FileConfig, eff: &mut Effective) -> Result<NamedMap, CliError> {
    let mut args = args.clone();
    if args.maps.is_empty() && file.maps.is_none() && args.floorplans.is_none() && file.floorplans.is_none() {
        args.floorplans = Some(1);
    }
    let mut maps = resolve_maps(&args, file, eff)?;
    if maps.len() != 1 {
        return Err(CliError::Config(format!("maps: this command takes exactly one map, got {}", maps.len())));
    }
    Ok(maps.remove(0))
}

pub fn label(a: LabelArgs) -> Result<(), CliError> {
    let file = load(&a.maps)?;
    let mut eff = Effective::new("label");
    let map = single_map(&a.maps, &file, &mut eff)?;
    let n = pick(a.n, &file.n, 300);
    let seed = pick(a.seed, &file.seed, 0);
    let set = export_labels(&map.grid, n, seed).map_err(runtime)?;
    write_labels_to_path(&set, &a.output).map_err(runtime)?;
    println!("{} records", set.records.len());
    Ok(())
}

pub fn gen_maps(a: GenMapsArgs) -> Result<(), CliError> {
    let file = load(&a.maps)?;
    let mut eff = Effective::new("gen-maps");
    if !a.maps.maps.is_empty() {
        return Err(CliError::Config("maps: gen-maps writes floorplans and takes no --map".into()));
    }
    let maps = resolve_maps(&a.maps, &FileConfig { maps: None, ..file.clone() }, &mut eff)?;
    let out = out_dir(a.out.clone(), &file, "maps", &mut eff)?;
    let mut manifest = serde_json::Map::new();
    for m in &maps {
        let name = format!("{}.txt", m.id);
        write(&out.join(&name), write_text_map(&m.grid))?;
        manifest.insert(name, map_key_hex(&m.grid).into());
    }
    let body = serde_json::json!({ "config": serde_json::from_str::<serde_json::Value>(&eff.json()).unwrap(), "maps": manifest });
    write(&out.join("manifest.json"), to_json(&body)?)?;
    println!("{} maps written to {}", maps.len(), out.display());
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(what: &str, path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{what}: {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{what}: {}: {e}", path.display())))
}

pub fn render(a: RenderArgs) -> Result<(), CliError> {
    let file = load(&a.maps)?;
    let traj: Option<TrajectoryDump> = a.trajectory.as_deref().map(|p| read_json("trajectory", p)).transpose()?;
    let graph: Option<GraphDump> = a.graph.as_deref().map(|p| read_json("graph", p)).transpose()?;
    let mut args = a.maps.clone();
    // a floorplan trajectory names its own map
    if let Some(seed) = traj.as_ref().and_then(|t| t.map_id.strip_prefix("fp")).and_then(|s| s.parse().ok()) {
        if args.maps.is_empty() && file.maps.is_none() && args.map_seed.is_none() {
            args.map_seed = Some(seed);
            args.floorplans = Some(1);
        }
    }
    let map = single_map(&args, &file, &mut Effective::new("render"))?;
    let text = if a.ascii {
        render_ascii(&map.grid, traj.as_ref(), graph.as_ref(), a.scale)
    } else {
        render_svg(&map.grid, traj.as_ref(), graph.as_ref())
    }
    .map_err(runtime)?;
    match &a.output {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
