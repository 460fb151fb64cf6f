//! End-to-end acceptance checks, one PASS/FAIL line each, run in sequence so
//! the reported times are not skewed by other tests.

mod common;

use rand::Rng;
use std::f64::consts::TAU;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};
use toponav::agents::AgentKind;
use toponav::eval::{
    generate_episodes, generate_sequential, run_suite, sequential_suite, spl, success_rate, NamedMap, Outcome, SuiteConfig,
};
use toponav::noise::rng_from;
use toponav::oracle::{
    connection_rule, direction_bin, export_labels, inter_node_score, intra_node_score, read_labels, write_labels,
    OraclePredictors, PredictorCorruption, Predictors, N_THETA,
};
use toponav::policies::shortest_path;
use toponav::sim::{Difficulty, NoiseConfig, PanoramicObservation, SuccessMode, DEFAULT_N_RAYS};
use toponav::world::{generate_floorplan, CellIndex, DistanceField, FloorplanConfig, DEFAULT_MAX_RANGE};

type Check = Result<String, String>;

fn floorplans(n: u64) -> Vec<NamedMap> {
    (0..n).map(|s| NamedMap::new(format!("fp{s}"), generate_floorplan(s, &FloorplanConfig::default()))).collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c1_formulas() -> Check {
    let mut cases = [0usize; 4];
    let mut bad = Vec::new();
    // d = 3k/50: the intra score steps down by 1/50 until r
    for k in 0..=75 {
        let d = 3.0 * k as f64 / 50.0;
        let want = if k <= 50 { 1.0 - k as f64 / 50.0 } else { 0.0 };
        cases[0] += 1;
        if !close(intra_node_score(d), want) {
            bad.push(format!("intra({d})"));
        }
    }
    for k in 0..=75 {
        let d = 20.0 * k as f64 / 50.0;
        let want = if k <= 50 { 1.0 - k as f64 / 50.0 } else { 0.0 };
        cases[1] += 1;
        if !close(inter_node_score(d), want) {
            bad.push(format!("inter({d})"));
        }
    }
    // angles within half a bin of each center, both signs and a full turn off
    for b in 0..N_THETA {
        for frac in [-0.49, -0.25, 0.0, 0.25, 0.49] {
            for wrap in [0.0, -TAU, TAU] {
                let theta = (b as f64 + frac) * TAU / 12.0 + wrap;
                cases[2] += 1;
                if direction_bin(theta) != b {
                    bad.push(format!("bin({theta})"));
                }
            }
        }
    }
    // 360 rays: the 5° patch is the center ray and two on each side
    for k in 0..60 {
        let n = DEFAULT_N_RAYS;
        let center = (k * 37) % n;
        let bearing = center as f64 * TAU / n as f64;
        let d = [0.5, 1.0, 2.0, 2.9, 3.0, 3.01, 4.0][k % 7];
        let offset: i64 = [-3, -2, -1, 0, 1, 2, 3][(k / 7) % 7];
        let mut depths = vec![0.1; n];
        depths[(center as i64 + offset).rem_euclid(n as i64) as usize] = d + 0.5;
        let want = d <= 3.0 && offset.abs() <= 2;
        cases[3] += 1;
        if connection_rule(&depths, bearing, d) != want {
            bad.push(format!("connect(center {center}, offset {offset}, d {d})"));
        }
        let flat = vec![d - 0.01; n];
        cases[3] += 1;
        if connection_rule(&flat, bearing, d) {
            bad.push(format!("connect(short depth, d {d})"));
        }
    }
    let msg = format!("cases intra {} inter {} bin {} connection {}", cases[0], cases[1], cases[2], cases[3]);
    ensure(bad.is_empty() && cases.iter().all(|&c| c >= 50), if bad.is_empty() { msg } else { format!("{msg}; wrong: {bad:?}") })
}

fn c2_graph_invariants() -> Check {
    let maps = floorplans(5);
    let mut episodes = Vec::new();
    for (d, n) in [(Difficulty::Easy, 67), (Difficulty::Medium, 67), (Difficulty::Hard, 66)] {
        episodes.extend(generate_episodes(&maps, d, n, 41).map_err(|e| e.to_string())?);
    }
    let cfg = SuiteConfig {
        check_invariants: true,
        ..SuiteConfig::new(AgentKind::Nts)
    };
    let r = run_suite(&maps, &episodes, &cfg).map_err(|e| e.to_string())?;
    let msg = format!("{} rollouts, {} violations", episodes.len(), r.violations.len());
    ensure(episodes.len() == 200 && r.violations.is_empty(), match r.violations.first() {
        None => msg,
        Some((k, s, v)) => format!("{msg}; first: episode {k} step {s}: {v}"),
    })
}

fn c3_planner_oracles() -> Check {
    let mut rng = rng_from(3, 0xd1);
    let mut graph_mismatch = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=12);
        let adj = common::random_graph(&mut rng, n, 0.35);
        for dst in 0..n {
            let got = shortest_path(&adj, 0, dst).map(|(_, c)| c);
            let want = common::brute_force_cost(&adj, 0, dst);
            let same = match (got, want) {
                (Some(a), Some(b)) => close(a, b),
                (None, None) => true,
                _ => false,
            };
            graph_mismatch += usize::from(!same);
        }
    }
    let mut grid_mismatch = 0;
    for seed in 0..200 {
        let g = common::random_grid(seed, 50, 50, 0.25);
        let Some(src) = g.free_cells().next() else { continue };
        let field = DistanceField::compute(&g, src);
        let reference = common::bellman_ford(&g, src);
        for j in 0..50 {
            for i in 0..50 {
                let c = CellIndex::new(i, j);
                grid_mismatch += usize::from(field.grid_distance(c) != reference[g.index(c)]);
            }
        }
    }
    ensure(
        graph_mismatch == 0 && grid_mismatch == 0,
        format!("100 graphs: {graph_mismatch} mismatches; 200 grids: {grid_mismatch} mismatched cells"),
    )
}

fn c4_sanity() -> Check {
    let maps = floorplans(5);
    let cfg = SuiteConfig {
        noise: NoiseConfig::zero(),
        ..SuiteConfig::new(AgentKind::Nts)
    };
    let mut parts = Vec::new();
    let mut ok = true;
    for d in Difficulty::ALL {
        let eps = generate_episodes(&maps, d, 100, 11).map_err(|e| e.to_string())?;
        let r = run_suite(&maps, &eps, &cfg).map_err(|e| e.to_string())?;
        let (s, p) = (success_rate(&r.outcomes), spl(&r.outcomes));
        ok &= match d {
            Difficulty::Hard => s >= 0.80,
            _ => s >= 0.95 && p >= 0.60,
        };
        parts.push(format!("{} succ {s:.3} spl {p:.3}", d.name()));
    }
    ensure(ok, parts.join(", "))
}

fn c5_stop_action() -> Check {
    let maps = floorplans(5);
    let mut eps = generate_episodes(&maps, Difficulty::Medium, 100, 51).map_err(|e| e.to_string())?;
    eps.extend(generate_episodes(&maps, Difficulty::Hard, 100, 51).map_err(|e| e.to_string())?);
    let corruption = PredictorCorruption {
        p_flip_connection: 0.05,
        ..PredictorCorruption::none()
    };
    let mut parts = Vec::new();
    let (mut never_worse, mut strict) = (true, false);
    for agent in AgentKind::ALL {
        let mut rate = [0.0; 2];
        for (k, mode) in [SuccessMode::Standard, SuccessMode::NoStop].into_iter().enumerate() {
            let cfg = SuiteConfig {
                corruption,
                success_mode: mode,
                ..SuiteConfig::new(agent)
            };
            rate[k] = success_rate(&run_suite(&maps, &eps, &cfg).map_err(|e| e.to_string())?.outcomes);
        }
        never_worse &= rate[1] >= rate[0];
        strict |= rate[1] > rate[0];
        parts.push(format!("{agent} {:.3}->{:.3}", rate[0], rate[1]));
    }
    ensure(never_worse && strict, format!("{} episodes, standard->no_stop: {}", eps.len(), parts.join(", ")))
}

fn c6_motion_noise() -> Check {
    let maps = floorplans(5);
    let eps = generate_episodes(&maps, Difficulty::Hard, 300, 31).map_err(|e| e.to_string())?;
    let d = NoiseConfig::default();
    let noisy = NoiseConfig { sensor: d.scaled(3.0).sensor, ..d };
    let mut drop = [0.0; 2];
    let mut parts = Vec::new();
    for (k, agent) in [AgentKind::Nts, AgentKind::Fbe].into_iter().enumerate() {
        let mut rate = [0.0; 2];
        for (j, noise) in [NoiseConfig::zero(), noisy].into_iter().enumerate() {
            let cfg = SuiteConfig {
                noise,
                ..SuiteConfig::new(agent)
            };
            rate[j] = success_rate(&run_suite(&maps, &eps, &cfg).map_err(|e| e.to_string())?.outcomes);
        }
        drop[k] = rate[0] - rate[1];
        parts.push(format!("{agent} {:.3}->{:.3} (drop {:.3})", rate[0], rate[1], drop[k]));
    }
    ensure(drop[1] - drop[0] >= 0.05, format!("{}; margin {:.3}", parts.join(", "), drop[1] - drop[0]))
}

fn c7_ablations() -> Check {
    let maps = floorplans(5);
    let eps = generate_sequential(&maps, 500, 5, 21).map_err(|e| e.to_string())?;
    let corruption = PredictorCorruption {
        sigma_score: 0.1,
        ..PredictorCorruption::none()
    };
    let mut curves = Vec::new();
    for agent in [AgentKind::Nts, AgentKind::NoScore, AgentKind::NoGraph] {
        let cfg = SuiteConfig {
            corruption,
            ..SuiteConfig::new(agent)
        };
        curves.push(sequential_suite(&maps, &eps, &cfg).map_err(|e| e.to_string())?.success);
    }
    let (nts, no_score, no_graph) = (&curves[0], &curves[1], &curves[2]);
    let dominates = (0..5).all(|k| nts[k] >= no_score[k] && nts[k] >= no_graph[k]);
    let (gap1, gap5) = (nts[0] - no_graph[0], nts[4] - no_graph[4]);
    let fmt = |c: &Vec<f64>| c.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" ");
    ensure(
        dominates && gap5 > gap1,
        format!(
            "nts [{}] no_score [{}] no_graph [{}]; graph gap {gap1:.3} -> {gap5:.3}",
            fmt(nts),
            fmt(no_score),
            fmt(no_graph)
        ),
    )
}

fn c8_labels() -> Check {
    let grid = Arc::new(generate_floorplan(0, &FloorplanConfig::default()));
    let set = export_labels(&grid, 300, 8).map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    write_labels(&set, &mut bytes).map_err(|e| e.to_string())?;
    let again = export_labels(&grid, 300, 8).map_err(|e| e.to_string())?;
    let mut bytes2 = Vec::new();
    write_labels(&again, &mut bytes2).map_err(|e| e.to_string())?;
    let parsed = read_labels(bytes.as_slice()).map_err(|e| e.to_string())?;

    let oracle = OraclePredictors::exact(grid.clone());
    let obs: Vec<PanoramicObservation> = set
        .samples
        .iter()
        .map(|&p| PanoramicObservation::capture(&grid, p, DEFAULT_N_RAYS, DEFAULT_MAX_RANGE).unwrap())
        .collect();
    let mut direct_mismatch = 0;
    for r in set.records.iter().step_by(89) {
        let (s, g) = (&obs[r.source], &obs[r.goal]);
        let connected = oracle.localize(s, g).unwrap();
        let same = connected == r.connected
            && if connected {
                let rel = oracle.relative_pose(s, g).unwrap();
                r.intra_bin == Some(rel.direction_bin) && r.intra_score.is_some_and(|v| close(v, rel.score))
            } else {
                r.explorable == Some(oracle.explorable(s).unwrap().0)
                    && r.scores.is_some_and(|sc| sc.iter().zip(oracle.scores(s, g).unwrap().0).all(|(a, b)| close(*a, b)))
            };
        direct_mismatch += usize::from(!same);
    }
    let ok = set.records.len() == 89_700 && parsed == set.records && bytes == bytes2 && direct_mismatch == 0;
    ensure(
        ok,
        format!(
            "{} records, round trip {}, byte-stable {}, {direct_mismatch} mismatches against direct calls",
            set.records.len(),
            if parsed == set.records { "ok" } else { "differs" },
            bytes == bytes2
        ),
    )
}

fn outcome(success: bool, l_agent: f64, l_star: f64) -> Outcome {
    Outcome {
        success,
        l_agent,
        l_star,
        steps: 0,
        stop_taken: success,
        trajectory: Vec::new(),
        error: None,
    }
}

fn c9_spl() -> Check {
    // (success, l_agent, l_star, hand-computed SPL term)
    let fixture = [
        (true, 4.0, 2.0, 0.5),
        (true, 2.0, 2.0, 1.0),
        (true, 1.5, 2.0, 1.0),
        (true, 5.0, 4.0, 0.8),
        (true, 10.0, 2.5, 0.25),
        (false, 3.0, 3.0, 0.0),
        (false, 0.0, 6.0, 0.0),
        (true, 8.0, 6.0, 0.75),
        (true, 2.5, 2.0, 0.8),
        (false, 12.0, 1.0, 0.0),
    ];
    let outs: Vec<Outcome> = fixture.iter().map(|&(s, l, ls, _)| outcome(s, l, ls)).collect();
    let terms_ok = outs.iter().zip(&fixture).all(|(o, f)| close(o.spl(), f.3));
    let mean = fixture.iter().map(|f| f.3).sum::<f64>() / 10.0;
    let suite_ok = close(spl(&outs), mean) && close(success_rate(&outs), 0.7);
    let mut rng = rng_from(9, 0x59);
    let mut bound_ok = true;
    for _ in 0..1000 {
        let n = rng.random_range(1..30);
        let os: Vec<Outcome> = (0..n)
            .map(|_| outcome(rng.random_bool(0.6), rng.random_range(0.0..20.0), rng.random_range(0.1..10.0)))
            .collect();
        bound_ok &= spl(&os) <= success_rate(&os) + 1e-12;
    }
    ensure(
        terms_ok && suite_ok && bound_ok,
        format!("fixture SPL {:.4} (hand {mean:.4}), SPL <= success on 1000 random suites: {bound_ok}", spl(&outs)),
    )
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, &str, fn() -> Check, Option<u64>); 9] = [
        ("1", "oracle formulas", c1_formulas, Some(1)),
        ("2", "graph invariants", c2_graph_invariants, Some(120)),
        ("3", "planner oracles", c3_planner_oracles, Some(60)),
        ("4", "end-to-end sanity", c4_sanity, Some(300)),
        ("5", "stop action trend", c5_stop_action, None),
        ("6", "motion noise trend", c6_motion_noise, None),
        ("7", "ablation trend", c7_ablations, Some(900)),
        ("8", "label export", c8_labels, Some(120)),
        ("9", "spl metric", c9_spl, None),
    ];
    let mut failed = 0;
    for (id, name, check, limit) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = t.elapsed();
        let slow = limit.is_some_and(|l| elapsed > Duration::from_secs(l));
        let pass = result.is_ok() && !slow;
        failed += usize::from(!pass);
        let time = match limit {
            Some(l) => format!("{:.1}s, limit {l}s", elapsed.as_secs_f64()),
            None => format!("{:.1}s", elapsed.as_secs_f64()),
        };
        let detail = match &result {
            Ok(m) | Err(m) => m,
        };
        println!("criterion {id} {name}: {} ({time}) {detail}", if pass { "PASS" } else { "FAIL" });
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
