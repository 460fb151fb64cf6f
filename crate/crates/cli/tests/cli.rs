use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn toponav(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toponav"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = toponav(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

const SMALL_RUN: &[&str] = &["run", "--agent", "nts", "--difficulty", "easy", "--n", "6", "--seed", "7", "--floorplans", "2"];

#[test]
fn run_writes_table_and_log_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let args: Vec<&str> = SMALL_RUN.iter().copied().chain(["--out", "r"]).collect();
    let table = ok(dir.path(), &args);
    assert!(table.contains("NTS") && table.contains("Easy"));
    let read = |f: &str| fs::read(dir.path().join("r").join(f)).unwrap();
    let first = (read("results.txt"), read("results.csv"), read("episodes_nts.csv"));
    ok(dir.path(), &args);
    assert_eq!(first, (read("results.txt"), read("results.csv"), read("episodes_nts.csv")));
    let log = String::from_utf8(first.2).unwrap();
    assert!(log.starts_with("# config: {"));
    // header comment, csv header, one row per episode
    assert_eq!(log.lines().count(), 2 + 6);
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let one: Vec<&str> = SMALL_RUN.iter().copied().chain(["--out", "a"]).collect();
    let four: Vec<&str> = SMALL_RUN.iter().copied().chain(["--out", "b", "--workers", "4"]).collect();
    ok(dir.path(), &one);
    ok(dir.path(), &four);
    let body = |d: &str| {
        let s = fs::read_to_string(dir.path().join(d).join("episodes_nts.csv")).unwrap();
        s.lines().skip(1).map(str::to_string).collect::<Vec<_>>()
    };
    assert_eq!(body("a"), body("b"));
}

#[test]
fn no_stop_mode_runs() {
    let dir = tempfile::tempdir().unwrap();
    let table = ok(
        dir.path(),
        &["run", "--agent", "fbe", "--no-stop", "--difficulty", "easy", "--n", "4", "--floorplans", "1", "--out", "r"],
    );
    assert!(table.contains("Metric Map + FBE + Local"));
    let header = fs::read_to_string(dir.path().join("r/results.txt")).unwrap();
    assert!(header.contains("\"no_stop\":true"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        "agent = \"fbe\"\ndifficulty = \"easy\"\nn = 3\nfloorplans = 1\nout = \"from_file\"\n\n[corruption]\nsigma_score = 0.05\n",
    )
    .unwrap();
    let table = ok(dir.path(), &["run", "--config", "c.toml", "--agent", "nts"]);
    assert!(table.contains("NTS") && !table.contains("FBE"));
    let log = fs::read_to_string(dir.path().join("from_file/episodes_nts.csv")).unwrap();
    assert_eq!(log.lines().count(), 2 + 3);
    assert!(log.contains("\"sigma_score\":0.05"));
}

#[test]
fn config_errors_exit_2_with_field_name() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "agnet = \"nts\"\n").unwrap();
    let out = toponav(dir.path(), &["run", "--config", "bad.toml"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("agnet"));

    let out = toponav(dir.path(), &["run", "--sigma-score=-1", "--floorplans", "1"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma_score"));

    let out = toponav(dir.path(), &["run", "--map", "missing.txt"]);
    assert_eq!(code(&out), 2);

    let out = toponav(dir.path(), &["run", "--workers", "0", "--floorplans", "1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn label_counts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["label", "--n", "2", "--seed", "3", "-o", "a.csv"]);
    assert_eq!(stdout.trim(), "2 records");
    ok(dir.path(), &["label", "--n", "2", "--seed", "3", "-o", "b.csv"]);
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
    let out = toponav(dir.path(), &["label", "--floorplans", "2", "-o", "c.csv"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn generated_maps_and_episodes_feed_run() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-maps", "--floorplans", "2", "--map-seed", "4", "--out", "maps"]);
    assert!(dir.path().join("maps/fp4.txt").exists() && dir.path().join("maps/manifest.json").exists());
    let maps = ["--map", "maps/fp4.txt", "--map", "maps/fp5.txt"];
    let mut args = vec!["episodes", "--difficulty", "medium", "--n", "3", "--seed", "1", "-o", "eps.json"];
    args.extend(maps);
    assert_eq!(ok(dir.path(), &args).trim(), "3 episodes");
    let mut args = vec!["run", "--agent", "no_graph", "--episodes", "eps.json", "--out", "r"];
    args.extend(maps);
    let table = ok(dir.path(), &args);
    assert!(table.contains("Medium"));

    // the same episodes with floorplans generated in memory
    let table2 = ok(
        dir.path(),
        &["run", "--agent", "no_graph", "--episodes", "eps.json", "--floorplans", "2", "--map-seed", "4", "--out", "r2"],
    );
    assert_eq!(table, table2);

    // episodes on maps that are not loaded
    let out = toponav(dir.path(), &["run", "--episodes", "eps.json", "--floorplans", "1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sequential_prints_one_column_per_goal() {
    let dir = tempfile::tempdir().unwrap();
    let table = ok(
        dir.path(),
        &["sequential", "--agent", "nts,no_graph", "--n", "2", "--goals", "3", "--floorplans", "1", "--out", "s"],
    );
    assert!(table.contains("goal 3") && !table.contains("goal 4"));
    let csv = fs::read_to_string(dir.path().join("s/sequential.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 3);
}

#[test]
fn render_dumps_and_rejects_wrong_map() {
    let dir = tempfile::tempdir().unwrap();
    let args: Vec<&str> = SMALL_RUN.iter().copied().chain(["--out", "r", "--dump", "1"]).collect();
    ok(dir.path(), &args);
    let graph: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r/graph_nts_0.json")).unwrap()).unwrap();
    let n_nodes = graph["nodes"].as_array().unwrap().len();
    let n_ghosts = graph["ghosts"].as_array().unwrap().len();
    let n_edges = graph["edges"].as_array().unwrap().len();

    let svg = ok(dir.path(), &["render", "--trajectory", "r/trajectory_nts_0.json", "--graph", "r/graph_nts_0.json"]);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("class=\"node\"").count(), n_nodes);
    assert_eq!(svg.matches("class=\"ghost\"").count(), n_ghosts);
    assert_eq!(svg.matches("class=\"edge\"").count(), n_edges);
    assert_eq!(svg, ok(dir.path(), &["render", "--trajectory", "r/trajectory_nts_0.json", "--graph", "r/graph_nts_0.json"]));

    let map_only = ok(dir.path(), &["render", "--floorplans", "1", "--map-seed", "0"]);
    assert_eq!(map_only.matches("<polyline").count(), 0);

    let out = toponav(
        dir.path(),
        &["render", "--graph", "r/graph_nts_0.json", "--floorplans", "1", "--map-seed", "99"],
    );
    assert_eq!(code(&out), 3);
}
