use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bimorph_cli::RunConfig;
use bimorph_core::data::read_trajectory_csv;
use bimorph_core::DesignVector;

const SMALL: &str = r#"
seed = 5
[generator]
duration = 6.0
[preprocess]
target_count = 60
[anneal]
max_iters = 5
[transition.simulation]
duration = 0.3
"#;

fn bimorph(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bimorph"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs a command that must succeed and returns its run directory.
fn ok(dir: &Path, args: &[&str]) -> PathBuf {
    let out = bimorph(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    dir.join(String::from_utf8(out.stdout).unwrap().trim())
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn generate_writes_one_parseable_file_per_task() {
    let ws = workspace();
    let run = ok(ws.path(), &["--config", "small.toml", "generate"]);
    let files = csv_files(&run);
    let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["cutting.csv", "path_tracking.csv", "pick_place.csv", "suturing.csv"]);
    for f in &files {
        let traj = read_trajectory_csv(std::fs::File::open(f).unwrap(), None).unwrap();
        assert_eq!(traj.samples.len(), 301);
    }
    let args: Vec<String> = ["--config", "small.toml", "preprocess"]
        .into_iter()
        .map(String::from)
        .chain(files.iter().map(|f| f.display().to_string()))
        .collect();
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    let pre = ok(ws.path(), &argv);
    let cloud = std::fs::read_to_string(pre.join("cloud.csv")).unwrap();
    assert_eq!(cloud.lines().count(), 61);
}

#[test]
fn generate_single_task() {
    let ws = workspace();
    let run = ok(ws.path(), &["--config", "small.toml", "--task", "cutting", "generate"]);
    assert_eq!(csv_files(&run).len(), 1);
}

/// Quaternion rows `(w, x, y, z)` of one arm, read without the library.
fn quaternions(path: &Path, arm: &str) -> Vec<[f64; 4]> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .filter_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1] == arm).then(|| [5, 6, 7, 8].map(|i| f[i].parse::<f64>().unwrap()))
        })
        .collect()
}

#[test]
fn suturing_sweeps_at_least_100_degrees() {
    let ws = workspace();
    let run = ok(ws.path(), &["--config", "small.toml", "--task", "suturing", "generate"]);
    let q = quaternions(&run.join("suturing.csv"), "L");
    let mut sweep: f64 = 0.0;
    for a in q.iter().step_by(3) {
        for b in q.iter().step_by(3) {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().abs().min(1.0);
            sweep = sweep.max(2.0 * dot.acos());
        }
    }
    assert!(sweep.to_degrees() >= 100.0, "{}", sweep.to_degrees());
}

fn pipeline_to_cloud(ws: &Path) -> PathBuf {
    let gen = ok(ws, &["--config", "small.toml", "--task", "pick_place", "generate"]);
    let traj = gen.join("pick_place.csv");
    ok(ws, &["--config", "small.toml", "preprocess", traj.to_str().unwrap()]).join("cloud.csv")
}

#[test]
fn zero_iterations_echo_the_initial_design() {
    let ws = workspace();
    let cloud = pipeline_to_cloud(ws.path());
    let cfg = SMALL.replace("max_iters = 5", "max_iters = 0");
    std::fs::write(ws.path().join("zero.toml"), cfg).unwrap();
    let run = ok(ws.path(), &["--config", "zero.toml", "optimize", cloud.to_str().unwrap()]);
    let sys = bimorph_cli::commands::load_design(&run.join("design.toml")).unwrap();
    let expected = DesignVector::anthropomorphic().arm_chain(sys.tool_offset);
    for (a, b) in sys.arm.joints.iter().zip(&expected.joints) {
        assert!((a.axis - b.axis).norm() < 1e-15);
        assert_eq!(a.point, b.point);
    }
    let trace = std::fs::read_to_string(run.join("anneal_trace.csv")).unwrap();
    assert_eq!(trace, "iter,cost,accepted,temperature,best_cost\n");
}

#[test]
fn best_cost_column_is_non_increasing() {
    let ws = workspace();
    let cloud = pipeline_to_cloud(ws.path());
    let run = ok(ws.path(), &["--config", "small.toml", "optimize", cloud.to_str().unwrap()]);
    let best: Vec<f64> = std::fs::read_to_string(run.join("anneal_trace.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(best.len(), 5);
    assert!(best.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn compare_same_design_twice_gives_identical_reports() {
    let ws = workspace();
    let cloud = pipeline_to_cloud(ws.path());
    let opt = ok(ws.path(), &["--config", "small.toml", "optimize", cloud.to_str().unwrap()]);
    let design = opt.join("design.toml");
    let d = design.to_str().unwrap();
    let run = ok(
        ws.path(),
        &["--config", "small.toml", "compare", "--design", d, "--design", d, "--cloud", cloud.to_str().unwrap()],
    );
    let a = std::fs::read(run.join("dexterity_0_0.csv")).unwrap();
    let b = std::fs::read(run.join("dexterity_1_0.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        std::fs::read(run.join("design0_motion_informed.csv")).unwrap(),
        std::fs::read(run.join("design1_motion_informed.csv")).unwrap()
    );
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(run.join("report.json")).unwrap()).unwrap();
    assert!(report["transitions"][0][1]["std_ratio"].is_number());
}

#[test]
fn simulate_single_mode() {
    let ws = workspace();
    let cloud = pipeline_to_cloud(ws.path());
    let opt = ok(ws.path(), &["--config", "small.toml", "optimize", cloud.to_str().unwrap()]);
    let run = ok(
        ws.path(),
        &["--config", "small.toml", "--informed", "true", "simulate", opt.join("design.toml").to_str().unwrap()],
    );
    assert_eq!(csv_files(&run).len(), 1);
    assert!(run.join("motion_informed.csv").exists());
    let eval = ok(
        ws.path(),
        &["--config", "small.toml", "evaluate", opt.join("design.toml").to_str().unwrap(), cloud.to_str().unwrap()],
    );
    let rows = std::fs::read_to_string(eval.join("dexterity.csv")).unwrap().lines().count();
    assert_eq!(rows, 61);
}

#[test]
fn resolved_config_is_archived_with_overrides() {
    let ws = workspace();
    let run = ok(ws.path(), &["--config", "small.toml", "--seed", "42", "--task", "cutting", "generate"]);
    let cfg: RunConfig = toml::from_str(&std::fs::read_to_string(run.join("config.toml")).unwrap()).unwrap();
    assert_eq!(cfg.seed, 42);
    assert_eq!(cfg.anneal.rng_seed, 42);
    assert_eq!(cfg.generator.duration, 6.0);
}

#[test]
fn reruns_never_overwrite() {
    let ws = workspace();
    let a = ok(ws.path(), &["--config", "small.toml", "--task", "cutting", "generate"]);
    let b = ok(ws.path(), &["--config", "small.toml", "--task", "cutting", "generate"]);
    assert_ne!(a, b);
}

#[test]
fn exit_codes() {
    let ws = workspace();
    let p = ws.path();
    std::fs::write(p.join("unknown.toml"), "colour = 1\n").unwrap();
    assert_eq!(bimorph(p, &["--config", "unknown.toml", "generate"]).status.code(), Some(2));
    std::fs::write(p.join("bad.toml"), "[anneal]\ndecay_rate = 2.0\n").unwrap();
    assert_eq!(bimorph(p, &["--config", "bad.toml", "generate"]).status.code(), Some(2));
    assert_eq!(bimorph(p, &["--task", "juggling", "generate"]).status.code(), Some(2));
    assert_eq!(bimorph(p, &["--config", "missing.toml", "generate"]).status.code(), Some(4));
    assert_eq!(bimorph(p, &["evaluate", "nope.toml", "nope.csv"]).status.code(), Some(4));
    std::fs::write(p.join("garbage.csv"), "t,arm\n1,Q\n").unwrap();
    assert_eq!(bimorph(p, &["preprocess", "garbage.csv"]).status.code(), Some(4));
}

#[test]
fn shipped_default_config_matches_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), RunConfig::default());
}
