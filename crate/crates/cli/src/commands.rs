use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use bimorph_core::chain::ChainDesign;
use bimorph_core::data::{
    cluster_resample, extract_local_variation, read_cloud_csv, read_trajectory_csv, synthesize_task, write_cloud_csv,
    write_trajectory_csv,
};
use bimorph_core::design::{anneal, DesignFile};
use bimorph_core::dexterity::{evaluate_cloud, jointly_normalized, DexterityReport, NormalizationBounds};
use bimorph_core::motion::{simulate_transition, MotionTrace};
use bimorph_core::se3::{Pose, Rotation};
use bimorph_core::{BilateralDesign, DesignVector, PoseCloud, TaskLabel};
use nalgebra::Vector3;
use serde::Serialize;

use crate::{CliError, RunConfig};

/// Creates `<parent>/<command>-<UTC timestamp>`, suffixed with a counter if
/// that directory already exists.
pub fn create_run_dir(parent: &Path, command: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let base = format!("{command}-{stamp}");
    for n in 0.. {
        let name = if n == 0 { base.clone() } else { format!("{base}-{n}") };
        let dir = parent.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(CliError::Io(format!("{}: {e}", dir.display()))),
        }
    }
    unreachable!()
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Two whitespace-separated columns, one point per line.
fn write_series(path: &Path, xs: impl IntoIterator<Item = f64>, ys: impl IntoIterator<Item = f64>) -> Result<(), CliError> {
    let mut s = String::new();
    for (x, y) in xs.into_iter().zip(ys) {
        s.push_str(&format!("{x} {y}\n"));
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn load_design(path: &Path) -> Result<BilateralDesign, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let file: DesignFile = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(file.to_system(ChainDesign::default_positioner())?)
}

fn load_cloud(path: &Path) -> Result<PoseCloud, CliError> {
    let tasks = stem(path).parse::<TaskLabel>().into_iter().collect::<BTreeSet<_>>();
    Ok(read_cloud_csv(open(path)?, tasks)?)
}

pub fn generate(config: &RunConfig, task: Option<TaskLabel>, dir: &Path) -> Result<(), CliError> {
    for (i, label) in TaskLabel::ALL.into_iter().enumerate() {
        if task.is_some_and(|t| t != label) {
            continue;
        }
        let traj = synthesize_task(label, &config.generator, config.seed.wrapping_add(i as u64))?;
        write_trajectory_csv(&traj, create(&dir.join(format!("{label}.csv")))?)?;
    }
    Ok(())
}

/// Pools the local variations of every trajectory (labelled by `--task` or
/// the file name) and resamples them into `cloud.csv`.
pub fn preprocess(config: &RunConfig, task: Option<TaskLabel>, inputs: &[PathBuf], dir: &Path) -> Result<(), CliError> {
    let mut clouds = Vec::with_capacity(inputs.len());
    for path in inputs {
        let label = task.or_else(|| stem(path).parse().ok());
        let traj = read_trajectory_csv(open(path)?, label)?;
        clouds.push(extract_local_variation(&traj, config.preprocess.window)?);
    }
    let pooled = PoseCloud::merged(&clouds);
    let cloud = cluster_resample(&pooled, config.preprocess.grid_cell, config.preprocess.target_count, config.seed)?;
    write_cloud_csv(&cloud, create(&dir.join("cloud.csv"))?)?;
    Ok(())
}

pub fn optimize(config: &RunConfig, inputs: &[PathBuf], dir: &Path) -> Result<(), CliError> {
    let clouds = inputs.iter().map(|p| load_cloud(p)).collect::<Result<Vec<_>, _>>()?;
    let cloud = PoseCloud::merged(&clouds);
    let initial = match &config.design.initial {
        Some(path) => DesignVector::from_chain(&load_design(path)?.arm, Vector3::from(config.design.base_offset))?,
        None => DesignVector {
            base_offset: Vector3::from(config.design.base_offset),
            ..DesignVector::anthropomorphic()
        },
    };
    let (best, trace) = anneal(&initial, &cloud, &config.anneal)?;
    let sys = best.to_system(
        config.anneal.cost.tool_offset(),
        config.design.center_distance,
        ChainDesign::default_positioner(),
    );
    let file = DesignFile::from_system(&sys, Some(trace.best_cost()));
    std::fs::write(dir.join("design.toml"), toml::to_string(&file).map_err(|e| CliError::Io(e.to_string()))?)?;
    std::fs::write(dir.join("anneal_trace.csv"), trace.to_csv())?;
    write_series(
        &dir.join("anneal_best_cost.dat"),
        trace.steps.iter().map(|s| s.iter as f64),
        trace.steps.iter().map(|s| s.best_cost),
    )?;
    Ok(())
}

fn transition_poses(config: &RunConfig, sys: &BilateralDesign) -> Result<(Pose, Pose), CliError> {
    let q = bimorph_core::JointVector::from_column_slice(&config.transition.simulation.initial_base);
    let w1 = sys.base_chain.fk(&q)?;
    let rot = Rotation::exp(&Vector3::from(config.transition.rotation));
    let w2 = Pose::new(w1.rotation * rot, w1.translation + Vector3::from(config.transition.displacement));
    Ok((w1, w2))
}

#[derive(Serialize)]
struct TransitionSummary {
    informed: Option<f64>,
    uninformed: Option<f64>,
    /// Informed over uninformed std of the jointly normalized composite.
    std_ratio: Option<f64>,
    tracking_error: f64,
    endpoint_error: f64,
    saturated_steps: usize,
    damped_steps: usize,
}

/// Runs the requested transition modes and writes their traces, normalized
/// on one shared scale, under `prefix`.
fn run_transitions(
    config: &RunConfig,
    sys: &BilateralDesign,
    informed: Option<bool>,
    dir: &Path,
    prefix: &str,
) -> Result<TransitionSummary, CliError> {
    let (w1, w2) = transition_poses(config, sys)?;
    let modes: Vec<bool> = match informed {
        Some(m) => vec![m],
        None => vec![false, true],
    };
    let traces: Vec<(bool, MotionTrace)> = modes
        .into_iter()
        .map(|m| {
            simulate_transition(sys, sys.arm.wrist_point(), &w1, &w2, m, &config.transition.simulation).map(|t| (m, t))
        })
        .collect::<Result<_, _>>()?;
    let bounds = NormalizationBounds::from_points(traces.iter().flat_map(|(_, t)| t.steps.iter().map(|s| &s.dexterity)));
    let mut summary = TransitionSummary {
        informed: None,
        uninformed: None,
        std_ratio: None,
        tracking_error: 0.0,
        endpoint_error: 0.0,
        saturated_steps: 0,
        damped_steps: 0,
    };
    for (mode, trace) in &traces {
        let name = if *mode { "informed" } else { "uninformed" };
        std::fs::write(dir.join(format!("{prefix}motion_{name}.csv")), trace.to_csv(&bounds))?;
        let report = DexterityReport::with_bounds(trace.dexterity(), bounds);
        write_series(
            &dir.join(format!("{prefix}dexterity_{name}.dat")),
            trace.steps.iter().map(|s| s.state.time),
            report.composite.iter().copied(),
        )?;
        let std = report.summary.composite.std;
        if *mode {
            summary.informed = Some(std);
        } else {
            summary.uninformed = Some(std);
        }
        summary.tracking_error = summary.tracking_error.max(trace.tracking_error());
        summary.endpoint_error = summary.endpoint_error.max(trace.endpoint_error());
        summary.saturated_steps += trace.steps.iter().filter(|s| s.saturated).count();
        summary.damped_steps += trace.steps.iter().filter(|s| s.damped).count();
    }
    if let (Some(on), Some(off)) = (summary.informed, summary.uninformed) {
        summary.std_ratio = Some(on / off);
        eprintln!("{prefix}informed/uninformed dexterity std ratio: {:.4}", on / off);
    }
    Ok(summary)
}

pub fn simulate(config: &RunConfig, design: &Path, informed: Option<bool>, dir: &Path) -> Result<(), CliError> {
    let sys = load_design(design)?;
    let summary = run_transitions(config, &sys, informed, dir, "")?;
    write_json(&dir.join("summary.json"), &summary)
}

pub fn evaluate(config: &RunConfig, design: &Path, cloud: &Path, dir: &Path) -> Result<(), CliError> {
    let sys = load_design(design)?;
    let cloud = load_cloud(cloud)?;
    let report = DexterityReport::new(evaluate_cloud(&sys.arm, &cloud, &config.anneal.cost)?);
    std::fs::write(dir.join("dexterity.csv"), report.to_csv())?;
    write_json(&dir.join("dexterity.json"), &report.summary)
}

#[derive(Serialize)]
struct PairSummary {
    design: String,
    cloud: String,
    summary: bimorph_core::dexterity::ReportSummary,
}

#[derive(Serialize)]
struct CompareReport {
    bounds: NormalizationBounds,
    pairs: Vec<PairSummary>,
    transitions: Vec<(String, TransitionSummary)>,
}

pub fn compare(
    config: &RunConfig,
    designs: &[PathBuf],
    clouds: &[PathBuf],
    informed: Option<bool>,
    dir: &Path,
) -> Result<(), CliError> {
    let systems = designs.iter().map(|p| load_design(p)).collect::<Result<Vec<_>, _>>()?;
    let loaded = clouds.iter().map(|p| load_cloud(p)).collect::<Result<Vec<_>, _>>()?;
    let mut raw = Vec::with_capacity(systems.len() * loaded.len());
    for sys in &systems {
        for cloud in &loaded {
            raw.push(evaluate_cloud(&sys.arm, cloud, &config.anneal.cost)?);
        }
    }
    let reports = jointly_normalized(raw);
    let mut pairs = Vec::with_capacity(reports.len());
    for (k, report) in reports.iter().enumerate() {
        let (i, j) = (k / loaded.len(), k % loaded.len());
        std::fs::write(dir.join(format!("dexterity_{i}_{j}.csv")), report.to_csv())?;
        write_series(
            &dir.join(format!("composite_{i}_{j}.dat")),
            (0..report.composite.len()).map(|x| x as f64),
            report.composite.iter().copied(),
        )?;
        eprintln!(
            "design {i} ({}) on cloud {j} ({}): mean composite {:.4}",
            designs[i].display(),
            clouds[j].display(),
            report.summary.composite.mean
        );
        pairs.push(PairSummary {
            design: designs[i].display().to_string(),
            cloud: clouds[j].display().to_string(),
            summary: report.summary.clone(),
        });
    }
    let mut transitions = Vec::with_capacity(systems.len());
    for (i, sys) in systems.iter().enumerate() {
        let summary = run_transitions(config, sys, informed, dir, &format!("design{i}_"))?;
        transitions.push((designs[i].display().to_string(), summary));
    }
    let report = CompareReport {
        bounds: reports.first().map_or(NormalizationBounds::from_points([]), |r| r.bounds),
        pairs,
        transitions,
    };
    write_json(&dir.join("report.json"), &report)
}
