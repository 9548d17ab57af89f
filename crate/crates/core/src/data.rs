//! Task data: synthetic task generators, local-variation extraction, voxel
//! resampling to a uniform pose cloud, and the trajectory / cloud CSV formats.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::chain::{sagittal_normal, ArmSide};
use crate::error::{Error, Result};
use crate::se3::{Pose, Rotation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskLabel {
    PickPlace,
    Suturing,
    Cutting,
    PathTracking,
}

impl TaskLabel {
    pub const ALL: [TaskLabel; 4] = [
        TaskLabel::PickPlace,
        TaskLabel::Suturing,
        TaskLabel::Cutting,
        TaskLabel::PathTracking,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskLabel::PickPlace => "pick_place",
            TaskLabel::Suturing => "suturing",
            TaskLabel::Cutting => "cutting",
            TaskLabel::PathTracking => "path_tracking",
        }
    }
}

impl fmt::Display for TaskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TaskLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub left: Pose,
    pub right: Pose,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawTrajectory {
    pub samples: Vec<TrajectorySample>,
    pub label: Option<TaskLabel>,
}

impl RawTrajectory {
    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < 2 {
            return Err(Error::InvalidInput("trajectory needs at least 2 samples".into()));
        }
        if self.samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::InvalidInput("timestamps must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn stream(&self, side: ArmSide) -> Vec<Pose> {
        self.samples
            .iter()
            .map(|s| match side {
                ArmSide::Left => s.left,
                ArmSide::Right => s.right,
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CloudSample {
    pub pose: Pose,
    pub weight: f64,
    /// Which arm stream the sample came from (right-arm data is already mirrored).
    pub arm: ArmSide,
}

/// Local pose samples in a common anchor frame, with weights summing to one.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PoseCloud {
    pub samples: Vec<CloudSample>,
    pub tasks: BTreeSet<TaskLabel>,
}

impl PoseCloud {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn poses(&self) -> impl Iterator<Item = &Pose> {
        self.samples.iter().map(|s| &s.pose)
    }

    pub fn mean_translation(&self) -> Vector3<f64> {
        if self.is_empty() {
            return Vector3::zeros();
        }
        self.poses().map(|p| p.translation).sum::<Vector3<f64>>() / self.len() as f64
    }

    /// Concatenates clouds and resets the weights to uniform.
    pub fn merged<'a, I: IntoIterator<Item = &'a PoseCloud>>(clouds: I) -> PoseCloud {
        let mut out = PoseCloud::default();
        for c in clouds {
            out.samples.extend(c.samples.iter().copied());
            out.tasks.extend(c.tasks.iter().copied());
        }
        out.set_uniform_weights();
        out
    }

    pub fn set_uniform_weights(&mut self) {
        let w = 1.0 / self.len().max(1) as f64;
        for s in self.samples.iter_mut() {
            s.weight = w;
        }
    }

    /// Deterministic evenly-strided subset of at most `count` samples.
    pub fn subsampled(&self, count: usize) -> PoseCloud {
        if count >= self.len() {
            return self.clone();
        }
        let stride = self.len() as f64 / count as f64;
        let mut out = PoseCloud {
            samples: (0..count).map(|i| self.samples[(i as f64 * stride) as usize]).collect(),
            tasks: self.tasks.clone(),
        };
        out.set_uniform_weights();
        out
    }
}

/// Chordal mean of rotations: projection of the arithmetic matrix mean onto SO(3).
pub fn chordal_mean<'a, I: IntoIterator<Item = &'a Rotation>>(rotations: I) -> Rotation {
    let sum: Matrix3<f64> = rotations.into_iter().map(|r| *r.matrix()).sum();
    Rotation::from_matrix_projected(&sum)
}

/// Re-expresses every sample relative to the mean pose of the time window
/// centred on it (shifted inward at the trajectory ends), pools the left stream
/// with the mirrored right stream, and removes the global mean translation.
pub fn extract_local_variation(traj: &RawTrajectory, window: f64) -> Result<PoseCloud> {
    traj.validate()?;
    if !(window > 0.0) {
        return Err(Error::InvalidInput("window must be positive".into()));
    }
    let n = traj.samples.len();
    let interval = traj.duration() / (n - 1) as f64;
    if window < interval {
        return Err(Error::EmptyWindow { window, interval });
    }
    let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let bounds: Vec<(usize, usize)> = times.iter().map(|&t| window_bounds(&times, t, window)).collect();

    let mut samples = Vec::with_capacity(2 * n);
    for side in [ArmSide::Left, ArmSide::Right] {
        let stream: Vec<Pose> = match side {
            ArmSide::Left => traj.stream(side),
            ArmSide::Right => traj.stream(side).iter().map(|p| p.reflected(&sagittal_normal())).collect(),
        };
        // prefix sums make each window mean O(1)
        let mut ps = vec![Vector3::zeros(); n + 1];
        let mut rs = vec![Matrix3::zeros(); n + 1];
        for (i, p) in stream.iter().enumerate() {
            ps[i + 1] = ps[i] + p.translation;
            rs[i + 1] = rs[i] + p.rotation.matrix();
        }
        for (i, p) in stream.iter().enumerate() {
            let (lo, hi) = bounds[i];
            let count = (hi - lo) as f64;
            let mean = Pose::new(
                Rotation::from_matrix_projected(&((rs[hi] - rs[lo]) / count)),
                (ps[hi] - ps[lo]) / count,
            );
            samples.push(CloudSample {
                pose: mean.inverse() * *p,
                weight: 0.0,
                arm: side,
            });
        }
    }
    let mut cloud = PoseCloud {
        samples,
        tasks: traj.label.into_iter().collect(),
    };
    let mean = cloud.mean_translation();
    for s in cloud.samples.iter_mut() {
        s.pose.translation -= mean;
    }
    cloud.set_uniform_weights();
    Ok(cloud)
}

/// Half-open index range of samples inside the window of length `window`
/// centred at `t`, shifted to lie inside the recorded time span.
fn window_bounds(times: &[f64], t: f64, window: f64) -> (usize, usize) {
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let mut lo = t - 0.5 * window;
    let mut hi = t + 0.5 * window;
    if lo < t0 {
        hi += t0 - lo;
        lo = t0;
    }
    if hi > t1 {
        lo -= hi - t1;
        hi = t1;
    }
    lo = lo.max(t0);
    let eps = 1e-9 * window;
    let a = times.partition_point(|&x| x < lo - eps);
    let b = times.partition_point(|&x| x <= hi + eps);
    (a, b.max(a + 1))
}

type VoxelKey = (i64, i64, i64);

fn voxel_key(p: &Vector3<f64>, cell: f64) -> VoxelKey {
    (
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    )
}

fn voxelize(cloud: &PoseCloud, cell: f64) -> BTreeMap<VoxelKey, Vec<usize>> {
    let mut voxels: BTreeMap<VoxelKey, Vec<usize>> = BTreeMap::new();
    for (i, s) in cloud.samples.iter().enumerate() {
        voxels.entry(voxel_key(&s.pose.translation, cell)).or_default().push(i);
    }
    voxels
}

/// Max/min sample count over occupied voxels of side `cell`.
pub fn occupancy_ratio(cloud: &PoseCloud, cell: f64) -> f64 {
    let voxels = voxelize(cloud, cell);
    let max = voxels.values().map(Vec::len).max().unwrap_or(0);
    let min = voxels.values().map(Vec::len).min().unwrap_or(0);
    if min == 0 {
        return f64::INFINITY;
    }
    max as f64 / min as f64
}

/// Voxelizes the translations at `grid_cell` and draws an equal share of
/// `target_count` from every occupied voxel (the remainder going to randomly
/// chosen voxels), sampling without replacement while a voxel has enough
/// members and with replacement beyond that.
pub fn cluster_resample(cloud: &PoseCloud, grid_cell: f64, target_count: usize, rng_seed: u64) -> Result<PoseCloud> {
    if cloud.is_empty() {
        return Err(Error::InvalidInput("cannot resample an empty cloud".into()));
    }
    if !(grid_cell > 0.0) {
        return Err(Error::InvalidInput("grid cell must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let voxels: Vec<Vec<usize>> = voxelize(cloud, grid_cell).into_values().collect();
    let v = voxels.len();
    let base = target_count / v;
    let mut extra: Vec<usize> = (0..v).collect();
    extra.shuffle(&mut rng);
    let mut share = vec![base; v];
    for &i in extra.iter().take(target_count % v) {
        share[i] += 1;
    }
    let mut samples = Vec::with_capacity(target_count);
    for (members, &k) in voxels.iter().zip(share.iter()) {
        let mut pool = members.clone();
        let take = k.min(pool.len());
        let (chosen, _) = pool.partial_shuffle(&mut rng, take);
        let mut picked: Vec<usize> = chosen.to_vec();
        for _ in take..k {
            picked.push(members[rng.random_range(0..members.len())]);
        }
        samples.extend(picked.into_iter().map(|i| cloud.samples[i]));
    }
    let mut out = PoseCloud {
        samples,
        tasks: cloud.tasks.clone(),
    };
    out.set_uniform_weights();
    Ok(out)
}

/// Settings for the synthetic task generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorSettings {
    /// Recording length (s).
    pub duration: f64,
    /// Sampling rate (Hz).
    pub rate: f64,
    /// Std of additive position noise (m).
    pub noise_std: f64,
    /// Speed of the slow gross-positioning drift (m/s).
    pub drift_speed: f64,
    /// Nominal left tool position in the world frame (m); the right one is mirrored.
    pub left_center: [f64; 3],
}

impl Default for GeneratorSettings {
    fn default() -> Self {
        GeneratorSettings {
            duration: 20.0,
            rate: 50.0,
            noise_std: 1e-4,
            drift_speed: 2e-4,
            left_center: [0.6, 0.1, 0.5],
        }
    }
}

/// Per-stream randomized motion parameters.
struct Motion {
    label: TaskLabel,
    phase: f64,
    freq_scale: f64,
    waypoints: Vec<(Vector3<f64>, Vector3<f64>)>,
    drift_dir: Vector3<f64>,
}

const HOP_SECONDS: f64 = 1.0;

impl Motion {
    fn new(label: TaskLabel, settings: &GeneratorSettings, rng: &mut ChaCha8Rng) -> Self {
        let hops = (settings.duration / HOP_SECONDS).ceil() as usize + 2;
        let waypoints = (0..hops)
            .map(|_| {
                let p = Vector3::from_fn(|_, _| rng.random_range(-0.05..0.05));
                let r = Vector3::from_fn(|_, _| rng.random_range(-0.1..0.1));
                (p, r)
            })
            .collect();
        let d: Vector3<f64> = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        Motion {
            label,
            phase: rng.random_range(0.0..2.0 * PI),
            freq_scale: rng.random_range(0.9..1.1),
            waypoints,
            drift_dir: d / d.norm().max(1e-9),
        }
    }

    /// Local tool pose about the nominal centre at time `t`.
    fn pose(&self, t: f64) -> Pose {
        let f = self.freq_scale;
        match self.label {
            TaskLabel::PickPlace => {
                let k = (t / HOP_SECONDS).floor() as usize;
                let u = t / HOP_SECONDS - k as f64;
                let s = u * u * (3.0 - 2.0 * u);
                let (p0, r0) = self.waypoints[k];
                let (p1, r1) = self.waypoints[k + 1];
                Pose::new(Rotation::exp(&(r0 + (r1 - r0) * s)), p0 + (p1 - p0) * s)
            }
            TaskLabel::Suturing => {
                // needle-driving sweeps of +-60 deg about a slowly precessing tool axis
                let prec = 2.0 * PI * t / 15.0 + self.phase;
                let axis = Vector3::new(0.3 * prec.sin(), 0.3 * prec.cos(), 1.0).normalize();
                let sweep = (60.0f64).to_radians() * (2.0 * PI * f * t / 2.5).sin();
                let w = 2.0 * PI * f * t / 4.0 + self.phase;
                let p = Vector3::new(0.006 * w.cos(), 0.006 * w.sin(), 0.002 * (2.0 * w).sin());
                Pose::new(Rotation::from_axis_angle(&axis, sweep), p)
            }
            TaskLabel::Cutting => {
                // elliptic planar path, heading along the tangent, fixed pitch
                let w = 2.0 * PI * f * t / 5.0 + self.phase;
                let p = Vector3::new(0.03 * w.cos(), 0.015 * w.sin(), 0.0);
                let heading = (0.015 * w.cos()).atan2(-0.03 * w.sin());
                let r = Rotation::from_axis_angle(&Vector3::z(), heading)
                    * Rotation::from_axis_angle(&Vector3::y(), (35.0f64).to_radians());
                Pose::new(r, p)
            }
            TaskLabel::PathTracking => {
                let w = 2.0 * PI * f * t / 12.0;
                let a = 0.015;
                let p = Vector3::new(a * (3.0 * w + self.phase).sin(), a * (2.0 * w).sin(), a * w.sin());
                let tangent = Vector3::new(3.0 * (3.0 * w + self.phase).cos(), 2.0 * (2.0 * w).cos(), w.cos());
                Pose::new(tangent_frame(&tangent), p)
            }
        }
    }
}

/// Frame with x along `tangent` and z as close to world z as possible.
fn tangent_frame(tangent: &Vector3<f64>) -> Rotation {
    let x = tangent.normalize();
    let mut up = Vector3::z();
    if x.dot(&up).abs() > 0.99 {
        up = Vector3::y();
    }
    let z = (up - x * x.dot(&up)).normalize();
    let y = z.cross(&x);
    Rotation::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]))
}

/// Deterministic synthetic recording of one task class for both arms.
///
/// Class profiles: pick_place hops between random waypoints in a 10 cm cube
/// with small orientation changes; suturing sweeps +-60 deg about a moving tool
/// axis within a 2 cm cube; cutting follows a planar ellipse at fixed pitch;
/// path_tracking follows a 3-D Lissajous curve in a 3 cm cube with
/// tangent-aligned orientation.
pub fn synthesize_task(label: TaskLabel, settings: &GeneratorSettings, rng_seed: u64) -> Result<RawTrajectory> {
    if !(settings.duration > 0.0 && settings.rate > 0.0 && settings.noise_std >= 0.0) {
        return Err(Error::InvalidInput("generator settings must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let left = Motion::new(label, settings, &mut rng);
    let right = Motion::new(label, settings, &mut rng);
    let noise = Normal::new(0.0, settings.noise_std).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let center = Vector3::from(settings.left_center);
    let n = (settings.duration * settings.rate).round() as usize + 1;
    let s = crate::se3::reflection_matrix(&sagittal_normal());
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / settings.rate;
        let mut stream = |m: &Motion| {
            let local = m.pose(t);
            let jitter = Vector3::from_fn(|_, _| noise.sample(&mut rng));
            Pose::new(
                local.rotation,
                center + local.translation + m.drift_dir * settings.drift_speed * t + jitter,
            )
        };
        let l = stream(&left);
        let r_unmirrored = stream(&right);
        let r = Pose::new(
            Rotation::from_matrix_unchecked(s * r_unmirrored.rotation.matrix() * s),
            s * r_unmirrored.translation,
        );
        samples.push(TrajectorySample { t, left: l, right: r });
    }
    Ok(RawTrajectory {
        samples,
        label: Some(label),
    })
}

/// Largest per-axis range of a set of positions (m).
pub fn translation_extent<'a, I: IntoIterator<Item = &'a Pose>>(poses: I) -> f64 {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in poses {
        lo = lo.inf(&p.translation);
        hi = hi.sup(&p.translation);
    }
    (hi - lo).max()
}

pub fn quaternion_of(r: &Rotation) -> UnitQuaternion<f64> {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r.matrix()));
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

pub fn rotation_of(qw: f64, qx: f64, qy: f64, qz: f64) -> Result<Rotation> {
    let q = Quaternion::new(qw, qx, qy, qz);
    if !(q.norm() > 1e-9) {
        return Err(Error::Parse("zero quaternion".into()));
    }
    let uq = UnitQuaternion::from_quaternion(q);
    Ok(Rotation::from_matrix_unchecked(*uq.to_rotation_matrix().matrix()))
}

fn pose_fields(p: &Pose) -> [String; 7] {
    let q = quaternion_of(&p.rotation);
    [
        p.translation.x.to_string(),
        p.translation.y.to_string(),
        p.translation.z.to_string(),
        q.w.to_string(),
        q.i.to_string(),
        q.j.to_string(),
        q.k.to_string(),
    ]
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: bad number `{s}`")))
}

fn parse_arm(s: &str, line: usize) -> Result<ArmSide> {
    match s.trim() {
        "L" => Ok(ArmSide::Left),
        "R" => Ok(ArmSide::Right),
        other => Err(Error::Parse(format!("line {line}: bad arm `{other}`"))),
    }
}

fn parse_pose(rec: &csv::StringRecord, offset: usize, line: usize) -> Result<Pose> {
    let v: Vec<f64> = (offset..offset + 7)
        .map(|i| parse_f64(rec.get(i).unwrap_or(""), line))
        .collect::<Result<_>>()?;
    Ok(Pose::new(rotation_of(v[3], v[4], v[5], v[6])?, Vector3::new(v[0], v[1], v[2])))
}

pub const TRAJECTORY_HEADER: [&str; 9] = ["t", "arm", "x", "y", "z", "qw", "qx", "qy", "qz"];
pub const CLOUD_HEADER: [&str; 9] = ["arm", "x", "y", "z", "qw", "qx", "qy", "qz", "weight"];

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let h = rdr.headers()?;
    if h.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse(format!("expected header `{}`", expected.join(","))));
    }
    Ok(())
}

/// Writes `t,arm,x,y,z,qw,qx,qy,qz`, one L and one R row per timestamp.
pub fn write_trajectory_csv<W: Write>(traj: &RawTrajectory, w: W) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(TRAJECTORY_HEADER)?;
    for s in &traj.samples {
        for (side, pose) in [(ArmSide::Left, &s.left), (ArmSide::Right, &s.right)] {
            let mut rec = vec![s.t.to_string(), side.code().to_string()];
            rec.extend(pose_fields(pose));
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(r: R, label: Option<TaskLabel>) -> Result<RawTrajectory> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    check_header(&mut rdr, &TRAJECTORY_HEADER)?;
    let mut rows: BTreeMap<u64, (f64, Option<Pose>, Option<Pose>)> = BTreeMap::new();
    let mut order = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let t = parse_f64(rec.get(0).unwrap_or(""), line)?;
        let arm = parse_arm(rec.get(1).unwrap_or(""), line)?;
        let pose = parse_pose(&rec, 2, line)?;
        let entry = rows.entry(t.to_bits()).or_insert_with(|| {
            order.push(t.to_bits());
            (t, None, None)
        });
        match arm {
            ArmSide::Left => entry.1 = Some(pose),
            ArmSide::Right => entry.2 = Some(pose),
        }
    }
    let mut samples = Vec::with_capacity(order.len());
    for key in order {
        let (t, l, r) = rows[&key];
        match (l, r) {
            (Some(left), Some(right)) => samples.push(TrajectorySample { t, left, right }),
            _ => return Err(Error::Parse(format!("timestamp {t} lacks an L or R row"))),
        }
    }
    let traj = RawTrajectory { samples, label };
    traj.validate()?;
    Ok(traj)
}

/// Writes `arm,x,y,z,qw,qx,qy,qz,weight`.
pub fn write_cloud_csv<W: Write>(cloud: &PoseCloud, w: W) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(CLOUD_HEADER)?;
    for s in &cloud.samples {
        let mut rec = vec![s.arm.code().to_string()];
        rec.extend(pose_fields(&s.pose));
        rec.push(s.weight.to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_cloud_csv<R: Read>(r: R, tasks: BTreeSet<TaskLabel>) -> Result<PoseCloud> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    check_header(&mut rdr, &CLOUD_HEADER)?;
    let mut samples = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        samples.push(CloudSample {
            arm: parse_arm(rec.get(0).unwrap_or(""), line)?,
            pose: parse_pose(&rec, 1, line)?,
            weight: parse_f64(rec.get(8).unwrap_or(""), line)?,
        });
    }
    Ok(PoseCloud { samples, tasks })
}

/// Full preprocessing: local variation extraction followed by uniform resampling.
pub fn preprocess(traj: &RawTrajectory, settings: &PreprocessSettings, rng_seed: u64) -> Result<PoseCloud> {
    let local = extract_local_variation(traj, settings.window)?;
    cluster_resample(&local, settings.grid_cell, settings.target_count, rng_seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessSettings {
    /// Local-variation window (s).
    pub window: f64,
    /// Voxel side for resampling (m).
    pub grid_cell: f64,
    pub target_count: usize,
}

impl Default for PreprocessSettings {
    fn default() -> Self {
        PreprocessSettings {
            window: 2.0,
            grid_cell: 0.005,
            target_count: 500,
        }
    }
}
