//! Morphology optimization of the symmetric 7-DOF arm by simulated annealing.
//!
//! A candidate morphology is scored by how well, and how smoothly, the arm
//! follows a pose cloud anchored at its own tool home pose: each sample is
//! solved with warm-started differential IK and the cost accumulates the
//! weighted residual twist plus the squared joint jump between consecutive
//! samples.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{BilateralDesign, ChainDesign, JointSpec, JointVector, ARM_DOF};
use crate::data::PoseCloud;
use crate::error::{Error, Result};
use crate::ik::{solve_ik, IkResult, IkSettings};
use crate::se3::Pose;

/// Half-width of the cube (centred on the arm base) holding every axis point.
pub const BOX_HALF_WIDTH: f64 = 0.5;
/// Maximum `|w_i . w_j|` between wrist axes.
pub const WRIST_PARALLEL_LIMIT: f64 = 0.999;
/// Number of distinct axis points (the three wrist joints share the last).
pub const POINT_COUNT: usize = 5;
/// Scalars in a flattened design vector.
pub const DESIGN_DIM: usize = 2 * ARM_DOF + 3 * POINT_COUNT + 3;

/// Optimizer state for one arm morphology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignVector {
    /// Per joint `(polar, azimuth)` of the unit axis direction (rad).
    pub axis_angles: [[f64; 2]; ARM_DOF],
    /// Axis points of joints 1..4 and the shared wrist centre of joints 5..7 (m).
    pub axis_points: [Vector3<f64>; POINT_COUNT],
    /// Offset of the arm base from the positioner flange (m).
    pub base_offset: Vector3<f64>,
}

pub fn spherical_to_unit(polar: f64, azimuth: f64) -> Vector3<f64> {
    let (sp, cp) = polar.sin_cos();
    Vector3::new(sp * azimuth.cos(), sp * azimuth.sin(), cp)
}

pub fn unit_to_spherical(v: &Vector3<f64>) -> [f64; 2] {
    let v = v.normalize();
    [v.z.clamp(-1.0, 1.0).acos(), v.y.atan2(v.x)]
}

/// Folds a polar angle back into `[0, pi]`, adjusting the azimuth so the
/// direction is unchanged.
fn fold_spherical(polar: f64, azimuth: f64) -> [f64; 2] {
    let v = spherical_to_unit(polar, azimuth);
    let p = v.z.clamp(-1.0, 1.0).acos();
    let a = if v.x.hypot(v.y) < 1e-15 {
        azimuth
    } else {
        v.y.atan2(v.x)
    };
    [p, a]
}

impl DesignVector {
    pub fn axis(&self, joint: usize) -> Vector3<f64> {
        let [p, a] = self.axis_angles[joint];
        spherical_to_unit(p, a)
    }

    pub fn point(&self, joint: usize) -> Vector3<f64> {
        self.axis_points[joint.min(POINT_COUNT - 1)]
    }

    pub fn wrist_point(&self) -> Vector3<f64> {
        self.axis_points[POINT_COUNT - 1]
    }

    /// The arm chain in its own base frame, home pose at the wrist centre
    /// plus `tool_offset` with identity orientation.
    pub fn arm_chain(&self, tool_offset: Vector3<f64>) -> ChainDesign {
        let joints = (0..ARM_DOF)
            .map(|i| JointSpec::new(self.axis(i), self.point(i)))
            .collect();
        ChainDesign::new(joints, Pose::from_translation(self.wrist_point() + tool_offset))
    }

    pub fn to_system(&self, tool_offset: Vector3<f64>, center_distance: f64, base_chain: ChainDesign) -> BilateralDesign {
        BilateralDesign {
            arm: self.arm_chain(tool_offset),
            base_offset: self.base_offset,
            center_distance,
            tool_offset,
            base_chain,
        }
    }

    /// Recovers the optimizer state from an arm chain (the wrist must intersect).
    pub fn from_chain(chain: &ChainDesign, base_offset: Vector3<f64>) -> Result<Self> {
        if chain.dof() != ARM_DOF {
            return Err(Error::DimensionMismatch {
                expected: ARM_DOF,
                actual: chain.dof(),
            });
        }
        chain.validate()?;
        let mut axis_angles = [[0.0; 2]; ARM_DOF];
        for (a, j) in axis_angles.iter_mut().zip(chain.joints.iter()) {
            *a = unit_to_spherical(&j.axis);
        }
        let mut axis_points = [Vector3::zeros(); POINT_COUNT];
        for (i, p) in axis_points.iter_mut().enumerate() {
            *p = chain.joints[i].point;
        }
        Ok(DesignVector {
            axis_angles,
            axis_points,
            base_offset,
        })
    }

    /// Checks the wrist, bounding-box, and monotone-reach invariants.
    pub fn validate(&self) -> Result<()> {
        let all_finite = self.to_vec().iter().all(|x| x.is_finite());
        if !all_finite {
            return Err(Error::InvalidDesign("non-finite parameter".into()));
        }
        let w: Vec<Vector3<f64>> = (ARM_DOF - 3..ARM_DOF).map(|i| self.axis(i)).collect();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            if w[i].dot(&w[j]).abs() > WRIST_PARALLEL_LIMIT {
                return Err(Error::InvalidDesign("wrist axes nearly parallel".into()));
            }
        }
        for p in self.axis_points.iter().chain(std::iter::once(&self.base_offset)) {
            if p.amax() > BOX_HALF_WIDTH {
                return Err(Error::InvalidDesign("axis point outside the bounding box".into()));
            }
        }
        for pair in self.axis_points.windows(2) {
            if pair[1].norm() < pair[0].norm() {
                return Err(Error::InvalidDesign("axis points move back toward the base".into()));
            }
        }
        Ok(())
    }

    /// Flattened as 14 angles, 15 point coordinates, 3 base offset coordinates.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(DESIGN_DIM);
        for a in &self.axis_angles {
            v.extend_from_slice(a);
        }
        for p in &self.axis_points {
            v.extend(p.iter());
        }
        v.extend(self.base_offset.iter());
        v
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != DESIGN_DIM {
            return Err(Error::DimensionMismatch {
                expected: DESIGN_DIM,
                actual: v.len(),
            });
        }
        let mut axis_angles = [[0.0; 2]; ARM_DOF];
        for (i, a) in axis_angles.iter_mut().enumerate() {
            *a = [v[2 * i], v[2 * i + 1]];
        }
        let off = 2 * ARM_DOF;
        let mut axis_points = [Vector3::zeros(); POINT_COUNT];
        for (i, p) in axis_points.iter_mut().enumerate() {
            *p = Vector3::new(v[off + 3 * i], v[off + 3 * i + 1], v[off + 3 * i + 2]);
        }
        let b = off + 3 * POINT_COUNT;
        Ok(DesignVector {
            axis_angles,
            axis_points,
            base_offset: Vector3::new(v[b], v[b + 1], v[b + 2]),
        })
    }

    /// Conventional anthropomorphic layout: yaw-pitch-roll shoulder, pitch
    /// elbow, and a roll-pitch-roll style orthogonal wrist, scaled for
    /// small-workspace tasks.
    pub fn anthropomorphic() -> Self {
        let z = [0.0, 0.0];
        let x = [PI / 2.0, 0.0];
        let y = [PI / 2.0, PI / 2.0];
        DesignVector {
            axis_angles: [z, y, x, y, z, y, x],
            axis_points: [
                Vector3::new(0.0, 0.0, 0.02),
                Vector3::new(0.0, 0.0, 0.04),
                Vector3::new(0.06, 0.0, 0.04),
                Vector3::new(0.12, 0.0, 0.04),
                Vector3::new(0.12, 0.0, -0.06),
            ],
            base_offset: Vector3::new(0.1, 0.0, 0.0),
        }
    }

    /// Uniform random axes on the sphere and uniform axis points in the
    /// bounding box (sorted by distance from the base), redrawn until valid.
    pub fn random_feasible<R: Rng>(rng: &mut R, base_offset: Vector3<f64>) -> Self {
        loop {
            let mut axis_angles = [[0.0; 2]; ARM_DOF];
            for a in axis_angles.iter_mut() {
                let u: f64 = rng.random_range(-1.0..1.0);
                *a = [u.acos(), rng.random_range(-PI..PI)];
            }
            let mut pts: Vec<Vector3<f64>> = (0..POINT_COUNT)
                .map(|_| Vector3::from_fn(|_, _| rng.random_range(-BOX_HALF_WIDTH..BOX_HALF_WIDTH)))
                .collect();
            pts.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
            let mut axis_points = [Vector3::zeros(); POINT_COUNT];
            axis_points.copy_from_slice(&pts);
            let d = DesignVector {
                axis_angles,
                axis_points,
                base_offset,
            };
            if d.validate().is_ok() {
                return d;
            }
        }
    }
}

/// How candidates are scored against the pose cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostSettings {
    pub ik: IkSettings,
    /// Diagonal of the residual twist weight, `(w_x, w_y, w_z, v_x, v_y, v_z)`.
    pub w1: [f64; 6],
    /// Weight of the joint-continuity term.
    pub w2: f64,
    /// Tool offset from the wrist centre used for the home pose (m).
    pub tool_offset: [f64; 3],
    /// Seed each sample's IK with the previous sample's solution. When off,
    /// samples are solved from zero and may run in parallel.
    pub warm_start: bool,
}

impl Default for CostSettings {
    fn default() -> Self {
        CostSettings {
            ik: IkSettings {
                max_iters: 50,
                ..IkSettings::default()
            },
            w1: [1.0, 1.0, 1.0, 0.1, 0.1, 0.1],
            w2: 0.01,
            tool_offset: [0.0, 0.0, -0.03],
            warm_start: true,
        }
    }
}

impl CostSettings {
    pub fn tool_offset(&self) -> Vector3<f64> {
        Vector3::from(self.tool_offset)
    }
}

/// Anchors the cloud at the arm's home (wrist centre + tool, home
/// orientation): target `i` is `M * sample_i`.
pub fn anchored_targets(chain: &ChainDesign, cloud: &PoseCloud) -> Vec<Pose> {
    cloud.poses().map(|p| chain.home * *p).collect()
}

/// Per-sample IK solutions along the cloud, in cloud order.
pub fn solve_cloud(chain: &ChainDesign, cloud: &PoseCloud, settings: &CostSettings) -> Result<Vec<IkResult>> {
    let targets = anchored_targets(chain, cloud);
    if settings.warm_start {
        let mut seed = JointVector::zeros(chain.dof());
        let mut out = Vec::with_capacity(targets.len());
        for t in &targets {
            let r = solve_ik(chain, t, &seed, &settings.ik)?;
            seed = r.q.clone();
            out.push(r);
        }
        Ok(out)
    } else {
        let seed = JointVector::zeros(chain.dof());
        targets.par_iter().map(|t| solve_ik(chain, t, &seed, &settings.ik)).collect()
    }
}

/// `sum_i dp_i^T W1 dp_i + W2 |q_i - q_{i-1}|^2`, with `dp_i = 0` for
/// converged samples and no continuity term for the first sample.
pub fn cost_of_solutions(solutions: &[IkResult], settings: &CostSettings) -> f64 {
    let mut cost = 0.0;
    let mut prev: Option<&JointVector> = None;
    for r in solutions {
        if !r.converged {
            let dp = r.residual.to_vector();
            cost += dp.iter().zip(settings.w1.iter()).map(|(x, w)| w * x * x).sum::<f64>();
        }
        if let Some(p) = prev {
            cost += settings.w2 * (&r.q - p).norm_squared();
        }
        prev = Some(&r.q);
    }
    cost
}

/// Design cost against an (unanchored, local) pose cloud. Candidates whose
/// IK turns numerically singular cost `+inf`.
pub fn design_cost(design: &DesignVector, cloud: &PoseCloud, settings: &CostSettings) -> f64 {
    let chain = design.arm_chain(settings.tool_offset());
    match solve_cloud(&chain, cloud, settings) {
        Ok(sol) => cost_of_solutions(&sol, settings),
        Err(_) => f64::INFINITY,
    }
}

/// Standard deviations of the Gaussian perturbation at `temperature == initial_temp`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbScales {
    /// Spherical axis angles (rad).
    pub axis: f64,
    /// Axis point coordinates (m).
    pub point: f64,
    /// Base offset coordinates (m). Zero holds the offset fixed.
    pub base_offset: f64,
}

impl Default for PerturbScales {
    fn default() -> Self {
        PerturbScales {
            axis: 0.3,
            point: 0.02,
            base_offset: 0.0,
        }
    }
}

pub const MAX_REDRAWS: usize = 100;

/// Gaussian move of every parameter group with std `scale * temperature /
/// initial_temp`, redrawn until the design invariants hold.
pub fn perturb<R: Rng>(
    design: &DesignVector,
    temperature: f64,
    initial_temp: f64,
    scales: &PerturbScales,
    rng: &mut R,
) -> Result<DesignVector> {
    if temperature == 0.0 {
        return Ok(design.clone());
    }
    let f = temperature / initial_temp;
    let gauss = |s: f64, rng: &mut R| -> f64 {
        if s == 0.0 {
            0.0
        } else {
            let z: f64 = StandardNormal.sample(rng);
            z * s * f
        }
    };
    for _ in 0..MAX_REDRAWS {
        let mut c = design.clone();
        for a in c.axis_angles.iter_mut() {
            let p = a[0] + gauss(scales.axis, rng);
            let az = a[1] + gauss(scales.axis, rng);
            *a = fold_spherical(p, az);
        }
        for p in c.axis_points.iter_mut() {
            for k in 0..3 {
                p[k] += gauss(scales.point, rng);
            }
        }
        for k in 0..3 {
            c.base_offset[k] += gauss(scales.base_offset, rng);
        }
        if c.validate().is_ok() {
            return Ok(c);
        }
    }
    Err(Error::ConstraintUnsatisfiable(MAX_REDRAWS))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealSettings {
    pub initial_temp: f64,
    /// Per-iteration temperature factor in (0, 1).
    pub decay_rate: f64,
    pub max_iters: usize,
    pub scales: PerturbScales,
    pub rng_seed: u64,
    pub cost: CostSettings,
    /// Stop once the best cost improved by less than `stall_tolerance` over
    /// the last `stall_window` iterations.
    pub stall_window: usize,
    pub stall_tolerance: f64,
}

impl Default for AnnealSettings {
    fn default() -> Self {
        AnnealSettings {
            initial_temp: 1.0,
            decay_rate: 0.997,
            max_iters: 2000,
            scales: PerturbScales::default(),
            rng_seed: 0,
            cost: CostSettings::default(),
            stall_window: 200,
            stall_tolerance: 1e-9,
        }
    }
}

impl AnnealSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_temp > 0.0) {
            return Err(Error::InvalidInput("initial_temp must be positive".into()));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate < 1.0) {
            return Err(Error::InvalidInput("decay_rate must be in (0, 1)".into()));
        }
        if self.cost.w1.iter().any(|w| !(*w > 0.0)) || !(self.cost.w2 >= 0.0) {
            return Err(Error::InvalidInput("W1 must be positive and W2 non-negative".into()));
        }
        self.cost.ik.validate()
    }

    pub fn temperature(&self, iter: usize) -> f64 {
        self.initial_temp * self.decay_rate.powi(iter as i32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealStep {
    pub iter: usize,
    pub cost: f64,
    pub accepted: bool,
    pub temperature: f64,
    pub best_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnealTrace {
    pub initial_cost: f64,
    pub steps: Vec<AnnealStep>,
}

impl AnnealTrace {
    pub fn best_cost(&self) -> f64 {
        self.steps.last().map_or(self.initial_cost, |s| s.best_cost)
    }

    /// `iter,cost,accepted,temperature,best_cost`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,cost,accepted,temperature,best_cost\n");
        for st in &self.steps {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                st.iter, st.cost, st.accepted as u8, st.temperature, st.best_cost
            ));
        }
        s
    }
}

/// Metropolis simulated annealing with exponential cooling. Returns the best
/// design seen, never merely the last accepted one.
pub fn anneal(initial: &DesignVector, cloud: &PoseCloud, settings: &AnnealSettings) -> Result<(DesignVector, AnnealTrace)> {
    settings.validate()?;
    initial.validate()?;
    if cloud.is_empty() {
        return Err(Error::InvalidInput("empty pose cloud".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.rng_seed);
    let mut current = initial.clone();
    let mut current_cost = design_cost(initial, cloud, &settings.cost);
    let mut best = current.clone();
    let mut best_cost = current_cost;
    let mut trace = AnnealTrace {
        initial_cost: current_cost,
        steps: Vec::with_capacity(settings.max_iters),
    };
    for iter in 0..settings.max_iters {
        let temperature = settings.temperature(iter);
        let (candidate, cost) = match perturb(&current, temperature, settings.initial_temp, &settings.scales, &mut rng) {
            Ok(c) => {
                let cost = design_cost(&c, cloud, &settings.cost);
                (Some(c), cost)
            }
            Err(_) => (None, f64::INFINITY),
        };
        let delta = cost - current_cost;
        let accepted = candidate.is_some()
            && (delta < 0.0 || (delta.is_finite() && rng.random::<f64>() < (-delta / temperature).exp()));
        if let Some(c) = candidate {
            if cost < best_cost {
                best = c.clone();
                best_cost = cost;
            }
            if accepted {
                current = c;
                current_cost = cost;
            }
        }
        trace.steps.push(AnnealStep {
            iter,
            cost,
            accepted,
            temperature,
            best_cost,
        });
        if settings.stall_window > 0 && iter + 1 >= settings.stall_window {
            let before = if iter + 1 == settings.stall_window {
                trace.initial_cost
            } else {
                trace.steps[iter - settings.stall_window].best_cost
            };
            if before - best_cost < settings.stall_tolerance {
                break;
            }
        }
    }
    Ok((best, trace))
}

/// Costs of `count` random feasible designs on a cloud, evaluated in parallel.
pub fn random_design_costs(cloud: &PoseCloud, count: usize, seed: u64, settings: &CostSettings) -> Vec<(DesignVector, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = DesignVector::anthropomorphic().base_offset;
    let designs: Vec<DesignVector> = (0..count).map(|_| DesignVector::random_feasible(&mut rng, base)).collect();
    designs
        .into_par_iter()
        .map(|d| {
            let c = design_cost(&d, cloud, settings);
            (d, c)
        })
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Default center distance between the arm bases (m).
pub const DEFAULT_CENTER_DISTANCE: f64 = 0.2;

/// The anthropomorphic arm pair on the default positioner.
pub fn default_system() -> BilateralDesign {
    DesignVector::anthropomorphic().to_system(
        CostSettings::default().tool_offset(),
        DEFAULT_CENTER_DISTANCE,
        ChainDesign::default_positioner(),
    )
}

/// On-disk description of a bilateral design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub joints: Vec<JointEntry>,
    pub base_offset: [f64; 3],
    pub center_distance: f64,
    pub tool_offsets: ToolOffsets,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointEntry {
    pub axis: [f64; 3],
    pub point: [f64; 3],
    pub limits: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolOffsets {
    pub left: [f64; 3],
    pub right: [f64; 3],
}

impl DesignFile {
    pub fn from_system(sys: &BilateralDesign, cost: Option<f64>) -> Self {
        let right = sys.tool_offset(crate::chain::ArmSide::Right);
        DesignFile {
            joints: sys
                .arm
                .joints
                .iter()
                .map(|j| JointEntry {
                    axis: j.axis.into(),
                    point: j.point.into(),
                    limits: [j.limits.0, j.limits.1],
                })
                .collect(),
            base_offset: sys.base_offset.into(),
            center_distance: sys.center_distance,
            tool_offsets: ToolOffsets {
                left: sys.tool_offset.into(),
                right: right.into(),
            },
            cost,
        }
    }

    pub fn to_system(&self, base_chain: ChainDesign) -> Result<BilateralDesign> {
        let joints: Vec<JointSpec> = self
            .joints
            .iter()
            .map(|j| {
                let axis = Vector3::from(j.axis);
                JointSpec::new(axis / axis.norm(), Vector3::from(j.point)).with_limits(j.limits[0], j.limits[1])
            })
            .collect();
        let tool = Vector3::from(self.tool_offsets.left);
        let mirrored = crate::se3::reflection_matrix(&crate::chain::sagittal_normal()) * tool;
        if (mirrored - Vector3::from(self.tool_offsets.right)).norm() > 1e-9 {
            return Err(Error::InvalidDesign("right tool offset must mirror the left".into()));
        }
        let mut arm = ChainDesign::new(joints, Pose::identity());
        if arm.dof() != ARM_DOF {
            return Err(Error::DimensionMismatch {
                expected: ARM_DOF,
                actual: arm.dof(),
            });
        }
        arm.home = Pose::from_translation(arm.wrist_point() + tool);
        let sys = BilateralDesign {
            arm,
            base_offset: Vector3::from(self.base_offset),
            center_distance: self.center_distance,
            tool_offset: tool,
            base_chain,
        };
        sys.validate()?;
        Ok(sys)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ArmSide;
    use crate::data::{cluster_resample, extract_local_variation, synthesize_task, CloudSample, GeneratorSettings, TaskLabel};
    use crate::ik::error_twist;
    use crate::se3::Twist;
    use std::collections::BTreeSet;

    fn small_cloud(n: usize, seed: u64) -> PoseCloud {
        let traj = synthesize_task(TaskLabel::Suturing, &GeneratorSettings::default(), seed).unwrap();
        let local = extract_local_variation(&traj, 2.0).unwrap();
        cluster_resample(&local, 0.005, n, seed).unwrap()
    }

    #[test]
    fn design_vector_has_32_scalars() {
        let d = DesignVector::anthropomorphic();
        assert_eq!(d.to_vec().len(), 32);
        assert_eq!(DesignVector::from_slice(&d.to_vec()).unwrap(), d);
        d.validate().unwrap();
        d.arm_chain(Vector3::zeros()).validate().unwrap();
    }

    #[test]
    fn chain_round_trip() {
        let d = DesignVector::anthropomorphic();
        let back = DesignVector::from_chain(&d.arm_chain(Vector3::zeros()), d.base_offset).unwrap();
        for i in 0..ARM_DOF {
            assert!((back.axis(i) - d.axis(i)).norm() < 1e-12);
        }
        assert_eq!(back.axis_points, d.axis_points);
    }

    #[test]
    fn invariant_violations_are_caught() {
        let mut d = DesignVector::anthropomorphic();
        d.axis_angles[6] = d.axis_angles[5];
        assert!(d.validate().is_err());
        let mut d = DesignVector::anthropomorphic();
        d.axis_points[2] = Vector3::new(0.6, 0.0, 0.0);
        assert!(d.validate().is_err());
        let mut d = DesignVector::anthropomorphic();
        d.axis_points[1] = Vector3::new(0.0, 0.0, 0.1);
        assert!(d.validate().is_err());
    }

    #[test]
    fn anchor_only_cloud_costs_zero() {
        let cloud = PoseCloud {
            samples: vec![CloudSample {
                pose: Pose::identity(),
                weight: 1.0,
                arm: ArmSide::Left,
            }],
            tasks: BTreeSet::new(),
        };
        assert_eq!(design_cost(&DesignVector::anthropomorphic(), &cloud, &CostSettings::default()), 0.0);
    }

    #[test]
    fn converged_cloud_costs_only_continuity() {
        let cloud = small_cloud(20, 1);
        let s = CostSettings {
            ik: IkSettings {
                max_iters: 500,
                ..IkSettings::default()
            },
            ..Default::default()
        };
        let d = DesignVector::anthropomorphic();
        let chain = d.arm_chain(s.tool_offset());
        let sol = solve_cloud(&chain, &cloud, &s).unwrap();
        assert!(sol.iter().all(|r| r.converged));
        let continuity: f64 = sol.windows(2).map(|w| s.w2 * (&w[1].q - &w[0].q).norm_squared()).sum();
        assert_eq!(design_cost(&d, &cloud, &s), continuity);
    }

    #[test]
    fn cost_matches_recomputation() {
        // independent recomputation: FK at each returned q, error twist rebuilt
        // from the 4x4 matrices, residual weighted explicitly
        let cloud = small_cloud(20, 2);
        let s = CostSettings::default();
        let mut d = DesignVector::anthropomorphic();
        d.axis_points[4] = Vector3::new(0.1, 0.02, -0.05);
        let chain = d.arm_chain(s.tool_offset());
        let mut seed = JointVector::zeros(7);
        let mut expected = 0.0;
        let mut prev: Option<JointVector> = None;
        for sample in cloud.poses() {
            let target = chain.home * *sample;
            let r = solve_ik(&chain, &target, &seed, &s.ik).unwrap();
            let reached = chain.fk(&r.q).unwrap();
            let v: Twist = error_twist(&reached, &target);
            if s.ik.error_norm(&v) > s.ik.tolerance {
                let dp = v.to_vector();
                expected += (0..6).map(|k| s.w1[k] * dp[k] * dp[k]).sum::<f64>();
            }
            if let Some(p) = &prev {
                expected += s.w2 * (&r.q - p).norm_squared();
            }
            prev = Some(r.q.clone());
            seed = r.q;
        }
        let got = design_cost(&d, &cloud, &s);
        assert!((got - expected).abs() <= 1e-12 * expected.max(1.0));
    }

    #[test]
    fn zero_temperature_is_identity() {
        let d = DesignVector::anthropomorphic();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(perturb(&d, 0.0, 1.0, &PerturbScales::default(), &mut rng).unwrap(), d);
    }

    #[test]
    fn perturbed_designs_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut d = DesignVector::anthropomorphic();
        for _ in 0..500 {
            d = perturb(&d, 1.0, 1.0, &PerturbScales::default(), &mut rng).unwrap();
            d.validate().unwrap();
            let chain = d.arm_chain(Vector3::zeros());
            assert_eq!(chain.joints[4].point, chain.joints[5].point);
            assert_eq!(chain.joints[4].point, chain.joints[6].point);
        }
    }

    #[test]
    fn perturbation_statistics() {
        // axes on the equator and well separated reaches keep redraws rare
        let mut d = DesignVector::anthropomorphic();
        for (i, a) in d.axis_angles.iter_mut().enumerate() {
            *a = [PI / 2.0 + 0.1 * (i % 2) as f64, 0.8 * i as f64];
        }
        for (i, p) in d.axis_points.iter_mut().enumerate() {
            *p = Vector3::new(0.05 + 0.08 * i as f64, 0.0, 0.0);
        }
        let scales = PerturbScales {
            axis: 0.05,
            point: 0.004,
            base_offset: 0.004,
        };
        let (temp, t0) = (0.5, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let mut acc = vec![0.0; DESIGN_DIM];
        let base = d.to_vec();
        for _ in 0..n {
            let c = perturb(&d, temp, t0, &scales, &mut rng).unwrap().to_vec();
            for k in 0..DESIGN_DIM {
                let mut delta = c[k] - base[k];
                if k < 2 * ARM_DOF {
                    delta = crate::se3::wrap_angle(delta);
                }
                acc[k] += delta * delta;
            }
        }
        for k in 0..DESIGN_DIM {
            let std = (acc[k] / n as f64).sqrt();
            let expected = temp / t0
                * if k < 2 * ARM_DOF {
                    scales.axis
                } else if k < 2 * ARM_DOF + 3 * POINT_COUNT {
                    scales.point
                } else {
                    scales.base_offset
                };
            assert!((std / expected - 1.0).abs() <= 0.2, "param {k}: {std} vs {expected}");
        }
    }

    #[test]
    fn unsatisfiable_constraints_are_reported() {
        let mut d = DesignVector::anthropomorphic();
        // points at the box corner: any outward move leaves the box, any inward one breaks monotone reach
        let corner = Vector3::repeat(BOX_HALF_WIDTH);
        d.axis_points = [corner; POINT_COUNT];
        let scales = PerturbScales {
            axis: 0.0,
            point: 1.0,
            base_offset: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(
            perturb(&d, 1.0, 1.0, &scales, &mut rng),
            Err(Error::ConstraintUnsatisfiable(MAX_REDRAWS))
        );
    }

    #[test]
    fn zero_iterations_echo_initial() {
        let cloud = small_cloud(10, 4);
        let s = AnnealSettings {
            max_iters: 0,
            ..Default::default()
        };
        let d = DesignVector::anthropomorphic();
        let (best, trace) = anneal(&d, &cloud, &s).unwrap();
        assert_eq!(best, d);
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn anneal_best_is_monotone_and_reproducible() {
        let cloud = small_cloud(30, 5);
        let s = AnnealSettings {
            max_iters: 60,
            rng_seed: 9,
            stall_window: 0,
            ..Default::default()
        };
        let d = DesignVector::anthropomorphic();
        let (best, trace) = anneal(&d, &cloud, &s).unwrap();
        assert!(trace.steps.windows(2).all(|w| w[1].best_cost <= w[0].best_cost));
        assert!(trace.best_cost() <= trace.initial_cost);
        assert_eq!(design_cost(&best, &cloud, &s.cost), trace.best_cost());
        let (best2, trace2) = anneal(&d, &cloud, &s).unwrap();
        assert_eq!(best, best2);
        assert_eq!(trace, trace2);
        assert!(trace.to_csv().starts_with("iter,cost,accepted,temperature,best_cost\n0,"));
    }

    #[test]
    fn stall_terminates_early() {
        let cloud = small_cloud(5, 6);
        let s = AnnealSettings {
            max_iters: 1000,
            stall_window: 10,
            stall_tolerance: f64::INFINITY,
            ..Default::default()
        };
        let (_, trace) = anneal(&DesignVector::anthropomorphic(), &cloud, &s).unwrap();
        assert_eq!(trace.steps.len(), 10);
    }

    #[test]
    fn design_file_round_trip() {
        let sys = default_system();
        let f = DesignFile::from_system(&sys, Some(1.5));
        let back = f.to_system(ChainDesign::default_positioner()).unwrap();
        assert_eq!(back.arm.home, sys.arm.home);
        for (a, b) in back.arm.joints.iter().zip(sys.arm.joints.iter()) {
            assert!((a.axis - b.axis).norm() < 1e-15);
            assert_eq!(a.point, b.point);
        }
    }

    #[test]
    fn random_designs_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            DesignVector::random_feasible(&mut rng, Vector3::zeros()).validate().unwrap();
        }
    }

    #[test]
    fn median_of_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
