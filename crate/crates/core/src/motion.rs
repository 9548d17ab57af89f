//! Redundancy resolution for the base + two-arm tree: mass-weighted
//! generalized inverse, a null-space potential pulling each arm's dexterous
//! wrist location onto its task, tanh mass switching, and the workspace
//! transition simulation.

use nalgebra::{DMatrix, DVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::chain::{sagittal_normal, ArmSide, BilateralDesign, JointVector, TreeKinematics, ARM_DOF, BASE_DOF, TREE_DOF};
use crate::dexterity::{evaluate_point, NormalizationBounds, PointDexterity};
use crate::error::{Error, Result};
use crate::ik::{error_twist, invert_spd, rcond_sym, to_dmatrix};
use crate::se3::{reflection_matrix, Pose, Rotation};

const SIDES: [ArmSide; 2] = [ArmSide::Left, ArmSide::Right];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionState {
    pub q_base: JointVector,
    pub q_left: JointVector,
    pub q_right: JointVector,
    pub time: f64,
}

impl MotionState {
    pub fn zeros() -> Self {
        MotionState {
            q_base: JointVector::zeros(BASE_DOF),
            q_left: JointVector::zeros(ARM_DOF),
            q_right: JointVector::zeros(ARM_DOF),
            time: 0.0,
        }
    }

    pub fn arm(&self, side: ArmSide) -> &JointVector {
        match side {
            ArmSide::Left => &self.q_left,
            ArmSide::Right => &self.q_right,
        }
    }

    /// `[q_base; q_left; q_right]`.
    pub fn stacked(&self) -> DVector<f64> {
        let mut q = DVector::zeros(TREE_DOF);
        q.rows_mut(0, BASE_DOF).copy_from(&self.q_base);
        q.rows_mut(BASE_DOF, ARM_DOF).copy_from(&self.q_left);
        q.rows_mut(BASE_DOF + ARM_DOF, ARM_DOF).copy_from(&self.q_right);
        q
    }

    pub fn from_stacked(q: &DVector<f64>, time: f64) -> Result<Self> {
        if q.len() != TREE_DOF {
            return Err(Error::DimensionMismatch {
                expected: TREE_DOF,
                actual: q.len(),
            });
        }
        Ok(MotionState {
            q_base: q.rows(0, BASE_DOF).into_owned(),
            q_left: q.rows(BASE_DOF, ARM_DOF).into_owned(),
            q_right: q.rows(BASE_DOF + ARM_DOF, ARM_DOF).into_owned(),
            time,
        })
    }

    pub fn kinematics(&self, sys: &BilateralDesign) -> Result<TreeKinematics> {
        TreeKinematics::new(sys, &self.q_base, &self.q_left, &self.q_right)
    }
}

/// Secondary objective: each arm's dexterous wrist location (carried by the
/// base) should sit on that arm's workspace target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullSpaceGoal {
    /// World-frame workspace targets `w` (left, right).
    pub targets: [Vector3<f64>; 2],
    /// Diagonals of the positive weights `Q` (left, right).
    pub weights: [Vector3<f64>; 2],
    /// Dexterous offset `r` of the left arm in its mount frame; the right
    /// arm uses the mirror image.
    pub dexterous_offset: Vector3<f64>,
    /// Tool offset `t` of the left arm; mirrored for the right.
    pub tool_offset: Vector3<f64>,
}

impl NullSpaceGoal {
    /// Goal with the design's wrist centre as the dexterous offset.
    pub fn for_design(sys: &BilateralDesign, targets: [Vector3<f64>; 2], weight: f64) -> Self {
        NullSpaceGoal {
            targets,
            weights: [Vector3::repeat(weight); 2],
            dexterous_offset: sys.arm.wrist_point(),
            tool_offset: sys.tool_offset,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().flat_map(|w| w.iter()).any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidInput("null-space weights must be non-negative".into()));
        }
        Ok(())
    }

    /// Flange-frame location of `r + t` for an arm.
    pub fn flange_point(&self, sys: &BilateralDesign, side: ArmSide) -> Vector3<f64> {
        let left = sys.mount(ArmSide::Left).transform_point(&(self.dexterous_offset + self.tool_offset));
        match side {
            ArmSide::Left => left,
            ArmSide::Right => reflection_matrix(&sagittal_normal()) * left,
        }
    }

    /// World-frame errors `w_i - (r_i + t_i)`.
    pub fn errors(&self, sys: &BilateralDesign, kin: &TreeKinematics) -> [Vector3<f64>; 2] {
        SIDES.map(|s| self.targets[s as usize] - kin.t_sk.transform_point(&self.flange_point(sys, s)))
    }

    pub fn potential(&self, sys: &BilateralDesign, kin: &TreeKinematics) -> f64 {
        let e = self.errors(sys, kin);
        (0..2).map(|i| e[i].component_mul(&self.weights[i]).dot(&e[i])).sum()
    }

    /// `dH/dq` over the 20 tree joints; only the base columns are nonzero.
    pub fn gradient(&self, sys: &BilateralDesign, kin: &TreeKinematics) -> DVector<f64> {
        let e = self.errors(sys, kin);
        let mut g = DVector::zeros(TREE_DOF);
        for side in SIDES {
            let i = side as usize;
            let x = kin.t_sk.transform_point(&self.flange_point(sys, side));
            let qe = e[i].component_mul(&self.weights[i]);
            for j in 0..BASE_DOF {
                let col = kin.j_base.column(j);
                let w = Vector3::new(col[0], col[1], col[2]);
                let v = Vector3::new(col[3], col[4], col[5]);
                let dx = v + w.cross(&x);
                g[j] -= 2.0 * dx.dot(&qe);
            }
        }
        g
    }
}

/// Surrogate per-segment masses and the tanh switching law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MassSettings {
    /// Diagonal mass of the base, left, and right segments.
    pub masses: [f64; 3],
    /// Activation thresholds `beta` (m) per segment.
    pub thresholds: [f64; 3],
    /// Which segments use the switching law; the others keep scale 1.
    pub activated: [bool; 3],
}

impl Default for MassSettings {
    fn default() -> Self {
        MassSettings {
            masses: [10.0, 1.0, 1.0],
            thresholds: [0.02, 0.02, 0.02],
            activated: [true, false, false],
        }
    }
}

impl MassSettings {
    pub fn validate(&self) -> Result<()> {
        if self.masses.iter().any(|m| !(*m > 0.0)) || self.thresholds.iter().any(|b| !(*b >= 0.0)) {
            return Err(Error::InvalidInput("masses must be positive and thresholds non-negative".into()));
        }
        Ok(())
    }
}

/// `tanh(d - beta) + 1.5`, always within `[0.5, 2.5]`.
pub fn switching_scale(distance: f64, threshold: f64) -> f64 {
    (distance - threshold).tanh() + 1.5
}

/// Diagonal of the scaled 20x20 mass matrix and the per-segment scales. The
/// base distance is the mean of the two arms' `|w - (r + t)|`.
pub fn scaled_mass(
    sys: &BilateralDesign,
    kin: &TreeKinematics,
    goal: &NullSpaceGoal,
    settings: &MassSettings,
) -> (DVector<f64>, [f64; 3]) {
    let e = goal.errors(sys, kin);
    let d = [0.5 * (e[0].norm() + e[1].norm()), e[0].norm(), e[1].norm()];
    let mut scales = [1.0; 3];
    for s in 0..3 {
        if settings.activated[s] {
            scales[s] = switching_scale(d[s], settings.thresholds[s]);
        }
    }
    let mut diag = DVector::zeros(TREE_DOF);
    for (seg, (start, len)) in [(0, BASE_DOF), (BASE_DOF, ARM_DOF), (BASE_DOF + ARM_DOF, ARM_DOF)]
        .into_iter()
        .enumerate()
    {
        diag.rows_mut(start, len).fill(scales[seg] * settings.masses[seg]);
    }
    (diag, scales)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionSettings {
    pub mass: MassSettings,
    /// Gain on the null-space descent term.
    pub nullspace_gain: f64,
    /// Damping added to `J M^-1 J^T` when its reciprocal condition drops
    /// below `rcond_threshold`.
    pub damping: f64,
    pub rcond_threshold: f64,
}

impl Default for MotionSettings {
    fn default() -> Self {
        MotionSettings {
            mass: MassSettings::default(),
            nullspace_gain: 10.0,
            damping: 1e-3,
            rcond_threshold: 1e-8,
        }
    }
}

impl MotionSettings {
    pub fn validate(&self) -> Result<()> {
        self.mass.validate()?;
        if !(self.nullspace_gain >= 0.0) || !(self.damping >= 0.0) {
            return Err(Error::InvalidInput("gains must be non-negative".into()));
        }
        Ok(())
    }
}

/// Operators of the mass-weighted generalized inverse at one configuration.
#[derive(Clone, Debug)]
pub struct RateOperators {
    /// The 12x20 tree Jacobian.
    pub jacobian: DMatrix<f64>,
    /// Diagonal of `M^-1`.
    pub mass_inverse: DVector<f64>,
    /// `G = M^-1 J^T (J M^-1 J^T)^-1`.
    pub generalized_inverse: DMatrix<f64>,
    pub damped: bool,
}

impl RateOperators {
    pub fn new(jacobian: DMatrix<f64>, mass_diag: &DVector<f64>, settings: &MotionSettings) -> Result<Self> {
        let mass_inverse = mass_diag.map(|m| 1.0 / m);
        let mut minv_jt = jacobian.transpose();
        for (mut row, w) in minv_jt.row_iter_mut().zip(mass_inverse.iter()) {
            row *= *w;
        }
        let mut a = &jacobian * &minv_jt;
        let damped = rcond_sym(&a) < settings.rcond_threshold;
        if damped {
            for i in 0..a.nrows() {
                a[(i, i)] += settings.damping;
            }
        }
        let generalized_inverse = minv_jt * invert_spd(a)?;
        Ok(RateOperators {
            jacobian,
            mass_inverse,
            generalized_inverse,
            damped,
        })
    }

    /// `(I - G J) x`.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        x - &self.generalized_inverse * (&self.jacobian * x)
    }

    /// `G V_d - k (I - G J) M^-1 grad`.
    pub fn rates(&self, v_d: &DVector<f64>, gradient: &DVector<f64>, gain: f64) -> DVector<f64> {
        let primary = &self.generalized_inverse * v_d;
        if gain == 0.0 || gradient.iter().all(|g| *g == 0.0) {
            return primary;
        }
        let descent = self.project(&gradient.component_mul(&self.mass_inverse));
        primary - descent * gain
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateSolution {
    pub qdot: DVector<f64>,
    /// `J qdot`.
    pub achieved: DVector<f64>,
    pub potential: f64,
    pub scales: [f64; 3],
    /// The damped fallback was engaged, so `J qdot` only approximates `V_d`.
    pub damped: bool,
}

/// Joint rates for desired stacked arm twists `v_d` (left then right, space
/// frame). With `informed` off the null-space term is dropped.
pub fn resolve_rates(
    sys: &BilateralDesign,
    state: &MotionState,
    v_d: &DVector<f64>,
    goal: &NullSpaceGoal,
    informed: bool,
    settings: &MotionSettings,
) -> Result<RateSolution> {
    if v_d.len() != 12 {
        return Err(Error::DimensionMismatch {
            expected: 12,
            actual: v_d.len(),
        });
    }
    let kin = state.kinematics(sys)?;
    let (mass, scales) = scaled_mass(sys, &kin, goal, &settings.mass);
    let ops = RateOperators::new(kin.jacobian(), &mass, settings)?;
    let gradient = if informed {
        goal.gradient(sys, &kin)
    } else {
        DVector::zeros(TREE_DOF)
    };
    let qdot = ops.rates(v_d, &gradient, settings.nullspace_gain);
    let achieved = &ops.jacobian * &qdot;
    Ok(RateSolution {
        qdot,
        achieved,
        potential: goal.potential(sys, &kin),
        scales,
        damped: ops.damped,
    })
}

/// Parameters of a workspace transition run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransitionSettings {
    pub duration: f64,
    pub dt: f64,
    /// Proportional gain on the pose error added to the feedforward twist.
    pub feedback_gain: f64,
    /// Diagonal weight applied to both arms' null-space errors.
    pub nullspace_weight: f64,
    pub initial_base: Vec<f64>,
    pub motion: MotionSettings,
}

impl Default for TransitionSettings {
    fn default() -> Self {
        TransitionSettings {
            duration: 4.0,
            dt: 0.01,
            feedback_gain: 10.0,
            nullspace_weight: 20.0,
            initial_base: vec![0.0; BASE_DOF],
            motion: MotionSettings::default(),
        }
    }
}

impl TransitionSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.duration >= 0.0) {
            return Err(Error::InvalidInput("dt must be positive and duration non-negative".into()));
        }
        if self.initial_base.len() != BASE_DOF {
            return Err(Error::DimensionMismatch {
                expected: BASE_DOF,
                actual: self.initial_base.len(),
            });
        }
        self.motion.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionStep {
    pub state: MotionState,
    pub commanded: Vec<f64>,
    pub achieved: Vec<f64>,
    /// Mean of the two arms' raw dexterity terms.
    pub dexterity: PointDexterity,
    pub potential: f64,
    pub scale_base: f64,
    pub damped: bool,
    /// The update leaving this step was clipped by a joint limit.
    pub saturated: bool,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionTrace {
    pub steps: Vec<MotionStep>,
    /// Final world end-effector poses (left, right).
    pub final_poses: Vec<Pose>,
    /// Final commanded target poses (left, right).
    pub final_targets: Vec<Pose>,
}

impl MotionTrace {
    pub fn dexterity(&self) -> Vec<PointDexterity> {
        self.steps.iter().map(|s| s.dexterity).collect()
    }

    /// Largest `|J qdot - V_d|` over steps.
    pub fn tracking_error(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| {
                s.commanded
                    .iter()
                    .zip(&s.achieved)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Largest final translation error of the two arms.
    pub fn endpoint_error(&self) -> f64 {
        self.final_poses
            .iter()
            .zip(&self.final_targets)
            .map(|(p, t)| (p.translation - t.translation).norm())
            .fold(0.0, f64::max)
    }

    /// `t,seg,q_1..q_7,dext,H,scaleK` with one row per segment per step; the
    /// base has six joints so its `q_7` is empty.
    pub fn to_csv(&self, bounds: &NormalizationBounds) -> String {
        let mut s = String::from("t,seg,q_1,q_2,q_3,q_4,q_5,q_6,q_7,dext,H,scaleK\n");
        for st in &self.steps {
            let dext = bounds.composite(&st.dexterity);
            for (seg, q) in [("K", &st.state.q_base), ("L", &st.state.q_left), ("R", &st.state.q_right)] {
                s.push_str(&format!("{},{}", st.state.time, seg));
                for k in 0..ARM_DOF {
                    match q.get(k) {
                        Some(v) => s.push_str(&format!(",{v}")),
                        None => s.push(','),
                    }
                }
                s.push_str(&format!(",{},{},{}\n", dext, st.potential, st.scale_base));
            }
        }
        s
    }
}

/// Quintic time scaling and its derivative on `[0, 1]`.
fn quintic(tau: f64) -> (f64, f64) {
    let t = tau.clamp(0.0, 1.0);
    (
        t * t * t * (10.0 - 15.0 * t + 6.0 * t * t),
        30.0 * t * t * (1.0 - t) * (1.0 - t),
    )
}

/// Workspace frame along the straight line `w1 -> w2` and its space twist.
fn workspace_frame(w1: &Pose, w2: &Pose, time: f64, duration: f64) -> (Pose, Vector6<f64>) {
    let (s, ds) = if duration > 0.0 {
        let (s, ds) = quintic(time / duration);
        (s, ds / duration)
    } else {
        (1.0, 0.0)
    };
    let phi = (w1.rotation.transpose() * w2.rotation).log();
    let delta = w2.translation - w1.translation;
    let frame = Pose::new(w1.rotation * Rotation::exp(&(phi * s)), w1.translation + delta * s);
    let omega = w1.rotation.matrix() * phi * ds;
    let pdot = delta * ds;
    let v = pdot - omega.cross(&frame.translation);
    (frame, Vector6::new(omega.x, omega.y, omega.z, v.x, v.y, v.z))
}

/// Moves both arms' task frames with the workspace frame from `w1` to `w2`.
/// The arms start at their home configurations, the base at
/// `settings.initial_base`. With `informed` the null-space potential pulls
/// each arm's dexterous location `dexterous_offset` onto its moving target.
pub fn simulate_transition(
    sys: &BilateralDesign,
    dexterous_offset: Vector3<f64>,
    w1: &Pose,
    w2: &Pose,
    informed: bool,
    settings: &TransitionSettings,
) -> Result<MotionTrace> {
    sys.validate()?;
    settings.validate()?;
    let mut state = MotionState {
        q_base: JointVector::from_column_slice(&settings.initial_base),
        ..MotionState::zeros()
    };
    let kin0 = state.kinematics(sys)?;
    let w1_inv = w1.inverse();
    let task_offsets = SIDES.map(|s| w1_inv * kin0.end_effector(s));
    let arm_chains = SIDES.map(|s| sys.arm_chain(s));
    let limits = sys.arm.limits();
    let base_limits = sys.base_chain.limits();
    let n = (settings.duration / settings.dt).round() as usize;
    let mut trace = MotionTrace::default();
    for k in 0..=n {
        state.time = k as f64 * settings.dt;
        let kin = state.kinematics(sys)?;
        let (frame, ff) = workspace_frame(w1, w2, state.time, settings.duration);
        let targets = task_offsets.map(|c| frame * c);
        let mut v_d = DVector::zeros(12);
        for side in SIDES {
            let i = side as usize;
            let fb = error_twist(&kin.end_effector(side), &targets[i]).to_vector();
            v_d.rows_mut(6 * i, 6).copy_from(&(ff + fb * settings.feedback_gain));
        }
        let goal = NullSpaceGoal {
            targets: targets.map(|t| t.translation),
            weights: [Vector3::repeat(settings.nullspace_weight); 2],
            dexterous_offset,
            tool_offset: sys.tool_offset,
        };
        let sol = resolve_rates(sys, &state, &v_d, &goal, informed, &settings.motion)?;
        let arms: Vec<PointDexterity> = SIDES
            .iter()
            .map(|&s| {
                let j = to_dmatrix(&arm_chains[s as usize].spatial_jacobian(state.arm(s))?);
                evaluate_point(&j, state.arm(s), &limits)
            })
            .collect::<Result<_>>()?;
        let mut step = MotionStep {
            state: state.clone(),
            commanded: v_d.iter().copied().collect(),
            achieved: sol.achieved.iter().copied().collect(),
            dexterity: PointDexterity::mean(&arms),
            potential: sol.potential,
            scale_base: sol.scales[0],
            damped: sol.damped,
            saturated: false,
        };
        if k == n {
            trace.final_poses = SIDES.iter().map(|&s| kin.end_effector(s)).collect();
            trace.final_targets = targets.to_vec();
            trace.steps.push(step);
            break;
        }
        let q = state.stacked() + sol.qdot * settings.dt;
        let mut clamped = q.clone();
        for (i, v) in clamped.iter_mut().enumerate() {
            let (lo, hi) = if i < BASE_DOF {
                base_limits[i]
            } else {
                limits[(i - BASE_DOF) % ARM_DOF]
            };
            *v = v.clamp(lo, hi);
        }
        step.saturated = clamped != q;
        trace.steps.push(step);
        state = MotionState::from_stacked(&clamped, state.time)?;
    }
    Ok(trace)
}

/// The standard transition fixture: the workspace frame starts at the
/// positioner flange at rest and moves `displacement` in the world frame.
pub fn transition_fixture(sys: &BilateralDesign, settings: &TransitionSettings, displacement: Vector3<f64>) -> Result<(Pose, Pose)> {
    let q = JointVector::from_column_slice(&settings.initial_base);
    let w1 = sys.base_chain.fk(&q)?;
    let w2 = Pose::new(w1.rotation, w1.translation + displacement);
    Ok((w1, w2))
}
