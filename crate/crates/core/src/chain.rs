//! Serial chains in product-of-exponentials form and the bilateral tree
//! (positioner carrying two mirrored arms).

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6xX, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::{adjoint, adjoint_apply, exp_twist, reflection_matrix, Pose, Twist};

/// Symmetric default joint range, +-170 degrees.
pub const DEFAULT_LIMIT: f64 = 170.0 * std::f64::consts::PI / 180.0;

/// Arm degrees of freedom.
pub const ARM_DOF: usize = 7;
/// Positioner degrees of freedom.
pub const BASE_DOF: usize = 6;
/// Total tree degrees of freedom (base + two arms).
pub const TREE_DOF: usize = BASE_DOF + 2 * ARM_DOF;

/// Normal of the sagittal plane of the positioner flange frame.
pub fn sagittal_normal() -> Vector3<f64> {
    Vector3::y()
}

pub type JointVector = DVector<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    /// Unit rotation axis.
    pub axis: Vector3<f64>,
    /// A point on the axis, in the chain's base frame (m).
    pub point: Vector3<f64>,
    /// `(lower, upper)` in rad.
    pub limits: (f64, f64),
}

impl JointSpec {
    pub fn new(axis: Vector3<f64>, point: Vector3<f64>) -> Self {
        JointSpec {
            axis,
            point,
            limits: (-DEFAULT_LIMIT, DEFAULT_LIMIT),
        }
    }

    pub fn with_limits(mut self, lower: f64, upper: f64) -> Self {
        self.limits = (lower, upper);
        self
    }

    pub fn screw(&self) -> Twist {
        Twist::revolute(self.axis, self.point)
    }

    pub fn clamp(&self, q: f64) -> f64 {
        q.clamp(self.limits.0, self.limits.1)
    }

    fn validate(&self, i: usize) -> Result<()> {
        if ((self.axis.norm() - 1.0).abs()) > 1e-12 {
            return Err(Error::InvalidDesign(format!("joint {} axis is not unit", i + 1)));
        }
        if !(self.limits.0 < self.limits.1) {
            return Err(Error::InvalidDesign(format!("joint {} limits are not ordered", i + 1)));
        }
        Ok(())
    }
}

/// A revolute serial chain: `T(q) = exp(xi_1 q_1) ... exp(xi_n q_n) M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDesign {
    pub joints: Vec<JointSpec>,
    /// End-effector pose at `q = 0`.
    pub home: Pose,
}

impl ChainDesign {
    pub fn new(joints: Vec<JointSpec>, home: Pose) -> Self {
        ChainDesign { joints, home }
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    /// Index (0-based) of the first of the three wrist joints.
    pub fn wrist_start(&self) -> usize {
        self.dof().saturating_sub(3)
    }

    pub fn wrist_point(&self) -> Vector3<f64> {
        self.joints[self.wrist_start()].point
    }

    pub fn limits(&self) -> Vec<(f64, f64)> {
        self.joints.iter().map(|j| j.limits).collect()
    }

    /// Checks unit axes, ordered limits, and the intersecting, non-degenerate wrist.
    pub fn validate(&self) -> Result<()> {
        if self.dof() < 3 {
            return Err(Error::InvalidDesign("chain needs at least 3 joints".into()));
        }
        for (i, j) in self.joints.iter().enumerate() {
            j.validate(i)?;
        }
        let w = &self.joints[self.wrist_start()..];
        if (w[1].point - w[0].point).norm() > 1e-12 || (w[2].point - w[0].point).norm() > 1e-12 {
            return Err(Error::InvalidDesign("wrist axes do not intersect".into()));
        }
        let m = Matrix3::from_columns(&[w[0].axis, w[1].axis, w[2].axis]);
        if m.determinant().abs() < 1e-6 {
            return Err(Error::InvalidDesign("wrist axes are degenerate".into()));
        }
        Ok(())
    }

    fn check_dim(&self, q: &JointVector) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                actual: q.len(),
            });
        }
        Ok(())
    }

    pub fn fk(&self, q: &JointVector) -> Result<Pose> {
        self.check_dim(q)?;
        let mut t = Pose::identity();
        for (j, &qi) in self.joints.iter().zip(q.iter()) {
            t = t * exp_twist(&j.screw(), qi);
        }
        Ok(t * self.home)
    }

    /// Space-frame Jacobian; column `i` is `Ad_{exp(xi_1 q_1)...exp(xi_{i-1} q_{i-1})} xi_i`.
    pub fn spatial_jacobian(&self, q: &JointVector) -> Result<Matrix6xX<f64>> {
        Ok(self.fk_and_jacobian(q)?.1)
    }

    /// Forward kinematics and space Jacobian in one pass.
    pub fn fk_and_jacobian(&self, q: &JointVector) -> Result<(Pose, Matrix6xX<f64>)> {
        self.check_dim(q)?;
        let mut jac = Matrix6xX::zeros(self.dof());
        let mut t = Pose::identity();
        for (i, (j, &qi)) in self.joints.iter().zip(q.iter()).enumerate() {
            let s = j.screw();
            jac.set_column(i, &adjoint_apply(&t, &s).to_vector());
            t = t * exp_twist(&s, qi);
        }
        Ok((t * self.home, jac))
    }

    /// Re-expresses the chain in a parent frame where this chain's base sits at `frame`.
    pub fn transformed(&self, frame: &Pose) -> ChainDesign {
        let joints = self
            .joints
            .iter()
            .map(|j| JointSpec {
                axis: frame.rotation * j.axis,
                point: frame.transform_point(&j.point),
                limits: j.limits,
            })
            .collect();
        ChainDesign::new(joints, *frame * self.home)
    }

    /// Mid-range joint vector.
    pub fn mid_configuration(&self) -> JointVector {
        JointVector::from_iterator(self.dof(), self.joints.iter().map(|j| 0.5 * (j.limits.0 + j.limits.1)))
    }

    /// The conventional 6-DOF positioner: waist, shoulder, elbow, spherical
    /// wrist; 0.4 m upper arm and forearm, flange 0.1 m past the wrist centre.
    pub fn default_positioner() -> ChainDesign {
        let wrist = Vector3::new(0.4, 0.0, 0.7);
        let joints = vec![
            JointSpec::new(Vector3::z(), Vector3::zeros()),
            JointSpec::new(Vector3::y(), Vector3::new(0.0, 0.0, 0.3)),
            JointSpec::new(Vector3::y(), Vector3::new(0.0, 0.0, 0.7)),
            JointSpec::new(Vector3::x(), wrist),
            JointSpec::new(Vector3::y(), wrist),
            JointSpec::new(Vector3::z(), wrist),
        ];
        ChainDesign::new(joints, Pose::from_translation(Vector3::new(0.5, 0.0, 0.7)))
    }
}

/// Reflects a chain through the plane with unit normal `n` through its base
/// origin. Axis points are reflected; axis directions are reflected and negated
/// so the same joint angles produce the mirror image motion:
/// `fk(mirror(c), q) == reflect(fk(c, q))`.
pub fn mirror(chain: &ChainDesign, n: &Vector3<f64>) -> ChainDesign {
    let s = reflection_matrix(n);
    let joints = chain
        .joints
        .iter()
        .map(|j| JointSpec {
            axis: -(s * j.axis),
            point: s * j.point,
            limits: j.limits,
        })
        .collect();
    ChainDesign::new(joints, chain.home.reflected(n))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArmSide {
    Left,
    Right,
}

impl ArmSide {
    pub fn code(&self) -> &'static str {
        match self {
            ArmSide::Left => "L",
            ArmSide::Right => "R",
        }
    }
}

/// Two mirrored 7-DOF arms on a shared positioner.
///
/// The arm morphology (`arm`) is expressed in the left arm's mount frame; the
/// left mount sits at `base_offset + (0, center_distance / 2, 0)` in the
/// positioner flange frame and the right arm is its reflection through the
/// flange's sagittal (x-z) plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilateralDesign {
    pub arm: ChainDesign,
    pub base_offset: Vector3<f64>,
    pub center_distance: f64,
    /// Tool offset of the left arm, in the arm frame. The right one is its mirror.
    pub tool_offset: Vector3<f64>,
    pub base_chain: ChainDesign,
}

impl BilateralDesign {
    pub fn validate(&self) -> Result<()> {
        self.arm.validate()?;
        self.base_chain.validate()?;
        if self.arm.dof() != ARM_DOF || self.base_chain.dof() != BASE_DOF {
            return Err(Error::InvalidDesign("expected a 6-DOF base and 7-DOF arms".into()));
        }
        if !(self.center_distance >= 0.0) {
            return Err(Error::InvalidDesign("center distance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn tool_offset(&self, side: ArmSide) -> Vector3<f64> {
        match side {
            ArmSide::Left => self.tool_offset,
            ArmSide::Right => reflection_matrix(&sagittal_normal()) * self.tool_offset,
        }
    }

    /// Mount frame of an arm in the positioner flange frame.
    pub fn mount(&self, side: ArmSide) -> Pose {
        let left = self.base_offset + Vector3::new(0.0, 0.5 * self.center_distance, 0.0);
        match side {
            ArmSide::Left => Pose::from_translation(left),
            ArmSide::Right => Pose::from_translation(reflection_matrix(&sagittal_normal()) * left),
        }
    }

    /// The arm chain expressed in the positioner flange frame.
    pub fn arm_chain(&self, side: ArmSide) -> ChainDesign {
        let left = self.arm.transformed(&self.mount(ArmSide::Left));
        match side {
            ArmSide::Left => left,
            ArmSide::Right => mirror(&left, &sagittal_normal()),
        }
    }

    /// The design-optimal dexterous wrist point of an arm, in the flange frame.
    pub fn dexterous_point(&self, side: ArmSide) -> Vector3<f64> {
        self.arm_chain(side).wrist_point()
    }

    pub fn tree_jacobian(&self, q_base: &JointVector, q_left: &JointVector, q_right: &JointVector) -> Result<DMatrix<f64>> {
        Ok(TreeKinematics::new(self, q_base, q_left, q_right)?.jacobian())
    }
}

/// Kinematic quantities of the tree at one configuration.
#[derive(Clone, Debug)]
pub struct TreeKinematics {
    /// Positioner flange pose in the world frame.
    pub t_sk: Pose,
    pub j_base: Matrix6xX<f64>,
    /// Arm end-effector poses in the flange frame (left, right).
    pub t_arm: [Pose; 2],
    /// Arm space Jacobians in the flange frame (left, right).
    pub j_arm: [Matrix6xX<f64>; 2],
}

impl TreeKinematics {
    pub fn new(sys: &BilateralDesign, q_base: &JointVector, q_left: &JointVector, q_right: &JointVector) -> Result<Self> {
        let (t_sk, j_base) = sys.base_chain.fk_and_jacobian(q_base)?;
        let (tl, jl) = sys.arm_chain(ArmSide::Left).fk_and_jacobian(q_left)?;
        let (tr, jr) = sys.arm_chain(ArmSide::Right).fk_and_jacobian(q_right)?;
        Ok(TreeKinematics {
            t_sk,
            j_base,
            t_arm: [tl, tr],
            j_arm: [jl, jr],
        })
    }

    /// World-frame end-effector pose.
    pub fn end_effector(&self, side: ArmSide) -> Pose {
        self.t_sk * self.t_arm[side as usize]
    }

    /// The stacked 12x20 tree Jacobian
    /// `[[J_K, Ad_{T_sk} J_L, 0], [J_K, 0, Ad_{T_sk} J_R]]`.
    pub fn jacobian(&self) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(12, TREE_DOF);
        let ad = adjoint(&self.t_sk);
        for (row, side) in [ArmSide::Left, ArmSide::Right].into_iter().enumerate() {
            let r0 = 6 * row;
            jac.view_mut((r0, 0), (6, BASE_DOF)).copy_from(&self.j_base);
            let c0 = BASE_DOF + ARM_DOF * row;
            let mapped = ad * &self.j_arm[side as usize];
            jac.view_mut((r0, c0), (6, ARM_DOF)).copy_from(&mapped);
        }
        jac
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::design::DesignVector;
    use crate::se3::{skew, vee, Rotation};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sample_chain() -> ChainDesign {
        DesignVector::anthropomorphic().arm_chain(Vector3::new(0.0, 0.0, -0.03))
    }

    fn random_q(rng: &mut ChaCha8Rng, n: usize) -> JointVector {
        JointVector::from_iterator(n, (0..n).map(|_| rng.random_range(-2.5..2.5)))
    }

    /// Rotates each joint frame sequentially by explicit conjugation
    /// `T(c) Rot(w, q) T(-c)`, independent of the twist exponential.
    fn conjugation_fk(chain: &ChainDesign, q: &JointVector) -> Pose {
        let mut t = Pose::identity();
        for (j, &qi) in chain.joints.iter().zip(q.iter()) {
            let g = Pose::from_translation(j.point)
                * Pose::from_rotation(Rotation::from_axis_angle(&j.axis, qi))
                * Pose::from_translation(-j.point);
            t = t * g;
        }
        t * chain.home
    }

    /// Spatial twist from central differences: `dT T^-1 = [w^, v]`.
    pub(crate) fn fd_twist(f: impl Fn(f64) -> Pose, h: f64) -> nalgebra::Vector6<f64> {
        let tp = f(h).matrix();
        let tm = f(-h).matrix();
        let t0 = f(0.0);
        let d = (tp - tm) / (2.0 * h);
        let m = d * t0.inverse().matrix();
        let w = vee(&m.fixed_view::<3, 3>(0, 0).into_owned());
        let v = m.fixed_view::<3, 1>(0, 3).into_owned();
        nalgebra::Vector6::new(w.x, w.y, w.z, v.x, v.y, v.z)
    }

    #[test]
    fn fk_at_zero_is_home() {
        let c = sample_chain();
        assert_eq!(c.fk(&JointVector::zeros(7)).unwrap(), c.home);
    }

    #[test]
    fn fk_rejects_wrong_dimension() {
        let c = sample_chain();
        assert_eq!(
            c.fk(&JointVector::zeros(6)),
            Err(Error::DimensionMismatch { expected: 7, actual: 6 })
        );
        assert!(c.spatial_jacobian(&JointVector::zeros(8)).is_err());
    }

    #[test]
    fn single_joint_quarter_turn() {
        let mut joints = vec![JointSpec::new(Vector3::z(), Vector3::zeros())];
        for _ in 0..6 {
            joints.push(JointSpec::new(Vector3::x(), Vector3::new(5.0, 5.0, 5.0)));
        }
        let c = ChainDesign::new(joints, Pose::from_translation(Vector3::new(1.0, 0.0, 0.0)));
        let mut q = JointVector::zeros(7);
        q[0] = PI / 2.0;
        let t = c.fk(&q).unwrap();
        assert_relative_eq!(t.translation, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn fk_matches_conjugation_oracle() {
        let c = sample_chain();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q = random_q(&mut rng, 7);
            assert!(c.fk(&q).unwrap().distance(&conjugation_fk(&c, &q)) < 1e-12);
        }
    }

    #[test]
    fn jacobian_at_zero_stacks_screws() {
        let c = sample_chain();
        let j = c.spatial_jacobian(&JointVector::zeros(7)).unwrap();
        for (i, js) in c.joints.iter().enumerate() {
            assert_eq!(j.column(i).into_owned(), js.screw().to_vector());
        }
    }

    #[test]
    fn planar_chain_angular_rows() {
        let joints = (0..7)
            .map(|i| JointSpec::new(Vector3::z(), Vector3::new(0.1 * i as f64, 0.0, 0.0)))
            .collect();
        let c = ChainDesign::new(joints, Pose::from_translation(Vector3::new(0.8, 0.0, 0.0)));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let j = c.spatial_jacobian(&random_q(&mut rng, 7)).unwrap();
        for i in 0..7 {
            assert_relative_eq!(j.fixed_view::<3, 1>(0, i).into_owned(), Vector3::z(), epsilon = 1e-15);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let c = sample_chain();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let q = random_q(&mut rng, 7);
            let j = c.spatial_jacobian(&q).unwrap();
            for i in 0..7 {
                let fd = fd_twist(
                    |h| {
                        let mut qh = q.clone();
                        qh[i] += h;
                        c.fk(&qh).unwrap()
                    },
                    1e-6,
                );
                let col = j.column(i).into_owned();
                assert!((fd - col).norm() <= 1e-5 * col.norm().max(1e-3));
            }
        }
    }

    #[test]
    fn jacobian_prefix_property() {
        let c = sample_chain();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let q = random_q(&mut rng, 7);
        let j = c.spatial_jacobian(&q).unwrap();
        for i in 0..7 {
            let mut q2 = q.clone();
            for k in i..7 {
                q2[k] += rng.random_range(-1.0..1.0);
            }
            let j2 = c.spatial_jacobian(&q2).unwrap();
            assert_eq!(j.column(i), j2.column(i));
        }
    }

    #[test]
    fn fk_is_pure() {
        let c = sample_chain();
        let q = JointVector::from_vec(vec![0.1, -0.2, 0.3, 0.5, -0.4, 0.2, 0.9]);
        let first = c.fk(&q).unwrap();
        for _ in 0..100_000 {
            assert_eq!(c.fk(&q).unwrap(), first);
        }
    }

    #[test]
    fn mirror_is_an_involution() {
        let c = sample_chain();
        let n = Vector3::new(1.0, 2.0, -0.5).normalize();
        let back = mirror(&mirror(&c, &n), &n);
        for (a, b) in c.joints.iter().zip(back.joints.iter()) {
            assert!((a.axis - b.axis).norm() < 1e-12);
            assert!((a.point - b.point).norm() < 1e-12);
        }
        assert!(back.home.distance(&c.home) < 1e-12);
    }

    #[test]
    fn mirror_reflects_axis_points() {
        let mut c = sample_chain();
        c.joints[0].point = Vector3::new(0.1, 0.2, 0.0);
        let m = mirror(&c, &Vector3::x());
        assert_relative_eq!(m.joints[0].point, Vector3::new(-0.1, 0.2, 0.0));
    }

    #[test]
    fn mirrored_fk_is_reflected_fk() {
        let c = sample_chain();
        let n = sagittal_normal();
        let m = mirror(&c, &n);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let q = random_q(&mut rng, 7);
            // oracle: reflect the 4x4 by explicit S T S with S = diag(I - 2nn^T, 1)
            let s3 = Matrix3::identity() - 2.0 * n * n.transpose();
            let mut s = nalgebra::Matrix4::identity();
            s.fixed_view_mut::<3, 3>(0, 0).copy_from(&s3);
            let expected = s * c.fk(&q).unwrap().matrix() * s;
            assert!((m.fk(&q).unwrap().matrix() - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn tree_jacobian_blocks() {
        let sys = crate::design::default_system();
        let zb = JointVector::zeros(6);
        let za = JointVector::zeros(7);
        let jac = sys.tree_jacobian(&zb, &za, &za).unwrap();
        let ad = adjoint(&sys.base_chain.fk(&zb).unwrap());
        let jl = ad * sys.arm_chain(ArmSide::Left).spatial_jacobian(&za).unwrap();
        let jr = ad * sys.arm_chain(ArmSide::Right).spatial_jacobian(&za).unwrap();
        assert_eq!(jac.view((0, 6), (6, 7)).into_owned(), DMatrix::from_iterator(6, 7, jl.iter().copied()));
        assert_eq!(jac.view((6, 13), (6, 7)).into_owned(), DMatrix::from_iterator(6, 7, jr.iter().copied()));
        assert_eq!(jac.view((0, 13), (6, 7)).norm(), 0.0);
        assert_eq!(jac.view((6, 6), (6, 7)).norm(), 0.0);
    }

    #[test]
    fn right_rates_do_not_move_left_end_effector() {
        let sys = crate::design::default_system();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let jac = sys
            .tree_jacobian(&random_q(&mut rng, 6), &random_q(&mut rng, 7), &random_q(&mut rng, 7))
            .unwrap();
        let mut qd = DVector::zeros(TREE_DOF);
        for i in 13..20 {
            qd[i] = rng.random_range(-1.0..1.0);
        }
        assert_eq!((jac * qd).rows(0, 6).norm(), 0.0);
    }

    #[test]
    fn skew_vee_round_trip() {
        let w = Vector3::new(0.3, -1.0, 2.0);
        assert_eq!(vee(&skew(&w)), w);
    }
}
