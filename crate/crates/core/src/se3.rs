//! Rigid-body math on SO(3)/SE(3): rotations, poses, twists, the exponential
//! and logarithm maps, and the 6x6 adjoint.
//!
//! Twists are ordered `(angular, linear)` everywhere, both as [`Twist`] and
//! as raw 6-vectors.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this angle the exp/log maps switch to their Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-8;
/// `log_pose` refuses rotations closer than this to pi.
pub const NEAR_PI: f64 = 1e-6;
/// Chains longer than this get re-orthonormalized in [`Pose::product`].
pub const RENORMALIZE_EVERY: usize = 100;

/// Window around pi inside which the axis is read from the symmetric part of R.
const SYMMETRIC_AXIS_WINDOW: f64 = 1e-3;

pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// A proper rotation matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wraps a matrix without checking orthonormality.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    /// Projects an arbitrary matrix onto SO(3) (closest rotation in Frobenius norm).
    pub fn from_matrix_projected(m: &Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd u");
        let v_t = svd.v_t.expect("svd v_t");
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut fix = Matrix3::identity();
            fix[(2, 2)] = -1.0;
            r = u * fix * v_t;
        }
        Rotation(r)
    }

    /// Rodrigues' formula for a unit axis.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let k = skew(axis);
        Rotation(Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos()))
    }

    /// Exponential of a rotation vector (axis scaled by angle).
    pub fn exp(rotvec: &Vector3<f64>) -> Self {
        let theta = rotvec.norm();
        if theta < SMALL_ANGLE {
            let k = skew(rotvec);
            return Rotation(Matrix3::identity() + k + k * k * 0.5);
        }
        Self::from_axis_angle(&(rotvec / theta), theta)
    }

    /// Rotation vector with angle in `[0, pi]`.
    pub fn log(&self) -> Vector3<f64> {
        let (axis, angle) = self.axis_angle();
        axis * angle
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    /// Rotation angle in `[0, pi]`, computed with atan2 so it stays accurate
    /// near both 0 and pi.
    pub fn angle(&self) -> f64 {
        let s = 0.5 * vee(&(self.0 - self.0.transpose())).norm();
        let c = 0.5 * (self.0.trace() - 1.0);
        s.atan2(c)
    }

    /// Unit axis and angle in `[0, pi]`. The axis is arbitrary (z) for the identity.
    pub fn axis_angle(&self) -> (Vector3<f64>, f64) {
        let angle = self.angle();
        if angle < SMALL_ANGLE {
            let w = 0.5 * vee(&(self.0 - self.0.transpose()));
            let n = w.norm();
            if n == 0.0 {
                return (Vector3::z(), 0.0);
            }
            return (w / n, angle);
        }
        if angle > PI - SYMMETRIC_AXIS_WINDOW {
            return (self.symmetric_axis(angle), angle);
        }
        let w = vee(&(self.0 - self.0.transpose())) / (2.0 * angle.sin());
        (w.normalize(), angle)
    }

    /// Axis from `(R + R^T)/2 - cos(angle) I = (1 - cos(angle)) w w^T`, signed by
    /// the skew part when it is still informative.
    fn symmetric_axis(&self, angle: f64) -> Vector3<f64> {
        let c = angle.cos();
        let b = (self.0 + self.0.transpose()) * 0.5 - Matrix3::identity() * c;
        let k = (0..3)
            .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
            .unwrap_or(0);
        let mut w: Vector3<f64> = b.column(k).into_owned();
        w /= w.norm();
        let skew_part = vee(&(self.0 - self.0.transpose()));
        if w.dot(&skew_part) < 0.0 {
            w = -w;
        }
        w
    }

    /// Orthonormality error `||R^T R - I||` (Frobenius).
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }

    pub fn renormalized(&self) -> Self {
        Self::from_matrix_projected(&self.0)
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// Element of SE(3).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        Pose { rotation, translation }
    }

    pub fn identity() -> Self {
        Pose::new(Rotation::identity(), Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Pose::new(Rotation::identity(), t)
    }

    pub fn from_rotation(r: Rotation) -> Self {
        Pose::new(r, Vector3::zeros())
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Pose::new(rt, -(rt * self.translation))
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * *p + self.translation
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn renormalized(&self) -> Self {
        Pose::new(self.rotation.renormalized(), self.translation)
    }

    /// Left-to-right product of a sequence of poses, re-projecting the
    /// rotation onto SO(3) every [`RENORMALIZE_EVERY`] factors.
    pub fn product<I: IntoIterator<Item = Pose>>(poses: I) -> Pose {
        let mut acc = Pose::identity();
        for (i, p) in poses.into_iter().enumerate() {
            acc = acc * p;
            if (i + 1) % RENORMALIZE_EVERY == 0 {
                acc = acc.renormalized();
            }
        }
        acc
    }

    /// Reflection of the pose through the plane with unit normal `n` passing
    /// through the origin: `S T S` with `S = I - 2 n n^T`. The result is a
    /// proper rigid motion.
    pub fn reflected(&self, n: &Vector3<f64>) -> Pose {
        let s = reflection_matrix(n);
        Pose::new(
            Rotation::from_matrix_unchecked(s * self.rotation.matrix() * s),
            s * self.translation,
        )
    }

    /// Frobenius distance between the 4x4 matrices.
    pub fn distance(&self, other: &Pose) -> f64 {
        (self.matrix() - other.matrix()).norm()
    }
}

pub fn reflection_matrix(n: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::identity() - 2.0 * n * n.transpose()
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        Pose::new(
            self.rotation * rhs.rotation,
            self.rotation * rhs.translation + self.translation,
        )
    }
}

/// Screw axis or spatial velocity, `(angular, linear)`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub angular: Vector3<f64>,
    pub linear: Vector3<f64>,
}

impl Twist {
    pub fn new(angular: Vector3<f64>, linear: Vector3<f64>) -> Self {
        Twist { angular, linear }
    }

    pub fn zero() -> Self {
        Twist::default()
    }

    /// Revolute screw with unit axis `w` through point `c`: `(w, -w x c)`.
    pub fn revolute(axis: Vector3<f64>, point: Vector3<f64>) -> Self {
        Twist::new(axis, -axis.cross(&point))
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.angular.x,
            self.angular.y,
            self.angular.z,
            self.linear.x,
            self.linear.y,
            self.linear.z,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Twist::new(
            Vector3::new(v[0], v[1], v[2]),
            Vector3::new(v[3], v[4], v[5]),
        )
    }

    pub fn scaled(&self, s: f64) -> Self {
        Twist::new(self.angular * s, self.linear * s)
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

/// `e^{[xi] theta}` for a unit screw (unit angular part, or zero angular part
/// and unit linear part).
pub fn exp_twist(xi: &Twist, theta: f64) -> Pose {
    exp_vector(&xi.scaled(theta).to_vector())
}

/// Exponential of exponential coordinates `xi * theta` given as a 6-vector.
pub fn exp_vector(v: &Vector6<f64>) -> Pose {
    let w = Vector3::new(v[0], v[1], v[2]);
    let lin = Vector3::new(v[3], v[4], v[5]);
    let theta = w.norm();
    if theta < SMALL_ANGLE {
        let k = skew(&w);
        let r = Matrix3::identity() + k + k * k * 0.5;
        let p = lin + k * lin * 0.5;
        return Pose::new(Rotation::from_matrix_unchecked(r), p);
    }
    let axis = w / theta;
    let k = skew(&axis);
    let k2 = k * k;
    let (s, c) = theta.sin_cos();
    let r = Matrix3::identity() + k * s + k2 * (1.0 - c);
    let vel = lin / theta;
    let g = Matrix3::identity() * theta + k * (1.0 - c) + k2 * (theta - s);
    Pose::new(Rotation::from_matrix_unchecked(r), g * vel)
}

/// Exponential coordinates `xi * theta` of a pose. Total: near pi the axis is
/// taken from the symmetric part of the rotation, so this never fails.
/// Use [`log_pose`] when a near-pi rotation should be reported instead.
pub fn log_vector(t: &Pose) -> Vector6<f64> {
    let r = t.rotation.matrix();
    let p = t.translation;
    let angle = t.rotation.angle();
    if angle < SMALL_ANGLE {
        let wt = 0.5 * vee(&(r - r.transpose()));
        let vt = p - 0.5 * wt.cross(&p);
        return Vector6::new(wt.x, wt.y, wt.z, vt.x, vt.y, vt.z);
    }
    let (axis, angle) = t.rotation.axis_angle();
    let k = skew(&axis);
    let half = 0.5 * angle;
    let cot_term = 1.0 - half * half.cos() / half.sin();
    let vt = (Matrix3::identity() - k * half + k * k * cot_term) * p;
    let wt = axis * angle;
    Vector6::new(wt.x, wt.y, wt.z, vt.x, vt.y, vt.z)
}

/// Logarithm of a pose as a unit screw and an angle `theta >= 0`.
///
/// Rotations within [`NEAR_PI`] of pi return [`Error::AngleNearPi`]. Pure
/// translations come back as the prismatic screw `(0, p/|p|)` with
/// `theta = |p|`.
pub fn log_pose(t: &Pose) -> Result<(Twist, f64)> {
    let angle = t.rotation.angle();
    if angle > PI - NEAR_PI {
        return Err(Error::AngleNearPi { angle });
    }
    let v = log_vector(t);
    let tw = Twist::from_vector(&v);
    if angle < SMALL_ANGLE {
        let n = tw.linear.norm();
        if n == 0.0 {
            return Ok((Twist::zero(), 0.0));
        }
        return Ok((Twist::new(Vector3::zeros(), tw.linear / n), n));
    }
    Ok((tw.scaled(1.0 / angle), angle))
}

/// Sign-normalized screw: flips `(xi, theta)` to `(-xi, -theta)` so that the
/// first nonzero component of the angular part (or of the linear part for a
/// prismatic screw) is positive.
pub fn canonical_screw(xi: &Twist, theta: f64) -> (Twist, f64) {
    let v = xi.to_vector();
    let lead = v.iter().copied().find(|x| x.abs() > 1e-12);
    match lead {
        Some(x) if x < 0.0 => (xi.scaled(-1.0), -theta),
        _ => (*xi, theta),
    }
}

/// `Ad_T = [[R, 0], [p^ R, R]]` for `(angular, linear)` twists.
pub fn adjoint(t: &Pose) -> Matrix6<f64> {
    let r = t.rotation.matrix();
    let pr = skew(&t.translation) * r;
    let mut ad = Matrix6::zeros();
    ad.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    ad.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
    ad.fixed_view_mut::<3, 3>(3, 0).copy_from(&pr);
    ad
}

/// Applies `Ad_T` to a twist without building the 6x6 matrix.
pub fn adjoint_apply(t: &Pose, xi: &Twist) -> Twist {
    let w = t.rotation * xi.angular;
    let v = t.translation.cross(&w) + t.rotation * xi.linear;
    Twist::new(w, v)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = (a + PI).rem_euclid(2.0 * PI) - PI;
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}
