//! First-order differential inverse kinematics with a singularity-damped,
//! weighted pseudoinverse.

use nalgebra::{DMatrix, DVector, Matrix6xX, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::chain::{ChainDesign, JointVector};
use crate::error::{Error, Result};
use crate::se3::{adjoint_apply, log_vector, wrap_angle, Pose, Twist};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IkSettings {
    /// Fraction of the pseudoinverse step applied per iteration, in (0, 1].
    pub step_size: f64,
    /// Convergence threshold on the (weighted) error twist norm.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Damping added to `J W^-1 J^T` near singularities.
    pub damping: f64,
    /// Damping switches on when `rcond(J J^T)` drops below this.
    pub rcond_threshold: f64,
    /// Diagonal of the joint weight `W`; empty means identity.
    pub joint_weights: Vec<f64>,
    /// Per-component weight of the error twist `(w_x, w_y, w_z, v_x, v_y, v_z)`
    /// used in the convergence test. Ones give the plain twist norm.
    pub error_weights: [f64; 6],
}

impl Default for IkSettings {
    fn default() -> Self {
        IkSettings {
            step_size: 0.5,
            tolerance: 1e-6,
            max_iters: 500,
            damping: 1e-3,
            rcond_threshold: 1e-3,
            joint_weights: Vec::new(),
            error_weights: [1.0; 6],
        }
    }
}

impl IkSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(Error::InvalidInput("step_size must be in (0, 1]".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        if !(self.damping >= 0.0) {
            return Err(Error::InvalidInput("damping must be non-negative".into()));
        }
        if self.joint_weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidInput("joint weights must be positive".into()));
        }
        if self.error_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidInput("error weights must be non-negative".into()));
        }
        Ok(())
    }

    fn weight_diag(&self, n: usize) -> Result<DVector<f64>> {
        if self.joint_weights.is_empty() {
            return Ok(DVector::from_element(n, 1.0));
        }
        if self.joint_weights.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.joint_weights.len(),
            });
        }
        Ok(DVector::from_column_slice(&self.joint_weights))
    }

    pub fn error_norm(&self, v: &Twist) -> f64 {
        v.to_vector()
            .iter()
            .zip(self.error_weights.iter())
            .map(|(x, w)| w * x * x)
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IkResult {
    pub q: JointVector,
    /// Space-frame error twist at the returned configuration.
    pub residual: Twist,
    pub residual_twist_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Some update was clipped by a joint limit.
    pub limit_saturated: bool,
}

/// Reciprocal condition number `lambda_min / lambda_max` of a symmetric PSD matrix.
pub fn rcond_sym(a: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min().max(0.0);
    if max <= 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Weighted damped pseudoinverse `W^-1 J^T (J W^-1 J^T + l I)^-1`, where
/// `l = lambda` if `rcond(J J^T) < rcond_threshold` and `0` otherwise.
///
/// `weights` is the diagonal of `W`.
pub fn damped_pinv(j: &DMatrix<f64>, weights: &DVector<f64>, lambda: f64, rcond_threshold: f64) -> Result<DMatrix<f64>> {
    Ok(damped_pinv_flagged(j, weights, lambda, rcond_threshold)?.0)
}

/// [`damped_pinv`] plus whether damping was engaged.
pub fn damped_pinv_flagged(
    j: &DMatrix<f64>,
    weights: &DVector<f64>,
    lambda: f64,
    rcond_threshold: f64,
) -> Result<(DMatrix<f64>, bool)> {
    let (m, n) = j.shape();
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: weights.len(),
        });
    }
    let winv_jt = {
        let mut a = j.transpose();
        for (mut row, w) in a.row_iter_mut().zip(weights.iter()) {
            row /= *w;
        }
        a
    };
    let jjt = j * j.transpose();
    let damped = rcond_sym(&jjt) < rcond_threshold;
    let mut a = j * &winv_jt;
    if damped {
        for i in 0..m {
            a[(i, i)] += lambda;
        }
    }
    let inv = invert_spd(a)?;
    Ok((winv_jt * inv, damped))
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub(crate) fn invert_spd(a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a.cholesky().ok_or(Error::NumericallySingular)?;
    let inv = chol.inverse();
    if inv.iter().all(|x| x.is_finite()) {
        Ok(inv)
    } else {
        Err(Error::NumericallySingular)
    }
}

pub(crate) fn to_dmatrix(j: &Matrix6xX<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(6, j.ncols(), j.as_slice())
}

/// Space-frame error twist `Ad_{T_sb} log(T_sb^-1 T)`.
pub fn error_twist(current: &Pose, target: &Pose) -> Twist {
    let body = Twist::from_vector(&log_vector(&(current.inverse() * *target)));
    adjoint_apply(current, &body)
}

/// Iterates `q <- q + a J^+ V` from `seed` until the error twist norm is within
/// tolerance or `max_iters` updates have been applied. Joint values are
/// wrapped to `(-pi, pi]` and clamped to the limits after every update.
pub fn solve_ik(chain: &ChainDesign, target: &Pose, seed: &JointVector, settings: &IkSettings) -> Result<IkResult> {
    let n = chain.dof();
    if seed.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: seed.len(),
        });
    }
    let weights = settings.weight_diag(n)?;
    let mut q = seed.clone();
    let mut saturated = false;
    let mut iterations = 0;
    loop {
        let (t_sb, jac) = chain.fk_and_jacobian(&q)?;
        let v = error_twist(&t_sb, target);
        let err = settings.error_norm(&v);
        if err <= settings.tolerance || iterations >= settings.max_iters {
            return Ok(IkResult {
                q,
                residual: v,
                residual_twist_norm: err,
                iterations,
                converged: err <= settings.tolerance,
                limit_saturated: saturated,
            });
        }
        let pinv = damped_pinv(&to_dmatrix(&jac), &weights, settings.damping, settings.rcond_threshold)?;
        let dq = pinv * DVector::from_column_slice(v.to_vector().as_slice());
        for (i, joint) in chain.joints.iter().enumerate() {
            let raw = wrap_angle(q[i] + settings.step_size * dq[i]);
            let clamped = joint.clamp(raw);
            saturated |= clamped != raw;
            q[i] = clamped;
        }
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::DesignVector;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain() -> ChainDesign {
        DesignVector::anthropomorphic().arm_chain(Vector3::new(0.0, 0.0, -0.03))
    }

    #[test]
    fn pinv_of_orthonormal_rows() {
        let mut j = DMatrix::zeros(6, 7);
        j.view_mut((0, 0), (6, 6)).fill_with_identity();
        let p = damped_pinv(&j, &DVector::from_element(7, 1.0), 1e-3, 1e-3).unwrap();
        let mut expected = DMatrix::zeros(7, 6);
        expected.view_mut((0, 0), (6, 6)).fill_with_identity();
        assert_relative_eq!(p, expected, epsilon = 1e-15);
    }

    #[test]
    fn pinv_rank_deficient_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut j = DMatrix::from_fn(6, 7, |_, _| rng.random_range(-1.0..1.0));
        let r0 = j.row(0).into_owned();
        j.set_row(5, &r0);
        let lambda = 1e-3;
        let (p, damped) = damped_pinv_flagged(&j, &DVector::from_element(7, 1.0), lambda, 1e-3).unwrap();
        assert!(damped);
        assert!(p.iter().all(|x| x.is_finite()));
        // ||J^T (J J^T + l I)^-1|| <= 1 / (2 sqrt(l))
        assert!(p.norm() <= 6.0 / (2.0 * lambda.sqrt()));
    }

    #[test]
    fn pinv_is_right_inverse_when_undamped() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let j = DMatrix::from_fn(6, 7, |_, _| rng.random_range(-1.0..1.0));
            let w = DVector::from_fn(7, |_, _| rng.random_range(0.5..3.0));
            let (p, damped) = damped_pinv_flagged(&j, &w, 1e-3, 0.0).unwrap();
            assert!(!damped);
            assert!((&j * p - DMatrix::identity(6, 6)).norm() < 1e-9);
        }
    }

    #[test]
    fn undamped_update_when_well_conditioned() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut j = DMatrix::from_fn(6, 7, |_, _| rng.random_range(-1.0..1.0));
        j.view_mut((0, 0), (6, 6)).fill_with_identity();
        let w = DVector::from_element(7, 1.0);
        let a = damped_pinv(&j, &w, 1e-3, 1e-3).unwrap();
        let b = damped_pinv(&j, &w, 0.0, 0.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn singular_without_damping_is_reported() {
        let j = DMatrix::zeros(6, 7);
        assert_eq!(
            damped_pinv(&j, &DVector::from_element(7, 1.0), 0.0, 1e-3),
            Err(Error::NumericallySingular)
        );
    }

    #[test]
    fn already_at_target() {
        let c = chain();
        let seed = JointVector::from_vec(vec![0.2, -0.3, 0.1, 0.7, 0.2, -0.4, 0.3]);
        let target = c.fk(&seed).unwrap();
        let r = solve_ik(&c, &target, &seed, &IkSettings::default()).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 1);
        assert!(r.residual_twist_norm <= 1e-6);
    }

    #[test]
    fn converges_from_noisy_seed() {
        let c = chain();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = IkSettings::default();
        let mut ok = 0;
        for _ in 0..50 {
            let q_star = JointVector::from_fn(7, |_, _| rng.random_range(-1.5..1.5));
            let seed = &q_star + JointVector::from_fn(7, |_, _| rng.random_range(-0.1..0.1));
            let r = solve_ik(&c, &c.fk(&q_star).unwrap(), &seed, &s).unwrap();
            if r.converged {
                assert!(r.residual_twist_norm <= 1e-6);
                ok += 1;
            }
        }
        assert!(ok >= 48, "{ok}/50");
    }

    #[test]
    fn unreachable_target_terminates() {
        let c = chain();
        let target = Pose::from_translation(Vector3::new(3.0, 0.0, 0.0));
        let s = IkSettings {
            max_iters: 100,
            ..Default::default()
        };
        let r = solve_ik(&c, &target, &JointVector::zeros(7), &s).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 100);
        assert!(r.q.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn solver_is_deterministic() {
        let c = chain();
        let target = c.fk(&JointVector::from_element(7, 0.3)).unwrap();
        let a = solve_ik(&c, &target, &JointVector::zeros(7), &IkSettings::default()).unwrap();
        let b = solve_ik(&c, &target, &JointVector::zeros(7), &IkSettings::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn output_respects_limits() {
        let mut c = chain();
        for j in c.joints.iter_mut() {
            j.limits = (-0.2, 0.2);
        }
        let target = c.fk(&JointVector::from_element(7, 0.15)).unwrap() * Pose::from_translation(Vector3::new(0.05, 0.0, 0.0));
        let r = solve_ik(&c, &target, &JointVector::zeros(7), &IkSettings::default()).unwrap();
        assert!(r.q.iter().all(|x| x.abs() <= 0.2));
    }

    #[test]
    fn settings_validation() {
        assert!(IkSettings::default().validate().is_ok());
        let bad = IkSettings {
            step_size: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
