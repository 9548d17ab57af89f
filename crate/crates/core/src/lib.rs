//! Task-driven morphology optimization and design-informed motion for a
//! symmetric bilateral manipulator carried by a positioning base.
//!
//! Modules, bottom up: [`se3`] rigid-body algebra, [`chain`] product of
//! exponentials kinematics, [`ik`] damped differential inverse kinematics,
//! [`data`] task trajectories and pose clouds, [`design`] annealing over arm
//! morphologies, [`motion`] null-space redundancy resolution, and
//! [`dexterity`] performance metrics.

pub mod chain;
pub mod data;
pub mod design;
pub mod dexterity;
pub mod error;
pub mod ik;
pub mod motion;
pub mod se3;

pub use chain::{ArmSide, BilateralDesign, ChainDesign, JointSpec, JointVector};
pub use data::{PoseCloud, RawTrajectory, TaskLabel};
pub use design::{AnnealSettings, AnnealTrace, CostSettings, DesignVector};
pub use dexterity::{DexterityReport, PointDexterity};
pub use error::{Error, Result};
pub use ik::{IkResult, IkSettings};
pub use motion::{MotionSettings, MotionState, MotionTrace, NullSpaceGoal, TransitionSettings};
pub use se3::{Pose, Rotation, Twist};
