//! Articulated object pose estimation from per-point canonical-coordinate
//! predictions.
//!
//! A [`kinematics::KinematicModel`] is normalized into an object-level
//! canonical space (NAOCS) and per-part spaces (NPCS) by [`canonical`].
//! [`observe`] renders partial point clouds of posed instances, [`predict`]
//! stands in for a network that labels every point with its part, NPCS
//! coordinate, NPCS-to-NAOCS scaling and joint vote, and [`solve`] turns
//! those into part poses, refined under the joint constraints. [`recover`]
//! reads joint parameters and states off the poses and [`evaluate`] scores
//! the lot.
//!
//! Geometry and kinematics are generic over the scalar type; the estimation
//! stages work in `f64`. The aliases below name the common instantiations.

// NaN must fail the positivity checks, hence `!(x > 0)` throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod canonical;
pub mod error;
pub mod evaluate;
pub mod geometry;
pub mod kinematics;
pub mod observe;
pub mod pipeline;
pub mod predict;
pub mod recover;
pub mod scalar;
pub mod seed;
mod serde_util;
pub mod solve;

pub use error::{Error, Result};
pub use scalar::Real;

pub type SimilarityTransform = geometry::Similarity<f64>;
pub type SimilarityTransformF32 = geometry::Similarity<f32>;
pub type OrientedBox = geometry::OrientedBox<f64>;
pub type OrientedBoxF32 = geometry::OrientedBox<f32>;
pub type Line = geometry::Line3<f64>;
pub type LineF32 = geometry::Line3<f32>;
pub type KinematicModel = kinematics::KinematicModel<f64>;
pub type KinematicModelF32 = kinematics::KinematicModel<f32>;
pub type Joint = kinematics::Joint<f64>;
pub type JointStates = kinematics::JointStates<f64>;
