//! Kinematic trees of rigid parts joined by single-DOF joints.
//!
//! The canonical object frame is the root part's frame with every joint at
//! its rest state; part samples are stored in that frame, so forward
//! kinematics at rest is the identity for every part.

mod procedural;

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotation_about, Similarity};
use crate::scalar::Real;
use crate::serde_util;

pub use procedural::{make_procedural_model, Category, ShapeParams};

/// Minimum number of canonical samples per part.
pub const MIN_PART_POINTS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointType {
    Revolute,
    Prismatic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Joint<T: Real> {
    pub id: usize,
    #[serde(rename = "type")]
    pub joint_type: JointType,
    pub parent: usize,
    pub child: usize,
    /// Unit direction in the canonical object frame.
    #[serde(with = "serde_util::vec3")]
    pub axis: Vector3<T>,
    /// A point on the rotation axis; revolute joints only.
    #[serde(with = "serde_util::opt_vec3")]
    pub pivot: Option<Vector3<T>>,
    /// `[lo, hi]`, radians for revolute joints, length for prismatic ones.
    pub range: [T; 2],
    pub rest_state: T,
}

impl<T: Real> Joint<T> {
    /// Motion of the child relative to the parent for joint state `state`.
    pub fn motion(&self, state: T) -> Similarity<T> {
        let delta = state - self.rest_state;
        match self.joint_type {
            JointType::Revolute => {
                let axis = Unit::new_normalize(self.axis);
                let rot = rotation_about(&axis, delta);
                let pivot = self.pivot.unwrap_or_else(Vector3::zeros);
                Similarity::new(T::one(), rot, pivot - rot * pivot)
            }
            JointType::Prismatic => Similarity::from_translation(self.axis * delta),
        }
    }

    pub fn in_range(&self, state: T) -> bool {
        state >= self.range[0] && state <= self.range[1]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct PartGeometry<T: Real> {
    pub id: usize,
    #[serde(with = "serde_util::vec3_list")]
    pub points: Vec<Vector3<T>>,
    /// Surface-area share of each sample; sums to one.
    pub area_weights: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct KinematicModel<T: Real> {
    pub category_name: String,
    pub root_part: usize,
    pub parts: Vec<PartGeometry<T>>,
    pub joints: Vec<Joint<T>>,
}

/// One state per joint, indexed like [`KinematicModel::joints`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointStates<T>(pub Vec<T>);

impl<T: Real> KinematicModel<T> {
    pub fn part_count(&self) -> usize {
        self.parts.len()
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn rest_states(&self) -> JointStates<T> {
        JointStates(self.joints.iter().map(|j| j.rest_state).collect())
    }

    /// Joint connecting `part` to its parent, if `part` is not the root.
    pub fn parent_joint(&self, part: usize) -> Option<&Joint<T>> {
        self.joints.iter().find(|j| j.child == part)
    }

    /// Checks the structural invariants: a tree over the parts rooted at
    /// `root_part`, unit axes, rest states within ranges and normalized
    /// area weights.
    pub fn validate(&self) -> Result<()> {
        let m = self.parts.len();
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if m < 2 {
            return bad(format!("need at least 2 parts, got {m}"));
        }
        if self.joints.len() != m - 1 {
            return bad(format!("{} joints for {m} parts", self.joints.len()));
        }
        if self.root_part >= m {
            return bad(format!("root part {} out of range", self.root_part));
        }
        let tol = T::lit(1e-9);
        for (i, part) in self.parts.iter().enumerate() {
            if part.id != i {
                return bad(format!("part at index {i} has id {}", part.id));
            }
            if part.points.len() < MIN_PART_POINTS {
                return bad(format!("part {i} has {} points", part.points.len()));
            }
            if part.area_weights.len() != part.points.len() {
                return bad(format!("part {i}: weights/points length differ"));
            }
            let total = part.area_weights.iter().fold(T::zero(), |a, &w| a + w);
            if part.area_weights.iter().any(|&w| !(w > T::zero())) || (total - T::one()).abs() > tol {
                return bad(format!("part {i}: area weights must be positive and sum to 1"));
            }
        }
        let mut has_parent = vec![false; m];
        for (k, joint) in self.joints.iter().enumerate() {
            if joint.id != k {
                return bad(format!("joint at index {k} has id {}", joint.id));
            }
            if joint.parent >= m || joint.child >= m || joint.parent == joint.child {
                return bad(format!("joint {k} has invalid parent/child"));
            }
            if joint.child == self.root_part || has_parent[joint.child] {
                return bad(format!("part {} has more than one parent", joint.child));
            }
            has_parent[joint.child] = true;
            if (joint.axis.norm() - T::one()).abs() > tol {
                return bad(format!("joint {k} axis is not unit length"));
            }
            if joint.joint_type == JointType::Revolute && joint.pivot.is_none() {
                return bad(format!("revolute joint {k} lacks a pivot"));
            }
            if !(joint.range[0] <= joint.rest_state && joint.rest_state <= joint.range[1]) {
                return bad(format!("joint {k} rest state outside its range"));
            }
        }
        if self.traversal_order().is_none() {
            return bad("joints do not connect every part to the root".into());
        }
        Ok(())
    }

    /// Joint indices in breadth-first order from the root, or `None` when
    /// some part is unreachable.
    fn traversal_order(&self) -> Option<Vec<usize>> {
        let mut order = Vec::with_capacity(self.joints.len());
        let mut queue = VecDeque::from([self.root_part]);
        let mut seen = vec![false; self.parts.len()];
        seen[self.root_part] = true;
        while let Some(part) = queue.pop_front() {
            for (k, j) in self.joints.iter().enumerate() {
                if j.parent == part && !seen[j.child] {
                    seen[j.child] = true;
                    order.push(k);
                    queue.push_back(j.child);
                }
            }
        }
        seen.iter().all(|&s| s).then_some(order)
    }

    /// Rigid transform of every part from the canonical object frame into
    /// the posed object frame.
    pub fn forward_kinematics(&self, states: &JointStates<T>) -> Result<Vec<Similarity<T>>> {
        if states.0.len() != self.joints.len() {
            return Err(Error::CountMismatch(format!(
                "{} states for {} joints",
                states.0.len(),
                self.joints.len()
            )));
        }
        for (k, (joint, &s)) in self.joints.iter().zip(&states.0).enumerate() {
            if !joint.in_range(s) {
                return Err(Error::StateOutOfRange {
                    joint: k,
                    state: s.as_f64(),
                    lo: joint.range[0].as_f64(),
                    hi: joint.range[1].as_f64(),
                });
            }
        }
        let mut poses = vec![Similarity::identity(); self.parts.len()];
        let order = self
            .traversal_order()
            .ok_or_else(|| Error::InvalidModel("joints do not form a tree".into()))?;
        for k in order {
            let joint = &self.joints[k];
            poses[joint.child] = poses[joint.parent].compose(&joint.motion(states.0[k]));
        }
        Ok(poses)
    }

    /// Part poses in the camera frame: `camera ∘ FK`.
    pub fn pose_in_camera(&self, states: &JointStates<T>, camera: &Similarity<T>) -> Result<Vec<Similarity<T>>> {
        Ok(self
            .forward_kinematics(states)?
            .iter()
            .map(|p| camera.compose(p))
            .collect())
    }
}

impl KinematicModel<f64> {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self =
            serde_json::from_str(text).map_err(|e| Error::SchemaVersionMismatch(format!("model: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

impl fmt::Display for JointType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JointType::Revolute => "revolute",
            JointType::Prismatic => "prismatic",
        })
    }
}

impl FromStr for JointType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "revolute" => Ok(JointType::Revolute),
            "prismatic" => Ok(JointType::Prismatic),
            other => Err(Error::InvalidModel(format!("unknown joint type `{other}`"))),
        }
    }
}
