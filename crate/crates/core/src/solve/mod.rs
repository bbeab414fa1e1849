//! Part pose estimation: RANSAC + Umeyama initialization per part, then
//! joint-constrained least-squares refinement with part scales held fixed.

mod ransac;
mod refine;
pub mod residuals;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::canonical::{NaocsJointParams, PartScaling};
use crate::error::{Error, Result};
use crate::geometry::Similarity;
use crate::kinematics::{JointType, KinematicModel};
use crate::predict::PredictionRecord;

pub use ransac::{fit_part_ransac, RansacConfig};
pub use refine::{refine_constrained, SolverConfig};

/// Weights of the joint terms: `λ` on every joint residual and `μ` on the
/// prismatic rotation-identity term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintWeights {
    pub lambda: f64,
    pub mu: f64,
}

impl Default for ConstraintWeights {
    fn default() -> Self {
        Self { lambda: 1.0, mu: 1.0 }
    }
}

impl ConstraintWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.mu >= 0.0 && self.lambda.is_finite() && self.mu.is_finite()) {
            return Err(Error::InvalidConfig(
                "constraint weights must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Optimized part poses with their inlier masks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub poses: Vec<Similarity<f64>>,
    /// Per part, over that part's correspondences in prediction order.
    pub inliers: Vec<Vec<bool>>,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl PoseEstimate {
    pub fn inlier_ratio(&self, part: usize) -> f64 {
        let mask = &self.inliers[part];
        if mask.is_empty() {
            return 0.0;
        }
        mask.iter().filter(|&&b| b).count() as f64 / mask.len() as f64
    }
}

/// NPCS-to-camera correspondences of one predicted part.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Correspondences {
    pub npcs: Vec<Vector3<f64>>,
    pub points: Vec<Vector3<f64>>,
}

impl Correspondences {
    pub fn len(&self) -> usize {
        self.npcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.npcs.is_empty()
    }

    pub fn masked(&self, mask: &[bool]) -> Correspondences {
        let keep = |v: &[Vector3<f64>]| v.iter().zip(mask).filter(|(_, &m)| m).map(|(x, _)| *x).collect();
        Correspondences {
            npcs: keep(&self.npcs),
            points: keep(&self.points),
        }
    }
}

/// Groups camera points and predicted NPCS coordinates by predicted label.
pub fn part_correspondences(
    pred: &PredictionRecord,
    points: &[Vector3<f64>],
    part_count: usize,
) -> Result<Vec<Correspondences>> {
    if points.len() != pred.len() {
        return Err(Error::LengthMismatch(format!(
            "{} camera points for {} predictions",
            points.len(),
            pred.len()
        )));
    }
    let mut parts = vec![Correspondences::default(); part_count];
    for (i, p) in points.iter().enumerate() {
        let part = parts
            .get_mut(pred.labels[i])
            .ok_or_else(|| Error::InvalidPrediction(format!("point {i} labelled part {}", pred.labels[i])))?;
        part.npcs.push(pred.npcs[i]);
        part.points.push(*p);
    }
    Ok(parts)
}

/// One kinematic constraint between two part poses, with its axis (and
/// pivot) expressed in NAOCS.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointConstraint {
    pub parent: usize,
    pub child: usize,
    pub joint_type: JointType,
    pub axis: Vector3<f64>,
    pub pivot: Option<Vector3<f64>>,
}

impl JointConstraint {
    /// Pairs the model's joint topology with NAOCS joint parameters (ground
    /// truth or aggregated from votes).
    pub fn from_model(model: &KinematicModel<f64>, params: &NaocsJointParams) -> Result<Vec<JointConstraint>> {
        if params.len() != model.joint_count() {
            return Err(Error::CountMismatch(format!(
                "{} joint parameter sets for {} joints",
                params.len(),
                model.joint_count()
            )));
        }
        Ok(model
            .joints
            .iter()
            .zip(params)
            .map(|(j, p)| JointConstraint {
                parent: j.parent,
                child: j.child,
                joint_type: j.joint_type,
                axis: p.axis,
                pivot: p.pivot,
            })
            .collect())
    }
}

/// Per-part mean squared reprojection error `e_j`.
pub fn part_energy(pose: &Similarity<f64>, part: &Correspondences) -> f64 {
    if part.is_empty() {
        return 0.0;
    }
    let sum: f64 = part
        .npcs
        .iter()
        .zip(&part.points)
        .map(|(c, p)| (pose.apply(c) - p).norm_squared())
        .sum();
    sum / part.len() as f64
}

/// `Σ_j e_j`.
pub fn energy_vanilla(poses: &[Similarity<f64>], parts: &[Correspondences]) -> f64 {
    poses.iter().zip(parts).map(|(p, c)| part_energy(p, c)).sum()
}

/// Unweighted `e_k` of one joint, with `μ` scaling the prismatic
/// rotation-identity term.
pub fn joint_energy(poses: &[Similarity<f64>], joint: &JointConstraint, g: &[PartScaling], mu: f64) -> f64 {
    let (p1, p2) = (&poses[joint.parent], &poses[joint.child]);
    match joint.joint_type {
        JointType::Revolute => residuals::revolute_block(&p1.rotation, &p2.rotation, &joint.axis)
            .0
            .norm_squared(),
        JointType::Prismatic => {
            let (g1, g2) = (&g[joint.parent], &g[joint.child]);
            let ident = residuals::prismatic_identity_block(&p1.rotation, &p2.rotation).0;
            let cross = residuals::prismatic_cross_block(
                p1,
                p2,
                (g1.g_scale, &g1.g_offset),
                (g2.g_scale, &g2.g_offset),
                &joint.axis,
            )
            .0;
            mu * ident.norm_squared() + cross.norm_squared()
        }
    }
}

/// `Σ_j e_j + λ Σ_k e_k`.
pub fn energy_constrained(
    poses: &[Similarity<f64>],
    parts: &[Correspondences],
    joints: &[JointConstraint],
    g: &[PartScaling],
    weights: &ConstraintWeights,
) -> f64 {
    let vanilla = energy_vanilla(poses, parts);
    if weights.lambda == 0.0 {
        return vanilla;
    }
    let joint: f64 = joints.iter().map(|j| joint_energy(poses, j, g, weights.mu)).sum();
    vanilla + weights.lambda * joint
}

/// RANSAC initialization of every part, each with its own trial stream.
pub fn initialize(parts: &[Correspondences], cfg: &RansacConfig, seed: u64) -> Result<PoseEstimate> {
    let mut poses = Vec::with_capacity(parts.len());
    let mut inliers = Vec::with_capacity(parts.len());
    for (j, part) in parts.iter().enumerate() {
        let (pose, mask) = fit_part_ransac(
            &part.points,
            &part.npcs,
            cfg,
            crate::seed::derive_seed(seed, "part", j as u64),
        )?;
        poses.push(pose);
        inliers.push(mask);
    }
    let masked: Vec<_> = parts.iter().zip(&inliers).map(|(p, m)| p.masked(m)).collect();
    Ok(PoseEstimate {
        energy: energy_vanilla(&poses, &masked),
        poses,
        inliers,
        iterations: 0,
        converged: true,
    })
}
